//! Levenberg-Marquardt least squares for small dense problems.

use nalgebra::{DMatrix, DVector};

/// A least-squares problem: residuals r(p) and optionally their Jacobian.
pub trait Problem {
    fn residual_count(&self) -> usize;

    fn residuals(&self, p: &[f64], out: &mut [f64]);

    /// Fills ∂rᵢ/∂pⱼ and returns true, or returns false to request central
    /// differences.
    fn jacobian(&self, _p: &[f64], _out: &mut DMatrix<f64>) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative parameter step below which the fit is converged.
    pub step_tolerance: f64,
    /// Relative SSR change below which the fit is converged.
    pub ssr_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            step_tolerance: 1e-10,
            ssr_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub ssr: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Jacobian at the returned parameters.
    pub jacobian: DMatrix<f64>,
}

impl LmOutcome {
    /// s²(JᵀJ)⁻¹ with s² = SSR/(n − p). Directions the data do not constrain
    /// get infinite variance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let (n, p) = self.jacobian.shape();
        let dof = n.saturating_sub(p).max(1) as f64;
        let s2 = self.ssr / dof;
        let jtj = self.jacobian.transpose() * &self.jacobian;
        let svd = jtj.clone().svd(true, true);
        let v = svd.v_t.expect("requested").transpose();
        let max_sv = svd.singular_values.max();
        let mut cov = DMatrix::zeros(p, p);
        let mut unbounded = vec![false; p];
        for k in 0..p {
            let sv = svd.singular_values[k];
            if !(sv > 1e-13 * max_sv) {
                for i in 0..p {
                    if v[(i, k)].abs() > 1e-6 {
                        unbounded[i] = true;
                    }
                }
                continue;
            }
            for i in 0..p {
                for j in 0..p {
                    cov[(i, j)] += v[(i, k)] * v[(j, k)] / sv;
                }
            }
        }
        cov *= s2;
        for i in 0..p {
            if unbounded[i] {
                for j in 0..p {
                    cov[(i, j)] = if i == j { f64::INFINITY } else { f64::NAN };
                    cov[(j, i)] = cov[(i, j)];
                }
            }
        }
        cov
    }
}

/// Central-difference Jacobian with steps ∛ε·max(|pⱼ|, 1).
pub fn numeric_jacobian<P: Problem + ?Sized>(problem: &P, p: &[f64]) -> DMatrix<f64> {
    let n = problem.residual_count();
    let mut jac = DMatrix::zeros(n, p.len());
    let mut x = p.to_vec();
    let (mut plus, mut minus) = (vec![0.0; n], vec![0.0; n]);
    for j in 0..p.len() {
        let h = f64::EPSILON.cbrt() * p[j].abs().max(1.0);
        x[j] = p[j] + h;
        problem.residuals(&x, &mut plus);
        x[j] = p[j] - h;
        problem.residuals(&x, &mut minus);
        x[j] = p[j];
        for i in 0..n {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

fn jacobian_at<P: Problem + ?Sized>(problem: &P, p: &[f64]) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(problem.residual_count(), p.len());
    if problem.jacobian(p, &mut jac) {
        jac
    } else {
        numeric_jacobian(problem, p)
    }
}

fn ssr_at<P: Problem + ?Sized>(problem: &P, p: &[f64], buf: &mut [f64]) -> f64 {
    problem.residuals(p, buf);
    let s: f64 = buf.iter().map(|r| r * r).sum();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

/// Damped Gauss-Newton with Marquardt's diagonal scaling.
pub fn minimize<P: Problem + ?Sized>(problem: &P, x0: &[f64], opts: &LmOptions) -> LmOutcome {
    let n = problem.residual_count();
    let np = x0.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    let mut trial_r = vec![0.0; n];
    let mut ssr = ssr_at(problem, &x, &mut r);
    let mut lambda = 1e-3;
    let mut converged = ssr == 0.0;
    let mut iterations = 0;
    let mut jac = jacobian_at(problem, &x);

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let diag_max = jtj.diagonal().max().max(f64::MIN_POSITIVE);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..np {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * diag_max);
            }
            let step = match a.cholesky() {
                Some(ch) => -ch.solve(&g),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial_ssr = ssr_at(problem, &trial, &mut trial_r);
            if trial_ssr <= ssr {
                let rel_step = step
                    .iter()
                    .zip(&x)
                    .map(|(s, v)| s.abs() / (v.abs() + opts.step_tolerance))
                    .fold(0.0, f64::max);
                let rel_ssr = (ssr - trial_ssr) / ssr.max(f64::MIN_POSITIVE);
                x = trial;
                std::mem::swap(&mut r, &mut trial_r);
                ssr = trial_ssr;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel_step < opts.step_tolerance || rel_ssr < opts.ssr_tolerance || ssr == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at machine precision
            converged = true;
            break;
        }
        jac = jacobian_at(problem, &x);
    }
    if iterations == 0 || !converged {
        jac = jacobian_at(problem, &x);
    }
    LmOutcome {
        params: x,
        ssr,
        iterations,
        converged,
        jacobian: jac,
    }
}
