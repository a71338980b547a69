//! Parameter recovery for Rabi, Ramsey, echo and visibility data.
//!
//! Each fit seeds the optimizer from a profile scan: the nonlinear
//! parameters (frequency, T₂*) are gridded around a periodogram peak while
//! offset, amplitude and phase are solved linearly at every grid node.

pub mod lm;
pub mod models;
pub mod stats;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub use crate::budget::t2prime_from_sigma;
use crate::csvio;
use crate::error::{Error, Result};
use crate::signal::EnvelopeShape;
use lm::{LmOptions, LmOutcome, Problem};
use models::{EchoModel, FitModel, RabiModel, RamseyModel, VisibilityModel};
pub use stats::{clopper_pearson, p3_from_counts, CountEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub t: f64,
    pub p3: f64,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<DataPoint>,
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.t.is_finite() || !p.p3.is_finite() {
                return Err(Error::invalid("points", format!("point {i} is not finite")));
            }
            if let Some(w) = p.weight {
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(Error::invalid("weight", format!("point {i} has an invalid weight")));
                }
            }
        }
        if let Some(i) = points.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid("t", format!("times must increase strictly (point {})", i + 1)));
        }
        if points.iter().any(|p| !(0.0..=1.0).contains(&p.p3)) {
            log::warn!("dataset contains P3 values outside [0, 1]");
        }
        Ok(Self { points })
    }

    pub fn from_xy(t: &[f64], p3: &[f64]) -> Result<Self> {
        if t.len() != p3.len() {
            return Err(Error::invalid("p3", "length differs from t"));
        }
        Self::new(
            t.iter()
                .zip(p3)
                .map(|(&t, &p3)| DataPoint { t, p3, weight: None })
                .collect(),
        )
    }

    /// CSV with header `t_s,p3[,weight]`; errors name the offending row.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::from_rows(csvio::numeric_rows(text, 2, 3)?, 1, Some(2))
    }

    /// Times from the first column and P₃ from the column named `column`,
    /// e.g. `p3_analytic` of a simulation export. Other columns are ignored.
    pub fn from_csv_column(text: &str, column: &str) -> Result<Self> {
        let names = csvio::header(text).ok_or_else(|| Error::Config("dataset has no header row".into()))?;
        let idx = names
            .iter()
            .position(|n| n == column)
            .filter(|&i| i > 0)
            .ok_or_else(|| Error::Config(format!("column `{column}` not found; header is `{}`", names.join(","))))?;
        Self::from_rows(csvio::numeric_rows(text, names.len(), names.len())?, idx, None)
    }

    fn from_rows(rows: Vec<(usize, Vec<f64>)>, value: usize, weight: Option<usize>) -> Result<Self> {
        for pair in rows.windows(2) {
            if pair[1].1[0] <= pair[0].1[0] {
                return Err(Error::Parse {
                    row: pair[1].0,
                    message: "t_s must increase strictly".into(),
                });
            }
        }
        Self::new(
            rows.into_iter()
                .map(|(_, r)| DataPoint {
                    t: r[0],
                    p3: r[value],
                    weight: weight.and_then(|w| r.get(w).copied()),
                })
                .collect(),
        )
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read dataset {}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p3).collect()
    }

    fn sqrt_weights(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.weight.unwrap_or(1.0).sqrt()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<FitParameter>,
    /// Quantities computed from the parameters, with propagated errors.
    pub derived: Vec<FitParameter>,
    pub ssr: f64,
    pub converged: bool,
    pub iterations: usize,
    pub points: usize,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&FitParameter> {
        self.params.iter().chain(&self.derived).find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.value)
    }

    pub fn stderr(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.stderr)
    }

    /// `name = value ± stderr` lines at full precision.
    pub fn to_key_value(&self) -> String {
        let mut out = format!("model = {}\n", self.model);
        for p in self.params.iter().chain(&self.derived) {
            let _ = writeln!(out, "{} = {:.16e}", p.name, p.value);
            let _ = writeln!(out, "{}_stderr = {:.16e}", p.name, p.stderr);
        }
        let _ = writeln!(out, "ssr = {:.16e}", self.ssr);
        let _ = writeln!(out, "converged = {}", self.converged);
        let _ = writeln!(out, "iterations = {}", self.iterations);
        let _ = writeln!(out, "points = {}", self.points);
        out
    }
}

/// Initial-value overrides keyed by parameter name, internal units (rad/s, s).
pub type Overrides = BTreeMap<String, f64>;

fn check_overrides(overrides: &Overrides, allowed: &[&str]) -> Result<()> {
    match overrides.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Config(format!(
            "unknown initial value `{k}`; expected one of {}",
            allowed.join(", ")
        ))),
        None => Ok(()),
    }
}

/// Wraps a phase into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let y = x - 2.0 * PI * ((x - PI) / (2.0 * PI)).ceil();
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

struct CurveProblem<'a, M> {
    model: &'a M,
    t: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl<'a, M: FitModel> CurveProblem<'a, M> {
    fn new(model: &'a M, data: &Dataset) -> Self {
        Self {
            model,
            t: data.times(),
            y: data.values(),
            w: data.sqrt_weights(),
        }
    }
}

impl<M: FitModel> Problem for CurveProblem<'_, M> {
    fn residual_count(&self) -> usize {
        self.t.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for i in 0..self.t.len() {
            out[i] = self.w[i] * (self.model.value(self.t[i], p) - self.y[i]);
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) -> bool {
        let mut g = vec![0.0; self.model.n_params()];
        for i in 0..self.t.len() {
            self.model.gradient(self.t[i], p, &mut g);
            for (j, gj) in g.iter().enumerate() {
                out[(i, j)] = self.w[i] * gj;
            }
        }
        true
    }
}

fn optimize<M: FitModel>(model: &M, data: &Dataset, x0: &[f64]) -> Result<(LmOutcome, DMatrix<f64>)> {
    let problem = CurveProblem::new(model, data);
    let out = lm::minimize(&problem, x0, &LmOptions::default());
    if !out.converged {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            ssr: out.ssr,
            last: out.params,
        });
    }
    if out.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Degenerate("optimizer left the finite parameter range".into()));
    }
    let cov = out.covariance();
    Ok((out, cov))
}

fn se(cov: &DMatrix<f64>, i: usize) -> f64 {
    let v = cov[(i, i)];
    if v.is_nan() {
        f64::INFINITY
    } else {
        v.max(0.0).sqrt()
    }
}

fn param(name: &str, value: f64, stderr: f64) -> FitParameter {
    FitParameter {
        name: name.to_string(),
        value,
        stderr,
    }
}

fn require_points(data: &Dataset, n: usize) -> Result<()> {
    if data.len() < n {
        return Err(Error::InsufficientData {
            required: n,
            got: data.len(),
        });
    }
    Ok(())
}

fn require_variation(y: &[f64]) -> Result<()> {
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi - lo > 1e-12 * hi.abs().max(1.0)) {
        return Err(Error::Degenerate("data are constant; no oscillation to fit".into()));
    }
    Ok(())
}

fn median_step(t: &[f64]) -> f64 {
    let mut d: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

/// Angular frequency of the largest peak of the mean-removed periodogram.
pub fn dominant_frequency(t: &[f64], y: &[f64]) -> Option<f64> {
    if t.len() < 3 {
        return None;
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let span = t[t.len() - 1] - t[0];
    let nyquist = PI / median_step(t);
    let step = 2.0 * PI / (8.0 * span);
    let count = ((nyquist / step) as usize).clamp(16, 200_000);
    let mut best = (0.0, None);
    for k in 1..=count {
        let w = k as f64 * nyquist / count as f64;
        let (mut c, mut s) = (0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(y) {
            let (sn, cs) = (w * ti).sin_cos();
            c += (yi - mean) * cs;
            s += (yi - mean) * sn;
        }
        let power = c * c + s * s;
        if power > best.0 {
            best = (power, Some(w));
        }
    }
    best.1
}

/// Least squares over three basis columns; returns (coefficients, SSR).
fn linear3(cols: &[[f64; 3]], y: &[f64], w: &[f64]) -> Option<(Vector3<f64>, f64)> {
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for ((c, &yi), &wi) in cols.iter().zip(y).zip(w) {
        let v = Vector3::new(c[0], c[1], c[2]) * wi;
        a += v * v.transpose();
        b += v * (yi * wi);
    }
    let x = a.cholesky()?.solve(&b);
    let ssr = cols
        .iter()
        .zip(y)
        .zip(w)
        .map(|((c, yi), wi)| (wi * (c[0] * x[0] + c[1] * x[1] + c[2] * x[2] - yi)).powi(2))
        .sum();
    Some((x, ssr))
}

fn detuning_grid(hint: Option<f64>, peak: Option<f64>, span: f64) -> Vec<f64> {
    let bin = 2.0 * PI / span;
    let (lo, hi, step) = match (hint, peak) {
        (Some(h), _) => (0.5 * h.abs(), 1.5 * h.abs(), bin / 5.0),
        (None, Some(p)) => ((p - 3.0 * bin).max(0.0), p + 3.0 * bin, bin / 10.0),
        (None, None) => (0.0, 0.0, 1.0),
    };
    let n = ((hi - lo) / step).ceil() as usize;
    (0..=n)
        .map(|i| lo + i as f64 * step)
        .flat_map(|d| [d, -d])
        .collect()
}

fn t2star_grid(hint: Option<f64>, span: f64) -> Vec<f64> {
    match hint {
        Some(t) => vec![t],
        None => (0..32).map(|i| span / 30.0 * (600.0f64).powf(i as f64 / 31.0)).collect(),
    }
}

/// Profile scan for Ramsey and echo fringes. `sign` is +1 for B + αA cos and
/// −1 for B − αA cos; returns [B, A, δ, ln T₂*, phase].
fn fringe_start(
    data: &Dataset,
    shape: &EnvelopeShape,
    center: f64,
    sign: f64,
    overrides: &Overrides,
    phase_name: &str,
) -> Result<[f64; 5]> {
    let t = data.times();
    let y = data.values();
    let w = data.sqrt_weights();
    require_variation(&y)?;
    let s: Vec<f64> = t.iter().map(|ti| ti - center).collect();
    let span = t[t.len() - 1] - t[0];
    let hint = overrides.get("detuning").copied();
    let peak = if hint.is_none() { dominant_frequency(&s, &y) } else { None };
    if hint.is_none() && peak.is_none() {
        return Err(Error::Degenerate("no dominant fringe frequency".into()));
    }
    let mut best: Option<(f64, [f64; 5])> = None;
    let mut cols = vec![[0.0; 3]; s.len()];
    for &t2 in &t2star_grid(overrides.get("t2star").copied(), span) {
        for &d in &detuning_grid(hint, peak, span) {
            for (c, &si) in cols.iter_mut().zip(&s) {
                let a = shape.alpha(si, t2);
                let th = d * si + shape.kappa(si, t2);
                *c = [1.0, sign * a * th.cos(), -sign * a * th.sin()];
            }
            if let Some((x, ssr)) = linear3(&cols, &y, &w) {
                if best.as_ref().is_none_or(|b| ssr < b.0) {
                    let amp = x[1].hypot(x[2]);
                    let phase = x[2].atan2(x[1]);
                    best = Some((ssr, [x[0], amp, d, t2.ln(), phase]));
                }
            }
        }
    }
    let mut x0 = best.ok_or_else(|| Error::Degenerate("profile scan found no solvable start".into()))?.1;
    if let Some(&v) = overrides.get("offset") {
        x0[0] = v;
    }
    if let Some(&v) = overrides.get("amplitude") {
        x0[1] = v;
    }
    if let Some(&v) = overrides.get(phase_name) {
        x0[4] = v;
    }
    Ok(x0)
}

/// Flips a negative amplitude into the phase and wraps the phase.
fn normalize_fringe(p: &mut [f64]) {
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[4] += PI;
    }
    p[4] = wrap_phase(p[4]);
}

fn fringe_result(model: &str, phase_name: &str, out: &LmOutcome, cov: &DMatrix<f64>, n: usize) -> FitResult {
    let mut p = out.params.clone();
    normalize_fringe(&mut p);
    let t2 = p[3].exp();
    let (b, a) = (p[0], p[1]);
    let v = a / b;
    let var_v = v * v * (cov[(1, 1)] / (a * a) + cov[(0, 0)] / (b * b) - 2.0 * cov[(0, 1)] / (a * b));
    FitResult {
        model: model.to_string(),
        params: vec![
            param("amplitude", a, se(cov, 1)),
            param("offset", b, se(cov, 0)),
            param("detuning", p[2], se(cov, 2)),
            param("t2star", t2, t2 * se(cov, 3)),
            param(phase_name, p[4], se(cov, 4)),
        ],
        derived: vec![param("visibility", v, if var_v.is_nan() { f64::INFINITY } else { var_v.max(0.0).sqrt() })],
        ssr: out.ssr,
        converged: out.converged,
        iterations: out.iterations,
        points: n,
    }
}

/// Fits C/2·(1 − cos Ω_R t); parameters `contrast` and `rabi_frequency` (rad/s).
pub fn fit_rabi(data: &Dataset, overrides: &Overrides) -> Result<FitResult> {
    check_overrides(overrides, &["contrast", "rabi_frequency"])?;
    require_points(data, 4)?;
    let t = data.times();
    let y = data.values();
    let w = data.sqrt_weights();
    require_variation(&y)?;
    let span = t[t.len() - 1] - t[0].min(0.0);
    let bin = 2.0 * PI / span;
    let (lo, hi, step) = match overrides.get("rabi_frequency") {
        Some(&h) => (0.5 * h, 1.5 * h, bin / 20.0),
        None => (0.25 * bin, PI / median_step(&t), bin / 20.0),
    };
    let mut best: Option<(f64, f64, f64)> = None;
    let n = ((hi - lo) / step).ceil().min(1e6) as usize;
    for i in 0..=n {
        let om = lo + i as f64 * step;
        let (mut ff, mut fy) = (0.0, 0.0);
        for ((&ti, &yi), &wi) in t.iter().zip(&y).zip(&w) {
            let f = 0.5 * (1.0 - (om * ti).cos()) * wi;
            ff += f * f;
            fy += f * yi * wi;
        }
        if ff <= 0.0 {
            continue;
        }
        let c = fy / ff;
        let ssr: f64 = t
            .iter()
            .zip(&y)
            .zip(&w)
            .map(|((&ti, &yi), &wi)| (wi * (0.5 * c * (1.0 - (om * ti).cos()) - yi)).powi(2))
            .sum();
        if best.is_none_or(|b| ssr < b.0) {
            best = Some((ssr, c, om));
        }
    }
    let (_, c0, om0) = best.ok_or_else(|| Error::Degenerate("no Rabi frequency candidate".into()))?;
    let x0 = [overrides.get("contrast").copied().unwrap_or(c0), om0.ln()];
    let (out, cov) = optimize(&RabiModel, data, &x0)?;
    let om = out.params[1].exp();
    Ok(FitResult {
        model: "rabi".into(),
        params: vec![
            param("contrast", out.params[0], se(&cov, 0)),
            param("rabi_frequency", om, om * se(&cov, 1)),
        ],
        derived: vec![],
        ssr: out.ssr,
        converged: out.converged,
        iterations: out.iterations,
        points: data.len(),
    })
}

const FRINGE_NAMES: [&str; 5] = ["amplitude", "offset", "detuning", "t2star", "phase"];
const ECHO_NAMES: [&str; 5] = ["amplitude", "offset", "detuning", "t2star", "echo_phase"];

/// Fits B + α(t)A·cos(δ′t + κ(t) + φ). Free: amplitude, offset, detuning,
/// t2star, phase; the visibility A/B is derived.
pub fn fit_ramsey(data: &Dataset, overrides: &Overrides) -> Result<FitResult> {
    fit_ramsey_with(data, overrides, &EnvelopeShape::exact())
}

pub fn fit_ramsey_with(data: &Dataset, overrides: &Overrides, shape: &EnvelopeShape) -> Result<FitResult> {
    check_overrides(overrides, &FRINGE_NAMES)?;
    require_points(data, 10)?;
    let x0 = fringe_start(data, shape, 0.0, 1.0, overrides, "phase")?;
    let model = RamseyModel { shape: *shape };
    let (out, cov) = optimize(&model, data, &x0)?;
    Ok(fringe_result("ramsey", "phase", &out, &cov, data.len()))
}

/// Fits B − α(s)A·cos(δ′s + κ(s) + ψ), s = t − 2τ_π, with τ_π held fixed.
pub fn fit_echo(data: &Dataset, tau_pi: f64, overrides: &Overrides) -> Result<FitResult> {
    fit_echo_with(data, tau_pi, overrides, &EnvelopeShape::exact())
}

pub fn fit_echo_with(data: &Dataset, tau_pi: f64, overrides: &Overrides, shape: &EnvelopeShape) -> Result<FitResult> {
    check_overrides(overrides, &ECHO_NAMES)?;
    require_points(data, 10)?;
    if !(tau_pi >= 0.0 && tau_pi.is_finite()) {
        return Err(Error::invalid("tau_pi", "must be non-negative"));
    }
    let x0 = fringe_start(data, shape, 2.0 * tau_pi, -1.0, overrides, "echo_phase")?;
    let model = EchoModel { tau_pi, shape: *shape };
    let (out, cov) = optimize(&model, data, &x0)?;
    let mut r = fringe_result("echo", "echo_phase", &out, &cov, data.len());
    r.derived.push(param("tau_pi", tau_pi, 0.0));
    Ok(r)
}

/// Fits V = C₀·exp(−½τ_π²σ²) to (τ_π, V) pairs. Returns `c0`, `sigma` (rad/s)
/// and the derived `t2prime`; constant V gives σ = 0 with an infinite error.
pub fn fit_visibility(points: &[(f64, f64)], overrides: &Overrides) -> Result<FitResult> {
    check_overrides(overrides, &["c0", "sigma"])?;
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            required: 3,
            got: points.len(),
        });
    }
    let t: Vec<f64> = points.iter().map(|p| p.0).collect();
    let v: Vec<f64> = points.iter().map(|p| p.1).collect();
    let data = Dataset::from_xy(&t, &v)?;
    // ln V against τ² by ordinary least squares
    let xy: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).map(|p| (p.0 * p.0, p.1.ln())).collect();
    let (mut c0, mut s0) = (v.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 0.0);
    if xy.len() >= 2 {
        let n = xy.len() as f64;
        let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
        let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            let slope = sxy / sxx;
            c0 = (my - slope * mx).exp();
            s0 = if slope < 0.0 { (-2.0 * slope).sqrt() } else { 0.0 };
        }
    }
    let x0 = [
        overrides.get("c0").copied().unwrap_or(c0),
        overrides.get("sigma").copied().unwrap_or(s0),
    ];
    let (out, cov) = optimize(&VisibilityModel, &data, &x0)?;
    let sigma = out.params[1].abs();
    let sigma_se = if sigma == 0.0 { f64::INFINITY } else { se(&cov, 1) };
    let t2p = t2prime_from_sigma(sigma);
    let t2p_se = if sigma == 0.0 { f64::INFINITY } else { t2p * sigma_se / sigma };
    Ok(FitResult {
        model: "visibility".into(),
        params: vec![param("c0", out.params[0], se(&cov, 0)), param("sigma", sigma, sigma_se)],
        derived: vec![param("t2prime", t2p, t2p_se)],
        ssr: out.ssr,
        converged: out.converged,
        iterations: out.iterations,
        points: points.len(),
    })
}
