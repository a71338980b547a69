//! Fringe models in the optimizer's internal parameterization.
//!
//! Positive scales (Rabi frequency, T₂*) are fitted as logarithms; the
//! visibility decay rate is fitted as s with σ = |s|.

use crate::signal::EnvelopeShape;

/// A scalar model y(t; p) with an analytic gradient in internal parameters.
pub trait FitModel {
    fn n_params(&self) -> usize;

    fn value(&self, t: f64, p: &[f64]) -> f64;

    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]);
}

/// C/2·(1 − cos Ω t); p = [C, ln Ω].
#[derive(Debug, Clone, Copy, Default)]
pub struct RabiModel;

impl FitModel for RabiModel {
    fn n_params(&self) -> usize {
        2
    }

    fn value(&self, t: f64, p: &[f64]) -> f64 {
        0.5 * p[0] * (1.0 - (p[1].exp() * t).cos())
    }

    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let w = p[1].exp();
        out[0] = 0.5 * (1.0 - (w * t).cos());
        out[1] = 0.5 * p[0] * (w * t).sin() * w * t;
    }
}

/// Shared pieces of α(x) and κ(x), x = s/T₂*, and their log-T₂* derivatives.
fn envelope_terms(shape: &EnvelopeShape, s: f64, t2star: f64) -> (f64, f64, f64, f64) {
    let x = s / t2star;
    let (a, k) = (shape.alpha_coeff, shape.kappa_coeff);
    let q = 1.0 + a * x * x;
    let alpha = q.powf(-1.5);
    let kappa = -3.0 * (k * x).atan();
    let dalpha = 3.0 * a * x * x * q.powf(-2.5);
    let dkappa = 3.0 * k * x / (1.0 + k * k * x * x);
    (alpha, kappa, dalpha, dkappa)
}

/// B + A·α(t)·cos(δ′t + κ(t) + φ); p = [B, A, δ′, ln T₂*, φ].
#[derive(Debug, Clone, Copy, Default)]
pub struct RamseyModel {
    pub shape: EnvelopeShape,
}

impl FitModel for RamseyModel {
    fn n_params(&self) -> usize {
        5
    }

    fn value(&self, t: f64, p: &[f64]) -> f64 {
        let (alpha, kappa, _, _) = envelope_terms(&self.shape, t, p[3].exp());
        p[0] + p[1] * alpha * (p[2] * t + kappa + p[4]).cos()
    }

    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let (alpha, kappa, da, dk) = envelope_terms(&self.shape, t, p[3].exp());
        let th = p[2] * t + kappa + p[4];
        let (c, s) = (th.cos(), th.sin());
        out[0] = 1.0;
        out[1] = alpha * c;
        out[2] = -p[1] * alpha * s * t;
        out[3] = p[1] * (da * c - alpha * s * dk);
        out[4] = -p[1] * alpha * s;
    }
}

/// B − A·α(s)·cos(δ′s + κ(s) + ψ), s = t − 2τ_π; p = [B, A, δ′, ln T₂*, ψ].
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoModel {
    pub tau_pi: f64,
    pub shape: EnvelopeShape,
}

impl FitModel for EchoModel {
    fn n_params(&self) -> usize {
        5
    }

    fn value(&self, t: f64, p: &[f64]) -> f64 {
        let s = t - 2.0 * self.tau_pi;
        let (alpha, kappa, _, _) = envelope_terms(&self.shape, s, p[3].exp());
        p[0] - p[1] * alpha * (p[2] * s + kappa + p[4]).cos()
    }

    fn gradient(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let s = t - 2.0 * self.tau_pi;
        let (alpha, kappa, da, dk) = envelope_terms(&self.shape, s, p[3].exp());
        let th = p[2] * s + kappa + p[4];
        let (c, sn) = (th.cos(), th.sin());
        out[0] = 1.0;
        out[1] = -alpha * c;
        out[2] = p[1] * alpha * sn * s;
        out[3] = -p[1] * (da * c - alpha * sn * dk);
        out[4] = p[1] * alpha * sn;
    }
}

/// C₀·exp(−½τ²σ²) with σ = |s|; p = [C₀, s].
#[derive(Debug, Clone, Copy, Default)]
pub struct VisibilityModel;

impl FitModel for VisibilityModel {
    fn n_params(&self) -> usize {
        2
    }

    fn value(&self, tau: f64, p: &[f64]) -> f64 {
        p[0] * (-0.5 * tau * tau * p[1] * p[1]).exp()
    }

    fn gradient(&self, tau: f64, p: &[f64], out: &mut [f64]) {
        let e = (-0.5 * tau * tau * p[1] * p[1]).exp();
        out[0] = e;
        out[1] = -p[0] * e * tau * tau * p[1];
    }
}
