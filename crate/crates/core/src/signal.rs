//! Forward models of Ramsey and spin-echo signals.
//!
//! The closed forms average cos(δ t) over the Gamma(3) distribution of
//! differential light shifts, which yields an amplitude α(t) and a phase κ(t).
//! [`monte_carlo_signal`] draws an explicit ensemble and pushes every atom
//! through the pulse matrices; both routes must agree within statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{apply_elements, echo_elements, ramsey_elements, BlochVector, Detection};
use crate::error::{ensure_finite, Error, Result};
use crate::quad;
use crate::trap::{
    atom_rng, delta_ls_of_energy, sample_ensemble, t2star_factor, EnsembleSpec, LightShiftDistribution, TrapConfig,
};

/// Coefficients of α(t) = [1 + a (t/T₂*)²]^{−3/2} and κ(t) = −3 arctan(k t/T₂*).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeShape {
    pub alpha_coeff: f64,
    pub kappa_coeff: f64,
}

impl EnvelopeShape {
    /// Two-digit coefficients 0.95 and 0.97.
    pub const ROUNDED: EnvelopeShape = EnvelopeShape {
        alpha_coeff: 0.95,
        kappa_coeff: 0.97,
    };

    /// a = e^{2/3} − 1 and k = √a, which make α(T₂*) = 1/e exactly.
    pub fn exact() -> Self {
        let k = t2star_factor();
        Self {
            alpha_coeff: k * k,
            kappa_coeff: k,
        }
    }

    pub fn alpha(&self, t: f64, t2star: f64) -> f64 {
        let x = t / t2star;
        (1.0 + self.alpha_coeff * x * x).powf(-1.5)
    }

    /// Odd in t, so the echo envelope before and after 2τ_π are complex conjugates.
    pub fn kappa(&self, t: f64, t2star: f64) -> f64 {
        -3.0 * (self.kappa_coeff * t / t2star).atan()
    }
}

impl Default for EnvelopeShape {
    fn default() -> Self {
        Self::exact()
    }
}

/// Inhomogeneous amplitude α(t, T₂*); even in t.
pub fn envelope_alpha(t: f64, t2star: f64) -> f64 {
    EnvelopeShape::exact().alpha(t, t2star)
}

/// Inhomogeneous phase κ(t, T₂*); odd in t, tends to −3π/2.
pub fn phase_kappa(t: f64, t2star: f64) -> f64 {
    EnvelopeShape::exact().kappa(t, t2star)
}

/// Upper limit of the light-shift average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UpperLimit {
    /// Integrate to infinity (closed form).
    #[default]
    Infinite,
    /// Stop at δ₀/2, the shift of an atom with E = U₀ (numerical).
    Physical,
}

/// ∫ α̃(δ_ls) e^{−i(δ_ls − δ₀)t} dδ_ls as (α, κ): the characteristic function of
/// the light-shift distribution in polar form.
pub fn inhomogeneous_average(t: f64, dist: &LightShiftDistribution, limit: UpperLimit) -> (f64, f64) {
    match limit {
        UpperLimit::Infinite => {
            let x = t / dist.k;
            ((1.0 + x * x).powf(-1.5), -3.0 * x.atan())
        }
        UpperLimit::Physical => {
            let cutoff = dist.delta0.abs() / 2.0;
            let scale = 1.0 / dist.k;
            let period = if t.abs() > 0.0 { 2.0 * std::f64::consts::PI / t.abs() } else { f64::INFINITY };
            let step = scale.min(period / 4.0).max(cutoff / 20_000.0);
            let n = ((cutoff / step).ceil() as usize).clamp(1, 20_000);
            let breaks: Vec<f64> = (0..=n).map(|i| cutoff * i as f64 / n as f64).collect();
            let p = |x: f64| 0.5 * dist.k.powi(3) * x * x * (-dist.k * x).exp();
            let re = quad::integrate_pieces(|x| p(x) * (x * t).cos(), &breaks, 1e-12).value;
            let im = quad::integrate_pieces(|x| -p(x) * (x * t).sin(), &breaks, 1e-12).value;
            (re.hypot(im), im.atan2(re))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyParams {
    pub amplitude: f64,
    pub offset: f64,
    /// δ′ = δ_synth − δ_B − δ₀, rad/s.
    pub detuning: f64,
    pub t2star: f64,
    pub phase: f64,
}

impl RamseyParams {
    pub fn visibility(&self) -> f64 {
        self.amplitude / self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoParams {
    pub amplitude: f64,
    pub offset: f64,
    pub detuning: f64,
    pub t2star: f64,
    pub tau_pi: f64,
    /// Slow systematic phase drift ψ.
    pub echo_phase: f64,
}

/// σ(τ_π) of the inter-interval mean detuning difference Δδ, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HomogeneousNoise {
    pub sigma: f64,
}

/// δ′ = δ_synth − δ_B − δ₀.
pub fn detuning_sum(delta_synth: f64, delta_zeeman: f64, delta0: f64) -> f64 {
    delta_synth - delta_zeeman - delta0
}

pub fn ramsey_p3_with(t: f64, p: &RamseyParams, shape: &EnvelopeShape) -> f64 {
    let a = shape.alpha(t, p.t2star);
    let k = shape.kappa(t, p.t2star);
    p.offset + a * p.amplitude * (p.detuning * t + k + p.phase).cos()
}

/// P₃ = B + α(t)·A·cos[δ′t + κ(t) + φ].
pub fn ramsey_p3(t: f64, p: &RamseyParams) -> f64 {
    ramsey_p3_with(t, p, &EnvelopeShape::exact())
}

pub fn echo_p3_with(t: f64, p: &EchoParams, shape: &EnvelopeShape) -> f64 {
    let s = t - 2.0 * p.tau_pi;
    let a = shape.alpha(s.abs(), p.t2star);
    let k = shape.kappa(s, p.t2star);
    p.offset - a * p.amplitude * (p.detuning * s + k + p.echo_phase).cos()
}

/// P₃ = B − α(t − 2τ_π)·A·cos[δ′(t − 2τ_π) + κ(t − 2τ_π) + ψ].
pub fn echo_p3(t: f64, p: &EchoParams) -> f64 {
    echo_p3_with(t, p, &EnvelopeShape::exact())
}

/// Echo visibility V(2τ_π) = V₀ exp(−½ τ_π² σ²).
pub fn visibility_hom(tau_pi: f64, sigma: f64, v0: f64) -> f64 {
    v0 * (-0.5 * tau_pi * tau_pi * sigma * sigma).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sequence {
    Ramsey { phase: f64 },
    Echo { tau_pi: f64, echo_phase: f64 },
}

/// Everything the ensemble generator needs besides the time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSetup {
    pub sequence: Sequence,
    /// Synthesizer detuning δ_synth, rad/s.
    pub delta_synth: f64,
    /// Quadratic Zeeman shift δ_B, rad/s.
    pub delta_zeeman: f64,
    pub trap: TrapConfig,
    pub ensemble: EnsembleSpec,
    pub noise: HomogeneousNoise,
    pub detection: Detection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalPoint {
    pub t: f64,
    pub p3: f64,
    /// Standard error of the ensemble mean.
    pub stderr: f64,
}

const CHUNK: usize = 2048;
const NOISE_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

impl MonteCarloSetup {
    pub fn detuning_sum(&self) -> f64 {
        detuning_sum(self.delta_synth, self.delta_zeeman, self.trap.delta0())
    }

    pub fn t2star(&self) -> f64 {
        crate::trap::t2star_from_temperature(self.ensemble.temperature, self.trap.eta)
    }

    /// Closed-form counterpart of the ensemble average, including the
    /// Gaussian homogeneous factor for echo sequences.
    pub fn analytic_p3(&self, t: f64) -> f64 {
        let det = self.detuning_sum();
        let t2star = self.t2star();
        let (a, b) = (self.detection.amplitude, self.detection.offset);
        match self.sequence {
            Sequence::Ramsey { phase } => ramsey_p3(
                t,
                &RamseyParams {
                    amplitude: a,
                    offset: b,
                    detuning: det,
                    t2star,
                    phase,
                },
            ),
            Sequence::Echo { tau_pi, echo_phase } => {
                let hom = visibility_hom(t - tau_pi, self.noise.sigma, 1.0);
                echo_p3(
                    t,
                    &EchoParams {
                        amplitude: a * hom,
                        offset: b,
                        detuning: det,
                        t2star,
                        tau_pi,
                        echo_phase,
                    },
                )
            }
        }
    }

    fn validate(&self, times: &[f64]) -> Result<()> {
        ensure_finite("delta_synth", self.delta_synth)?;
        ensure_finite("delta_zeeman", self.delta_zeeman)?;
        self.trap.validate()?;
        if !(self.noise.sigma >= 0.0) {
            return Err(Error::invalid("sigma", "must be non-negative"));
        }
        if times.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::invalid("times", "must be sorted"));
        }
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::invalid("times", "must be finite and non-negative"));
        }
        if let Sequence::Echo { tau_pi, .. } = self.sequence {
            if !(tau_pi >= 0.0) {
                return Err(Error::invalid("tau_pi", "must be non-negative"));
            }
            if times.first().is_some_and(|&t| t < tau_pi) {
                return Err(Error::invalid("times", "echo readout must not precede the π pulse"));
            }
        }
        Ok(())
    }
}

/// Monte Carlo ensemble average: sample energies, map them to light shifts,
/// draw one Δδ per atom and time point for echoes, apply the pulse matrices
/// and average w through the detection map.
pub fn monte_carlo_signal(setup: &MonteCarloSetup, times: &[f64]) -> Result<Vec<SignalPoint>> {
    setup.validate(times)?;
    setup.ensemble.validate_for_trap(&setup.trap)?;
    let energies = sample_ensemble(&setup.ensemble)?;
    monte_carlo_with_energies(setup, &energies, times)
}

/// Same as [`monte_carlo_signal`] with caller-supplied atom energies (kelvin).
pub fn monte_carlo_with_energies(setup: &MonteCarloSetup, energies: &[f64], times: &[f64]) -> Result<Vec<SignalPoint>> {
    if energies.is_empty() {
        return Err(Error::invalid("energies", "ensemble is empty"));
    }
    setup.validate(times)?;
    let delta0 = setup.trap.delta0();
    let eta = setup.trap.eta;
    let base = setup.delta_synth - setup.delta_zeeman;
    let seed = setup.ensemble.seed ^ NOISE_STREAM_SALT;
    let nt = times.len();

    let partials: Vec<Vec<(f64, f64)>> = energies
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut acc = vec![(0.0, 0.0); nt];
            for (k, &energy) in chunk.iter().enumerate() {
                let atom = (ci * CHUNK + k) as u64;
                let detuning = base - delta_ls_of_energy(energy, delta0, eta);
                let mut noise_rng = match setup.sequence {
                    Sequence::Echo { .. } if setup.noise.sigma > 0.0 => Some(atom_rng(seed, atom)),
                    _ => None,
                };
                for (slot, &t) in acc.iter_mut().zip(times) {
                    let w = match setup.sequence {
                        Sequence::Ramsey { phase } => {
                            apply_elements(&ramsey_elements(detuning, t, phase), BlochVector::lower()).w
                        }
                        Sequence::Echo { tau_pi, echo_phase } => {
                            let change = match noise_rng.as_mut() {
                                Some(rng) => {
                                    let z: f64 = rand::Rng::sample(rng, rand_distr::StandardNormal);
                                    setup.noise.sigma * z
                                }
                                None => 0.0,
                            };
                            let els = echo_elements(detuning, tau_pi, t, change, echo_phase);
                            apply_elements(&els, BlochVector::lower()).w
                        }
                    };
                    let p = setup.detection.p3(w);
                    slot.0 += p;
                    slot.1 += p * p;
                }
            }
            acc
        })
        .collect();

    let n = energies.len() as f64;
    Ok(times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let (s, s2) = partials.iter().fold((0.0, 0.0), |a, c| (a.0 + c[j].0, a.1 + c[j].1));
            let mean = s / n;
            let var = if energies.len() > 1 {
                ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            SignalPoint {
                t,
                p3: mean,
                stderr: (var / n).sqrt(),
            }
        })
        .collect())
}
