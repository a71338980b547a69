//! Bloch-vector algebra for the |F=4, m_F=0⟩ ↔ |F=3, m_F=0⟩ clock transition.
//!
//! Sign convention: |F=4⟩ is w = −1, |F=3⟩ is w = +1. Microwave pulses are
//! instantaneous ideal rotations; free precession rotates about the w axis.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl BlochVector {
    pub const fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }

    /// |F=4, m_F=0⟩, the prepared state.
    pub const fn lower() -> Self {
        Self::new(0.0, 0.0, -1.0)
    }

    /// |F=3, m_F=0⟩.
    pub const fn upper() -> Self {
        Self::new(0.0, 0.0, 1.0)
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.w)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    /// Population of F=3.
    pub fn p3(&self) -> f64 {
        p3_from_w(self.w)
    }
}

impl Default for BlochVector {
    fn default() -> Self {
        Self::lower()
    }
}

/// Drive parameters of the torque vector (Ω_R, 0, δ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueParams {
    pub rabi_frequency: f64,
    pub detuning: f64,
}

impl TorqueParams {
    pub fn new(rabi_frequency: f64, detuning: f64) -> Result<Self> {
        ensure_finite("rabi_frequency", rabi_frequency)?;
        ensure_finite("detuning", detuning)?;
        if rabi_frequency < 0.0 {
            return Err(Error::invalid("rabi_frequency", "must be non-negative"));
        }
        Ok(Self {
            rabi_frequency,
            detuning,
        })
    }
}

/// Relaxation times of the damped Bloch equations. Infinite times disable
/// the corresponding damping term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingParams {
    pub t2: f64,
    pub t1: f64,
    pub w_stationary: f64,
}

impl DampingParams {
    pub fn new(t2: f64, t1: f64, w_stationary: f64) -> Result<Self> {
        if t2.is_nan() || t2 <= 0.0 {
            return Err(Error::invalid("t2", "must be positive"));
        }
        if t1.is_nan() || t1 <= 0.0 {
            return Err(Error::invalid("t1", "must be positive"));
        }
        ensure_finite("w_stationary", w_stationary)?;
        if w_stationary.abs() > 1.0 {
            return Err(Error::invalid("w_stationary", "must lie in [-1, 1]"));
        }
        Ok(Self {
            t2,
            t1,
            w_stationary,
        })
    }

    /// Combines the irreversible (T₂′) and reversible (T₂*) transverse times
    /// into the total transverse time, 1/T₂ = 1/T₂′ + 1/T₂*.
    pub fn from_dephasing_times(t2_prime: f64, t2_star: f64, t1: f64, w_stationary: f64) -> Result<Self> {
        if !(t2_prime > 0.0) || !(t2_star > 0.0) {
            return Err(Error::invalid("t2_prime/t2_star", "must be positive"));
        }
        let t2 = 1.0 / (1.0 / t2_prime + 1.0 / t2_star);
        Self::new(t2, t1, w_stationary)
    }

    pub fn undamped() -> Self {
        Self {
            t2: f64::INFINITY,
            t1: f64::INFINITY,
            w_stationary: 0.0,
        }
    }
}

/// One step of a pulse sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PulseElement {
    HalfPiPulse,
    PiPulse,
    /// Free precession for `duration` seconds at `detuning` rad/s.
    FreeEvolution { duration: f64, detuning: f64 },
    /// Fixed extra precession angle about w, e.g. the precession accumulated
    /// during finite-length pulses.
    PhaseShift(f64),
}

impl PulseElement {
    pub fn matrix(&self) -> Matrix3<f64> {
        match *self {
            PulseElement::HalfPiPulse => pi2_matrix(),
            PulseElement::PiPulse => pi_matrix(),
            PulseElement::FreeEvolution { duration, detuning } => free_matrix(detuning, duration),
            PulseElement::PhaseShift(angle) => precession_matrix(angle),
        }
    }
}

/// Elements in time order; the first element acts first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseProgram {
    elements: Vec<PulseElement>,
}

impl PulseProgram {
    pub fn new(elements: Vec<PulseElement>) -> Result<Self> {
        for e in &elements {
            if let PulseElement::FreeEvolution { duration, detuning } = *e {
                ensure_finite("detuning", detuning)?;
                if !(duration >= 0.0) || !duration.is_finite() {
                    return Err(Error::invalid("duration", "must be finite and non-negative"));
                }
            }
        }
        Ok(Self { elements })
    }

    /// π/2 – free(δ, t) – π/2.
    pub fn ramsey(detuning: f64, t: f64) -> Result<Self> {
        Self::new(ramsey_elements(detuning, t, 0.0).to_vec())
    }

    /// π/2 – free(δ, τ_π) – π – free(δ + Δδ, t − τ_π) – π/2, with the second
    /// π/2 pulse at time `t ≥ τ_π`.
    pub fn echo(detuning: f64, tau_pi: f64, t: f64, detuning_change: f64) -> Result<Self> {
        if t < tau_pi {
            return Err(Error::invalid("t", "echo readout must not precede the π pulse"));
        }
        Self::new(echo_elements(detuning, tau_pi, t, detuning_change, 0.0).to_vec())
    }

    pub fn elements(&self) -> &[PulseElement] {
        &self.elements
    }

    /// Total product matrix, later elements on the left.
    pub fn matrix(&self) -> Matrix3<f64> {
        self.elements
            .iter()
            .fold(Matrix3::identity(), |acc, e| e.matrix() * acc)
    }
}

pub(crate) fn ramsey_elements(detuning: f64, t: f64, phase: f64) -> [PulseElement; 4] {
    [
        PulseElement::HalfPiPulse,
        PulseElement::FreeEvolution {
            duration: t,
            detuning,
        },
        PulseElement::PhaseShift(phase),
        PulseElement::HalfPiPulse,
    ]
}

pub(crate) fn echo_elements(
    detuning: f64,
    tau_pi: f64,
    t: f64,
    detuning_change: f64,
    phase: f64,
) -> [PulseElement; 6] {
    [
        PulseElement::HalfPiPulse,
        PulseElement::FreeEvolution {
            duration: tau_pi,
            detuning,
        },
        PulseElement::PiPulse,
        PulseElement::FreeEvolution {
            duration: t - tau_pi,
            detuning: detuning + detuning_change,
        },
        PulseElement::PhaseShift(phase),
        PulseElement::HalfPiPulse,
    ]
}

/// Θ_{π/2}: quarter turn about u, taking (0,0,−1) to (0,−1,0).
pub fn pi2_matrix() -> Matrix3<f64> {
    Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0)
}

/// Θ_π = diag(1, −1, −1).
pub fn pi_matrix() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))
}

/// Φ_free(δ, t): precession about w by φ = δ·t.
pub fn free_matrix(detuning: f64, t: f64) -> Matrix3<f64> {
    precession_matrix(detuning * t)
}

fn precession_matrix(phi: f64) -> Matrix3<f64> {
    let (s, c) = phi.sin_cos();
    Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Applies pulse elements in time order.
pub fn apply_elements(elements: &[PulseElement], u0: BlochVector) -> BlochVector {
    let start = u0.as_vector();
    let end = elements.iter().fold(start, |v, e| e.matrix() * v);
    debug_assert!(
        (end.norm() - start.norm()).abs() <= 1e-6,
        "Bloch norm drift under pure rotations: {} -> {}",
        start.norm(),
        end.norm()
    );
    BlochVector::from_vector(&end)
}

pub fn apply_program(program: &PulseProgram, u0: BlochVector) -> BlochVector {
    apply_elements(program.elements(), u0)
}

/// w at the echo time 2τ_π when the detuning changes by Δδ across the π pulse.
pub fn echo_w_perturbed(detuning_change: f64, tau_pi: f64) -> f64 {
    -(detuning_change * tau_pi).cos()
}

fn bloch_rhs(torque: &TorqueParams, damping: &DampingParams, s: &Vector3<f64>) -> Vector3<f64> {
    let (omega, delta) = (torque.rabi_frequency, torque.detuning);
    let g2 = 1.0 / damping.t2;
    let g1 = 1.0 / damping.t1;
    Vector3::new(
        delta * s.y - g2 * s.x,
        -delta * s.x + omega * s.z - g2 * s.y,
        -omega * s.y - g1 * (s.z - damping.w_stationary),
    )
}

/// Integrates the damped Bloch equations with classical fixed-step RK4.
/// The step is the largest h ≤ `dt_max` that divides `t` evenly.
pub fn integrate_damped_bloch(
    torque: &TorqueParams,
    damping: &DampingParams,
    u0: BlochVector,
    t: f64,
    dt_max: f64,
) -> Result<BlochVector> {
    for (name, x) in [("u0.u", u0.u), ("u0.v", u0.v), ("u0.w", u0.w), ("t", t), ("dt_max", dt_max)] {
        ensure_finite(name, x)?;
    }
    ensure_finite("rabi_frequency", torque.rabi_frequency)?;
    ensure_finite("detuning", torque.detuning)?;
    if t < 0.0 {
        return Err(Error::invalid("t", "must be non-negative"));
    }
    if dt_max <= 0.0 {
        return Err(Error::invalid("dt_max", "must be positive"));
    }
    let steps = (t / dt_max).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut s = u0.as_vector();
    for _ in 0..steps {
        let k1 = bloch_rhs(torque, damping, &s);
        let k2 = bloch_rhs(torque, damping, &(s + 0.5 * h * k1));
        let k3 = bloch_rhs(torque, damping, &(s + 0.5 * h * k2));
        let k4 = bloch_rhs(torque, damping, &(s + h * k3));
        s += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(BlochVector::from_vector(&s))
}

/// Rabi-flop population with contrast `contrast`: (C/2)(1 − cos Ω_R t).
pub fn rabi_p3(rabi_frequency: f64, t: f64, contrast: f64) -> f64 {
    0.5 * contrast * (1.0 - (rabi_frequency * t).cos())
}

/// Extra precession angle picked up during two π/2 pulses of length `t_half_pi`.
pub fn pulse_phase_offset(t_half_pi: f64, detuning: f64) -> f64 {
    2.0 * t_half_pi * detuning
}

/// Affine detection model P₃ = B + A·w, accounting for imperfect state
/// preparation and detection. The ideal detector is A = B = ½.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub amplitude: f64,
    pub offset: f64,
}

impl Detection {
    pub const IDEAL: Detection = Detection {
        amplitude: 0.5,
        offset: 0.5,
    };

    pub fn new(amplitude: f64, offset: f64) -> Self {
        Self { amplitude, offset }
    }

    pub fn p3(&self, w: f64) -> f64 {
        self.offset + self.amplitude * w
    }

    pub fn w(&self, p3: f64) -> f64 {
        (p3 - self.offset) / self.amplitude
    }
}

impl Default for Detection {
    fn default() -> Self {
        Self::IDEAL
    }
}

/// P₃ = (w + 1)/2.
pub fn p3_from_w(w: f64) -> f64 {
    Detection::IDEAL.p3(w)
}

pub fn w_from_p3(p3: f64) -> f64 {
    Detection::IDEAL.w(p3)
}
