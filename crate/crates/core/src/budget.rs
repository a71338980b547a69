//! Homogeneous dephasing mechanisms as detuning-fluctuation amplitudes σ(τ).
//!
//! Measured mechanisms (trap intensity, beam pointing) go through the Allan
//! deviation of a recorded series; modelled ones (heating, photon recoil,
//! magnetic noise) have closed forms. Every σ is in rad/s.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constants::{rad_to_hz, Species, CESIUM, C, HBAR, KB_OVER_HBAR, K_B};
use crate::csvio;
use crate::error::{ensure_finite, Error, Result};
use crate::quad;
use crate::signal::visibility_hom;
use crate::trap::TrapConfig;

/// Uniformly sampled record of a dimensionless signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub sample_interval: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_interval: f64, values: Vec<f64>) -> Result<Self> {
        ensure_finite("sample_interval", sample_interval)?;
        if sample_interval <= 0.0 {
            return Err(Error::invalid("sample_interval", "must be positive"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "must be finite"));
        }
        Ok(Self {
            sample_interval,
            values,
        })
    }

    /// Two-column `time_s,value` CSV with optional header. Sampling must be
    /// uniform to 1e-6 relative.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let rows = csvio::numeric_rows(text, 2, 2)?;
        if rows.len() < 2 {
            return Err(Error::InsufficientData {
                required: 2,
                got: rows.len(),
            });
        }
        let dt = rows[1].1[0] - rows[0].1[0];
        for pair in rows.windows(2) {
            let step = pair[1].1[0] - pair[0].1[0];
            if !(dt > 0.0) || (step - dt).abs() > 1e-6 * dt {
                return Err(Error::Parse {
                    row: pair[1].0,
                    message: format!("non-uniform or decreasing time: step {step:e} s, expected {dt:e} s"),
                });
            }
        }
        Self::new(dt, rows.into_iter().map(|r| r.1[1]).collect())
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read series {}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Values divided by the dataset mean, so the Allan deviation becomes a
    /// relative fluctuation.
    pub fn normalized(&self) -> Result<Self> {
        let mean = self.mean();
        if !(mean.abs() > 0.0) || !mean.is_finite() {
            return Err(Error::Degenerate("series mean is zero; cannot normalize".into()));
        }
        Ok(Self {
            sample_interval: self.sample_interval,
            values: self.values.iter().map(|v| v / mean).collect(),
        })
    }
}

/// Averaging window length in samples for `tau`; `tau` must be a positive
/// integer multiple of the sample interval.
pub fn window_samples(series: &TimeSeries, tau: f64) -> Result<usize> {
    ensure_finite("tau", tau)?;
    let ratio = tau / series.sample_interval;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::invalid(
            "tau",
            format!(
                "must be a positive multiple of the sample interval {:e} s",
                series.sample_interval
            ),
        ));
    }
    Ok(n as usize)
}

/// Allan deviation over adjacent, non-overlapping windows of length τ:
/// σ_A² = (1/m) Σ (x̄_{k+1} − x̄_k)²/2.
///
/// Works on the values as given; apply [`TimeSeries::normalized`] first for
/// relative fluctuations.
pub fn allan_deviation(series: &TimeSeries, tau: f64) -> Result<f64> {
    let n = window_samples(series, tau)?;
    let windows = series.len() / n;
    if windows < 2 {
        return Err(Error::InsufficientData {
            required: 2 * n,
            got: series.len(),
        });
    }
    let means: Vec<f64> = series.values[..windows * n]
        .chunks_exact(n)
        .map(|w| w.iter().sum::<f64>() / n as f64)
        .collect();
    let m = (windows - 1) as f64;
    let var = means.windows(2).map(|p| (p[1] - p[0]).powi(2) / 2.0).sum::<f64>() / m;
    Ok(var.sqrt())
}

/// σ(τ) = √2·|δ₀|·σ_A(τ): the spread of the difference of two detunings.
pub fn sigma_from_allan(allan: f64, delta0: f64) -> f64 {
    (std::f64::consts::SQRT_2 * delta0 * allan).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingModel {
    /// Ė in kelvin per second.
    pub heating_rate: f64,
    /// Kelvin.
    pub temperature: f64,
    /// Number of motional degrees of freedom, 1 to 3.
    pub dimension: u8,
    pub mass: f64,
}

impl HeatingModel {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("heating_rate", self.heating_rate)?;
        ensure_finite("temperature", self.temperature)?;
        if self.heating_rate < 0.0 {
            return Err(Error::invalid("heating_rate", "must be non-negative"));
        }
        if self.temperature <= 0.0 {
            return Err(Error::invalid("temperature", "must be positive"));
        }
        if !(1..=3).contains(&self.dimension) {
            return Err(Error::invalid("dimension", "must be 1, 2 or 3"));
        }
        Ok(())
    }
}

/// σ_heat⁽ⁿ⁾ = (η k_B/ħ)·√((n/2)·Ė·T₂′·T) with τ_π = T₂′/2.
pub fn heating_sigma(model: &HeatingModel, t2prime: f64, eta: f64) -> Result<f64> {
    model.validate()?;
    let n = f64::from(model.dimension);
    Ok(eta * KB_OVER_HBAR * (0.5 * n * model.heating_rate * t2prime * model.temperature).sqrt())
}

/// Same quantity through the defining double integral: a Gaussian detuning
/// distribution of width σ_E = (η k_B/ħ)√(E Ė τ_π) mixed over the
/// n-dimensional thermal energy density, then its second moment.
pub fn heating_sigma_mixture(model: &HeatingModel, t2prime: f64, eta: f64) -> Result<f64> {
    model.validate()?;
    if model.heating_rate == 0.0 {
        return Ok(0.0);
    }
    let tau_pi = t2prime / 2.0;
    let t = model.temperature;
    let n = i32::from(model.dimension);
    let gamma_n = [1.0, 1.0, 2.0][n as usize - 1];
    let p_energy = |e: f64| e.powi(n - 1) * (-e / t).exp() / (gamma_n * t.powi(n));
    let sigma_e = |e: f64| eta * KB_OVER_HBAR * (e * model.heating_rate * tau_pi).sqrt();
    let second_moment = |e: f64| {
        let s = sigma_e(e);
        if s == 0.0 {
            return 0.0;
        }
        let gauss = |d: f64| (-0.5 * (d / s).powi(2)).exp() / ((2.0 * PI).sqrt() * s);
        let breaks: Vec<f64> = (-12..=12).map(|k| f64::from(k) * s).collect();
        quad::integrate_pieces(|d| d * d * gauss(d), &breaks, 1e-13 * s * s).value
    };
    let breaks: Vec<f64> = (0..=80).map(|k| f64::from(k) * 0.5 * t).collect();
    let scale = sigma_e(t).powi(2);
    let var = quad::integrate_pieces(|e| second_moment(e) * p_energy(e), &breaks, 1e-12 * scale).value;
    Ok(var.sqrt())
}

/// σ_ph(τ_π) = η·k·√(3 k_B T Γ_s τ_π/m)·exp(−Γ_s τ_π/2), k = 2π/λ.
pub fn photon_recoil_sigma(
    temperature: f64,
    scattering_rate: f64,
    tau_pi: f64,
    wavelength: f64,
    mass: f64,
    eta: f64,
) -> f64 {
    let k = 2.0 * PI / wavelength;
    let x = scattering_rate * tau_pi;
    eta * k * (3.0 * K_B * temperature * x / mass).sqrt() * (-x / 2.0).exp()
}

/// Single-photon recoil dephasing η·k·√(3 k_B T/m).
pub fn single_photon_sigma(temperature: f64, wavelength: f64, mass: f64, eta: f64) -> f64 {
    eta * (2.0 * PI / wavelength) * (3.0 * K_B * temperature / mass).sqrt()
}

/// Linearized quadratic-Zeeman fluctuation Δω = 2·coeff·B₀·ΔB.
pub fn magnetic_shift(b0: f64, delta_b: f64, quad_coeff: f64) -> f64 {
    2.0 * quad_coeff * b0 * delta_b
}

/// Clock-transition offset δ_B = coeff·B₀².
pub fn quadratic_zeeman_shift(b0: f64, quad_coeff: f64) -> f64 {
    quad_coeff * b0 * b0
}

const SINE_SAMPLES_PER_WINDOW: usize = 200;
const SINE_WINDOWS: usize = 64;
const SINE_PHASES: usize = 8;

/// Allan deviation of a unit-amplitude sine at `line_freq`, evaluated
/// numerically and averaged (in variance) over equally spaced start phases.
pub fn sine_allan_deviation(tau: f64, line_freq: f64) -> Result<f64> {
    ensure_finite("tau", tau)?;
    if tau <= 0.0 {
        return Err(Error::invalid("tau", "must be positive"));
    }
    let dt = tau / SINE_SAMPLES_PER_WINDOW as f64;
    let len = SINE_SAMPLES_PER_WINDOW * SINE_WINDOWS;
    let mut var = 0.0;
    for p in 0..SINE_PHASES {
        let phase = 2.0 * PI * p as f64 / SINE_PHASES as f64;
        // sample at window-cell midpoints so integer periods average to zero
        let values = (0..len)
            .map(|i| (2.0 * PI * line_freq * (i as f64 + 0.5) * dt + phase).sin())
            .collect();
        let series = TimeSeries::new(dt, values)?;
        var += allan_deviation(&series, tau)?.powi(2);
    }
    Ok((var / SINE_PHASES as f64).sqrt())
}

/// σ_b(τ) = √2·Δω·σ_A,sine(τ).
pub fn magnetic_sigma(tau: f64, delta_omega: f64, line_freq: f64) -> Result<f64> {
    Ok(std::f64::consts::SQRT_2 * delta_omega.abs() * sine_allan_deviation(tau, line_freq)?)
}

/// Phase error of the echo pulses: (Δφ/2π)² = (ΔΩ/Ω)² + (Δτ/τ)².
pub fn microwave_jitter(rabi_rel: f64, duration_rel: f64) -> f64 {
    rabi_rel.hypot(duration_rel)
}

/// Detunings of the trap light from the two D lines, rad/s: (Δ₁/₂, Δ₃/₂).
pub fn d_line_detunings(wavelength: f64, species: &Species) -> (f64, f64) {
    let w = |l: f64| 2.0 * PI * C / l;
    (w(wavelength) - w(species.d1_wavelength), w(wavelength) - w(species.d2_wavelength))
}

/// Raman suppression factor β = |Δ_fs/(3Δ₁/₂)|² for cesium.
pub fn raman_suppression_beta(wavelength: f64) -> Result<f64> {
    raman_suppression_beta_for(wavelength, &CESIUM)
}

pub fn raman_suppression_beta_for(wavelength: f64, species: &Species) -> Result<f64> {
    ensure_finite("wavelength", wavelength)?;
    if wavelength <= 0.0 {
        return Err(Error::invalid("wavelength", "must be positive"));
    }
    let (d12, d32) = d_line_detunings(wavelength, species);
    let w_l = 2.0 * PI * C / wavelength;
    if d12.abs() < 1e-9 * w_l || d32.abs() < 1e-9 * w_l {
        return Err(Error::invalid("wavelength", "trap light is resonant with a D line"));
    }
    Ok(beta_from_detunings(d12, d32 - d12))
}

/// β from Δ₁/₂ and Δ_fs = Δ₃/₂ − Δ₁/₂ directly.
pub fn beta_from_detunings(delta_half: f64, fine_structure: f64) -> f64 {
    (fine_structure / (3.0 * delta_half)).powi(2)
}

/// Squared two-path amplitude |a₁/₂/Δ₁/₂ + a₃/₂/Δ₃/₂|² for given path weights.
pub fn two_path_rate(delta_half: f64, fine_structure: f64, a_half: f64, a_three_half: f64) -> f64 {
    let amp = a_half / delta_half + a_three_half / (delta_half + fine_structure);
    amp * amp
}

/// Raman-to-Rayleigh ratio of the two-path expression: Raman paths interfere
/// with weights (1, −1), Rayleigh paths add with (1, 2).
pub fn two_path_raman_ratio(delta_half: f64, fine_structure: f64) -> f64 {
    two_path_rate(delta_half, fine_structure, 1.0, -1.0) / two_path_rate(delta_half, fine_structure, 1.0, 2.0)
}

/// Scattering rate scaled linearly in trap depth from an anchor point.
pub fn scale_scattering_rate(anchor_rate: f64, anchor_depth: f64, depth: f64) -> f64 {
    anchor_rate * depth / anchor_depth
}

/// T₁ = 1/(β Γ_s).
pub fn t1_from_scattering(scattering_rate: f64, beta: f64) -> Result<f64> {
    if !(scattering_rate > 0.0) {
        return Err(Error::invalid("scattering_rate", "must be positive"));
    }
    Ok(1.0 / (beta * scattering_rate))
}

/// T₂′ = √2/σ, with σ = 0 mapping to an infinite decay time.
pub fn t2prime_from_sigma(sigma: f64) -> f64 {
    if sigma == 0.0 {
        f64::INFINITY
    } else {
        std::f64::consts::SQRT_2 / sigma.abs()
    }
}

pub fn sigma_from_t2prime(t2prime: f64) -> f64 {
    std::f64::consts::SQRT_2 / t2prime
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mechanism {
    Intensity,
    PointingBest,
    PointingWorst,
    Heating,
    PhotonScattering,
    Magnetic,
}

impl Mechanism {
    pub const ALL: [Mechanism; 6] = [
        Mechanism::Intensity,
        Mechanism::PointingBest,
        Mechanism::PointingWorst,
        Mechanism::Heating,
        Mechanism::PhotonScattering,
        Mechanism::Magnetic,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Mechanism::Intensity => "intensity",
            Mechanism::PointingBest => "pointing_best",
            Mechanism::PointingWorst => "pointing_worst",
            Mechanism::Heating => "heating",
            Mechanism::PhotonScattering => "photon",
            Mechanism::Magnetic => "magnetic",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Mechanism::Intensity => "(1) intensity fluctuations",
            Mechanism::PointingBest => "(2) pointing instability, best case",
            Mechanism::PointingWorst => "(2) pointing instability, worst case",
            Mechanism::Heating => "(3a) heating (upper limit)",
            Mechanism::PhotonScattering => "(3b) photon scattering",
            Mechanism::Magnetic => "(4) magnetic field fluctuations",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    MeasuredSeries,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudgetEntry {
    pub mechanism: Mechanism,
    /// σ(T₂′) in rad/s.
    pub sigma: f64,
    pub provenance: Provenance,
}

impl NoiseBudgetEntry {
    pub fn sigma_hz(&self) -> f64 {
        rad_to_hz(self.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonScattering {
    pub temperature: f64,
    pub scattering_rate: f64,
    /// Wavelength entering the recoil momentum; the scattered trap photon by default.
    pub wavelength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticNoise {
    pub b0: f64,
    pub delta_b: f64,
    pub quad_coeff: f64,
    pub line_freq: f64,
}

/// Inputs of a budget at one operating point. Unset mechanisms are skipped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetInputs {
    /// Evaluation time T₂′; defaults to √2/σ_exp when only σ_exp is known.
    pub t2prime: Option<f64>,
    /// Measured echo-visibility decay σ_exp, rad/s.
    pub sigma_exp: Option<f64>,
    pub intensity: Option<TimeSeries>,
    pub pointing_best: Option<TimeSeries>,
    pub pointing_worst: Option<TimeSeries>,
    pub heating: Option<HeatingModel>,
    pub photon: Option<PhotonScattering>,
    pub magnetic: Option<MagneticNoise>,
    /// Mass for the photon-recoil term; species default when unset.
    pub mass: Option<f64>,
}

impl BudgetInputs {
    fn has_mechanism(&self) -> bool {
        self.intensity.is_some()
            || self.pointing_best.is_some()
            || self.pointing_worst.is_some()
            || self.heating.is_some()
            || self.photon.is_some()
            || self.magnetic.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    /// Time at which every σ was evaluated.
    pub t2prime: f64,
    pub sigma_exp: Option<f64>,
    pub entries: Vec<NoiseBudgetEntry>,
}

impl BudgetReport {
    pub fn sigma(&self, mechanism: Mechanism) -> Option<f64> {
        self.entries.iter().find(|e| e.mechanism == mechanism).map(|e| e.sigma)
    }

    /// Quadrature sum over all entries except best-case pointing when a worst
    /// case is also present.
    pub fn total(&self) -> f64 {
        self.total_excluding(if self.sigma(Mechanism::PointingWorst).is_some() {
            Some(Mechanism::PointingBest)
        } else {
            None
        })
    }

    /// Quadrature sum with best-case pointing instead of worst-case.
    pub fn total_best_case(&self) -> f64 {
        self.total_excluding(if self.sigma(Mechanism::PointingBest).is_some() {
            Some(Mechanism::PointingWorst)
        } else {
            None
        })
    }

    fn total_excluding(&self, skip: Option<Mechanism>) -> f64 {
        self.entries
            .iter()
            .filter(|e| Some(e.mechanism) != skip)
            .map(|e| e.sigma * e.sigma)
            .sum::<f64>()
            .sqrt()
    }

    /// Echo visibility V(2τ_π) predicted by the total σ, for overlay on data.
    pub fn visibility_curve(&self, tau_pi: &[f64]) -> Vec<(f64, f64)> {
        let sigma = self.total();
        tau_pi.iter().map(|&t| (t, visibility_hom(t, sigma, 1.0))).collect()
    }
}

/// Evaluates every configured mechanism at τ = T₂′.
pub fn budget_report(trap: &TrapConfig, inputs: &BudgetInputs) -> Result<BudgetReport> {
    if !inputs.has_mechanism() && inputs.sigma_exp.is_none() {
        return Err(Error::Config("no dephasing mechanism configured".into()));
    }
    let t2prime = match (inputs.t2prime, inputs.sigma_exp) {
        (Some(t), _) => t,
        (None, Some(s)) => t2prime_from_sigma(s),
        (None, None) => return Err(Error::Config("T2' or sigma_exp is required".into())),
    };
    if inputs.has_mechanism() && !(t2prime > 0.0 && t2prime.is_finite()) {
        return Err(Error::invalid("t2prime", "must be positive and finite"));
    }
    let mut entries = Vec::new();
    let measured = |series: &TimeSeries, mechanism| -> Result<NoiseBudgetEntry> {
        let normalized = series.normalized()?;
        let windows = (t2prime / series.sample_interval).round().max(1.0);
        let allan = allan_deviation(&normalized, windows * series.sample_interval)?;
        Ok(NoiseBudgetEntry {
            mechanism,
            sigma: sigma_from_allan(allan, trap.delta0()),
            provenance: Provenance::MeasuredSeries,
        })
    };
    if let Some(s) = &inputs.intensity {
        entries.push(measured(s, Mechanism::Intensity)?);
    }
    if let Some(s) = &inputs.pointing_best {
        entries.push(measured(s, Mechanism::PointingBest)?);
    }
    if let Some(s) = &inputs.pointing_worst {
        entries.push(measured(s, Mechanism::PointingWorst)?);
    }
    let model = |mechanism, sigma| NoiseBudgetEntry {
        mechanism,
        sigma,
        provenance: Provenance::Model,
    };
    if let Some(h) = &inputs.heating {
        entries.push(model(Mechanism::Heating, heating_sigma(h, t2prime, trap.eta)?));
    }
    if let Some(p) = &inputs.photon {
        let mass = inputs.mass.unwrap_or(CESIUM.mass);
        let sigma = photon_recoil_sigma(p.temperature, p.scattering_rate, t2prime / 2.0, p.wavelength, mass, trap.eta);
        entries.push(model(Mechanism::PhotonScattering, sigma));
    }
    if let Some(m) = &inputs.magnetic {
        let dw = magnetic_shift(m.b0, m.delta_b, m.quad_coeff);
        entries.push(model(Mechanism::Magnetic, magnetic_sigma(t2prime, dw, m.line_freq)?));
    }
    Ok(BudgetReport {
        t2prime,
        sigma_exp: inputs.sigma_exp,
        entries,
    })
}

/// Heating rate of two photon recoils per interval, Ė = ħ²k²/(m τ_π), in K/s.
pub fn recoil_heating_rate(wavelength: f64, mass: f64, tau_pi: f64) -> f64 {
    let k = 2.0 * PI / wavelength;
    HBAR * HBAR * k * k / (mass * tau_pi) / K_B
}
