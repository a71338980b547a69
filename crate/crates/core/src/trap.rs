//! Light shifts in the standing-wave trap and the thermal distribution of
//! differential light shifts across the atomic ensemble.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::constants::{Species, CESIUM, HBAR, KB_OVER_HBAR, K_B};
use crate::error::{ensure_finite, Error, Result};

/// √(e^{2/3} − 1): ratio of T₂* to the light-shift scale K.
pub fn t2star_factor() -> f64 {
    ((2.0f64 / 3.0).exp() - 1.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Trap depth U₀ in kelvin.
    pub depth: f64,
    /// Differential-to-total light shift ratio (magnitude).
    pub eta: f64,
    /// Effective detuning Δ_eff, rad/s (negative: red detuned).
    pub effective_detuning: f64,
    /// Ground-state hyperfine splitting ω_hfs, rad/s.
    pub hyperfine_splitting: f64,
    /// Trap laser wavelength, m.
    pub wavelength: f64,
    /// Atomic linewidth Γ, rad/s.
    pub linewidth: f64,
    /// Peak intensity in units of the saturation intensity, if known.
    pub intensity: Option<f64>,
}

impl TrapConfig {
    pub fn for_species(species: &Species, depth: f64) -> Self {
        Self {
            depth,
            eta: species.eta,
            effective_detuning: species.effective_detuning_gamma * species.linewidth,
            hyperfine_splitting: species.hyperfine_splitting_gamma * species.linewidth,
            wavelength: 1064e-9,
            linewidth: species.linewidth,
            intensity: None,
        }
    }

    /// Cesium in a 1064 nm trap of the given depth (kelvin).
    pub fn cesium(depth: f64) -> Self {
        Self::for_species(&CESIUM, depth)
    }

    /// Trap whose depth reproduces a measured maximum differential light shift.
    pub fn from_delta0(delta0: f64, eta: f64) -> Self {
        let mut cfg = Self::cesium(depth_from_delta0(delta0, eta));
        cfg.eta = eta;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("depth", self.depth)?;
        if self.depth <= 0.0 {
            return Err(Error::invalid("depth", "trap depth must be positive"));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid("eta", "must be positive and finite"));
        }
        Ok(())
    }

    /// η computed from the detunings, |ω_hfs/Δ_eff|.
    pub fn eta_from_detunings(&self) -> f64 {
        (self.hyperfine_splitting / self.effective_detuning).abs()
    }

    /// δ₀ of this trap, rad/s (negative).
    pub fn delta0(&self) -> f64 {
        delta0_max(self.depth, self.eta)
    }

    /// Intensity I/I₀ that gives the two-level depth `depth` (kelvin).
    pub fn intensity_for_depth(&self, depth: f64) -> f64 {
        depth * K_B * 8.0 * self.effective_detuning.abs() / (HBAR * self.linewidth * self.linewidth)
    }
}

/// Two-level light-shift depth |U₀(Δ)| = (ħΓ/8)(I/I₀)(Γ/|Δ|), in kelvin.
pub fn trap_depth_from_intensity(cfg: &TrapConfig) -> Result<f64> {
    let intensity = cfg
        .intensity
        .ok_or_else(|| Error::Config("trap intensity I/I0 is not set".into()))?;
    ensure_finite("intensity", intensity)?;
    if cfg.effective_detuning == 0.0 {
        return Err(Error::invalid("effective_detuning", "must be non-zero"));
    }
    let u = HBAR * cfg.linewidth / 8.0 * intensity * cfg.linewidth / cfg.effective_detuning.abs();
    Ok(u / K_B)
}

/// Maximum differential light shift δ₀ = −η·k_B·U₀/ħ for an atom at the trap bottom.
pub fn delta0_max(depth: f64, eta: f64) -> f64 {
    -eta * KB_OVER_HBAR * depth
}

/// Inverse of [`delta0_max`]: trap depth in kelvin.
pub fn depth_from_delta0(delta0: f64, eta: f64) -> f64 {
    delta0.abs() / (eta * KB_OVER_HBAR)
}

/// Three-dimensional Boltzmann density p(E) = E²/(2T³)·e^{−E/T}, energies in kelvin.
pub fn boltzmann_pdf(energy: f64, temperature: f64) -> f64 {
    if energy < 0.0 {
        return 0.0;
    }
    let x = energy / temperature;
    x * x * (-x).exp() / (2.0 * temperature)
}

/// P(E ≤ energy) for the three-dimensional Boltzmann distribution.
pub fn boltzmann_cdf(energy: f64, temperature: f64) -> f64 {
    if energy <= 0.0 {
        return 0.0;
    }
    let x = energy / temperature;
    // -expm1 form keeps precision for small x
    if x < 1e-2 {
        // series of the regularised lower gamma function P(3, x)
        return x.powi(3) / 6.0 * (1.0 - 0.75 * x + 0.3 * x * x);
    }
    1.0 - (-x).exp() * (1.0 + x + 0.5 * x * x)
}

/// Time-averaged differential light shift of an atom with total energy E:
/// the virial theorem puts half of E in the potential.
pub fn delta_ls_of_energy(energy: f64, delta0: f64, eta: f64) -> f64 {
    delta0 + eta * KB_OVER_HBAR * energy / 2.0
}

/// Gamma(3) distribution of differential light shifts with offset δ₀ and rate K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightShiftDistribution {
    pub delta0: f64,
    /// K = 2ħ/(η k_B T), seconds.
    pub k: f64,
}

impl LightShiftDistribution {
    pub fn new(delta0: f64, k: f64) -> Result<Self> {
        ensure_finite("delta0", delta0)?;
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::invalid("k", "must be positive and finite"));
        }
        Ok(Self { delta0, k })
    }

    pub fn from_temperature(delta0: f64, temperature: f64, eta: f64) -> Result<Self> {
        Self::new(delta0, k_from_temperature(temperature, eta))
    }

    pub fn from_t2star(delta0: f64, t2star: f64) -> Result<Self> {
        Self::new(delta0, t2star / t2star_factor())
    }

    pub fn pdf(&self, delta_ls: f64) -> f64 {
        lightshift_pdf(delta_ls, self)
    }

    pub fn cdf(&self, delta_ls: f64) -> f64 {
        let x = self.k * (delta_ls - self.delta0);
        // same functional form as the energy CDF with unit temperature
        boltzmann_cdf(x, 1.0)
    }

    pub fn mode(&self) -> f64 {
        self.delta0 + 2.0 / self.k
    }

    pub fn t2star(&self) -> f64 {
        t2star_factor() * self.k
    }
}

/// α̃(δ_ls) = (K³/2)(δ_ls − δ₀)²·e^{−K(δ_ls − δ₀)} on δ_ls ≥ δ₀.
pub fn lightshift_pdf(delta_ls: f64, dist: &LightShiftDistribution) -> f64 {
    let x = delta_ls - dist.delta0;
    if x < 0.0 {
        return 0.0;
    }
    let k = dist.k;
    0.5 * k * k * k * x * x * (-k * x).exp()
}

pub fn k_from_temperature(temperature: f64, eta: f64) -> f64 {
    2.0 / (eta * KB_OVER_HBAR * temperature)
}

/// T₂* = √(e^{2/3} − 1)·2ħ/(η k_B T).
pub fn t2star_from_temperature(temperature: f64, eta: f64) -> f64 {
    t2star_factor() * k_from_temperature(temperature, eta)
}

pub fn temperature_from_t2star(t2star: f64, eta: f64) -> f64 {
    2.0 * t2star_factor() / (eta * KB_OVER_HBAR * t2star)
}

/// Whether k_B T is small enough against U₀ for the harmonic/virial picture.
pub fn harmonic_regime(temperature: f64, depth: f64) -> bool {
    temperature <= depth / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// Temperature in kelvin.
    pub temperature: f64,
    pub atom_count: usize,
    /// Energies above this value (kelvin) are rejected; `None` disables truncation.
    pub truncation_energy: Option<f64>,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(temperature: f64, atom_count: usize, seed: u64) -> Self {
        Self {
            temperature,
            atom_count,
            truncation_energy: None,
            seed,
        }
    }

    pub fn with_truncation(mut self, energy: f64) -> Self {
        self.truncation_energy = Some(energy);
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("temperature", self.temperature)?;
        if self.temperature <= 0.0 {
            return Err(Error::invalid("temperature", "must be positive"));
        }
        if self.atom_count == 0 {
            return Err(Error::invalid("atom_count", "ensemble must contain at least one atom"));
        }
        if let Some(e) = self.truncation_energy {
            if !(e > 0.0) {
                return Err(Error::invalid("truncation_energy", "must be positive"));
            }
        }
        Ok(())
    }

    /// Checks the truncation energy against the trap depth and warns outside the
    /// harmonic regime.
    pub fn validate_for_trap(&self, trap: &TrapConfig) -> Result<()> {
        self.validate()?;
        if let Some(e) = self.truncation_energy {
            if e > trap.depth * (1.0 + 1e-12) {
                return Err(Error::invalid("truncation_energy", "must not exceed the trap depth"));
            }
        }
        if !harmonic_regime(self.temperature, trap.depth) {
            log::warn!(
                "k_B T = {:.3e} K exceeds U0/4 = {:.3e} K; the harmonic light-shift model degrades",
                self.temperature,
                trap.depth / 4.0
            );
        }
        Ok(())
    }

    /// Fraction of the Boltzmann distribution kept by the truncation.
    pub fn acceptance(&self) -> f64 {
        match self.truncation_energy {
            Some(e) => boltzmann_cdf(e, self.temperature),
            None => 1.0,
        }
    }
}

/// Independent random stream of atom `index`; partitioning atoms across
/// workers does not change any draw.
pub fn atom_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws one energy (kelvin) as the sum of three exponentials, rejecting
/// draws above `truncation`.
pub fn sample_energy<R: Rng + ?Sized>(rng: &mut R, temperature: f64, truncation: Option<f64>) -> f64 {
    loop {
        let e1: f64 = rng.sample(Exp1);
        let e2: f64 = rng.sample(Exp1);
        let e3: f64 = rng.sample(Exp1);
        let e = temperature * (e1 + e2 + e3);
        match truncation {
            Some(cut) if e > cut => continue,
            _ => return e,
        }
    }
}

fn check_acceptance(spec: &EnsembleSpec) -> Result<()> {
    let acceptance = spec.acceptance();
    if acceptance < 0.01 {
        return Err(Error::Acceptance { acceptance });
    }
    Ok(())
}

/// Energies of `spec.atom_count` atoms, one per-atom stream each.
pub fn sample_ensemble(spec: &EnsembleSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    check_acceptance(spec)?;
    Ok((0..spec.atom_count as u64)
        .map(|i| sample_energy(&mut atom_rng(spec.seed, i), spec.temperature, spec.truncation_energy))
        .collect())
}

/// Energies drawn sequentially from a caller-owned generator.
pub fn sample_energies<R: Rng + ?Sized>(rng: &mut R, spec: &EnsembleSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    check_acceptance(spec)?;
    Ok((0..spec.atom_count)
        .map(|_| sample_energy(rng, spec.temperature, spec.truncation_energy))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{hz_to_rad, rad_to_hz};
    use crate::quad::integrate_pieces;

    const ETA: f64 = 1.45e-4;

    #[test]
    fn delta0_at_one_millikelvin() {
        let d = rad_to_hz(delta0_max(1.0e-3, ETA));
        assert!(d < 0.0);
        assert!((d.abs() / 3.0e3 - 1.0).abs() < 0.02, "{d}");
        assert_eq!(delta0_max(0.0, ETA), 0.0);
    }

    #[test]
    fn depth_from_fitted_delta0() {
        let d = rad_to_hz(delta0_max(0.090e-3, ETA));
        assert!((d / -268.0 - 1.0).abs() < 0.05, "{d}");
        let depth = depth_from_delta0(hz_to_rad(-268.0), ETA);
        assert!((depth / 0.090e-3 - 1.0).abs() < 0.05);
    }

    #[test]
    fn intensity_depth_linear_and_round_trip() {
        let mut cfg = TrapConfig::cesium(1.0e-3);
        assert!(trap_depth_from_intensity(&cfg).is_err());
        cfg.intensity = Some(0.0);
        assert_eq!(trap_depth_from_intensity(&cfg).unwrap(), 0.0);
        let i = cfg.intensity_for_depth(1.0e-3);
        cfg.intensity = Some(i);
        let u = trap_depth_from_intensity(&cfg).unwrap();
        assert!((u / 1.0e-3 - 1.0).abs() < 1e-12);
        cfg.intensity = Some(2.0 * i);
        assert!((trap_depth_from_intensity(&cfg).unwrap() / (2.0 * u) - 1.0).abs() < 1e-12);
        assert!((rad_to_hz(delta0_max(u, cfg.eta)) / -3.0e3 - 1.0).abs() < 0.02);
    }

    #[test]
    fn eta_from_default_detunings() {
        // rounded defaults give 1.67e-4 rather than the quoted 1.45e-4
        let cfg = TrapConfig::cesium(1e-3);
        assert!((cfg.eta_from_detunings() - 2.0e3 / 1.2e7).abs() < 1e-12);
        assert_eq!(cfg.eta, ETA);
    }

    #[test]
    fn boltzmann_moments() {
        let t = 60e-6;
        let breaks: Vec<f64> = (0..=50).map(|i| i as f64 * t).collect();
        let norm = integrate_pieces(|e| boltzmann_pdf(e, t), &breaks, 1e-12);
        assert!((norm.value - 1.0).abs() < 1e-8);
        let mean = integrate_pieces(|e| e * boltzmann_pdf(e, t), &breaks, 1e-16);
        assert!((mean.value / (3.0 * t) - 1.0).abs() < 1e-6);
        // mode at 2 k_B T
        let h = 1e-4 * t;
        let slope = (boltzmann_pdf(2.0 * t + h, t) - boltzmann_pdf(2.0 * t - h, t)) / (2.0 * h);
        assert!(slope.abs() * t * t < 1e-8);
        assert!(boltzmann_pdf(2.0 * t, t) > boltzmann_pdf(1.9 * t, t));
        assert!(boltzmann_pdf(2.0 * t, t) > boltzmann_pdf(2.1 * t, t));
    }

    #[test]
    fn boltzmann_cdf_matches_quadrature() {
        let t = 1.0;
        for &e in &[0.001, 0.5, 2.0, 7.5] {
            let q = crate::quad::integrate(|x| boltzmann_pdf(x, t), 0.0, e, 1e-14);
            assert!((boltzmann_cdf(e, t) - q.value).abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn light_shift_of_energy() {
        let d0 = delta0_max(0.1e-3, ETA);
        assert_eq!(delta_ls_of_energy(0.0, d0, ETA), d0);
        assert!((delta_ls_of_energy(0.1e-3, d0, ETA) - d0 / 2.0).abs() < 1e-9);
        let e = 3.0 * 0.06e-3;
        assert!((delta_ls_of_energy(e, d0, ETA) - d0 * 0.1).abs() < 1e-9);
    }

    #[test]
    fn lightshift_pdf_shape() {
        let dist = LightShiftDistribution::from_t2star(hz_to_rad(-268.0), 4.4e-3).unwrap();
        assert_eq!(dist.pdf(dist.delta0), 0.0);
        assert_eq!(dist.pdf(dist.delta0 - 1.0), 0.0);
        let scale = 1.0 / dist.k;
        let breaks: Vec<f64> = (0..=60).map(|i| dist.delta0 + i as f64 * scale).collect();
        let q = integrate_pieces(|d| dist.pdf(d), &breaks, 1e-12);
        assert!((q.value - 1.0).abs() < 1e-8);
        let m = dist.mode();
        assert!(dist.pdf(m) > dist.pdf(m + 0.01 * scale) && dist.pdf(m) > dist.pdf(m - 0.01 * scale));
        assert!((m - (dist.delta0 + 2.0 / dist.k)).abs() < 1e-12);
    }

    #[test]
    fn pdf_is_push_forward_of_boltzmann() {
        let t = 23e-6;
        let d0 = delta0_max(0.1e-3, ETA);
        let dist = LightShiftDistribution::from_temperature(d0, t, ETA).unwrap();
        let jac = ETA * KB_OVER_HBAR / 2.0;
        for i in 1..=100 {
            let e = i as f64 * 0.15 * t;
            let lhs = dist.pdf(delta_ls_of_energy(e, d0, ETA)) * jac;
            let rhs = boltzmann_pdf(e, t);
            assert!((lhs / rhs - 1.0).abs() < 1e-10, "E = {e}");
        }
    }

    #[test]
    fn t2star_temperature_conversion() {
        // K = 1 s
        let t = k_from_temperature(1.0, ETA).recip() * 1.0;
        let t_for_unit_k = 2.0 / (ETA * KB_OVER_HBAR);
        assert!((k_from_temperature(t_for_unit_k, ETA) - 1.0).abs() < 1e-12);
        assert!((t2star_from_temperature(t_for_unit_k, ETA) - 0.97351).abs() < 1e-5);
        assert!(t > 0.0);

        let temp = temperature_from_t2star(4.4e-3, ETA);
        assert!((temp / 23e-6 - 1.0).abs() < 0.02, "{temp}");
        assert!((t2star_from_temperature(temp, ETA) - 4.4e-3).abs() < 1e-15);
        assert!((t2star_from_temperature(temp / 2.0, ETA) / 8.8e-3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_partition_free() {
        let spec = EnsembleSpec::new(50e-6, 200, 7);
        let a = sample_ensemble(&spec).unwrap();
        let b = sample_ensemble(&spec).unwrap();
        assert_eq!(a, b);
        // atom 150 drawn on its own stream
        let lone = sample_energy(&mut atom_rng(7, 150), 50e-6, None);
        assert_eq!(lone, a[150]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = sample_energies(&mut rng, &spec).unwrap();
        assert_eq!(c.len(), 200);
    }

    #[test]
    fn sample_mean_is_three_kt() {
        let t = 60e-6;
        let n = 1_000_000usize;
        let e = sample_ensemble(&EnsembleSpec::new(t, n, 11)).unwrap();
        let mean = e.iter().sum::<f64>() / n as f64;
        // Var = 3 T²
        let se = (3.0f64).sqrt() * t / (n as f64).sqrt();
        assert!((mean - 3.0 * t).abs() < 5.0 * se, "mean {mean}");
    }

    #[test]
    fn truncation_shifts_mean_slightly() {
        let t = 10e-6;
        let u0 = 0.1e-3;
        let spec = EnsembleSpec::new(t, 200_000, 5).with_truncation(u0);
        let e = sample_ensemble(&spec).unwrap();
        assert!(e.iter().all(|&x| x <= u0));
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        // truncated mean from quadrature
        let num = crate::quad::integrate(|x| x * boltzmann_pdf(x, t), 0.0, u0, 1e-18).value;
        let den = boltzmann_cdf(u0, t);
        let expected = num / den;
        assert!(expected < 3.0 * t && (3.0 * t - expected) / (3.0 * t) < 0.01);
        let se = (3.0f64).sqrt() * t / (e.len() as f64).sqrt();
        assert!((mean - expected).abs() < 5.0 * se);
    }

    #[test]
    fn tight_truncation_is_rejected() {
        let spec = EnsembleSpec::new(1e-3, 10, 1).with_truncation(0.2e-3);
        assert!(matches!(sample_ensemble(&spec), Err(Error::Acceptance { .. })));
        assert!(EnsembleSpec::new(0.0, 10, 1).validate().is_err());
        assert!(EnsembleSpec::new(1e-5, 0, 1).validate().is_err());
        let trap = TrapConfig::cesium(0.1e-3);
        assert!(EnsembleSpec::new(1e-5, 10, 1).with_truncation(0.2e-3).validate_for_trap(&trap).is_err());
    }

    #[test]
    fn support_of_sampled_light_shifts() {
        let trap = TrapConfig::cesium(0.1e-3);
        let d0 = trap.delta0();
        let spec = EnsembleSpec::new(10e-6, 10_000, 2).with_truncation(trap.depth);
        for e in sample_ensemble(&spec).unwrap() {
            let d = delta_ls_of_energy(e, d0, trap.eta);
            assert!(d >= d0 && d <= d0 / 2.0 + 1e-9);
        }
    }
}
