//! Scenario files to core types. Config values are in Hz, ms, µK/mK and µT;
//! everything is converted to SI and rad/s here and nowhere else.

use dephasim_core::bloch::Detection;
use dephasim_core::budget::{quadratic_zeeman_shift, BudgetInputs, HeatingModel, MagneticNoise, PhotonScattering, TimeSeries};
use dephasim_core::constants::{hz_to_rad, CESIUM};
use dephasim_core::signal::{HomogeneousNoise, MonteCarloSetup, Sequence};
use dephasim_core::trap::{depth_from_delta0, temperature_from_t2star, EnsembleSpec, TrapConfig};

use crate::config::{Config, Either};
use crate::CliError;

const MS: f64 = 1e-3;
const UK: f64 = 1e-6;
const MK: f64 = 1e-3;
const UT: f64 = 1e-6;

/// `[trap]`: `depth_mk` or `delta0_hz`, optional `eta` and `wavelength_nm`.
pub fn trap(cfg: &Config) -> Result<TrapConfig, CliError> {
    let eta = cfg.f64_or("trap", "eta", CESIUM.eta)?;
    if !(eta > 0.0) {
        return Err(CliError::Input("[trap] eta must be positive".into()));
    }
    let depth = match cfg.one_of("trap", "depth_mk", "delta0_hz")? {
        Either::First(mk) => mk * MK,
        Either::Second(hz) => {
            if hz >= 0.0 {
                return Err(CliError::Input("[trap] delta0_hz must be negative for a red-detuned trap".into()));
            }
            depth_from_delta0(hz_to_rad(hz), eta)
        }
    };
    let mut t = TrapConfig::cesium(depth);
    t.eta = eta;
    t.wavelength = cfg.f64_or("trap", "wavelength_nm", 1064.0)? * 1e-9;
    t.validate()?;
    Ok(t)
}

#[derive(Debug, Clone)]
pub enum Simulation {
    Fringe(MonteCarloSetup),
    Rabi {
        rabi_frequency: f64,
        detuning: f64,
        contrast: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SimulateScenario {
    pub simulation: Simulation,
    pub times: Vec<f64>,
    pub output: Option<std::path::PathBuf>,
}

fn time_grid(cfg: &Config) -> Result<Vec<f64>, CliError> {
    if let Some(list) = cfg.f64_list("sequence", "times_ms")? {
        return Ok(list.into_iter().map(|t| t * MS).collect());
    }
    let start = cfg.f64_or("sequence", "t_start_ms", 0.0)? * MS;
    let stop = cfg.require_f64("sequence", "t_stop_ms")? * MS;
    let n = cfg.u64("sequence", "points")?.unwrap_or(200) as usize;
    if n < 2 || !(stop > start) {
        return Err(CliError::Input("[sequence] time grid needs t_stop_ms > t_start_ms and points ≥ 2".into()));
    }
    let h = (stop - start) / (n - 1) as f64;
    Ok((0..n).map(|i| start + i as f64 * h).collect())
}

/// Builds the `simulate` scenario. `seed` overrides `[ensemble] seed`.
pub fn simulate(cfg: &Config, seed: Option<u64>) -> Result<SimulateScenario, CliError> {
    let kind = cfg
        .str("sequence", "kind")
        .ok_or_else(|| CliError::Input("[sequence] kind is required (rabi, ramsey or echo)".into()))?
        .to_ascii_lowercase();
    let times = time_grid(cfg)?;
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Input("[sequence] times must be non-empty and strictly increasing".into()));
    }
    let output = cfg.path("output", "csv");

    if kind == "rabi" {
        let simulation = Simulation::Rabi {
            rabi_frequency: hz_to_rad(cfg.require_f64("sequence", "rabi_frequency_hz")?),
            detuning: hz_to_rad(cfg.f64_or("sequence", "detuning_hz", 0.0)?),
            contrast: cfg.f64_or("sequence", "contrast", 1.0)?,
        };
        return Ok(SimulateScenario { simulation, times, output });
    }

    let phase = cfg.f64_or("sequence", "phase_rad", 0.0)?;
    let sequence = match kind.as_str() {
        "ramsey" => Sequence::Ramsey { phase },
        "echo" => Sequence::Echo {
            tau_pi: cfg.require_f64("sequence", "tau_pi_ms")? * MS,
            echo_phase: phase,
        },
        other => return Err(CliError::Input(format!("[sequence] unknown kind `{other}`; use rabi, ramsey or echo"))),
    };
    let trap = trap(cfg)?;
    let delta_zeeman = match cfg.one_of("sequence", "delta_b_hz", "b_field_ut")? {
        Either::First(hz) => hz_to_rad(hz),
        Either::Second(ut) => quadratic_zeeman_shift(ut * UT, CESIUM.quadratic_zeeman),
    };
    let temperature = match cfg.one_of("ensemble", "temperature_uk", "t2star_ms")? {
        Either::First(uk) => uk * UK,
        Either::Second(ms) => temperature_from_t2star(ms * MS, trap.eta),
    };
    let atoms = cfg.u64("ensemble", "atoms")?.unwrap_or(10_000) as usize;
    let configured = cfg.u64("ensemble", "seed")?;
    let seed = seed.or(configured).unwrap_or(0);
    let mut ensemble = EnsembleSpec::new(temperature, atoms, seed);
    if let Some(mk) = cfg.f64("ensemble", "truncation_mk")? {
        ensemble = ensemble.with_truncation(mk * MK);
    }
    let setup = MonteCarloSetup {
        sequence,
        delta_synth: hz_to_rad(cfg.require_f64("sequence", "delta_synth_hz")?),
        delta_zeeman,
        trap,
        ensemble,
        noise: HomogeneousNoise {
            sigma: hz_to_rad(cfg.f64_or("noise", "sigma_hz", 0.0)?),
        },
        detection: Detection::new(
            cfg.f64_or("detection", "amplitude", Detection::IDEAL.amplitude)?,
            cfg.f64_or("detection", "offset", Detection::IDEAL.offset)?,
        ),
    };
    Ok(SimulateScenario {
        simulation: Simulation::Fringe(setup),
        times,
        output,
    })
}

/// Published σ(T₂′)/2π values to print next to the computed ones, by
/// mechanism id, plus `sigma_exp` and `total`.
pub type Reference = Vec<(String, f64)>;

#[derive(Debug, Clone)]
pub struct BudgetScenario {
    pub trap: TrapConfig,
    pub inputs: BudgetInputs,
    pub reference: Reference,
    pub visibility_max: Option<f64>,
    pub visibility_points: usize,
    pub output: Option<std::path::PathBuf>,
    pub visibility_output: Option<std::path::PathBuf>,
}

fn series(cfg: &Config, key: &str) -> Result<Option<TimeSeries>, CliError> {
    match cfg.path("budget", key) {
        None => Ok(None),
        Some(p) => {
            if !p.is_file() {
                return Err(CliError::Input(format!("[budget] {key}: series file {} not found", p.display())));
            }
            TimeSeries::from_csv_path(&p)
                .map(Some)
                .map_err(|e| CliError::Input(format!("[budget] {key} ({}): {e}", p.display())))
        }
    }
}

pub fn budget(cfg: &Config) -> Result<BudgetScenario, CliError> {
    let trap = trap(cfg)?;
    let mut inputs = BudgetInputs {
        t2prime: cfg.f64("budget", "t2prime_ms")?.map(|v| v * MS),
        sigma_exp: cfg.f64("budget", "sigma_exp_hz")?.map(hz_to_rad),
        intensity: series(cfg, "intensity_series")?,
        pointing_best: series(cfg, "pointing_best_series")?,
        pointing_worst: series(cfg, "pointing_worst_series")?,
        ..Default::default()
    };
    if cfg.has_section("heating") {
        inputs.heating = Some(HeatingModel {
            heating_rate: cfg.require_f64("heating", "rate_mk_per_s")? * MK,
            temperature: cfg.require_f64("heating", "temperature_mk")? * MK,
            dimension: cfg.u64("heating", "dimension")?.unwrap_or(3).min(255) as u8,
            mass: CESIUM.mass,
        });
    }
    if cfg.has_section("photon") {
        inputs.photon = Some(PhotonScattering {
            temperature: cfg.require_f64("photon", "temperature_mk")? * MK,
            scattering_rate: cfg.require_f64("photon", "scattering_rate_per_s")?,
            wavelength: cfg.f64_or("photon", "wavelength_nm", 1064.0)? * 1e-9,
        });
    }
    if cfg.has_section("magnetic") {
        inputs.magnetic = Some(MagneticNoise {
            b0: cfg.require_f64("magnetic", "b0_ut")? * UT,
            delta_b: cfg.require_f64("magnetic", "delta_b_ut")? * UT,
            quad_coeff: CESIUM.quadratic_zeeman,
            line_freq: cfg.f64_or("magnetic", "line_hz", 50.0)?,
        });
    }
    let mut reference = Vec::new();
    let ids = dephasim_core::budget::Mechanism::ALL.map(|m| m.id());
    for id in ids.iter().copied().chain(["sigma_exp", "total"]) {
        if let Some(v) = cfg.f64("reference", &format!("{id}_hz"))? {
            reference.push((id.to_string(), v));
        }
    }
    let points = cfg.u64("output", "visibility_points")?.unwrap_or(61) as usize;
    Ok(BudgetScenario {
        trap,
        inputs,
        reference,
        visibility_max: cfg.f64("output", "visibility_max_ms")?.map(|v| v * MS),
        visibility_points: points.max(2),
        output: cfg.path("output", "csv"),
        visibility_output: cfg.path("output", "visibility_csv"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use dephasim_core::constants::rad_to_hz;

    const TABLE_A: &str = "[trap]\ndelta0_hz = -268\n[ensemble]\nt2star_ms = 4.4\natoms = 10\n\
        [sequence]\nkind = ramsey\ndelta_synth_hz = 2250\ndelta_b_hz = 412\nphase_rad = 0.35\nt_stop_ms = 10\n\
        [detection]\namplitude = 0.287\noffset = 0.305\n";

    #[test]
    fn fringe_scenario_units() {
        let cfg = Config::parse(TABLE_A, "t").unwrap();
        let s = simulate(&cfg, Some(9)).unwrap();
        cfg.finish().unwrap();
        let Simulation::Fringe(setup) = s.simulation else {
            panic!("expected a fringe scenario")
        };
        assert!((rad_to_hz(setup.detuning_sum()) - 2106.0).abs() < 1e-9);
        assert!((setup.t2star() - 4.4e-3).abs() < 1e-15);
        assert_eq!(setup.ensemble.seed, 9);
        assert_eq!(s.times.len(), 200);
        assert!((s.times[199] - 10e-3).abs() < 1e-15);
    }

    #[test]
    fn b_field_alternative() {
        let text = TABLE_A.replace("delta_b_hz = 412", "b_field_ut = 97.9");
        let cfg = Config::parse(&text, "t").unwrap();
        let Simulation::Fringe(setup) = simulate(&cfg, None).unwrap().simulation else {
            panic!()
        };
        assert!((rad_to_hz(setup.delta_zeeman) - 412.0).abs() < 4.0);
        let both = TABLE_A.replace("delta_b_hz = 412", "delta_b_hz = 412\nb_field_ut = 97.9");
        assert!(simulate(&Config::parse(&both, "t").unwrap(), None).is_err());
    }

    #[test]
    fn trap_alternatives() {
        let c = Config::parse("[trap]\ndepth_mk = 1.0\n", "t").unwrap();
        assert!((rad_to_hz(trap(&c).unwrap().delta0()) + 3021.3).abs() < 0.1);
        assert!(trap(&Config::parse("[trap]\ndelta0_hz = 5\n", "t").unwrap()).is_err());
        assert!(trap(&Config::parse("[trap]\neta = 1e-4\n", "t").unwrap()).is_err());
    }
}
