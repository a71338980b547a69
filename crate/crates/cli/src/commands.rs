use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dephasim_core::bloch::{integrate_damped_bloch, BlochVector, DampingParams, TorqueParams};
use dephasim_core::budget::{allan_deviation, budget_report, sigma_from_t2prime, BudgetReport, TimeSeries};
use dephasim_core::constants::rad_to_hz;
use dephasim_core::fitting::{fit_echo, fit_rabi, fit_ramsey, fit_visibility, Dataset, FitResult, Overrides};
use dephasim_core::signal::{monte_carlo_signal, visibility_hom};
use serde_json::json;

use crate::config::Config;
use crate::scenario::{self, Simulation};
use crate::CliError;

/// Writes to `path`, or stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn simulate(cfg: &Config, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let sc = scenario::simulate(cfg, seed)?;
    cfg.finish()?;
    let mut csv = String::from("t_s,p3_analytic,p3_montecarlo,mc_stderr\n");
    match &sc.simulation {
        Simulation::Fringe(setup) => {
            let mc = monte_carlo_signal(setup, &sc.times)?;
            for p in &mc {
                let _ = writeln!(csv, "{},{},{},{}", num(p.t), num(setup.analytic_p3(p.t)), num(p.p3), num(p.stderr));
            }
        }
        Simulation::Rabi {
            rabi_frequency,
            detuning,
            contrast,
        } => {
            // the integrator column is deterministic, so its error is zero
            let torque = TorqueParams::new(*rabi_frequency, *detuning)?;
            let generalized = rabi_frequency.hypot(*detuning);
            let dt = 2.0 * std::f64::consts::PI / generalized / 2000.0;
            let weight = (rabi_frequency / generalized).powi(2);
            for &t in &sc.times {
                let analytic = contrast * weight * (0.5 * generalized * t).sin().powi(2);
                let u = integrate_damped_bloch(&torque, &DampingParams::undamped(), BlochVector::lower(), t, dt)?;
                let _ = writeln!(csv, "{},{},{},{}", num(t), num(analytic), num(contrast * u.p3()), num(0.0));
            }
        }
    }
    emit(out.as_deref().or(sc.output.as_deref()), &csv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Model {
    Rabi,
    Ramsey,
    Echo,
    Visibility,
}

/// Core parameter names with their report names and scale factors.
const UNITS: [(&str, &str, f64); 6] = [
    ("detuning", "detuning_hz", 1.0 / (2.0 * std::f64::consts::PI)),
    ("rabi_frequency", "rabi_frequency_hz", 1.0 / (2.0 * std::f64::consts::PI)),
    ("sigma", "sigma_hz", 1.0 / (2.0 * std::f64::consts::PI)),
    ("t2star", "t2star_ms", 1e3),
    ("t2prime", "t2prime_ms", 1e3),
    ("tau_pi", "tau_pi_ms", 1e3),
];

fn report_name(name: &str) -> (String, f64) {
    UNITS
        .iter()
        .find(|u| u.0 == name)
        .map_or((name.to_string(), 1.0), |u| (u.1.to_string(), u.2))
}

/// `--init` pairs in report units (`detuning_hz=2100`, `t2star_ms=4`) to
/// core overrides.
pub fn parse_overrides(pairs: &[String]) -> Result<Overrides, CliError> {
    let mut out = Overrides::new();
    for pair in pairs {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--init expects name=value, got `{pair}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| CliError::Input(format!("--init {key}: `{value}` is not a number")))?;
        let key = key.trim();
        let (core, scale) = match UNITS.iter().find(|u| u.1 == key) {
            Some(u) => (u.0, u.2),
            None if UNITS.iter().any(|u| u.0 == key) => {
                return Err(CliError::Input(format!("--init {key} needs a unit suffix (_hz or _ms)")));
            }
            None => (key, 1.0),
        };
        out.insert(core.to_string(), value / scale);
    }
    Ok(out)
}

fn key_value(r: &FitResult) -> String {
    let mut out = format!("model = {}\n", r.model);
    for p in r.params.iter().chain(&r.derived) {
        let (name, s) = report_name(&p.name);
        let _ = writeln!(out, "{name} = {}", num(p.value * s));
        let _ = writeln!(out, "{name}_stderr = {}", num(p.stderr * s));
    }
    let _ = writeln!(out, "ssr = {}", num(r.ssr));
    let _ = writeln!(out, "converged = {}", r.converged);
    let _ = writeln!(out, "iterations = {}", r.iterations);
    let _ = writeln!(out, "points = {}", r.points);
    out
}

fn json_value(r: &FitResult) -> String {
    let mut params = serde_json::Map::new();
    for p in r.params.iter().chain(&r.derived) {
        let (name, s) = report_name(&p.name);
        // JSON has no infinity; unconstrained errors become null
        let se = p.stderr * s;
        params.insert(name, json!({ "value": p.value * s, "stderr": se.is_finite().then_some(se) }));
    }
    let doc = json!({
        "model": r.model,
        "parameters": params,
        "ssr": r.ssr,
        "converged": r.converged,
        "iterations": r.iterations,
        "points": r.points,
    });
    serde_json::to_string_pretty(&doc).expect("plain values serialize") + "\n"
}

fn summary(r: &FitResult) -> String {
    let mut out = format!("{} fit of {} points ({} iterations)\n", r.model, r.points, r.iterations);
    for p in r.params.iter().chain(&r.derived) {
        let (name, s) = report_name(&p.name);
        let _ = writeln!(out, "  {name:<20} {:>14.6} ± {:.2e}", p.value * s, p.stderr * s);
    }
    if let Some(v) = r.value("visibility") {
        let _ = writeln!(out, "  V = A/B = {v:.4}");
    }
    if let Some(t) = r.value("t2prime") {
        let _ = writeln!(out, "  T2' = sqrt(2)/sigma = {:.3} ms", t * 1e3);
    }
    out
}

pub struct FitArgs {
    pub data: PathBuf,
    pub model: Model,
    pub column: Option<String>,
    pub tau_pi_ms: Option<f64>,
    pub init: Vec<String>,
    pub out: Option<PathBuf>,
}

pub fn fit(args: &FitArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.data)
        .map_err(|e| CliError::Input(format!("cannot read dataset {}: {e}", args.data.display())))?;
    let data = match &args.column {
        Some(c) => Dataset::from_csv_column(&text, c),
        None => Dataset::from_csv_str(&text),
    }
    .map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?;
    let overrides = parse_overrides(&args.init)?;
    let result = match args.model {
        Model::Rabi => fit_rabi(&data, &overrides)?,
        Model::Ramsey => fit_ramsey(&data, &overrides)?,
        Model::Echo => {
            let tau = args
                .tau_pi_ms
                .ok_or_else(|| CliError::Input("the echo model needs --tau-pi-ms".into()))?;
            fit_echo(&data, tau * 1e-3, &overrides)?
        }
        Model::Visibility => {
            let pts: Vec<(f64, f64)> = data.points.iter().map(|p| (p.t, p.p3)).collect();
            fit_visibility(&pts, &overrides)?
        }
    };
    if !result.converged {
        return Err(CliError::NonConvergence(format!("fit stopped without converging\n{}", key_value(&result))));
    }
    if let Some(path) = &args.out {
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        emit(Some(path), &if is_json { json_value(&result) } else { key_value(&result) })?;
        print!("{}", summary(&result));
    } else {
        print!("{}", key_value(&result));
        eprint!("{}", summary(&result));
    }
    Ok(())
}

fn budget_table(report: &BudgetReport, sc: &scenario::BudgetScenario) -> String {
    let reference = |id: &str| sc.reference.iter().find(|r| r.0 == id).map(|r| r.1);
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    let mut out = format!(
        "Dephasing budget at T2' = {:.2} ms, delta0/2pi = {:.1} Hz\n",
        report.t2prime * 1e3,
        rad_to_hz(sc.trap.delta0())
    );
    if sc.inputs.t2prime.is_none() {
        if let Some(s) = report.sigma_exp {
            let _ = writeln!(out, "T2' = sqrt(2)/sigma_exp with sigma_exp/2pi = {:.2} Hz", rad_to_hz(s));
        }
    }
    let _ = writeln!(out, "{:<40} {:>14} {:>14}", "sigma(T2')/2pi", "computed [Hz]", "published [Hz]");
    for m in dephasim_core::budget::Mechanism::ALL {
        let computed = report.sigma(m).map(rad_to_hz);
        let published = reference(m.id());
        if computed.is_some() || published.is_some() {
            let _ = writeln!(out, "{:<40} {:>14} {:>14}", m.label(), cell(computed), cell(published));
        }
    }
    if !report.entries.is_empty() {
        let _ = writeln!(out, "{:<40} {:>14} {:>14}", "quadrature total", cell(Some(rad_to_hz(report.total()))), cell(reference("total")));
        if report.sigma(dephasim_core::budget::Mechanism::PointingBest).is_some() {
            let _ = writeln!(out, "{:<40} {:>14}", "quadrature total, best-case pointing", cell(Some(rad_to_hz(report.total_best_case()))));
        }
    }
    if let Some(s) = report.sigma_exp {
        let _ = writeln!(out, "{:<40} {:>14} {:>14}", "sigma_exp (measured)", cell(Some(rad_to_hz(s))), cell(reference("sigma_exp")));
    }
    out
}

fn budget_csv(report: &BudgetReport, sc: &scenario::BudgetScenario) -> String {
    let reference = |id: &str| sc.reference.iter().find(|r| r.0 == id).map_or(String::new(), |r| num(r.1));
    let mut out = String::from("quantity,value,published,unit\n");
    let _ = writeln!(out, "t2prime,{},,ms", num(report.t2prime * 1e3));
    for m in dephasim_core::budget::Mechanism::ALL {
        if let Some(s) = report.sigma(m) {
            let _ = writeln!(out, "{},{},{},Hz", m.id(), num(rad_to_hz(s)), reference(m.id()));
        }
    }
    if !report.entries.is_empty() {
        let _ = writeln!(out, "total,{},{},Hz", num(rad_to_hz(report.total())), reference("total"));
        let _ = writeln!(out, "total_best_case,{},,Hz", num(rad_to_hz(report.total_best_case())));
    }
    if let Some(s) = report.sigma_exp {
        let _ = writeln!(out, "sigma_exp,{},{},Hz", num(rad_to_hz(s)), reference("sigma_exp"));
    }
    out
}

fn visibility_csv(report: &BudgetReport, sc: &scenario::BudgetScenario) -> String {
    let max = sc.visibility_max.unwrap_or(2.0 * report.t2prime);
    let n = sc.visibility_points;
    let taus: Vec<f64> = (0..n).map(|i| max * i as f64 / (n - 1) as f64).collect();
    let mut out = String::from("tau_pi_s");
    if !report.entries.is_empty() {
        out.push_str(",v_budget");
    }
    if report.sigma_exp.is_some() {
        out.push_str(",v_measured");
    }
    out.push('\n');
    let budget = report.visibility_curve(&taus);
    for (i, &t) in taus.iter().enumerate() {
        out.push_str(&num(t));
        if !report.entries.is_empty() {
            let _ = write!(out, ",{}", num(budget[i].1));
        }
        if let Some(s) = report.sigma_exp {
            let _ = write!(out, ",{}", num(visibility_hom(t, s, 1.0)));
        }
        out.push('\n');
    }
    out
}

pub fn budget(cfg: &Config, out: Option<PathBuf>, visibility_out: Option<PathBuf>) -> Result<(), CliError> {
    let sc = scenario::budget(cfg)?;
    cfg.finish()?;
    let report = budget_report(&sc.trap, &sc.inputs)?;
    print!("{}", budget_table(&report, &sc));
    if let Some(p) = out.or(sc.output.clone()) {
        emit(Some(&p), &budget_csv(&report, &sc))?;
    }
    if let Some(p) = visibility_out.or(sc.visibility_output.clone()) {
        emit(Some(&p), &visibility_csv(&report, &sc))?;
    }
    if let (Some(t), None) = (sc.inputs.t2prime, sc.inputs.sigma_exp) {
        log::info!("sigma equivalent of T2': {:.3} Hz", rad_to_hz(sigma_from_t2prime(t)));
    }
    Ok(())
}

pub struct AllanArgs {
    pub series: Option<PathBuf>,
    pub tau: Vec<f64>,
    pub raw: bool,
    pub out: Option<PathBuf>,
}

pub fn allan(cfg: Option<&Config>, args: &AllanArgs) -> Result<(), CliError> {
    let series_path = match (&args.series, cfg.and_then(|c| c.path("allan", "series"))) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => p,
        (None, None) => return Err(CliError::Input("allan needs --series or [allan] series".into())),
    };
    let mut taus = args.tau.clone();
    if taus.is_empty() {
        if let Some(c) = cfg {
            taus = c.f64_list("allan", "tau_ms")?.unwrap_or_default().iter().map(|t| t * 1e-3).collect();
        }
    }
    let raw = args.raw || cfg.and_then(|c| c.str("allan", "normalize")).is_some_and(|v| v == "false");
    let output = args.out.clone().or_else(|| cfg.and_then(|c| c.path("output", "csv")));
    if let Some(c) = cfg {
        c.finish()?;
    }
    let series = TimeSeries::from_csv_path(&series_path).map_err(|e| CliError::Input(format!("{}: {e}", series_path.display())))?;
    if series.len() < 4 {
        return Err(CliError::Input(format!(
            "{}: Allan deviation needs at least 4 samples, got {}",
            series_path.display(),
            series.len()
        )));
    }
    let series = if raw { series } else { series.normalized()? };
    if taus.is_empty() {
        // octave ladder from one sample to half the record
        let mut m = 1usize;
        while 2 * m <= series.len() {
            taus.push(m as f64 * series.sample_interval);
            m *= 2;
        }
    }
    let mut csv = String::from("tau_s,allan_deviation\n");
    for &tau in &taus {
        let _ = writeln!(csv, "{},{}", num(tau), num(allan_deviation(&series, tau)?));
    }
    emit(output.as_deref(), &csv)
}
