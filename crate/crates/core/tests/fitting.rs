use dephasim_core::constants::hz_to_rad;
use dephasim_core::fitting::models::{EchoModel, FitModel, RabiModel, RamseyModel, VisibilityModel};
use dephasim_core::fitting::{fit_echo, fit_rabi, fit_ramsey, fit_visibility, Dataset, FitResult, Overrides};
use dephasim_core::signal::{echo_p3, ramsey_p3, visibility_hom, EchoParams, EnvelopeShape, RamseyParams};
use dephasim_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn table_a() -> RamseyParams {
    RamseyParams {
        amplitude: 0.287,
        offset: 0.305,
        detuning: hz_to_rad(2133.7),
        t2star: 4.4e-3,
        phase: 0.35,
    }
}

fn table_b() -> RamseyParams {
    RamseyParams {
        amplitude: 0.136,
        offset: 0.138,
        detuning: hz_to_rad(722.5),
        t2star: 20.4e-3,
        phase: 0.13,
    }
}

fn ramsey_data(p: &RamseyParams, t: &[f64]) -> Dataset {
    let y: Vec<f64> = t.iter().map(|&t| ramsey_p3(t, p)).collect();
    Dataset::from_xy(t, &y).unwrap()
}

fn assert_ramsey(r: &FitResult, p: &RamseyParams, tol: f64) {
    assert!(r.converged);
    assert!(rel(r.value("amplitude").unwrap(), p.amplitude) < tol, "{r:?}");
    assert!(rel(r.value("offset").unwrap(), p.offset) < tol, "{r:?}");
    assert!(rel(r.value("detuning").unwrap(), p.detuning) < tol, "{r:?}");
    assert!(rel(r.value("t2star").unwrap(), p.t2star) < tol, "{r:?}");
    assert!(rel(r.value("phase").unwrap(), p.phase) < tol, "{r:?}");
}

#[test]
fn rabi_noiseless_recovery() {
    let om = hz_to_rad(14.60e3);
    let t = grid(0.0, 150e-6, 45);
    let y: Vec<f64> = t.iter().map(|&t| 0.604 / 2.0 * (1.0 - (om * t).cos())).collect();
    let r = fit_rabi(&Dataset::from_xy(&t, &y).unwrap(), &Overrides::new()).unwrap();
    assert!(rel(r.value("contrast").unwrap(), 0.604) < 1e-6);
    assert!(rel(r.value("rabi_frequency").unwrap(), om) < 1e-6);
    assert!(r.ssr < 1e-10);
}

#[test]
fn rabi_half_period_is_enough() {
    let om = hz_to_rad(14.60e3);
    let t = grid(0.0, 0.6 * std::f64::consts::PI / om, 12);
    let y: Vec<f64> = t.iter().map(|&t| 0.3 * (1.0 - (om * t).cos())).collect();
    let r = fit_rabi(&Dataset::from_xy(&t, &y).unwrap(), &Overrides::new()).unwrap();
    assert!(rel(r.value("rabi_frequency").unwrap(), om) < 1e-6);
}

#[test]
fn rabi_noisy_within_three_standard_errors() {
    let om = hz_to_rad(14.60e3);
    let t = grid(0.0, 150e-6, 45);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let y: Vec<f64> = t
        .iter()
        .map(|&t| 0.302 * (1.0 - (om * t).cos()) + 0.01 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let r = fit_rabi(&Dataset::from_xy(&t, &y).unwrap(), &Overrides::new()).unwrap();
    let p = r.get("rabi_frequency").unwrap();
    assert!(p.stderr > 0.0);
    assert!((p.value - om).abs() < 3.0 * p.stderr, "{p:?}");
}

#[test]
fn ramsey_table_a_round_trip() {
    let p = table_a();
    let r = fit_ramsey(&ramsey_data(&p, &grid(0.0, 15e-3, 300)), &Overrides::new()).unwrap();
    assert_ramsey(&r, &p, 1e-6);
    assert!(r.ssr < 1e-10);
}

#[test]
fn ramsey_table_b_visibility() {
    let p = table_b();
    let r = fit_ramsey(&ramsey_data(&p, &grid(0.0, 40e-3, 400)), &Overrides::new()).unwrap();
    assert_ramsey(&r, &p, 1e-6);
    let v = r.get("visibility").unwrap();
    assert!((v.value - 0.136 / 0.138).abs() < 1e-6);
    assert!(v.value > 0.97 && v.value <= 1.0);
}

#[test]
fn ramsey_detuning_hint_off_by_twenty_percent() {
    let p = table_a();
    let data = ramsey_data(&p, &grid(0.0, 15e-3, 300));
    for factor in [0.8, 1.2] {
        let mut o = Overrides::new();
        o.insert("detuning".into(), factor * p.detuning);
        let r = fit_ramsey(&data, &o).unwrap();
        assert_ramsey(&r, &p, 1e-6);
    }
}

#[test]
fn ramsey_rounded_shape_fits_rounded_data() {
    let p = table_a();
    let shape = EnvelopeShape::ROUNDED;
    let t = grid(0.0, 15e-3, 300);
    let y: Vec<f64> = t
        .iter()
        .map(|&t| dephasim_core::signal::ramsey_p3_with(t, &p, &shape))
        .collect();
    let r = dephasim_core::fitting::fit_ramsey_with(&Dataset::from_xy(&t, &y).unwrap(), &Overrides::new(), &shape)
        .unwrap();
    assert_ramsey(&r, &p, 1e-6);
}

fn echo_params(psi: f64) -> EchoParams {
    EchoParams {
        amplitude: 0.25,
        offset: 0.30,
        detuning: hz_to_rad(640.0),
        t2star: 2.9e-3,
        tau_pi: 8e-3,
        echo_phase: psi,
    }
}

fn echo_data(p: &EchoParams) -> Dataset {
    let t = grid(2.0 * p.tau_pi - 3.5 * p.t2star, 2.0 * p.tau_pi + 3.5 * p.t2star, 200);
    let y: Vec<f64> = t.iter().map(|&t| echo_p3(t, p)).collect();
    Dataset::from_xy(&t, &y).unwrap()
}

#[test]
fn echo_round_trip() {
    let p = echo_params(0.2);
    let r = fit_echo(&echo_data(&p), p.tau_pi, &Overrides::new()).unwrap();
    assert!(rel(r.value("amplitude").unwrap(), p.amplitude) < 1e-6, "{r:?}");
    assert!(rel(r.value("offset").unwrap(), p.offset) < 1e-6);
    assert!(rel(r.value("detuning").unwrap(), p.detuning) < 1e-6);
    assert!(rel(r.value("t2star").unwrap(), p.t2star) < 1e-6);
    assert!(rel(r.value("echo_phase").unwrap(), 0.2) < 1e-6);
    assert_eq!(r.value("tau_pi"), Some(p.tau_pi));
}

#[test]
fn echo_phase_vanishes_on_symmetric_data() {
    let p = echo_params(0.0);
    let r = fit_echo(&echo_data(&p), p.tau_pi, &Overrides::new()).unwrap();
    assert!(r.value("echo_phase").unwrap().abs() < 1e-8, "{r:?}");
}

#[test]
fn echo_train_visibility_matches_injected_decay() {
    let sigma = hz_to_rad(22.0);
    let mut points = Vec::new();
    for tau_pi in [2e-3, 4e-3, 6e-3, 8e-3, 10e-3, 12e-3] {
        let mut p = echo_params(0.0);
        p.tau_pi = tau_pi;
        p.amplitude = 0.3 * visibility_hom(tau_pi, sigma, 0.95);
        let r = fit_echo(&echo_data(&p), tau_pi, &Overrides::new()).unwrap();
        points.push((tau_pi, r.value("visibility").unwrap()));
    }
    let v = fit_visibility(&points, &Overrides::new()).unwrap();
    assert!(rel(v.value("sigma").unwrap(), sigma) < 1e-6, "{v:?}");
    assert!(rel(v.value("c0").unwrap(), 0.95) < 1e-6);
}

#[test]
fn visibility_round_trips() {
    for (hz, c0) in [(22.0, 1.0), (6.6, 0.9), (1.54, 0.97)] {
        let sigma = hz_to_rad(hz);
        let t2p = 2f64.sqrt() / sigma;
        let taus = grid(0.05 * t2p, 1.5 * t2p, 8);
        let pts: Vec<(f64, f64)> = taus.iter().map(|&t| (t, visibility_hom(t, sigma, c0))).collect();
        let r = fit_visibility(&pts, &Overrides::new()).unwrap();
        assert!(rel(r.value("sigma").unwrap(), sigma) < 1e-6);
        assert!(rel(r.value("c0").unwrap(), c0) < 1e-6);
        assert!(rel(r.value("t2prime").unwrap(), t2p) < 1e-6);
    }
}

#[test]
fn visibility_slow_decay_gives_long_t2prime() {
    let sigma = hz_to_rad(1.54);
    let pts: Vec<(f64, f64)> = grid(10e-3, 150e-3, 5)
        .into_iter()
        .map(|t| (t, visibility_hom(t, sigma, 1.0)))
        .collect();
    let r = fit_visibility(&pts, &Overrides::new()).unwrap();
    assert!(rel(r.value("t2prime").unwrap(), 146e-3) < 0.03);
}

#[test]
fn constant_visibility_gives_zero_sigma() {
    let pts = [(1e-3, 0.8), (5e-3, 0.8), (9e-3, 0.8), (20e-3, 0.8)];
    let r = fit_visibility(&pts, &Overrides::new()).unwrap();
    assert_eq!(r.value("sigma").unwrap(), 0.0);
    assert_eq!(r.stderr("sigma").unwrap(), f64::INFINITY);
    assert_eq!(r.value("t2prime").unwrap(), f64::INFINITY);
    assert!((r.value("c0").unwrap() - 0.8).abs() < 1e-12);
}

#[test]
fn too_few_points() {
    let d = Dataset::from_xy(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).unwrap();
    assert!(matches!(fit_rabi(&d, &Overrides::new()), Err(Error::InsufficientData { .. })));
    assert!(matches!(fit_ramsey(&d, &Overrides::new()), Err(Error::InsufficientData { .. })));
    assert!(fit_visibility(&[(0.0, 1.0), (1.0, 0.5)], &Overrides::new()).is_err());
}

fn check_gradient<M: FitModel>(model: &M, p: &[f64], t: f64) {
    let mut g = vec![0.0; model.n_params()];
    model.gradient(t, p, &mut g);
    for j in 0..p.len() {
        let h = 1e-6 * p[j].abs().max(1e-3);
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[j] += h;
        lo[j] -= h;
        // five-point stencil keeps truncation error well below the tolerance
        let mut hi2 = p.to_vec();
        let mut lo2 = p.to_vec();
        hi2[j] += 2.0 * h;
        lo2[j] -= 2.0 * h;
        let fd = (8.0 * (model.value(t, &hi) - model.value(t, &lo)) - (model.value(t, &hi2) - model.value(t, &lo2)))
            / (12.0 * h);
        let scale = g[j].abs().max(1e-6 * g.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        assert!((fd - g[j]).abs() <= 1e-6 * scale.max(1e-12), "param {j}: fd {fd} vs {}", g[j]);
    }
}

#[test]
fn analytic_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let t: f64 = rng.random_range(0.0..20e-3);
        let rabi = [rng.random_range(0.2..1.0), hz_to_rad(rng.random_range(5e3..20e3)).ln()];
        check_gradient(&RabiModel, &rabi, rng.random_range(0.0..200e-6));
        let fringe = [
            rng.random_range(0.1..0.5),
            rng.random_range(0.05..0.4),
            hz_to_rad(rng.random_range(300.0..3000.0)),
            rng.random_range(1e-3f64..30e-3).ln(),
            rng.random_range(-3.0..3.0),
        ];
        check_gradient(&RamseyModel::default(), &fringe, t);
        let echo = EchoModel {
            tau_pi: rng.random_range(1e-3..10e-3),
            shape: EnvelopeShape::exact(),
        };
        check_gradient(&echo, &fringe, t);
        let vis = [rng.random_range(0.5..1.0), hz_to_rad(rng.random_range(1.0..30.0))];
        check_gradient(&VisibilityModel, &vis, rng.random_range(0.0..50e-3));
    }
}

/// Empirical spread of recovered parameters against the reported errors.
fn spread_ratio(values: &[f64], errors: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = errors.iter().sum::<f64>() / n;
    sd / se
}

#[test]
fn ramsey_errors_are_consistent_over_replicates() {
    let p = table_a();
    let t = grid(0.0, 12e-3, 120);
    let clean: Vec<f64> = t.iter().map(|&t| ramsey_p3(t, &p)).collect();
    let mut o = Overrides::new();
    o.insert("t2star".into(), 4.0e-3);
    let names = ["amplitude", "offset", "detuning", "t2star", "phase"];
    let mut vals = vec![Vec::new(); 5];
    let mut errs = vec![Vec::new(); 5];
    for rep in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
        let y: Vec<f64> = clean
            .iter()
            .map(|v| v + 0.01 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let r = fit_ramsey(&Dataset::from_xy(&t, &y).unwrap(), &o).unwrap();
        for (k, n) in names.iter().enumerate() {
            vals[k].push(r.value(n).unwrap());
            errs[k].push(r.stderr(n).unwrap());
        }
    }
    for k in 0..5 {
        let ratio = spread_ratio(&vals[k], &errs[k]);
        assert!((0.6..=1.4).contains(&ratio), "{}: ratio {ratio}", names[k]);
    }
}

#[test]
fn rabi_and_visibility_errors_are_consistent_over_replicates() {
    let om = hz_to_rad(14.6e3);
    let t = grid(0.0, 150e-6, 45);
    let sigma = hz_to_rad(22.0);
    let taus = grid(1e-3, 14e-3, 10);
    let mut rabi = (vec![], vec![], vec![], vec![]);
    let mut vis = (vec![], vec![], vec![], vec![]);
    for rep in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + rep);
        let y: Vec<f64> = t
            .iter()
            .map(|&t| 0.302 * (1.0 - (om * t).cos()) + 0.01 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let r = fit_rabi(&Dataset::from_xy(&t, &y).unwrap(), &Overrides::new()).unwrap();
        rabi.0.push(r.value("contrast").unwrap());
        rabi.1.push(r.stderr("contrast").unwrap());
        rabi.2.push(r.value("rabi_frequency").unwrap());
        rabi.3.push(r.stderr("rabi_frequency").unwrap());
        let pts: Vec<(f64, f64)> = taus
            .iter()
            .map(|&tau| (tau, visibility_hom(tau, sigma, 0.95) + 0.01 * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let v = fit_visibility(&pts, &Overrides::new()).unwrap();
        vis.0.push(v.value("c0").unwrap());
        vis.1.push(v.stderr("c0").unwrap());
        vis.2.push(v.value("sigma").unwrap());
        vis.3.push(v.stderr("sigma").unwrap());
    }
    for (name, ratio) in [
        ("contrast", spread_ratio(&rabi.0, &rabi.1)),
        ("rabi_frequency", spread_ratio(&rabi.2, &rabi.3)),
        ("c0", spread_ratio(&vis.0, &vis.1)),
        ("sigma", spread_ratio(&vis.2, &vis.3)),
    ] {
        assert!((0.6..=1.4).contains(&ratio), "{name}: ratio {ratio}");
    }
}

#[test]
fn key_value_output_is_round_trippable() {
    let p = table_a();
    let r = fit_ramsey(&ramsey_data(&p, &grid(0.0, 15e-3, 300)), &Overrides::new()).unwrap();
    let text = r.to_key_value();
    let line = text.lines().find(|l| l.starts_with("detuning = ")).unwrap();
    let v: f64 = line["detuning = ".len()..].parse().unwrap();
    assert_eq!(v, r.value("detuning").unwrap());
}
