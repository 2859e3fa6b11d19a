//! Validation suite. Each test checks one acceptance criterion at its
//! stated tolerance and prints a PASS/FAIL line with the measured numbers
//! (visible with `cargo test --test acceptance -- --nocapture`).

use std::time::Instant;

use muskat::conformal::{
    dp_dw, dp_dw_from_image, map_p, map_p_inv, tilde_velocity, transform_curve,
    DEFAULT_BRANCH_ANGLE,
};
use muskat::curve::{sobolev_strip_norm, PeriodicCurve, StripSpec};
use muskat::diagnostics::{h_integrator, rayleigh_taylor, rt_energy, strip_width};
use muskat::dynamics::{
    step_rk4, tangent_spread, velocity, EvolutionOptions,
};
use muskat::oracles::{decay_rate, fd_jacobian, vertical_mode_eigenvalue};
use muskat::runner::{run, sweep, SweepParam};
use muskat::scenarios::Scenario;
use muskat::singular::{birkhoff_rott, br_direct_oracle, apply_t, VorticityField};
use muskat::spectral;
use muskat::vorticity::{solve_vorticity, FluidParams, SolverMode, SolverOptions};
use muskat::io::RunConfig;

fn report(criterion: &str, ok: bool, evidence: &str) {
    println!("criterion {criterion}: {} - {evidence}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} failed: {evidence}");
}

fn budget(criterion: &str, start: Instant, seconds: f64) {
    let elapsed = start.elapsed().as_secs_f64();
    println!("criterion {criterion}: runtime {elapsed:.2}s (budget {seconds}s)");
    assert!(elapsed < seconds, "criterion {criterion} exceeded its runtime budget");
}

#[test]
fn criterion_01_flat_steady_state() {
    let start = Instant::now();
    let params = FluidParams::from_rate(1.0).unwrap();
    let opts = EvolutionOptions::default();
    let mut c = PeriodicCurve::flat(64).unwrap();
    for _ in 0..100 {
        c = step_rk4(&c, &params, &opts, 1e-3).unwrap();
    }
    let h4 = sobolev_strip_norm(&c, 4, &StripSpec::both(0.0).unwrap()).unwrap().sqrt();
    report("1 (flat steady state)", h4 < 1e-12, &format!("H4 drift {h4:.3e} < 1e-12"));
    budget("1", start, 1.0);
}

#[test]
fn criterion_02_quadrature_equivalence() {
    let start = Instant::now();
    // spectral vs direct-sum on the solved strength of the graph scenario
    let n = 128;
    let c = Scenario::graph_simple(0.1).build(n).unwrap();
    let params = FluidParams::from_rate(1.0).unwrap();
    let w = solve_vorticity(&c, &params, &SolverOptions::default()).unwrap();
    let fast = birkhoff_rott(&c, &w).unwrap();
    let slow = br_direct_oracle(&c, &w, 128).unwrap();
    let sup = fast.sup_distance(&slow);

    // flat-interface closed form: BR = (0, H(w)/2)
    let flat = PeriodicCurve::flat(n).unwrap();
    let g = spectral::grid(n);
    let wflat = VorticityField::new(g.iter().map(|&a| a.cos() + 0.3 * (2.0 * a).sin()).collect());
    let br_flat = birkhoff_rott(&flat, &wflat).unwrap();
    let hw = spectral::hilbert(wflat.samples());
    let mut closed_form_err: f64 = 0.0;
    for j in 0..n {
        closed_form_err = closed_form_err
            .max(br_flat.x[j].abs())
            .max((br_flat.y[j] - 0.5 * hw[j]).abs());
    }
    report(
        "2 (quadrature equivalence)",
        sup < 1e-8 && closed_form_err < 1e-10,
        &format!("oracle sup {sup:.3e} < 1e-8, flat closed form {closed_form_err:.3e} < 1e-10"),
    );
    budget("2", start, 10.0);
}

#[test]
fn criterion_03_vorticity_solver() {
    let start = Instant::now();
    let n = 64;
    let c = Scenario::graph_simple(0.1).build(n).unwrap();
    let params = FluidParams::from_rate(1.0).unwrap();
    let tol = SolverOptions { tol: 1e-13, ..Default::default() };
    let krylov = solve_vorticity(&c, &params, &tol).unwrap();
    let dense = solve_vorticity(
        &c,
        &params,
        &SolverOptions { mode: SolverMode::Dense, ..tol },
    )
    .unwrap();
    let fixed = solve_vorticity(
        &c,
        &params,
        &SolverOptions { mode: SolverMode::FixedPoint, ..tol },
    )
    .unwrap();
    let sup = |a: &VorticityField, b: &VorticityField| -> f64 {
        a.samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let dk = sup(&krylov, &dense);
    let df = sup(&fixed, &dense);

    // residual of the strength equation, absolute L2
    let t = apply_t(&c, &krylov).unwrap();
    let dz2 = spectral::derivative(c.p2(), 1);
    let res: Vec<f64> = (0..n)
        .map(|j| krylov.samples()[j] + t[j] + 2.0 * params.rate() * dz2[j])
        .collect();
    let res_norm = spectral::l2_norm(&res);
    report(
        "3 (vorticity solver)",
        dk < 1e-10 && df < 1e-10 && res_norm < 1e-12,
        &format!("krylov-dense {dk:.3e}, fixed-dense {df:.3e} (< 1e-10); residual {res_norm:.3e} < 1e-12"),
    );
    budget("3", start, 5.0);
}

#[test]
fn criterion_04_tangential_choice() {
    let start = Instant::now();
    let n = 64;
    let params = FluidParams::from_rate(1.0).unwrap();
    let t_end = 0.5;

    let run_spread = |use_tangential: bool| -> f64 {
        let opts = EvolutionOptions { use_tangential, ..Default::default() };
        let mut c = Scenario::graph_simple(0.1).build(n).unwrap();
        let mut worst = tangent_spread(&c);
        let mut t = 0.0;
        while t < t_end {
            let dt = opts.effective_dt(&c, &params).min(t_end - t);
            c = step_rk4(&c, &params, &opts, dt).unwrap();
            t += dt;
            worst = worst.max(tangent_spread(&c));
        }
        worst
    };
    let with_c = run_spread(true);
    let without_c = run_spread(false);
    report(
        "4 (tangential choice)",
        with_c < 1e-6 && without_c > 1e-3,
        &format!("|dz|^2 spread with c {with_c:.3e} < 1e-6, without c {without_c:.3e} > 1e-3"),
    );
    budget("4", start, 30.0);
}

#[test]
fn criterion_05_linearized_stability() {
    let start = Instant::now();
    let n = 64;
    let opts = EvolutionOptions::default();
    let params = FluidParams::from_rate(1.0).unwrap();

    let measured = decay_rate(1, 1e-3, &params, n, &opts).unwrap();
    let jac = fd_jacobian(&PeriodicCurve::flat(n).unwrap(), &params, &opts, 1e-5).unwrap();
    let (eig, residual) = vertical_mode_eigenvalue(&jac, n, 1);
    let rel = ((measured - eig) / eig).abs();

    let measured2 = decay_rate(1, 1e-3, &FluidParams::from_rate(2.0).unwrap(), n, &opts).unwrap();
    let doubling = measured2 / measured;

    report(
        "5 (linearized stability)",
        rel < 0.01 && (doubling - 2.0).abs() < 0.04 && residual < 1e-3,
        &format!(
            "rate {measured:.6} vs eigenvalue {eig:.6} (rel {rel:.2e} < 1e-2); R-doubling ratio {doubling:.4} within 2%"
        ),
    );
    budget("5", start, 60.0);
}

#[test]
fn criterion_06_temporal_order() {
    let start = Instant::now();
    let n = 32;
    let c0 = Scenario::graph_simple(0.2).build(n).unwrap();
    let params = FluidParams::from_rate(2.0).unwrap();
    let opts = EvolutionOptions { filter_threshold: 0.0, ..Default::default() };
    let t_end = 0.4;
    let evolve = |dt: f64| -> PeriodicCurve {
        let steps = (t_end / dt).round() as usize;
        let mut c = c0.clone();
        for _ in 0..steps {
            c = step_rk4(&c, &params, &opts, dt).unwrap();
        }
        c
    };
    let coarse = evolve(0.02);
    let medium = evolve(0.01);
    let fine = evolve(0.005);
    let err = |a: &PeriodicCurve, b: &PeriodicCurve| -> f64 {
        a.p1()
            .iter()
            .zip(b.p1())
            .chain(a.p2().iter().zip(b.p2()))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let ratio = err(&coarse, &medium) / err(&medium, &fine);
    report(
        "6 (temporal order)",
        (13.0..=19.0).contains(&ratio),
        &format!("self-convergence ratio {ratio:.2} in [13, 19]"),
    );
    budget("6", start, 30.0);
}

#[test]
fn criterion_07_conformal_probe_integrity() {
    let start = Instant::now();
    // round trip on a 1000-point grid avoiding the cut and poles
    let mut count = 0;
    let mut rt_worst: f64 = 0.0;
    for ix in 0..40 {
        for iy in 0..25 {
            let x = -2.7 + 5.4 * (ix as f64) / 39.0;
            let y = -1.2 + 2.4 * (iy as f64) / 24.0;
            if x.abs() < 0.15 {
                continue;
            }
            let w = num_complex::Complex64::new(x, y);
            let v = map_p(w, DEFAULT_BRANCH_ANGLE).unwrap();
            rt_worst = rt_worst.max((map_p_inv(v).unwrap() - w).norm());
            count += 1;
        }
    }

    // Jacobian weight via both evaluation routes along a curve
    let n = 128;
    let g = spectral::grid(n);
    let c = PeriodicCurve::open(
        vec![0.0; n],
        g.iter().map(|&a| 0.75 + 0.1 * a.cos()).collect(),
    )
    .unwrap();
    let state = transform_curve(&c, DEFAULT_BRANCH_ANGLE).unwrap();
    let mut q2_worst: f64 = 0.0;
    for (j, w) in c.w().into_iter().enumerate() {
        let direct = dp_dw(w, DEFAULT_BRANCH_ANGLE).unwrap().norm_sqr();
        let via_image = dp_dw_from_image(state.curve.w()[j]).unwrap().norm_sqr();
        q2_worst = q2_worst.max((direct - via_image).abs() / direct.max(1.0));
    }

    // normal-velocity consistency between the frames
    let params = FluidParams::unit();
    let opts = EvolutionOptions::default();
    let phys = velocity(&c, &params, &opts).unwrap();
    let tl = tilde_velocity(&state.curve, &params, &opts).unwrap();
    let (d1, d2) = state.curve.derivative(1).unwrap();
    let mut nv_worst: f64 = 0.0;
    for (j, w) in c.w().into_iter().enumerate() {
        let dp = dp_dw(w, DEFAULT_BRANCH_ANGLE).unwrap();
        let push = dp * num_complex::Complex64::new(phys.z_t.x[j], phys.z_t.y[j]);
        let norm = (d1[j] * d1[j] + d2[j] * d2[j]).sqrt();
        let (nx, ny) = (-d2[j] / norm, d1[j] / norm);
        nv_worst = nv_worst
            .max(((push.re * nx + push.im * ny) - (tl.z_t.x[j] * nx + tl.z_t.y[j] * ny)).abs());
    }

    report(
        "7 (conformal probe integrity)",
        count >= 900 && rt_worst < 1e-12 && q2_worst < 1e-10 && nv_worst < 1e-6,
        &format!(
            "round-trip {rt_worst:.3e} < 1e-12 on {count} points; Q^2 dual path {q2_worst:.3e} < 1e-10; normal velocity {nv_worst:.3e} < 1e-6"
        ),
    );
    budget("7", start, 10.0);
}

#[test]
fn criterion_08_splat_probe_discriminator() {
    let start = Instant::now();
    let mut cfg = RunConfig::default();
    cfg.scenario = Scenario::Neck { d: 0.05, l: 0.5 };
    cfg.n_points = 256;
    let values = [0.1, 0.05, 0.025];
    let rows = sweep(&cfg, SweepParam::NeckD, &values).unwrap();

    let slope = (rows[2].arc_chord_max.ln() - rows[0].arc_chord_max.ln())
        / (values[2].ln() - values[0].ln());

    let mut clear_ratio_worst: f64 = 1.0;
    for l in 0..5 {
        let lo = rows.iter().map(|r| r.clearances[l]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r.clearances[l]).fold(0.0f64, f64::max);
        clear_ratio_worst = clear_ratio_worst.max(hi / lo);
    }
    let ac_lo = rows.iter().map(|r| r.image_arc_chord).fold(f64::INFINITY, f64::min);
    let ac_hi = rows.iter().map(|r| r.image_arc_chord).fold(0.0f64, f64::max);
    let ac_ratio = ac_hi / ac_lo;

    for r in &rows {
        println!(
            "  d = {:>5}: arc-chord {:>10.1}, image arc-chord {:>7.1}, m(q_l) {:?}",
            r.value, r.arc_chord_max, r.image_arc_chord, r.clearances
        );
    }
    report(
        "8 (splat-probe discriminator)",
        (slope + 2.0).abs() < 0.3 && clear_ratio_worst < 10.0 && ac_ratio < 10.0,
        &format!(
            "physical arc-chord slope {slope:.3} = -2 +- 0.3; clearance variation {clear_ratio_worst:.2}x < 10x; image arc-chord variation {ac_ratio:.2}x < 10x"
        ),
    );
    budget("8", start, 120.0);
}

#[test]
fn criterion_09_diagnostics_algebra() {
    let start = Instant::now();
    // sigma on the flat interface
    let n = 64;
    let flat = PeriodicCurve::flat(n).unwrap();
    let params = FluidParams::new(1.0, 2.0, 1.0, 3.0).unwrap();
    let opts = EvolutionOptions::default();
    let bundle = velocity(&flat, &params, &opts).unwrap();
    let sigma = rayleigh_taylor(&flat, &bundle.vorticity, &bundle.br, &params).unwrap();
    let sig_err = sigma
        .iter()
        .map(|s| (s - params.g * params.rho2).abs())
        .fold(0.0f64, f64::max);

    // planted spectral slope
    let rho = 0.7;
    let g = spectral::grid(128);
    let p2: Vec<f64> = g
        .iter()
        .map(|&a| (1..=45).map(|k| (-rho * k as f64).exp() * (k as f64 * a).cos()).sum())
        .collect();
    let synth = PeriodicCurve::open(vec![0.0; 128], p2).unwrap();
    let rho_err = (strip_width(&synth).unwrap() - rho).abs();

    // decay integrator against the constant-G closed form
    let g0 = 1.3;
    let h0 = 0.4;
    let times: Vec<f64> = (0..=300).map(|i| i as f64 * 1e-3).collect();
    let series = h_integrator(&times, &vec![g0; times.len()], h0).unwrap();
    let h_err = times
        .iter()
        .zip(&series.values)
        .map(|(&t, &h)| (h - ((-10.0 * g0 * t).exp() * (h0 + 1.0) - 1.0)).abs())
        .fold(0.0f64, f64::max);

    // the strip-slope guard: lambda >= m(0)/2 saturates the energy
    let e = rt_energy(&flat, &params, 0.5 * params.g * params.rho2, 0.0, 1.0, &opts).unwrap();

    report(
        "9 (diagnostics algebra)",
        sig_err < 1e-13 && rho_err < 1e-3 && h_err < 1e-10 && e.sentinel,
        &format!(
            "flat sigma error {sig_err:.3e} < 1e-13; planted slope error {rho_err:.3e} < 1e-3; decay closed form {h_err:.3e} < 1e-10; lambda guard sentinel {}",
            e.sentinel
        ),
    );
    budget("9", start, 10.0);
}

#[test]
fn criterion_10_persistence_determinism() {
    let start = Instant::now();
    use muskat::io::Snapshot;
    // lossless snapshot round trip on awkward floats
    let n = 64;
    let g = spectral::grid(n);
    let c = PeriodicCurve::open(
        g.iter().map(|&a| 0.05 * (2.0 * a + 0.37).sin() / 3.0).collect(),
        g.iter().map(|&a| 0.1 * (a + 0.11).cos() / 7.0).collect(),
    )
    .unwrap();
    let dir = std::env::temp_dir().join("muskat_acceptance_io");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("snap.json");
    Snapshot::physical(&c, 0.125).save(&path).unwrap();
    let back = Snapshot::load(&path).unwrap().to_curve().unwrap();
    let lossless = c
        .p1()
        .iter()
        .zip(back.p1())
        .chain(c.p2().iter().zip(back.p2()))
        .all(|(a, b)| a == b);

    // identical configs, byte-identical CSVs
    let mut cfg = RunConfig::default();
    cfg.n_points = 64;
    cfg.evolution.t_end = 0.05;
    let d1 = dir.join("run1");
    let d2 = dir.join("run2");
    let _ = std::fs::remove_dir_all(&d1);
    let _ = std::fs::remove_dir_all(&d2);
    run(&cfg, &d1).unwrap();
    run(&cfg, &d2).unwrap();
    let bytes1 = std::fs::read(d1.join("diagnostics.csv")).unwrap();
    let bytes2 = std::fs::read(d2.join("diagnostics.csv")).unwrap();
    let identical = bytes1 == bytes2;

    report(
        "10 (persistence determinism)",
        lossless && identical,
        &format!(
            "snapshot round-trip lossless: {lossless}; identical configs byte-identical CSV ({} bytes): {identical}",
            bytes1.len()
        ),
    );
    budget("10", start, 30.0);
}
