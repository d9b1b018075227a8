use std::time::Instant;

use spinflow::clifford::build_gamma;
use spinflow::diagnostics::{check_identity, check_identity_refined, identity_class, IdentityClass, EXACT_TOL, IDENTITIES};
use spinflow::flow::{FlowConfig, FlowSystem, Gauge, Variant};
use spinflow::grid::Grid;
use spinflow::scenario::{flat_stationary, perturbed_stationary, random_state};
use spinflow::verify::{format_table, run_suite, symbol_pairing_residuals, ungauged_kernel, ALGEBRA_TOL};

fn report(criterion: usize, pass: bool, started: Instant, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion}: {status} ({:.2} s) {detail}", started.elapsed().as_secs_f64());
}

fn exact_identities() -> impl Iterator<Item = &'static str> {
    IDENTITIES.into_iter().filter(|n| identity_class(n).ok() == Some(IdentityClass::Exact))
}

fn flux_config() -> FlowConfig {
    FlowConfig { lambda2: 0.5, ..FlowConfig::default() }
}

#[test]
fn criterion_1_clifford_algebra() {
    let started = Instant::now();
    let checks = run_suite("algebra", &[]).unwrap();
    let worst = checks.iter().map(|c| c.residual).fold(0.0, f64::max);
    let pass = checks.iter().all(|c| c.pass && c.residual <= ALGEBRA_TOL);
    report(1, pass, started, &format!("{} checks, worst residual {worst:.2e}", checks.len()));
    assert!(pass, "{}", format_table(&checks));
}

#[test]
fn criterion_2_exact_identities() {
    let started = Instant::now();
    let cases = [(2usize, 1usize, 32usize, 0.0), (5, 2, 6, 1.0)];
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (n, k, size, c) in cases {
        let state = random_state(&Grid::cubic(n, size, 2).unwrap(), &build_gamma(n).unwrap(), k, 0x2a, 0.1).unwrap();
        let cfg = FlowConfig { c, ..flux_config() };
        for name in exact_identities() {
            let r = check_identity(name, &state, &cfg).unwrap();
            worst = worst.max(r.residual);
            if !(r.residual <= EXACT_TOL) {
                failures.push(format!("{name} n={n}: {:.2e}", r.residual));
            }
        }
    }
    let pass = failures.is_empty();
    report(2, pass, started, &format!("worst residual {worst:.2e}"));
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_3_scaling_equivariance() {
    let started = Instant::now();
    let checks = run_suite("scaling", &[]).unwrap();
    let worst = checks.iter().map(|c| c.residual).fold(0.0, f64::max);
    let pass = checks.iter().all(|c| c.residual <= 1e-12);
    report(3, pass, started, &format!("{} variant runs, worst residual {worst:.2e}", checks.len()));
    assert!(pass, "{}", format_table(&checks));
}

#[test]
fn criterion_4_stencil_identity_orders() {
    let started = Instant::now();
    let basis = build_gamma(2).unwrap();
    let states: Vec<_> = [16usize, 32, 64]
        .iter()
        .map(|&m| random_state(&Grid::cubic(2, m, 2).unwrap(), &basis, 1, 0x4d, 0.1).unwrap())
        .collect();
    let mut lines = Vec::new();
    let mut pass = true;
    for name in IDENTITIES.into_iter().filter(|n| identity_class(n).ok() == Some(IdentityClass::Stencil)) {
        let r = check_identity_refined(name, &states, &flux_config()).unwrap();
        let order = r.order.unwrap();
        pass &= (order - 2.0).abs() <= 0.2;
        lines.push(format!("{name} {order:.3}"));
    }
    report(4, pass, started, &lines.join(", "));
    assert!(pass, "{lines:?}");
}

#[test]
fn criterion_5_symbol_analyzer() {
    let started = Instant::now();
    let (derived, printed) = symbol_pairing_residuals(1000, 0x55).unwrap();
    let (min_ev, kernel) = ungauged_kernel(100, 0x56).unwrap();
    let printed_pass = printed <= 1e-12;
    let derived_pass = derived <= 1e-12;
    let psd = min_ev >= -1e-12;
    report(
        5,
        printed_pass && psd && kernel > 0,
        started,
        &format!(
            "printed-form residual {printed:.3e}; derived-form residual {derived:.2e}; ungauged min eigenvalue {min_ev:.2e}, kernel dim {kernel}"
        ),
    );
    assert!(derived_pass, "pairing deviates from the derived closed form by {derived:.3e}");
    assert!(psd, "ungauged symbol has eigenvalue {min_ev:.3e}");
    assert!(kernel > 0);
}

#[test]
fn criterion_6_flat_stationary_point() {
    let started = Instant::now();
    let mut worst_rhs = 0.0f64;
    let mut worst_move = 0.0f64;
    for gauge in [Gauge::None, Gauge::DeTurck, Gauge::Hw] {
        for variant in [Variant::DynamicPhi, Variant::FixedPhi] {
            let state = flat_stationary(&Grid::cubic(2, 16, 2).unwrap(), &build_gamma(2).unwrap(), 1).unwrap();
            let sys = FlowSystem::for_state(FlowConfig { gauge, variant, dt: 1e-2, ..flux_config() }, &state).unwrap();
            worst_rhs = worst_rhs.max(sys.rhs(&state).unwrap().max_abs());
            let mut s = state.clone();
            for _ in 0..100 {
                s = sys.step(&s, 1e-2).unwrap().state;
            }
            worst_move = worst_move.max(s.max_diff(&state));
        }
    }
    let pass = worst_rhs <= 1e-12 && worst_move <= 1e-11;
    report(6, pass, started, &format!("max |rhs| {worst_rhs:.2e}, drift after 100 steps {worst_move:.2e}"));
    assert!(pass);
}

fn normalization_error(m: usize, order: usize, dt: f64) -> f64 {
    let grid = Grid::cubic(2, m, order).unwrap();
    let s = random_state(&grid, &build_gamma(2).unwrap(), 1, 1, 0.05).unwrap();
    let sys = FlowSystem::for_state(FlowConfig { dt, t_end: 0.01, ..FlowConfig::default() }, &s).unwrap();
    sys.run(s, |_, _| Ok(())).unwrap().records.last().unwrap().normalization
}

#[test]
fn criterion_7_normalization_order() {
    let started = Instant::now();
    let runs = [(16usize, 4e-3), (32, 2e-3), (64, 1e-3)];
    let sizes: Vec<usize> = runs.iter().map(|r| r.0).collect();
    let order_of = |stencil: usize| {
        let errs: Vec<f64> = runs.iter().map(|&(m, dt)| normalization_error(m, stencil, dt)).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        let shown: Vec<String> = errs.iter().map(|e| format!("{e:.3e}")).collect();
        (spinflow::verify::observed_order(&sizes, &errs), shown.join(" "))
    };
    let (order2, errs2) = order_of(2);
    report(7, order2 >= 2.0, started, &format!("order-2 stencil: errors {errs2}, observed order {order2:.3}"));
    let (order4, errs4) = order_of(4);
    report(7, order4 >= 2.0, started, &format!("order-4 stencil: errors {errs4}, observed order {order4:.3}"));
    assert!(order4 >= 2.0);
    assert!(order2 >= 1.8, "order-2 stencil observed order {order2:.3}");
}

#[test]
fn criterion_8_perturbed_stationary_regression() {
    let started = Instant::now();
    let state = perturbed_stationary(&Grid::cubic(2, 32, 2).unwrap(), &build_gamma(2).unwrap(), 1, 3, 0.05).unwrap();
    let cfg = FlowConfig { gauge: Gauge::DeTurck, adaptive: true, dt: 1e-3, t_end: 0.05, monitor_cadence: 5, ..flux_config() };
    let sys = FlowSystem::for_state(cfg, &state).unwrap();
    let out = sys.run(state, |_, _| Ok(())).unwrap();
    let (first, last) = (out.records.first().unwrap(), out.records.last().unwrap());
    assert!((last.t - 0.05).abs() < 1e-12);
    let names = ["res_nabla_h", "res_dh", "res_flux", "res_phi"];
    let (a, b) = (first.stationarity(), last.stationarity());
    let mut pass = true;
    let mut lines = Vec::new();
    for i in 0..4 {
        pass &= if a[i] == 0.0 { b[i] == 0.0 } else { b[i] < a[i] };
        lines.push(format!("{} {:.4e} -> {:.4e}", names[i], a[i], b[i]));
    }
    report(8, pass, started, &lines.join(", "));
    assert!(pass, "{lines:?}");
}

#[test]
fn criterion_9_five_dimensional_smoke() {
    let started = Instant::now();
    let state = random_state(&Grid::cubic(5, 6, 2).unwrap(), &build_gamma(5).unwrap(), 2, 0x99, 0.1).unwrap();
    let cfg = FlowConfig { c: 1.0, ..flux_config() };
    let sys = FlowSystem::for_state(cfg.clone(), &state).unwrap();
    let next = sys.step(&state, 1e-3).unwrap().state;
    let moved = next.max_diff(&state);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for name in exact_identities() {
        let r = check_identity(name, &next, &cfg).unwrap();
        worst = worst.max(r.residual);
        if !(r.residual <= EXACT_TOL) {
            failures.push(format!("{name}: {:.2e}", r.residual));
        }
    }
    let pass = failures.is_empty() && moved > 0.0;
    report(9, pass, started, &format!("step moved state by {moved:.2e}; worst exact residual {worst:.2e}"));
    assert!(pass, "{failures:?}");
}
