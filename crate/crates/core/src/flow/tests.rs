use super::*;
use crate::clifford::build_gamma;
use crate::geometry::{christoffels, hw_vector, lie_metric, orthonormality_drift, Metric};
use crate::grid::Grid;
use crate::scenario::{flat_stationary, random_state};
use crate::{Error, C64};

fn state(size: usize, amp: f64) -> FlowState {
    let grid = Grid::cubic(2, size, 2).unwrap();
    random_state(&grid, &build_gamma(2).unwrap(), 1, 7, amp).unwrap()
}

fn config(gauge: Gauge, variant: Variant) -> FlowConfig {
    FlowConfig { gauge, variant, lambda2: 0.5, ..FlowConfig::default() }
}

const GAUGES: [Gauge; 3] = [Gauge::None, Gauge::DeTurck, Gauge::Hw];
const VARIANTS: [Variant; 2] = [Variant::DynamicPhi, Variant::FixedPhi];

#[test]
fn flat_stationary_data_has_zero_rhs() {
    for (n, k) in [(2, 1), (3, 1), (3, 2)] {
        let grid = Grid::cubic(n, 6, 2).unwrap();
        let s = flat_stationary(&grid, &build_gamma(n).unwrap(), k).unwrap();
        for gauge in GAUGES {
            for variant in VARIANTS {
                let sys = FlowSystem::for_state(config(gauge, variant), &s).unwrap();
                assert_eq!(sys.rhs(&s).unwrap().max_abs(), 0.0, "n={n} k={k} {gauge:?} {variant:?}");
            }
        }
    }
}

#[test]
fn dimension_rule_is_enforced() {
    let cfg = FlowConfig { c: 1.0, ..FlowConfig::default() };
    match FlowSystem::new(cfg.clone(), 3, 1) {
        Err(Error::Config(msg)) => assert!(msg.contains("3k = n + 1"), "{msg}"),
        _ => panic!("expected config error"),
    }
    assert!(FlowSystem::new(cfg.clone(), 5, 2).is_ok());
    assert!(FlowSystem::new(cfg, 2, 1).is_ok());
}

#[test]
fn stationary_classification_follows_trace_prefactor() {
    let cfg = FlowConfig::default();
    assert!(!cfg.classifies_stationary_points(2));
    assert!(cfg.classifies_stationary_points(3));
    assert!(FlowConfig { c2: 0.5, ..cfg }.classifies_stationary_points(2));
}

#[test]
fn hw_gauge_is_ungauged_flow_plus_eighth_lie_derivative() {
    let errs: Vec<f64> = [32, 64]
        .iter()
        .map(|&m| {
            let s = state(m, 0.1);
            let hw = FlowSystem::for_state(config(Gauge::Hw, Variant::DynamicPhi), &s).unwrap();
            let none = FlowSystem::for_state(config(Gauge::None, Variant::DynamicPhi), &s).unwrap();
            let metric = Metric::new(s.g.clone()).unwrap();
            let x = hw_vector(none.basis(), &s.psi, &s.phi, &metric, &s.frame);
            let want = none.rhs(&s).unwrap().g.add(&lie_metric(&x, &metric, &christoffels(&metric)).scaled(0.125));
            hw.rhs(&s).unwrap().g.sub(&want).max_abs()
        })
        .collect();
    assert!((errs[0] / errs[1] - 4.0).abs() < 0.4, "{errs:?}");
}

#[test]
fn frame_velocity_is_transport_of_metric_velocity() {
    let s = state(8, 0.2);
    let sys = FlowSystem::for_state(config(Gauge::DeTurck, Variant::DynamicPhi), &s).unwrap();
    let t = sys.rhs(&s).unwrap();
    // d/dt(EᵀgE) = 0 to first order when Ė = −½g⁻¹ġE.
    let eps = 1e-6;
    let moved = s.advanced(eps, &t);
    assert!(orthonormality_drift(&moved.g, &moved.frame) < 1e-10);
}

#[test]
fn rk4_converges_at_fourth_order_in_dt() {
    let s = state(16, 0.4);
    let run = |dt: f64| {
        let sys = FlowSystem::for_state(FlowConfig { dt, t_end: 0.4, ..config(Gauge::None, Variant::DynamicPhi) }, &s).unwrap();
        sys.run(s.clone(), |_, _| Ok(())).unwrap().state
    };
    let reference = run(1.25e-3);
    let errs: Vec<f64> = [2e-2, 1e-2, 5e-3]
        .iter()
        .map(|&dt| {
            let o = run(dt);
            o.g.sub(&reference.g).max_abs().max(o.psi.sub(&reference.psi).max_abs())
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 4.0).abs() < 0.3, "{errs:?}");
    }
}

#[test]
fn run_records_at_cadence_and_end() {
    let s = state(8, 0.1);
    let cfg = FlowConfig { dt: 1e-3, t_end: 0.01, monitor_cadence: 4, ..FlowConfig::default() };
    let sys = FlowSystem::for_state(cfg, &s).unwrap();
    let mut seen = 0;
    let out = sys
        .run(s, |_, _| {
            seen += 1;
            Ok(())
        })
        .unwrap();
    assert_eq!(out.steps, 10);
    assert_eq!(seen, 10);
    let ts: Vec<f64> = out.records.iter().map(|r| r.t).collect();
    assert_eq!(ts.len(), 4);
    assert!((ts[3] - 0.01).abs() < 1e-15 && ts[0] == 0.0);
}

#[test]
fn project_phi_keeps_normalization_exact() {
    let s = state(16, 0.2);
    let cfg = FlowConfig { dt: 2e-3, t_end: 0.02, renormalize: Renormalize::ProjectPhi, ..FlowConfig::default() };
    let out = FlowSystem::for_state(cfg, &s).unwrap().run(s, |_, _| Ok(())).unwrap();
    assert!(out.state.normalization_residual() < 1e-14);
}

#[test]
fn adaptive_stepping_respects_stable_limit() {
    let s = state(16, 0.2);
    let limit = stable_dt(&s, 0.5);
    assert!(limit > 0.0 && limit < 0.1);
    let cfg = FlowConfig { dt: 1.0, adaptive: true, t_end: 0.1, ..FlowConfig::default() };
    let sys = FlowSystem::for_state(cfg, &s).unwrap();
    let out = sys.step(&s, 1.0).unwrap();
    assert!(out.dt_used <= limit);
    let finer = Grid::cubic(2, 32, 2).unwrap();
    let s2 = random_state(&finer, &build_gamma(2).unwrap(), 1, 7, 0.2).unwrap();
    let ratio = limit / stable_dt(&s2, 0.5);
    assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
}

#[test]
fn non_finite_state_is_reported_as_divergence() {
    let mut s = state(8, 0.1);
    s.psi.data[5] = C64::new(f64::NAN, 0.0);
    let sys = FlowSystem::for_state(FlowConfig::default(), &s).unwrap();
    let r = sys.rhs(&s);
    assert!(matches!(r, Err(Error::Divergence { .. })), "{:?}", r.err());
}

#[test]
fn oversized_fixed_step_fails() {
    let s = state(32, 0.05);
    let cfg = FlowConfig { dt: 0.5, t_end: 5.0, ..FlowConfig::default() };
    let sys = FlowSystem::for_state(cfg, &s).unwrap();
    assert!(matches!(sys.run(s, |_, _| Ok(())), Err(Error::Divergence { .. } | Error::Geometry { .. })));
}

#[test]
fn fixed_variant_freezes_phi() {
    let s = state(8, 0.2);
    let sys = FlowSystem::for_state(config(Gauge::DeTurck, Variant::FixedPhi), &s).unwrap();
    assert_eq!(sys.rhs(&s).unwrap().phi.max_abs(), 0.0);
}

#[test]
fn tangent_combination_is_linear() {
    let s = state(8, 0.2);
    let sys = FlowSystem::for_state(FlowConfig::default(), &s).unwrap();
    let t = sys.rhs(&s).unwrap();
    let c = Tangent::combine(&[(0.25, &t), (0.75, &t)]);
    assert!(s.advanced(0.1, &c).max_diff(&s.advanced(0.1, &t)) < 1e-15);
}

#[test]
fn state_constructor_checks_shapes() {
    let s = state(8, 0.1);
    let grid = Grid::cubic(2, 6, 2).unwrap();
    let bad_phi = crate::grid::RealField::constant(&grid, 0.0);
    assert!(FlowState::new(s.g.clone(), s.frame.clone(), s.psi.clone(), s.h.clone(), bad_phi).is_err());
}
