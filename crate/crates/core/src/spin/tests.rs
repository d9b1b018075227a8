use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::{frame_from_metric, orthonormality_drift};
use crate::grid::Grid;
use crate::linalg::inner;
use crate::scenario::{random_form, random_metric, random_spinor, random_symmetric};

struct Setup {
    basis: GammaBasis,
    metric: Metric,
    frame: RealField,
    conn: SpinConnection,
    psi: ComplexField,
    h: FormField,
}

fn setup(n: usize, k: usize, size: usize, seed: u64) -> Setup {
    let grid = Grid::cubic(n, size, 2).unwrap();
    let basis = crate::clifford::build_gamma(n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let metric = random_metric(&grid, &mut rng, 0.2).unwrap();
    let frame = frame_from_metric(&metric.g).unwrap();
    let conn = spin_connection(&metric, &christoffels(&metric), &frame);
    let psi = random_spinor(&grid, basis.dim_s(), &mut rng, 0.3);
    let h = random_form(&grid, k, &mut rng, 0.3).unwrap();
    Setup { basis, metric, frame, conn, psi, h }
}

fn weighted_pairing(a: &[ComplexField], b: &[ComplexField], sqrtg: &RealField) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        for node in 0..x.node_count() {
            s += inner(x.node(node), y.node(node)) * sqrtg.data[node];
        }
    }
    s
}

fn ops(s: &Setup, lambda: (f64, f64)) -> ConnectionOps {
    let stencil = FluxStencil::new(&s.basis, s.h.degree).unwrap();
    let hframe = frame_components(&s.h, &s.frame);
    ConnectionOps::new(&s.basis, &s.conn, &s.frame, &s.metric.sqrtg, Some(FluxInput { stencil: &stencil, hframe: &hframe, lambda }))
}

#[test]
fn constant_spinor_is_parallel_on_flat_torus() {
    let grid = Grid::cubic(3, 6, 2).unwrap();
    let basis = crate::clifford::build_gamma(3).unwrap();
    let metric = Metric::flat(&grid);
    let frame = metric.g.clone();
    let conn = spin_connection(&metric, &christoffels(&metric), &frame);
    assert_eq!(conn.omega.max_abs(), 0.0);
    let psi = ComplexField::from_fn(&grid, basis.dim_s(), |_, o| o[1] = C64::new(0.6, -0.8));
    for f in nabla_spinor(&basis, &psi, &conn, &frame, &metric.sqrtg) {
        assert_eq!(f.max_abs(), 0.0);
    }
}

#[test]
fn connection_form_is_antisymmetric() {
    let s = setup(3, 1, 6, 1);
    let n = 3;
    for node in 0..s.conn.omega.node_count() {
        let om = s.conn.omega.node(node);
        for p in 0..n {
            for a in 0..n {
                for b in 0..n {
                    assert!((om[(p * n + a) * n + b] + om[(p * n + b) * n + a]).abs() < 1e-15);
                }
            }
        }
    }
}

#[test]
fn adjoint_is_exact_under_weighted_sum() {
    for (n, k) in [(2, 1), (3, 2), (4, 1)] {
        let s = setup(n, k, 6, 2 + n as u64);
        let op = ops(&s, (1.0, 0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let chi: Vec<ComplexField> = (0..n).map(|_| random_spinor(&s.psi.grid, s.basis.dim_s(), &mut rng, 1.0)).collect();
        let lhs = weighted_pairing(&op.apply(&s.psi), &chi, &s.metric.sqrtg);
        let rhs = weighted_pairing(&[s.psi.clone()], &[op.adjoint(&chi)], &s.metric.sqrtg);
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0), "n={n}: {lhs} vs {rhs}");
    }
}

#[test]
fn laplacian_energy_identity_is_exact() {
    let s = setup(3, 1, 6, 9);
    let op = ops(&s, (1.0, 0.0));
    let nabla = op.apply(&s.psi);
    let energy = weighted_pairing(&nabla, &nabla, &s.metric.sqrtg).re;
    let pair = weighted_pairing(&[op.laplacian(&s.psi)], &[s.psi.clone()], &s.metric.sqrtg).re;
    assert!((energy - pair).abs() <= 1e-12 * energy, "{energy} vs {pair}");
}

#[test]
fn connection_is_linear_in_psi() {
    let s = setup(2, 1, 8, 10);
    let op = ops(&s, (1.0, 1.0));
    let a = op.apply(&s.psi);
    let b = op.apply(&s.psi.scaled(2.0));
    for (x, y) in a.iter().zip(&b) {
        assert!(y.sub(&x.scaled(2.0)).max_abs() < 1e-14);
    }
}

#[test]
fn transport_along_metric_direction_rescales_frame() {
    let s = setup(3, 1, 6, 11);
    let e = bg_transport(&s.metric.g, &s.metric.g, &s.frame, 0.5, 32).unwrap();
    assert!(e.sub(&s.frame.scaled(1.5f64.powf(-0.5))).max_abs() < 1e-10);
}

#[test]
fn transport_stays_orthonormal() {
    let s = setup(3, 1, 6, 12);
    let u = random_symmetric(s.metric.grid(), &mut ChaCha8Rng::seed_from_u64(3), 0.3);
    let e = bg_transport(&s.metric.g, &u, &s.frame, 0.4, 32).unwrap();
    let gs = s.metric.g.add(&u.scaled(0.4));
    assert!(orthonormality_drift(&gs, &e) < 1e-8);
}

#[test]
fn transport_rejects_leaving_spd_cone() {
    let s = setup(2, 1, 6, 13);
    let u = s.metric.g.scaled(-1.0);
    assert!(matches!(bg_transport(&s.metric.g, &u, &s.frame, 1.5, 32), Err(Error::Geometry { .. })));
}

#[test]
fn lie_derivative_along_constant_field_on_flat_torus_is_directional() {
    let grid = Grid::cubic(2, 16, 2).unwrap();
    let basis = crate::clifford::build_gamma(2).unwrap();
    let metric = Metric::flat(&grid);
    let frame = metric.g.clone();
    let conn = spin_connection(&metric, &christoffels(&metric), &frame);
    let psi = ComplexField::from_fn(&grid, 2, |x, o| {
        o[0] = C64::new(x[0].sin(), x[1].cos());
        o[1] = C64::new(0.2, 0.0);
    });
    let x = RealField::from_fn(&grid, 2, |_, o| {
        o[0] = 0.7;
        o[1] = -0.4;
    });
    let lie = spinor_lie(&basis, &x, &psi, &conn, &frame, &metric);
    let d = psi.gradient();
    let expect = d[0].scaled(0.7).add(&d[1].scaled(-0.4));
    assert!(lie.sub(&expect).max_abs() < 1e-14);
}

fn fluxconn_error(n: usize, k: usize, size: usize) -> f64 {
    let s = setup(n, k, size, 14);
    let lambda = (1.0, 0.7);
    let u = random_symmetric(s.metric.grid(), &mut ChaCha8Rng::seed_from_u64(15), 0.2);
    let analytic = flux_conn_variation(&s.basis, &s.metric, &s.frame, &u, &s.h, lambda, &s.psi).unwrap();
    let eps = 1e-4;
    let at = |t: f64| {
        let m = Metric::new(s.metric.g.add(&u.scaled(t))).unwrap();
        let e = bg_transport(&s.metric.g, &u, &s.frame, t, 4).unwrap();
        let c = spin_connection(&m, &christoffels(&m), &e);
        nabla_h(&s.basis, &s.psi, &c, &e, &m.sqrtg, &s.h, lambda).unwrap()
    };
    let (p, m) = (at(eps), at(-eps));
    (0..n).map(|q| analytic[q].sub(&p[q].sub(&m[q]).scaled(0.5 / eps)).max_abs()).fold(0.0, f64::max)
}

#[test]
fn flux_connection_variation_converges_at_stencil_order() {
    let (a, b) = (fluxconn_error(2, 1, 32), fluxconn_error(2, 1, 64));
    assert!((a / b - 4.0).abs() < 0.4, "{a} {b}");
    let (a, b) = (fluxconn_error(3, 2, 16), fluxconn_error(3, 2, 32));
    assert!((a / b - 4.0).abs() < 0.6, "{a} {b}");
}

#[test]
fn tensor_to_frame_of_metric_is_identity() {
    let s = setup(3, 1, 6, 16);
    let t = tensor_to_frame(&s.metric.g, &s.frame);
    for node in 0..t.node_count() {
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((t.node(node)[a * 3 + b] - want).abs() < 1e-13);
            }
        }
    }
}
