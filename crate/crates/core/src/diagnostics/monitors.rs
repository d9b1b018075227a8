use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::DiagnosticsRecord;
use crate::clifford::GammaBasis;
use crate::flow::Kinematics;
use crate::geometry::{christoffels, cov_deriv, curvature, riemann_lowered, Curvature, Metric};
use crate::grid::{ComplexField, RealField};
use crate::spin::{dirac, spin_connection, tensor_to_frame, ConnectionOps, SpinConnection};

/// Norm of a covariant coordinate tensor of rank `rank` at one node, computed from its
/// components in the orthonormal frame `E`.
pub fn tensor_frame_norm(tv: &[f64], e: &[f64], n: usize, rank: usize) -> f64 {
    let mut cur = tv.to_vec();
    let len = cur.len();
    for slot in 0..rank {
        let stride = n.pow((rank - 1 - slot) as u32);
        let mut next = vec![0.0; len];
        for (flat, o) in next.iter_mut().enumerate() {
            let a = (flat / stride) % n;
            let base = flat - a * stride;
            *o = (0..n).map(|i| e[i * n + a] * cur[base + i * stride]).sum();
        }
        cur = next;
    }
    cur.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `(sup|Rm|, sup|∇Rm|, sup|∇²Rm|)`. The second derivative is formed node by node from the
/// stencil applied to `∇Rm`, so the rank-6 field is never stored.
pub fn shi_norms(metric: &Metric, gamma: &RealField, curv: &Curvature, frame: &RealField) -> (f64, f64, f64) {
    let n = metric.dim();
    let grid = metric.grid();
    let rm = riemann_lowered(metric, curv);
    let drm = cov_deriv(&rm, 4, gamma);
    let len = n.pow(5);
    let stencils: Vec<Vec<(isize, f64)>> = (0..n).map(|i| grid.stencil(i)).collect();
    let per_node: Vec<(f64, f64, f64)> = (0..grid.node_count())
        .into_par_iter()
        .map(|node| {
            let e = frame.node(node);
            let gm = gamma.node(node);
            let tv = drm.node(node);
            let mut dd = vec![0.0; n * len];
            for i in 0..n {
                let block = &mut dd[i * len..(i + 1) * len];
                for &(off, w) in &stencils[i] {
                    let src = drm.node(grid.shift(node, i, off));
                    for (b, s) in block.iter_mut().zip(src) {
                        *b += w * s;
                    }
                }
                for flat in 0..len {
                    let mut v = 0.0;
                    for slot in 0..5 {
                        let stride = n.pow((4 - slot) as u32);
                        let idx = (flat / stride) % n;
                        let base = flat - idx * stride;
                        for q in 0..n {
                            v += gm[(q * n + i) * n + idx] * tv[base + q * stride];
                        }
                    }
                    block[flat] -= v;
                }
            }
            (
                tensor_frame_norm(rm.node(node), e, n, 4),
                tensor_frame_norm(tv, e, n, 5),
                tensor_frame_norm(&dd, e, n, 6),
            )
        })
        .collect();
    per_node.into_iter().fold((0.0, 0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2)))
}

/// Frame components `(∇²ψ)_{ap} = ∇_a(∇_pψ) − ω_{apb}∇_bψ` at `a*n+p`.
fn hessian_spinor(lc: &ConnectionOps, conn: &SpinConnection, nabla: &[ComplexField]) -> Vec<ComplexField> {
    let n = nabla.len();
    let d = nabla[0].ncomp;
    let second: Vec<Vec<ComplexField>> = nabla.iter().map(|f| lc.apply(f)).collect();
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for p in 0..n {
            out.push(ComplexField::from_nodes(&nabla[0].grid, d, |node, o| {
                let om = conn.omega.node(node);
                o.copy_from_slice(second[p][a].node(node));
                for b in 0..n {
                    let w = om[(a * n + p) * n + b];
                    for (x, &v) in o.iter_mut().zip(nabla[b].node(node)) {
                        *x -= v * w;
                    }
                }
            }));
        }
    }
    out
}

/// Per-node `|∇²ψ|` for the Levi-Civita connection.
pub fn second_derivative_spinor(kin: &Kinematics) -> Vec<f64> {
    let h = hessian_spinor(&kin.lc, &kin.conn, &kin.nabla);
    (0..kin.nabla[0].node_count())
        .map(|node| h.iter().map(|f| f.node(node).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>().sqrt())
        .collect()
}

/// `sup_p sup_x |D̸∇_pψ − ∇_pD̸ψ − ½R_{pk}γ^kψ|`.
pub fn bochner_residual(basis: &GammaBasis, metric: &Metric, frame: &RealField, psi: &ComplexField) -> f64 {
    let n = basis.n();
    let gamma = christoffels(metric);
    let conn = spin_connection(metric, &gamma, frame);
    let lc = ConnectionOps::levi_civita(basis, &conn, frame, &metric.sqrtg);
    let nabla = lc.apply(psi);
    let hess = hessian_spinor(&lc, &conn, &nabla);
    let nd = lc.apply(&dirac(basis, &nabla));
    let ric = tensor_to_frame(&curvature(metric, &gamma).ricci, frame);
    let mut worst = 0.0f64;
    for p in 0..n {
        for node in 0..psi.node_count() {
            let mut r = vec![C64::new(0.0, 0.0); psi.ncomp];
            for a in 0..n {
                basis.gamma(a).apply_acc(C64::new(1.0, 0.0), hess[a * n + p].node(node), &mut r);
            }
            for (x, &v) in r.iter_mut().zip(nd[p].node(node)) {
                *x -= v;
            }
            for k in 0..n {
                let w = 0.5 * ric.node(node)[p * n + k];
                basis.gamma(k).apply_acc(C64::new(-w, 0.0), psi.node(node), &mut r);
            }
            worst = worst.max(r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        }
    }
    worst
}

#[derive(Clone, Debug)]
pub struct PhiBoundReport {
    /// Running constant `A`: the largest recorded hypothesis quantity.
    pub a: f64,
    /// `bound(tᵢ) − sup e^{2φ(tᵢ)}` per record.
    pub margins: Vec<f64>,
    /// Records where the comparison curve is exceeded beyond integrator tolerance.
    pub violations: Vec<usize>,
}

impl PhiBoundReport {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Compares `sup e^{2φ(t)}` with `−½ + (sup e^{2φ(0)} + ½)e^{4At}`.
pub fn phi_bound_monitor(history: &[DiagnosticsRecord]) -> PhiBoundReport {
    let Some(first) = history.first() else {
        return PhiBoundReport { a: 0.0, margins: Vec::new(), violations: Vec::new() };
    };
    let a = history.iter().map(|r| r.phi_bound_a).fold(0.0, f64::max);
    let e0 = (2.0 * first.phi_max).exp();
    let mut margins = Vec::with_capacity(history.len());
    let mut violations = Vec::new();
    for (i, r) in history.iter().enumerate() {
        let bound = -0.5 + (e0 + 0.5) * (4.0 * a * (r.t - first.t)).exp();
        let margin = bound - (2.0 * r.phi_max).exp();
        if margin < -1e-8 * (1.0 + bound.abs()) {
            violations.push(i);
        }
        margins.push(margin);
    }
    PhiBoundReport { a, margins, violations }
}
