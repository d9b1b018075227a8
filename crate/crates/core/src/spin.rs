//! Spinor calculus in the global trivialization of the spinor bundle over the torus.
//!
//! Metric dependence enters only through the frame `E` (columns `e_a = E^j_a ∂_j`).
//! A first-order operator `∇_p = E^j_p ∂_j + M_p` is stored as its zeroth-order part
//! `M_p` per node; its adjoint under the `√g`-weighted sum is assembled by
//! transposing the stencil, never from a continuum formula.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::clifford::{FluxStencil, GammaBasis};
use crate::exterior::{expand_antisymmetric, frame_components, FormField};
use crate::geometry::{christoffels, Metric};
use crate::grid::{ComplexField, RealField};
use crate::linalg::{inverse, is_spd, matmul, CMat};
use crate::multi_index::IndexSet;
use crate::{Error, Result};

/// `ω_{pab} = ⟨∇_{e_p} e_a, e_b⟩_g` stored at `(p*n + a)*n + b`.
#[derive(Clone, Debug)]
pub struct SpinConnection {
    pub omega: RealField,
}

pub fn spin_connection(metric: &Metric, gamma: &RealField, frame: &RealField) -> SpinConnection {
    let n = metric.dim();
    let de = frame.gradient();
    let omega = RealField::from_nodes(metric.grid(), n * n * n, |node, out| {
        let e = frame.node(node);
        let g = metric.g.node(node);
        let gm = gamma.node(node);
        let mut raw = vec![0.0; n * n * n];
        for p in 0..n {
            for a in 0..n {
                // (∇_{e_p} e_a)^k
                let mut v = vec![0.0; n];
                for k in 0..n {
                    let mut s = 0.0;
                    for j in 0..n {
                        let ejp = e[j * n + p];
                        let mut t = de[j].node(node)[k * n + a];
                        for m in 0..n {
                            t += gm[(k * n + j) * n + m] * e[m * n + a];
                        }
                        s += ejp * t;
                    }
                    v[k] = s;
                }
                for b in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        for l in 0..n {
                            s += g[k * n + l] * v[k] * e[l * n + b];
                        }
                    }
                    raw[(p * n + a) * n + b] = s;
                }
            }
        }
        for p in 0..n {
            for a in 0..n {
                for b in 0..n {
                    out[(p * n + a) * n + b] = 0.5 * (raw[(p * n + a) * n + b] - raw[(p * n + b) * n + a]);
                }
            }
        }
    });
    SpinConnection { omega }
}

/// Family of first-order operators `∇_p = E^j_p ∂_j + M_p`, one per frame direction.
#[derive(Clone, Debug)]
pub struct ConnectionOps {
    n: usize,
    dim_s: usize,
    frame: RealField,
    sqrtg: RealField,
    /// `M_p` at node `x`: block `(x*n + p)*d*d`.
    zeroth: Vec<C64>,
}

/// Flux data needed to add `(λ|H)_p` to the spin connection.
pub struct FluxInput<'a> {
    pub stencil: &'a FluxStencil,
    pub hframe: &'a RealField,
    pub lambda: (f64, f64),
}

impl ConnectionOps {
    /// `∇_p = E^j_p∂_j − ¼ω_{pab}γ^{ab}`.
    pub fn levi_civita(basis: &GammaBasis, conn: &SpinConnection, frame: &RealField, sqrtg: &RealField) -> Self {
        Self::new(basis, conn, frame, sqrtg, None)
    }

    /// `∇^H_p = ∇_p + (λ|H)_p` when `flux` is given.
    pub fn new(
        basis: &GammaBasis,
        conn: &SpinConnection,
        frame: &RealField,
        sqrtg: &RealField,
        flux: Option<FluxInput<'_>>,
    ) -> Self {
        let n = basis.n();
        let d = basis.dim_s();
        let nodes = frame.node_count();
        let pairs: Vec<(usize, usize, &CMat)> =
            (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).map(|(a, b)| (a, b, basis.cached(&[a, b]))).collect();
        let mut zeroth = vec![C64::new(0.0, 0.0); nodes * n * d * d];
        zeroth.par_chunks_mut(n * d * d).enumerate().for_each(|(node, block)| {
            let om = conn.omega.node(node);
            for p in 0..n {
                let mut m = CMat::zeros(d);
                for &(a, b, g) in &pairs {
                    // −¼(ω_{pab}γ^{ab} + ω_{pba}γ^{ba}) = −½ω_{pab}γ^aγ^b
                    let w = om[(p * n + a) * n + b];
                    if w != 0.0 {
                        m.add_scaled(C64::new(-0.5 * w, 0.0), g);
                    }
                }
                if let Some(f) = &flux {
                    m.add_scaled(C64::new(1.0, 0.0), &f.stencil.direction(p, f.hframe.node(node), f.lambda));
                }
                block[p * d * d..(p + 1) * d * d].copy_from_slice(&m.data);
            }
        });
        Self { n, dim_s: d, frame: frame.clone(), sqrtg: sqrtg.clone(), zeroth }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn block(&self, node: usize, p: usize) -> &[C64] {
        let dd = self.dim_s * self.dim_s;
        &self.zeroth[(node * self.n + p) * dd..(node * self.n + p + 1) * dd]
    }

    /// The zeroth-order part `M_p` at a node.
    pub fn zeroth_order(&self, node: usize, p: usize) -> CMat {
        CMat { dim: self.dim_s, data: self.block(node, p).to_vec() }
    }

    /// `(∇_pψ)_{p=0..n}`.
    pub fn apply(&self, psi: &ComplexField) -> Vec<ComplexField> {
        let n = self.n;
        let d = self.dim_s;
        let dpsi = psi.gradient();
        (0..n)
            .map(|p| {
                ComplexField::from_nodes(&psi.grid, d, |node, out| {
                    let e = self.frame.node(node);
                    for j in 0..n {
                        let w = e[j * n + p];
                        if w != 0.0 {
                            for (o, &v) in out.iter_mut().zip(dpsi[j].node(node)) {
                                *o += v * w;
                            }
                        }
                    }
                    let m = self.block(node, p);
                    let s = psi.node(node);
                    for r in 0..d {
                        for c in 0..d {
                            out[r] += m[r * d + c] * s[c];
                        }
                    }
                })
            })
            .collect()
    }

    /// `Σ_p ∇_p† χ_p` with `∇_p†χ = −(1/√g)∂_j(√g E^j_p χ) + M_p†χ`.
    pub fn adjoint(&self, chi: &[ComplexField]) -> ComplexField {
        let n = self.n;
        let d = self.dim_s;
        let grid = &chi[0].grid;
        let flux: Vec<ComplexField> = (0..n)
            .map(|j| {
                ComplexField::from_nodes(grid, d, |node, out| {
                    let e = self.frame.node(node);
                    let s = self.sqrtg.data[node];
                    for p in 0..n {
                        let w = s * e[j * n + p];
                        if w != 0.0 {
                            for (o, &v) in out.iter_mut().zip(chi[p].node(node)) {
                                *o += v * w;
                            }
                        }
                    }
                })
            })
            .collect();
        let div: Vec<ComplexField> = flux.iter().enumerate().map(|(j, f)| f.partial_unchecked(j)).collect();
        ComplexField::from_nodes(grid, d, |node, out| {
            let s = self.sqrtg.data[node];
            for dj in &div {
                for (o, &v) in out.iter_mut().zip(dj.node(node)) {
                    *o -= v * (1.0 / s);
                }
            }
            for p in 0..n {
                let m = self.block(node, p);
                let c = chi[p].node(node);
                for r in 0..d {
                    for k in 0..d {
                        out[r] += m[k * d + r].conj() * c[k];
                    }
                }
            }
        })
    }

    /// `(∇)†∇ψ`, the exact adjoint composition.
    pub fn laplacian(&self, psi: &ComplexField) -> ComplexField {
        self.adjoint(&self.apply(psi))
    }
}

/// `D̸ψ = Σ_a γ^a ∇_aψ` from precomputed covariant derivatives.
pub fn dirac(basis: &GammaBasis, nabla: &[ComplexField]) -> ComplexField {
    let d = basis.dim_s();
    ComplexField::from_nodes(&nabla[0].grid, d, |node, out| {
        for (a, f) in nabla.iter().enumerate() {
            basis.gamma(a).apply_acc(C64::new(1.0, 0.0), f.node(node), out);
        }
    })
}

/// Everything needed to differentiate spinors for one `(g, E, H)`.
pub struct SpinGeometry {
    pub metric: Metric,
    pub gamma: RealField,
    pub conn: SpinConnection,
    pub lc: ConnectionOps,
}

impl SpinGeometry {
    pub fn new(basis: &GammaBasis, metric: Metric, frame: &RealField) -> Self {
        let gamma = christoffels(&metric);
        let conn = spin_connection(&metric, &gamma, frame);
        let lc = ConnectionOps::levi_civita(basis, &conn, frame, &metric.sqrtg);
        Self { metric, gamma, conn, lc }
    }
}

pub fn nabla_spinor(basis: &GammaBasis, psi: &ComplexField, conn: &SpinConnection, frame: &RealField, sqrtg: &RealField) -> Vec<ComplexField> {
    ConnectionOps::levi_civita(basis, conn, frame, sqrtg).apply(psi)
}

/// `∇^H_pψ` for a coordinate flux form `h`.
pub fn nabla_h(
    basis: &GammaBasis,
    psi: &ComplexField,
    conn: &SpinConnection,
    frame: &RealField,
    sqrtg: &RealField,
    h: &FormField,
    lambda: (f64, f64),
) -> Result<Vec<ComplexField>> {
    let stencil = FluxStencil::new(basis, h.degree)?;
    let hframe = frame_components(h, frame);
    let flux = FluxInput { stencil: &stencil, hframe: &hframe, lambda };
    Ok(ConnectionOps::new(basis, conn, frame, sqrtg, Some(flux)).apply(psi))
}

/// `(∇^H)†∇^Hψ`.
pub fn flux_laplacian(
    basis: &GammaBasis,
    psi: &ComplexField,
    conn: &SpinConnection,
    frame: &RealField,
    h: &FormField,
    lambda: (f64, f64),
    metric: &Metric,
) -> Result<ComplexField> {
    let stencil = FluxStencil::new(basis, h.degree)?;
    let hframe = frame_components(h, frame);
    let flux = FluxInput { stencil: &stencil, hframe: &hframe, lambda };
    Ok(ConnectionOps::new(basis, conn, frame, &metric.sqrtg, Some(flux)).laplacian(psi))
}

/// Integrates `dE/ds = −½(g + su)^{-1} u E` with classical RK4 from `E(0) = frame`.
pub fn bg_transport(g: &RealField, u: &RealField, frame: &RealField, s_end: f64, steps: usize) -> Result<RealField> {
    let n = g.grid.dim();
    let steps = steps.max(1);
    let hs = s_end / steps as f64;
    let mut out = frame.clone();
    let results: Vec<Result<()>> = out
        .data
        .par_chunks_mut(n * n)
        .enumerate()
        .map(|(node, e)| {
            let gv = g.node(node);
            let uv = u.node(node);
            let rhs = |s: f64, e: &[f64]| -> Result<Vec<f64>> {
                let gs: Vec<f64> = gv.iter().zip(uv).map(|(a, b)| a + s * b).collect();
                if !is_spd(&gs, n, crate::geometry::SPD_TOL) {
                    return Err(Error::Geometry { node, msg: format!("g + s·u leaves the SPD cone at s = {s}") });
                }
                let gi = inverse(&gs, n).expect("SPD");
                let mut r = matmul(&matmul(&gi, uv, n), e, n);
                r.iter_mut().for_each(|x| *x *= -0.5);
                Ok(r)
            };
            for step in 0..steps {
                let s = step as f64 * hs;
                let k1 = rhs(s, e)?;
                let e2: Vec<f64> = e.iter().zip(&k1).map(|(x, k)| x + 0.5 * hs * k).collect();
                let k2 = rhs(s + 0.5 * hs, &e2)?;
                let e3: Vec<f64> = e.iter().zip(&k2).map(|(x, k)| x + 0.5 * hs * k).collect();
                let k3 = rhs(s + 0.5 * hs, &e3)?;
                let e4: Vec<f64> = e.iter().zip(&k3).map(|(x, k)| x + hs * k).collect();
                let k4 = rhs(s + hs, &e4)?;
                for i in 0..n * n {
                    e[i] += hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }
    Ok(out)
}

/// Frame components `X^p = θ^p_j X^j` of a coordinate vector field, using `θ = Eᵀg`.
pub fn vector_to_frame(x: &RealField, frame: &RealField, g: &RealField) -> RealField {
    let n = g.grid.dim();
    RealField::from_nodes(&g.grid, n, |node, out| {
        let e = frame.node(node);
        let gv = g.node(node);
        let xv = x.node(node);
        for p in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                for j in 0..n {
                    s += e[k * n + p] * gv[k * n + j] * xv[j];
                }
            }
            out[p] = s;
        }
    })
}

/// Frame covariant derivative `(∇_r X)^p = e_r(X^p) + ω_{rqp}X^q` at `r*n + p`.
pub fn nabla_vector_frame(xf: &RealField, conn: &SpinConnection, frame: &RealField) -> RealField {
    let n = frame.grid.dim();
    let dx = xf.gradient();
    RealField::from_nodes(&frame.grid, n * n, |node, out| {
        let e = frame.node(node);
        let om = conn.omega.node(node);
        let xv = xf.node(node);
        for r in 0..n {
            for p in 0..n {
                let mut v = 0.0;
                for j in 0..n {
                    v += e[j * n + r] * dx[j].node(node)[p];
                }
                for q in 0..n {
                    v += om[(r * n + q) * n + p] * xv[q];
                }
                out[r * n + p] = v;
            }
        }
    })
}

/// Spinorial Lie derivative `𝓛_Xψ = X^m∇_mψ + ¼·½(∇_rX^p − ∇_pX^r)γ^{rp}ψ`.
pub fn spinor_lie(
    basis: &GammaBasis,
    x: &RealField,
    psi: &ComplexField,
    conn: &SpinConnection,
    frame: &RealField,
    metric: &Metric,
) -> ComplexField {
    let nabla = nabla_spinor(basis, psi, conn, frame, &metric.sqrtg);
    let xf = vector_to_frame(x, frame, &metric.g);
    let dx = nabla_vector_frame(&xf, conn, frame);
    spinor_lie_from_parts(basis, &xf, &dx, psi, &nabla)
}

pub(crate) fn spinor_lie_from_parts(
    basis: &GammaBasis,
    xf: &RealField,
    dx: &RealField,
    psi: &ComplexField,
    nabla: &[ComplexField],
) -> ComplexField {
    let n = basis.n();
    let d = basis.dim_s();
    ComplexField::from_nodes(&psi.grid, d, |node, out| {
        let xv = xf.node(node);
        for (m, f) in nabla.iter().enumerate() {
            for (o, &v) in out.iter_mut().zip(f.node(node)) {
                *o += v * xv[m];
            }
        }
        let dv = dx.node(node);
        for r in 0..n {
            for p in r + 1..n {
                // pairs (r,p) and (p,r) together: ¼ (∇_rX^p − ∇_pX^r) γ^rγ^p
                let w = 0.25 * (dv[r * n + p] - dv[p * n + r]);
                if w != 0.0 {
                    basis.cached(&[r, p]).apply_acc(C64::new(w, 0.0), psi.node(node), out);
                }
            }
        }
    })
}

/// Frame components `u_{ab} = E^i_a E^j_b u_{ij}` of a symmetric coordinate 2-tensor.
pub fn tensor_to_frame(u: &RealField, frame: &RealField) -> RealField {
    let n = frame.grid.dim();
    RealField::from_nodes(&frame.grid, n * n, |node, out| {
        let e = frame.node(node);
        let uv = u.node(node);
        let t = matmul(uv, e, n);
        for a in 0..n {
            for b in 0..n {
                out[a * n + b] = (0..n).map(|i| e[i * n + a] * t[i * n + b]).sum();
            }
        }
    })
}

/// Analytic first variation of `∇^H_pψ` along `g + su` with BG-transported frames:
/// `−½u_{pj}∇^H_jψ − ¼∇_au_{pb}γ^{ab}ψ + ½λ2 u_{pj}H_{a…}γ^{ja…}ψ
///  − ½λ1 Σ_i u_{a_im}H_{pa_1…m…}γ^{a_1…}ψ − ½λ2 Σ_i u_{a_im}H_{a_1…m…}γ^{pa_1…}ψ`.
pub fn flux_conn_variation(
    basis: &GammaBasis,
    metric: &Metric,
    frame: &RealField,
    u: &RealField,
    h: &FormField,
    lambda: (f64, f64),
    psi: &ComplexField,
) -> Result<Vec<ComplexField>> {
    let n = basis.n();
    let d = basis.dim_s();
    let k = h.degree;
    let geo = SpinGeometry::new(basis, metric.clone(), frame);
    let stencil = FluxStencil::new(basis, k)?;
    let hframe = frame_components(h, frame);
    let flux = FluxInput { stencil: &stencil, hframe: &hframe, lambda };
    let nabla_h = ConnectionOps::new(basis, &geo.conn, frame, &metric.sqrtg, Some(flux)).apply(psi);
    let uf = tensor_to_frame(u, frame);
    let du = uf.gradient();
    let set = IndexSet::new(n, k);
    // (u·H)_A = Σ_i Σ_m u_{a_i m} H_{a_1…m…a_k}
    let uh = RealField::from_nodes(metric.grid(), set.len(), |node, out| {
        let full = expand_antisymmetric(hframe.node(node), n, k);
        let uv = uf.node(node);
        for (apos, a) in set.iter().enumerate() {
            let mut s = 0.0;
            for i in 0..k {
                for m in 0..n {
                    let flat = a.iter().enumerate().fold(0usize, |acc, (j, &x)| acc * n + if j == i { m } else { x });
                    s += uv[a[i] * n + m] * full[flat];
                }
            }
            out[apos] = s;
        }
    });
    let one = C64::new(1.0, 0.0);
    Ok((0..n)
        .map(|p| {
            ComplexField::from_nodes(metric.grid(), d, |node, out| {
                let uv = uf.node(node);
                let e = frame.node(node);
                let om = geo.conn.omega.node(node);
                let s = psi.node(node);
                for j in 0..n {
                    for (o, &v) in out.iter_mut().zip(nabla_h[j].node(node)) {
                        *o -= v * (0.5 * uv[p * n + j]);
                    }
                }
                // −¼ ∇_a u_{pb} γ^{ab}ψ, frame covariant derivative of u
                for a in 0..n {
                    for b in 0..n {
                        if a == b {
                            continue;
                        }
                        let mut cd: f64 = (0..n).map(|j| e[j * n + a] * du[j].node(node)[p * n + b]).sum();
                        for q in 0..n {
                            cd -= om[(a * n + p) * n + q] * uv[q * n + b] + om[(a * n + b) * n + q] * uv[p * n + q];
                        }
                        if a < b {
                            basis.cached(&[a, b]).apply_acc(C64::new(-0.25 * cd, 0.0), s, out);
                        } else {
                            basis.cached(&[b, a]).apply_acc(C64::new(0.25 * cd, 0.0), s, out);
                        }
                    }
                }
                let hv = hframe.node(node);
                let mut m = CMat::zeros(d);
                for j in 0..n {
                    let w = uv[p * n + j];
                    if w != 0.0 {
                        m.add_scaled(C64::new(0.5 * w, 0.0), &stencil.direction(j, hv, (0.0, lambda.1)));
                        m.add_scaled(C64::new(0.5 * w, 0.0), &stencil.direction(j, hv, (lambda.0, 0.0)));
                    }
                }
                m.add_scaled(C64::new(-0.5, 0.0), &stencil.direction(p, uh.node(node), lambda));
                m.apply_acc(one, s, out);
            })
        })
        .collect())
}

#[cfg(test)]
mod tests;
