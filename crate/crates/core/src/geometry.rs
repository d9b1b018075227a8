//! Riemannian machinery for grid metrics: frames, Christoffel symbols, curvature,
//! Hessians, Lie derivatives, gauge vector fields and curvature variations.
//!
//! Curvature convention: `R_{ij}{}^k{}_ℓ ∂_k = (∇_i∇_j − ∇_j∇_i)∂_ℓ`, with Ricci the trace
//! `R_{jℓ} = R_{ij}{}^i{}_ℓ`, which is positive on round spheres. Tensors are stored with
//! coordinate indices flattened row-major in the order they are written.

use num_complex::Complex64 as C64;

use crate::clifford::GammaBasis;
use crate::exterior::{d, interior, FormField};
use crate::grid::{ComplexField, Grid, RealField};
use crate::linalg::{det, inner, inverse, is_spd, matmul, sym_fn, transpose};
use crate::spin::{dirac, ConnectionOps};
use crate::{Error, Result};

pub const SPD_TOL: f64 = 1e-10;

/// Metric together with its pointwise inverse and volume density `√det g`.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub g: RealField,
    pub ginv: RealField,
    pub sqrtg: RealField,
}

impl Metric {
    pub fn new(g: RealField) -> Result<Self> {
        let n = g.grid.dim();
        if g.ncomp != n * n {
            return Err(Error::Shape(format!("metric needs {} components per node, got {}", n * n, g.ncomp)));
        }
        for node in 0..g.node_count() {
            let m = g.node(node);
            let asym = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).fold(0.0f64, |s, (i, j)| s.max((m[i * n + j] - m[j * n + i]).abs()));
            let scale = m.iter().fold(1.0f64, |s, x| s.max(x.abs()));
            if asym > 1e-12 * scale || !is_spd(m, n, SPD_TOL) {
                return Err(Error::Geometry { node, msg: "metric not symmetric positive definite".into() });
            }
        }
        let ginv = RealField::from_nodes(&g.grid, n * n, |node, out| {
            out.copy_from_slice(&inverse(g.node(node), n).expect("SPD matrix is invertible"));
        });
        let sqrtg = RealField::from_nodes(&g.grid, 1, |node, out| out[0] = det(g.node(node), n).sqrt());
        Ok(Self { g, ginv, sqrtg })
    }

    pub fn flat(grid: &Grid) -> Self {
        let n = grid.dim();
        let id = RealField::from_fn(grid, n * n, |_, o| (0..n).for_each(|i| o[i * n + i] = 1.0));
        Self { g: id.clone(), ginv: id, sqrtg: RealField::constant(grid, 1.0) }
    }

    pub fn grid(&self) -> &Grid {
        &self.g.grid
    }

    pub fn dim(&self) -> usize {
        self.g.grid.dim()
    }

    pub fn volume(&self) -> f64 {
        self.sqrtg.data.iter().sum::<f64>() * self.grid().cell_volume()
    }
}

/// `E = g^{-1/2}` node by node; columns are the frame vectors.
pub fn frame_from_metric(g: &RealField) -> Result<RealField> {
    let n = g.grid.dim();
    for node in 0..g.node_count() {
        if !is_spd(g.node(node), n, SPD_TOL) {
            return Err(Error::Geometry { node, msg: "metric not positive definite".into() });
        }
    }
    Ok(RealField::from_nodes(&g.grid, n * n, |node, out| {
        out.copy_from_slice(&sym_fn(g.node(node), n, |x| 1.0 / x.sqrt()));
    }))
}

/// Coframe `θ = E^{-1}`, so `θ^a_j E^j_b = δ^a_b`.
pub fn coframe(frame: &RealField) -> Result<RealField> {
    let n = frame.grid.dim();
    for node in 0..frame.node_count() {
        if det(frame.node(node), n).abs() < 1e-300 {
            return Err(Error::Geometry { node, msg: "singular frame".into() });
        }
    }
    Ok(RealField::from_nodes(&frame.grid, n * n, |node, out| {
        out.copy_from_slice(&inverse(frame.node(node), n).expect("nonsingular frame"));
    }))
}

/// `max ‖EᵀgE − I‖` over nodes (entrywise).
pub fn orthonormality_drift(g: &RealField, frame: &RealField) -> f64 {
    let n = g.grid.dim();
    (0..g.node_count())
        .map(|node| {
            let e = frame.node(node);
            let m = matmul(&transpose(e, n), &matmul(g.node(node), e, n), n);
            (0..n * n).fold(0.0f64, |s, idx| s.max((m[idx] - if idx % (n + 1) == 0 { 1.0 } else { 0.0 }).abs()))
        })
        .fold(0.0, f64::max)
}

/// Polar correction `E ← E (EᵀgE)^{-1/2}`.
pub fn reorthonormalize(g: &RealField, frame: &RealField) -> RealField {
    let n = g.grid.dim();
    RealField::from_nodes(&g.grid, n * n, |node, out| {
        let e = frame.node(node);
        let m = matmul(&transpose(e, n), &matmul(g.node(node), e, n), n);
        out.copy_from_slice(&matmul(e, &sym_fn(&m, n, |x| 1.0 / x.sqrt()), n));
    })
}

/// `Γ^k_{ij}` stored at `(k*n + i)*n + j`.
pub fn christoffels(metric: &Metric) -> RealField {
    let n = metric.dim();
    let dg = metric.g.gradient();
    RealField::from_nodes(metric.grid(), n * n * n, |node, out| {
        let gi = metric.ginv.node(node);
        let dgn: Vec<&[f64]> = dg.iter().map(|f| f.node(node)).collect();
        for i in 0..n {
            for j in i..n {
                let mut low = vec![0.0; n];
                for l in 0..n {
                    low[l] = 0.5 * (dgn[i][j * n + l] + dgn[j][i * n + l] - dgn[l][i * n + j]);
                }
                for k in 0..n {
                    let v: f64 = (0..n).map(|l| gi[k * n + l] * low[l]).sum();
                    out[(k * n + i) * n + j] = v;
                    out[(k * n + j) * n + i] = v;
                }
            }
        }
    })
}

#[derive(Clone, Debug)]
pub struct Curvature {
    /// `R_{ij}{}^k{}_ℓ` at `((i*n + j)*n + k)*n + ℓ`.
    pub riemann: RealField,
    pub ricci: RealField,
    pub scalar: RealField,
}

pub fn curvature(metric: &Metric, gamma: &RealField) -> Curvature {
    let n = metric.dim();
    let dgam = gamma.gradient();
    let idx3 = |k: usize, i: usize, j: usize| (k * n + i) * n + j;
    let riemann = RealField::from_nodes(metric.grid(), n.pow(4), |node, out| {
        let gm = gamma.node(node);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        let mut v = dgam[i].node(node)[idx3(k, j, l)] - dgam[j].node(node)[idx3(k, i, l)];
                        for m in 0..n {
                            v += gm[idx3(k, i, m)] * gm[idx3(m, j, l)] - gm[idx3(k, j, m)] * gm[idx3(m, i, l)];
                        }
                        out[((i * n + j) * n + k) * n + l] = v;
                    }
                }
            }
        }
    });
    let ricci = RealField::from_nodes(metric.grid(), n * n, |node, out| {
        let r = riemann.node(node);
        for j in 0..n {
            for l in 0..n {
                out[j * n + l] = (0..n).map(|i| r[((i * n + j) * n + i) * n + l]).sum();
            }
        }
    });
    let scalar = RealField::from_nodes(metric.grid(), 1, |node, out| {
        out[0] = ricci.node(node).iter().zip(metric.ginv.node(node)).map(|(a, b)| a * b).sum();
    });
    Curvature { riemann, ricci, scalar }
}

/// `Rm_{ijmℓ} = g_{mq} R_{ij}{}^q{}_ℓ`.
pub fn riemann_lowered(metric: &Metric, curv: &Curvature) -> RealField {
    let n = metric.dim();
    RealField::from_nodes(metric.grid(), n.pow(4), |node, out| {
        let r = curv.riemann.node(node);
        let g = metric.g.node(node);
        for i in 0..n {
            for j in 0..n {
                for m in 0..n {
                    for l in 0..n {
                        out[((i * n + j) * n + m) * n + l] = (0..n).map(|q| g[m * n + q] * r[((i * n + j) * n + q) * n + l]).sum();
                    }
                }
            }
        }
    })
}

/// Covariant derivative of a covariant coordinate tensor of rank `rank`; the new index comes first.
pub fn cov_deriv(t: &RealField, rank: usize, gamma: &RealField) -> RealField {
    let n = t.grid.dim();
    let len = n.pow(rank as u32);
    assert_eq!(t.ncomp, len);
    let dt = t.gradient();
    RealField::from_nodes(&t.grid, n * len, |node, out| {
        let gm = gamma.node(node);
        let tv = t.node(node);
        let mut idx = vec![0usize; rank];
        for i in 0..n {
            for flat in 0..len {
                let mut rem = flat;
                for s in (0..rank).rev() {
                    idx[s] = rem % n;
                    rem /= n;
                }
                let mut v = dt[i].node(node)[flat];
                for s in 0..rank {
                    let stride = n.pow((rank - 1 - s) as u32);
                    let base = flat - idx[s] * stride;
                    for q in 0..n {
                        v -= gm[(q * n + i) * n + idx[s]] * tv[base + q * stride];
                    }
                }
                out[i * len + flat] = v;
            }
        }
    })
}

/// `∇_ℓ∇_p f = ∂_ℓ∂_p f − Γ^k_{ℓp} ∂_k f`.
pub fn hessian(f: &RealField, gamma: &RealField) -> RealField {
    let n = f.grid.dim();
    let df = f.gradient();
    let ddf: Vec<Vec<RealField>> = df.iter().map(|x| x.gradient()).collect();
    RealField::from_nodes(&f.grid, n * n, |node, out| {
        let gm = gamma.node(node);
        for l in 0..n {
            for p in 0..n {
                let mut v = ddf[p][l].data[node];
                for k in 0..n {
                    v -= gm[(k * n + l) * n + p] * df[k].data[node];
                }
                out[l * n + p] = v;
            }
        }
    })
}

/// `(1/√g) ∂_j(√g V^j)` for a coordinate vector field.
pub fn divergence(v: &RealField, metric: &Metric) -> RealField {
    let n = metric.dim();
    let w = RealField::from_nodes(metric.grid(), n, |node, out| {
        let s = metric.sqrtg.data[node];
        for j in 0..n {
            out[j] = s * v.node(node)[j];
        }
    });
    let dw = w.gradient();
    RealField::from_nodes(metric.grid(), 1, |node, out| {
        out[0] = (0..n).map(|j| dw[j].node(node)[j]).sum::<f64>() / metric.sqrtg.data[node];
    })
}

pub fn laplace_beltrami(f: &RealField, metric: &Metric) -> RealField {
    let n = metric.dim();
    let df = f.gradient();
    let grad = RealField::from_nodes(metric.grid(), n, |node, out| {
        let gi = metric.ginv.node(node);
        for j in 0..n {
            out[j] = (0..n).map(|k| gi[j * n + k] * df[k].data[node]).sum();
        }
    });
    divergence(&grad, metric)
}

/// `𝓛_X g = ∇_iX_j + ∇_jX_i` with `X_j = g_{jk}X^k`.
pub fn lie_metric(x: &RealField, metric: &Metric, gamma: &RealField) -> RealField {
    let n = metric.dim();
    let low = RealField::from_nodes(metric.grid(), n, |node, out| {
        let g = metric.g.node(node);
        for j in 0..n {
            out[j] = (0..n).map(|k| g[j * n + k] * x.node(node)[k]).sum();
        }
    });
    let dx = cov_deriv(&low, 1, gamma);
    RealField::from_nodes(metric.grid(), n * n, |node, out| {
        let v = dx.node(node);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = v[i * n + j] + v[j * n + i];
            }
        }
    })
}

/// Coordinate formula `X^k∂_k g_{ij} + g_{kj}∂_iX^k + g_{ik}∂_jX^k`.
pub fn lie_metric_coordinate(x: &RealField, g: &RealField) -> RealField {
    let n = g.grid.dim();
    let dg = g.gradient();
    let dx = x.gradient();
    RealField::from_nodes(&g.grid, n * n, |node, out| {
        let gv = g.node(node);
        let xv = x.node(node);
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += xv[k] * dg[k].node(node)[i * n + j] + gv[k * n + j] * dx[i].node(node)[k] + gv[i * n + k] * dx[j].node(node)[k];
                }
                out[i * n + j] = v;
            }
        }
    })
}

/// Cartan formula `𝓛_X H = dι_X H + ι_X dH`.
pub fn lie_form(x: &RealField, h: &FormField) -> Result<FormField> {
    let n = h.dim();
    let mut out = FormField::zeros(h.grid(), h.degree)?;
    if h.degree > 0 {
        out = out.add(&d(&interior(x, h)?)?);
    }
    if h.degree < n {
        out = out.add(&interior(x, &d(h)?)?);
    }
    Ok(out)
}

/// `X^k = 2 g^{mk} g^{ij} ∇̄_i g_{jm}`; `background = None` means the flat connection.
pub fn deturck_vector(metric: &Metric, background_gamma: Option<&RealField>) -> RealField {
    let n = metric.dim();
    let dg = metric.g.gradient();
    RealField::from_nodes(metric.grid(), n, |node, out| {
        let g = metric.g.node(node);
        let gi = metric.ginv.node(node);
        let mut w = vec![0.0; n];
        for m in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut cd = dg[i].node(node)[j * n + m];
                    if let Some(bg) = background_gamma {
                        let b = bg.node(node);
                        for q in 0..n {
                            cd -= b[(q * n + i) * n + j] * g[q * n + m] + b[(q * n + i) * n + m] * g[j * n + q];
                        }
                    }
                    s += gi[i * n + j] * cd;
                }
            }
            w[m] = s;
        }
        for k in 0..n {
            out[k] = 2.0 * (0..n).map(|m| gi[m * n + k] * w[m]).sum::<f64>();
        }
    })
}

/// Frame components `X^ℓ = e^{-2φ} Re⟨ψ, γ^ℓ D̸ψ⟩`.
pub fn hw_vector_frame(basis: &GammaBasis, psi: &ComplexField, dpsi: &ComplexField, phi: &RealField) -> RealField {
    let n = basis.n();
    RealField::from_nodes(&psi.grid, n, |node, out| {
        let w = (-2.0 * phi.data[node]).exp();
        let p = psi.node(node);
        let dp = dpsi.node(node);
        for l in 0..n {
            out[l] = w * inner(p, &basis.gamma(l).apply(dp)).re;
        }
    })
}

/// Coordinate components `E^j_ℓ X^ℓ` of the vector field `e^{-2φ} Re⟨ψ, γ^ℓ D̸ψ⟩ e_ℓ`.
pub fn hw_vector(
    basis: &GammaBasis,
    psi: &ComplexField,
    phi: &RealField,
    metric: &Metric,
    frame: &RealField,
) -> RealField {
    let gamma = christoffels(metric);
    let conn = crate::spin::spin_connection(metric, &gamma, frame);
    let ops = ConnectionOps::levi_civita(basis, &conn, frame, &metric.sqrtg);
    let dpsi = dirac(basis, &ops.apply(psi));
    frame_to_coordinate_vector(&hw_vector_frame(basis, psi, &dpsi, phi), frame)
}

pub fn frame_to_coordinate_vector(xf: &RealField, frame: &RealField) -> RealField {
    let n = frame.grid.dim();
    RealField::from_nodes(&frame.grid, n, |node, out| {
        let e = frame.node(node);
        for j in 0..n {
            out[j] = (0..n).map(|a| e[j * n + a] * xf.node(node)[a]).sum();
        }
    })
}

/// First variation of `Rm_{ijmℓ} = g_{mq}R_{ij}{}^q{}_ℓ` along `u`, at `((i*n+j)*n+m)*n+ℓ`:
/// `½(∇_i∇_ℓu_{jm} + ∇_j∇_mu_{iℓ} − ∇_i∇_mu_{jℓ} − ∇_j∇_ℓu_{im}) + ½(R_{ij}{}^q{}_ℓ u_{qm} − R_{ij}{}^q{}_m u_{ℓq})`.
pub fn variation_riemann(metric: &Metric, u: &RealField) -> RealField {
    let n = metric.dim();
    let gamma = christoffels(metric);
    let curv = curvature(metric, &gamma);
    let ddu = cov_deriv(&cov_deriv(u, 2, &gamma), 3, &gamma);
    let i4 = |a: usize, b: usize, c: usize, e: usize| ((a * n + b) * n + c) * n + e;
    RealField::from_nodes(metric.grid(), n.pow(4), |node, out| {
        let dd = ddu.node(node);
        let r = curv.riemann.node(node);
        let uv = u.node(node);
        for i in 0..n {
            for j in 0..n {
                for m in 0..n {
                    for l in 0..n {
                        let mut v = 0.5 * (dd[i4(i, l, j, m)] + dd[i4(j, m, i, l)] - dd[i4(i, m, j, l)] - dd[i4(j, l, i, m)]);
                        for q in 0..n {
                            v += 0.5 * (r[i4(i, j, q, l)] * uv[q * n + m] - r[i4(i, j, q, m)] * uv[l * n + q]);
                        }
                        out[i4(i, j, m, l)] = v;
                    }
                }
            }
        }
    })
}

/// First variation of Ricci along `u`:
/// `−½(Δu_{jk} + ∇_j∇_k tr u) + ½g^{im}(∇_i∇_k u_{jm} + ∇_j∇_m u_{ik}) + ½R_j{}^q u_{kq} − ½R^m{}_j{}^q{}_k u_{mq}`.
pub fn variation_ricci(metric: &Metric, u: &RealField) -> RealField {
    let n = metric.dim();
    let gamma = christoffels(metric);
    let curv = curvature(metric, &gamma);
    let rm = riemann_lowered(metric, &curv);
    let ddu = cov_deriv(&cov_deriv(u, 2, &gamma), 3, &gamma);
    let tr = RealField::from_nodes(metric.grid(), 1, |node, out| {
        out[0] = u.node(node).iter().zip(metric.ginv.node(node)).map(|(a, b)| a * b).sum();
    });
    let htr = hessian(&tr, &gamma);
    let i4 = |a: usize, b: usize, c: usize, e: usize| ((a * n + b) * n + c) * n + e;
    RealField::from_nodes(metric.grid(), n * n, |node, out| {
        let gi = metric.ginv.node(node);
        let dd = ddu.node(node);
        let ric = curv.ricci.node(node);
        let r = rm.node(node);
        let uv = u.node(node);
        for j in 0..n {
            for k in 0..n {
                let mut v = -0.5 * htr.node(node)[j * n + k];
                for a in 0..n {
                    for b in 0..n {
                        let gab = gi[a * n + b];
                        v += -0.5 * gab * dd[i4(a, b, j, k)];
                        v += 0.5 * gab * (dd[i4(a, k, j, b)] + dd[i4(j, b, a, k)]);
                        // ½ g^{qa} R_{ja} u_{kq}, with (a, b) = (a, q)
                        v += 0.5 * gab * ric[j * n + a] * uv[k * n + b];
                    }
                }
                for i in 0..n {
                    for m in 0..n {
                        for a in 0..n {
                            for q in 0..n {
                                v -= 0.5 * gi[i * n + m] * gi[q * n + a] * r[i4(i, j, a, k)] * uv[m * n + q];
                            }
                        }
                    }
                }
                out[j * n + k] = v;
            }
        }
    })
}

/// Pointwise maximum of a per-node Euclidean norm.
pub fn sup_norm(f: &RealField) -> f64 {
    f.node_norms().into_iter().fold(0.0, f64::max)
}

/// Multiplies every spinor value by the constant phase `e^{iθ}`.
pub fn rotate_phase(psi: &ComplexField, theta: f64) -> ComplexField {
    let z = C64::from_polar(1.0, theta);
    ComplexField::from_nodes(&psi.grid, psi.ncomp, |node, out| {
        for (o, &p) in out.iter_mut().zip(psi.node(node)) {
            *o = p * z;
        }
    })
}
