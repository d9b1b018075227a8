//! Discrete exterior calculus on the periodic grid under a variable metric.
//!
//! Forms carry coordinate components in canonical increasing multi-index order. The
//! codifferential is assembled as the transpose of `d` against the metric weights, so
//! `Σ⟨dα, β⟩_g √g = Σ⟨α, d†β⟩_g √g` holds to rounding.

use crate::geometry::Metric;
use crate::grid::{Grid, RealField};
use crate::linalg::minor;
use crate::multi_index::{shuffle_sign, IndexSet};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    pub degree: usize,
    pub field: RealField,
}

impl FormField {
    pub fn zeros(grid: &Grid, degree: usize) -> Result<Self> {
        let n = grid.dim();
        if degree > n {
            return Err(Error::Dimension(format!("form degree {degree} exceeds dimension {n}")));
        }
        Ok(Self { degree, field: RealField::zeros(grid, IndexSet::new(n, degree).len()) })
    }

    pub fn new(degree: usize, field: RealField) -> Result<Self> {
        let n = field.grid.dim();
        if degree > n || field.ncomp != IndexSet::new(n, degree).len() {
            return Err(Error::Shape(format!(
                "degree-{degree} form on n = {n} needs {} components, got {}",
                IndexSet::new(n, degree.min(n)).len(),
                field.ncomp
            )));
        }
        Ok(Self { degree, field })
    }

    pub fn grid(&self) -> &Grid {
        &self.field.grid
    }

    pub fn dim(&self) -> usize {
        self.field.grid.dim()
    }

    pub fn index_set(&self) -> IndexSet {
        IndexSet::new(self.dim(), self.degree)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { degree: self.degree, field: self.field.scaled(s) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { degree: self.degree, field: self.field.add(&other.field) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { degree: self.degree, field: self.field.sub(&other.field) }
    }
}

/// Gram matrix of degree-`p` forms induced by the (inverse) metric at one node:
/// entry `(I, J)` is `det(m[I, J])`.
pub fn gram(m: &[f64], n: usize, set: &IndexSet) -> Vec<f64> {
    let len = set.len();
    let mut out = vec![0.0; len * len];
    for i in 0..len {
        for j in i..len {
            let v = minor(m, n, set.get(i), set.get(j));
            out[i * len + j] = v;
            out[j * len + i] = v;
        }
    }
    out
}

fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let len = v.len();
    for i in 0..len {
        out[i] = (0..len).map(|j| m[i * len + j] * v[j]).sum();
    }
}

/// Pointwise `⟨α, β⟩_g`.
pub fn inner_pointwise(a: &FormField, b: &FormField, metric: &Metric) -> RealField {
    let n = a.dim();
    let set = a.index_set();
    RealField::from_nodes(a.grid(), 1, |i, out| {
        let gr = gram(metric.ginv.node(i), n, &set);
        let (x, y) = (a.field.node(i), b.field.node(i));
        let mut s = 0.0;
        for p in 0..set.len() {
            for q in 0..set.len() {
                s += x[p] * gr[p * set.len() + q] * y[q];
            }
        }
        out[0] = s;
    })
}

/// Discrete `L²` pairing `Σ⟨α, β⟩_g √g Πh`.
pub fn l2_inner(a: &FormField, b: &FormField, metric: &Metric) -> f64 {
    let dens = inner_pointwise(a, b, metric);
    dens.data.iter().zip(&metric.sqrtg.data).map(|(x, w)| x * w).sum::<f64>() * a.grid().cell_volume()
}

pub fn wedge(a: &FormField, b: &FormField) -> Result<FormField> {
    let n = a.dim();
    let (p, q) = (a.degree, b.degree);
    if p + q > n {
        return Err(Error::Dimension(format!("wedge of degrees {p} + {q} exceeds {n}")));
    }
    let sa = IndexSet::new(n, p);
    let sb = IndexSet::new(n, q);
    let sk = IndexSet::new(n, p + q);
    let mut terms: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); sk.len()];
    for (kpos, k) in sk.iter().enumerate() {
        for (ipos, i) in sa.iter().enumerate() {
            if !i.iter().all(|x| k.contains(x)) {
                continue;
            }
            let rest: Vec<usize> = k.iter().copied().filter(|x| !i.contains(x)).collect();
            let jpos = sb.locate(&rest).unwrap().0;
            terms[kpos].push((ipos, jpos, shuffle_sign(i, &rest)));
        }
    }
    let field = RealField::from_nodes(a.grid(), sk.len(), |node, out| {
        let (x, y) = (a.field.node(node), b.field.node(node));
        for (kpos, t) in terms.iter().enumerate() {
            out[kpos] = t.iter().map(|&(i, j, s)| s * x[i] * y[j]).sum();
        }
    });
    Ok(FormField { degree: p + q, field })
}

/// Pointwise Hodge star with `α ∧ ⋆α = ⟨α, α⟩_g √g dx¹∧⋯∧dxⁿ`.
pub fn hodge_star(w: &FormField, metric: &Metric) -> Result<FormField> {
    let n = w.dim();
    let p = w.degree;
    let sp = IndexSet::new(n, p);
    let sq = IndexSet::new(n, n - p);
    let pairs: Vec<(usize, f64)> = (0..sq.len())
        .map(|jpos| {
            let j = sq.get(jpos);
            let i = sq.complement(jpos);
            (sp.locate(&i).unwrap().0, shuffle_sign(&i, j))
        })
        .collect();
    let field = RealField::from_nodes(w.grid(), sq.len(), |node, out| {
        let gr = gram(metric.ginv.node(node), n, &sp);
        let mut raised = vec![0.0; sp.len()];
        mat_vec(&gr, w.field.node(node), &mut raised);
        let vol = metric.sqrtg.data[node];
        for (jpos, &(ipos, s)) in pairs.iter().enumerate() {
            out[jpos] = vol * s * raised[ipos];
        }
    });
    Ok(FormField { degree: n - p, field })
}

/// For each `(p+1)`-index `K`: the list `(axis, position of K∖axis, sign)`.
fn d_terms(n: usize, p: usize) -> Vec<Vec<(usize, usize, f64)>> {
    let src = IndexSet::new(n, p);
    let dst = IndexSet::new(n, p + 1);
    dst.iter()
        .map(|k| {
            k.iter()
                .enumerate()
                .map(|(r, &j)| {
                    let rest: Vec<usize> = k.iter().copied().filter(|&x| x != j).collect();
                    (j, src.locate(&rest).unwrap().0, if r % 2 == 0 { 1.0 } else { -1.0 })
                })
                .collect()
        })
        .collect()
}

/// Exterior derivative `(dω)_{i_0⋯i_p} = Σ_r (−1)^r D_{i_r} ω_{i_0⋯î_r⋯i_p}`.
pub fn d(w: &FormField) -> Result<FormField> {
    let n = w.dim();
    let p = w.degree;
    if p >= n {
        return Err(Error::Dimension(format!("d of a degree-{p} form on n = {n}")));
    }
    let grads = w.field.gradient();
    let terms = d_terms(n, p);
    let field = RealField::from_nodes(w.grid(), terms.len(), |node, out| {
        for (kpos, t) in terms.iter().enumerate() {
            out[kpos] = t.iter().map(|&(j, ipos, s)| s * grads[j].node(node)[ipos]).sum();
        }
    });
    Ok(FormField { degree: p + 1, field })
}

/// Transpose of `d` under the unweighted node sum, acting on components of degree `p+1`.
fn d_transpose(b: &RealField, n: usize, p: usize) -> RealField {
    let terms = d_terms(n, p);
    let grads = b.gradient();
    let len = IndexSet::new(n, p).len();
    RealField::from_nodes(&b.grid, len, |node, out| {
        for (kpos, t) in terms.iter().enumerate() {
            for &(j, ipos, s) in t {
                out[ipos] -= s * grads[j].node(node)[kpos];
            }
        }
    })
}

/// Codifferential assembled as the exact discrete adjoint of [`d`].
pub fn codifferential(w: &FormField, metric: &Metric) -> Result<FormField> {
    let n = w.dim();
    let p = w.degree;
    if p == 0 {
        return Err(Error::Dimension("codifferential of a 0-form".into()));
    }
    let sp = IndexSet::new(n, p);
    let sm = IndexSet::new(n, p - 1);
    let weighted = RealField::from_nodes(w.grid(), sp.len(), |node, out| {
        let gr = gram(metric.ginv.node(node), n, &sp);
        mat_vec(&gr, w.field.node(node), out);
        let vol = metric.sqrtg.data[node];
        out.iter_mut().for_each(|x| *x *= vol);
    });
    let t = d_transpose(&weighted, n, p - 1);
    let field = RealField::from_nodes(w.grid(), sm.len(), |node, out| {
        let gl = gram(metric.g.node(node), n, &sm);
        mat_vec(&gl, t.node(node), out);
        let vol = metric.sqrtg.data[node];
        out.iter_mut().for_each(|x| *x /= vol);
    });
    Ok(FormField { degree: p - 1, field })
}

/// `□ = dd† + d†d`, omitting whichever term does not exist in degree 0 or n.
pub fn hodge_laplacian(w: &FormField, metric: &Metric) -> Result<FormField> {
    let n = w.dim();
    let mut out = FormField::zeros(w.grid(), w.degree)?;
    if w.degree < n {
        out = out.add(&codifferential(&d(w)?, metric)?);
    }
    if w.degree > 0 {
        out = out.add(&d(&codifferential(w, metric)?)?);
    }
    Ok(out)
}

/// Interior product `ι_X ω` for a coordinate vector field `X` (n components per node).
pub fn interior(x: &RealField, w: &FormField) -> Result<FormField> {
    let n = w.dim();
    let p = w.degree;
    if p == 0 {
        return FormField::zeros(w.grid(), 0);
    }
    let src = IndexSet::new(n, p);
    let dst = IndexSet::new(n, p - 1);
    let terms: Vec<Vec<(usize, usize, f64)>> = dst
        .iter()
        .map(|i| {
            (0..n)
                .filter(|j| !i.contains(j))
                .map(|j| {
                    let mut full = vec![j];
                    full.extend_from_slice(i);
                    let (pos, s) = src.locate(&full).unwrap();
                    (j, pos, s)
                })
                .collect()
        })
        .collect();
    let field = RealField::from_nodes(w.grid(), dst.len(), |node, out| {
        let (xv, wv) = (x.node(node), w.field.node(node));
        for (ipos, t) in terms.iter().enumerate() {
            out[ipos] = t.iter().map(|&(j, pos, s)| s * xv[j] * wv[pos]).sum();
        }
    });
    Ok(FormField { degree: p - 1, field })
}

/// Frame components `ω_A = Σ_J det(E[J, A]) ω_J` for increasing frame multi-indices `A`.
pub fn frame_components(w: &FormField, frame: &RealField) -> RealField {
    let n = w.dim();
    let set = w.index_set();
    RealField::from_nodes(w.grid(), set.len(), |node, out| {
        let e = frame.node(node);
        let wv = w.field.node(node);
        for (apos, a) in set.iter().enumerate() {
            out[apos] = set.iter().enumerate().map(|(jpos, j)| minor(e, n, j, a) * wv[jpos]).sum();
        }
    })
}

/// Inverse of [`frame_components`] given the coframe `θ = E^{-1}`.
pub fn from_frame_components(comps: &RealField, coframe: &RealField, degree: usize) -> FormField {
    let n = comps.grid.dim();
    let set = IndexSet::new(n, degree);
    let field = RealField::from_nodes(&comps.grid, set.len(), |node, out| {
        let th = coframe.node(node);
        let cv = comps.node(node);
        for (jpos, j) in set.iter().enumerate() {
            out[jpos] = set.iter().enumerate().map(|(apos, a)| minor(th, n, a, j) * cv[apos]).sum();
        }
    });
    FormField { degree, field }
}

/// Expands increasing components at one node into the full antisymmetric `n^p` array.
pub fn expand_antisymmetric(comps: &[f64], n: usize, p: usize) -> Vec<f64> {
    let set = IndexSet::new(n, p);
    let mut out = vec![0.0; n.pow(p as u32)];
    crate::multi_index::for_each_tuple(n, p, |t| {
        if let Some((pos, s)) = set.locate(t) {
            let flat = t.iter().fold(0usize, |acc, &i| acc * n + i);
            out[flat] = s * comps[pos];
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Metric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_form(grid: &Grid, p: usize, seed: u64) -> FormField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = IndexSet::new(grid.dim(), p).len();
        let data = (0..grid.node_count() * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        FormField { degree: p, field: RealField { grid: grid.clone(), ncomp: len, data } }
    }

    fn random_metric(grid: &Grid, seed: u64) -> Metric {
        let n = grid.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = RealField::zeros(grid, n * n);
        for node in 0..grid.node_count() {
            let a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-0.3..0.3)).collect();
            let v = g.node_mut(node);
            for i in 0..n {
                for j in 0..n {
                    v[i * n + j] = (0..n).map(|k| a[i * n + k] * a[j * n + k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        Metric::new(g).unwrap()
    }

    #[test]
    fn wedge_basics() {
        let grid = Grid::cubic(2, 8, 2).unwrap();
        let dx1 = FormField::new(1, RealField::from_fn(&grid, 2, |_, o| o[0] = 1.0)).unwrap();
        let dx2 = FormField::new(1, RealField::from_fn(&grid, 2, |_, o| o[1] = 1.0)).unwrap();
        let w = wedge(&dx1, &dx2).unwrap();
        assert!(w.field.data.iter().all(|&x| x == 1.0));
        let g3 = Grid::cubic(3, 5, 2).unwrap();
        let a = random_form(&g3, 1, 1);
        assert_eq!(wedge(&a, &a).unwrap().field.max_abs(), 0.0);
        let b = random_form(&g3, 2, 2);
        assert!(wedge(&b, &b).is_err());
        let ab = wedge(&a, &b).unwrap();
        let ba = wedge(&b, &a).unwrap();
        assert!(ab.sub(&ba).field.max_abs() < 1e-15);
        let c = random_form(&g3, 1, 3);
        assert!(wedge(&a, &c).unwrap().add(&wedge(&c, &a).unwrap()).field.max_abs() < 1e-15);
    }

    #[test]
    fn star_flat_and_conformal() {
        let grid = Grid::cubic(2, 8, 2).unwrap();
        let flat = Metric::flat(&grid);
        let dx1 = FormField::new(1, RealField::from_fn(&grid, 2, |_, o| o[0] = 1.0)).unwrap();
        let s = hodge_star(&dx1, &flat).unwrap();
        assert!(s.field.data.chunks(2).all(|c| c == [0.0, 1.0]));
        let conf = Metric::new(RealField::from_fn(&grid, 4, |x, o| {
            let e = (0.2 * x[0].sin()).exp().powi(2);
            o[0] = e;
            o[3] = e;
        }))
        .unwrap();
        let s = hodge_star(&dx1, &conf).unwrap();
        for c in s.field.data.chunks(2) {
            assert!(c[0].abs() < 1e-15 && (c[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn star_involution_and_norm() {
        for (n, size) in [(2usize, 6usize), (3, 5), (4, 5)] {
            let grid = Grid::cubic(n, size, 2).unwrap();
            let flat = Metric::flat(&grid);
            let curved = random_metric(&grid, 9);
            for p in 0..=n {
                let w = random_form(&grid, p, 4 + p as u64);
                let ss = hodge_star(&hodge_star(&w, &flat).unwrap(), &flat).unwrap();
                let sign = if (p * (n - p)) % 2 == 0 { 1.0 } else { -1.0 };
                assert!(ss.sub(&w.scaled(sign)).field.max_abs() < 1e-13);
                let top = wedge(&w, &hodge_star(&w, &curved).unwrap()).unwrap();
                let dens = inner_pointwise(&w, &w, &curved);
                for node in 0..grid.node_count() {
                    let expect = dens.data[node] * curved.sqrtg.data[node];
                    assert!((top.field.data[node] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
                }
            }
        }
    }

    #[test]
    fn d_examples() {
        let grid = Grid::cubic(2, 16, 2).unwrap();
        let c = FormField::new(0, RealField::constant(&grid, 2.5)).unwrap();
        assert_eq!(d(&c).unwrap().field.max_abs(), 0.0);
        let f = RealField::scalar_fn(&grid, |x| (x[0] + 2.0 * x[1]).sin());
        let w = FormField::new(1, RealField::from_nodes(&grid, 2, |i, o| o[0] = f.data[i])).unwrap();
        let dw = d(&w).unwrap();
        let d2f = f.partial(1).unwrap();
        for i in 0..grid.node_count() {
            assert!((dw.field.data[i] + d2f.data[i]).abs() < 1e-15);
        }
        let g3 = Grid::cubic(3, 6, 4).unwrap();
        for p in 0..2 {
            let w = random_form(&g3, p, 7);
            assert!(d(&d(&w).unwrap()).unwrap().field.max_abs() < 1e-12);
        }
        assert!(d(&random_form(&g3, 3, 1)).is_err());
    }

    #[test]
    fn codifferential_adjointness() {
        for (n, size) in [(2usize, 16usize), (3, 6)] {
            let grid = Grid::cubic(n, size, 2).unwrap();
            let metric = random_metric(&grid, 3);
            for p in 1..=n {
                let a = random_form(&grid, p - 1, 10 + p as u64);
                let b = random_form(&grid, p, 20 + p as u64);
                let lhs = l2_inner(&d(&a).unwrap(), &b, &metric);
                let rhs = l2_inner(&a, &codifferential(&b, &metric).unwrap(), &metric);
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "n={n} p={p}: {lhs} {rhs}");
            }
        }
    }

    #[test]
    fn codifferential_symbol() {
        let grid = Grid::cubic(2, 32, 2).unwrap();
        let flat = Metric::flat(&grid);
        let h = grid.spacing(0);
        let c = FormField::new(1, RealField::from_fn(&grid, 2, |_, o| o[0] = 1.3)).unwrap();
        assert_eq!(codifferential(&c, &flat).unwrap().field.max_abs(), 0.0);
        let b = FormField::new(1, RealField::from_fn(&grid, 2, |x, o| o[0] = x[0].sin())).unwrap();
        let db = codifferential(&b, &flat).unwrap();
        for i in 0..grid.node_count() {
            let x = grid.coords(i);
            assert!((db.field.data[i] + x[0].cos() * h.sin() / h).abs() < 1e-14);
        }
        assert!(codifferential(&FormField::zeros(&grid, 0).unwrap(), &flat).is_err());
    }

    #[test]
    fn laplacian_symbol_and_positivity() {
        let grid = Grid::cubic(2, 32, 2).unwrap();
        let flat = Metric::flat(&grid);
        let c = FormField::new(1, RealField::from_fn(&grid, 2, |_, o| o[1] = 0.7)).unwrap();
        assert_eq!(hodge_laplacian(&c, &flat).unwrap().field.max_abs(), 0.0);
        let w = FormField::new(1, RealField::from_fn(&grid, 2, |x, o| o[1] = x[0].sin())).unwrap();
        let lw = hodge_laplacian(&w, &flat).unwrap();
        let sym = grid.symbol(0, 1.0).powi(2);
        for i in 0..grid.node_count() {
            assert!(lw.field.node(i)[0].abs() < 1e-13);
            assert!((lw.field.node(i)[1] - sym * w.field.node(i)[1]).abs() < 1e-13);
        }
        let metric = random_metric(&Grid::cubic(3, 5, 2).unwrap(), 8);
        for p in 0..=3 {
            let w = random_form(&metric.g.grid, p, 30 + p as u64);
            assert!(l2_inner(&hodge_laplacian(&w, &metric).unwrap(), &w, &metric) >= 0.0);
        }
    }

    #[test]
    fn odd_degree_anticommuting_wedge() {
        let grid = Grid::cubic(2, 8, 2).unwrap();
        let h = random_form(&grid, 1, 1);
        let b = random_form(&grid, 1, 2);
        let s = wedge(&b, &h).unwrap().add(&wedge(&h, &b).unwrap());
        assert!(s.field.max_abs() < 1e-15);
    }

    #[test]
    fn frame_component_contraction() {
        let grid = Grid::cubic(3, 5, 2).unwrap();
        let w = random_form(&grid, 2, 5);
        let id = RealField::from_fn(&grid, 9, |_, o| {
            o[0] = 1.0;
            o[4] = 1.0;
            o[8] = 1.0;
        });
        assert_eq!(frame_components(&w, &id), w.field);
        let scaled = id.scaled(2.0f64.powf(-0.5));
        let fw = frame_components(&w, &scaled);
        assert!(fw.sub(&w.field.scaled(0.5)).max_abs() < 1e-15);
        // diagonal metric: dense n^k contraction oracle
        let metric = Metric::new(RealField::from_fn(&grid, 9, |x, o| {
            o[0] = 1.0 + 0.3 * x[0].sin();
            o[4] = 2.0;
            o[8] = 1.5 + 0.2 * x[1].cos();
        }))
        .unwrap();
        let frame = crate::geometry::frame_from_metric(&metric.g).unwrap();
        let fw = frame_components(&w, &frame);
        for node in 0..grid.node_count() {
            let e = frame.node(node);
            let full = expand_antisymmetric(w.field.node(node), 3, 2);
            let mut dense = [0.0; 9];
            for a in 0..3 {
                for b in 0..3 {
                    for j1 in 0..3 {
                        for j2 in 0..3 {
                            dense[a * 3 + b] += e[j1 * 3 + a] * e[j2 * 3 + b] * full[j1 * 3 + j2];
                        }
                    }
                }
            }
            let got = expand_antisymmetric(fw.node(node), 3, 2);
            for i in 0..9 {
                assert!((got[i] - dense[i]).abs() < 1e-14);
            }
        }
        let coframe = crate::geometry::coframe(&frame).unwrap();
        assert!(from_frame_components(&fw, &coframe, 2).sub(&w).field.max_abs() < 1e-13);
    }
}
