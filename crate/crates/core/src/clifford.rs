//! Complex Clifford-algebra representation with Hermitian generators, `γ^aγ^b + γ^bγ^a = 2δ_{ab}`.
//!
//! Frame indices are zero-based throughout the crate. Multi-indices passed to
//! [`GammaBasis::gamma_anti`] may be unsorted or contain repeats.

use std::collections::HashMap;

use num_complex::Complex64 as C64;

use crate::linalg::CMat;
use crate::multi_index::{factorial, mask_of, sort_sign, IndexSet};
use crate::{Error, Result};

pub const MAX_DIM: usize = 12;

fn pauli(which: usize) -> CMat {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match which {
        1 => CMat::from_rows(&[&[o, one], &[one, o]]),
        2 => CMat::from_rows(&[&[o, -i], &[i, o]]),
        3 => CMat::from_rows(&[&[one, o], &[o, -one]]),
        _ => CMat::identity(2),
    }
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    let (da, db) = (a.dim, b.dim);
    let d = da * db;
    let mut out = CMat::zeros(d);
    for i in 0..da {
        for j in 0..da {
            let x = a.at(i, j);
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for k in 0..db {
                for l in 0..db {
                    out.data[(i * db + k) * d + j * db + l] = x * b.at(k, l);
                }
            }
        }
    }
    out
}

fn kron_chain(factors: &[usize]) -> CMat {
    factors.iter().fold(CMat::identity(1), |acc, &f| kron(&acc, &pauli(f)))
}

#[derive(Clone, Debug)]
pub struct GammaBasis {
    n: usize,
    dim_s: usize,
    gamma: Vec<CMat>,
    cache: HashMap<usize, CMat>,
    cache_len: usize,
}

/// Builds the basis with products cached up to length 2.
pub fn build_gamma(n: usize) -> Result<GammaBasis> {
    GammaBasis::with_cache(n, 2)
}

impl GammaBasis {
    pub fn with_cache(n: usize, cache_len: usize) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::Dimension(format!("Clifford dimension {n} outside 1..={MAX_DIM}")));
        }
        let m = n / 2;
        let mut gamma = Vec::with_capacity(n);
        for j in 0..m {
            for s in [1usize, 2] {
                let mut f = vec![3usize; j];
                f.push(s);
                f.extend(std::iter::repeat(0).take(m - j - 1));
                gamma.push(kron_chain(&f));
            }
        }
        if n % 2 == 1 {
            gamma.push(kron_chain(&vec![3usize; m]));
        }
        let dim_s = 1 << m;
        let mut basis = Self { n, dim_s, gamma, cache: HashMap::new(), cache_len: cache_len.min(n) };
        for p in 0..=basis.cache_len {
            for idx in IndexSet::new(n, p).iter() {
                let prod = basis.ordered_product(idx);
                basis.cache.insert(mask_of(idx), prod);
            }
        }
        Ok(basis)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim_s(&self) -> usize {
        self.dim_s
    }

    pub fn gamma(&self, a: usize) -> &CMat {
        &self.gamma[a]
    }

    pub fn cache_len(&self) -> usize {
        self.cache_len
    }

    fn ordered_product(&self, idx: &[usize]) -> CMat {
        idx.iter().fold(CMat::identity(self.dim_s), |acc, &i| acc.mul(&self.gamma[i]))
    }

    /// Antisymmetrized product `γ^I` for an increasing multi-index, from the cache when available.
    pub fn gamma_sorted(&self, idx: &[usize]) -> CMat {
        match self.cache.get(&mask_of(idx)) {
            Some(m) if idx.len() <= self.cache_len => m.clone(),
            _ => self.ordered_product(idx),
        }
    }

    /// Borrowed cached product; panics if `idx` is longer than the cache length.
    pub fn cached(&self, idx: &[usize]) -> &CMat {
        &self.cache[&mask_of(idx)]
    }

    /// `(1/N!) Σ_σ sgn(σ) γ^{i_σ(1)}⋯γ^{i_σ(N)}`.
    pub fn gamma_anti(&self, idx: &[usize]) -> Result<CMat> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n) {
            return Err(Error::Index(format!("gamma index {bad} out of range for n = {}", self.n)));
        }
        Ok(match sort_sign(idx) {
            None => CMat::zeros(self.dim_s),
            Some((sorted, sign)) => {
                let m = self.gamma_sorted(&sorted);
                if sign < 0.0 {
                    m.scaled(C64::new(-1.0, 0.0))
                } else {
                    m
                }
            }
        })
    }
}

/// Clifford action of a `p`-form given by frame components in increasing order:
/// the sum over all ordered `p`-tuples, `p! Σ_{I increasing} ω_I γ^I ψ`.
pub fn act_form(basis: &GammaBasis, p: usize, omega: &[f64], psi: &[C64]) -> Result<Vec<C64>> {
    let set = IndexSet::new(basis.n, p);
    if omega.len() != set.len() || psi.len() != basis.dim_s {
        return Err(Error::Shape(format!(
            "act_form expects {} form and {} spinor components, got {} and {}",
            set.len(),
            basis.dim_s,
            omega.len(),
            psi.len()
        )));
    }
    let mut out = vec![C64::new(0.0, 0.0); basis.dim_s];
    let pf = factorial(p);
    for (i, idx) in set.iter().enumerate() {
        if omega[i] != 0.0 {
            basis.gamma_sorted(idx).apply_acc(C64::new(pf * omega[i], 0.0), psi, &mut out);
        }
    }
    Ok(out)
}

/// `(λ|H)_a` for every frame direction `a`, together with the Hermitian parts `h_a`.
#[derive(Clone, Debug)]
pub struct FluxEndomorphism {
    pub ends: Vec<CMat>,
    pub herm: Vec<CMat>,
}

/// Precomputed linear structure of `H ↦ (λ|H)_a`, so per-node assembly is a weighted sum.
#[derive(Clone, Debug)]
pub struct FluxStencil {
    pub n: usize,
    pub k: usize,
    pub dim_s: usize,
    /// per direction: (component of H, matrix) for the λ1 and λ2 terms, tuple factorials included.
    lam1: Vec<Vec<(usize, CMat)>>,
    lam2: Vec<Vec<(usize, CMat)>>,
}

impl FluxStencil {
    pub fn new(basis: &GammaBasis, k: usize) -> Result<Self> {
        let n = basis.n;
        if k > n {
            return Err(Error::Dimension(format!("flux degree {k} exceeds dimension {n}")));
        }
        let hset = IndexSet::new(n, k);
        let mut lam1 = vec![Vec::new(); n];
        let mut lam2 = vec![Vec::new(); n];
        for a in 0..n {
            if k >= 1 {
                let f1 = factorial(k - 1);
                for j in IndexSet::new(n, k - 1).iter() {
                    if j.contains(&a) {
                        continue;
                    }
                    let mut full = vec![a];
                    full.extend_from_slice(j);
                    let (pos, sign) = hset.locate(&full).expect("distinct indices");
                    lam1[a].push((pos, basis.gamma_sorted(j).scaled(C64::new(sign * f1, 0.0))));
                }
            }
            let f2 = factorial(k);
            for (pos, j) in hset.iter().enumerate() {
                if j.contains(&a) {
                    continue;
                }
                let m = basis.gamma(a).mul(&basis.gamma_sorted(j));
                lam2[a].push((pos, m.scaled(C64::new(f2, 0.0))));
            }
        }
        Ok(Self { n, k, dim_s: basis.dim_s, lam1, lam2 })
    }

    pub fn direction(&self, a: usize, hframe: &[f64], lambda: (f64, f64)) -> CMat {
        let mut m = CMat::zeros(self.dim_s);
        if lambda.0 != 0.0 {
            for (pos, g) in &self.lam1[a] {
                m.add_scaled(C64::new(lambda.0 * hframe[*pos], 0.0), g);
            }
        }
        if lambda.1 != 0.0 {
            for (pos, g) in &self.lam2[a] {
                m.add_scaled(C64::new(lambda.1 * hframe[*pos], 0.0), g);
            }
        }
        m
    }

    pub fn assemble(&self, hframe: &[f64], lambda: (f64, f64)) -> FluxEndomorphism {
        let ends: Vec<CMat> = (0..self.n).map(|a| self.direction(a, hframe, lambda)).collect();
        let herm = ends.iter().map(hermitian_part).collect();
        FluxEndomorphism { ends, herm }
    }
}

pub fn hermitian_part(m: &CMat) -> CMat {
    let mut h = m.clone();
    h.add_scaled(C64::new(1.0, 0.0), &m.adjoint());
    h.scaled(C64::new(0.5, 0.0))
}

pub fn flux_endomorphism(
    basis: &GammaBasis,
    k: usize,
    hframe: &[f64],
    lambda: (f64, f64),
) -> Result<FluxEndomorphism> {
    let expected = IndexSet::new(basis.n, k).len();
    if hframe.len() != expected {
        return Err(Error::Shape(format!("expected {expected} flux components, got {}", hframe.len())));
    }
    Ok(FluxStencil::new(basis, k)?.assemble(hframe, lambda))
}

/// Whether the λ1 (`first = true`) or λ2 term of `(λ|H)_a` is Hermitian for degree `k`;
/// otherwise it is anti-Hermitian.
pub fn flux_term_is_hermitian(k: usize, first: bool) -> bool {
    let p = if first { k as i64 - 1 } else { k as i64 + 1 };
    matches!(p.rem_euclid(4), 0 | 1)
}
