use num_complex::Complex64 as C64;

use crate::clifford::GammaBasis;
use crate::linalg::{inner, norm_sqr, sym_eigen, CMat};
use crate::{Error, Result};

/// Principal symbol of the `(g, ψ)` evolution at one node along a unit covector `ξ`.
/// Symmetrization `{pℓ}` is the average of the two orderings.
pub struct SymbolMap {
    n: usize,
    psi: Vec<C64>,
    phi: f64,
    xi: Vec<f64>,
    gauged: bool,
    /// `γ^{ab}` at `a*n+b` (zero on the diagonal).
    pairs: Vec<CMat>,
}

pub fn symbol_operator(basis: &GammaBasis, psi: &[C64], phi: f64, xi: &[f64], gauged: bool) -> Result<SymbolMap> {
    let n = basis.n();
    if xi.len() != n || psi.len() != basis.dim_s() {
        return Err(Error::Shape(format!("symbol needs ξ ∈ R^{n} and a {}-component spinor", basis.dim_s())));
    }
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Dimension("symbol evaluated at ξ = 0".into()));
    }
    let xi: Vec<f64> = xi.iter().map(|x| x / norm).collect();
    let d = basis.dim_s();
    let mut pairs = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            pairs.push(match a.cmp(&b) {
                std::cmp::Ordering::Equal => CMat::zeros(d),
                std::cmp::Ordering::Less => basis.cached(&[a, b]).clone(),
                std::cmp::Ordering::Greater => basis.cached(&[b, a]).scaled(C64::new(-1.0, 0.0)),
            });
        }
    }
    Ok(SymbolMap { n, psi: psi.to_vec(), phi, xi, gauged, pairs })
}

impl SymbolMap {
    pub fn dim_s(&self) -> usize {
        self.psi.len()
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    fn u_xi(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|p| (0..n).map(|b| u[p * n + b] * self.xi[b]).sum()).collect()
    }

    /// `Σ_{a,b} ξ_a v_b γ^{ab}ψ`.
    fn w_psi(&self, v: &[f64]) -> Vec<C64> {
        let n = self.n;
        let mut out = vec![C64::new(0.0, 0.0); self.dim_s()];
        for a in 0..n {
            for b in 0..n {
                let c = self.xi[a] * v[b];
                if c != 0.0 && a != b {
                    self.pairs[a * n + b].apply_acc(C64::new(c, 0.0), &self.psi, &mut out);
                }
            }
        }
        out
    }

    /// The block map `(u, σ) ↦ (U, Σ)`; `u` is a symmetric `n×n` array.
    pub fn apply(&self, u: &[f64], sigma: &[C64]) -> (Vec<f64>, Vec<C64>) {
        let n = self.n;
        let w = (-2.0 * self.phi).exp();
        let rho = w * norm_sqr(&self.psi);
        let v = self.u_xi(u);
        // s_ℓ = Σ_m ξ_m Re⟨γ^{mℓ}ψ, σ⟩
        let s: Vec<f64> = (0..n)
            .map(|l| (0..n).map(|m| self.xi[m] * inner(&self.pairs[m * n + l].apply(&self.psi), sigma).re).sum())
            .collect();
        let mut big_u = vec![0.0; n * n];
        for p in 0..n {
            for l in 0..n {
                let sym_xu = 0.5 * (self.xi[l] * v[p] + self.xi[p] * v[l]);
                let mut val = rho / 16.0 * (u[p * n + l] - sym_xu);
                val -= 0.25 * w * 0.5 * (s[l] * self.xi[p] + s[p] * self.xi[l]);
                if self.gauged {
                    val += 4.0 * sym_xu;
                }
                big_u[p * n + l] = val;
            }
        }
        let coef = if self.gauged { 0.25 } else { -0.25 };
        let wp = self.w_psi(&v);
        let big_s: Vec<C64> = sigma.iter().zip(&wp).map(|(s, x)| s + x * coef).collect();
        (big_u, big_s)
    }

    /// `Re[e^{2φ}Σ u_{pℓ}U_{pℓ} + ⟨σ, Σ⟩]` for `(U, Σ) = S(u', σ')`.
    pub fn bilinear(&self, u: &[f64], sigma: &[C64], u2: &[f64], sigma2: &[C64]) -> f64 {
        let (bu, bs) = self.apply(u2, sigma2);
        let e2 = (2.0 * self.phi).exp();
        e2 * u.iter().zip(&bu).map(|(a, b)| a * b).sum::<f64>() + inner(sigma, &bs).re
    }

    pub fn pairing(&self, u: &[f64], sigma: &[C64]) -> f64 {
        self.bilinear(u, sigma, u, sigma)
    }

    /// `e^{2φ}(|ξ|²|u|² + (63/8)|u(ξ,·)|²) + |ξ|²|σ|²`.
    pub fn printed_pairing(&self, u: &[f64], sigma: &[C64]) -> f64 {
        let e2 = (2.0 * self.phi).exp();
        let uu: f64 = u.iter().map(|x| x * x).sum();
        let v = self.u_xi(u);
        let vv: f64 = v.iter().map(|x| x * x).sum();
        e2 * (uu + 63.0 / 8.0 * vv) + norm_sqr(sigma)
    }

    /// Closed form of the gauged pairing under averaged symmetrization:
    /// `e^{2φ}(ρ/16)(|u|² − |uξ|²) + 4e^{2φ}|uξ|² + |σ|²`, `ρ = e^{-2φ}|ψ|²`; the cross terms cancel.
    pub fn derived_pairing(&self, u: &[f64], sigma: &[C64]) -> f64 {
        let e2 = (2.0 * self.phi).exp();
        let rho = (-2.0 * self.phi).exp() * norm_sqr(&self.psi);
        let uu: f64 = u.iter().map(|x| x * x).sum();
        let v = self.u_xi(u);
        let vv: f64 = v.iter().map(|x| x * x).sum();
        e2 * rho / 16.0 * (uu - vv) + 4.0 * e2 * vv + norm_sqr(sigma)
    }

    fn unit(&self, i: usize) -> (Vec<f64>, Vec<C64>) {
        let n = self.n;
        let nu = n * (n + 1) / 2;
        let mut u = vec![0.0; n * n];
        let mut s = vec![C64::new(0.0, 0.0); self.dim_s()];
        if i < nu {
            let mut c = 0;
            for p in 0..n {
                for l in p..n {
                    if c == i {
                        u[p * n + l] = 1.0;
                        u[l * n + p] = 1.0;
                    }
                    c += 1;
                }
            }
        } else {
            let j = i - nu;
            s[j / 2] = if j % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) };
        }
        (u, s)
    }

    /// Symmetric part of the pairing form in the real coordinates `(u_{p≤ℓ}, Re σ, Im σ)`.
    pub fn quadratic_form(&self) -> (usize, Vec<f64>) {
        let dim = self.n * (self.n + 1) / 2 + 2 * self.dim_s();
        let units: Vec<_> = (0..dim).map(|i| self.unit(i)).collect();
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                m[i * dim + j] = self.bilinear(&units[i].0, &units[i].1, &units[j].0, &units[j].1);
            }
        }
        let mut sym = m.clone();
        for i in 0..dim {
            for j in 0..dim {
                sym[i * dim + j] = 0.5 * (m[i * dim + j] + m[j * dim + i]);
            }
        }
        (dim, sym)
    }

    /// Ascending eigenvalues of [`Self::quadratic_form`].
    pub fn spectrum(&self) -> Vec<f64> {
        let (dim, m) = self.quadratic_form();
        let mut ev = sym_eigen(&m, dim).0;
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }
}
