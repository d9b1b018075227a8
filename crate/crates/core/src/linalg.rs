//! Small dense matrices: complex spinor endomorphisms and per-node real n×n kernels.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

/// Dense complex square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self { dim, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        let d = self.dim;
        let mut out = CMat::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMat {
        let d = self.dim;
        let mut out = CMat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        out
    }

    pub fn scaled(&self, s: C64) -> CMat {
        CMat { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add_scaled(&mut self, s: C64, other: &CMat) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        let mut out = self.clone();
        out.add_scaled(C64::new(-1.0, 0.0), other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `out += coef · self · v`
    #[inline]
    pub fn apply_acc(&self, coef: C64, v: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            let mut s = C64::new(0.0, 0.0);
            for j in 0..d {
                s += row[j] * v[j];
            }
            out[i] += coef * s;
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.apply_acc(C64::new(1.0, 0.0), v, &mut out);
        out
    }
}

/// Hermitian inner product, conjugate-linear in the first slot.
#[inline]
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::new(0.0, 0.0), |s, (x, y)| s + x.conj() * y)
}

#[inline]
pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

pub fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(a: &[f64], n: usize) -> f64 {
    match n {
        0 => return 1.0,
        1 => return a[0],
        2 => return a[0] * a[3] - a[1] * a[2],
        _ => {}
    }
    let mut m = a.to_vec();
    let mut d = 1.0;
    for c in 0..n {
        let mut piv = c;
        for r in c + 1..n {
            if m[r * n + c].abs() > m[piv * n + c].abs() {
                piv = r;
            }
        }
        if m[piv * n + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for j in 0..n {
                m.swap(c * n + j, piv * n + j);
            }
            d = -d;
        }
        let p = m[c * n + c];
        d *= p;
        for r in c + 1..n {
            let f = m[r * n + c] / p;
            if f != 0.0 {
                for j in c..n {
                    m[r * n + j] -= f * m[c * n + j];
                }
            }
        }
    }
    d
}

/// Determinant of the submatrix `a[rows, cols]` of an n×n row-major matrix.
pub fn minor(a: &[f64], n: usize, rows: &[usize], cols: &[usize]) -> f64 {
    let p = rows.len();
    let mut sub = [0.0f64; 144];
    let mut heap;
    let buf: &mut [f64] = if p * p <= 144 {
        &mut sub[..p * p]
    } else {
        heap = vec![0.0; p * p];
        &mut heap
    };
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            buf[r * p + c] = a[i * n + j];
        }
    }
    det(buf, p)
}

pub fn inverse(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, a);
    m.try_inverse().map(|inv| transpose(inv.as_slice(), n))
}

/// Eigen-decomposition of a symmetric matrix: eigenvalues and row-major eigenvector matrix (columns).
pub fn sym_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let m = DMatrix::from_row_slice(n, n, a);
    let eig = SymmetricEigen::new(m);
    let vecs = transpose(eig.eigenvectors.as_slice(), n);
    (eig.eigenvalues.as_slice().to_vec(), vecs)
}

/// `f(A)` for symmetric A via its eigen-decomposition.
pub fn sym_fn(a: &[f64], n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let (vals, v) = sym_eigen(a, n);
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        let fk = f(vals[k]);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] += v[i * n + k] * fk * v[j * n + k];
            }
        }
    }
    out
}

pub fn min_eigenvalue(a: &[f64], n: usize) -> f64 {
    sym_eigen(a, n).0.into_iter().fold(f64::INFINITY, f64::min)
}

/// Cholesky-based SPD test (faster than an eigen-solve).
pub fn is_spd(a: &[f64], n: usize, tol: f64) -> bool {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut s = a[j * n + j];
        for k in 0..j {
            s -= l[j * n + k] * l[j * n + k];
        }
        if !(s > tol) {
            return false;
        }
        let d = s.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    true
}
