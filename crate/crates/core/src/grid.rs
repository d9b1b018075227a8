//! Periodic structured grids, central-difference partials and discrete integration.
//!
//! Storage is row-major over nodes (last axis fastest) and, within a node, contiguous
//! over components. Both stencils are antisymmetric, so every partial is exactly
//! skew-adjoint under the unweighted node sum.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::{Error, Result};

pub const MIN_NODES: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    sizes: Vec<usize>,
    lengths: Vec<f64>,
    order: usize,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(sizes: Vec<usize>, lengths: Vec<f64>, order: usize) -> Result<Self> {
        let n = sizes.len();
        if n == 0 || n != lengths.len() {
            return Err(Error::Dimension(format!("grid needs matching sizes/lengths, got {} and {}", n, lengths.len())));
        }
        if let Some(s) = sizes.iter().find(|&&s| s < MIN_NODES) {
            return Err(Error::Shape(format!("axis with {s} nodes; periodic stencils need at least {MIN_NODES}")));
        }
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::Shape("grid lengths must be positive".into()));
        }
        if order != 2 && order != 4 {
            return Err(Error::Config(format!("stencil order {order} not in {{2, 4}}")));
        }
        let mut strides = vec![1usize; n];
        for i in (0..n - 1).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1];
        }
        Ok(Self { n, sizes, lengths, order, strides })
    }

    /// `n`-torus of period 2π with `size` nodes per axis.
    pub fn cubic(n: usize, size: usize, order: usize) -> Result<Self> {
        Self::new(vec![size; n], vec![2.0 * PI; n], order)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.sizes[axis] as f64
    }

    pub fn node_count(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.n).map(|i| self.spacing(i)).product()
    }

    pub fn multi(&self, node: usize) -> Vec<usize> {
        (0..self.n).map(|i| (node / self.strides[i]) % self.sizes[i]).collect()
    }

    pub fn node_of(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(m, s)| m * s).sum()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        (0..self.n).map(|i| ((node / self.strides[i]) % self.sizes[i]) as f64 * self.spacing(i)).collect()
    }

    /// Node reached from `node` by `offset` steps along `axis`, with wraparound.
    #[inline]
    pub fn shift(&self, node: usize, axis: usize, offset: isize) -> usize {
        let s = self.sizes[axis] as isize;
        let st = self.strides[axis];
        let c = ((node / st) % self.sizes[axis]) as isize;
        let nc = (c + offset).rem_euclid(s);
        (node as isize + (nc - c) * st as isize) as usize
    }

    /// Stencil offsets and weights (already divided by the spacing) for ∂_axis.
    pub fn stencil(&self, axis: usize) -> Vec<(isize, f64)> {
        let h = self.spacing(axis);
        match self.order {
            2 => vec![(1, 0.5 / h), (-1, -0.5 / h)],
            _ => vec![(1, 8.0 / (12.0 * h)), (-1, -8.0 / (12.0 * h)), (2, -1.0 / (12.0 * h)), (-2, 1.0 / (12.0 * h))],
        }
    }

    /// Discrete symbol `σ(m)` of the stencil on `e^{i m x}`: ∂ ↦ i·σ(m).
    pub fn symbol(&self, axis: usize, m: f64) -> f64 {
        let h = self.spacing(axis);
        match self.order {
            2 => (m * h).sin() / h,
            _ => (8.0 * (m * h).sin() - (2.0 * m * h).sin()) / (6.0 * h),
        }
    }
}

pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Mul<f64, Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
    fn is_finite_val(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn is_finite_val(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn is_finite_val(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    pub grid: Grid,
    pub ncomp: usize,
    pub data: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<C64>;

impl<T: Scalar> Field<T> {
    pub fn zeros(grid: &Grid, ncomp: usize) -> Self {
        Self { grid: grid.clone(), ncomp, data: vec![T::zero(); grid.node_count() * ncomp] }
    }

    /// Fills each node's components from its coordinates.
    pub fn from_fn(grid: &Grid, ncomp: usize, f: impl Fn(&[f64], &mut [T]) + Sync) -> Self {
        let mut out = Self::zeros(grid, ncomp);
        out.data.par_chunks_mut(ncomp.max(1)).enumerate().for_each(|(node, chunk)| {
            let x = grid.coords(node);
            f(&x, chunk);
        });
        out
    }

    /// Node-parallel map producing `ncomp_out` components per node from the node index.
    pub fn from_nodes(grid: &Grid, ncomp: usize, f: impl Fn(usize, &mut [T]) + Sync) -> Self {
        let mut out = Self::zeros(grid, ncomp);
        if ncomp > 0 {
            out.data.par_chunks_mut(ncomp).enumerate().for_each(|(node, chunk)| f(node, chunk));
        }
        out
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[T] {
        &self.data[i * self.ncomp..(i + 1) * self.ncomp]
    }

    #[inline]
    pub fn node_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.ncomp..(i + 1) * self.ncomp]
    }

    pub fn node_count(&self) -> usize {
        self.grid.node_count()
    }

    /// Central-difference partial derivative along `axis` (zero-based), componentwise.
    pub fn partial(&self, axis: usize) -> Result<Self> {
        if axis >= self.grid.dim() {
            return Err(Error::Index(format!("axis {axis} out of range for n = {}", self.grid.dim())));
        }
        Ok(self.partial_unchecked(axis))
    }

    pub(crate) fn partial_unchecked(&self, axis: usize) -> Self {
        let st = self.grid.stencil(axis);
        let nc = self.ncomp;
        Self::from_nodes(&self.grid, nc, |node, out| {
            for &(off, w) in &st {
                let src = self.node(self.grid.shift(node, axis, off));
                for c in 0..nc {
                    out[c] += src[c] * w;
                }
            }
        })
    }

    /// All `n` partials.
    pub fn gradient(&self) -> Vec<Self> {
        (0..self.grid.dim()).map(|a| self.partial_unchecked(a)).collect()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.par_iter_mut().for_each(|x| *x = *x * s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += s · other`
    pub fn axpy(&mut self, s: f64, other: &Self) {
        assert_eq!(self.data.len(), other.data.len(), "field shape mismatch");
        self.data.par_iter_mut().zip(other.data.par_iter()).for_each(|(a, &b)| *a += b * s);
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.magnitude()))
    }

    /// First non-finite entry, as (node, component).
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|x| !x.is_finite_val())
            .map(|i| (i / self.ncomp.max(1), i % self.ncomp.max(1)))
    }

    /// Per-node Euclidean norm.
    pub fn node_norms(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|i| self.node(i).iter().map(|x| x.magnitude().powi(2)).sum::<f64>().sqrt())
            .collect()
    }
}

impl RealField {
    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self { grid: grid.clone(), ncomp: 1, data: vec![value; grid.node_count()] }
    }

    pub fn scalar_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        Self::from_fn(grid, 1, |x, out| out[0] = f(x))
    }

    pub fn component(&self, c: usize) -> RealField {
        Self::from_nodes(&self.grid, 1, |i, out| out[0] = self.data[i * self.ncomp + c])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> RealField {
        Self { grid: self.grid.clone(), ncomp: self.ncomp, data: self.data.par_iter().map(|&x| f(x)).collect() }
    }

    pub fn mul_pointwise(&self, other: &RealField) -> RealField {
        assert_eq!(other.ncomp, 1);
        let nc = self.ncomp;
        Self::from_nodes(&self.grid, nc, |i, out| {
            for c in 0..nc {
                out[c] = self.data[i * nc + c] * other.data[i];
            }
        })
    }
}

/// `Σ_nodes f·density·Πh`, summed sequentially in node order.
pub fn integrate(f: &RealField, density: &RealField) -> Result<f64> {
    if f.grid != density.grid || f.ncomp != 1 || density.ncomp != 1 {
        return Err(Error::Shape("integrate needs scalar fields on a shared grid".into()));
    }
    let s: f64 = f.data.iter().zip(&density.data).map(|(a, b)| a * b).sum();
    Ok(s * f.grid.cell_volume())
}

/// Unweighted sum `Σ (∂a)·b + Σ a·(∂b)`; zero up to rounding for skew-adjoint stencils.
pub fn sbp_check(a: &RealField, b: &RealField, axis: usize) -> Result<f64> {
    if a.grid != b.grid || a.ncomp != 1 || b.ncomp != 1 {
        return Err(Error::Shape("sbp_check needs scalar fields on a shared grid".into()));
    }
    let da = a.partial(axis)?;
    let db = b.partial(axis)?;
    Ok(da.data.iter().zip(&b.data).map(|(x, y)| x * y).sum::<f64>()
        + a.data.iter().zip(&db.data).map(|(x, y)| x * y).sum::<f64>())
}
