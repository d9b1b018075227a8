use crate::exterior::FormField;
use crate::grid::{ComplexField, Grid, RealField};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub g: RealField,
    pub frame: RealField,
    pub psi: ComplexField,
    pub h: FormField,
    pub phi: RealField,
    pub t: f64,
}

/// Time derivative of every evolved field; `frame` is the transport velocity `−½ġ♯E`.
#[derive(Clone, Debug)]
pub struct Tangent {
    pub g: RealField,
    pub frame: RealField,
    pub psi: ComplexField,
    pub h: FormField,
    pub phi: RealField,
}

impl FlowState {
    pub fn new(g: RealField, frame: RealField, psi: ComplexField, h: FormField, phi: RealField) -> Result<Self> {
        let grid = g.grid.clone();
        let n = grid.dim();
        let same = frame.grid == grid && psi.grid == grid && *h.grid() == grid && phi.grid == grid;
        if !same {
            return Err(Error::Shape("state fields live on different grids".into()));
        }
        if g.ncomp != n * n || frame.ncomp != n * n || phi.ncomp != 1 {
            return Err(Error::Shape("metric/frame need n² and φ one component per node".into()));
        }
        if psi.ncomp != 1 << (n / 2) {
            return Err(Error::Shape(format!("spinor needs {} components, got {}", 1 << (n / 2), psi.ncomp)));
        }
        Ok(Self { g, frame, psi, h, phi, t: 0.0 })
    }

    pub fn grid(&self) -> &Grid {
        &self.g.grid
    }

    pub fn dim(&self) -> usize {
        self.g.grid.dim()
    }

    pub fn degree(&self) -> usize {
        self.h.degree
    }

    /// `‖e^{-2φ}|ψ|² − 1‖∞`.
    pub fn normalization_residual(&self) -> f64 {
        (0..self.psi.node_count())
            .map(|i| {
                let m: f64 = self.psi.node(i).iter().map(|z| z.norm_sqr()).sum();
                ((-2.0 * self.phi.data[i]).exp() * m - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `self + s·v` for all fields (time advanced by `s` as well).
    pub fn advanced(&self, s: f64, v: &Tangent) -> Self {
        let mut out = self.clone();
        out.g.axpy(s, &v.g);
        out.frame.axpy(s, &v.frame);
        out.psi.axpy(s, &v.psi);
        out.h.field.axpy(s, &v.h.field);
        out.phi.axpy(s, &v.phi);
        out.t += s;
        out
    }

    /// Largest entrywise difference across all fields.
    pub fn max_diff(&self, other: &Self) -> f64 {
        [
            self.g.sub(&other.g).max_abs(),
            self.frame.sub(&other.frame).max_abs(),
            self.psi.sub(&other.psi).max_abs(),
            self.h.field.sub(&other.h.field).max_abs(),
            self.phi.sub(&other.phi).max_abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl Tangent {
    pub fn max_abs(&self) -> f64 {
        [self.g.max_abs(), self.psi.max_abs(), self.h.field.max_abs(), self.phi.max_abs()].into_iter().fold(0.0, f64::max)
    }

    /// `Σ wᵢ·vᵢ`, used for the RK4 combination.
    pub fn combine(parts: &[(f64, &Tangent)]) -> Tangent {
        let (w0, t0) = parts[0];
        let mut out = Tangent {
            g: t0.g.scaled(w0),
            frame: t0.frame.scaled(w0),
            psi: t0.psi.scaled(w0),
            h: t0.h.scaled(w0),
            phi: t0.phi.scaled(w0),
        };
        for &(w, t) in &parts[1..] {
            out.g.axpy(w, &t.g);
            out.frame.axpy(w, &t.frame);
            out.psi.axpy(w, &t.psi);
            out.h.field.axpy(w, &t.h.field);
            out.phi.axpy(w, &t.phi);
        }
        out
    }
}
