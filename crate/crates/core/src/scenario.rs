//! Scenario presets and smooth random initial-data generators.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clifford::GammaBasis;
use crate::exterior::FormField;
use crate::flow::{FlowConfig, FlowState};
use crate::geometry::{frame_from_metric, Metric};
use crate::grid::{ComplexField, Grid, RealField};
use crate::multi_index::IndexSet;
use crate::{Error, Result};

/// Random trigonometric polynomial with wave numbers in `-2..=2` and coefficients in `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct SmoothFn {
    modes: Vec<(Vec<f64>, f64, f64)>,
}

impl SmoothFn {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, terms: usize) -> Self {
        let modes = (0..terms)
            .map(|_| {
                let k: Vec<f64> = (0..n).map(|_| rng.gen_range(-1i32..=1) as f64).collect();
                (k, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        Self { modes }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|(k, a, b)| {
                let t: f64 = k.iter().zip(x).map(|(ki, xi)| ki * xi).sum();
                a * t.cos() + b * t.sin()
            })
            .sum::<f64>()
            / self.modes.len() as f64
    }
}

fn scaled_coords(grid: &Grid, x: &[f64]) -> Vec<f64> {
    x.iter().zip(grid.lengths()).map(|(xi, l)| xi * 2.0 * std::f64::consts::PI / l).collect()
}

pub fn random_scalar(grid: &Grid, rng: &mut ChaCha8Rng, amp: f64) -> RealField {
    let f = SmoothFn::random(rng, grid.dim(), 4);
    RealField::scalar_fn(grid, |x| amp * f.eval(&scaled_coords(grid, x)))
}

/// Smooth symmetric 2-tensor with diagonal entries bounded by `amp` and off-diagonal by `amp/n`.
pub fn random_symmetric(grid: &Grid, rng: &mut ChaCha8Rng, amp: f64) -> RealField {
    let n = grid.dim();
    let fs: Vec<SmoothFn> = (0..n * (n + 1) / 2).map(|_| SmoothFn::random(rng, n, 4)).collect();
    RealField::from_fn(grid, n * n, |x, o| {
        let y = scaled_coords(grid, x);
        let mut c = 0;
        for i in 0..n {
            for j in i..n {
                let v = amp * fs[c].eval(&y) / if i == j { 1.0 } else { n as f64 };
                c += 1;
                o[i * n + j] = v;
                o[j * n + i] = v;
            }
        }
    })
}

/// `g = I + amp·S(x)` with `S` from [`random_symmetric`].
pub fn random_metric(grid: &Grid, rng: &mut ChaCha8Rng, amp: f64) -> Result<Metric> {
    let n = grid.dim();
    let mut g = random_symmetric(grid, rng, amp);
    g.data.chunks_mut(n * n).for_each(|m| (0..n).for_each(|i| m[i * n + i] += 1.0));
    Metric::new(g)
}

/// Smooth complex spinor field with components bounded by `amp`.
pub fn spinor_perturbation(grid: &Grid, dim_s: usize, rng: &mut ChaCha8Rng, amp: f64) -> ComplexField {
    let fs: Vec<(SmoothFn, SmoothFn)> =
        (0..dim_s).map(|_| (SmoothFn::random(rng, grid.dim(), 4), SmoothFn::random(rng, grid.dim(), 4))).collect();
    ComplexField::from_fn(grid, dim_s, |x, o| {
        let y = scaled_coords(grid, x);
        for (c, (fr, fi)) in fs.iter().enumerate() {
            o[c] = C64::new(fr.eval(&y), fi.eval(&y)) * amp;
        }
    })
}

/// `ψ = ψ₀ + amp·χ(x)` with a random unit constant `ψ₀` and smooth complex `χ`.
pub fn random_spinor(grid: &Grid, dim_s: usize, rng: &mut ChaCha8Rng, amp: f64) -> ComplexField {
    let mut base: Vec<C64> = (0..dim_s).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = base.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    base.iter_mut().for_each(|z| *z /= norm);
    let mut psi = spinor_perturbation(grid, dim_s, rng, amp);
    psi.data.chunks_mut(dim_s).for_each(|c| c.iter_mut().zip(&base).for_each(|(z, b)| *z += b));
    psi
}

pub fn random_form(grid: &Grid, degree: usize, rng: &mut ChaCha8Rng, amp: f64) -> Result<FormField> {
    let len = IndexSet::new(grid.dim(), degree).len();
    let fs: Vec<SmoothFn> = (0..len).map(|_| SmoothFn::random(rng, grid.dim(), 4)).collect();
    FormField::new(
        degree,
        RealField::from_fn(grid, len, |x, o| {
            let y = scaled_coords(grid, x);
            for (c, f) in fs.iter().enumerate() {
                o[c] = amp * f.eval(&y);
            }
        }),
    )
}

/// Initial-data generators.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    FlatStationary,
    PerturbedStationary { seed: u64, amplitude: f64 },
    RandomSmooth { seed: u64, amplitude: f64 },
    FromSnapshot(String),
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub sizes: Vec<usize>,
    pub generator: Generator,
    pub overrides: Vec<(String, String)>,
}

/// Unit constant spinor `(1, 0, …, 0)`.
pub fn unit_spinor(grid: &Grid, dim_s: usize) -> ComplexField {
    ComplexField::from_fn(grid, dim_s, |_, o| o[0] = C64::new(1.0, 0.0))
}

/// `φ = ln|ψ|`, so the normalization holds exactly.
pub fn normalizing_phi(psi: &ComplexField) -> RealField {
    RealField::from_nodes(&psi.grid, 1, |node, o| {
        o[0] = 0.5 * psi.node(node).iter().map(|z| z.norm_sqr()).sum::<f64>().ln();
    })
}

pub fn flat_stationary(grid: &Grid, basis: &GammaBasis, k: usize) -> Result<FlowState> {
    let metric = Metric::flat(grid);
    let frame = metric.g.clone();
    FlowState::new(metric.g, frame, unit_spinor(grid, basis.dim_s()), FormField::zeros(grid, k)?, RealField::constant(grid, 0.0))
}

/// Random smooth state; `amp` bounds the metric, spinor and flux perturbations.
pub fn random_state(grid: &Grid, basis: &GammaBasis, k: usize, seed: u64, amp: f64) -> Result<FlowState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let metric = random_metric(grid, &mut rng, amp)?;
    let psi = random_spinor(grid, basis.dim_s(), &mut rng, amp);
    let h = random_form(grid, k, &mut rng, amp)?;
    let frame = frame_from_metric(&metric.g)?;
    let phi = normalizing_phi(&psi);
    FlowState::new(metric.g, frame, psi, h, phi)
}

/// Flat-stationary data plus a small smooth perturbation of the metric and spinor (H stays zero).
pub fn perturbed_stationary(grid: &Grid, basis: &GammaBasis, k: usize, seed: u64, amp: f64) -> Result<FlowState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let metric = random_metric(grid, &mut rng, amp)?;
    let psi = unit_spinor(grid, basis.dim_s()).add(&spinor_perturbation(grid, basis.dim_s(), &mut rng, amp));
    let frame = frame_from_metric(&metric.g)?;
    let phi = normalizing_phi(&psi);
    FlowState::new(metric.g, frame, psi, FormField::zeros(grid, k)?, phi)
}

impl Scenario {
    /// Built-in presets: `t2` (n=2, k=1, 64²), `t3` (n=3, k=1, c=0, 32³), `t5` (n=5, k=2, 6⁵).
    pub fn preset(name: &str) -> Result<Self> {
        let (n, k, size) = match name {
            "t2" => (2, 1, 64),
            "t3" => (3, 1, 32),
            "t5" => (5, 2, 6),
            _ => return Err(Error::Config(format!("unknown scenario preset `{name}`"))),
        };
        Ok(Self {
            name: name.into(),
            n,
            k,
            sizes: vec![size; n],
            generator: Generator::RandomSmooth { seed: 1, amplitude: 0.05 },
            overrides: Vec::new(),
        })
    }

    pub fn initial_state(&self, grid: &Grid, basis: &GammaBasis, config: &FlowConfig) -> Result<FlowState> {
        let _ = config;
        let state = match &self.generator {
            Generator::FlatStationary => flat_stationary(grid, basis, self.k)?,
            Generator::PerturbedStationary { seed, amplitude } => perturbed_stationary(grid, basis, self.k, *seed, *amplitude)?,
            Generator::RandomSmooth { seed, amplitude } => random_state(grid, basis, self.k, *seed, *amplitude)?,
            Generator::FromSnapshot(path) => crate::snapshot::read_state(std::path::Path::new(path))?,
        };
        check_initial(&state)?;
        Ok(state)
    }
}

/// Initial data must have SPD metric and `|ψ| ≥ 0.1` everywhere.
pub fn check_initial(state: &FlowState) -> Result<()> {
    Metric::new(state.g.clone())?;
    for node in 0..state.psi.node_count() {
        let m = state.psi.node(node).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if m < 0.1 {
            return Err(Error::Config(format!("initial spinor has |ψ| = {m:.3e} < 0.1 at node {node}")));
        }
    }
    Ok(())
}
