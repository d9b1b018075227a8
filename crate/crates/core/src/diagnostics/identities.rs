use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::monitors::bochner_residual;
use crate::exterior::{codifferential, d, hodge_star, l2_inner, wedge, FormField};
use crate::flow::{FlowConfig, FlowState, FlowSystem, Gauge};
use crate::geometry::{christoffels, riemann_lowered, curvature, rotate_phase, variation_riemann, Metric};
use crate::grid::{ComplexField, Field, Grid, RealField, Scalar};
use crate::linalg::inner;
use crate::scenario::{random_form, random_symmetric};
use crate::spin::{bg_transport, flux_conn_variation, nabla_h, spin_connection};
use crate::{Error, Result};

/// Tolerance for identities that hold to rounding.
pub const EXACT_TOL: f64 = 1e-11;

/// Accepted deviation of the observed order from the stencil order.
const ORDER_TOL: f64 = 0.2;

const FD_EPS: f64 = 1e-4;

pub const IDENTITIES: [&str; 12] = [
    "trace",
    "h_energy",
    "l_pairing",
    "scaling",
    "dd_adjoint",
    "connection_energy",
    "phase",
    "q_ricci",
    "bochner",
    "variation_rm",
    "variation_fluxconn",
    "normalization_ode",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdentityClass {
    /// Holds to rounding on any grid.
    Exact,
    /// Both sides agree up to the truncation error of the stencil.
    Stencil,
}

#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub name: String,
    pub class: IdentityClass,
    pub lhs: f64,
    pub rhs: f64,
    /// Exact class: `|lhs − rhs| / max(1, |lhs|, |rhs|)`. Stencil class: residual on the finest grid.
    pub residual: f64,
    /// Stencil class: `(nodes per axis, residual)` from coarse to fine.
    pub levels: Vec<(usize, f64)>,
    /// Stencil class: least-squares slope of `log residual` against `log h`.
    pub order: Option<f64>,
    pub pass: bool,
}

impl IdentityReport {
    fn exact(name: &str, lhs: f64, rhs: f64) -> Self {
        let residual = (lhs - rhs).abs() / 1f64.max(lhs.abs()).max(rhs.abs());
        Self {
            name: name.into(),
            class: IdentityClass::Exact,
            lhs,
            rhs,
            residual,
            levels: Vec::new(),
            order: None,
            pass: residual <= EXACT_TOL,
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "name": self.name,
            "class": match self.class { IdentityClass::Exact => "exact", IdentityClass::Stencil => "stencil" },
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "levels": self.levels,
            "order": self.order,
            "pass": self.pass,
        })
        .to_string()
    }
}

fn relative(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

/// Samples `state` on every `factor`-th node of each axis (same torus, same smooth fields).
pub fn coarsen_state(state: &FlowState, factor: usize) -> Result<FlowState> {
    let fine = state.grid();
    if fine.sizes().iter().any(|&s| s % factor != 0) {
        return Err(Error::Shape(format!("grid {:?} not divisible by {factor}", fine.sizes())));
    }
    let coarse = Grid::new(fine.sizes().iter().map(|s| s / factor).collect(), fine.lengths().to_vec(), fine.order())?;
    fn pick<T: Scalar>(f: &Field<T>, fine: &Grid, coarse: &Grid, factor: usize) -> Field<T> {
        Field::from_nodes(coarse, f.ncomp, |node, out| {
            let m: Vec<usize> = coarse.multi(node).iter().map(|x| x * factor).collect();
            out.copy_from_slice(f.node(fine.node_of(&m)));
        })
    }
    let mut out = FlowState::new(
        pick(&state.g, fine, &coarse, factor),
        pick(&state.frame, fine, &coarse, factor),
        pick(&state.psi, fine, &coarse, factor),
        FormField::new(state.h.degree, pick(&state.h.field, fine, &coarse, factor))?,
        pick(&state.phi, fine, &coarse, factor),
    )?;
    out.t = state.t;
    Ok(out)
}

/// `(σg, σ^{-1/2}E, ψ, σ^{(k−1)/2}H, φ)` at time `σt`.
pub fn scaled_state(state: &FlowState, sigma: f64) -> FlowState {
    let k = state.degree() as f64;
    let mut s = state.clone();
    s.g.scale(sigma);
    s.frame.scale(sigma.powf(-0.5));
    s.h.field.scale(sigma.powf(0.5 * (k - 1.0)));
    s.t = sigma * state.t;
    s
}

/// Largest relative deviation of `rhs(scaled state)` from the weighted `rhs(state)`, weights
/// `(ġ: 1, Ė: σ^{-3/2}, ψ̇: σ^{-1}, Ḣ: σ^{(k−1)/2−1}, φ̇: σ^{-1})`.
pub fn scaling_residual(sys: &FlowSystem, state: &FlowState, sigma: f64) -> Result<f64> {
    let k = state.degree() as f64;
    let base = sys.rhs(state)?;
    let scaled = sys.rhs(&scaled_state(state, sigma))?;
    let rel = |a: &RealField, b: &RealField, w: f64| relative(a.sub(&b.scaled(w)).max_abs(), b.max_abs() * w);
    Ok([
        rel(&scaled.g, &base.g, 1.0),
        rel(&scaled.frame, &base.frame, sigma.powf(-1.5)),
        relative(scaled.psi.sub(&base.psi.scaled(1.0 / sigma)).max_abs(), base.psi.max_abs() / sigma),
        rel(&scaled.h.field, &base.h.field, sigma.powf(0.5 * (k - 1.0) - 1.0)),
        rel(&scaled.phi, &base.phi, 1.0 / sigma),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

fn ungauged(config: &FlowConfig) -> FlowConfig {
    FlowConfig { gauge: Gauge::None, ..config.clone() }
}

fn trace_identity(sys: &FlowSystem, state: &FlowState) -> Result<IdentityReport> {
    let n = sys.dim();
    let kin = sys.kinematics(state)?;
    let gf = sys.metric_rate_frame(&kin, state);
    let energy = sys.grad_energy_density(&kin);
    let cv = state.grid().cell_volume();
    let pref = sys.config.c1 / 2.0 - n as f64 * sys.config.c2 / 4.0;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for node in 0..state.phi.node_count() {
        let w = kin.metric.sqrtg.data[node] * (2.0 * state.phi.data[node]).exp() * cv;
        lhs += w * (0..n).map(|p| gf.node(node)[p * n + p]).sum::<f64>();
        rhs += w * pref * energy.data[node];
    }
    Ok(IdentityReport::exact("trace", lhs, rhs))
}

fn h_energy(sys: &FlowSystem, state: &FlowState) -> Result<IdentityReport> {
    let metric = Metric::new(state.g.clone())?;
    let hdot = sys.h_rate(state, &metric)?;
    let lhs = -l2_inner(&hdot, &state.h, &metric);
    let s = sys.flux_residual(state, &metric)?;
    let mut rhs = l2_inner(&s, &s, &metric);
    if sys.degree() < sys.dim() {
        let dh = d(&state.h)?;
        rhs += l2_inner(&dh, &dh, &metric);
    }
    Ok(IdentityReport::exact("h_energy", lhs, rhs))
}

fn l_pairing(sys: &FlowSystem, state: &FlowState) -> Result<IdentityReport> {
    let metric = Metric::new(state.g.clone())?;
    let l = sys.l_of_h(state)?;
    let s = sys.flux_residual(state, &metric)?;
    let c = sys.config.c;
    let mut worst = IdentityReport::exact("l_pairing", 0.0, 0.0);
    for i in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1a00 + i);
        let beta = random_form(state.grid(), state.degree(), &mut rng, 1.0)?;
        let lhs = l2_inner(&l, &beta, &metric);
        let rhs = if c == 0.0 {
            0.0
        } else {
            let sym = wedge(&beta, &state.h)?.add(&wedge(&state.h, &beta)?);
            0.5 * l2_inner(&hodge_star(&sym, &metric)?.scaled(c), &s, &metric)
        };
        let r = IdentityReport::exact("l_pairing", lhs, rhs);
        if r.residual >= worst.residual {
            worst = r;
        }
    }
    Ok(worst)
}

fn dd_adjoint(state: &FlowState) -> Result<IdentityReport> {
    let metric = Metric::new(state.g.clone())?;
    let k = state.degree();
    let mut rng = ChaCha8Rng::seed_from_u64(0xadd);
    let alpha = random_form(state.grid(), k - 1, &mut rng, 1.0)?;
    let beta = random_form(state.grid(), k, &mut rng, 1.0)?;
    let lhs = l2_inner(&d(&alpha)?, &beta, &metric);
    let rhs = l2_inner(&alpha, &codifferential(&beta, &metric)?, &metric);
    Ok(IdentityReport::exact("dd_adjoint", lhs, rhs))
}

fn connection_energy(sys: &FlowSystem, state: &FlowState) -> Result<IdentityReport> {
    let kin = sys.kinematics(state)?;
    let lap = kin.flux.adjoint(&kin.nabla_h);
    let energy = sys.grad_energy_density(&kin);
    let cv = state.grid().cell_volume();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for node in 0..state.psi.node_count() {
        let w = kin.metric.sqrtg.data[node] * cv;
        lhs += w * inner(lap.node(node), state.psi.node(node)).re;
        rhs += w * energy.data[node];
    }
    Ok(IdentityReport::exact("connection_energy", lhs, rhs))
}

fn phase(sys: &FlowSystem, state: &FlowState) -> Result<IdentityReport> {
    let theta = 0.7;
    let base = sys.rhs(state)?;
    let mut rotated = state.clone();
    rotated.psi = rotate_phase(&state.psi, theta);
    let rot = sys.rhs(&rotated)?;
    let diff = [
        rot.g.sub(&base.g).max_abs(),
        rot.psi.sub(&rotate_phase(&base.psi, theta)).max_abs(),
        rot.h.field.sub(&base.h.field).max_abs(),
        rot.phi.sub(&base.phi).max_abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let scale = base.max_abs();
    let mut r = IdentityReport::exact("phase", scale, scale);
    r.residual = relative(diff, scale);
    r.pass = r.residual <= EXACT_TOL;
    Ok(r)
}

type StencilFn = fn(&FlowSystem, &FlowState) -> Result<(f64, f64, f64)>;

/// `(sup|lhs|, sup|rhs|, sup|lhs − rhs|)` for `Re Q^H` against its Ricci form.
fn q_ricci(sys: &FlowSystem, state: &FlowState) -> Result<(f64, f64, f64)> {
    let q = sys.q_tensor(state)?;
    let qr = sys.q_via_ricci(state)?;
    let re = RealField::from_nodes(state.grid(), q.ncomp, |node, out| {
        for (o, z) in out.iter_mut().zip(q.node(node)) {
            *o = z.re;
        }
    });
    Ok((re.max_abs(), qr.max_abs(), re.sub(&qr).max_abs()))
}

fn bochner(sys: &FlowSystem, state: &FlowState) -> Result<(f64, f64, f64)> {
    let metric = Metric::new(state.g.clone())?;
    let r = bochner_residual(sys.basis(), &metric, &state.frame, &state.psi);
    Ok((r, 0.0, r))
}

fn variation_direction(grid: &Grid) -> RealField {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1ec);
    random_symmetric(grid, &mut rng, 0.2)
}

fn variation_rm(_: &FlowSystem, state: &FlowState) -> Result<(f64, f64, f64)> {
    let metric = Metric::new(state.g.clone())?;
    let u = variation_direction(state.grid());
    let analytic = variation_riemann(&metric, &u);
    let rm_at = |s: f64| -> Result<RealField> {
        let m = Metric::new(state.g.add(&u.scaled(s)))?;
        let gm = christoffels(&m);
        Ok(riemann_lowered(&m, &curvature(&m, &gm)))
    };
    let fd = rm_at(FD_EPS)?.sub(&rm_at(-FD_EPS)?).scaled(0.5 / FD_EPS);
    Ok((analytic.max_abs(), fd.max_abs(), analytic.sub(&fd).max_abs()))
}

fn variation_fluxconn(sys: &FlowSystem, state: &FlowState) -> Result<(f64, f64, f64)> {
    let metric = Metric::new(state.g.clone())?;
    let u = variation_direction(state.grid());
    let lambda = sys.config.lambda();
    let analytic = flux_conn_variation(sys.basis(), &metric, &state.frame, &u, &state.h, lambda, &state.psi)?;
    let at = |s: f64| -> Result<Vec<ComplexField>> {
        let m = Metric::new(state.g.add(&u.scaled(s)))?;
        let frame = bg_transport(&state.g, &u, &state.frame, s, (32.0 * s.abs()).ceil() as usize)?;
        let conn = spin_connection(&m, &christoffels(&m), &frame);
        nabla_h(sys.basis(), &state.psi, &conn, &frame, &m.sqrtg, &state.h, lambda)
    };
    let (plus, minus) = (at(FD_EPS)?, at(-FD_EPS)?);
    let (mut a, mut f, mut diff) = (0.0f64, 0.0f64, 0.0f64);
    for p in 0..sys.dim() {
        let fd = plus[p].sub(&minus[p]).scaled(0.5 / FD_EPS);
        a = a.max(analytic[p].max_abs());
        f = f.max(fd.max_abs());
        diff = diff.max(analytic[p].sub(&fd).max_abs());
    }
    Ok((a, f, diff))
}

/// `c − φ̇` against `e^{-2φ}Re⟨(∇^H)†∇^Hψ, ψ⟩`, the condition for preserving the normalization.
fn normalization_ode(sys: &FlowSystem, state: &FlowState) -> Result<(f64, f64, f64)> {
    let kin = sys.kinematics(state)?;
    let c = sys.c_from(&kin, state);
    let phi_dot = sys.phi_rate(&kin, state);
    let lap = kin.flux.adjoint(&kin.nabla_h);
    let (mut l, mut r, mut diff) = (0.0f64, 0.0f64, 0.0f64);
    for node in 0..state.phi.node_count() {
        let lhs = c.data[node] - phi_dot.data[node];
        let rhs = kin.weight.data[node] * inner(lap.node(node), state.psi.node(node)).re;
        l = l.max(lhs.abs());
        r = r.max(rhs.abs());
        diff = diff.max((lhs - rhs).abs());
    }
    Ok((l, r, diff))
}

fn stencil_identity(name: &str, f: StencilFn, config: &FlowConfig, states: &[FlowState]) -> Result<IdentityReport> {
    let mut levels = Vec::new();
    let mut finest = (0.0, 0.0, 0.0);
    for s in states {
        let sys = FlowSystem::for_state(config.clone(), s)?;
        let r = f(&sys, s)?;
        levels.push((s.grid().sizes()[0], r.2));
        finest = r;
    }
    let order = if levels.len() >= 2 {
        let pts: Vec<(f64, f64)> = levels.iter().map(|&(m, r)| ((1.0 / m as f64).ln(), r.max(1e-300).ln())).collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(num / den)
    } else {
        None
    };
    let target = states.last().map_or(2, |s| s.grid().order()) as f64;
    let exact_zero = finest.2 <= EXACT_TOL * finest.0.max(finest.1).max(1.0);
    let pass = exact_zero || order.is_some_and(|o| (o - target).abs() <= ORDER_TOL);
    Ok(IdentityReport {
        name: name.into(),
        class: IdentityClass::Stencil,
        lhs: finest.0,
        rhs: finest.1,
        residual: finest.2,
        levels,
        order,
        pass,
    })
}

fn stencil_fn(name: &str) -> Option<StencilFn> {
    Some(match name {
        "q_ricci" => q_ricci,
        "bochner" => bochner,
        "variation_rm" => variation_rm,
        "variation_fluxconn" => variation_fluxconn,
        "normalization_ode" => normalization_ode,
        _ => return None,
    })
}

pub fn identity_class(name: &str) -> Result<IdentityClass> {
    if stencil_fn(name).is_some() {
        Ok(IdentityClass::Stencil)
    } else if IDENTITIES.contains(&name) {
        Ok(IdentityClass::Exact)
    } else {
        Err(Error::UnknownIdentity(name.into()))
    }
}

fn exact_identity(name: &str, state: &FlowState, config: &FlowConfig) -> Result<IdentityReport> {
    let plain = ungauged(config);
    let sys = || FlowSystem::for_state(plain.clone(), state);
    match name {
        "trace" => trace_identity(&sys()?, state),
        "h_energy" => h_energy(&sys()?, state),
        "l_pairing" => l_pairing(&sys()?, state),
        "scaling" => {
            let s = FlowSystem::for_state(config.clone(), state)?;
            let res = scaling_residual(&s, state, 2.0)?;
            let mut r = IdentityReport::exact("scaling", 0.0, 0.0);
            r.residual = res;
            r.pass = res <= EXACT_TOL;
            Ok(r)
        }
        "dd_adjoint" => dd_adjoint(state),
        "connection_energy" => connection_energy(&sys()?, state),
        "phase" => phase(&FlowSystem::for_state(config.clone(), state)?, state),
        other => Err(Error::UnknownIdentity(other.into())),
    }
}

/// Evaluates the named identity on `state`. Stencil-class identities are evaluated on the
/// 4×- and 2×-coarsened samplings of `state` and on `state` itself; levels whose grid does
/// not divide are skipped.
pub fn check_identity(name: &str, state: &FlowState, config: &FlowConfig) -> Result<IdentityReport> {
    match identity_class(name)? {
        IdentityClass::Exact => exact_identity(name, state, config),
        IdentityClass::Stencil => {
            let mut states = Vec::new();
            for factor in [4usize, 2] {
                if let Ok(s) = coarsen_state(state, factor) {
                    if s.grid().sizes().iter().all(|&m| m >= 4) {
                        states.push(s);
                    }
                }
            }
            states.push(state.clone());
            check_identity_refined(name, &states, config)
        }
    }
}

/// Evaluates the named identity on a refinement sequence ordered coarse to fine. Exact-class
/// identities report the worst level.
pub fn check_identity_refined(name: &str, states: &[FlowState], config: &FlowConfig) -> Result<IdentityReport> {
    if states.is_empty() {
        return Err(Error::Shape("identity check needs at least one state".into()));
    }
    match stencil_fn(name) {
        Some(f) => stencil_identity(name, f, &ungauged(config), states),
        None => {
            let mut worst: Option<IdentityReport> = None;
            for s in states {
                let r = exact_identity(name, s, config)?;
                if worst.as_ref().map_or(true, |w| r.residual >= w.residual) {
                    worst = Some(r);
                }
            }
            Ok(worst.expect("non-empty"))
        }
    }
}
