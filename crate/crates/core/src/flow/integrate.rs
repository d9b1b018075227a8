use super::config::Renormalize;
use super::rhs::FlowSystem;
use super::state::{FlowState, Tangent};
use crate::diagnostics::{record, DiagnosticsRecord};
use crate::geometry::{orthonormality_drift, reorthonormalize, Metric};
use crate::linalg::sym_eigen;
use crate::{Error, Result};

const MIN_DT: f64 = 1e-12;
const DRIFT_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: FlowState,
    pub dt_used: f64,
    pub halvings: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub state: FlowState,
    pub steps: usize,
}

/// Heuristic explicit-RK4 limit `2.78·cfl / λ_max` for the second-order part, with
/// `λ_max ≈ 4·max eig(g^{-1})·Σ_i (s_i/h_i)²` and `s_i` the peak of the stencil symbol.
pub fn stable_dt(state: &FlowState, cfl: f64) -> f64 {
    let grid = state.grid();
    let n = grid.dim();
    let peak = if grid.order() == 2 { 1.0 } else { 1.3717 };
    let wave: f64 = (0..n).map(|i| (peak / grid.spacing(i)).powi(2)).sum();
    let ginv_max = (0..state.g.node_count())
        .map(|node| 1.0 / sym_eigen(state.g.node(node), n).0.into_iter().fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    2.78 * cfl / (4.0 * ginv_max * wave)
}

impl FlowSystem {
    fn rk4(&self, s: &FlowState, k1: &Tangent, h: f64) -> Result<FlowState> {
        let k2 = self.rhs(&s.advanced(0.5 * h, k1))?;
        let k3 = self.rhs(&s.advanced(0.5 * h, &k2))?;
        let k4 = self.rhs(&s.advanced(h, &k3))?;
        let v = Tangent::combine(&[(1.0 / 6.0, k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]);
        let next = s.advanced(h, &v);
        Metric::new(next.g.clone())?;
        Ok(next)
    }

    /// One classical RK4 step. In adaptive mode `dt` is halved while `‖ġ‖∞·dt` exceeds the
    /// CFL factor, `dt` exceeds [`stable_dt`], or a stage leaves the SPD cone.
    pub fn step(&self, state: &FlowState, dt: f64) -> Result<StepOutcome> {
        let k1 = self.rhs(state)?;
        let adaptive = self.config.adaptive;
        let mut h = dt;
        let mut halvings = 0;
        if adaptive {
            h = h.min(stable_dt(state, self.config.cfl));
        }
        loop {
            if h < MIN_DT {
                return Err(Error::Stiffness { dt: h });
            }
            if adaptive && k1.g.max_abs() * h > self.config.cfl {
                h *= 0.5;
                halvings += 1;
                continue;
            }
            match self.rk4(state, &k1, h) {
                Ok(next) => return Ok(StepOutcome { state: self.finish(next)?, dt_used: h, halvings }),
                Err(Error::Geometry { .. }) if adaptive => {
                    h *= 0.5;
                    halvings += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn finish(&self, mut s: FlowState) -> Result<FlowState> {
        if orthonormality_drift(&s.g, &s.frame) > DRIFT_TOL {
            s.frame = reorthonormalize(&s.g, &s.frame);
        }
        if self.config.renormalize == Renormalize::ProjectPhi {
            s.phi = crate::scenario::normalizing_phi(&s.psi);
        }
        Ok(s)
    }

    /// Integrates to `t_end`, recording diagnostics every `monitor_cadence` steps and at the end.
    /// `hook` sees every accepted state and its step count.
    pub fn run(&self, initial: FlowState, mut hook: impl FnMut(&FlowState, usize) -> Result<()>) -> Result<RunOutput> {
        let t_end = self.config.t_end;
        let cadence = self.config.monitor_cadence.max(1);
        let mut state = initial;
        let t0 = state.t;
        let mut records = vec![record(self, &state, 0.0)?];
        let mut steps = 0;
        if self.config.adaptive {
            let mut dt = self.config.dt;
            while state.t < t0 + t_end - 1e-14 * t_end.max(1.0) {
                let h = dt.min(t0 + t_end - state.t);
                let out = self.step(&state, h)?;
                state = out.state;
                steps += 1;
                dt = if out.halvings > 0 { out.dt_used } else { (dt * 1.25).min(self.config.dt) };
                let done = state.t >= t0 + t_end - 1e-14 * t_end.max(1.0);
                if steps % cadence == 0 || done {
                    records.push(record(self, &state, out.dt_used)?);
                }
                hook(&state, steps)?;
            }
        } else {
            let total = if t_end > 0.0 { (t_end / self.config.dt - 1e-9).ceil().max(1.0) as usize } else { 0 };
            let h = if total > 0 { t_end / total as f64 } else { 0.0 };
            for i in 0..total {
                let out = self.step(&state, h)?;
                state = out.state;
                state.t = t0 + (i + 1) as f64 * h;
                steps += 1;
                if steps % cadence == 0 || steps == total {
                    records.push(record(self, &state, h)?);
                }
                hook(&state, steps)?;
            }
        }
        Ok(RunOutput { records, state, steps })
    }
}
