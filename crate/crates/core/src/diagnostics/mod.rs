//! Identity checkers, residual monitors, the principal-symbol analyzer and the
//! per-step diagnostics record.

mod identities;
mod monitors;
mod symbol;

pub use identities::{
    check_identity, check_identity_refined, coarsen_state, identity_class, scaled_state, scaling_residual, IdentityClass,
    IdentityReport, EXACT_TOL, IDENTITIES,
};
pub use monitors::{bochner_residual, phi_bound_monitor, second_derivative_spinor, shi_norms, tensor_frame_norm, PhiBoundReport};
pub use symbol::{symbol_operator, SymbolMap};

use std::io::Write;

use crate::exterior::{d, expand_antisymmetric, l2_inner};
use crate::flow::{FlowState, FlowSystem};
use crate::geometry::{cov_deriv, curvature};
use crate::grid::{integrate, RealField};
use crate::Result;

/// One row of the monitor output. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    pub normalization: f64,
    pub res_nabla_h: f64,
    pub res_dh: f64,
    pub res_flux: f64,
    pub res_phi: f64,
    pub spinor_energy: f64,
    pub flux_energy: f64,
    pub volume: f64,
    pub weighted_volume: f64,
    pub phi_max: f64,
    pub phi_min: f64,
    pub frak_sup: f64,
    pub codiff_frak_sup: f64,
    pub rm_sup: f64,
    pub grad_rm_sup: f64,
    pub hess_psi_sup: f64,
    pub grad_h_sup: f64,
    pub shi0: f64,
    pub shi1: f64,
    pub shi2: f64,
    /// `sup(|∇ψ|² + |H|² + |∇H|)`, the hypothesis quantity of the `φ` upper bound.
    pub phi_bound_a: f64,
}

pub const CSV_HEADER: &str = "t,dt,normalization,res_nabla_h,res_dh,res_flux,res_phi,spinor_energy,flux_energy,volume,\
weighted_volume,phi_max,phi_min,frak_sup,codiff_frak_sup,rm_sup,grad_rm_sup,hess_psi_sup,grad_h_sup,shi0,shi1,shi2,phi_bound_a";

impl DiagnosticsRecord {
    pub fn values(&self) -> [f64; 23] {
        [
            self.t,
            self.dt,
            self.normalization,
            self.res_nabla_h,
            self.res_dh,
            self.res_flux,
            self.res_phi,
            self.spinor_energy,
            self.flux_energy,
            self.volume,
            self.weighted_volume,
            self.phi_max,
            self.phi_min,
            self.frak_sup,
            self.codiff_frak_sup,
            self.rm_sup,
            self.grad_rm_sup,
            self.hess_psi_sup,
            self.grad_h_sup,
            self.shi0,
            self.shi1,
            self.shi2,
            self.phi_bound_a,
        ]
    }

    pub fn stationarity(&self) -> [f64; 4] {
        [self.res_nabla_h, self.res_dh, self.res_flux, self.res_phi]
    }

    /// Values in `{:.17e}` so rows round-trip bit-exactly.
    pub fn csv_row(&self) -> String {
        self.values().iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(",")
    }

    pub fn all_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite()) && self.volume > 0.0
    }
}

pub fn write_csv(out: &mut impl Write, records: &[DiagnosticsRecord]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

fn sup(f: &RealField) -> f64 {
    f.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Evaluates every monitored quantity on `state`.
pub fn record(sys: &FlowSystem, state: &FlowState, dt: f64) -> Result<DiagnosticsRecord> {
    let n = sys.dim();
    let k = sys.degree();
    let kin = sys.kinematics(state)?;
    let metric = &kin.metric;
    let [res_nabla_h, res_dh, res_flux, res_phi] = sys.stationarity(&kin, state)?;
    let e2phi = state.phi.map(|p| (2.0 * p).exp());
    let energy = sys.grad_energy_density(&kin);
    let spinor_energy = integrate(&e2phi.mul_pointwise(&energy), &metric.sqrtg)?;
    let s = sys.flux_residual(state, metric)?;
    let mut flux_energy = l2_inner(&s, &s, metric);
    if k < n {
        let dh = d(&state.h)?;
        flux_energy += l2_inner(&dh, &dh, metric);
    }
    let weighted_volume = integrate(&e2phi, &metric.sqrtg)?;
    let (frak, codiff) = sys.frak_a(state)?;
    let frak_sup = frak.node_norms().into_iter().fold(0.0, f64::max);
    let curv = curvature(metric, &kin.gamma);
    let (rm_sup, grad_rm_sup, hess_rm_sup) = shi_norms(metric, &kin.gamma, &curv, &state.frame);
    let hess_psi = second_derivative_spinor(&kin);
    let hess_psi_sup = hess_psi.iter().copied().fold(0.0, f64::max);
    let full_h = RealField::from_nodes(state.grid(), n.pow(k as u32), |node, out| {
        out.copy_from_slice(&expand_antisymmetric(state.h.field.node(node), n, k));
    });
    let grad_h = cov_deriv(&full_h, k, &kin.gamma);
    let mut grad_h_sup = 0.0f64;
    let mut phi_bound_a = 0.0f64;
    for node in 0..state.psi.node_count() {
        let e = state.frame.node(node);
        let gh = tensor_frame_norm(grad_h.node(node), e, n, k + 1);
        let hh = tensor_frame_norm(full_h.node(node), e, n, k);
        let dpsi: f64 = kin.nabla.iter().map(|f| f.node(node).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum();
        grad_h_sup = grad_h_sup.max(gh);
        phi_bound_a = phi_bound_a.max(dpsi + hh * hh + gh);
    }
    let t = state.t;
    Ok(DiagnosticsRecord {
        t,
        dt,
        normalization: state.normalization_residual(),
        res_nabla_h,
        res_dh,
        res_flux,
        res_phi,
        spinor_energy,
        flux_energy,
        volume: metric.volume(),
        weighted_volume,
        phi_max: state.phi.data.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        phi_min: state.phi.data.iter().copied().fold(f64::INFINITY, f64::min),
        frak_sup,
        codiff_frak_sup: sup(&codiff),
        rm_sup,
        grad_rm_sup,
        hess_psi_sup,
        grad_h_sup,
        shi0: rm_sup,
        shi1: t.max(0.0).sqrt() * grad_rm_sup,
        shi2: t.max(0.0) * hess_rm_sup,
        phi_bound_a,
    })
}
