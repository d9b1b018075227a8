//! Right-hand sides. Tensors in the flow equations are assembled in frame indices at
//! each node and converted to coordinate components only for `ġ`.

use num_complex::Complex64 as C64;

use super::config::{Background, FlowConfig, Gauge, PhiLine, Variant};
use super::state::{FlowState, Tangent};
use crate::clifford::{build_gamma, hermitian_part, FluxStencil, GammaBasis};
use crate::exterior::{codifferential, d, frame_components, from_frame_components, gram, hodge_star, wedge, FormField};
use crate::geometry::{
    christoffels, coframe, curvature, deturck_vector, divergence, frame_to_coordinate_vector, hessian, lie_form, lie_metric,
    Metric,
};
use crate::grid::{ComplexField, RealField};
use crate::linalg::{inner, matmul, transpose};
use crate::spin::{
    dirac, nabla_vector_frame, spin_connection, spinor_lie_from_parts, tensor_to_frame, vector_to_frame, ConnectionOps,
    FluxInput, SpinConnection,
};
use crate::{Error, Result};

/// Derived quantities shared by every term of the right-hand side.
pub struct Kinematics {
    pub metric: Metric,
    pub gamma: RealField,
    pub conn: SpinConnection,
    pub hframe: RealField,
    pub lc: ConnectionOps,
    pub flux: ConnectionOps,
    /// `∇_pψ`, Levi-Civita.
    pub nabla: Vec<ComplexField>,
    /// `∇^H_pψ`.
    pub nabla_h: Vec<ComplexField>,
    /// `𝔄_a = e^{-2φ}⟨h_aψ, ψ⟩`, frame components.
    pub frak: RealField,
    /// `e_a(φ)`.
    pub dphi: RealField,
    /// `e^{-2φ}`.
    pub weight: RealField,
}

pub struct FlowSystem {
    pub config: FlowConfig,
    basis: GammaBasis,
    stencil: FluxStencil,
    n: usize,
    k: usize,
    background: Option<RealField>,
}

impl FlowSystem {
    pub fn new(config: FlowConfig, n: usize, k: usize) -> Result<Self> {
        config.validate(n, k)?;
        let basis = build_gamma(n)?;
        let stencil = FluxStencil::new(&basis, k)?;
        Ok(Self { config, basis, stencil, n, k, background: None })
    }

    /// Builds the system for `state`, taking the DeTurck reference from it when configured.
    pub fn for_state(config: FlowConfig, state: &FlowState) -> Result<Self> {
        let mut sys = Self::new(config, state.dim(), state.degree())?;
        if sys.config.background == Background::Initial {
            sys.background = Some(christoffels(&Metric::new(state.g.clone())?));
        }
        Ok(sys)
    }

    pub fn with_background(mut self, reference: &Metric) -> Self {
        self.background = Some(christoffels(reference));
        self
    }

    pub fn basis(&self) -> &GammaBasis {
        &self.basis
    }

    pub fn stencil(&self) -> &FluxStencil {
        &self.stencil
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn background(&self) -> Option<&RealField> {
        self.background.as_ref()
    }

    fn check_state(&self, state: &FlowState) -> Result<()> {
        if state.dim() != self.n || state.degree() != self.k {
            return Err(Error::Shape(format!(
                "system built for n = {}, k = {} but state has n = {}, k = {}",
                self.n,
                self.k,
                state.dim(),
                state.degree()
            )));
        }
        Ok(())
    }

    pub fn kinematics(&self, state: &FlowState) -> Result<Kinematics> {
        self.check_state(state)?;
        let n = self.n;
        let lambda = self.config.lambda();
        let metric = Metric::new(state.g.clone())?;
        let gamma = christoffels(&metric);
        let conn = spin_connection(&metric, &gamma, &state.frame);
        let hframe = frame_components(&state.h, &state.frame);
        let lc = ConnectionOps::levi_civita(&self.basis, &conn, &state.frame, &metric.sqrtg);
        let flux_in = FluxInput { stencil: &self.stencil, hframe: &hframe, lambda };
        let flux = ConnectionOps::new(&self.basis, &conn, &state.frame, &metric.sqrtg, Some(flux_in));
        let nabla = lc.apply(&state.psi);
        let nabla_h = flux.apply(&state.psi);
        let weight = state.phi.map(|p| (-2.0 * p).exp());
        let frak = RealField::from_nodes(state.grid(), n, |node, out| {
            let s = state.psi.node(node);
            let w = weight.data[node];
            for a in 0..n {
                let m = self.stencil.direction(a, hframe.node(node), lambda);
                let h = hermitian_part(&m);
                let z = inner(&h.apply(s), s);
                let mag = h.max_abs() * s.iter().map(|v| v.norm_sqr()).sum::<f64>();
                assert!(!(z.im.abs() > 1e-13 * (1.0 + mag)), "⟨h_aψ, ψ⟩ not real at node {node}: {z}");
                out[a] = w * z.re;
            }
        });
        let dphi = RealField::from_nodes(state.grid(), n, {
            let grad = state.phi.gradient();
            move |node, out| {
                let e = state.frame.node(node);
                for a in 0..n {
                    out[a] = (0..n).map(|j| e[j * n + a] * grad[j].data[node]).sum();
                }
            }
        });
        Ok(Kinematics { metric, gamma, conn, hframe, lc, flux, nabla, nabla_h, frak, dphi, weight })
    }

    /// `Σ_p |∇^H_pψ|²` per node.
    pub fn grad_energy_density(&self, kin: &Kinematics) -> RealField {
        pointwise_sum_sq(&kin.nabla_h)
    }

    /// Frame covariant divergence `∇_a T_{apℓ}` of a complex 3-tensor stored at `(a*n+p)*n+ℓ`,
    /// in coordinate-divergence form.
    fn frame_divergence(&self, kin: &Kinematics, state: &FlowState, t: &ComplexField) -> ComplexField {
        let n = self.n;
        let nn = n * n;
        let v = ComplexField::from_nodes(state.grid(), nn * n, |node, out| {
            let e = state.frame.node(node);
            let s = kin.metric.sqrtg.data[node];
            let tv = t.node(node);
            for pl in 0..nn {
                for j in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for a in 0..n {
                        acc += tv[a * nn + pl] * e[j * n + a];
                    }
                    out[pl * n + j] = acc * s;
                }
            }
        });
        let dv: Vec<ComplexField> = (0..n).map(|j| v.partial_unchecked(j)).collect();
        ComplexField::from_nodes(state.grid(), nn, |node, out| {
            let s = kin.metric.sqrtg.data[node];
            let om = kin.conn.omega.node(node);
            let tv = t.node(node);
            for p in 0..n {
                for l in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for (j, f) in dv.iter().enumerate() {
                        acc += f.node(node)[(p * n + l) * n + j];
                    }
                    acc /= s;
                    for a in 0..n {
                        for b in 0..n {
                            acc -= tv[(a * n + b) * n + l] * om[(a * n + p) * n + b];
                            acc -= tv[(a * n + p) * n + b] * om[(a * n + l) * n + b];
                        }
                    }
                    out[p * n + l] = acc;
                }
            }
        })
    }

    /// `⟨γ^{aℓ}ψ, χ_p⟩` at `(a*n+p)*n+ℓ`.
    fn gamma_pairing(&self, psi: &ComplexField, chi: &[ComplexField]) -> ComplexField {
        let n = self.n;
        ComplexField::from_nodes(&psi.grid, n * n * n, |node, out| {
            let s = psi.node(node);
            for a in 0..n {
                for l in 0..n {
                    if a == l {
                        continue;
                    }
                    let gs = if a < l {
                        self.basis.cached(&[a, l]).apply(s)
                    } else {
                        self.basis.cached(&[l, a]).scaled(C64::new(-1.0, 0.0)).apply(s)
                    };
                    for p in 0..n {
                        out[(a * n + p) * n + l] = inner(&gs, chi[p].node(node));
                    }
                }
            }
        })
    }

    pub(crate) fn q_from(&self, kin: &Kinematics, state: &FlowState) -> ComplexField {
        let t = self.gamma_pairing(&state.psi, &kin.nabla_h);
        self.frame_divergence(kin, state, &t)
    }

    /// `Q^H_{pℓ} = ∇_a⟨γ^{aℓ}ψ, ∇^H_pψ⟩` in frame indices at `p*n+ℓ`.
    pub fn q_tensor(&self, state: &FlowState) -> Result<ComplexField> {
        let kin = self.kinematics(state)?;
        Ok(self.q_from(&kin, state))
    }

    /// `(λ|H)_pψ` for every frame direction.
    fn flux_action(&self, kin: &Kinematics, psi: &ComplexField) -> Vec<ComplexField> {
        let lambda = self.config.lambda();
        let d = psi.ncomp;
        (0..self.n)
            .map(|p| {
                ComplexField::from_nodes(&psi.grid, d, |node, out| {
                    let m = self.stencil.direction(p, kin.hframe.node(node), lambda);
                    out.copy_from_slice(&m.apply(psi.node(node)));
                })
            })
            .collect()
    }

    /// `∇_a Re⟨γ^{aℓ}ψ, (λ|H)_pψ⟩` at `p*n+ℓ`.
    fn flux_divergence(&self, kin: &Kinematics, state: &FlowState) -> RealField {
        let act = self.flux_action(kin, &state.psi);
        let t = self.gamma_pairing(&state.psi, &act);
        re_part(&self.frame_divergence(kin, state, &t))
    }

    /// `Re Q^H_{pℓ}` assembled from the Ricci form of the identity:
    /// `e^{2φ}½R_{pℓ} + Re⟨ψ, γ^ℓ∇_pD̸ψ⟩ − ½Hess(e^{2φ})_{ℓp} − Re⟨D̸ψ, γ^ℓ∇_pψ⟩
    ///  + ∇_aRe⟨γ^{aℓ}ψ, (λ|H)_pψ⟩ + 2Re⟨∇_ℓψ, ∇_pψ⟩`.
    pub fn q_via_ricci(&self, state: &FlowState) -> Result<RealField> {
        let kin = self.kinematics(state)?;
        let n = self.n;
        let curv = curvature(&kin.metric, &kin.gamma);
        let ric = tensor_to_frame(&curv.ricci, &state.frame);
        let dpsi = dirac(&self.basis, &kin.nabla);
        let ndpsi = kin.lc.apply(&dpsi);
        let e2phi = state.phi.map(|p| (2.0 * p).exp());
        let hess = tensor_to_frame(&hessian(&e2phi, &kin.gamma), &state.frame);
        let fdiv = self.flux_divergence(&kin, state);
        Ok(RealField::from_nodes(state.grid(), n * n, |node, out| {
            let s = state.psi.node(node);
            let ds = dpsi.node(node);
            for p in 0..n {
                for l in 0..n {
                    let gl = self.basis.gamma(l);
                    let mut v = e2phi.data[node] * 0.5 * ric.node(node)[p * n + l];
                    v += inner(s, &gl.apply(ndpsi[p].node(node))).re;
                    v -= 0.5 * hess.node(node)[l * n + p];
                    v -= inner(ds, &gl.apply(kin.nabla[p].node(node))).re;
                    v += fdiv.node(node)[p * n + l];
                    v += 2.0 * inner(kin.nabla[l].node(node), kin.nabla[p].node(node)).re;
                    out[p * n + l] = v;
                }
            }
        }))
    }

    /// `V_a = e^{2φ}(e_a(φ) + 𝔄_a)`, frame components.
    fn phi_current(&self, kin: &Kinematics) -> RealField {
        let n = self.n;
        RealField::from_nodes(kin.metric.grid(), n, |node, out| {
            let e2 = 1.0 / kin.weight.data[node];
            for a in 0..n {
                out[a] = e2 * (kin.dphi.node(node)[a] + kin.frak.node(node)[a]);
            }
        })
    }

    /// `Σ_a ∇_a V_a` through the coordinate divergence.
    fn phi_current_divergence(&self, kin: &Kinematics, state: &FlowState) -> RealField {
        let v = frame_to_coordinate_vector(&self.phi_current(kin), &state.frame);
        divergence(&v, &kin.metric)
    }

    pub(crate) fn c_from(&self, kin: &Kinematics, state: &FlowState) -> RealField {
        let n = self.n;
        let energy = self.grad_energy_density(kin);
        let div = match self.config.variant {
            Variant::FixedPhi => Some(self.phi_current_divergence(kin, state)),
            Variant::DynamicPhi => None,
        };
        RealField::from_nodes(state.grid(), 1, |node, out| {
            let w = kin.weight.data[node];
            let mut c = w * energy.data[node];
            match &div {
                Some(dv) => c -= w * dv.data[node],
                None => {
                    let (fa, dp) = (kin.frak.node(node), kin.dphi.node(node));
                    c -= 2.0 * (0..n).map(|a| fa[a] * (dp[a] + fa[a])).sum::<f64>();
                }
            }
            out[0] = c;
        })
    }

    /// The Lagrange coefficient `c(t)` of the selected variant.
    pub fn c_of_t(&self, state: &FlowState) -> Result<RealField> {
        let kin = self.kinematics(state)?;
        Ok(self.c_from(&kin, state))
    }

    /// `d†H − c⋆(H∧H)`.
    pub fn flux_residual(&self, state: &FlowState, metric: &Metric) -> Result<FormField> {
        let mut s = codifferential(&state.h, metric)?;
        if self.config.c != 0.0 {
            let hh = hodge_star(&wedge(&state.h, &state.h)?, metric)?;
            s = s.sub(&hh.scaled(self.config.c));
        }
        Ok(s)
    }

    fn l_from(&self, state: &FlowState, metric: &Metric, s: &FormField) -> Result<FormField> {
        let n = self.n;
        let k = self.k;
        let c = self.config.c;
        if c == 0.0 || k % 2 == 1 {
            return FormField::zeros(state.grid(), k);
        }
        let set_k = state.h.index_set();
        let set_m = s.index_set();
        // T_I = ⋆(e_I∧H + H∧e_I) for each coordinate basis form e_I
        let mut cols = Vec::with_capacity(set_k.len());
        for i in 0..set_k.len() {
            let mut basis_form = FormField::zeros(state.grid(), k)?;
            basis_form.field.data.iter_mut().skip(i).step_by(set_k.len()).for_each(|x| *x = 1.0);
            let sym = wedge(&basis_form, &state.h)?.add(&wedge(&state.h, &basis_form)?);
            cols.push(hodge_star(&sym, metric)?);
        }
        let (lk, lm) = (set_k.len(), set_m.len());
        let field = RealField::from_nodes(state.grid(), lk, |node, out| {
            let gm = gram(metric.ginv.node(node), n, &set_m);
            let gk_inv = gram(metric.g.node(node), n, &set_k);
            let sv = s.field.node(node);
            let raised: Vec<f64> = (0..lm).map(|a| (0..lm).map(|b| gm[a * lm + b] * sv[b]).sum()).collect();
            let pair: Vec<f64> =
                cols.iter().map(|col| col.field.node(node).iter().zip(&raised).map(|(x, y)| x * y).sum::<f64>()).collect();
            for j in 0..lk {
                out[j] = 0.5 * c * (0..lk).map(|i| gk_inv[j * lk + i] * pair[i]).sum::<f64>();
            }
        });
        FormField::new(k, field)
    }

    /// `L(H)`, the pointwise adjoint of `β ↦ ⋆(β∧H + H∧β)` applied to `(c/2)(d†H − c⋆(H∧H))`.
    pub fn l_of_h(&self, state: &FlowState) -> Result<FormField> {
        self.check_state(state)?;
        let metric = Metric::new(state.g.clone())?;
        let s = self.flux_residual(state, &metric)?;
        self.l_from(state, &metric, &s)
    }

    /// `(𝔄_a, d†𝔄)`: frame components of the flat connection form and its codifferential.
    pub fn frak_a(&self, state: &FlowState) -> Result<(RealField, RealField)> {
        let kin = self.kinematics(state)?;
        let co = coframe(&state.frame)?;
        let form = from_frame_components(&kin.frak, &co, 1);
        let div = codifferential(&form, &kin.metric)?;
        Ok((kin.frak, div.field))
    }

    /// `−(d†dH + dS − L(H))`, `S = d†H − c⋆(H∧H)`.
    pub(crate) fn h_rate(&self, state: &FlowState, metric: &Metric) -> Result<FormField> {
        let mut out = FormField::zeros(state.grid(), self.k)?;
        if self.k < self.n {
            out = out.sub(&codifferential(&d(&state.h)?, metric)?);
        }
        let s = self.flux_residual(state, metric)?;
        out = out.sub(&d(&s)?);
        Ok(out.add(&self.l_from(state, metric, &s)?))
    }

    pub(crate) fn phi_rate(&self, kin: &Kinematics, state: &FlowState) -> RealField {
        let n = self.n;
        if self.config.variant == Variant::FixedPhi {
            return RealField::zeros(state.grid(), 1);
        }
        let v = self.phi_current(kin);
        let div = self.phi_current_divergence(kin, state);
        let coef = match (self.config.gauge, self.config.phi_line) {
            (Gauge::DeTurck, PhiLine::Alternative) => 1.0,
            _ => -2.0,
        };
        RealField::from_nodes(state.grid(), 1, |node, out| {
            let fa = kin.frak.node(node);
            let vv = v.node(node);
            let pair: f64 = (0..n).map(|a| fa[a] * vv[a]).sum();
            out[0] = kin.weight.data[node] * (div.data[node] + coef * pair);
        })
    }

    /// `(c1/2)Re⟨∇^H_pψ, ∇^H_ℓψ⟩ − (c2/4)δ_{pℓ}|∇^Hψ|²`.
    fn quadratic_terms(&self, kin: &Kinematics, node: usize, out: &mut [f64]) {
        let n = self.n;
        let (c1, c2) = (self.config.c1, self.config.c2);
        let mut energy = 0.0;
        for p in 0..n {
            for l in p..n {
                let v = inner(kin.nabla_h[p].node(node), kin.nabla_h[l].node(node)).re;
                out[p * n + l] += 0.5 * c1 * v;
                if l != p {
                    out[l * n + p] += 0.5 * c1 * v;
                } else {
                    energy += v;
                }
            }
        }
        for p in 0..n {
            out[p * n + p] -= 0.25 * c2 * energy;
        }
    }

    /// Metric velocity in frame indices for `gauge = none | deturck` (before any Lie term).
    fn metric_rate_frame_q(&self, kin: &Kinematics, state: &FlowState) -> RealField {
        let n = self.n;
        let q = self.q_from(kin, state);
        RealField::from_nodes(state.grid(), n * n, |node, out| {
            let w = kin.weight.data[node];
            let qv = q.node(node);
            for p in 0..n {
                for l in 0..n {
                    out[p * n + l] = -0.25 * w * 0.5 * (qv[p * n + l].re + qv[l * n + p].re);
                }
            }
            self.quadratic_terms(kin, node, out);
        })
    }

    /// Ricci-form metric velocity of the reparametrized flow, frame indices.
    fn metric_rate_frame_hw(&self, kin: &Kinematics, state: &FlowState, dpsi: &ComplexField, xf: &RealField) -> RealField {
        let n = self.n;
        let curv = curvature(&kin.metric, &kin.gamma);
        let ric = tensor_to_frame(&curv.ricci, &state.frame);
        let hess = tensor_to_frame(&hessian(&state.phi, &kin.gamma), &state.frame);
        let fdiv = self.flux_divergence(kin, state);
        RealField::from_nodes(state.grid(), n * n, |node, out| {
            let w = kin.weight.data[node];
            let dp = kin.dphi.node(node);
            let x = xf.node(node);
            let ds = dpsi.node(node);
            let mixed: Vec<f64> = (0..n * n)
                .map(|pl| {
                    let (p, l) = (pl / n, pl % n);
                    inner(ds, &self.basis.gamma(l).apply(kin.nabla[p].node(node))).re
                })
                .collect();
            for p in 0..n {
                for l in 0..n {
                    let (pl, lp) = (p * n + l, l * n + p);
                    let mut v = -0.125 * ric.node(node)[pl];
                    v += 0.5 * w * 0.5 * (mixed[pl] + mixed[lp]);
                    v += 0.25 * hess.node(node)[pl] + 0.5 * dp[p] * dp[l];
                    v -= 0.25 * w * 0.5 * (fdiv.node(node)[pl] + fdiv.node(node)[lp]);
                    v -= 0.5 * w * inner(kin.nabla[l].node(node), kin.nabla[p].node(node)).re;
                    v -= 0.5 * 0.5 * (x[l] * dp[p] + x[p] * dp[l]);
                    out[pl] = v;
                }
            }
            self.quadratic_terms(kin, node, out);
        })
    }

    /// Full tangent of the configured variant and gauge.
    pub fn rhs(&self, state: &FlowState) -> Result<Tangent> {
        let kin = self.kinematics(state)?;
        self.rhs_with(&kin, state)
    }

    pub fn rhs_with(&self, kin: &Kinematics, state: &FlowState) -> Result<Tangent> {
        let n = self.n;
        let c = self.c_from(kin, state);
        let lap = kin.flux.adjoint(&kin.nabla_h);
        let mut psi_dot = ComplexField::from_nodes(state.grid(), state.psi.ncomp, |node, out| {
            let cv = c.data[node];
            for ((o, &l), &s) in out.iter_mut().zip(lap.node(node)).zip(state.psi.node(node)) {
                *o = -l + s * cv;
            }
        });
        let mut h_dot = self.h_rate(state, &kin.metric)?;
        let mut phi_dot = self.phi_rate(kin, state);

        let (gf, lie) = match self.config.gauge {
            Gauge::None => (self.metric_rate_frame_q(kin, state), None),
            Gauge::DeTurck => {
                let x = deturck_vector(&kin.metric, self.background.as_ref());
                (self.metric_rate_frame_q(kin, state), Some((x, 1.0)))
            }
            Gauge::Hw => {
                let dpsi = dirac(&self.basis, &kin.nabla);
                let xf = hw_frame_vector(&self.basis, &state.psi, &dpsi, &kin.weight);
                let gf = self.metric_rate_frame_hw(kin, state, &dpsi, &xf);
                (gf, Some((frame_to_coordinate_vector(&xf, &state.frame), 0.125)))
            }
        };
        let mut g_dot = frame_to_coordinate_tensor(&gf, &state.frame, &state.g);
        if let Some((x, s)) = lie {
            if self.config.gauge == Gauge::DeTurck {
                g_dot.axpy(1.0, &lie_metric(&x, &kin.metric, &kin.gamma));
            }
            let xf = vector_to_frame(&x, &state.frame, &state.g);
            let dx = nabla_vector_frame(&xf, &kin.conn, &state.frame);
            psi_dot.axpy(s, &spinor_lie_from_parts(&self.basis, &xf, &dx, &state.psi, &kin.nabla));
            h_dot = h_dot.add(&lie_form(&x, &state.h)?.scaled(s));
            if self.config.variant == Variant::DynamicPhi {
                let grad = state.phi.gradient();
                let xphi = RealField::from_nodes(state.grid(), 1, |node, out| {
                    out[0] = (0..n).map(|j| x.node(node)[j] * grad[j].data[node]).sum();
                });
                phi_dot.axpy(s, &xphi);
            }
        }
        let frame_dot = RealField::from_nodes(state.grid(), n * n, |node, out| {
            let m = matmul(kin.metric.ginv.node(node), &matmul(g_dot.node(node), state.frame.node(node), n), n);
            for (o, v) in out.iter_mut().zip(m) {
                *o = -0.5 * v;
            }
        });
        let tangent = Tangent { g: g_dot, frame: frame_dot, psi: psi_dot, h: h_dot, phi: phi_dot };
        check_finite(&tangent)?;
        Ok(tangent)
    }

    /// Metric velocity in frame indices (before any Lie-derivative term), for identity checks.
    pub fn metric_rate_frame(&self, kin: &Kinematics, state: &FlowState) -> RealField {
        match self.config.gauge {
            Gauge::Hw => {
                let dpsi = dirac(&self.basis, &kin.nabla);
                let xf = hw_frame_vector(&self.basis, &state.psi, &dpsi, &kin.weight);
                self.metric_rate_frame_hw(kin, state, &dpsi, &xf)
            }
            _ => self.metric_rate_frame_q(kin, state),
        }
    }

    /// The four stationarity residuals `(‖∇^Hψ‖∞, ‖dH‖∞, ‖d†H − c⋆(H∧H)‖∞, ‖∇φ + 𝔄‖∞)`.
    pub fn stationarity(&self, kin: &Kinematics, state: &FlowState) -> Result<[f64; 4]> {
        let n = self.n;
        let nabla = kin.nabla_h.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
        let dh = if self.k < n { d(&state.h)?.field.max_abs() } else { 0.0 };
        let s = self.flux_residual(state, &kin.metric)?.field.max_abs();
        let phi = (0..state.phi.node_count())
            .map(|node| {
                let (dp, fa) = (kin.dphi.node(node), kin.frak.node(node));
                (0..n).map(|a| (dp[a] + fa[a]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        Ok([nabla, dh, s, phi])
    }
}

/// `X^ℓ = w Re⟨ψ, γ^ℓD̸ψ⟩` with `w = e^{-2φ}` already evaluated.
fn hw_frame_vector(basis: &GammaBasis, psi: &ComplexField, dpsi: &ComplexField, weight: &RealField) -> RealField {
    let n = basis.n();
    RealField::from_nodes(&psi.grid, n, |node, out| {
        let (p, dp) = (psi.node(node), dpsi.node(node));
        for l in 0..n {
            out[l] = weight.data[node] * inner(p, &basis.gamma(l).apply(dp)).re;
        }
    })
}

/// `ġ_{ij} = θ^p_iθ^ℓ_j ġ_{pℓ}` with `θ = Eᵀg`.
pub fn frame_to_coordinate_tensor(gf: &RealField, frame: &RealField, g: &RealField) -> RealField {
    let n = frame.grid.dim();
    RealField::from_nodes(&frame.grid, n * n, |node, out| {
        let ge = matmul(g.node(node), frame.node(node), n);
        let m = matmul(&matmul(&ge, gf.node(node), n), &transpose(&ge, n), n);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = 0.5 * (m[i * n + j] + m[j * n + i]);
            }
        }
    })
}

fn pointwise_sum_sq(fields: &[ComplexField]) -> RealField {
    RealField::from_nodes(&fields[0].grid, 1, |node, out| {
        out[0] = fields.iter().map(|f| f.node(node).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum();
    })
}

fn re_part(z: &ComplexField) -> RealField {
    RealField::from_nodes(&z.grid, z.ncomp, |node, out| {
        for (o, v) in out.iter_mut().zip(z.node(node)) {
            *o = v.re;
        }
    })
}

fn check_finite(t: &Tangent) -> Result<()> {
    let checks: [(&'static str, Option<(usize, usize)>); 5] = [
        ("metric", t.g.first_non_finite()),
        ("frame", t.frame.first_non_finite()),
        ("spinor", t.psi.first_non_finite()),
        ("flux", t.h.field.first_non_finite()),
        ("phi", t.phi.first_non_finite()),
    ];
    for (field, hit) in checks {
        if let Some((node, _)) = hit {
            return Err(Error::Divergence { node, field });
        }
    }
    Ok(())
}
