use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    DynamicPhi,
    FixedPhi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    None,
    DeTurck,
    /// Ricci-form system obtained by reparametrizing along `⅛X`, `X = e^{-2φ}Re⟨ψ, γ^ℓD̸ψ⟩e_ℓ`.
    Hw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Renormalize {
    Off,
    ProjectPhi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Background {
    Flat,
    Initial,
}

/// Which `φ̇` line the DeTurck-gauged dynamic flow uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiLine {
    /// `e^{-2φ}Σ_a(∇_a − 2𝔄_a)V_a`, as in the ungauged flow.
    Flow,
    /// `e^{-2φ}Σ_a(∇_a + 𝔄_a)V_a`.
    Alternative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub variant: Variant,
    pub gauge: Gauge,
    pub dt: f64,
    pub adaptive: bool,
    pub cfl: f64,
    pub renormalize: Renormalize,
    pub t_end: f64,
    pub background: Background,
    pub monitor_cadence: usize,
    pub snapshot_cadence: usize,
    pub phi_line: PhiLine,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 0.0,
            c: 0.0,
            c1: 1.0,
            c2: 1.0,
            variant: Variant::DynamicPhi,
            gauge: Gauge::None,
            dt: 1e-3,
            adaptive: false,
            cfl: 0.5,
            renormalize: Renormalize::Off,
            t_end: 0.0,
            background: Background::Flat,
            monitor_cadence: 1,
            snapshot_cadence: 0,
            phi_line: PhiLine::Flow,
        }
    }
}

impl FlowConfig {
    pub fn lambda(&self) -> (f64, f64) {
        (self.lambda1, self.lambda2)
    }

    /// Rejects `c ≠ 0` unless `3k = n + 1`.
    pub fn validate(&self, n: usize, k: usize) -> Result<()> {
        if self.c != 0.0 && 3 * k != n + 1 {
            return Err(Error::Config(format!(
                "flux coupling c = {} requires the dimension rule 3k = n + 1, but n = {n}, k = {k}",
                self.c
            )));
        }
        if k == 0 || k > n {
            return Err(Error::Config(format!("flux degree k = {k} must lie in 1..={n}")));
        }
        if !(self.dt > 0.0) || !(self.cfl > 0.0) || !(self.t_end >= 0.0) {
            return Err(Error::Config("dt and cfl must be positive, t_end non-negative".into()));
        }
        Ok(())
    }

    /// Stationary points are classified only when `c1/2 − n·c2/4 ≠ 0`.
    pub fn classifies_stationary_points(&self, n: usize) -> bool {
        (self.c1 / 2.0 - n as f64 * self.c2 / 4.0).abs() > 1e-14
    }
}
