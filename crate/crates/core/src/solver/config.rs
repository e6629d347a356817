use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::SlicePair;

/// Which completion model the solver minimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    /// Tensor U1 norm of the core.
    TcU1,
    /// Sum of nuclear norms of the `(k1, k2)`-slices of the core.
    TcSl(SlicePair),
}

/// How the penalty parameters relate to the data scale.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyScale {
    /// `mu0`, `eta0`, `mu_bar`, `eta_bar` are divided by the model's dual
    /// norm of the observed data (‖U(Ψ(M))‖_∞ for TC-U1, the largest slice
    /// spectral norm for TC-SL), so the first shrinkage threshold is
    /// commensurate with the data.
    #[default]
    DualNorm,
    /// Values are used as given.
    Absolute,
}

/// Initial value of the learnable factors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnableInit {
    #[default]
    Identity,
    /// Random orthogonal matrices; mode `k` uses seed `seed + k`.
    Random(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rho_mu: f64,
    pub rho_eta: f64,
    pub mu_bar: f64,
    pub eta_bar: f64,
    pub mu0: f64,
    pub eta0: f64,
    /// Tolerance on the max-modulus change of Z, X (relative to ‖Ψ(M)‖_∞)
    /// and of each learnable factor (absolute).
    pub eps: f64,
    /// Relative feasibility ‖Ψ(M) − X − E‖_F / ‖Ψ(M)‖_F required to stop.
    pub feas_tol: f64,
    pub max_iter: usize,
    pub penalty_scale: PenaltyScale,
    pub init: LearnableInit,
    /// Enforce `rho_eta > rho_mu²`.
    pub theorem_mode: bool,
    /// ‖Y‖_F above this (or non-finite) is reported as divergence.
    pub y_bound: f64,
    #[serde(skip)]
    pub model: Model,
}

impl Default for Model {
    fn default() -> Self {
        Model::TcU1
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho_mu: 1.1,
            rho_eta: 1.1,
            mu_bar: 1e8,
            eta_bar: 1e6,
            mu0: 1.0,
            eta0: 1e-2,
            eps: 1e-7,
            feas_tol: 1e-7,
            max_iter: 500,
            penalty_scale: PenaltyScale::DualNorm,
            init: LearnableInit::Identity,
            theorem_mode: false,
            y_bound: 1e12,
            model: Model::TcU1,
        }
    }
}

impl SolverConfig {
    /// A schedule satisfying `rho_eta > rho_mu²` with an unbounded `eta`.
    pub fn theorem() -> Self {
        Self {
            rho_mu: 1.1,
            rho_eta: 1.22,
            eta0: 1e-3,
            eta_bar: f64::INFINITY,
            theorem_mode: true,
            ..Self::default()
        }
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.rho_mu > 1.0) || !(self.rho_eta > 1.0) {
            return fail("rho_mu and rho_eta must exceed 1".into());
        }
        if !(self.mu0 > 0.0) || !(self.eta0 > 0.0) {
            return fail("mu0 and eta0 must be positive".into());
        }
        if !(self.mu_bar >= self.mu0) || !(self.eta_bar >= self.eta0) {
            return fail("caps must be at least the initial values".into());
        }
        if !(self.eps > 0.0) || !(self.feas_tol > 0.0) {
            return fail("eps and feas_tol must be positive".into());
        }
        if self.max_iter == 0 {
            return fail("max_iter must be at least 1".into());
        }
        if self.theorem_mode && !(self.rho_eta > self.rho_mu * self.rho_mu) {
            return fail(format!(
                "theorem mode needs rho_eta > rho_mu^2 ({} <= {})",
                self.rho_eta,
                self.rho_mu * self.rho_mu
            ));
        }
        Ok(())
    }
}

/// `(min(μ̄, ρ_μ μ), min(η̄, ρ_η η))`.
pub fn update_penalties(mu: f64, eta: f64, rho_mu: f64, rho_eta: f64, mu_bar: f64, eta_bar: f64) -> (f64, f64) {
    ((rho_mu * mu).min(mu_bar), (rho_eta * eta).min(eta_bar))
}
