use crate::error::{Error, Result};
use crate::numerics::{ParamSpec, Transform};

/// Changepoint prior used by the case model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseVariant {
    /// τ ~ N(T − 2, 0.75²) truncated to [T − 5, T], fixed.
    Cs1,
    /// τ ~ N(T − μ_τ, σ_τ²) with μ_τ and σ_τ estimated.
    Cs2,
}

impl CaseVariant {
    pub fn name(self) -> &'static str {
        match self {
            CaseVariant::Cs1 => "CS1",
            CaseVariant::Cs2 => "CS2",
        }
    }
}

pub const CS1_MU_TAU: f64 = 2.0;
pub const CS1_SIGMA_TAU: f64 = 0.75;
pub const CS1_WINDOW: f64 = 5.0;

/// Case trajectory model: y = θ₀ + b₀ + (γ₀ + b₁)(t − τ)⁺ + ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangepointModel {
    pub variant: CaseVariant,
    pub theta0: f64,
    pub gamma0: f64,
    pub sigma_b0: f64,
    pub sigma_b1: f64,
    pub rho_b0b1: f64,
    pub sigma_xi: f64,
    pub mu_tau: f64,
    pub sigma_tau: f64,
}

impl ChangepointModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        variant: CaseVariant,
        theta0: f64,
        gamma0: f64,
        sigma_b0: f64,
        sigma_b1: f64,
        rho_b0b1: f64,
        sigma_xi: f64,
        mu_tau: f64,
        sigma_tau: f64,
    ) -> Result<Self> {
        let m = Self {
            variant,
            theta0,
            gamma0,
            sigma_b0,
            sigma_b1,
            rho_b0b1,
            sigma_xi,
            mu_tau,
            sigma_tau,
        };
        m.validate()?;
        Ok(m)
    }

    /// CS1 with its fixed changepoint law.
    pub fn cs1(theta0: f64, gamma0: f64, sigma_b0: f64, sigma_b1: f64, rho: f64, sigma_xi: f64) -> Result<Self> {
        Self::new(
            CaseVariant::Cs1,
            theta0,
            gamma0,
            sigma_b0,
            sigma_b1,
            rho,
            sigma_xi,
            CS1_MU_TAU,
            CS1_SIGMA_TAU,
        )
    }

    fn validate(&self) -> Result<()> {
        let finite = [
            self.theta0,
            self.gamma0,
            self.sigma_b0,
            self.sigma_b1,
            self.rho_b0b1,
            self.sigma_xi,
            self.mu_tau,
            self.sigma_tau,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("changepoint parameters must be finite".into()));
        }
        if self.sigma_b0 < 0.0 || self.sigma_b1 < 0.0 || self.sigma_xi <= 0.0 || self.sigma_tau <= 0.0 {
            return Err(Error::InvalidArgument("changepoint model SDs must be positive".into()));
        }
        if self.rho_b0b1.abs() >= 1.0 {
            return Err(Error::InvalidArgument(format!("correlation {} outside (-1, 1)", self.rho_b0b1)));
        }
        if self.variant == CaseVariant::Cs1
            && (self.mu_tau != CS1_MU_TAU || self.sigma_tau != CS1_SIGMA_TAU)
        {
            return Err(Error::InvalidArgument("CS1 changepoint law is fixed at N(T-2, 0.75^2)".into()));
        }
        Ok(())
    }

    /// Number of estimated parameters.
    pub fn n_params(variant: CaseVariant) -> usize {
        match variant {
            CaseVariant::Cs1 => 6,
            CaseVariant::Cs2 => 8,
        }
    }

    pub fn param_specs(variant: CaseVariant) -> Vec<ParamSpec> {
        let mut v = vec![
            ParamSpec::identity("theta0"),
            ParamSpec::identity("gamma0"),
            ParamSpec::log("sigma_b0"),
            ParamSpec::log("sigma_b1"),
            ParamSpec::fisher_z("rho_b0b1"),
            ParamSpec::log("sigma_xi"),
        ];
        if variant == CaseVariant::Cs2 {
            v.push(ParamSpec::identity("mu_tau").bounded(-10.0, 15.0));
            v.push(ParamSpec::log("sigma_tau").bounded((1e-3f64).ln(), (20.0f64).ln()));
        }
        v
    }

    pub fn working(&self) -> Vec<f64> {
        let mut w = vec![
            self.theta0,
            self.gamma0,
            self.sigma_b0.ln(),
            self.sigma_b1.ln(),
            Transform::FisherZ.to_working(self.rho_b0b1),
            self.sigma_xi.ln(),
        ];
        if self.variant == CaseVariant::Cs2 {
            w.push(self.mu_tau);
            w.push(self.sigma_tau.ln());
        }
        w
    }

    pub fn from_working(variant: CaseVariant, w: &[f64]) -> Self {
        assert_eq!(w.len(), Self::n_params(variant), "working vector length");
        let (mu_tau, sigma_tau) = match variant {
            CaseVariant::Cs1 => (CS1_MU_TAU, CS1_SIGMA_TAU),
            CaseVariant::Cs2 => (w[6], w[7].exp()),
        };
        Self {
            variant,
            theta0: w[0],
            gamma0: w[1],
            sigma_b0: w[2].exp(),
            sigma_b1: w[3].exp(),
            rho_b0b1: w[4].tanh(),
            sigma_xi: w[5].exp(),
            mu_tau,
            sigma_tau,
        }
    }

    /// Model-scale values in working-vector order.
    pub fn estimate(&self) -> Vec<f64> {
        let mut v = vec![
            self.theta0,
            self.gamma0,
            self.sigma_b0,
            self.sigma_b1,
            self.rho_b0b1,
            self.sigma_xi,
        ];
        if self.variant == CaseVariant::Cs2 {
            v.push(self.mu_tau);
            v.push(self.sigma_tau);
        }
        v
    }
}
