//! Bias-corrected aggregation: pooled maximum-likelihood fits over source
//! data followed by penalised debiasing refits on target data, for linear and
//! RKHS mean utilities.

mod kernel;
mod linear;
mod solver;
mod text;

use std::sync::Arc;

pub use self::kernel::{
    default_ridge_aggregate, default_ridge_debias, fit_krr_aggregate, fit_krr_debias,
    kernel_objective_and_gradient, KernelEstimate,
};
pub use self::linear::{
    fit_mle_aggregate, fit_mle_debias, nll_and_gradient, penalized_objective, project_l1_ball,
    LinearEstimate,
};
pub use self::text::{parse_estimate, write_estimate};

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// Solver and penalty settings shared by every fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iters: usize,
    pub step_tolerance: f64,
    pub objective_tolerance: f64,
    /// L1 weight of the linear debiasing fit.
    pub l1_penalty: f64,
    /// Ridge weight of the kernel fits; `None` selects the rate schedule.
    pub ridge_penalty: Option<f64>,
    /// Constant in front of the scheduled ridge weights.
    pub ridge_multiplier: f64,
    /// L1 radius `W` for the pooled linear fit; `None` leaves it unconstrained.
    pub l1_ball: Option<f64>,
    /// Smoothness exponent (> 1/2) of the ridge schedules.
    pub rkhs_alpha: f64,
    /// Effective-dimension exponent in (0, 1] of the aggregate schedule.
    pub rkhs_beta: f64,
    /// Source-target similarity radius `H` of the debiasing schedule.
    pub similarity_h: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            step_tolerance: 1e-8,
            objective_tolerance: 1e-10,
            l1_penalty: 0.0,
            ridge_penalty: None,
            ridge_multiplier: 1.0,
            l1_ball: None,
            rkhs_alpha: 1.0,
            rkhs_beta: 1.0,
            similarity_h: 0.3,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.step_tolerance > 0.0) || !(self.objective_tolerance > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.l1_penalty >= 0.0) {
            return bad(format!("l1 penalty must be nonnegative, got {}", self.l1_penalty));
        }
        if let Some(r) = self.ridge_penalty {
            if !(r >= 0.0) {
                return bad(format!("ridge penalty must be nonnegative, got {r}"));
            }
        }
        if let Some(w) = self.l1_ball {
            if !(w > 0.0) {
                return bad(format!("l1 ball radius must be positive, got {w}"));
            }
        }
        if !(self.rkhs_alpha > 0.5) {
            return bad(format!("rkhs_alpha must exceed 1/2, got {}", self.rkhs_alpha));
        }
        if !(self.rkhs_beta > 0.0 && self.rkhs_beta <= 1.0) {
            return bad(format!("rkhs_beta must lie in (0, 1], got {}", self.rkhs_beta));
        }
        if !(self.similarity_h >= 0.0) {
            return bad("similarity_h must be nonnegative".into());
        }
        Ok(())
    }
}

/// Solver bookkeeping returned with every estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FitInfo {
    pub converged: bool,
    pub iterations: usize,
    /// Objective value after every accepted step, starting from the initial point.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit<E> {
    pub estimate: E,
    pub info: FitInfo,
}

/// A fitted mean-utility predictor of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Linear(LinearEstimate),
    Kernel(Arc<KernelEstimate>),
}

impl Estimate {
    /// The all-zero predictor of the given family.
    pub fn zero_linear(dim: usize) -> Self {
        Estimate::Linear(LinearEstimate::zero(dim))
    }

    pub fn zero_kernel(gamma: f64) -> Self {
        Estimate::Kernel(Arc::new(KernelEstimate::zero(gamma)))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            Estimate::Linear(e) => e.predict(x),
            Estimate::Kernel(e) => e.predict(x),
        }
    }
}

/// `multiplier · 4 · u_F · √(log d / n)`, with `log d` floored at `log 2`.
pub fn default_l1_penalty(n: usize, d: usize, u_f: f64, multiplier: f64) -> f64 {
    let n = n.max(1) as f64;
    let log_d = (d.max(2) as f64).ln();
    multiplier * 4.0 * u_f * (log_d / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_penalty_schedule() {
        // 4 √(log 8 / 100)
        assert!((default_l1_penalty(100, 8, 1.0, 1.0) - 0.576_810_754_640_353_2).abs() < 1e-12);
        assert_eq!(default_l1_penalty(100, 8, 1.0, 0.0), 0.0);
        let a = default_l1_penalty(50, 10, 2.0, 1.0);
        let b = default_l1_penalty(200, 10, 2.0, 1.0);
        assert!((a / b - 2.0).abs() < 1e-12);
        assert_eq!(default_l1_penalty(10, 1, 1.0, 1.0), default_l1_penalty(10, 2, 1.0, 1.0));
    }

    #[test]
    fn fit_config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        let bad = FitConfig {
            rkhs_alpha: 0.5,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FitConfig {
            max_iters: 0,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_estimates_predict_zero() {
        assert_eq!(Estimate::zero_linear(3).predict(&[0.1, 0.2, 0.3]).unwrap(), 0.0);
        assert_eq!(Estimate::zero_kernel(0.5).predict(&[0.1, 0.2]).unwrap(), 0.0);
    }
}
