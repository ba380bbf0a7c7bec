use crate::environment::{dot, Observation};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;

use super::solver::{proximal_gradient, soft_threshold};
use super::{Fit, FitConfig, LOG_FLOOR};

/// Linear mean-utility estimate. The effective coefficients are
/// `base + coef` when a base (the pooled aggregate) is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimate {
    pub coef: Vec<f64>,
    pub base: Option<Vec<f64>>,
}

impl LinearEstimate {
    pub fn zero(dim: usize) -> Self {
        Self {
            coef: vec![0.0; dim],
            base: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.coef.len()
    }

    pub fn effective(&self) -> Vec<f64> {
        match &self.base {
            Some(b) => b.iter().zip(&self.coef).map(|(a, c)| a + c).collect(),
            None => self.coef.clone(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "covariate has length {}, estimate expects {}",
                x.len(),
                self.dim()
            )));
        }
        let base = self.base.as_deref().map_or(0.0, |b| dot(b, x));
        Ok(base + dot(&self.coef, x))
    }
}

fn check_data(data: &[Observation], dim: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("no observations to fit".into()));
    }
    if let Some(o) = data.iter().find(|o| o.x.len() != dim) {
        return Err(Error::InvalidInput(format!(
            "observation at t={} has {} covariates, expected {dim}",
            o.time,
            o.x.len()
        )));
    }
    Ok(())
}

/// Mean negative log-likelihood of the posted-price model and its gradient
/// with respect to `coef`, where utilities are `(base + coef) · x`.
pub fn nll_and_gradient(
    coef: &[f64],
    base: Option<&[f64]>,
    data: &[Observation],
    noise: &NoiseModel,
) -> Result<(f64, Vec<f64>)> {
    let dim = coef.len();
    if let Some(b) = base {
        if b.len() != dim {
            return Err(Error::InvalidInput("base and coefficient lengths differ".into()));
        }
    }
    check_data(data, dim)?;
    Ok(nll_unchecked(coef, base, data, noise))
}

fn nll_unchecked(
    coef: &[f64],
    base: Option<&[f64]>,
    data: &[Observation],
    noise: &NoiseModel,
) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut grad = vec![0.0; coef.len()];
    for o in data {
        let mut util = dot(coef, &o.x);
        if let Some(b) = base {
            util += dot(b, &o.x);
        }
        let u = o.price - util;
        let (d_log_f, d_neg_log_surv) = noise.score_terms(u);
        // dL/db = (dL/du) · (−x)
        let dl_du = if o.sale {
            let s = noise.survival(u);
            if s > LOG_FLOOR {
                loss -= s.ln();
                d_neg_log_surv
            } else {
                loss -= LOG_FLOOR.ln();
                0.0
            }
        } else {
            let f = noise.cdf(u);
            if f > LOG_FLOOR {
                loss -= f.ln();
                -d_log_f
            } else {
                loss -= LOG_FLOOR.ln();
                0.0
            }
        };
        for (g, xj) in grad.iter_mut().zip(&o.x) {
            *g -= dl_du * xj;
        }
    }
    let n = data.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

/// `nll(coef; base) + λ ‖coef‖₁`.
pub fn penalized_objective(
    coef: &[f64],
    base: Option<&[f64]>,
    data: &[Observation],
    noise: &NoiseModel,
    l1_penalty: f64,
) -> Result<f64> {
    let (loss, _) = nll_and_gradient(coef, base, data, noise)?;
    Ok(loss + l1_penalty * coef.iter().map(|c| c.abs()).sum::<f64>())
}

/// Euclidean projection onto `{b : ‖b‖₁ ≤ radius}` (sort-based).
pub fn project_l1_ball(v: &mut [f64], radius: f64) {
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= radius {
        return;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - radius) / (i + 1) as f64;
        if *m > t {
            theta = t;
        } else {
            break;
        }
    }
    for x in v.iter_mut() {
        *x = x.signum() * (x.abs() - theta).max(0.0);
    }
}

/// Pooled maximum-likelihood fit, constrained to the L1 ball when
/// `cfg.l1_ball` is set. Non-convergence is reported, never raised.
pub fn fit_mle_aggregate(
    data: &[Observation],
    noise: &NoiseModel,
    cfg: &FitConfig,
) -> Result<Fit<LinearEstimate>> {
    cfg.validate()?;
    let dim = data
        .first()
        .map(|o| o.x.len())
        .ok_or_else(|| Error::InvalidInput("no observations to fit".into()))?;
    check_data(data, dim)?;
    let ball = cfg.l1_ball;
    let (coef, info) = proximal_gradient(
        vec![0.0; dim],
        |b| nll_unchecked(b, None, data, noise),
        |_| 0.0,
        |z, _| {
            if let Some(w) = ball {
                project_l1_ball(z, w);
            }
        },
        cfg,
    );
    Ok(Fit {
        estimate: LinearEstimate { coef, base: None },
        info,
    })
}

/// L1-penalised correction around a pooled estimate, solved by proximal
/// gradient with soft thresholding.
pub fn fit_mle_debias(
    data: &[Observation],
    base: &LinearEstimate,
    noise: &NoiseModel,
    cfg: &FitConfig,
) -> Result<Fit<LinearEstimate>> {
    cfg.validate()?;
    if base.base.is_some() {
        return Err(Error::InvalidInput(
            "debiasing needs a pooled estimate without its own base".into(),
        ));
    }
    let dim = base.dim();
    check_data(data, dim)?;
    let anchor = base.coef.clone();
    let lambda = cfg.l1_penalty;
    let (coef, info) = proximal_gradient(
        vec![0.0; dim],
        |b| nll_unchecked(b, Some(&anchor), data, noise),
        |b| lambda * b.iter().map(|c| c.abs()).sum::<f64>(),
        |z, step| soft_threshold(z, step * lambda),
        cfg,
    );
    Ok(Fit {
        estimate: LinearEstimate {
            coef,
            base: Some(anchor),
        },
        info,
    })
}
