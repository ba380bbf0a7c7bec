use std::sync::Arc;

use crate::environment::Observation;
use crate::error::{Error, Result};
use crate::kernel::{expansion_eval, gram, sym_matvec};
use crate::noise::NoiseModel;

use super::{Fit, FitConfig, FitInfo, LOG_FLOOR};

/// Kernel expansion `Σ α_i k(anchor_i, ·)` over the training covariates,
/// optionally stacked on a base estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEstimate {
    pub anchors: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub gamma: f64,
    pub base: Option<Arc<KernelEstimate>>,
    /// Ridge weight the expansion was fitted with.
    pub ridge: f64,
    /// RKHS norm of this expansion, excluding the base.
    pub rkhs_norm: f64,
}

impl KernelEstimate {
    pub fn zero(gamma: f64) -> Self {
        Self {
            anchors: Vec::new(),
            alpha: Vec::new(),
            gamma,
            base: None,
            ridge: 0.0,
            rkhs_norm: 0.0,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if let Some(a) = self.anchors.first() {
            if a.len() != x.len() {
                return Err(Error::InvalidInput(format!(
                    "covariate has length {}, estimate expects {}",
                    x.len(),
                    a.len()
                )));
            }
        }
        let base = match &self.base {
            Some(b) => b.predict(x)?,
            None => 0.0,
        };
        Ok(base + expansion_eval(&self.anchors, &self.alpha, self.gamma, x))
    }

    /// Every `(anchor, coefficient)` pair of this estimate and its bases.
    pub fn flatten(&self) -> (Vec<&[f64]>, Vec<f64>) {
        let mut pts = Vec::new();
        let mut coefs = Vec::new();
        let mut cur = Some(self);
        while let Some(e) = cur {
            pts.extend(e.anchors.iter().map(Vec::as_slice));
            coefs.extend_from_slice(&e.alpha);
            cur = e.base.as_deref();
        }
        (pts, coefs)
    }
}

/// `ridge_multiplier · n^(−2α / (2αβ + 1))`.
pub fn default_ridge_aggregate(n: usize, cfg: &FitConfig) -> f64 {
    let a = cfg.rkhs_alpha;
    let b = cfg.rkhs_beta;
    cfg.ridge_multiplier * (n.max(1) as f64).powf(-2.0 * a / (2.0 * a * b + 1.0))
}

/// `ridge_multiplier · (n · max(H, 0.01)²)^(−2α / (2α + 1))`.
pub fn default_ridge_debias(n: usize, cfg: &FitConfig) -> f64 {
    let a = cfg.rkhs_alpha;
    let h = cfg.similarity_h.max(0.01);
    cfg.ridge_multiplier * (n.max(1) as f64 * h * h).powf(-2.0 * a / (2.0 * a + 1.0))
}

/// Mean NLL at utilities `g` and, optionally, `dℓ/dg` per record (unscaled).
fn data_terms(g: &[f64], data: &[Observation], noise: &NoiseModel, grad: Option<&mut [f64]>) -> f64 {
    let mut loss = 0.0;
    let mut grad = grad;
    for (t, o) in data.iter().enumerate() {
        let u = o.price - g[t];
        let (d_log_f, d_neg_log_surv) = noise.score_terms(u);
        // dℓ/dg = −dℓ/du
        let dl_dg = if o.sale {
            let s = noise.survival(u);
            if s > LOG_FLOOR {
                loss -= s.ln();
                -d_neg_log_surv
            } else {
                loss -= LOG_FLOOR.ln();
                0.0
            }
        } else {
            let f = noise.cdf(u);
            if f > LOG_FLOOR {
                loss -= f.ln();
                d_log_f
            } else {
                loss -= LOG_FLOOR.ln();
                0.0
            }
        };
        if let Some(gr) = grad.as_deref_mut() {
            gr[t] = dl_dg;
        }
    }
    loss / data.len() as f64
}

fn check_data(data: &[Observation]) -> Result<usize> {
    let dim = data
        .first()
        .map(|o| o.x.len())
        .ok_or_else(|| Error::InvalidInput("no observations to fit".into()))?;
    if data.iter().any(|o| o.x.len() != dim) {
        return Err(Error::InvalidInput("observations have mixed covariate lengths".into()));
    }
    Ok(dim)
}

fn base_predictions(base: Option<&KernelEstimate>, data: &[Observation]) -> Result<Vec<f64>> {
    match base {
        Some(b) => data.iter().map(|o| b.predict(&o.x)).collect(),
        None => Ok(vec![0.0; data.len()]),
    }
}

/// Kernel objective `(1/n) Σ ℓ_t(base(x_t) + (Gα)_t) + λ αᵀGα` over anchors
/// at the data covariates, with its exact gradient in `α`.
pub fn kernel_objective_and_gradient(
    alpha: &[f64],
    base: Option<&KernelEstimate>,
    data: &[Observation],
    noise: &NoiseModel,
    gamma: f64,
    ridge: f64,
) -> Result<(f64, Vec<f64>)> {
    check_data(data)?;
    if alpha.len() != data.len() {
        return Err(Error::InvalidInput("one coefficient per observation required".into()));
    }
    let n = data.len();
    let xs: Vec<&[f64]> = data.iter().map(|o| o.x.as_slice()).collect();
    let g_mat = gram(&xs, gamma);
    let mut ga = vec![0.0; n];
    sym_matvec(&g_mat, alpha, &mut ga);
    let base = base_predictions(base, data)?;
    let util: Vec<f64> = base.iter().zip(&ga).map(|(b, a)| b + a).collect();
    let mut v = vec![0.0; n];
    let loss = data_terms(&util, data, noise, Some(&mut v));
    let penalty: f64 = alpha.iter().zip(&ga).map(|(a, b)| a * b).sum();
    let r: Vec<f64> = v
        .iter()
        .zip(alpha)
        .map(|(vt, at)| vt / n as f64 + 2.0 * ridge * at)
        .collect();
    let mut grad = vec![0.0; n];
    sym_matvec(&g_mat, &r, &mut grad);
    Ok((loss + ridge * penalty, grad))
}

/// Functional-gradient descent on `α` with Armijo backtracking in the RKHS
/// metric. The search direction `r = v/n + 2λα` satisfies `∇_α J = G r`.
fn solve(
    data: &[Observation],
    base_pred: &[f64],
    g_mat: &[f64],
    noise: &NoiseModel,
    ridge: f64,
    cfg: &FitConfig,
) -> (Vec<f64>, Vec<f64>, FitInfo) {
    let n = data.len();
    let mut alpha = vec![0.0; n];
    let mut ga = vec![0.0; n];
    let mut util = base_pred.to_vec();
    let mut v = vec![0.0; n];
    let mut total = data_terms(&util, data, noise, Some(&mut v));
    let mut trace = vec![total];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut r = vec![0.0; n];
    let mut gr = vec![0.0; n];
    let mut cand_alpha = vec![0.0; n];
    let mut cand_ga = vec![0.0; n];

    for iter in 1..=cfg.max_iters {
        iterations = iter;
        for t in 0..n {
            r[t] = v[t] / n as f64 + 2.0 * ridge * alpha[t];
        }
        sym_matvec(g_mat, &r, &mut gr);
        let rgr: f64 = r.iter().zip(&gr).map(|(a, b)| a * b).sum();
        if !(rgr > 0.0) {
            converged = true;
            break;
        }
        let accepted = loop {
            for t in 0..n {
                cand_alpha[t] = alpha[t] - step * r[t];
                cand_ga[t] = ga[t] - step * gr[t];
                util[t] = base_pred[t] + cand_ga[t];
            }
            let pen: f64 = cand_alpha.iter().zip(&cand_ga).map(|(a, b)| a * b).sum();
            let cand = data_terms(&util, data, noise, None) + ridge * pen;
            if cand <= total - 0.5 * step * rgr {
                break Some(cand);
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some(cand) = accepted else {
            converged = true;
            break;
        };
        let decrease = total - cand;
        let step_norm = step * rgr.sqrt();
        std::mem::swap(&mut alpha, &mut cand_alpha);
        std::mem::swap(&mut ga, &mut cand_ga);
        total = cand;
        trace.push(total);
        for t in 0..n {
            util[t] = base_pred[t] + ga[t];
        }
        data_terms(&util, data, noise, Some(&mut v));
        if step_norm < cfg.step_tolerance || decrease < cfg.objective_tolerance {
            converged = true;
            break;
        }
        step = (step * 2.0).min(1e8);
    }

    (
        alpha,
        ga,
        FitInfo {
            converged,
            iterations,
            objective_trace: trace,
        },
    )
}

fn fit(
    data: &[Observation],
    base: Option<Arc<KernelEstimate>>,
    noise: &NoiseModel,
    gamma: f64,
    ridge: f64,
    cfg: &FitConfig,
) -> Result<Fit<KernelEstimate>> {
    cfg.validate()?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    check_data(data)?;
    let base_pred = base_predictions(base.as_deref(), data)?;
    let anchors: Vec<Vec<f64>> = data.iter().map(|o| o.x.clone()).collect();
    let g_mat = gram(&anchors, gamma);
    let (alpha, ga, info) = solve(data, &base_pred, &g_mat, noise, ridge, cfg);
    let norm_sq: f64 = alpha.iter().zip(&ga).map(|(a, b)| a * b).sum();
    Ok(Fit {
        estimate: KernelEstimate {
            anchors,
            alpha,
            gamma,
            base,
            ridge,
            rkhs_norm: norm_sq.max(0.0).sqrt(),
        },
        info,
    })
}

/// Pooled kernel fit with the known-noise link. The ridge weight follows the
/// aggregate schedule unless `cfg.ridge_penalty` overrides it.
pub fn fit_krr_aggregate(
    data: &[Observation],
    noise: &NoiseModel,
    gamma: f64,
    cfg: &FitConfig,
) -> Result<Fit<KernelEstimate>> {
    let ridge = cfg
        .ridge_penalty
        .unwrap_or_else(|| default_ridge_aggregate(data.len(), cfg));
    fit(data, None, noise, gamma, ridge, cfg)
}

/// Kernel correction fitted on target data around `base`.
pub fn fit_krr_debias(
    data: &[Observation],
    base: Arc<KernelEstimate>,
    noise: &NoiseModel,
    gamma: f64,
    cfg: &FitConfig,
) -> Result<Fit<KernelEstimate>> {
    let ridge = cfg
        .ridge_penalty
        .unwrap_or_else(|| default_ridge_debias(data.len(), cfg));
    fit(data, Some(base), noise, gamma, ridge, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(x: Vec<f64>, price: f64, sale: bool) -> Observation {
        Observation {
            market_index: 0,
            time: 1,
            x,
            price,
            sale,
        }
    }

    fn unit() -> NoiseModel {
        NoiseModel::logistic(1.0, 1.0).unwrap()
    }

    fn sample_data() -> Vec<Observation> {
        (0..30)
            .map(|i| {
                let a = (i as f64 * 0.37).sin();
                let b = (i as f64 * 0.91).cos();
                obs(vec![a, b], 0.5 + 0.3 * a, (i * 7) % 3 == 0)
            })
            .collect()
    }

    #[test]
    fn huge_ridge_gives_zero_predictor() {
        let cfg = FitConfig {
            ridge_penalty: Some(1e9),
            ..FitConfig::default()
        };
        let fit = fit_krr_aggregate(&sample_data(), &unit(), 0.5, &cfg).unwrap();
        for o in sample_data() {
            assert!(fit.estimate.predict(&o.x).unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn symmetric_pair_predicts_zero() {
        let data = vec![obs(vec![0.2, 0.1], 0.0, true), obs(vec![0.2, 0.1], 0.0, false)];
        let cfg = FitConfig {
            ridge_penalty: Some(0.01),
            ..FitConfig::default()
        };
        let fit = fit_krr_aggregate(&data, &unit(), 0.5, &cfg).unwrap();
        assert!(fit.estimate.predict(&[0.2, 0.1]).unwrap().abs() < 1e-8);
    }

    #[test]
    fn huge_debias_ridge_keeps_base() {
        let cfg = FitConfig {
            ridge_penalty: Some(0.05),
            ..FitConfig::default()
        };
        let base = Arc::new(fit_krr_aggregate(&sample_data(), &unit(), 0.5, &cfg).unwrap().estimate);
        let strong = FitConfig {
            ridge_penalty: Some(1e9),
            ..FitConfig::default()
        };
        let deb = fit_krr_debias(&sample_data(), base.clone(), &unit(), 0.5, &strong).unwrap();
        for o in sample_data() {
            let d = deb.estimate.predict(&o.x).unwrap() - base.predict(&o.x).unwrap();
            assert!(d.abs() < 1e-6);
        }
    }

    #[test]
    fn zero_ridge_debias_around_zero_matches_aggregate() {
        let cfg = FitConfig {
            ridge_penalty: Some(0.0),
            max_iters: 200,
            ..FitConfig::default()
        };
        let data = sample_data();
        let agg = fit_krr_aggregate(&data, &unit(), 0.5, &cfg).unwrap();
        let zero = Arc::new(KernelEstimate::zero(0.5));
        let deb = fit_krr_debias(&data, zero, &unit(), 0.5, &cfg).unwrap();
        for o in &data {
            let a = agg.estimate.predict(&o.x).unwrap();
            let b = deb.estimate.predict(&o.x).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn objective_trace_is_nonincreasing() {
        let cfg = FitConfig {
            ridge_penalty: Some(0.01),
            ..FitConfig::default()
        };
        let fit = fit_krr_aggregate(&sample_data(), &unit(), 0.5, &cfg).unwrap();
        assert!(fit.info.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.info.converged);
    }

    #[test]
    fn recorded_norm_matches_gram_form() {
        let cfg = FitConfig {
            ridge_penalty: Some(0.02),
            ..FitConfig::default()
        };
        let est = fit_krr_aggregate(&sample_data(), &unit(), 0.5, &cfg).unwrap().estimate;
        let direct = crate::kernel::expansion_norm_sq(&est.anchors, &est.alpha, 0.5).sqrt();
        assert!((direct - est.rkhs_norm).abs() < 1e-9);
    }

    #[test]
    fn single_anchor_prediction() {
        let e = KernelEstimate {
            anchors: vec![vec![0.3, -0.4]],
            alpha: vec![2.0],
            gamma: 0.5,
            base: None,
            ridge: 0.0,
            rkhs_norm: 2.0,
        };
        assert_eq!(e.predict(&[0.3, -0.4]).unwrap(), 2.0);
        assert!(e.predict(&[0.3]).is_err());
    }

    #[test]
    fn ridge_schedules() {
        let cfg = FitConfig::default();
        // α = β = 1: n^(−2/3)
        assert!((default_ridge_aggregate(1000, &cfg) - 0.01).abs() < 1e-12);
        let h = FitConfig {
            similarity_h: 0.1,
            ..FitConfig::default()
        };
        // (1000 · 0.01)^(−2/3)
        assert!((default_ridge_debias(1000, &h) - 10f64.powf(-2.0 / 3.0)).abs() < 1e-12);
        let tiny = FitConfig {
            similarity_h: 0.0,
            ..FitConfig::default()
        };
        assert!((default_ridge_debias(1, &tiny) - (1e-4f64).powf(-2.0 / 3.0)).abs() < 1e-6);
    }
}
