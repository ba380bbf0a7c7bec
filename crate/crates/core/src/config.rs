//! Flat `key=value` experiment configuration.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. Unknown
//! keys are rejected. Overrides (`--set key=value`) are applied after the
//! file. [`ExperimentConfig::to_kv_string`] echoes every key so a config can
//! be written out and parsed back unchanged.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::environment::{Family, PriceRule, ScenarioKind};
use crate::estimators::FitConfig;
use crate::policies::PolicyKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config file not found: {0}")]
    MissingFile(String),
    #[error("{origin}: malformed line `{text}` (expected key=value)")]
    Malformed { origin: String, text: String },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: invalid value `{value}` for `{key}`: {reason}")]
    OutOfRange {
        origin: String,
        key: String,
        value: String,
        reason: String,
    },
}

impl ConfigError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::MissingFile(_) => 3,
            ConfigError::Malformed { .. } => 4,
            ConfigError::UnknownKey { .. } => 5,
            ConfigError::OutOfRange { .. } => 6,
        }
    }
}

/// Everything needed to run one experiment cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: Family,
    pub dim: usize,
    pub num_sources: usize,
    pub kind: ScenarioKind,
    /// L1 budget `W` of linear coefficients; also bounds mean utilities for pricing.
    pub l1_budget: f64,
    /// RKHS norm `R` of the kernel target.
    pub norm_budget: f64,
    pub gamma: f64,
    pub diff_fraction: f64,
    pub perturb_magnitude: f64,
    pub diff_budget: f64,
    pub n_centers: usize,
    pub noise_scale: f64,
    pub noise_support: f64,
    pub memoize_h: bool,
    pub horizon: u64,
    pub replications: usize,
    pub policy: PolicyKind,
    pub baseline: PolicyKind,
    pub switch_threshold: f64,
    pub accumulate: bool,
    pub l1_multiplier: f64,
    pub ridge_multiplier: f64,
    pub source_pricing: PriceRule,
    pub offline_n: usize,
    pub offline_pricing: PriceRule,
    pub max_iters: usize,
    pub step_tolerance: f64,
    pub objective_tolerance: f64,
    pub rkhs_alpha: f64,
    pub rkhs_beta: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        Self {
            family: Family::Linear,
            dim: 10,
            num_sources: 5,
            kind: ScenarioKind::Identical,
            l1_budget: 2.0,
            norm_budget: 1.0,
            gamma: 0.5,
            diff_fraction: 0.3,
            perturb_magnitude: 0.5,
            diff_budget: 0.3,
            n_centers: 50,
            noise_scale: 0.25,
            noise_support: 1.0,
            memoize_h: false,
            horizon: 2000,
            replications: 10,
            policy: PolicyKind::CmTdpOn,
            baseline: PolicyKind::SingleMarket,
            switch_threshold: 1.0,
            accumulate: false,
            l1_multiplier: 1.0,
            ridge_multiplier: 1.0,
            source_pricing: PriceRule::OracleNoisy,
            offline_n: 500,
            offline_pricing: PriceRule::OracleNoisy,
            max_iters: fit.max_iters,
            step_tolerance: fit.step_tolerance,
            objective_tolerance: fit.objective_tolerance,
            rkhs_alpha: fit.rkhs_alpha,
            rkhs_beta: fit.rkhs_beta,
            seed: 0,
        }
    }
}

/// `(key, description)` for every accepted key, in echo order.
pub const KEYS: &[(&str, &str)] = &[
    ("scenario.family", "linear | rkhs (default linear)"),
    ("scenario.d", "covariate dimension (default 10)"),
    ("scenario.K", "number of source markets (default 5)"),
    ("scenario.kind", "identical | sparse_diff (default identical)"),
    ("scenario.W", "L1 budget of linear coefficients and utility bound (default 2.0)"),
    ("scenario.R", "RKHS norm of the kernel target (default 1.0)"),
    ("scenario.gamma", "RBF bandwidth (default 0.5)"),
    ("scenario.diff_fraction", "fraction of coordinates a sparse source perturbs (default 0.3)"),
    ("scenario.perturb_magnitude", "half-width of sparse coefficient perturbations (default 0.5)"),
    ("scenario.diff_budget", "RKHS norm budget of kernel source differences (default 0.3)"),
    ("scenario.n_centers", "centers per random kernel expansion (default 50)"),
    ("noise.scale", "logistic noise scale (default 0.25)"),
    ("noise.support_bound", "nominal noise support half-width (default 1.0)"),
    ("noise.memoize_h", "tabulate the pricing map (default false)"),
    ("run.T", "horizon (default 2000)"),
    ("run.replications", "Monte-Carlo replications (default 10)"),
    ("policy.kind", "cm_tdp_on | cm_tdp_off | single_market | oracle (default cm_tdp_on)"),
    ("policy.baseline", "policy compared against (default single_market)"),
    ("policy.switch_threshold", "offline-to-online switch fraction of the log size (default 1.0)"),
    ("policy.accumulate", "refit on all past episodes (default false)"),
    ("policy.l1_multiplier", "constant in front of the debiasing L1 penalty (default 1.0)"),
    ("policy.ridge_multiplier", "constant in front of the kernel ridge schedules (default 1.0)"),
    ("policy.source_pricing", "oracle_noisy | uniform_random for live sources (default oracle_noisy)"),
    ("offline.n_K", "offline source log size (default 500)"),
    ("offline.price_rule", "oracle_noisy | uniform_random (default oracle_noisy)"),
    ("fit.max_iters", "solver iteration cap (default 500)"),
    ("fit.step_tolerance", "solver step-norm tolerance (default 1e-8)"),
    ("fit.objective_tolerance", "solver objective-decrease tolerance (default 1e-10)"),
    ("fit.rkhs_alpha", "smoothness exponent of the ridge schedules, > 0.5 (default 1.0)"),
    ("fit.rkhs_beta", "effective-dimension exponent in (0, 1] (default 1.0)"),
    ("seed", "master seed (default 0)"),
];

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Linear => "linear",
        Family::Rkhs => "rkhs",
    }
}

pub fn kind_name(k: ScenarioKind) -> &'static str {
    match k {
        ScenarioKind::Identical => "identical",
        ScenarioKind::SparseDiff => "sparse_diff",
    }
}

pub fn policy_name(p: PolicyKind) -> &'static str {
    match p {
        PolicyKind::CmTdpOn => "cm_tdp_on",
        PolicyKind::CmTdpOff => "cm_tdp_off",
        PolicyKind::SingleMarket => "single_market",
        PolicyKind::Oracle => "oracle",
    }
}

fn rule_name(r: PriceRule) -> &'static str {
    match r {
        PriceRule::OracleNoisy => "oracle_noisy",
        PriceRule::UniformRandom => "uniform_random",
    }
}

pub fn parse_policy(s: &str) -> Option<PolicyKind> {
    match s {
        "cm_tdp_on" => Some(PolicyKind::CmTdpOn),
        "cm_tdp_off" => Some(PolicyKind::CmTdpOff),
        "single_market" => Some(PolicyKind::SingleMarket),
        "oracle" => Some(PolicyKind::Oracle),
        _ => None,
    }
}

impl ExperimentConfig {
    /// Parses `path` (if given) and then `overrides`, validating the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|_| ConfigError::MissingFile(p.display().to_string()))?;
            cfg.apply_text(&text, &p.display().to_string())?;
        }
        cfg.apply_overrides(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies the lines of a config document; `origin` prefixes error locations.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = format!("{origin}:{}", i + 1);
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
                origin: at.clone(),
                text: raw.to_string(),
            })?;
            self.set(k.trim(), v.trim(), &at)?;
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for (i, o) in overrides.iter().enumerate() {
            let at = format!("override #{}", i + 1);
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Malformed {
                origin: at.clone(),
                text: o.clone(),
            })?;
            self.set(k.trim(), v.trim(), &at)?;
        }
        Ok(())
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::OutOfRange {
            origin: origin.to_string(),
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        };
        let float = || value.parse::<f64>().map_err(|_| bad("not a number"));
        let uint = || value.parse::<u64>().map_err(|_| bad("not a nonnegative integer"));
        let boolean = || match value {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(bad("expected true or false")),
        };
        let rule = || match value {
            "oracle_noisy" => Ok(PriceRule::OracleNoisy),
            "uniform_random" => Ok(PriceRule::UniformRandom),
            _ => Err(bad("expected oracle_noisy or uniform_random")),
        };
        let policy = || parse_policy(value).ok_or_else(|| bad("unknown policy kind"));

        match key {
            "scenario.family" => {
                self.family = match value {
                    "linear" => Family::Linear,
                    "rkhs" => Family::Rkhs,
                    _ => return Err(bad("expected linear or rkhs")),
                }
            }
            "scenario.d" => self.dim = uint()? as usize,
            "scenario.K" => self.num_sources = uint()? as usize,
            "scenario.kind" => {
                self.kind = match value {
                    "identical" => ScenarioKind::Identical,
                    "sparse_diff" | "sparse" => ScenarioKind::SparseDiff,
                    _ => return Err(bad("expected identical or sparse_diff")),
                }
            }
            "scenario.W" => self.l1_budget = float()?,
            "scenario.R" => self.norm_budget = float()?,
            "scenario.gamma" => self.gamma = float()?,
            "scenario.diff_fraction" => self.diff_fraction = float()?,
            "scenario.perturb_magnitude" => self.perturb_magnitude = float()?,
            "scenario.diff_budget" => self.diff_budget = float()?,
            "scenario.n_centers" => self.n_centers = uint()? as usize,
            "noise.scale" => self.noise_scale = float()?,
            "noise.support_bound" => self.noise_support = float()?,
            "noise.memoize_h" => self.memoize_h = boolean()?,
            "run.T" => self.horizon = uint()?,
            "run.replications" => self.replications = uint()? as usize,
            "policy.kind" => self.policy = policy()?,
            "policy.baseline" => self.baseline = policy()?,
            "policy.switch_threshold" => self.switch_threshold = float()?,
            "policy.accumulate" => self.accumulate = boolean()?,
            "policy.l1_multiplier" => self.l1_multiplier = float()?,
            "policy.ridge_multiplier" => self.ridge_multiplier = float()?,
            "policy.source_pricing" => self.source_pricing = rule()?,
            "offline.n_K" => self.offline_n = uint()? as usize,
            "offline.price_rule" => self.offline_pricing = rule()?,
            "fit.max_iters" => self.max_iters = uint()? as usize,
            "fit.step_tolerance" => self.step_tolerance = float()?,
            "fit.objective_tolerance" => self.objective_tolerance = float()?,
            "fit.rkhs_alpha" => self.rkhs_alpha = float()?,
            "fit.rkhs_beta" => self.rkhs_beta = float()?,
            "seed" => self.seed = uint()?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    origin: origin.to_string(),
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, key: &str, value: String, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange {
                    origin: "validation".into(),
                    key: key.into(),
                    value,
                    reason: reason.into(),
                })
            }
        };
        check(self.dim >= 1, "scenario.d", self.dim.to_string(), "must be at least 1")?;
        check(self.num_sources >= 1, "scenario.K", self.num_sources.to_string(), "must be at least 1")?;
        check(self.l1_budget > 0.0, "scenario.W", self.l1_budget.to_string(), "must be positive")?;
        check(self.norm_budget > 0.0, "scenario.R", self.norm_budget.to_string(), "must be positive")?;
        check(self.gamma > 0.0, "scenario.gamma", self.gamma.to_string(), "must be positive")?;
        check(
            (0.0..=1.0).contains(&self.diff_fraction),
            "scenario.diff_fraction",
            self.diff_fraction.to_string(),
            "must lie in [0, 1]",
        )?;
        check(
            self.perturb_magnitude >= 0.0,
            "scenario.perturb_magnitude",
            self.perturb_magnitude.to_string(),
            "must be nonnegative",
        )?;
        check(self.diff_budget >= 0.0, "scenario.diff_budget", self.diff_budget.to_string(), "must be nonnegative")?;
        check(self.n_centers >= 1, "scenario.n_centers", self.n_centers.to_string(), "must be at least 1")?;
        check(self.noise_scale > 0.0, "noise.scale", self.noise_scale.to_string(), "must be positive")?;
        check(self.noise_support > 0.0, "noise.support_bound", self.noise_support.to_string(), "must be positive")?;
        check(self.horizon >= 1, "run.T", self.horizon.to_string(), "must be at least 1")?;
        check(self.horizon <= 1 << 24, "run.T", self.horizon.to_string(), "must be at most 2^24")?;
        check(self.replications >= 1, "run.replications", self.replications.to_string(), "must be at least 1")?;
        check(
            self.switch_threshold > 0.0,
            "policy.switch_threshold",
            self.switch_threshold.to_string(),
            "must be positive",
        )?;
        check(self.l1_multiplier >= 0.0, "policy.l1_multiplier", self.l1_multiplier.to_string(), "must be nonnegative")?;
        check(
            self.ridge_multiplier >= 0.0,
            "policy.ridge_multiplier",
            self.ridge_multiplier.to_string(),
            "must be nonnegative",
        )?;
        check(
            self.offline_n >= self.num_sources || self.policy != PolicyKind::CmTdpOff,
            "offline.n_K",
            self.offline_n.to_string(),
            "must be at least K",
        )?;
        check(self.max_iters >= 1, "fit.max_iters", self.max_iters.to_string(), "must be at least 1")?;
        check(self.step_tolerance > 0.0, "fit.step_tolerance", self.step_tolerance.to_string(), "must be positive")?;
        check(
            self.objective_tolerance > 0.0,
            "fit.objective_tolerance",
            self.objective_tolerance.to_string(),
            "must be positive",
        )?;
        check(self.rkhs_alpha > 0.5, "fit.rkhs_alpha", self.rkhs_alpha.to_string(), "must exceed 0.5")?;
        check(
            self.rkhs_beta > 0.0 && self.rkhs_beta <= 1.0,
            "fit.rkhs_beta",
            self.rkhs_beta.to_string(),
            "must lie in (0, 1]",
        )?;
        Ok(())
    }

    /// Solver settings derived from this config. Penalties are filled in by the policies.
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            max_iters: self.max_iters,
            step_tolerance: self.step_tolerance,
            objective_tolerance: self.objective_tolerance,
            ridge_multiplier: self.ridge_multiplier,
            rkhs_alpha: self.rkhs_alpha,
            rkhs_beta: self.rkhs_beta,
            similarity_h: self.diff_budget,
            ..FitConfig::default()
        }
    }

    /// Short scenario tag such as `linear_sparse_diff`.
    pub fn scenario_label(&self) -> String {
        format!("{}_{}", family_name(self.family), kind_name(self.kind))
    }

    /// Every key with its current value, one `key=value` per line.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        for (key, _) in KEYS {
            s.push_str(key);
            s.push('=');
            s.push_str(&self.value_of(key));
            s.push('\n');
        }
        s
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "scenario.family" => family_name(self.family).into(),
            "scenario.d" => self.dim.to_string(),
            "scenario.K" => self.num_sources.to_string(),
            "scenario.kind" => kind_name(self.kind).into(),
            "scenario.W" => self.l1_budget.to_string(),
            "scenario.R" => self.norm_budget.to_string(),
            "scenario.gamma" => self.gamma.to_string(),
            "scenario.diff_fraction" => self.diff_fraction.to_string(),
            "scenario.perturb_magnitude" => self.perturb_magnitude.to_string(),
            "scenario.diff_budget" => self.diff_budget.to_string(),
            "scenario.n_centers" => self.n_centers.to_string(),
            "noise.scale" => self.noise_scale.to_string(),
            "noise.support_bound" => self.noise_support.to_string(),
            "noise.memoize_h" => self.memoize_h.to_string(),
            "run.T" => self.horizon.to_string(),
            "run.replications" => self.replications.to_string(),
            "policy.kind" => policy_name(self.policy).into(),
            "policy.baseline" => policy_name(self.baseline).into(),
            "policy.switch_threshold" => self.switch_threshold.to_string(),
            "policy.accumulate" => self.accumulate.to_string(),
            "policy.l1_multiplier" => self.l1_multiplier.to_string(),
            "policy.ridge_multiplier" => self.ridge_multiplier.to_string(),
            "policy.source_pricing" => rule_name(self.source_pricing).into(),
            "offline.n_K" => self.offline_n.to_string(),
            "offline.price_rule" => rule_name(self.offline_pricing).into(),
            "fit.max_iters" => self.max_iters.to_string(),
            "fit.step_tolerance" => self.step_tolerance.to_string(),
            "fit.objective_tolerance" => self.objective_tolerance.to_string(),
            "fit.rkhs_alpha" => self.rkhs_alpha.to_string(),
            "fit.rkhs_beta" => self.rkhs_beta.to_string(),
            "seed" => self.seed.to_string(),
            _ => unreachable!("every KEYS entry has a value"),
        }
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_kv_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("# nothing here\n\n", "mem").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.gamma, 0.5);
        assert_eq!(cfg.l1_budget, 2.0);
        assert_eq!(cfg.noise_scale, 0.25);
        assert_eq!(cfg.horizon, 2000);
        assert_eq!(cfg.replications, 10);
    }

    #[test]
    fn overrides_apply_after_file() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("run.T = 500\nscenario.family=rkhs # trailing comment\n", "mem").unwrap();
        cfg.apply_overrides(&["run.T=128".into(), "scenario.gamma=0.5".into()]).unwrap();
        assert_eq!(cfg.horizon, 128);
        assert_eq!(cfg.family, Family::Rkhs);
        assert_eq!(cfg.gamma, 0.5);
    }

    #[test]
    fn distinct_error_classes() {
        let mut cfg = ExperimentConfig::default();
        let e = cfg.apply_text("run.T=5\nnot a pair\n", "f.cfg").unwrap_err();
        assert_eq!(e.exit_code(), 4);
        assert!(e.to_string().contains("f.cfg:2"));
        let e = cfg.apply_overrides(&["run.horizon=5".into()]).unwrap_err();
        assert_eq!(e.exit_code(), 5);
        let e = cfg.apply_overrides(&["run.T=-3".into()]).unwrap_err();
        assert_eq!(e.exit_code(), 6);
        cfg.apply_overrides(&["noise.scale=0".into()]).unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 6);
        let e = ExperimentConfig::load(Some(Path::new("/definitely/not/here.cfg")), &[]).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_overrides(&[
            "scenario.family=rkhs".into(),
            "scenario.kind=sparse_diff".into(),
            "fit.step_tolerance=3.5e-9".into(),
            "policy.kind=cm_tdp_off".into(),
            "noise.scale=0.1".into(),
            "seed=42".into(),
        ])
        .unwrap();
        let mut back = ExperimentConfig::default();
        back.apply_text(&cfg.to_kv_string(), "echo").unwrap();
        assert_eq!(back, cfg);
    }
}
