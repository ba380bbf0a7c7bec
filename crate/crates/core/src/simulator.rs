//! Seeded Monte-Carlo regret simulation.
//!
//! Every replication draws its scenario, covariates, sale uniforms, live
//! source records and offline log from separate ChaCha streams keyed by
//! `(seed, replication, purpose)`. Runs of different policies on the same
//! seed therefore face the same markets, covariates and sale uniforms.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::environment::{
    build_linear_scenario, build_rkhs_scenario, generate_offline_log, outcome_from_uniform,
    sample_covariate, sample_outcome, source_price, Family, LinearScenario, Market, MarketSystem,
    Observation, RkhsScenario,
};
use crate::error::{Error, Result};
use crate::estimators::Estimate;
use crate::kernel::expansion_norm_sq;
use crate::noise::{NoiseModel, PriceMap, DEFAULT_SOLVER_TOLERANCE};
use crate::policies::{episode_of, episode_start, PolicyKind, PolicySettings, PolicyState};

const STREAM_SCENARIO: u64 = 1;
const STREAM_COVARIATES: u64 = 2;
const STREAM_OUTCOMES: u64 = 3;
const STREAM_SOURCES: u64 = 4;
const STREAM_OFFLINE: u64 = 5;

/// Grid step of the tabulated pricing map.
pub const MEMO_STEP: f64 = 1e-3;

/// Independent generator for `(seed, replication, purpose)`.
pub fn stream(seed: u64, replication: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((replication as u64) << 8) | purpose);
    rng
}

/// Markets, noise model and pricing map shared by all policies of one replication.
#[derive(Debug, Clone)]
pub struct World {
    pub system: MarketSystem,
    pub price_map: PriceMap,
    /// `(u_F, ℓ_F)` over the price and utility bounds.
    pub regularity: (f64, f64),
}

pub fn build_world(config: &ExperimentConfig, replication: usize) -> Result<World> {
    let noise = NoiseModel::logistic(config.noise_scale, config.noise_support)?;
    let mut rng = stream(config.seed, replication, STREAM_SCENARIO);
    let system = match config.family {
        Family::Linear => build_linear_scenario(
            &LinearScenario {
                dim: config.dim,
                num_sources: config.num_sources,
                kind: config.kind,
                l1_budget: config.l1_budget,
                sparsity_fraction: config.diff_fraction,
                perturb_magnitude: config.perturb_magnitude,
            },
            noise,
            &mut rng,
        )?,
        Family::Rkhs => build_rkhs_scenario(
            &RkhsScenario {
                dim: config.dim,
                num_sources: config.num_sources,
                kind: config.kind,
                norm_budget: config.norm_budget,
                diff_budget: config.diff_budget,
                gamma: config.gamma,
                n_centers: config.n_centers,
            },
            noise,
            &mut rng,
        )?,
    };
    let mut price_map = PriceMap::new(noise, config.l1_budget, DEFAULT_SOLVER_TOLERANCE)?;
    if config.memoize_h {
        price_map = price_map.with_memo(MEMO_STEP)?;
    }
    let regularity = noise.regularity_constants(price_map.price_cap(), config.l1_budget)?;
    Ok(World {
        system,
        price_map,
        regularity,
    })
}

/// Expected revenue lost by posting `price` instead of the optimal price at `x`.
pub fn expected_step_regret(system: &MarketSystem, pm: &PriceMap, x: &[f64], price: f64) -> Result<f64> {
    let g = system.target.mean_utility(x)?;
    let best = pm.price_of(g)?;
    let noise = &system.noise;
    Ok((noise.expected_revenue(g, best)? - noise.expected_revenue(g, price)?).max(0.0))
}

/// Distance from an estimate to the target utility: L2 for linear
/// coefficients, RKHS norm for kernel expansions.
pub fn estimation_error(estimate: &Estimate, target: &Market) -> Result<f64> {
    match (estimate, target) {
        (Estimate::Linear(e), Market::Linear(m)) => {
            if e.dim() != m.beta.len() {
                return Err(Error::InvalidInput("estimate and target dimensions differ".into()));
            }
            Ok(e.effective()
                .iter()
                .zip(&m.beta)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt())
        }
        (Estimate::Kernel(e), Market::Kernel(m)) => {
            let (mut pts, mut coefs) = e.flatten();
            pts.extend(m.centers.iter().map(Vec::as_slice));
            coefs.extend(m.weights.iter().map(|w| -w));
            Ok(expansion_norm_sq(&pts, &coefs, m.gamma).max(0.0).sqrt())
        }
        _ => Err(Error::InvalidInput("estimate and target families differ".into())),
    }
}

/// What one policy did over one replication.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub policy: PolicyKind,
    pub replication: usize,
    pub step_regret: Vec<f64>,
    pub cumulative_regret: Vec<f64>,
    /// `(m, first t of m, estimation error)` right after each episode opens.
    pub episode_errors: Vec<(u32, u64, f64)>,
    pub min_price: f64,
    pub max_price: f64,
    pub price_cap: f64,
    pub fit_count: usize,
    pub skipped_refits: usize,
    pub nonconverged_fits: usize,
    pub phase_switches: usize,
    pub source_reads: usize,
    pub rescaled_sources: usize,
    /// Estimate in force during each episode, when captured.
    pub estimates: Vec<(u32, Estimate)>,
    pub wall_time: Duration,
}

/// Equality ignores wall time.
impl PartialEq for RunResult {
    fn eq(&self, o: &Self) -> bool {
        self.policy == o.policy
            && self.replication == o.replication
            && self.step_regret == o.step_regret
            && self.cumulative_regret == o.cumulative_regret
            && self.episode_errors == o.episode_errors
            && self.min_price == o.min_price
            && self.max_price == o.max_price
            && self.price_cap == o.price_cap
            && self.fit_count == o.fit_count
            && self.skipped_refits == o.skipped_refits
            && self.nonconverged_fits == o.nonconverged_fits
            && self.phase_switches == o.phase_switches
            && self.source_reads == o.source_reads
            && self.rescaled_sources == o.rescaled_sources
            && self.estimates == o.estimates
    }
}

impl RunResult {
    pub fn final_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }

    /// Regret accumulated within each episode, `(m, sum)`.
    pub fn episode_regret(&self) -> Vec<(u32, f64)> {
        let mut out: Vec<(u32, f64)> = Vec::new();
        for (i, r) in self.step_regret.iter().enumerate() {
            let (m, _) = episode_of(i as u64 + 1);
            match out.last_mut() {
                Some((k, s)) if *k == m => *s += r,
                _ => out.push((m, *r)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub capture_estimates: bool,
}

pub fn policy_settings(config: &ExperimentConfig, world: &World) -> PolicySettings {
    PolicySettings {
        kind: config.policy,
        family: config.family,
        dim: config.dim,
        gamma: config.gamma,
        l1_budget: config.l1_budget,
        u_f: world.regularity.0,
        l1_multiplier: config.l1_multiplier,
        switch_threshold: config.switch_threshold,
        accumulate: config.accumulate,
        fit: config.fit_config(),
    }
}

/// Offline source log of replication `replication`.
pub fn offline_log(config: &ExperimentConfig, world: &World, replication: usize) -> Result<Vec<Observation>> {
    let mut rng = stream(config.seed, replication, STREAM_OFFLINE);
    generate_offline_log(
        &world.system,
        &world.price_map,
        config.offline_n,
        config.offline_pricing,
        &mut rng,
    )
}

pub fn run_single(config: &ExperimentConfig, replication: usize) -> Result<RunResult> {
    run_single_with(config, replication, RunOptions::default())
}

pub fn run_single_with(config: &ExperimentConfig, replication: usize, opts: RunOptions) -> Result<RunResult> {
    let started = Instant::now();
    let world = build_world(config, replication)?;
    let system = &world.system;
    let pm = &world.price_map;
    let noise = system.noise;
    let settings = policy_settings(config, &world);

    let mut policy = match config.policy {
        PolicyKind::Oracle => PolicyState::oracle(settings, system.target.clone()),
        PolicyKind::CmTdpOff => {
            let log = offline_log(config, &world, replication)?;
            PolicyState::new(settings, system.num_sources(), &noise, Some(&log))?
        }
        _ => PolicyState::new(settings, system.num_sources(), &noise, None)?,
    };
    let live_sources = config.policy == PolicyKind::CmTdpOn;

    let mut cov_rng = stream(config.seed, replication, STREAM_COVARIATES);
    let mut out_rng = stream(config.seed, replication, STREAM_OUTCOMES);
    let mut src_rng = stream(config.seed, replication, STREAM_SOURCES);

    let horizon = config.horizon as usize;
    let mut step_regret = Vec::with_capacity(horizon);
    let mut cumulative_regret = Vec::with_capacity(horizon);
    let mut episode_errors = Vec::new();
    let mut estimates = Vec::new();
    let mut total = 0.0;
    let (mut min_price, mut max_price) = (f64::INFINITY, f64::NEG_INFINITY);

    for t in 1..=config.horizon {
        let (m, opens) = episode_of(t);
        if opens {
            if m >= 2 {
                policy.refit_on_boundary(m, &noise)?;
            }
            let err = match config.policy {
                PolicyKind::Oracle => 0.0,
                _ => estimation_error(policy.estimate(), &system.target)?,
            };
            episode_errors.push((m, episode_start(m), err));
            if opts.capture_estimates {
                estimates.push((m, policy.estimate().clone()));
            }
        }

        let x = sample_covariate(system.dim, &mut cov_rng);
        let price = policy.post_price(&x, pm)?;
        min_price = min_price.min(price);
        max_price = max_price.max(price);
        let r = expected_step_regret(system, pm, &x, price)?;
        total += r;
        step_regret.push(r);
        cumulative_regret.push(total);

        let u: f64 = out_rng.random();
        let sale = outcome_from_uniform(&system.target, &noise, &x, price, u)?;
        policy.observe(Observation {
            market_index: 0,
            time: t,
            x,
            price,
            sale,
        })?;

        if live_sources {
            for (k, market) in system.sources.iter().enumerate() {
                let xs = sample_covariate(system.dim, &mut src_rng);
                let ps = source_price(market, pm, &xs, config.source_pricing, &mut src_rng)?;
                let sale = sample_outcome(market, &noise, &xs, ps, &mut src_rng)?;
                policy.observe(Observation {
                    market_index: k + 1,
                    time: t,
                    x: xs,
                    price: ps,
                    sale,
                })?;
            }
        }
    }

    Ok(RunResult {
        policy: config.policy,
        replication,
        step_regret,
        cumulative_regret,
        episode_errors,
        min_price,
        max_price,
        price_cap: pm.price_cap(),
        fit_count: policy.fit_count(),
        skipped_refits: policy.skipped_refits(),
        nonconverged_fits: policy.nonconverged_fits(),
        phase_switches: policy.phase_switches(),
        source_reads: policy.source_reads(),
        rescaled_sources: system.rescaled_sources,
        estimates,
        wall_time: started.elapsed(),
    })
}

/// Replication-averaged results of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub policy: PolicyKind,
    pub mean_cum: Vec<f64>,
    pub se_cum: Vec<f64>,
    pub final_mean: f64,
    pub final_se: f64,
    /// `(m, first t of m, mean estimation error)`.
    pub mean_episode_errors: Vec<(u32, u64, f64)>,
    pub nonconverged_fits: usize,
    pub runs: Vec<RunResult>,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn aggregate(runs: Vec<RunResult>) -> Result<AggregateStats> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidInput("no runs to aggregate".into()))?;
    let len = first.cumulative_regret.len();
    let policy = first.policy;
    let mut mean_cum = Vec::with_capacity(len);
    let mut se_cum = Vec::with_capacity(len);
    let mut col = vec![0.0; runs.len()];
    for t in 0..len {
        for (c, r) in col.iter_mut().zip(&runs) {
            *c = r.cumulative_regret[t];
        }
        let (m, s) = mean_se(&col);
        mean_cum.push(m);
        se_cum.push(s);
    }
    let mean_episode_errors = first
        .episode_errors
        .iter()
        .enumerate()
        .map(|(i, &(m, t, _))| {
            let avg = runs.iter().map(|r| r.episode_errors[i].2).sum::<f64>() / runs.len() as f64;
            (m, t, avg)
        })
        .collect();
    Ok(AggregateStats {
        policy,
        final_mean: mean_cum.last().copied().unwrap_or(0.0),
        final_se: se_cum.last().copied().unwrap_or(0.0),
        mean_cum,
        se_cum,
        mean_episode_errors,
        nonconverged_fits: runs.iter().map(|r| r.nonconverged_fits).sum(),
        runs,
    })
}

/// Runs every replication of `config`, in parallel when asked. Results
/// do not depend on the thread count.
pub fn run_replicated(config: &ExperimentConfig, parallel: bool) -> Result<AggregateStats> {
    let reps = 0..config.replications;
    let runs: Result<Vec<RunResult>> = if parallel {
        reps.into_par_iter().map(|r| run_single(config, r)).collect()
    } else {
        reps.map(|r| run_single(config, r)).collect()
    };
    aggregate(runs?)
}

/// Candidate-versus-baseline summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub regret_reduction_pct: f64,
    pub std_reduction_pct: f64,
    /// Baseline time to reach its own final estimation error divided by the
    /// candidate's time to reach it; NaN when the candidate never does.
    pub speed_ratio: f64,
}

pub fn compare(candidate: &AggregateStats, baseline: &AggregateStats) -> Comparison {
    let pct = |c: f64, b: f64| if b > 0.0 { 100.0 * (1.0 - c / b) } else { 0.0 };
    let target = baseline.mean_episode_errors.last().map(|e| e.2);
    let reach = |errs: &[(u32, u64, f64)], eps: f64| errs.iter().find(|e| e.2 <= eps).map(|e| e.1 as f64);
    let speed_ratio = match target {
        Some(eps) => match (reach(&baseline.mean_episode_errors, eps), reach(&candidate.mean_episode_errors, eps)) {
            (Some(b), Some(c)) => b / c,
            _ => f64::NAN,
        },
        None => f64::NAN,
    };
    Comparison {
        regret_reduction_pct: pct(candidate.final_mean, baseline.final_mean),
        std_reduction_pct: pct(candidate.final_se, baseline.final_se),
        speed_ratio,
    }
}

/// Runs `config` and the same config under `config.baseline`, on the same seeds.
pub fn run_paired(config: &ExperimentConfig, parallel: bool) -> Result<(AggregateStats, AggregateStats, Comparison)> {
    let cand = run_replicated(config, parallel)?;
    let base_cfg = ExperimentConfig {
        policy: config.baseline,
        ..config.clone()
    };
    let base = run_replicated(&base_cfg, parallel)?;
    let cmp = compare(&cand, &base);
    Ok((cand, base, cmp))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            dim: 3,
            num_sources: 2,
            horizon: 70,
            replications: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn oracle_has_zero_regret() {
        let cfg = ExperimentConfig {
            policy: PolicyKind::Oracle,
            ..small()
        };
        let r = run_single(&cfg, 0).unwrap();
        assert!(r.step_regret.iter().all(|&v| v.abs() < 1e-9));
        assert_eq!(r.fit_count, 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = small();
        assert_eq!(run_single(&cfg, 1).unwrap(), run_single(&cfg, 1).unwrap());
        assert_ne!(run_single(&cfg, 0).unwrap(), run_single(&cfg, 1).unwrap());
    }

    #[test]
    fn cumulative_is_running_sum() {
        let r = run_single(&small(), 0).unwrap();
        let mut acc = 0.0;
        for (s, c) in r.step_regret.iter().zip(&r.cumulative_regret) {
            acc += s;
            assert_eq!(acc, *c);
        }
        assert_eq!(r.episode_errors.len(), 7);
        let by_episode: f64 = r.episode_regret().iter().map(|e| e.1).sum();
        assert!((by_episode - r.final_regret()).abs() < 1e-9);
    }

    #[test]
    fn self_comparison() {
        let agg = run_replicated(&small(), false).unwrap();
        let c = compare(&agg, &agg);
        assert_eq!(c.regret_reduction_pct, 0.0);
        assert_eq!(c.speed_ratio, 1.0);
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = small();
        assert_eq!(run_replicated(&cfg, true).unwrap(), run_replicated(&cfg, false).unwrap());
    }
}
