//! Sequential pricing policies on the doubling episode schedule.
//!
//! Episode `m` covers times `2^(m−1) ..= 2^m − 1`. Estimates are refitted
//! only when a new episode starts, from data gathered in the preceding
//! episode (or all earlier episodes when accumulation is enabled).

use std::sync::Arc;

use crate::environment::{Family, Market, Observation};
use crate::error::{Error, Result};
use crate::estimators::{
    default_l1_penalty, fit_krr_aggregate, fit_krr_debias, fit_mle_aggregate, fit_mle_debias,
    Estimate, FitConfig, FitInfo, KernelEstimate,
};
use crate::noise::{NoiseModel, PriceMap};

/// Episode index `m = floor(log₂ t) + 1` and whether `t` opens that episode.
pub fn episode_of(t: u64) -> (u32, bool) {
    assert!(t >= 1, "time starts at 1");
    let m = 64 - t.leading_zeros();
    (m, t.is_power_of_two())
}

/// First time step of episode `m`.
pub fn episode_start(m: u32) -> u64 {
    1u64 << (m - 1)
}

/// Episode partition of `1..=horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSchedule {
    pub horizon: u64,
}

impl EpisodeSchedule {
    pub fn new(horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        Ok(Self { horizon })
    }

    pub fn num_episodes(&self) -> u32 {
        episode_of(self.horizon).0
    }

    /// `(m, first, last)` for every episode, the last one truncated at the horizon.
    pub fn episodes(&self) -> Vec<(u32, u64, u64)> {
        (1..=self.num_episodes())
            .map(|m| {
                let first = episode_start(m);
                let last = (2 * first - 1).min(self.horizon);
                (m, first, last)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Online-to-online transfer: live source streams.
    CmTdpOn,
    /// Offline-to-online transfer: a fixed source log, then solo learning.
    CmTdpOff,
    /// Target-only learning on the same schedule.
    SingleMarket,
    /// Prices with the true target utility.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Transfer,
    Solo,
}

/// Knobs shared by every policy kind.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySettings {
    pub kind: PolicyKind,
    pub family: Family,
    pub dim: usize,
    /// RBF bandwidth of the kernel estimators.
    pub gamma: f64,
    /// L1 radius of the pooled linear fits.
    pub l1_budget: f64,
    /// `u_F` entering the default L1 penalty.
    pub u_f: f64,
    pub l1_multiplier: f64,
    /// Fraction of the offline log size the target must reach before the
    /// offline-to-online policy stops transferring.
    pub switch_threshold: f64,
    /// Pool all past episodes instead of only the preceding one.
    pub accumulate: bool,
    pub fit: FitConfig,
}

/// Mutable state of one policy within one simulation run.
#[derive(Debug, Clone)]
pub struct PolicyState {
    settings: PolicySettings,
    estimate: Estimate,
    episode: u32,
    last_time: u64,
    /// Current-episode observations per market index.
    buffers: Vec<Vec<Observation>>,
    /// Completed-episode observations per market index (accumulate mode only).
    history: Vec<Vec<Observation>>,
    phase: Phase,
    offline_len: usize,
    aggregate: Option<Estimate>,
    oracle_market: Option<Market>,
    target_seen: usize,
    fits: usize,
    skipped_refits: usize,
    source_reads: usize,
    nonconverged: usize,
    phase_switches: usize,
}

impl PolicyState {
    /// Creates a learning policy with `num_sources` live or logged sources.
    /// The offline-to-online kind needs `offline_log`, fitted once here.
    pub fn new(
        settings: PolicySettings,
        num_sources: usize,
        noise: &NoiseModel,
        offline_log: Option<&[Observation]>,
    ) -> Result<Self> {
        settings.fit.validate()?;
        if !(settings.switch_threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "switch threshold must be positive, got {}",
                settings.switch_threshold
            )));
        }
        let zero = match settings.family {
            Family::Linear => Estimate::zero_linear(settings.dim),
            Family::Rkhs => Estimate::zero_kernel(settings.gamma),
        };
        let mut state = Self {
            buffers: vec![Vec::new(); num_sources + 1],
            history: vec![Vec::new(); num_sources + 1],
            estimate: zero,
            episode: 1,
            last_time: 0,
            phase: Phase::Transfer,
            offline_len: 0,
            aggregate: None,
            oracle_market: None,
            target_seen: 0,
            fits: 0,
            skipped_refits: 0,
            source_reads: 0,
            nonconverged: 0,
            phase_switches: 0,
            settings,
        };
        match state.settings.kind {
            PolicyKind::CmTdpOff => {
                let log = offline_log.filter(|l| !l.is_empty()).ok_or_else(|| {
                    Error::InvalidInput("offline-to-online policy needs a nonempty source log".into())
                })?;
                state.offline_len = log.len();
                let agg = state.fit_plain(log, noise)?;
                state.estimate = agg.clone();
                state.aggregate = Some(agg);
                state.fits += 1;
            }
            PolicyKind::Oracle => {
                return Err(Error::InvalidInput("use PolicyState::oracle for the oracle policy".into()))
            }
            PolicyKind::CmTdpOn | PolicyKind::SingleMarket => {}
        }
        Ok(state)
    }

    /// The oracle policy pricing with the true target utility.
    pub fn oracle(settings: PolicySettings, target: Market) -> Self {
        Self {
            buffers: vec![Vec::new()],
            history: vec![Vec::new()],
            estimate: Estimate::zero_linear(settings.dim),
            episode: 1,
            last_time: 0,
            phase: Phase::Solo,
            offline_len: 0,
            aggregate: None,
            oracle_market: Some(target),
            target_seen: 0,
            fits: 0,
            skipped_refits: 0,
            source_reads: 0,
            nonconverged: 0,
            phase_switches: 0,
            settings: PolicySettings {
                kind: PolicyKind::Oracle,
                ..settings
            },
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.settings.kind
    }

    pub fn settings(&self) -> &PolicySettings {
        &self.settings
    }

    pub fn estimate(&self) -> &Estimate {
        &self.estimate
    }

    pub fn episode(&self) -> u32 {
        self.episode
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Number of estimator updates performed (the offline aggregate counts as one).
    pub fn fit_count(&self) -> usize {
        self.fits
    }

    pub fn skipped_refits(&self) -> usize {
        self.skipped_refits
    }

    /// How many times a refit read a source-market buffer.
    pub fn source_reads(&self) -> usize {
        self.source_reads
    }

    pub fn nonconverged_fits(&self) -> usize {
        self.nonconverged
    }

    pub fn phase_switches(&self) -> usize {
        self.phase_switches
    }

    /// Current-episode buffer of `market_index`.
    pub fn buffer(&self, market_index: usize) -> &[Observation] {
        self.buffers.get(market_index).map_or(&[], Vec::as_slice)
    }

    pub fn post_price(&self, x: &[f64], pm: &PriceMap) -> Result<f64> {
        let utility = match &self.oracle_market {
            Some(m) => m.mean_utility(x)?,
            None => self.estimate.predict(x)?,
        };
        pm.price_of(utility)
    }

    /// Stores an observation in the current episode's buffer. Source records
    /// are dropped by the single-market and oracle policies.
    pub fn observe(&mut self, obs: Observation) -> Result<()> {
        let first = episode_start(self.episode);
        let last = 2 * first - 1;
        if obs.time < self.last_time || obs.time < first || obs.time > last {
            return Err(Error::Sequencing {
                expected: self.last_time.max(first),
                got: obs.time,
            });
        }
        self.last_time = obs.time;
        if obs.market_index == 0 {
            self.target_seen += 1;
        }
        let keep = match self.settings.kind {
            PolicyKind::Oracle => false,
            PolicyKind::SingleMarket | PolicyKind::CmTdpOff => obs.market_index == 0,
            PolicyKind::CmTdpOn => true,
        };
        if keep {
            let slot = self
                .buffers
                .get_mut(obs.market_index)
                .ok_or_else(|| Error::InvalidInput(format!("unknown market index {}", obs.market_index)))?;
            slot.push(obs);
        }
        Ok(())
    }

    /// Opens episode `m ≥ 2`, refitting from the data of the episode(s) before it.
    /// Returns `true` when an estimator update took place.
    pub fn refit_on_boundary(&mut self, m: u32, noise: &NoiseModel) -> Result<bool> {
        if m != self.episode + 1 {
            return Err(Error::Sequencing {
                expected: episode_start(self.episode + 1),
                got: episode_start(m),
            });
        }
        self.episode = m;
        let finished: Vec<Vec<Observation>> = self.buffers.iter_mut().map(std::mem::take).collect();
        let window: Vec<Vec<Observation>> = if self.settings.accumulate {
            for (h, f) in self.history.iter_mut().zip(finished) {
                h.extend(f);
            }
            self.history.clone()
        } else {
            finished
        };

        let updated = match self.settings.kind {
            PolicyKind::Oracle => return Ok(false),
            PolicyKind::CmTdpOn => {
                self.source_reads += 1;
                let pooled: Vec<Observation> = window[1..].iter().flatten().cloned().collect();
                let target = &window[0];
                if pooled.is_empty() || target.is_empty() {
                    None
                } else {
                    let agg = self.fit_plain(&pooled, noise)?;
                    Some(self.fit_debias(target, &agg, noise)?)
                }
            }
            PolicyKind::CmTdpOff => {
                let target = &window[0];
                if self.phase == Phase::Transfer
                    && self.target_seen as f64 >= self.settings.switch_threshold * self.offline_len as f64
                {
                    self.phase = Phase::Solo;
                    self.phase_switches += 1;
                }
                if target.is_empty() {
                    None
                } else if self.phase == Phase::Transfer {
                    let agg = self.aggregate.clone().expect("aggregate fitted at construction");
                    Some(self.fit_debias(target, &agg, noise)?)
                } else {
                    Some(self.fit_plain(target, noise)?)
                }
            }
            PolicyKind::SingleMarket => {
                let target = &window[0];
                if target.is_empty() {
                    None
                } else {
                    Some(self.fit_plain(target, noise)?)
                }
            }
        };

        match updated {
            Some(est) => {
                self.estimate = est;
                self.fits += 1;
                Ok(true)
            }
            None => {
                self.skipped_refits += 1;
                Ok(false)
            }
        }
    }

    fn record(&mut self, info: &FitInfo) {
        if !info.converged {
            self.nonconverged += 1;
        }
    }

    /// Unpenalised (linear, W-ball) or ridge-scheduled (kernel) fit.
    fn fit_plain(&mut self, data: &[Observation], noise: &NoiseModel) -> Result<Estimate> {
        match self.settings.family {
            Family::Linear => {
                let cfg = FitConfig {
                    l1_ball: Some(self.settings.l1_budget),
                    ..self.settings.fit.clone()
                };
                let fit = fit_mle_aggregate(data, noise, &cfg)?;
                self.record(&fit.info);
                Ok(Estimate::Linear(fit.estimate))
            }
            Family::Rkhs => {
                let fit = fit_krr_aggregate(data, noise, self.settings.gamma, &self.settings.fit)?;
                self.record(&fit.info);
                Ok(Estimate::Kernel(Arc::new(fit.estimate)))
            }
        }
    }

    fn fit_debias(&mut self, target: &[Observation], aggregate: &Estimate, noise: &NoiseModel) -> Result<Estimate> {
        match aggregate {
            Estimate::Linear(agg) => {
                let cfg = FitConfig {
                    l1_penalty: default_l1_penalty(
                        target.len(),
                        self.settings.dim,
                        self.settings.u_f,
                        self.settings.l1_multiplier,
                    ),
                    l1_ball: None,
                    ..self.settings.fit.clone()
                };
                let fit = fit_mle_debias(target, agg, noise, &cfg)?;
                self.record(&fit.info);
                Ok(Estimate::Linear(fit.estimate))
            }
            Estimate::Kernel(agg) => {
                let base: Arc<KernelEstimate> = Arc::clone(agg);
                let fit = fit_krr_debias(target, base, noise, self.settings.gamma, &self.settings.fit)?;
                self.record(&fit.info);
                Ok(Estimate::Kernel(Arc::new(fit.estimate)))
            }
        }
    }
}
