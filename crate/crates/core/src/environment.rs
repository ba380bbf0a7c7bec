//! Target and source markets, covariate and sale sampling, scenario builders
//! and offline source logs.

use std::io::{BufRead, Write};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel;
use crate::noise::{NoiseModel, PriceMap};

/// Mean utility `x · β` with `‖β‖₁ ≤ W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMarket {
    pub beta: Vec<f64>,
    pub l1_budget: f64,
}

/// Mean utility `Σ_j w_j exp(−γ ‖x − c_j‖²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMarket {
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub gamma: f64,
    pub norm_budget: f64,
}

impl KernelMarket {
    pub fn rkhs_norm(&self) -> f64 {
        kernel::expansion_norm_sq(&self.centers, &self.weights, self.gamma).sqrt()
    }

    /// RKHS distance `‖self − other‖_H` through the joint Gram form.
    pub fn rkhs_distance(&self, other: &KernelMarket) -> f64 {
        let mut pts: Vec<&[f64]> = self.centers.iter().map(Vec::as_slice).collect();
        pts.extend(other.centers.iter().map(Vec::as_slice));
        let mut coefs = self.weights.clone();
        coefs.extend(other.weights.iter().map(|w| -w));
        kernel::expansion_norm_sq(&pts, &coefs, self.gamma).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Market {
    Linear(LinearMarket),
    Kernel(KernelMarket),
}

impl Market {
    pub fn dim(&self) -> Option<usize> {
        match self {
            Market::Linear(m) => Some(m.beta.len()),
            Market::Kernel(m) => m.centers.first().map(Vec::len),
        }
    }

    pub fn mean_utility(&self, x: &[f64]) -> Result<f64> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(Error::InvalidInput(format!(
                    "covariate has length {}, market expects {d}",
                    x.len()
                )));
            }
        }
        Ok(match self {
            Market::Linear(m) => dot(&m.beta, x),
            Market::Kernel(m) => kernel::expansion_eval(&m.centers, &m.weights, m.gamma, x),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Linear,
    Rkhs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Identical,
    SparseDiff,
}

/// Target market (index 0) plus `K` source markets (indices `1..=K`).
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSystem {
    pub target: Market,
    pub sources: Vec<Market>,
    pub noise: NoiseModel,
    pub dim: usize,
    /// Number of sources whose coefficients were rescaled back into the L1 ball.
    pub rescaled_sources: usize,
}

impl MarketSystem {
    pub fn family(&self) -> Family {
        match self.target {
            Market::Linear(_) => Family::Linear,
            Market::Kernel(_) => Family::Rkhs,
        }
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    /// Market by index: 0 is the target, `k ≥ 1` the k-th source.
    pub fn market(&self, index: usize) -> Option<&Market> {
        if index == 0 {
            Some(&self.target)
        } else {
            self.sources.get(index - 1)
        }
    }
}

/// One interaction record.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub market_index: usize,
    pub time: u64,
    pub x: Vec<f64>,
    pub price: f64,
    pub sale: bool,
}

impl Observation {
    pub fn y(&self) -> f64 {
        if self.sale {
            1.0
        } else {
            0.0
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Covariate with i.i.d. uniform `[−1, 1]` coordinates.
pub fn sample_covariate<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Draws a sale indicator with probability `1 − F(price − g(x))` from one uniform variate.
pub fn sample_outcome<R: Rng + ?Sized>(
    market: &Market,
    noise: &NoiseModel,
    x: &[f64],
    price: f64,
    rng: &mut R,
) -> Result<bool> {
    let u: f64 = rng.random();
    outcome_from_uniform(market, noise, x, price, u)
}

/// Sale indicator for a given uniform variate `u ∈ [0, 1)`. Sharing `u`
/// across policies couples their outcomes.
pub fn outcome_from_uniform(
    market: &Market,
    noise: &NoiseModel,
    x: &[f64],
    price: f64,
    u: f64,
) -> Result<bool> {
    if price < 0.0 || price.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "price must be nonnegative, got {price}"
        )));
    }
    let g = market.mean_utility(x)?;
    Ok(u < noise.sale_probability(g, price))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearScenario {
    pub dim: usize,
    pub num_sources: usize,
    pub kind: ScenarioKind,
    pub l1_budget: f64,
    pub sparsity_fraction: f64,
    pub perturb_magnitude: f64,
}

/// Number of coordinates each sparse source perturbs.
pub fn sparse_support_size(dim: usize, fraction: f64) -> usize {
    ((fraction * dim as f64) + 1e-9).floor() as usize
}

pub fn build_linear_scenario<R: Rng + ?Sized>(
    spec: &LinearScenario,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<MarketSystem> {
    if spec.dim == 0 || spec.num_sources == 0 {
        return Err(Error::InvalidParameter("d and K must be at least 1".into()));
    }
    if !(spec.l1_budget > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "W must be positive, got {}",
            spec.l1_budget
        )));
    }
    if !(0.0..=1.0).contains(&spec.sparsity_fraction) {
        return Err(Error::InvalidParameter(format!(
            "sparsity fraction must lie in [0, 1], got {}",
            spec.sparsity_fraction
        )));
    }
    if spec.perturb_magnitude < 0.0 {
        return Err(Error::InvalidParameter("perturbation magnitude must be nonnegative".into()));
    }

    let w = spec.l1_budget;
    let mut beta0: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let norm = l1(&beta0);
    if norm > 0.0 {
        let scale = 0.9 * w / norm;
        beta0.iter_mut().for_each(|b| *b *= scale);
    }

    let s0 = sparse_support_size(spec.dim, spec.sparsity_fraction);
    let mut rescaled = 0;
    let sources = (0..spec.num_sources)
        .map(|_| {
            let mut beta = beta0.clone();
            if spec.kind == ScenarioKind::SparseDiff && s0 > 0 {
                for j in sample_indices(rng, spec.dim, s0) {
                    beta[j] += rng.random_range(-spec.perturb_magnitude..=spec.perturb_magnitude);
                }
                let norm = l1(&beta);
                if norm > w {
                    rescaled += 1;
                    beta.iter_mut().for_each(|b| *b *= w / norm);
                }
            }
            Market::Linear(LinearMarket { beta, l1_budget: w })
        })
        .collect();

    Ok(MarketSystem {
        target: Market::Linear(LinearMarket {
            beta: beta0,
            l1_budget: w,
        }),
        sources,
        noise,
        dim: spec.dim,
        rescaled_sources: rescaled,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkhsScenario {
    pub dim: usize,
    pub num_sources: usize,
    pub kind: ScenarioKind,
    pub norm_budget: f64,
    pub diff_budget: f64,
    pub gamma: f64,
    pub n_centers: usize,
}

fn random_expansion<R: Rng + ?Sized>(
    dim: usize,
    n_centers: usize,
    gamma: f64,
    target_norm: f64,
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let centers: Vec<Vec<f64>> = (0..n_centers).map(|_| sample_covariate(dim, rng)).collect();
    let mut weights: Vec<f64> = (0..n_centers).map(|_| StandardNormal.sample(rng)).collect();
    let norm = kernel::expansion_norm_sq(&centers, &weights, gamma).sqrt();
    if norm > 0.0 {
        weights.iter_mut().for_each(|w| *w *= target_norm / norm);
    }
    (centers, weights)
}

pub fn build_rkhs_scenario<R: Rng + ?Sized>(
    spec: &RkhsScenario,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<MarketSystem> {
    if spec.dim == 0 || spec.num_sources == 0 {
        return Err(Error::InvalidParameter("d and K must be at least 1".into()));
    }
    if !(spec.norm_budget > 0.0) || !(spec.gamma > 0.0) || spec.n_centers == 0 {
        return Err(Error::InvalidParameter(
            "R and gamma must be positive and n_centers at least 1".into(),
        ));
    }
    if !(spec.diff_budget >= 0.0) {
        return Err(Error::InvalidParameter("diff budget must be nonnegative".into()));
    }

    let (centers, weights) =
        random_expansion(spec.dim, spec.n_centers, spec.gamma, spec.norm_budget, rng);
    let target = KernelMarket {
        centers,
        weights,
        gamma: spec.gamma,
        norm_budget: spec.norm_budget,
    };

    let sources = (0..spec.num_sources)
        .map(|_| {
            let mut src = target.clone();
            if spec.kind == ScenarioKind::SparseDiff && spec.diff_budget > 0.0 {
                let size = rng.random_range(0.5..=1.0) * spec.diff_budget;
                let (dc, dw) = random_expansion(spec.dim, spec.n_centers, spec.gamma, size, rng);
                src.centers.extend(dc);
                src.weights.extend(dw);
                src.norm_budget = spec.norm_budget + spec.diff_budget;
            }
            Market::Kernel(src)
        })
        .collect();

    Ok(MarketSystem {
        target: Market::Kernel(target),
        sources,
        noise,
        dim: spec.dim,
        rescaled_sources: 0,
    })
}

/// How source prices are chosen in generated logs and live source streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceRule {
    /// Uniform on `[0, price_cap]`.
    UniformRandom,
    /// The source's own optimal price plus uniform `[−0.25, 0.25]` jitter, floored at 0.
    OracleNoisy,
}

pub const SOURCE_PRICE_JITTER: f64 = 0.25;

/// Posts a source-market price under `rule`.
pub fn source_price<R: Rng + ?Sized>(
    market: &Market,
    pm: &PriceMap,
    x: &[f64],
    rule: PriceRule,
    rng: &mut R,
) -> Result<f64> {
    Ok(match rule {
        PriceRule::UniformRandom => rng.random_range(0.0..=pm.price_cap()),
        PriceRule::OracleNoisy => {
            let p = pm.price_of(market.mean_utility(x)?)?;
            let jitter = rng.random_range(-SOURCE_PRICE_JITTER..=SOURCE_PRICE_JITTER);
            (p + jitter).max(0.0)
        }
    })
}

/// Offline source log of `total` observations split evenly over the `K`
/// sources (the first `total mod K` sources get one extra record).
pub fn generate_offline_log<R: Rng + ?Sized>(
    system: &MarketSystem,
    pm: &PriceMap,
    total: usize,
    rule: PriceRule,
    rng: &mut R,
) -> Result<Vec<Observation>> {
    let k = system.num_sources();
    if total < k {
        return Err(Error::InvalidParameter(format!(
            "offline log needs at least one record per source ({k}), got {total}"
        )));
    }
    let mut log = Vec::with_capacity(total);
    for (i, market) in system.sources.iter().enumerate() {
        let count = total / k + usize::from(i < total % k);
        for t in 1..=count {
            let x = sample_covariate(system.dim, rng);
            let price = source_price(market, pm, &x, rule, rng)?;
            let sale = sample_outcome(market, &system.noise, &x, price, rng)?;
            log.push(Observation {
                market_index: i + 1,
                time: t as u64,
                x,
                price,
                sale,
            });
        }
    }
    Ok(log)
}

/// Writes observations as CSV: `market_index,time,x_0..x_{d-1},price,sale`.
pub fn write_observations_csv<W: Write>(obs: &[Observation], out: &mut W) -> std::io::Result<()> {
    let d = obs.first().map_or(0, |o| o.x.len());
    let mut header = String::from("market_index,time");
    for j in 0..d {
        header.push_str(&format!(",x_{j}"));
    }
    header.push_str(",price,sale\n");
    out.write_all(header.as_bytes())?;
    for o in obs {
        let mut line = format!("{},{}", o.market_index, o.time);
        for v in &o.x {
            line.push(',');
            line.push_str(&crate::report::fmt_sig(*v));
        }
        line.push(',');
        line.push_str(&crate::report::fmt_sig(o.price));
        line.push_str(if o.sale { ",1\n" } else { ",0\n" });
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Reads the CSV produced by [`write_observations_csv`].
pub fn read_observations_csv<B: BufRead>(input: B) -> Result<Vec<Observation>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty observation CSV".into()))?
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.len() < 4 || cols[0] != "market_index" || cols[1] != "time" {
        return Err(Error::InvalidInput(format!("unexpected header: {header}")));
    }
    let d = cols.len() - 4;
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::InvalidInput(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::InvalidInput(format!("line {}: malformed record", lineno + 2));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 4 {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let x = fields[2..2 + d].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
        out.push(Observation {
            market_index: fields[0].trim().parse().map_err(|_| bad())?,
            time: fields[1].trim().parse().map_err(|_| bad())?,
            x,
            price: num(fields[d + 2])?,
            sale: match fields[d + 3].trim() {
                "1" => true,
                "0" => false,
                _ => return Err(bad()),
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn logistic(s: f64) -> NoiseModel {
        NoiseModel::logistic(s, 1.0).unwrap()
    }

    fn linear_spec(kind: ScenarioKind) -> LinearScenario {
        LinearScenario {
            dim: 10,
            num_sources: 5,
            kind,
            l1_budget: 2.0,
            sparsity_fraction: 0.3,
            perturb_magnitude: 0.5,
        }
    }

    #[test]
    fn covariates_are_bounded_centered_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = sample_covariate(3, &mut rng);
        assert_eq!(x.len(), 3);
        assert!(x.iter().all(|v| v.abs() <= 1.0));

        let n = 100_000;
        let mut sums = [0.0; 3];
        for _ in 0..n {
            for (s, v) in sums.iter_mut().zip(sample_covariate(3, &mut rng)) {
                *s += v;
            }
        }
        assert!(sums.iter().all(|s| (s / n as f64).abs() < 0.02));

        let a = sample_covariate(5, &mut ChaCha8Rng::seed_from_u64(11));
        let b = sample_covariate(5, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    #[test]
    fn mean_utility_examples() {
        let zero = Market::Linear(LinearMarket {
            beta: vec![0.0; 3],
            l1_budget: 1.0,
        });
        assert_eq!(zero.mean_utility(&[0.3, -0.2, 0.9]).unwrap(), 0.0);
        let e1 = Market::Linear(LinearMarket {
            beta: vec![1.0, 0.0, 0.0],
            l1_budget: 1.0,
        });
        assert_eq!(e1.mean_utility(&[0.5, 0.7, -0.1]).unwrap(), 0.5);
        assert!(matches!(e1.mean_utility(&[0.5]), Err(Error::InvalidInput(_))));

        let c = vec![0.1, -0.3];
        let km = Market::Kernel(KernelMarket {
            centers: vec![c.clone()],
            weights: vec![1.0],
            gamma: 0.5,
            norm_budget: 1.0,
        });
        assert_eq!(km.mean_utility(&c).unwrap(), 1.0);
        let far = [c[0] + 1.0, c[1] - 1.0];
        assert!((km.mean_utility(&far).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-12);
    }

    #[test]
    fn outcome_tails() {
        let noise = logistic(0.25);
        let m = Market::Linear(LinearMarket {
            beta: vec![0.5],
            l1_budget: 1.0,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = [1.0];
        let price = 0.5 + 20.0 * 0.25;
        assert!(noise.sale_probability(0.5, price) < 1e-8);
        for _ in 0..1_000_000 {
            assert!(!sample_outcome(&m, &noise, &x, price, &mut rng).unwrap());
        }
        assert!(noise.sale_probability(0.5, 0.0) >= 0.5);
        assert!(sample_outcome(&m, &noise, &x, -1.0, &mut rng).is_err());
    }

    #[test]
    fn empirical_sale_rate_matches_survival() {
        let noise = logistic(1.0);
        let m = Market::Linear(LinearMarket {
            beta: vec![0.0],
            l1_budget: 1.0,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let sales = (0..n)
            .filter(|_| sample_outcome(&m, &noise, &[0.4], 1.0, &mut rng).unwrap())
            .count();
        let rate = sales as f64 / n as f64;
        assert!((rate - 0.268_941_421_369_995_1).abs() < 0.006, "rate={rate}");
    }

    #[test]
    fn linear_identical_scenario_copies_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sys = build_linear_scenario(&linear_spec(ScenarioKind::Identical), logistic(0.25), &mut rng)
            .unwrap();
        let Market::Linear(t) = &sys.target else { panic!() };
        assert!((l1(&t.beta) - 1.8).abs() < 1e-12);
        for s in &sys.sources {
            assert_eq!(s, &sys.target);
        }
    }

    #[test]
    fn linear_sparse_scenario_respects_support_and_budget() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys =
                build_linear_scenario(&linear_spec(ScenarioKind::SparseDiff), logistic(0.25), &mut rng)
                    .unwrap();
            let Market::Linear(t) = &sys.target else { panic!() };
            for s in &sys.sources {
                let Market::Linear(s) = s else { panic!() };
                assert!(l1(&s.beta) <= 2.0 + 1e-12);
                if sys.rescaled_sources == 0 {
                    let diff = s.beta.iter().zip(&t.beta).filter(|(a, b)| a != b).count();
                    assert!(diff <= 3);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut bad = linear_spec(ScenarioKind::SparseDiff);
        bad.l1_budget = 0.0;
        assert!(build_linear_scenario(&bad, logistic(0.25), &mut rng).is_err());
    }

    #[test]
    fn rkhs_scenarios_hit_norm_budgets() {
        let spec = RkhsScenario {
            dim: 10,
            num_sources: 3,
            kind: ScenarioKind::SparseDiff,
            norm_budget: 1.0,
            diff_budget: 0.3,
            gamma: 0.5,
            n_centers: 50,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sys = build_rkhs_scenario(&spec, logistic(0.25), &mut rng).unwrap();
        let Market::Kernel(t) = &sys.target else { panic!() };
        assert!((t.rkhs_norm() - 1.0).abs() < 1e-9);
        for s in &sys.sources {
            let Market::Kernel(s) = s else { panic!() };
            let dist = t.rkhs_distance(s);
            assert!((0.15 - 1e-9..=0.3 + 1e-9).contains(&dist), "dist={dist}");
        }

        let ident = RkhsScenario {
            kind: ScenarioKind::Identical,
            ..spec
        };
        let sys = build_rkhs_scenario(&ident, logistic(0.25), &mut rng).unwrap();
        let Market::Kernel(t) = &sys.target else { panic!() };
        for s in &sys.sources {
            let Market::Kernel(s) = s else { panic!() };
            assert!(t.rkhs_distance(s) < 1e-6);
        }
    }

    #[test]
    fn offline_log_split_and_price_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sys = build_linear_scenario(&linear_spec(ScenarioKind::SparseDiff), logistic(0.25), &mut rng)
            .unwrap();
        let pm = PriceMap::new(sys.noise, 2.0, 1e-9).unwrap();
        let log = generate_offline_log(&sys, &pm, 100, PriceRule::OracleNoisy, &mut rng).unwrap();
        for k in 1..=5 {
            assert_eq!(log.iter().filter(|o| o.market_index == k).count(), 20);
        }
        assert!(log
            .iter()
            .all(|o| o.price >= 0.0 && o.price <= pm.price_cap() + SOURCE_PRICE_JITTER));
        assert!(generate_offline_log(&sys, &pm, 3, PriceRule::OracleNoisy, &mut rng).is_err());
    }

    #[test]
    fn uniform_prices_far_below_utility_almost_always_sell() {
        let noise = logistic(0.05);
        let sys = MarketSystem {
            target: Market::Linear(LinearMarket {
                beta: vec![0.0],
                l1_budget: 2.0,
            }),
            sources: vec![Market::Linear(LinearMarket {
                beta: vec![2.0],
                l1_budget: 2.0,
            })],
            noise,
            dim: 1,
            rescaled_sources: 0,
        };
        let pm = PriceMap::new(noise, 2.0, 1e-9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let log = generate_offline_log(&sys, &pm, 20_000, PriceRule::UniformRandom, &mut rng).unwrap();
        let cheap: Vec<_> = log
            .iter()
            .filter(|o| o.price < sys.sources[0].mean_utility(&o.x).unwrap() - 5.0 * 0.05)
            .collect();
        assert!(cheap.len() > 1000);
        let sold = cheap.iter().filter(|o| o.sale).count();
        assert!(sold as f64 / cheap.len() as f64 >= 0.99);
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sys = build_linear_scenario(&linear_spec(ScenarioKind::Identical), logistic(0.25), &mut rng)
            .unwrap();
        let pm = PriceMap::new(sys.noise, 2.0, 1e-9).unwrap();
        let log = generate_offline_log(&sys, &pm, 25, PriceRule::OracleNoisy, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_observations_csv(&log, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("market_index,time,x_0,x_1,"));
        assert!(text.ends_with('\n'));
        let back = read_observations_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), log.len());
        for (a, b) in back.iter().zip(&log) {
            assert_eq!(a.market_index, b.market_index);
            assert_eq!(a.sale, b.sale);
            assert!((a.price - b.price).abs() <= 1e-8 * b.price.abs());
        }
    }
}
