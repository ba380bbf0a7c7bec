//! Known noise distribution `F` and the pricing quantities derived from it.
//!
//! The seller posts price `p` to a buyer whose valuation is `g(x) + ε` with
//! `ε ~ F`. The buyer purchases iff the valuation exceeds the price, so the
//! expected revenue at mean utility `u` is `p · (1 − F(p − u))`. Its maximiser
//! is `h(u) = u + φ⁻¹(−u)` where `φ(w) = w − (1 − F(w)) / F'(w)` is the
//! virtual valuation.

use crate::error::{Error, Result};

/// Distribution families shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Logistic,
}

/// The noise law `F`, with density and density derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    scale: f64,
    /// Nominal support half-width. The analytic logistic is unbounded, so this
    /// only sets evaluation ranges and reporting.
    support_bound: f64,
}

impl NoiseModel {
    /// Logistic noise with `F(u) = 1 / (1 + exp(−u / scale))`.
    pub fn logistic(scale: f64, support_bound: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise scale must be positive, got {scale}"
            )));
        }
        if !(support_bound > 0.0 && support_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "support bound must be positive, got {support_bound}"
            )));
        }
        Ok(Self {
            kind: NoiseKind::Logistic,
            scale,
            support_bound,
        })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn support_bound(&self) -> f64 {
        self.support_bound
    }

    pub fn cdf(&self, u: f64) -> f64 {
        match self.kind {
            NoiseKind::Logistic => logistic_sigmoid(u / self.scale),
        }
    }

    /// `1 − F(u)`, evaluated without cancellation.
    pub fn survival(&self, u: f64) -> f64 {
        match self.kind {
            NoiseKind::Logistic => logistic_sigmoid(-u / self.scale),
        }
    }

    pub fn pdf(&self, u: f64) -> f64 {
        match self.kind {
            NoiseKind::Logistic => self.cdf(u) * self.survival(u) / self.scale,
        }
    }

    pub fn pdf_prime(&self, u: f64) -> f64 {
        match self.kind {
            NoiseKind::Logistic => {
                let f = self.cdf(u);
                self.pdf(u) * (1.0 - 2.0 * f) / self.scale
            }
        }
    }

    /// `(f/F, f/(1 − F))` at `u`: the derivatives of `log F` and `−log(1 − F)`.
    pub fn score_terms(&self, u: f64) -> (f64, f64) {
        match self.kind {
            NoiseKind::Logistic => (self.survival(u) / self.scale, self.cdf(u) / self.scale),
        }
    }

    /// `(1 − F(u)) / F'(u)`, the reciprocal hazard rate.
    fn inverse_hazard(&self, u: f64) -> Result<f64> {
        match self.kind {
            // (1 − F) / (F (1 − F) / s) = s / F; stays finite where the
            // density underflows.
            NoiseKind::Logistic => Ok(self.scale / self.cdf(u)),
        }
    }

    /// `φ(u) = u − (1 − F(u)) / F'(u)`.
    pub fn virtual_valuation(&self, u: f64) -> Result<f64> {
        let ih = self.inverse_hazard(u)?;
        if !ih.is_finite() {
            return Err(Error::UndefinedValuation(u));
        }
        Ok(u - ih)
    }

    /// Expected revenue `p · (1 − F(p − u))` of posting `price` at mean utility `u`.
    pub fn expected_revenue(&self, mean_utility: f64, price: f64) -> Result<f64> {
        if price < 0.0 || price.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "price must be nonnegative, got {price}"
            )));
        }
        Ok(price * self.survival(price - mean_utility))
    }

    /// Sale probability `1 − F(p − u)`.
    pub fn sale_probability(&self, mean_utility: f64, price: f64) -> f64 {
        self.survival(price - mean_utility)
    }

    /// `(u_F, ℓ_F)`: the supremum of the first log-derivatives and the
    /// infimum of the negated second log-derivatives of `F` and `1 − F` over
    /// `|x| ≤ P + W`, evaluated on a grid with step `1e-3 · (P + W)`.
    pub fn regularity_constants(&self, price_bound: f64, utility_bound: f64) -> Result<(f64, f64)> {
        if !(price_bound > 0.0) || !(utility_bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "price and utility bounds must be positive, got P={price_bound}, W={utility_bound}"
            )));
        }
        let half_width = price_bound + utility_bound;
        let steps = 2000usize;
        let mut upper = f64::NEG_INFINITY;
        let mut lower = f64::INFINITY;
        for i in 0..=steps {
            let x = -half_width + 2.0 * half_width * i as f64 / steps as f64;
            let f = self.pdf(x);
            let fp = self.pdf_prime(x);
            let big_f = self.cdf(x);
            let surv = self.survival(x);
            let d_log_f = f / big_f;
            let d_log_surv = -f / surv;
            upper = upper.max(d_log_f.max(-d_log_surv));
            // (log F)'' = (f' F − f²) / F²,  (log(1 − F))'' = (−f' (1 − F) − f²) / (1 − F)²
            let dd_log_f = (fp * big_f - f * f) / (big_f * big_f);
            let dd_log_surv = (-fp * surv - f * f) / (surv * surv);
            lower = lower.min((-dd_log_f).min(-dd_log_surv));
        }
        Ok((upper, lower))
    }
}

fn logistic_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Default absolute tolerance for the `φ` inversion.
pub const DEFAULT_SOLVER_TOLERANCE: f64 = 1e-9;

/// Maps an estimated mean utility to the revenue-maximising price.
#[derive(Debug, Clone)]
pub struct PriceMap {
    model: NoiseModel,
    solver_tolerance: f64,
    utility_bound: f64,
    price_cap: f64,
    memo: Option<MemoGrid>,
}

#[derive(Debug, Clone)]
struct MemoGrid {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl PriceMap {
    /// Builds the map for mean utilities in `[−utility_bound, utility_bound]`.
    /// The price cap is the unclipped `h(utility_bound)`.
    pub fn new(model: NoiseModel, utility_bound: f64, solver_tolerance: f64) -> Result<Self> {
        if !(utility_bound > 0.0 && utility_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "utility bound must be positive, got {utility_bound}"
            )));
        }
        if !(solver_tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "solver tolerance must be positive, got {solver_tolerance}"
            )));
        }
        let mut pm = Self {
            model,
            solver_tolerance,
            utility_bound,
            price_cap: f64::INFINITY,
            memo: None,
        };
        pm.price_cap = pm.price_unclipped(utility_bound)?;
        Ok(pm)
    }

    /// Enables a tabulated `h` on `[−2W, 2W]` with linear interpolation.
    /// Utilities outside the table fall back to exact root finding.
    pub fn with_memo(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidParameter(format!("memo step must be positive, got {step}")));
        }
        let lo = -2.0 * self.utility_bound;
        let n = ((4.0 * self.utility_bound) / step).ceil() as usize + 1;
        let values = (0..n)
            .map(|i| self.price_unclipped(lo + i as f64 * step))
            .collect::<Result<Vec<_>>>()?;
        self.memo = Some(MemoGrid { lo, step, values });
        Ok(self)
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn solver_tolerance(&self) -> f64 {
        self.solver_tolerance
    }

    pub fn utility_bound(&self) -> f64 {
        self.utility_bound
    }

    pub fn price_cap(&self) -> f64 {
        self.price_cap
    }

    /// Solves `φ(w) = v` by geometric bracket expansion and bisection.
    pub fn inverse_phi(&self, v: f64) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("cannot invert φ at {v}")));
        }
        let scale = self.model.scale();
        let cap = 1e6 * scale;
        // φ → −∞ where F underflows.
        let phi = |w: f64| -> Result<f64> {
            Ok(self.model.virtual_valuation(w).unwrap_or(f64::NEG_INFINITY))
        };

        // φ(w) < w, so the root lies to the right of v.
        let mut width = 4.0 * scale;
        let mut lo = v - 0.5 * width;
        let mut hi = v + 0.5 * width;
        while phi(lo)? > v {
            lo -= width;
            width *= 2.0;
            if hi - lo > cap {
                return Err(Error::NoRoot { target: v, cap });
            }
        }
        while phi(hi)? < v {
            hi += width;
            width *= 2.0;
            if hi - lo > cap {
                return Err(Error::NoRoot { target: v, cap });
            }
        }

        loop {
            let mid = 0.5 * (lo + hi);
            let val = phi(mid)?;
            if (val - v).abs() <= self.solver_tolerance || mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if val < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    /// `h(u) = u + φ⁻¹(−u)` without the price cap.
    pub fn price_unclipped(&self, mean_utility: f64) -> Result<f64> {
        Ok(mean_utility + self.inverse_phi(-mean_utility)?)
    }

    /// Revenue-maximising price for `mean_utility`, clipped to `[0, price_cap]`.
    pub fn price_of(&self, mean_utility: f64) -> Result<f64> {
        if !mean_utility.is_finite() {
            return Err(Error::InvalidInput(format!("mean utility must be finite, got {mean_utility}")));
        }
        let raw = match &self.memo {
            Some(m) => match m.lookup(mean_utility) {
                Some(p) => p,
                None => self.price_unclipped(mean_utility)?,
            },
            None => self.price_unclipped(mean_utility)?,
        };
        Ok(raw.clamp(0.0, self.price_cap))
    }
}

impl MemoGrid {
    fn lookup(&self, u: f64) -> Option<f64> {
        let pos = (u - self.lo) / self.step;
        if pos < 0.0 {
            return None;
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return None;
        }
        let frac = pos - i as f64;
        Some(self.values[i] * (1.0 - frac) + self.values[i + 1] * frac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> NoiseModel {
        NoiseModel::logistic(1.0, 1.0).unwrap()
    }

    fn unit_map() -> PriceMap {
        PriceMap::new(unit(), 2.0, DEFAULT_SOLVER_TOLERANCE).unwrap()
    }

    #[test]
    fn logistic_closed_forms() {
        let m = unit();
        assert_eq!(m.cdf(0.0), 0.5);
        assert_eq!(m.pdf(0.0), 0.25);
        let half = NoiseModel::logistic(0.5, 1.0).unwrap();
        assert!((half.cdf(0.5) - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(matches!(NoiseModel::logistic(0.0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(NoiseModel::logistic(1.0, -1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(NoiseModel::logistic(f64::NAN, 1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn cdf_tails_and_density_mass() {
        for s in [0.25, 1.0, 3.0] {
            let m = NoiseModel::logistic(s, 1.0).unwrap();
            assert!(m.cdf(-10.0 * s) < 0.01);
            assert!(m.cdf(10.0 * s) > 0.99);
            let n = 40_000;
            let (a, b) = (-20.0 * s, 20.0 * s);
            let h = (b - a) / n as f64;
            let mut mass = 0.5 * (m.pdf(a) + m.pdf(b));
            let mut prev = m.cdf(a);
            for i in 1..n {
                let u = a + i as f64 * h;
                mass += m.pdf(u);
                let c = m.cdf(u);
                assert!(c >= prev);
                assert!(m.pdf(u) >= 0.0);
                prev = c;
            }
            assert!((mass * h - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn density_derivatives_match_finite_differences() {
        let m = NoiseModel::logistic(0.7, 1.0).unwrap();
        let h = 1e-5;
        for i in -40..=40 {
            let u = i as f64 * 0.1;
            let fd_pdf = (m.cdf(u + h) - m.cdf(u - h)) / (2.0 * h);
            assert!((fd_pdf - m.pdf(u)).abs() <= 1e-5 * m.pdf(u));
            let fd_prime = (m.pdf(u + h) - m.pdf(u - h)) / (2.0 * h);
            let exact = m.pdf_prime(u);
            assert!((fd_prime - exact).abs() <= 1e-4 * exact.abs().max(1e-3), "u={u}");
        }
    }

    #[test]
    fn virtual_valuation_examples() {
        let m = unit();
        assert_eq!(m.virtual_valuation(0.0).unwrap(), -2.0);
        // 5 − 1/F(5), evaluated at 30 digits.
        assert!((m.virtual_valuation(5.0).unwrap() - 3.993_262_053_000_914_5).abs() < 1e-12);
        let half = NoiseModel::logistic(0.5, 1.0).unwrap();
        assert_eq!(half.virtual_valuation(0.0).unwrap(), -1.0);
    }

    #[test]
    fn virtual_valuation_is_increasing_with_slope_at_least_one() {
        let m = NoiseModel::logistic(0.25, 1.0).unwrap();
        let mut prev = m.virtual_valuation(-10.0).unwrap();
        for i in 1..=2000 {
            let u = -10.0 + i as f64 * 0.01;
            let v = m.virtual_valuation(u).unwrap();
            assert!(v > prev);
            assert!((v - prev) / 0.01 >= 1.0 - 1e-9);
            prev = v;
        }
    }

    #[test]
    fn inverse_phi_examples() {
        let pm = unit_map();
        assert!(pm.inverse_phi(-2.0).unwrap().abs() < 1e-9);
        // Brute-force scan of w − 1/F(w) at step 1e-5 locates the root near 1.27846.
        let mut best = (f64::INFINITY, 0.0);
        let m = unit();
        for i in 0..=300_000 {
            let w = i as f64 * 1e-5;
            let r = (w - 1.0 / m.cdf(w)).abs();
            if r < best.0 {
                best = (r, w);
            }
        }
        let root = pm.inverse_phi(0.0).unwrap();
        assert!((root - best.1).abs() < 2e-5);
        assert!((root - 1.278_464_542_761_074).abs() < 1e-8);
        let v = m.virtual_valuation(3.7).unwrap();
        assert!((pm.inverse_phi(v).unwrap() - 3.7).abs() < 1e-8);
    }

    #[test]
    fn inverse_phi_handles_extreme_targets() {
        let pm = PriceMap::new(NoiseModel::logistic(0.25, 1.0).unwrap(), 2.0, 1e-9).unwrap();
        for v in [-500.0, -40.0, 40.0, 500.0] {
            let w = pm.inverse_phi(v).unwrap();
            let back = pm.model().virtual_valuation(w).unwrap();
            assert!((back - v).abs() <= 1e-9, "v={v} back={back}");
        }
        assert!(pm.inverse_phi(f64::NAN).is_err());
    }

    #[test]
    fn price_of_examples() {
        let pm = unit_map();
        assert!((pm.price_of(2.0).unwrap() - 2.0).abs() < 1e-8);
        assert!((pm.price_of(0.0).unwrap() - 1.278_464_542_761_074).abs() < 1e-8);
        // Grid argmax of p (1 − F(p − 0.5)) over [0, 6] at step 1e-4.
        let m = unit();
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=60_000 {
            let p = i as f64 * 1e-4;
            let r = p * m.survival(p - 0.5);
            if r > best.0 {
                best = (r, p);
            }
        }
        assert!((pm.price_of(0.5).unwrap() - best.1).abs() < 1e-3);
        assert!((pm.price_of(0.5).unwrap() - 1.404_673_848_545_938_5).abs() < 1e-8);
    }

    #[test]
    fn price_is_capped_at_h_of_w() {
        let pm = unit_map();
        let cap = pm.price_cap();
        assert!((cap - pm.price_unclipped(2.0).unwrap()).abs() < 1e-12);
        assert_eq!(pm.price_of(10.0).unwrap(), cap);
        assert!(pm.price_of(-30.0).unwrap() >= 0.0);
    }

    #[test]
    fn memoized_map_tracks_exact_map() {
        let exact = PriceMap::new(NoiseModel::logistic(0.25, 1.0).unwrap(), 2.0, 1e-9).unwrap();
        let memo = exact.clone().with_memo(1e-3).unwrap();
        for i in -200..=200 {
            let u = i as f64 * 0.0137;
            assert!((exact.price_of(u).unwrap() - memo.price_of(u).unwrap()).abs() < 1e-6);
        }
        assert_eq!(exact.price_of(7.5).unwrap(), memo.price_of(7.5).unwrap());
    }

    #[test]
    fn expected_revenue_examples() {
        let m = unit();
        assert_eq!(m.expected_revenue(0.3, 0.0).unwrap(), 0.0);
        assert!((m.expected_revenue(0.0, 1.2785).unwrap() - 0.278_464_542_624_157_8).abs() < 1e-12);
        assert!(matches!(m.expected_revenue(0.0, -0.1), Err(Error::InvalidParameter(_))));
        let pm = unit_map();
        let best = m.expected_revenue(0.4, pm.price_of(0.4).unwrap()).unwrap();
        for i in 0..600 {
            assert!(best >= m.expected_revenue(0.4, i as f64 * 0.01).unwrap());
        }
    }

    #[test]
    fn regularity_constants_match_logistic_closed_forms() {
        let m = unit();
        let (u_f, l_f) = m.regularity_constants(1.0, 1.0).unwrap();
        // sup of f/F and f/(1 − F) on [−2, 2] is F(2) = 1 − F(−2).
        assert!((u_f - 0.880_797_077_977_882_4).abs() < 1e-9);
        // Both second log-derivatives equal −f/s for the logistic; inf of f on [−2, 2] is f(2).
        assert!((l_f - 0.104_993_585_403_506_5).abs() < 1e-9);
        assert!(m.regularity_constants(0.0, 1.0).is_err());
    }

    #[test]
    fn log_derivative_at_zero_scales_inversely_with_scale() {
        for s in [0.5, 1.0, 2.0] {
            let m = NoiseModel::logistic(s, 1.0).unwrap();
            assert!((m.pdf(0.0) / m.cdf(0.0) - 1.0 / (2.0 * s)).abs() < 1e-15);
        }
    }
}
