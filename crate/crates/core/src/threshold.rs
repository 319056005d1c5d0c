//! Self-improvement threshold: the discrete sequence conditions, the
//! improvement ratio `sqrt(S₂ log log S₂)/S₁`, the multiplicative form
//! `λₖ = aₖ/aₖ₋₁ - 1`, and the continuous check on gauges.
//!
//! Sequences are stored as `log aₖ` so geometric growth never overflows.
//! Asymptotic verdicts are tail-trend estimates over the last half of the
//! data, never proofs.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result, E_TO_E};
use crate::gauges::GaugeFunction;

/// Relative slack used by the monotonicity and log-concavity tests.
pub const CONDITION_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceSource {
    Explicit,
    /// `aₖ = ψ(2^-k)`.
    FromGauge,
    /// `aₖ = k^β`.
    PowerOfIndex(f64),
    /// `aₖ = 2^(δk)`.
    Geometric(f64),
    Constant,
}

/// Positive sequence `a₁, …, a_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveSequence {
    ln_values: Vec<f64>,
    source: SequenceSource,
}

impl PositiveSequence {
    pub fn explicit(values: &[f64]) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain {
                what: "sequence value",
                value: bad,
            });
        }
        Self::from_logs(values.iter().map(|v| v.ln()).collect(), SequenceSource::Explicit)
    }

    pub fn from_gauge(g: &GaugeFunction, n: usize) -> Result<Self> {
        let ln2 = core::f64::consts::LN_2;
        let logs = (1..=n).map(|k| g.ln_at_log_height(k as f64 * ln2)).collect();
        Self::from_logs(logs, SequenceSource::FromGauge)
    }

    pub fn power_of_index(beta: f64, n: usize) -> Result<Self> {
        let logs = (1..=n).map(|k| beta * (k as f64).ln()).collect();
        Self::from_logs(logs, SequenceSource::PowerOfIndex(beta))
    }

    pub fn geometric(delta: f64, n: usize) -> Result<Self> {
        let ln2 = core::f64::consts::LN_2;
        let logs = (1..=n).map(|k| delta * k as f64 * ln2).collect();
        Self::from_logs(logs, SequenceSource::Geometric(delta))
    }

    pub fn constant(n: usize) -> Result<Self> {
        Self::from_logs(alloc::vec![0.0; n], SequenceSource::Constant)
    }

    fn from_logs(ln_values: Vec<f64>, source: SequenceSource) -> Result<Self> {
        if ln_values.is_empty() {
            return Err(Error::Precondition("sequence must be non-empty"));
        }
        if let Some(&bad) = ln_values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "log of sequence value",
                value: bad,
            });
        }
        Ok(PositiveSequence { ln_values, source })
    }

    pub fn len(&self) -> usize {
        self.ln_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_values.is_empty()
    }

    pub fn source(&self) -> &SequenceSource {
        &self.source
    }

    /// `log aₖ` for `k = 1..=n`.
    pub fn ln_values(&self) -> &[f64] {
        &self.ln_values
    }

    /// `aₖ` (1-based).
    pub fn value(&self, k: usize) -> f64 {
        self.ln_values[k - 1].exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// `aₖ ≤ aₖ₊₁` for every k.
    pub monotone: bool,
    /// Smallest `C` with `aₖ₊₁ ≤ C aₖ` on the data.
    pub doubling_constant: f64,
    /// `aₖ₊₁ aₖ₋₁ ≤ aₖ²` for every interior k.
    pub log_concave: bool,
    /// Least-squares slope of `log tₙ` against `log n` over the last half,
    /// where `tₙ = log aₙ · log n / n`. `None` when some tail `tₙ ≤ 0`.
    pub threshold_tail_slope: Option<f64>,
    /// The tail of `tₙ` is non-increasing.
    pub threshold_tail_decreasing: bool,
}

impl ConditionReport {
    /// All three conditions hold on the data.
    pub fn passes(&self) -> bool {
        self.monotone && self.doubling_constant.is_finite() && self.log_concave && self.threshold_tail_decreasing
    }
}

fn log_slack(x: f64) -> f64 {
    CONDITION_REL_TOL + 4.0 * f64::EPSILON * x.abs()
}

pub fn check_conditions(s: &PositiveSequence) -> Result<ConditionReport> {
    let l = s.ln_values();
    let n = l.len();
    if n < 16 {
        return Err(Error::Precondition("condition check needs at least 16 terms"));
    }
    let mut monotone = true;
    let mut max_step = f64::NEG_INFINITY;
    for w in l.windows(2) {
        let step = w[1] - w[0];
        if step < -log_slack(w[1]) {
            monotone = false;
        }
        max_step = max_step.max(step);
    }
    let doubling_constant = max_step.exp().max(1.0);
    let log_concave = l.windows(3).all(|w| w[2] + w[0] - 2.0 * w[1] <= log_slack(w[1]));

    let trend: Vec<(f64, f64)> = (2..=n)
        .map(|k| {
            let kf = k as f64;
            (kf, l[k - 1] * kf.ln() / kf)
        })
        .collect();
    let tail = &trend[trend.len() / 2..];
    let threshold_tail_decreasing = tail.windows(2).all(|w| w[1].1 <= w[0].1 + log_slack(w[0].1));
    let threshold_tail_slope = if tail.iter().all(|p| p.1 > 0.0) {
        let pts: Vec<(f64, f64)> = tail.iter().map(|p| (p.0.ln(), p.1.ln())).collect();
        least_squares_slope(&pts)
    } else {
        None
    };
    Ok(ConditionReport {
        monotone,
        doubling_constant,
        log_concave,
        threshold_tail_slope,
        threshold_tail_decreasing,
    })
}

/// Slope of the least-squares line through `pts`.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx > 0.0 {
        Some(sxy / sxx)
    } else {
        None
    }
}

/// Running `log Σ exp(xₖ)` with a compensated sum under a moving shift.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    shift: f64,
    sum: f64,
    compensation: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum {
            shift: f64::NEG_INFINITY,
            sum: 0.0,
            compensation: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        if x > self.shift {
            let factor = if self.shift.is_finite() {
                (self.shift - x).exp()
            } else {
                0.0
            };
            self.sum *= factor;
            self.compensation *= factor;
            self.shift = x;
        }
        let term = (x - self.shift).exp();
        // Neumaier summation
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.compensation += (self.sum - t) + term;
        } else {
            self.compensation += (term - t) + self.sum;
        }
        self.sum = t;
    }

    fn ln(&self) -> f64 {
        self.shift + (self.sum + self.compensation).ln()
    }
}

/// `sqrt((Σ₁ⁿ aₖ²) log log Σ₁ⁿ aₖ²) / Σ₁ⁿ aₖ`.
pub fn improvement_ratio(s: &PositiveSequence, n: usize) -> Result<f64> {
    Ok(improvement_ratios(s, &[n])?[0])
}

/// [`improvement_ratio`] at each `n` of an increasing list, in one pass.
pub fn improvement_ratios(s: &PositiveSequence, ns: &[usize]) -> Result<Vec<f64>> {
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("indices must be increasing"));
    }
    if let Some(&last) = ns.last() {
        if last == 0 || last > s.len() {
            return Err(Error::Domain {
                what: "sequence index",
                value: last as f64,
            });
        }
    }
    let mut s1 = LogSum::new();
    let mut s2 = LogSum::new();
    let mut out = Vec::with_capacity(ns.len());
    let mut next = 0;
    for (i, &l) in s.ln_values().iter().enumerate() {
        if next == ns.len() {
            break;
        }
        s1.push(l);
        s2.push(2.0 * l);
        if i + 1 == ns[next] {
            let ln_s2 = s2.ln();
            // S₂ > e^e  ⇔  log S₂ > e
            if !(ln_s2 > core::f64::consts::E) {
                return Err(Error::LilRegime {
                    quantity: ln_s2.exp().min(E_TO_E),
                });
            }
            let ln_ratio = 0.5 * (ln_s2 + ln_s2.ln().ln()) - s1.ln();
            out.push(ln_ratio.exp());
            next += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativeForm {
    /// `λₖ` for `k = 1..=n`, with `λ₁ = 0` from `a₀ := a₁`.
    pub lambdas: Vec<f64>,
    /// `0 ≤ λₖ ≤ C - 1` for every k, with `C` the doubling constant.
    pub bounded: bool,
    /// `λₖ ≥ λₖ₊₁` for `k ≥ 2`.
    pub nonincreasing: bool,
    /// `n λₙ ≤ Σ₁ⁿ λₖ` for every `n ≥ 3`.
    pub sum_dominates: bool,
    /// `Σ₁ⁿ λₖ · log n / n` is non-increasing over the last half.
    pub tail_decreasing: bool,
}

/// `λₖ = aₖ/aₖ₋₁ - 1`, with `a₀ := a₁`, and the translated conditions.
pub fn multiplicative_form(s: &PositiveSequence) -> MultiplicativeForm {
    let l = s.ln_values();
    let n = l.len();
    let mut lambdas = Vec::with_capacity(n);
    lambdas.push(0.0);
    for w in l.windows(2) {
        lambdas.push((w[1] - w[0]).exp_m1());
    }
    let max_lambda = lambdas.iter().cloned().fold(0.0, f64::max);
    let slack = |x: f64| CONDITION_REL_TOL * x.abs().max(1e-300);
    let bounded = lambdas.iter().all(|&x| x >= -slack(max_lambda) && x <= max_lambda);
    let nonincreasing = lambdas[1..]
        .windows(2)
        .all(|w| w[1] <= w[0] + slack(w[0]).max(CONDITION_REL_TOL * 1e-3));
    let mut partial = 0.0;
    let mut sum_dominates = true;
    let mut trend = Vec::with_capacity(n);
    for (i, &lam) in lambdas.iter().enumerate() {
        partial += lam;
        let k = (i + 1) as f64;
        if i + 1 >= 3 && k * lam > partial + CONDITION_REL_TOL * partial.abs().max(1.0) {
            sum_dominates = false;
        }
        if i + 1 >= 2 {
            trend.push(partial * k.ln() / k);
        }
    }
    let tail = &trend[trend.len() / 2..];
    let tail_decreasing = tail.windows(2).all(|w| w[1] <= w[0] + slack(w[0]));
    MultiplicativeForm {
        lambdas,
        bounded,
        nonincreasing,
        sum_dominates,
        tail_decreasing,
    }
}

/// `log(aₙ/a₁)` rebuilt as `Σ₂ⁿ log(1+λₖ)`.
pub fn rebuild_log_ratio(lambdas: &[f64]) -> f64 {
    lambdas.iter().skip(1).map(|l| l.ln_1p()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPoint {
    pub y: f64,
    /// `sqrt(Ψ(y) log log Ψ(y)) / ∫_y^1 ψ(t)/t dt`, `None` when `Ψ(y) ≤ e^e`.
    pub ratio: Option<f64>,
    /// `log ψ(y) · log log(1/y) / log(1/y)`.
    pub threshold_quantity: f64,
    /// `ψ(y/2) ψ(2y) ≤ ψ(y)²` (only tested when `2y ≤ 1`).
    pub concave: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousThresholdReport {
    pub points: Vec<ThresholdPoint>,
    /// The unguarded ratios decrease along the ladder.
    pub ratio_decreasing: bool,
    pub concavity_violations: usize,
}

/// Default ladder `y = 2^(-2^k)`, `k = 2..=7`.
pub fn default_threshold_ladder() -> Vec<f64> {
    (2..=7).map(|k| 2f64.powi(-(1 << k))).collect()
}

/// Ratio and threshold quantity along a ladder of heights in `(0, 1/e)`.
pub fn continuous_threshold_check(g: &GaugeFunction, ladder: &[f64]) -> Result<ContinuousThresholdReport> {
    let mut points = Vec::with_capacity(ladder.len());
    for &y in ladder {
        if !(y > 0.0 && y < (-1.0f64).exp()) {
            return Err(Error::Domain {
                what: "threshold ladder height",
                value: y,
            });
        }
        let big_psi = g.square_function(y)?;
        let ratio = if big_psi > E_TO_E {
            Some((big_psi * big_psi.ln().ln()).sqrt() / g.log_integral(y)?)
        } else {
            None
        };
        let l = -y.ln();
        let threshold_quantity = g.eval(y)?.ln() * l.ln() / l;
        let concave = if 2.0 * y <= 1.0 {
            let lhs = g.eval(0.5 * y)? * g.eval(2.0 * y)?;
            let rhs = g.eval(y)?.powi(2);
            lhs <= rhs * (1.0 + CONDITION_REL_TOL)
        } else {
            true
        };
        points.push(ThresholdPoint {
            y,
            ratio,
            threshold_quantity,
            concave,
        });
    }
    let ratios: Vec<f64> = points.iter().filter_map(|p| p.ratio).collect();
    let ratio_decreasing = ratios.len() >= 2 && ratios.windows(2).all(|w| w[1] < w[0]);
    let concavity_violations = points.iter().filter(|p| !p.concave).count();
    Ok(ContinuousThresholdReport {
        points,
        ratio_decreasing,
        concavity_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_sequence_conditions() {
        let s = PositiveSequence::constant(64).unwrap();
        let r = check_conditions(&s).unwrap();
        assert!(r.passes());
        assert_eq!(r.doubling_constant, 1.0);
        let m = multiplicative_form(&s);
        assert!(m.lambdas.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn power_of_index_conditions() {
        let s = PositiveSequence::power_of_index(1.0, 4096).unwrap();
        let r = check_conditions(&s).unwrap();
        assert!(r.passes(), "{r:?}");
        assert_relative_eq!(r.doubling_constant, 2.0, max_relative = 1e-12);
        assert!(r.threshold_tail_slope.unwrap() < 0.0);
        let m = multiplicative_form(&s);
        for k in 2..40 {
            assert_relative_eq!(m.lambdas[k - 1], 1.0 / (k as f64 - 1.0), max_relative = 1e-12);
        }
        assert!(m.bounded && m.nonincreasing && m.sum_dominates && m.tail_decreasing);
    }

    #[test]
    fn geometric_fails_threshold_only() {
        let s = PositiveSequence::geometric(0.5, 1024).unwrap();
        let r = check_conditions(&s).unwrap();
        assert!(r.monotone && r.log_concave);
        assert!(!r.threshold_tail_decreasing);
        assert!(!r.passes());
        let m = multiplicative_form(&s);
        for l in &m.lambdas[1..] {
            assert_relative_eq!(*l, 2f64.sqrt() - 1.0, max_relative = 1e-12);
        }
        assert!(!m.sum_dominates);
    }

    #[test]
    fn constant_improvement_ratio() {
        let s = PositiveSequence::constant(1_000_000).unwrap();
        let n = 1e6f64;
        let expect = (n * n.ln().ln()).sqrt() / n;
        assert_relative_eq!(improvement_ratio(&s, 1_000_000).unwrap(), expect, max_relative = 1e-12);
        assert_relative_eq!(expect, 0.001_620_43, max_relative = 1e-5);
    }

    #[test]
    fn improvement_ratio_guard() {
        let s = PositiveSequence::constant(32).unwrap();
        assert!(matches!(improvement_ratio(&s, 15), Err(Error::LilRegime { .. })));
        assert!(improvement_ratio(&s, 16).is_ok());
    }

    #[test]
    fn geometric_ratio_grows() {
        let s = PositiveSequence::geometric(0.5, 400).unwrap();
        let r = improvement_ratios(&s, &[100, 400]).unwrap();
        assert!(r[1] > r[0]);
    }

    #[test]
    fn power_of_index_ratio_decreases() {
        let s = PositiveSequence::power_of_index(1.0, 1 << 20).unwrap();
        let ns: Vec<usize> = (6..=20).map(|k| 1usize << k).collect();
        let r = improvement_ratios(&s, &ns).unwrap();
        assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
        assert!(*r.last().unwrap() < 0.02);
    }

    #[test]
    fn multiplicative_round_trip() {
        for s in [
            PositiveSequence::power_of_index(1.5, 500).unwrap(),
            PositiveSequence::geometric(0.3, 500).unwrap(),
            PositiveSequence::explicit(&[1.0, 3.0, 2.0, 7.5, 7.5, 0.1]).unwrap(),
        ] {
            let m = multiplicative_form(&s);
            let l = s.ln_values();
            let target = l[l.len() - 1] - l[0];
            // relative error of the rebuilt ratio aₙ/a₁
            assert!((rebuild_log_ratio(&m.lambdas) - target).exp_m1().abs() < 1e-12);
        }
    }

    #[test]
    fn explicit_rejects_nonpositive() {
        assert!(PositiveSequence::explicit(&[1.0, 0.0]).is_err());
        assert!(PositiveSequence::explicit(&[]).is_err());
    }

    #[test]
    fn continuous_check_on_built_in_gauges() {
        let ladder = default_threshold_ladder();
        let log_power = GaugeFunction::shifted_log_power(1.5, 1.0).unwrap();
        let r = continuous_threshold_check(&log_power, &ladder).unwrap();
        assert!(r.ratio_decreasing, "{r:?}");
        assert_eq!(r.concavity_violations, 0);

        let constant = GaugeFunction::constant(1.0).unwrap();
        let r = continuous_threshold_check(&constant, &ladder).unwrap();
        assert!(r.ratio_decreasing);
        for p in &r.points {
            if let Some(ratio) = p.ratio {
                let l = -p.y.ln();
                assert_relative_eq!(ratio, (l * l.ln().ln()).sqrt() / l, max_relative = 1e-8);
            }
        }

        let power = GaugeFunction::power_law(0.3).unwrap();
        let r = continuous_threshold_check(&power, &ladder).unwrap();
        assert!(!r.ratio_decreasing);
    }
}
