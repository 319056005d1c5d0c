//! Gauge functions `ψ`, `ε` on `(0, 1]`, their square function
//! `Ψ(y) = ∫_y^1 ψ(t)²/t dt`, and sampled checks of the structural
//! conditions (monotonicity, averaging constant, doubling).
//!
//! Every integral in `dt/t` is evaluated in the logarithmic variable
//! `t = e^{-s}`, which turns the singular endpoint into a half-line.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{check_height, Error, Result, E_TO_E};
use crate::quadrature::{integrate, Estimate, Tolerance};

/// Relative tolerance for every gauge integral.
pub const GAUGE_REL_TOL: f64 = 1e-8;

/// Last window edge (in `log(y/t)`) for averaging integrals.
const AVERAGING_WINDOW_LIMIT: f64 = 4096.0;

#[derive(Debug, Clone, PartialEq)]
pub enum GaugeKind {
    /// `ψ ≡ B`.
    Constant(f64),
    /// `ψ(y) = (c + log(1/y))^(alpha - 1)`.
    ShiftedLogPower { alpha: f64, shift: f64 },
    /// `ψ(y) = y^(-delta)`.
    PowerLaw { delta: f64 },
    /// Knots `(y, value)` with strictly decreasing `y`; `log ψ` is linear in
    /// `log y` between knots and constant outside the tabulated range.
    Tabulated(Vec<(f64, f64)>),
    /// `ε(y) = min(cap, sqrt(ℓ₃(L) / L))` with `L = log(1/y)` and
    /// `ℓ₃(L) = log(e + log(e + log(e + L)))`, a positive stand-in for
    /// `log log log(1/y)` with the same behaviour as `y → 0`.
    IteratedLogDecay { cap: f64 },
}

/// A positive gauge on `(0, 1]`, optionally multiplied by a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFunction {
    kind: GaugeKind,
    scale: f64,
}

impl GaugeFunction {
    pub fn constant(b: f64) -> Result<Self> {
        positive("constant", b)?;
        Ok(Self::from_kind(GaugeKind::Constant(b)))
    }

    pub fn shifted_log_power(alpha: f64, shift: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::Domain {
                what: "alpha",
                value: alpha,
            });
        }
        positive("shift", shift)?;
        Ok(Self::from_kind(GaugeKind::ShiftedLogPower { alpha, shift }))
    }

    pub fn power_law(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::Domain {
                what: "delta",
                value: delta,
            });
        }
        Ok(Self::from_kind(GaugeKind::PowerLaw { delta }))
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Precondition("tabulated gauge needs at least one knot"));
        }
        for &(y, v) in &knots {
            check_height(y)?;
            positive("tabulated value", v)?;
        }
        if knots.windows(2).any(|w| w[1].0 >= w[0].0) {
            return Err(Error::Precondition(
                "tabulated knots must have strictly decreasing heights",
            ));
        }
        Ok(Self::from_kind(GaugeKind::Tabulated(knots)))
    }

    pub fn iterated_log_decay(cap: f64) -> Result<Self> {
        positive("cap", cap)?;
        Ok(Self::from_kind(GaugeKind::IteratedLogDecay { cap }))
    }

    fn from_kind(kind: GaugeKind) -> Self {
        GaugeFunction { kind, scale: 1.0 }
    }

    /// The same gauge multiplied by `factor > 0`.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        positive("scale", factor)?;
        self.scale *= factor;
        Ok(self)
    }

    pub fn kind(&self) -> &GaugeKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `ψ(y)` for `0 < y ≤ 1`.
    pub fn eval(&self, y: f64) -> Result<f64> {
        check_height(y)?;
        Ok(self.at_log_height(-y.ln()))
    }

    /// `ψ(e^{-L})`, defined for every `L ≥ 0` including heights that
    /// underflow as `f64`.
    pub fn at_log_height(&self, log_inv: f64) -> f64 {
        self.ln_at_log_height(log_inv).exp()
    }

    /// `log ψ(e^{-L})`.
    pub fn ln_at_log_height(&self, log_inv: f64) -> f64 {
        let l = log_inv.max(0.0);
        let base = match &self.kind {
            GaugeKind::Constant(b) => b.ln(),
            GaugeKind::ShiftedLogPower { alpha, shift } => (alpha - 1.0) * (shift + l).ln(),
            GaugeKind::PowerLaw { delta } => delta * l,
            GaugeKind::Tabulated(knots) => tabulated_ln(knots, l),
            GaugeKind::IteratedLogDecay { cap } => {
                let e = core::f64::consts::E;
                let l3 = (e + (e + (e + l).ln()).ln()).ln();
                let decay = if l > 0.0 { 0.5 * (l3 / l).ln() } else { f64::INFINITY };
                decay.min(cap.ln())
            }
        };
        base + self.scale.ln()
    }

    /// Square function `Ψ(y) = ∫_y^1 ψ(t)²/t dt`; closed form for constant and
    /// power-law gauges, quadrature otherwise.
    pub fn square_function(&self, y: f64) -> Result<f64> {
        check_height(y)?;
        self.square_function_at_log(-y.ln())
    }

    /// `Ψ(e^{-L})`.
    pub fn square_function_at_log(&self, log_inv: f64) -> Result<f64> {
        let s2 = self.scale * self.scale;
        match &self.kind {
            GaugeKind::Constant(b) => Ok(s2 * b * b * log_inv),
            GaugeKind::PowerLaw { delta } if *delta > 0.0 => Ok(s2 * (2.0 * delta * log_inv).exp_m1() / (2.0 * delta)),
            GaugeKind::PowerLaw { .. } => Ok(s2 * log_inv),
            _ => Ok(self.square_function_quadrature_at_log(log_inv)?.value),
        }
    }

    /// `Ψ(y)` by quadrature regardless of kind.
    pub fn square_function_quadrature(&self, y: f64) -> Result<Estimate> {
        check_height(y)?;
        self.square_function_quadrature_at_log(-y.ln())
    }

    fn square_function_quadrature_at_log(&self, log_inv: f64) -> Result<Estimate> {
        self.log_variable_integral(log_inv, |g, s| (2.0 * g.ln_at_log_height(s)).exp())
    }

    /// `∫_y^1 ψ(t)/t dt`, the vertical growth bound of a `B_ψ` function.
    pub fn log_integral(&self, y: f64) -> Result<f64> {
        check_height(y)?;
        self.log_integral_at_log(-y.ln())
    }

    /// `∫_{e^{-L}}^1 ψ(t)/t dt`.
    pub fn log_integral_at_log(&self, log_inv: f64) -> Result<f64> {
        match &self.kind {
            GaugeKind::Constant(b) => Ok(self.scale * b * log_inv),
            GaugeKind::PowerLaw { delta } if *delta > 0.0 => Ok(self.scale * (delta * log_inv).exp_m1() / delta),
            _ => Ok(self.log_variable_integral(log_inv, |g, s| g.at_log_height(s))?.value),
        }
    }

    /// `∫_0^y ψ(t) dt`; fails when the integral diverges.
    pub fn integral_from_zero(&self, y: f64) -> Result<f64> {
        check_height(y)?;
        Ok(y * self.eval(y)? * self.averaging_ratio(-y.ln())?)
    }

    /// `(1/y) ∫_0^y ψ / ψ(y)` at `y = e^{-L}`.
    ///
    /// In the variable `t = y e^{-s}` the integrand is
    /// `ψ(y e^{-s}) e^{-s} / ψ(y)`; it is integrated over doubling windows
    /// `[0, 32], [32, 64], …` until a window adds less than the tolerance.
    fn averaging_ratio(&self, log_inv: f64) -> Result<f64> {
        let base = self.ln_at_log_height(log_inv);
        let integrand = |s: f64| (self.ln_at_log_height(log_inv + s) - base - s).exp();
        let mut total = integrate(integrand, 0.0, 32.0, Tolerance::relative(GAUGE_REL_TOL))?.value;
        let mut lo = 32.0;
        while lo < AVERAGING_WINDOW_LIMIT {
            let piece = integrate(
                integrand,
                lo,
                2.0 * lo,
                Tolerance {
                    abs: 0.1 * GAUGE_REL_TOL * total,
                    rel: GAUGE_REL_TOL,
                    max_segments: 2000,
                },
            )?
            .value;
            total += piece;
            if piece <= GAUGE_REL_TOL * total {
                return Ok(total);
            }
            lo *= 2.0;
        }
        Err(Error::Quadrature {
            partial: total,
            error_estimate: f64::INFINITY,
        })
    }

    /// `∫_0^L f(ψ, s) ds`, split at tabulated knots.
    fn log_variable_integral<F>(&self, log_inv: f64, f: F) -> Result<Estimate>
    where
        F: Fn(&Self, f64) -> f64,
    {
        let mut breaks: Vec<f64> = alloc::vec![0.0];
        if let GaugeKind::Tabulated(knots) = &self.kind {
            breaks.extend(knots.iter().map(|&(y, _)| -y.ln()).filter(|&s| s > 0.0 && s < log_inv));
        }
        breaks.push(log_inv);
        let mut total = Estimate::exact(0.0);
        for w in breaks.windows(2) {
            let part = integrate(|s| f(self, s), w[0], w[1], Tolerance::relative(GAUGE_REL_TOL))?;
            total.value += part.value;
            total.error += part.error;
        }
        Ok(total)
    }

    /// `sqrt(Ψ(y) log log Ψ(y))`, defined only where `Ψ(y) > e^e`.
    pub fn lil_denominator(&self, y: f64) -> Result<f64> {
        check_height(y)?;
        lil_normalizer(self.square_function(y)?)
    }

    /// Sampled estimates of the averaging constant `A`, the doubling
    /// constant and monotonicity on the grid `y = 2^{-k/4}`.
    pub fn diagnose(&self, grid_size: usize) -> Result<GaugeDiagnostics> {
        if grid_size < 8 {
            return Err(Error::Precondition("diagnose needs grid_size >= 8"));
        }
        let grid: Vec<f64> = (0..grid_size)
            .map(|k| k as f64 * 0.25 * core::f64::consts::LN_2)
            .collect();
        let refined: Vec<f64> = (0..2 * grid_size - 1)
            .map(|k| k as f64 * 0.125 * core::f64::consts::LN_2)
            .collect();
        let coarse = self.sample_constants(&grid);
        let fine = self.sample_constants(&refined);
        let mut nonincreasing = grid
            .windows(2)
            .all(|w| self.ln_at_log_height(w[1]) >= self.ln_at_log_height(w[0]) - 1e-12);
        if let GaugeKind::Tabulated(knots) = &self.kind {
            nonincreasing &= knots.windows(2).all(|w| w[1].1 >= w[0].1);
        }
        let converged = coarse.converged && fine.converged;
        let stable = converged
            && relative_gap(coarse.averaging, fine.averaging) <= 0.01
            && relative_gap(coarse.doubling, fine.doubling) <= 0.01;
        Ok(GaugeDiagnostics {
            averaging_constant_estimate: coarse.averaging,
            doubling_constant_estimate: coarse.doubling,
            nonincreasing,
            converged,
            stable,
            grid: grid.iter().map(|l| (-l).exp()).collect(),
        })
    }

    fn sample_constants(&self, grid: &[f64]) -> Sampled {
        let mut out = Sampled {
            averaging: 0.0,
            doubling: 0.0,
            converged: true,
        };
        for &l in grid {
            match self.averaging_ratio(l) {
                Ok(a) if a.is_finite() => out.averaging = out.averaging.max(a),
                _ => {
                    out.converged = false;
                    out.averaging = f64::INFINITY;
                }
            }
            let ratio = (self.ln_at_log_height(l + core::f64::consts::LN_2) - self.ln_at_log_height(l)).exp();
            out.doubling = out.doubling.max(ratio);
        }
        out
    }
}

struct Sampled {
    averaging: f64,
    doubling: f64,
    converged: bool,
}

/// Sampled structural constants of a gauge.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeDiagnostics {
    /// `sup (1/y)∫_0^y ψ / ψ(y)`; infinite when the integral diverges.
    pub averaging_constant_estimate: f64,
    /// `sup ψ(y/2)/ψ(y)`.
    pub doubling_constant_estimate: f64,
    pub nonincreasing: bool,
    /// `false` when some averaging integral failed to converge.
    pub converged: bool,
    /// Both estimates move by at most 1% when the grid spacing is halved.
    pub stable: bool,
    /// Sampled heights, decreasing from 1.
    pub grid: Vec<f64>,
}

impl GaugeDiagnostics {
    /// The gauge satisfies the sampled conditions.
    pub fn passes(&self) -> bool {
        self.nonincreasing && self.converged && self.stable
    }
}

/// `sqrt(V log log V)` for `V > e^e`.
pub fn lil_normalizer(v: f64) -> Result<f64> {
    if v > E_TO_E {
        Ok((v * v.ln().ln()).sqrt())
    } else {
        Err(Error::LilRegime { quantity: v })
    }
}

/// `sqrt(L log log log L)` for `L = log(1/y) > e^e`, the classical Bloch
/// normalisation.
pub fn bloch_normalizer(log_inv: f64) -> Result<f64> {
    if log_inv > E_TO_E {
        Ok((log_inv * log_inv.ln().ln().ln()).sqrt())
    } else {
        Err(Error::LilRegime { quantity: log_inv })
    }
}

fn tabulated_ln(knots: &[(f64, f64)], l: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if l <= -first.0.ln() {
        return first.1.ln();
    }
    if l >= -last.0.ln() {
        return last.1.ln();
    }
    for w in knots.windows(2) {
        let (l0, l1) = (-w[0].0.ln(), -w[1].0.ln());
        if l <= l1 {
            let theta = (l - l0) / (l1 - l0);
            return (1.0 - theta) * w[0].1.ln() + theta * w[1].1.ln();
        }
    }
    last.1.ln()
}

fn positive(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn riemann_log_sum(g: &GaugeFunction, y: f64, nodes: usize, power: i32) -> f64 {
        // midpoint rule in s = log(1/t) on `nodes` equal cells
        let l = -y.ln();
        let h = l / nodes as f64;
        (0..nodes)
            .map(|i| g.at_log_height((i as f64 + 0.5) * h).powi(power))
            .sum::<f64>()
            * h
    }

    #[test]
    fn eval_examples() {
        assert_eq!(GaugeFunction::constant(1.0).unwrap().eval(0.5).unwrap(), 1.0);
        assert_relative_eq!(
            GaugeFunction::power_law(0.5).unwrap().eval(0.25).unwrap(),
            2.0,
            max_relative = 1e-15
        );
        let g = GaugeFunction::shifted_log_power(0.5, 1.0).unwrap();
        assert_relative_eq!(g.eval((-3f64).exp()).unwrap(), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn eval_rejects_heights_outside_unit_interval() {
        let g = GaugeFunction::constant(1.0).unwrap();
        assert!(matches!(g.eval(0.0), Err(Error::Domain { .. })));
        assert!(matches!(g.eval(1.5), Err(Error::Domain { .. })));
        assert!(matches!(g.eval(f64::NAN), Err(Error::Domain { .. })));
    }

    #[test]
    fn square_function_examples() {
        let c = GaugeFunction::constant(1.0).unwrap();
        assert_relative_eq!(c.square_function((-4f64).exp()).unwrap(), 4.0, max_relative = 1e-14);
        for g in [
            c.clone(),
            GaugeFunction::power_law(0.3).unwrap(),
            GaugeFunction::shifted_log_power(0.5, 1.0).unwrap(),
        ] {
            assert_eq!(g.square_function(1.0).unwrap(), 0.0);
        }
        let g = GaugeFunction::shifted_log_power(0.5, 1.0).unwrap();
        let y = (-3f64).exp();
        let brute = riemann_log_sum(&g, y, 1_000_000, 2);
        assert_relative_eq!(g.square_function(y).unwrap(), brute, max_relative = 1e-6);
        // ψ² = 1/(1+s) integrates to log(1 + L)
        assert_relative_eq!(g.square_function(y).unwrap(), 4f64.ln(), max_relative = 1e-8);
    }

    #[test]
    fn closed_form_and_quadrature_agree() {
        for g in [
            GaugeFunction::constant(1.7).unwrap(),
            GaugeFunction::power_law(0.3).unwrap(),
            GaugeFunction::power_law(0.05).unwrap().scaled(2.0).unwrap(),
        ] {
            for y in [0.9, 0.3, 1e-3, 1e-9] {
                let closed = g.square_function(y).unwrap();
                let quad = g.square_function_quadrature(y).unwrap().value;
                assert_relative_eq!(closed, quad, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn lil_denominator_examples() {
        let c = GaugeFunction::constant(1.0).unwrap();
        let v = c.lil_denominator((-16f64).exp()).unwrap();
        assert_relative_eq!(v, (16.0 * 16f64.ln().ln()).sqrt(), max_relative = 1e-14);
        assert!((v - 4.0394).abs() < 1e-4);
        assert!(matches!(c.lil_denominator((-2f64).exp()), Err(Error::LilRegime { .. })));

        let p = GaugeFunction::power_law(0.3).unwrap();
        let y = 2f64.powi(-20);
        let psi = (y.powf(-0.6) - 1.0) / 0.6;
        assert_relative_eq!(psi, 4095.0 / 0.6, max_relative = 1e-12);
        let expected = (psi * psi.ln().ln()).sqrt();
        assert_relative_eq!(p.lil_denominator(y).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn diagnose_examples() {
        let d = GaugeFunction::constant(1.0).unwrap().diagnose(16).unwrap();
        assert!((d.averaging_constant_estimate - 1.0).abs() < 1e-6);
        assert!((d.doubling_constant_estimate - 1.0).abs() < 1e-12);
        assert!(d.nonincreasing && d.passes());

        // (1/y)∫_0^y t^{-1/2} dt = 2 y^{-1/2}, so A = 2
        let d = GaugeFunction::power_law(0.5).unwrap().diagnose(16).unwrap();
        assert!((d.averaging_constant_estimate - 2.0).abs() < 1e-4);
        assert!(d.passes());

        let t = GaugeFunction::tabulated(alloc::vec![(1.0, 1.0), (0.5, 2.0), (0.25, 1.5)]).unwrap();
        assert!(!t.diagnose(8).unwrap().nonincreasing);
    }

    #[test]
    fn divergent_averaging_is_flagged_not_fatal() {
        let d = GaugeFunction::power_law(1.0).unwrap().diagnose(8).unwrap();
        assert!(!d.converged);
        assert!(!d.passes());
        assert!(d.averaging_constant_estimate.is_infinite());
    }

    #[test]
    fn shifted_log_power_monotonicity_depends_on_exponent() {
        assert!(
            GaugeFunction::shifted_log_power(1.5, 1.0)
                .unwrap()
                .diagnose(16)
                .unwrap()
                .nonincreasing
        );
        assert!(
            !GaugeFunction::shifted_log_power(0.5, 1.0)
                .unwrap()
                .diagnose(16)
                .unwrap()
                .nonincreasing
        );
    }

    #[test]
    fn tabulated_interpolates_log_linearly() {
        let t = GaugeFunction::tabulated(alloc::vec![(1.0, 1.0), (0.25, 4.0)]).unwrap();
        // log ψ linear in log y: ψ(1/2) = 2
        assert_relative_eq!(t.eval(0.5).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(t.eval(0.01).unwrap(), 4.0, max_relative = 1e-14);
        let q = t.square_function_quadrature(0.01).unwrap().value;
        assert_relative_eq!(q, riemann_log_sum(&t, 0.01, 400_000, 2), max_relative = 1e-6);
    }

    #[test]
    fn bad_tabulation_is_rejected() {
        assert!(GaugeFunction::tabulated(alloc::vec![(0.5, 1.0), (0.7, 1.0)]).is_err());
        assert!(GaugeFunction::tabulated(alloc::vec![(0.5, -1.0)]).is_err());
        assert!(GaugeFunction::tabulated(alloc::vec![]).is_err());
    }
}
