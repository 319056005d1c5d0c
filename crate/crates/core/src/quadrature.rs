//! One-dimensional quadrature: globally adaptive Gauss–Kronrod (7/15) and
//! Gauss–Legendre rules for tensor-product cube averages.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// A quadrature value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, error: 0.0 }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    // |K15 - G7| bounds the error of the embedded Gauss rule, so it is a
    // conservative estimate for the Kronrod value.
    let error = ((kronrod - gauss) * half).abs().max(50.0 * f64::EPSILON * value.abs());
    Estimate { value, error }
}

struct Segment {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.partial_cmp(&other.est.error).unwrap_or(Ordering::Equal)
    }
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_segments: usize,
}

impl Tolerance {
    pub const fn relative(rel: f64) -> Self {
        Tolerance {
            abs: 1e-300,
            rel,
            max_segments: 2000,
        }
    }

    pub const fn absolute(abs: f64) -> Self {
        Tolerance {
            abs,
            rel: 0.0,
            max_segments: 2000,
        }
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs, rel * |value|)`.
/// A non-finite partial sum or exhausting `max_segments` yields
/// [`Error::Quadrature`] carrying the partial estimate.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate::exact(0.0));
    }
    let first = kronrod15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    let mut total = first;
    heap.push(Segment { a, b, est: first });
    loop {
        if !total.value.is_finite() || !total.error.is_finite() {
            return Err(Error::Quadrature {
                partial: total.value,
                error_estimate: total.error,
            });
        }
        let target = tol.abs.max(tol.rel * total.value.abs());
        if total.error <= target {
            return Ok(total);
        }
        if heap.len() >= tol.max_segments {
            return Err(Error::Quadrature {
                partial: total.value,
                error_estimate: total.error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::Quadrature {
                partial: total.value,
                error_estimate: total.error,
            });
        }
        let left = kronrod15(&mut f, worst.a, mid);
        let right = kronrod15(&mut f, mid, worst.b);
        total.value += left.value + right.value - worst.est.value;
        total.error += left.error + right.error - worst.est.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            est: left,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            est: right,
        });
        // Re-sum to keep rounding drift out of the stopping test.
        if heap.len() % 64 == 0 {
            total = heap.iter().fold(Estimate::exact(0.0), |acc, s| Estimate {
                value: acc.value + s.est.value,
                error: acc.error + s.est.error,
            });
        }
    }
}

/// Integrates `f` over `[a, ∞)` through `t = a + s / (1 - s)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: Tolerance) -> Result<Estimate> {
    integrate(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - s;
            let t = a + s / one_minus;
            let v = f(t) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else if t.is_infinite() {
                0.0
            } else {
                v
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + h * x, h * w))
    }

    /// Composite rule with `panels` equal panels on `[a, b]`.
    pub fn composite<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let width = (b - a) / panels as f64;
        let mut sum = 0.0;
        for p in 0..panels {
            let lo = a + width * p as f64;
            let hi = if p + 1 == panels { b } else { lo + width };
            let mut part = 0.0;
            for (x, w) in self.mapped(lo, hi) {
                part += w * f(x);
            }
            sum += part;
        }
        sum
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_integrates_polynomials_exactly() {
        let est = integrate(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, Tolerance::relative(1e-12)).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert_relative_eq!(est.value, exact, max_relative = 1e-13);
    }

    #[test]
    fn log_singularity_at_endpoint() {
        // ∫_0^1 log(1/t) dt = 1
        let est = integrate(|t| -(t.ln()), 0.0, 1.0, Tolerance::relative(1e-10)).unwrap();
        assert_relative_eq!(est.value, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn semi_infinite_exponential() {
        let est = integrate_to_infinity(|t| (-t).exp(), 0.0, Tolerance::relative(1e-10)).unwrap();
        assert_relative_eq!(est.value, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn divergent_integral_reports_failure() {
        let r = integrate(|x| x.powf(-1.5), 0.0, 1.0, Tolerance::relative(1e-8));
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn gauss_legendre_weights_and_exactness() {
        for n in [1, 2, 5, 16, 64, 128] {
            let gl = GaussLegendre::new(n);
            let wsum: f64 = gl.mapped(-1.0, 1.0).map(|(_, w)| w).sum();
            assert_relative_eq!(wsum, 2.0, max_relative = 1e-13);
            // exact for degree 2n - 1
            let deg = 2 * n - 1;
            let val: f64 = gl.mapped(0.0, 1.0).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert_relative_eq!(val, 1.0 / (deg as f64 + 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn composite_rule_on_oscillatory_integrand() {
        let gl = GaussLegendre::new(16);
        let w = 200.0;
        let val = gl.composite(|x| (w * x).cos(), 0.0, 1.0, 64);
        assert_relative_eq!(val, w.sin() / w, max_relative = 1e-10);
    }
}
