//! Analytic self-maps of the unit disc, the hyperbolic metric, and the radial
//! square function `A²(f)(ξ, r) = ∫_0^r 4 log(1/t) |f'(tξ)|² / (1-|f(tξ)|²)² dt`.
//!
//! Hyperbolic metric normalisation: density `2|dz|/(1-|z|²)`, so that
//! `d_h(0, t) = log((1+t)/(1-t))`.
//!
//! Points are carried together with `1-|z|²` ([`DiscPoint`]) so that
//! quantities near the unit circle keep full relative precision: radial paths
//! know `1-t` exactly, and each Blaschke factor updates `1-|φ(z)|²` through
//! `(1-|a|²)(1-|z|²)/|1-āz|²`.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result, E_TO_E};
use crate::quadrature::{integrate, integrate_to_infinity, Tolerance};
use crate::rng::keyed_stream;

pub type C64 = Complex64;

/// Relative tolerance of the radial square-function integrals.
pub const RADIAL_REL_TOL: f64 = 1e-10;

/// A point of the disc with its defect `1-|z|²` stored separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscPoint {
    pub z: C64,
    pub defect: f64,
}

impl DiscPoint {
    pub fn new(z: C64) -> Result<Self> {
        let r = z.norm();
        if !(r < 1.0) {
            return Err(Error::Domain {
                what: "disc point modulus",
                value: r,
            });
        }
        Ok(DiscPoint {
            z,
            defect: (1.0 - r) * (1.0 + r),
        })
    }

    /// `(1 - gap) ξ` for a unimodular `ξ`, with the defect computed from `gap`.
    pub fn radial(xi: C64, gap: f64) -> Self {
        DiscPoint {
            z: xi * (1.0 - gap),
            defect: gap * (2.0 - gap),
        }
    }

    pub fn modulus(&self) -> f64 {
        self.z.norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiscMapKind {
    Identity,
    Monomial(u32),
    /// `f ≡ c` with `|c| < 1`.
    Constant(C64),
    /// `e^{iθ} ∏ (z - a_k)/(1 - ā_k z)`.
    Blaschke {
        zeros: Vec<C64>,
        rotation: f64,
    },
    /// `outer ∘ inner`.
    Composition {
        outer: Box<DiscMap>,
        inner: Box<DiscMap>,
    },
}

/// An analytic map of the unit disc into itself.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscMap {
    kind: DiscMapKind,
}

/// Value, derivative and `1-|f|²` at a point.
#[derive(Debug, Clone, Copy)]
pub struct MapSample {
    pub value: C64,
    pub derivative: C64,
    pub defect: f64,
}

impl DiscMap {
    pub fn identity() -> Self {
        DiscMap {
            kind: DiscMapKind::Identity,
        }
    }

    pub fn monomial(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Precondition("monomial degree must be at least 1"));
        }
        Ok(DiscMap {
            kind: DiscMapKind::Monomial(k),
        })
    }

    pub fn constant(c: C64) -> Result<Self> {
        DiscPoint::new(c)?;
        Ok(DiscMap {
            kind: DiscMapKind::Constant(c),
        })
    }

    pub fn blaschke(zeros: Vec<C64>, rotation: f64) -> Result<Self> {
        if zeros.is_empty() {
            return Err(Error::Precondition("Blaschke product needs at least one zero"));
        }
        for a in &zeros {
            DiscPoint::new(*a)?;
        }
        Ok(DiscMap {
            kind: DiscMapKind::Blaschke { zeros, rotation },
        })
    }

    /// Disc automorphism `e^{iθ}(z - a)/(1 - āz)`.
    pub fn automorphism(a: C64, rotation: f64) -> Result<Self> {
        Self::blaschke(alloc::vec![a], rotation)
    }

    pub fn compose(outer: DiscMap, inner: DiscMap) -> Self {
        DiscMap {
            kind: DiscMapKind::Composition {
                outer: Box::new(outer),
                inner: Box::new(inner),
            },
        }
    }

    /// Blaschke product of the given degree with zeros drawn uniformly (by
    /// area) from the disc of radius `max_modulus`, and a uniform rotation.
    pub fn random_blaschke(degree: usize, max_modulus: f64, seed: u64, index: u64) -> Result<Self> {
        if !(max_modulus > 0.0 && max_modulus < 1.0) {
            return Err(Error::Domain {
                what: "max_modulus",
                value: max_modulus,
            });
        }
        let mut rng = keyed_stream(seed, 0xd15c, index);
        let zeros = (0..degree)
            .map(|_| {
                let r = max_modulus * rng.uniform().sqrt();
                C64::from_polar(r, 2.0 * PI * rng.uniform())
            })
            .collect();
        Self::blaschke(zeros, 2.0 * PI * rng.uniform())
    }

    pub fn kind(&self) -> &DiscMapKind {
        &self.kind
    }

    /// Whether the map is a finite Blaschke product (automorphisms and
    /// monomials included, compositions of such included).
    pub fn is_finite_blaschke(&self) -> bool {
        match &self.kind {
            DiscMapKind::Identity | DiscMapKind::Monomial(_) | DiscMapKind::Blaschke { .. } => true,
            DiscMapKind::Constant(_) => false,
            DiscMapKind::Composition { outer, inner } => outer.is_finite_blaschke() && inner.is_finite_blaschke(),
        }
    }

    pub fn value(&self, z: C64) -> Result<C64> {
        Ok(self.sample(&DiscPoint::new(z)?).value)
    }

    pub fn derivative(&self, z: C64) -> Result<C64> {
        Ok(self.sample(&DiscPoint::new(z)?).derivative)
    }

    /// Value, derivative and `1-|f|²` at `p`.
    pub fn sample(&self, p: &DiscPoint) -> MapSample {
        match &self.kind {
            DiscMapKind::Identity => MapSample {
                value: p.z,
                derivative: C64::new(1.0, 0.0),
                defect: p.defect,
            },
            DiscMapKind::Monomial(k) => {
                let k = *k as i32;
                MapSample {
                    value: p.z.powi(k),
                    derivative: p.z.powi(k - 1) * k as f64,
                    defect: -(k as f64 * (-p.defect).ln_1p()).exp_m1(),
                }
            }
            DiscMapKind::Constant(c) => MapSample {
                value: *c,
                derivative: C64::new(0.0, 0.0),
                defect: (1.0 - c.norm()) * (1.0 + c.norm()),
            },
            DiscMapKind::Blaschke { zeros, rotation } => blaschke_sample(zeros, *rotation, p),
            DiscMapKind::Composition { outer, inner } => {
                let w = inner.sample(p);
                let o = outer.sample(&DiscPoint {
                    z: w.value,
                    defect: w.defect,
                });
                MapSample {
                    value: o.value,
                    derivative: o.derivative * w.derivative,
                    defect: o.defect,
                }
            }
        }
    }
}

/// Distance below which the logarithmic-derivative sum gives way to the
/// product rule.
const NEAR_ZERO: f64 = 1e-6;

fn blaschke_sample(zeros: &[C64], rotation: f64, p: &DiscPoint) -> MapSample {
    let one = C64::new(1.0, 0.0);
    let unit = C64::from_polar(1.0, rotation);
    let mut value = unit;
    let mut log_defect = 0.0;
    let mut log_derivative = C64::new(0.0, 0.0);
    let mut near_zero = false;
    for a in zeros {
        let denom = one - a.conj() * p.z;
        let num = p.z - a;
        value *= num / denom;
        let a_defect = (1.0 - a.norm()) * (1.0 + a.norm());
        // 1 - |φ_a(z)|²
        let factor_defect = a_defect * p.defect / denom.norm_sqr();
        log_defect += (-factor_defect.min(1.0)).ln_1p();
        if num.norm() < NEAR_ZERO {
            near_zero = true;
        } else {
            log_derivative += a_defect / (num * denom);
        }
    }
    let derivative = if near_zero {
        blaschke_derivative_product_rule(zeros, unit, p.z)
    } else {
        value * log_derivative
    };
    MapSample {
        value,
        derivative,
        defect: -log_defect.exp_m1(),
    }
}

fn blaschke_derivative_product_rule(zeros: &[C64], unit: C64, z: C64) -> C64 {
    let one = C64::new(1.0, 0.0);
    let factors: Vec<(C64, C64)> = zeros
        .iter()
        .map(|a| {
            let denom = one - a.conj() * z;
            let phi = (z - a) / denom;
            let dphi = (1.0 - a.norm_sqr()) / (denom * denom);
            (phi, dphi)
        })
        .collect();
    let mut total = C64::new(0.0, 0.0);
    for k in 0..factors.len() {
        let mut term = factors[k].1;
        for (j, f) in factors.iter().enumerate() {
            if j != k {
                term *= f.0;
            }
        }
        total += term;
    }
    unit * total
}

/// `d_h(z, w) = log((1+ρ)/(1-ρ))` with `ρ = |z-w|/|1-z̄w|`.
pub fn hyperbolic_distance(z: C64, w: C64) -> Result<f64> {
    let pz = DiscPoint::new(z)?;
    let pw = DiscPoint::new(w)?;
    Ok(hyperbolic_distance_points(&pz, &pw))
}

pub fn hyperbolic_distance_points(z: &DiscPoint, w: &DiscPoint) -> f64 {
    let denom = (C64::new(1.0, 0.0) - z.z.conj() * w.z).norm_sqr();
    let rho = ((z.z - w.z).norm_sqr() / denom).sqrt();
    // 1 - ρ² = (1-|z|²)(1-|w|²)/|1-z̄w|²
    let defect = z.defect * w.defect / denom;
    2.0 * rho.ln_1p() - defect.ln()
}

/// `d_h(p, 0)`.
pub fn distance_to_origin(p: &DiscPoint) -> f64 {
    2.0 * p.modulus().ln_1p() - p.defect.ln()
}

/// Hyperbolic derivative `(1-|z|²)|f'(z)|/(1-|f(z)|²)`.
pub fn hyperbolic_derivative(f: &DiscMap, z: C64) -> Result<f64> {
    hyperbolic_derivative_at(f, &DiscPoint::new(z)?)
}

pub fn hyperbolic_derivative_at(f: &DiscMap, p: &DiscPoint) -> Result<f64> {
    let s = f.sample(p);
    if !(s.defect > 0.0) {
        return Err(Error::Saturation { partial: f64::NAN });
    }
    Ok(p.defect * s.derivative.norm() / s.defect)
}

/// `u(z) = -log(1-|f(z)|²)`.
pub fn log_defect_potential(f: &DiscMap, p: &DiscPoint) -> Result<f64> {
    let s = f.sample(p);
    if !(s.defect > 0.0) {
        return Err(Error::Saturation { partial: f64::NAN });
    }
    Ok(-s.defect.ln())
}

/// `Δ(-log(1-|f|²)) = 4|f'|²/(1-|f|²)²`.
pub fn potential_laplacian(f: &DiscMap, p: &DiscPoint) -> Result<f64> {
    let s = f.sample(p);
    if !(s.defect > 0.0) {
        return Err(Error::Saturation { partial: f64::NAN });
    }
    Ok(4.0 * s.derivative.norm_sqr() / (s.defect * s.defect))
}

/// `|(-log(1-|f|²)) - d_h(f(z), 0)|`, which equals `2 log(1+|f(z)|)`.
pub fn bridge_gap(f: &DiscMap, p: &DiscPoint) -> Result<f64> {
    let s = f.sample(p);
    if !(s.defect > 0.0) {
        return Err(Error::Saturation { partial: f64::NAN });
    }
    let image = DiscPoint {
        z: s.value,
        defect: s.defect,
    };
    Ok((-s.defect.ln() - distance_to_origin(&image)).abs())
}

/// Finite-difference Laplacian of `-log(1-|f|²)` at `z`: five-point stencils
/// with steps `h` and `h/2`, Richardson-extrapolated.
pub fn fd_potential_laplacian(f: &DiscMap, z: C64, h: f64) -> Result<f64> {
    let u = |w: C64| -> Result<f64> { log_defect_potential(f, &DiscPoint::new(w)?) };
    let center = u(z)?;
    let stencil = |h: f64| -> Result<f64> {
        let sum = u(z + h)? + u(z - h)? + u(z + C64::new(0.0, h))? + u(z - C64::new(0.0, h))?;
        Ok((sum - 4.0 * center) / (h * h))
    };
    let coarse = stencil(h)?;
    let fine = stencil(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn check_direction(xi: C64) -> Result<()> {
    if (xi.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain {
            what: "direction modulus",
            value: xi.norm(),
        });
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "radius",
            value: r,
        })
    }
}

/// Radius at which the radial integral switches from the `t = e^{-s}`
/// substitution to `t = 1 - e^{-w}`.
const SPLIT_RADIUS: f64 = 0.1;

/// `A²(f)(ξ, r)`.
pub fn a_squared_f(f: &DiscMap, xi: C64, r: f64) -> Result<f64> {
    check_direction(xi)?;
    check_radius(r)?;
    let gap = 1.0 - r;
    Ok(a_squared_f_ladder(f, xi, &[gap])?[0])
}

/// `A²(f)(ξ, 1-g)` for each gap `g` in `gaps` (strictly decreasing, in
/// `(0, 1)`), integrating once along the radius.
pub fn a_squared_f_ladder(f: &DiscMap, xi: C64, gaps: &[f64]) -> Result<Vec<f64>> {
    check_direction(xi)?;
    if gaps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("radius ladder must be increasing"));
    }
    for &g in gaps {
        check_radius(1.0 - g)?;
        if !(g > 0.0) {
            return Err(Error::Domain {
                what: "radius gap",
                value: g,
            });
        }
    }
    let tol = Tolerance {
        abs: 1e-14,
        rel: RADIAL_REL_TOL,
        max_segments: 4000,
    };
    let saturated = core::cell::Cell::new(false);
    let integrand = |p: DiscPoint, log_inv_t: f64| -> f64 {
        let s = f.sample(&p);
        if !(s.defect > 0.0) {
            saturated.set(true);
            return 0.0;
        }
        4.0 * log_inv_t * s.derivative.norm_sqr() / (s.defect * s.defect)
    };
    let mut out = Vec::with_capacity(gaps.len());
    let mut accumulated = 0.0;
    // inner piece: t in [0, min(r, 0.1)] via t = e^{-s}
    let first_r = 1.0 - gaps[0];
    let inner_end = first_r.min(SPLIT_RADIUS);
    let inner = integrate_to_infinity(
        |s| {
            let t = (-s).exp();
            let p = DiscPoint {
                z: xi * t,
                defect: (1.0 - t) * (1.0 + t),
            };
            integrand(p, s) * t
        },
        -inner_end.ln(),
        tol,
    )
    .map_err(|e| saturation_or(e, 0.0))?;
    accumulated += inner.value;
    // outer pieces: t = 1 - e^{-w}
    let mut w_lo = -(1.0 - inner_end).ln();
    for &g in gaps {
        let w_hi = -g.ln();
        if w_hi > w_lo {
            let piece = integrate(
                |w| {
                    let gap = (-w).exp();
                    integrand(DiscPoint::radial(xi, gap), -(-gap).ln_1p()) * gap
                },
                w_lo,
                w_hi,
                tol,
            )
            .map_err(|e| saturation_or(e, accumulated))?;
            accumulated += piece.value;
            w_lo = w_hi;
        }
        if saturated.get() {
            return Err(Error::Saturation { partial: accumulated });
        }
        out.push(accumulated);
    }
    Ok(out)
}

fn saturation_or(e: Error, partial: f64) -> Error {
    match e {
        Error::Quadrature { partial: p, .. } if !p.is_finite() => Error::Saturation { partial },
        other => other,
    }
}

/// `|d_h(f(rξ), 0) - A²(f)(ξ, r)| / sqrt(L log log log L)` with
/// `L = log(1/(1-r)) > e^e`.
pub fn disc_lil_ratio(f: &DiscMap, xi: C64, r: f64) -> Result<f64> {
    check_direction(xi)?;
    check_radius(r)?;
    let gap = 1.0 - r;
    let l = -gap.ln();
    if !(l > E_TO_E) {
        return Err(Error::LilRegime { quantity: l });
    }
    let numerator = disc_lil_numerator(f, xi, gap)?;
    Ok(numerator / (l * l.ln().ln().ln()).sqrt())
}

/// `|d_h(f((1-g)ξ), 0) - A²(f)(ξ, 1-g)|`.
pub fn disc_lil_numerator(f: &DiscMap, xi: C64, gap: f64) -> Result<f64> {
    let a2 = a_squared_f_ladder(f, xi, &[gap])?[0];
    let s = f.sample(&DiscPoint::radial(xi, gap));
    if !(s.defect > 0.0) {
        return Err(Error::Saturation { partial: a2 });
    }
    let image = DiscPoint {
        z: s.value,
        defect: s.defect,
    };
    Ok((distance_to_origin(&image) - a2).abs())
}

/// Infimum of `A²(f)(ξ, r)/log(1/(1-r))` over directions and radii.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    /// `(gap, inf over directions)` for each rung of the ladder.
    pub per_radius: Vec<(f64, f64)>,
    pub inf_ratio: f64,
    /// Same infimum on the ladder with midpoints (in `log(1/(1-r))`) added.
    pub refined_inf_ratio: f64,
    /// `inf_ratio > 0` and the refined infimum is within 10% of it.
    pub passes: bool,
}

/// Lower-bound check `A²(f)(ξ, r) ≥ c log(1/(1-r))` for a finite Blaschke
/// product over a ladder of gaps `1 - r` and a set of directions.
pub fn blaschke_lower_bound_check(f: &DiscMap, gaps: &[f64], directions: &[C64]) -> Result<LowerBoundReport> {
    if !f.is_finite_blaschke() {
        return Err(Error::Precondition("lower-bound check needs a finite Blaschke product"));
    }
    if gaps.is_empty() || directions.is_empty() {
        return Err(Error::Precondition("empty ladder or direction set"));
    }
    let mut refined: Vec<f64> = Vec::with_capacity(2 * gaps.len());
    for (i, &g) in gaps.iter().enumerate() {
        refined.push(g);
        if let Some(&next) = gaps.get(i + 1) {
            refined.push((g * next).sqrt());
        }
    }
    let mut per_radius: Vec<(f64, f64)> = gaps.iter().map(|&g| (g, f64::INFINITY)).collect();
    let mut refined_inf = f64::INFINITY;
    for &xi in directions {
        let values = a_squared_f_ladder(f, xi, &refined)?;
        for (k, (&g, a2)) in refined.iter().zip(values).enumerate() {
            let ratio = a2 / -g.ln();
            refined_inf = refined_inf.min(ratio);
            if k % 2 == 0 {
                let slot = &mut per_radius[k / 2];
                slot.1 = slot.1.min(ratio);
            }
        }
    }
    let inf_ratio = per_radius.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let passes = inf_ratio > 0.0 && (inf_ratio - refined_inf).abs() <= 0.1 * inf_ratio;
    Ok(LowerBoundReport {
        per_radius,
        inf_ratio,
        refined_inf_ratio: refined_inf,
        passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn distance_examples() {
        assert_eq!(hyperbolic_distance(c(0.3, -0.2), c(0.3, -0.2)).unwrap(), 0.0);
        assert_relative_eq!(
            hyperbolic_distance(c(0.0, 0.0), c(0.5, 0.0)).unwrap(),
            3f64.ln(),
            max_relative = 1e-14
        );
        assert!(hyperbolic_distance(c(1.0, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn hyperbolic_derivative_examples() {
        let id = DiscMap::identity();
        for z in [c(0.0, 0.0), c(0.5, 0.1), c(-0.9, 0.3)] {
            assert_relative_eq!(hyperbolic_derivative(&id, z).unwrap(), 1.0, max_relative = 1e-14);
        }
        let sq = DiscMap::monomial(2).unwrap();
        assert_relative_eq!(
            hyperbolic_derivative(&sq, c(0.5, 0.0)).unwrap(),
            0.8,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            hyperbolic_derivative(&sq, c(0.0, 0.5)).unwrap(),
            0.8,
            max_relative = 1e-14
        );
    }

    #[test]
    fn blaschke_derivative_matches_finite_difference() {
        let f = DiscMap::random_blaschke(6, 0.9, 3, 0).unwrap();
        let mut rng = keyed_stream(5, 0, 0);
        for _ in 0..200 {
            let z = C64::from_polar(0.95 * rng.uniform().sqrt(), 2.0 * PI * rng.uniform());
            let h = 1e-6;
            let fd = (f.value(z + h).unwrap() - f.value(z - h).unwrap()) / (2.0 * h);
            let d = f.derivative(z).unwrap();
            assert!((fd - d).norm() <= 1e-7 * d.norm().max(1.0), "{fd} vs {d}");
        }
    }

    #[test]
    fn product_rule_near_a_zero() {
        let a = c(0.3, 0.4);
        let f = DiscMap::blaschke(alloc::vec![a, c(-0.5, 0.0)], 0.7).unwrap();
        let z = a + c(1e-9, 0.0);
        let near = f.derivative(z).unwrap();
        let far = f.derivative(a + c(2e-6, 0.0)).unwrap();
        assert!((near - far).norm() < 1e-4 * far.norm());
        let unit = C64::from_polar(1.0, 0.7);
        let exact = unit * (1.0 - a.norm_sqr()) / (C64::new(1.0, 0.0) - a.conj() * a).powi(2)
            * ((a - c(-0.5, 0.0)) / (C64::new(1.0, 0.0) + 0.5 * a));
        assert!((f.derivative(a).unwrap() - exact).norm() < 1e-12);
    }

    #[test]
    fn defect_is_accurate_near_the_circle() {
        let f = DiscMap::blaschke(alloc::vec![c(0.2, 0.1), c(-0.4, 0.5)], 0.0).unwrap();
        let gap = 1e-13;
        let s = f.sample(&DiscPoint::radial(c(1.0, 0.0), gap));
        // 1 - |B|² ≈ |B'(1)| (1 - |z|²) near the circle; compare with the
        // product of factor defects computed in closed form
        let z = 1.0 - gap;
        let expect: f64 = [c(0.2, 0.1), c(-0.4, 0.5)]
            .iter()
            .map(|a| (1.0 - a.norm_sqr()) / (C64::new(1.0, 0.0) - a.conj() * z).norm_sqr())
            .sum::<f64>()
            * gap
            * 2.0;
        assert_relative_eq!(s.defect, expect, max_relative = 1e-6);
    }

    #[test]
    fn constant_map_has_zero_square_function() {
        let f = DiscMap::constant(c(0.0, 0.0)).unwrap();
        assert_eq!(a_squared_f(&f, c(1.0, 0.0), 0.9).unwrap(), 0.0);
        assert!(blaschke_lower_bound_check(&f, &[0.5], &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn identity_square_function_matches_riemann_sum() {
        let id = DiscMap::identity();
        let r = 0.9;
        let got = a_squared_f(&id, c(1.0, 0.0), r).unwrap();
        // oracle: midpoint rule in u with t = r (1 - (1-u)²), which removes
        // the log singularity at t = 0 (dt = 2 r (1-u) du)
        let n = 2_000_000;
        let h = 1.0 / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) * h;
            let t = r * (1.0 - (1.0 - u) * (1.0 - u));
            let jac = 2.0 * r * (1.0 - u);
            sum += 4.0 * (1.0 / t).ln() / (1.0 - t * t).powi(2) * jac;
        }
        let brute = sum * h;
        assert_relative_eq!(got, brute, max_relative = 1e-6);
    }

    #[test]
    fn identity_lil_numerator_stays_bounded() {
        let id = DiscMap::identity();
        let numerators: Vec<f64> = [16, 24, 32, 40]
            .iter()
            .map(|&k| disc_lil_numerator(&id, c(1.0, 0.0), 2f64.powi(-k)).unwrap())
            .collect();
        // the numerator converges: successive differences shrink
        let diffs: Vec<f64> = numerators.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(diffs.windows(2).all(|d| d[1] < d[0]), "{numerators:?}");
        assert!(diffs[2] < 1e-9, "{numerators:?}");
        let r1 = disc_lil_ratio(&id, c(1.0, 0.0), 1.0 - 2f64.powi(-24)).unwrap();
        let r2 = disc_lil_ratio(&id, c(1.0, 0.0), 1.0 - 2f64.powi(-48)).unwrap();
        assert!(r2 < r1);
        assert!(matches!(
            disc_lil_ratio(&id, c(1.0, 0.0), 1.0 - 2f64.powi(-12)),
            Err(Error::LilRegime { .. })
        ));
        let zero = DiscMap::constant(c(0.0, 0.0)).unwrap();
        assert_eq!(disc_lil_ratio(&zero, c(1.0, 0.0), 1.0 - 2f64.powi(-24)).unwrap(), 0.0);
    }

    #[test]
    fn identity_lower_bound_ratio() {
        let id = DiscMap::identity();
        let gaps: Vec<f64> = (1..=20).map(|k| 2f64.powi(-k)).collect();
        let report = blaschke_lower_bound_check(&id, &gaps, &[c(1.0, 0.0)]).unwrap();
        assert!(report.inf_ratio >= 0.5, "{report:?}");
        assert!(report.passes);
    }

    #[test]
    fn ladder_matches_single_evaluations() {
        let f = DiscMap::random_blaschke(4, 0.8, 1, 2).unwrap();
        let xi = C64::from_polar(1.0, 1.3);
        let gaps = [0.5, 0.1, 1e-3, 1e-6];
        let ladder = a_squared_f_ladder(&f, xi, &gaps).unwrap();
        for (g, v) in gaps.iter().zip(&ladder) {
            assert_relative_eq!(*v, a_squared_f(&f, xi, 1.0 - g).unwrap(), max_relative = 1e-8);
        }
    }

    fn random_point(rng: &mut crate::rng::Stream, max: f64) -> C64 {
        C64::from_polar(max * rng.uniform().sqrt(), 2.0 * PI * rng.uniform())
    }

    #[test]
    fn mobius_invariance_of_distance() {
        let mut rng = keyed_stream(11, 0, 0);
        for _ in 0..10_000 {
            let a = random_point(&mut rng, 0.95);
            let phi = DiscMap::automorphism(a, 2.0 * PI * rng.uniform()).unwrap();
            let z = random_point(&mut rng, 0.99);
            let w = random_point(&mut rng, 0.99);
            let before = hyperbolic_distance(z, w).unwrap();
            let pz = DiscPoint::new(z).unwrap();
            let pw = DiscPoint::new(w).unwrap();
            let (sz, sw) = (phi.sample(&pz), phi.sample(&pw));
            let after = hyperbolic_distance_points(
                &DiscPoint {
                    z: sz.value,
                    defect: sz.defect,
                },
                &DiscPoint {
                    z: sw.value,
                    defect: sw.defect,
                },
            );
            assert!((before - after).abs() <= 1e-10 * before.max(1.0), "{before} {after}");
        }
    }

    #[test]
    fn schwarz_pick_and_contraction() {
        let mut rng = keyed_stream(12, 0, 0);
        for index in 0..20 {
            let degree = 1 + (index % 8) as usize;
            let f = DiscMap::random_blaschke(degree, 0.95, 12, index).unwrap();
            for _ in 0..500 {
                let z = random_point(&mut rng, 0.999);
                let w = random_point(&mut rng, 0.999);
                assert!(hyperbolic_derivative(&f, z).unwrap() <= 1.0 + 1e-9);
                let (pz, pw) = (DiscPoint::new(z).unwrap(), DiscPoint::new(w).unwrap());
                let (sz, sw) = (f.sample(&pz), f.sample(&pw));
                let image = hyperbolic_distance_points(
                    &DiscPoint {
                        z: sz.value,
                        defect: sz.defect,
                    },
                    &DiscPoint {
                        z: sw.value,
                        defect: sw.defect,
                    },
                );
                assert!(image <= hyperbolic_distance_points(&pz, &pw) + 1e-9);
                assert!(bridge_gap(&f, &pz).unwrap() <= 2.0 * 2f64.ln() + 1e-9);
            }
        }
    }

    #[test]
    fn laplacian_identity() {
        let mut rng = keyed_stream(13, 0, 0);
        let f = DiscMap::random_blaschke(5, 0.9, 13, 0).unwrap();
        for _ in 0..200 {
            let z = random_point(&mut rng, 0.95);
            let p = DiscPoint::new(z).unwrap();
            let exact = potential_laplacian(&f, &p).unwrap();
            let h = 0.02 * (1.0 - z.norm());
            let fd = fd_potential_laplacian(&f, z, h).unwrap();
            assert!((fd - exact).abs() <= 1e-4 * exact, "{fd} {exact}");
        }
    }

    #[test]
    fn square_function_upper_bound_with_fitted_slack() {
        let f = DiscMap::random_blaschke(3, 0.7, 14, 0).unwrap();
        let gaps: Vec<f64> = (2..=30).step_by(2).map(|k| 2f64.powi(-k)).collect();
        let slack = |xi: C64| -> f64 {
            a_squared_f_ladder(&f, xi, &gaps)
                .unwrap()
                .iter()
                .zip(&gaps)
                .map(|(a, g)| a + g.ln())
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let mut rng = keyed_stream(14, 1, 0);
        let calibration = (0..16)
            .map(|_| slack(C64::from_polar(1.0, 2.0 * PI * rng.uniform())))
            .fold(f64::NEG_INFINITY, f64::max);
        let c_fit = 2.0 * calibration.abs().max(1.0);
        for _ in 0..16 {
            assert!(slack(C64::from_polar(1.0, 2.0 * PI * rng.uniform())) <= c_fit);
        }
    }

    #[test]
    fn four_zero_product_lower_bound_is_positive() {
        let h = 0.5;
        let f = DiscMap::blaschke(alloc::vec![c(h, 0.0), c(-h, 0.0), c(0.0, h), c(0.0, -h)], 0.0).unwrap();
        let dirs: Vec<C64> = (0..128)
            .map(|k| C64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / 128.0))
            .collect();
        let report = blaschke_lower_bound_check(&f, &[2f64.powi(-10)], &dirs).unwrap();
        assert!(report.inf_ratio > 0.0);
    }
}
