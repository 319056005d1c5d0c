//! Scalar fields on the upper half-space `R^(d+1)_+` (`d ∈ {1, 2}`), the
//! transform `T = u - y ∂u/∂y - ∫_y^1 h Δu(x,h) dh`, block identities and
//! bound checks, membership in the gauge classes, and the vertical LIL ratio.
//!
//! Points are passed as slices of length `d`; heights are positive. Every
//! supplier returns a `Result` because some sources (Poisson extensions,
//! pulled-back disc maps) have resolution or saturation limits.

use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::disc::{DiscMap, DiscPoint, C64};
use crate::error::{Error, Result};
use crate::gauges::{lil_normalizer, GaugeFunction};
use crate::quadrature::{integrate, Estimate, GaussLegendre, Tolerance};

/// Absolute tolerance of the vertical integral inside `T`.
pub const TRANSFORM_ABS_TOL: f64 = 1e-8;
/// Tighter absolute tolerance used when `T` increments feed block identities.
pub const INCREMENT_ABS_TOL: f64 = 1e-11;
/// Gauss–Legendre nodes per axis and panel for cube and face averages.
pub const GL_NODES: usize = 64;
/// Two successive panel doublings must agree to this relative tolerance.
pub const AVERAGE_REL_TOL: f64 = 1e-8;
/// Default finite-difference step scale (`h = scale · y`).
pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Second and third derivatives use fourth-order stencils with this multiple
/// of the base step.
const WIDE_STEP_FACTOR: f64 = 100.0;
/// Slack allowed by the membership test.
pub const MEMBERSHIP_SLACK: f64 = 1e-6;
/// Frequencies `2^k` with `2^k y_min` at least this are dropped from a unit
/// lacunary series.
pub const LACUNARY_CUTOFF: f64 = 40.0;

/// `(∂u/∂x₁, ∂u/∂x₂, ∂u/∂y)`; for `d = 1` the second spatial slot is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Gradient {
    pub spatial: [f64; 2],
    pub vertical: f64,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        (self.spatial[0] * self.spatial[0] + self.spatial[1] * self.spatial[1] + self.vertical * self.vertical).sqrt()
    }

    fn component(&self, i: usize) -> f64 {
        if i < 2 {
            self.spatial[i]
        } else {
            self.vertical
        }
    }
}

/// Value, gradient and Hessian of a positive harmonic function. Hessian
/// indices are `(x₁, x₂, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicJet {
    pub value: f64,
    pub gradient: Gradient,
    pub hessian: [[f64; 3]; 3],
}

/// Positive harmonic function on the half-space, the source of a `log v`
/// field.
pub trait PositiveHarmonic: core::fmt::Debug + Send + Sync {
    fn dimension(&self) -> usize;
    fn jet(&self, x: [f64; 2], y: f64) -> Result<HarmonicJet>;
}

/// The harmonic function `v(x, y) = y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightHarmonic {
    pub dimension: usize,
}

impl PositiveHarmonic for HeightHarmonic {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn jet(&self, _x: [f64; 2], y: f64) -> Result<HarmonicJet> {
        Ok(HarmonicJet {
            value: y,
            gradient: Gradient {
                spatial: [0.0; 2],
                vertical: 1.0,
            },
            hessian: [[0.0; 3]; 3],
        })
    }
}

#[derive(Debug, Clone)]
pub enum FieldKind {
    /// `u = log(1/y)`.
    VerticalLog,
    /// `u = (c + log(1/y))^α`.
    VerticalLogPower { alpha: f64, shift: f64 },
    /// `u = x₁`.
    HarmonicLinear,
    /// `u = y`.
    HarmonicHeight,
    /// `u = Σ aₖ e^(-2^k y) cos(2^k x)` (`d = 1`). `omitted_bound` bounds
    /// `|aₖ|` for the dropped terms `k ≥ len`, zero for a finite series.
    LacunaryHarmonic { coefficients: Vec<f64>, omitted_bound: f64 },
    /// `u = log v`.
    PoissonLog(Arc<dyn PositiveHarmonic>),
    /// `u = -log(1 - |f(C(w))|²)` with the Cayley map `C(w) = (w-i)/(w+i)`,
    /// `w = x + iy` (`d = 1`).
    DiscPull(DiscMap),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    ClosedForm,
    /// Every derivative from central differences of the value, base step
    /// `step_scale · y`.
    FiniteDifference {
        step_scale: f64,
    },
}

/// Axis-aligned cube `corner + [0, side]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cube {
    pub corner: [f64; 2],
    pub side: f64,
}

impl Cube {
    pub fn new(corner: [f64; 2], side: f64) -> Result<Self> {
        if !(side > 0.0 && side <= 1.0) {
            return Err(Error::Domain {
                what: "cube side",
                value: side,
            });
        }
        Ok(Cube { corner, side })
    }

    pub fn center(&self) -> [f64; 2] {
        [self.corner[0] + 0.5 * self.side, self.corner[1] + 0.5 * self.side]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, &v)| v >= self.corner[i] && v <= self.corner[i] + self.side)
    }
}

/// Block `Q × [s, t]` with `0 < s ≤ t ≤ l(Q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRegion {
    pub cube: Cube,
    pub s: f64,
    pub t: f64,
}

impl BlockRegion {
    pub fn new(cube: Cube, s: f64, t: f64) -> Result<Self> {
        if !(s > 0.0 && s <= t && t <= cube.side) {
            return Err(Error::Precondition("block heights must satisfy 0 < s <= t <= l"));
        }
        Ok(BlockRegion { cube, s, t })
    }
}

/// Outcome of an inequality check `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        BoundCheck {
            lhs,
            rhs,
            holds: lhs <= rhs,
        }
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Block identity terms: `avg_Q T(·,t) - avg_Q T(·,s)` against the lateral
/// flux `(1/|Q|) Σ ∫ y ∂u/∂n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenResidual {
    pub residual: f64,
    pub increment: f64,
    pub flux: f64,
    pub error_estimate: f64,
}

/// Sampling grid for membership tests: `points_per_axis` points per spatial
/// axis in `[lo, hi]`, heights `2^(-j/heights_per_octave)` from 1 down to
/// `y_min` (inclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipGrid {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub points_per_axis: usize,
    pub y_min: f64,
    pub heights_per_octave: usize,
}

impl MembershipGrid {
    pub fn heights(&self) -> Vec<f64> {
        let m = self.heights_per_octave.max(1) as f64;
        let mut out = Vec::new();
        let mut j = 0;
        loop {
            let y = (-(j as f64) / m).exp2();
            if y <= self.y_min {
                out.push(self.y_min);
                break;
            }
            out.push(y);
            j += 1;
        }
        out
    }

    pub fn points(&self, d: usize) -> Vec<[f64; 2]> {
        let n = self.points_per_axis.max(1);
        let coord = |i: usize, axis: usize| {
            if n == 1 {
                0.5 * (self.lo[axis] + self.hi[axis])
            } else {
                self.lo[axis] + (self.hi[axis] - self.lo[axis]) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::new();
        if d == 1 {
            for i in 0..n {
                out.push([coord(i, 0), 0.0]);
            }
        } else {
            for i in 0..n {
                for j in 0..n {
                    out.push([coord(i, 0), coord(j, 1)]);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipReport {
    /// `sup y|∇u| / ψ(y)`.
    pub gradient_sup: f64,
    pub gradient_worst: ([f64; 2], f64),
    /// `sup y³|∇Δu| / ε(y)`.
    pub laplacian_gradient_sup: f64,
    pub laplacian_gradient_worst: ([f64; 2], f64),
    pub probes: usize,
}

impl MembershipReport {
    pub fn belongs_psi(&self) -> bool {
        self.gradient_sup <= 1.0 + MEMBERSHIP_SLACK
    }

    pub fn belongs(&self) -> bool {
        self.belongs_psi() && self.laplacian_gradient_sup <= 1.0 + MEMBERSHIP_SLACK
    }
}

/// A scalar field with its derivative suppliers.
#[derive(Debug, Clone)]
pub struct ScalarField {
    kind: FieldKind,
    dimension: usize,
    mode: DerivativeMode,
    rule: GaussLegendre,
}

fn check_dimension(d: usize) -> Result<()> {
    if d == 1 || d == 2 {
        Ok(())
    } else {
        Err(Error::Precondition("dimension must be 1 or 2"))
    }
}

impl ScalarField {
    fn build(kind: FieldKind, dimension: usize) -> Result<Self> {
        check_dimension(dimension)?;
        Ok(ScalarField {
            kind,
            dimension,
            mode: DerivativeMode::ClosedForm,
            rule: GaussLegendre::new(GL_NODES),
        })
    }

    pub fn vertical_log(d: usize) -> Result<Self> {
        Self::build(FieldKind::VerticalLog, d)
    }

    pub fn vertical_log_power(d: usize, alpha: f64, shift: f64) -> Result<Self> {
        if !(shift > 0.0 && shift.is_finite()) {
            return Err(Error::Domain {
                what: "log-power shift",
                value: shift,
            });
        }
        if !alpha.is_finite() {
            return Err(Error::Domain {
                what: "log-power exponent",
                value: alpha,
            });
        }
        Self::build(FieldKind::VerticalLogPower { alpha, shift }, d)
    }

    pub fn harmonic_linear(d: usize) -> Result<Self> {
        Self::build(FieldKind::HarmonicLinear, d)
    }

    pub fn harmonic_height(d: usize) -> Result<Self> {
        Self::build(FieldKind::HarmonicHeight, d)
    }

    /// Finite lacunary series with the given coefficients.
    pub fn lacunary(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.len() > 60 {
            return Err(Error::Precondition("lacunary series needs 1 to 60 coefficients"));
        }
        Self::build(
            FieldKind::LacunaryHarmonic {
                coefficients,
                omitted_bound: 0.0,
            },
            1,
        )
    }

    /// Unit-coefficient lacunary series truncated at the first `K` with
    /// `2^K y_min ≥ 40`; see [`ScalarField::series_tail_bound`].
    pub fn lacunary_unit(y_min: f64) -> Result<Self> {
        if !(y_min > 0.0 && y_min <= 1.0) {
            return Err(Error::Domain {
                what: "lacunary y_min",
                value: y_min,
            });
        }
        let k = (LACUNARY_CUTOFF / y_min).log2().ceil().max(1.0) as usize;
        if k > 60 {
            return Err(Error::Config("lacunary truncation needs more than 60 terms"));
        }
        Self::build(
            FieldKind::LacunaryHarmonic {
                coefficients: alloc::vec![1.0; k],
                omitted_bound: 1.0,
            },
            1,
        )
    }

    pub fn poisson_log(source: Arc<dyn PositiveHarmonic>) -> Result<Self> {
        let d = source.dimension();
        Self::build(FieldKind::PoissonLog(source), d)
    }

    pub fn disc_pull(f: DiscMap) -> Result<Self> {
        Self::build(FieldKind::DiscPull(f), 1)
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Result<Self> {
        if let DerivativeMode::FiniteDifference { step_scale } = mode {
            if !(step_scale > 0.0 && step_scale <= 1e-2) {
                return Err(Error::Domain {
                    what: "finite-difference step scale",
                    value: step_scale,
                });
            }
        }
        self.mode = mode;
        Ok(self)
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    /// `Δu ≡ 0`.
    pub fn is_harmonic(&self) -> bool {
        matches!(
            self.kind,
            FieldKind::HarmonicLinear | FieldKind::HarmonicHeight | FieldKind::LacunaryHarmonic { .. }
        )
    }

    /// `u` depends on `y` only.
    pub fn is_x_independent(&self) -> bool {
        matches!(
            self.kind,
            FieldKind::VerticalLog | FieldKind::VerticalLogPower { .. } | FieldKind::HarmonicHeight
        )
    }

    /// Bound on `|u_tail| + y|∇u_tail|` for the terms dropped from a unit
    /// lacunary series, valid at heights `≥ y`; zero for exact fields.
    pub fn series_tail_bound(&self, y: f64) -> f64 {
        match &self.kind {
            FieldKind::LacunaryHarmonic {
                coefficients,
                omitted_bound,
            } if *omitted_bound > 0.0 => {
                // Σ_{j≥0} (1 + 2^{K+j} y) e^{-2^{K+j} y}, dominated by a
                // geometric series once 2^K y > 2
                let w = (coefficients.len() as f64).exp2() * y;
                if w <= 2.0 {
                    return f64::INFINITY;
                }
                omitted_bound * 2.0 * (1.0 + w) * (-w).exp() / (1.0 - (-w).exp())
            }
            _ => 0.0,
        }
    }

    fn point(&self, x: &[f64], y: f64) -> Result<[f64; 2]> {
        if x.len() != self.dimension {
            return Err(Error::Precondition("point dimension does not match field"));
        }
        if let Some(&bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                what: "coordinate",
                value: bad,
            });
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Domain {
                what: "height",
                value: y,
            });
        }
        let mut p = [0.0; 2];
        p[..x.len()].copy_from_slice(x);
        Ok(p)
    }

    pub fn value(&self, x: &[f64], y: f64) -> Result<f64> {
        let p = self.point(x, y)?;
        self.value_at(p, y)
    }

    pub fn gradient(&self, x: &[f64], y: f64) -> Result<Gradient> {
        let p = self.point(x, y)?;
        self.gradient_at(p, y)
    }

    pub fn laplacian(&self, x: &[f64], y: f64) -> Result<f64> {
        let p = self.point(x, y)?;
        self.laplacian_at(p, y)
    }

    pub fn laplacian_gradient(&self, x: &[f64], y: f64) -> Result<Gradient> {
        let p = self.point(x, y)?;
        self.laplacian_gradient_at(p, y)
    }

    fn value_at(&self, p: [f64; 2], y: f64) -> Result<f64> {
        match &self.kind {
            FieldKind::VerticalLog => Ok(-y.ln()),
            FieldKind::VerticalLogPower { alpha, shift } => Ok((shift - y.ln()).powf(*alpha)),
            FieldKind::HarmonicLinear => Ok(p[0]),
            FieldKind::HarmonicHeight => Ok(y),
            FieldKind::LacunaryHarmonic { coefficients, .. } => Ok(coefficients
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let w = (k as f64).exp2();
                    a * (-w * y).exp() * (w * p[0]).cos()
                })
                .sum()),
            FieldKind::PoissonLog(v) => Ok(v.jet(p, y)?.value.ln()),
            FieldKind::DiscPull(f) => {
                let s = f.sample(&cayley(p[0], y));
                if !(s.defect > 0.0) {
                    return Err(Error::Saturation { partial: f64::NAN });
                }
                Ok(-s.defect.ln())
            }
        }
    }

    fn gradient_at(&self, p: [f64; 2], y: f64) -> Result<Gradient> {
        match self.mode {
            DerivativeMode::ClosedForm => self.closed_gradient(p, y),
            DerivativeMode::FiniteDifference { step_scale } => self.fd_gradient(p, y, step_scale),
        }
    }

    fn laplacian_at(&self, p: [f64; 2], y: f64) -> Result<f64> {
        match self.mode {
            DerivativeMode::ClosedForm => self.closed_laplacian(p, y),
            DerivativeMode::FiniteDifference { step_scale } => self.fd_laplacian(p, y, step_scale),
        }
    }

    fn laplacian_gradient_at(&self, p: [f64; 2], y: f64) -> Result<Gradient> {
        match self.mode {
            DerivativeMode::ClosedForm => match self.closed_laplacian_gradient(p, y) {
                Some(g) => g,
                None => self.fd_laplacian_gradient(p, y, DEFAULT_FD_STEP),
            },
            DerivativeMode::FiniteDifference { step_scale } => self.fd_laplacian_gradient(p, y, step_scale),
        }
    }

    fn closed_gradient(&self, p: [f64; 2], y: f64) -> Result<Gradient> {
        let vertical = |v: f64| Gradient {
            spatial: [0.0; 2],
            vertical: v,
        };
        match &self.kind {
            FieldKind::VerticalLog => Ok(vertical(-1.0 / y)),
            FieldKind::VerticalLogPower { alpha, shift } => {
                let g = shift - y.ln();
                Ok(vertical(-alpha * g.powf(alpha - 1.0) / y))
            }
            FieldKind::HarmonicLinear => Ok(Gradient {
                spatial: [1.0, 0.0],
                vertical: 0.0,
            }),
            FieldKind::HarmonicHeight => Ok(vertical(1.0)),
            FieldKind::LacunaryHarmonic { coefficients, .. } => {
                let mut gx = 0.0;
                let mut gy = 0.0;
                for (k, a) in coefficients.iter().enumerate() {
                    let w = (k as f64).exp2();
                    let amp = a * w * (-w * y).exp();
                    let (s, c) = (w * p[0]).sin_cos();
                    gx -= amp * s;
                    gy -= amp * c;
                }
                Ok(Gradient {
                    spatial: [gx, 0.0],
                    vertical: gy,
                })
            }
            FieldKind::PoissonLog(v) => {
                let j = v.jet(p, y)?;
                Ok(Gradient {
                    spatial: [j.gradient.spatial[0] / j.value, j.gradient.spatial[1] / j.value],
                    vertical: j.gradient.vertical / j.value,
                })
            }
            FieldKind::DiscPull(f) => {
                let (s, dfdw) = disc_pull_sample(f, p[0], y)?;
                let q = s.value.conj() * dfdw;
                Ok(Gradient {
                    spatial: [2.0 * q.re / s.defect, 0.0],
                    vertical: -2.0 * q.im / s.defect,
                })
            }
        }
    }

    fn closed_laplacian(&self, p: [f64; 2], y: f64) -> Result<f64> {
        match &self.kind {
            FieldKind::VerticalLog => Ok(1.0 / (y * y)),
            FieldKind::VerticalLogPower { alpha, shift } => {
                let g = shift - y.ln();
                Ok(log_power_h(*alpha, g) / (y * y))
            }
            FieldKind::HarmonicLinear | FieldKind::HarmonicHeight | FieldKind::LacunaryHarmonic { .. } => Ok(0.0),
            FieldKind::PoissonLog(v) => {
                let j = v.jet(p, y)?;
                let g = j.gradient.norm() / j.value;
                Ok(-g * g)
            }
            FieldKind::DiscPull(f) => {
                let (s, dfdw) = disc_pull_sample(f, p[0], y)?;
                Ok(4.0 * dfdw.norm_sqr() / (s.defect * s.defect))
            }
        }
    }

    fn closed_laplacian_gradient(&self, p: [f64; 2], y: f64) -> Option<Result<Gradient>> {
        let vertical = |v: f64| Gradient {
            spatial: [0.0; 2],
            vertical: v,
        };
        match &self.kind {
            FieldKind::VerticalLog => Some(Ok(vertical(-2.0 / (y * y * y)))),
            FieldKind::VerticalLogPower { alpha, shift } => {
                let g = shift - y.ln();
                let a = *alpha;
                let h = log_power_h(a, g);
                let dh = a * (a - 1.0) * (a - 2.0) * g.powf(a - 3.0) + a * (a - 1.0) * g.powf(a - 2.0);
                Some(Ok(vertical(-(dh + 2.0 * h) / (y * y * y))))
            }
            FieldKind::HarmonicLinear | FieldKind::HarmonicHeight | FieldKind::LacunaryHarmonic { .. } => {
                Some(Ok(Gradient::default()))
            }
            FieldKind::PoissonLog(v) => Some(v.jet(p, y).map(|j| {
                // ∂ᵢ(-|∇v|²/v²) = -2 Σⱼ vⱼ vᵢⱼ / v² + 2 |∇v|² vᵢ / v³
                let v0 = j.value;
                let g2 = j.gradient.norm().powi(2);
                let mut out = [0.0; 3];
                for (i, slot) in out.iter_mut().enumerate() {
                    let mixed: f64 = (0..3).map(|k| j.gradient.component(k) * j.hessian[i][k]).sum();
                    *slot = -2.0 * mixed / (v0 * v0) + 2.0 * g2 * j.gradient.component(i) / (v0 * v0 * v0);
                }
                Gradient {
                    spatial: [out[0], out[1]],
                    vertical: out[2],
                }
            })),
            FieldKind::DiscPull(_) => None,
        }
    }

    fn shifted(&self, p: [f64; 2], y: f64, axis: usize, h: f64) -> ([f64; 2], f64) {
        let mut q = p;
        if axis < self.dimension {
            q[axis] += h;
            (q, y)
        } else {
            (q, y + h)
        }
    }

    fn axes(&self) -> impl Iterator<Item = usize> {
        // spatial axes, then the vertical axis (index 2)
        (0..self.dimension).chain(core::iter::once(2))
    }

    fn fd_gradient(&self, p: [f64; 2], y: f64, scale: f64) -> Result<Gradient> {
        let h = scale * y;
        let mut out = [0.0; 3];
        for axis in self.axes() {
            let (qp, yp) = self.shifted(p, y, axis, h);
            let (qm, ym) = self.shifted(p, y, axis, -h);
            out[axis] = (self.value_at(qp, yp)? - self.value_at(qm, ym)?) / (2.0 * h);
        }
        Ok(Gradient {
            spatial: [out[0], out[1]],
            vertical: out[2],
        })
    }

    fn fd_laplacian(&self, p: [f64; 2], y: f64, scale: f64) -> Result<f64> {
        let h = WIDE_STEP_FACTOR * scale * y;
        let center = self.value_at(p, y)?;
        let mut total = 0.0;
        for axis in self.axes() {
            let mut f = [0.0; 4];
            for (slot, k) in f.iter_mut().zip([-2.0, -1.0, 1.0, 2.0]) {
                let (q, yy) = self.shifted(p, y, axis, k * h);
                *slot = self.value_at(q, yy)?;
            }
            total += (-f[0] + 16.0 * f[1] - 30.0 * center + 16.0 * f[2] - f[3]) / (12.0 * h * h);
        }
        Ok(total)
    }

    fn fd_laplacian_gradient(&self, p: [f64; 2], y: f64, scale: f64) -> Result<Gradient> {
        let h = WIDE_STEP_FACTOR * scale * y;
        let mut out = [0.0; 3];
        for axis in self.axes() {
            let mut f = [0.0; 4];
            for (slot, k) in f.iter_mut().zip([-2.0, -1.0, 1.0, 2.0]) {
                let (q, yy) = self.shifted(p, y, axis, k * h);
                *slot = self.laplacian_at(q, yy)?;
            }
            out[axis] = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h);
        }
        Ok(Gradient {
            spatial: [out[0], out[1]],
            vertical: out[2],
        })
    }

    /// `∫_s^t h Δu(x, h) dh` for `0 < s ≤ t`.
    fn laplacian_moment(&self, p: [f64; 2], s: f64, t: f64, abs_tol: f64) -> Result<f64> {
        if self.mode == DerivativeMode::ClosedForm {
            match &self.kind {
                FieldKind::VerticalLog => return Ok((t / s).ln()),
                FieldKind::VerticalLogPower { alpha, shift } => {
                    let anti = |g: f64| alpha * g.powf(alpha - 1.0) + g.powf(*alpha);
                    return Ok(anti(shift - s.ln()) - anti(shift - t.ln()));
                }
                _ if self.is_harmonic() => return Ok(0.0),
                _ => {}
            }
        }
        if s == t {
            return Ok(0.0);
        }
        // h = e^{-σ}: ∫ e^{-2σ} Δu(x, e^{-σ}) dσ over σ ∈ [log(1/t), log(1/s)]
        let mut failure = None;
        let est = integrate(
            |sigma| {
                let h = (-sigma).exp();
                match self.laplacian_at(p, h) {
                    Ok(v) => h * h * v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            -t.ln(),
            -s.ln(),
            Tolerance {
                abs: abs_tol,
                rel: 1e-12,
                max_segments: 2000,
            },
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(est.value)
    }

    /// `∫_y^1 h Δu(x, h) dh`.
    pub fn vertical_laplacian_integral(&self, x: &[f64], y: f64) -> Result<f64> {
        let p = self.point(x, y)?;
        check_unit_height(y)?;
        self.laplacian_moment(p, y, 1.0, TRANSFORM_ABS_TOL)
    }

    /// `T(x, y) = u - y ∂u/∂y - ∫_y^1 h Δu(x, h) dh`.
    pub fn transform_t(&self, x: &[f64], y: f64) -> Result<f64> {
        let p = self.point(x, y)?;
        check_unit_height(y)?;
        self.transform_at(p, y, TRANSFORM_ABS_TOL)
    }

    fn transform_at(&self, p: [f64; 2], y: f64, abs_tol: f64) -> Result<f64> {
        let local = self.value_at(p, y)? - y * self.gradient_at(p, y)?.vertical;
        Ok(local - self.laplacian_moment(p, y, 1.0, abs_tol)?)
    }

    /// `T(x, t) - T(x, s)` without evaluating the vertical integral above `t`.
    pub fn transform_t_increment(&self, x: &[f64], s: f64, t: f64) -> Result<f64> {
        let p = self.point(x, s)?;
        if !(s <= t) {
            return Err(Error::Precondition("increment needs s <= t"));
        }
        self.increment_at(p, s, t)
    }

    fn increment_at(&self, p: [f64; 2], s: f64, t: f64) -> Result<f64> {
        let local = |y: f64| -> Result<f64> { Ok(self.value_at(p, y)? - y * self.gradient_at(p, y)?.vertical) };
        Ok(local(t)? - local(s)? + self.laplacian_moment(p, s, t, INCREMENT_ABS_TOL)?)
    }

    /// `avg_Q T(·, y)`.
    pub fn transform_t_cube_average(&self, cube: &Cube, y: f64) -> Result<Estimate> {
        check_unit_height(y)?;
        if let Some(v) = self.closed_cube_average(cube, y) {
            return Ok(Estimate::exact(v));
        }
        self.cube_mean(cube, |p| self.transform_at(p, y, TRANSFORM_ABS_TOL))
    }

    /// `avg_Q (T(·, t) - T(·, s))`.
    pub fn transform_t_increment_cube_average(&self, cube: &Cube, s: f64, t: f64) -> Result<Estimate> {
        if !(s > 0.0 && s <= t) {
            return Err(Error::Precondition("increment needs 0 < s <= t"));
        }
        if let (Some(a), Some(b)) = (self.closed_cube_average(cube, t), self.closed_cube_average(cube, s)) {
            return Ok(Estimate::exact(a - b));
        }
        self.cube_mean(cube, |p| self.increment_at(p, s, t))
    }

    /// Closed-form `avg_Q T(·, y)` where available (closed-form mode only).
    fn closed_cube_average(&self, cube: &Cube, y: f64) -> Option<f64> {
        if self.mode != DerivativeMode::ClosedForm {
            return None;
        }
        match &self.kind {
            FieldKind::VerticalLog | FieldKind::VerticalLogPower { .. } | FieldKind::HarmonicHeight => {
                self.transform_at(cube.corner, y, TRANSFORM_ABS_TOL).ok()
            }
            FieldKind::HarmonicLinear => Some(cube.center()[0]),
            FieldKind::LacunaryHarmonic { coefficients, .. } => {
                // T of one term: a e^{-ωy}(1 + ωy) cos(ωx); its mean over
                // [m - l/2, m + l/2] is that at m times sin(ωl/2)/(ωl/2)
                let m = cube.center()[0];
                Some(
                    coefficients
                        .iter()
                        .enumerate()
                        .map(|(k, a)| {
                            let w = (k as f64).exp2();
                            let half = 0.5 * w * cube.side;
                            let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
                            a * (-w * y).exp() * (1.0 + w * y) * (w * m).cos() * sinc
                        })
                        .sum(),
                )
            }
            _ => None,
        }
    }

    /// Mean of `f` over `Q` by tensor Gauss–Legendre with doubling panels.
    pub fn cube_mean<F: FnMut([f64; 2]) -> Result<f64>>(&self, cube: &Cube, mut f: F) -> Result<Estimate> {
        let lo = [cube.corner[0], cube.corner[1]];
        let hi = [cube.corner[0] + cube.side, cube.corner[1] + cube.side];
        box_mean(&self.rule, self.dimension, lo, hi, |q| f([q[0], q[1]]))
    }

    /// Residual of the block identity
    /// `avg_Q T(·,t) - avg_Q T(·,s) = (1/|Q|) Σⱼ ∫_{Lⱼ} y ∂u/∂n`.
    pub fn green_identity_residual(&self, block: &BlockRegion) -> Result<GreenResidual> {
        let inc = self.transform_t_increment_cube_average(&block.cube, block.s, block.t)?;
        let flux = self.lateral_flux(block)?;
        Ok(GreenResidual {
            residual: (inc.value - flux.value).abs(),
            increment: inc.value,
            flux: flux.value,
            error_estimate: inc.error + flux.error,
        })
    }

    fn lateral_flux(&self, block: &BlockRegion) -> Result<Estimate> {
        let Cube { corner, side } = block.cube;
        let (s, t) = (block.s, block.t);
        if s == t {
            return Ok(Estimate::exact(0.0));
        }
        let scale = (t - s) / side;
        let mut total = Estimate::exact(0.0);
        for axis in 0..self.dimension {
            let other = 1 - axis;
            let face = |q: [f64; 3]| -> Result<f64> {
                // q = (other coordinate, unused, y)
                let mut lo_pt = [0.0; 2];
                lo_pt[axis] = corner[axis];
                lo_pt[other] = q[0];
                let mut hi_pt = lo_pt;
                hi_pt[axis] = corner[axis] + side;
                let y = q[2];
                let out = self.gradient_at(hi_pt, y)?.spatial[axis];
                let inn = self.gradient_at(lo_pt, y)?.spatial[axis];
                Ok(y * (out - inn))
            };
            let est = if self.dimension == 1 {
                box_mean(&self.rule, 1, [s, 0.0], [t, 0.0], |q| face([0.0, 0.0, q[0]]))?
            } else {
                box_mean(&self.rule, 2, [corner[other], s], [corner[other] + side, t], |q| {
                    face([q[0], 0.0, q[1]])
                })?
            };
            total.value += scale * est.value;
            total.error += scale * est.error;
        }
        Ok(total)
    }

    /// `|avg_Q(T(·,t) - T(·,s))| ≤ (2d/l) ∫_s^t ψ`.
    pub fn vertical_variation_bound_check(&self, psi: &GaugeFunction, block: &BlockRegion) -> Result<BoundCheck> {
        let inc = self.transform_t_increment_cube_average(&block.cube, block.s, block.t)?;
        let integral = psi.integral_from_zero(block.t)? - psi.integral_from_zero(block.s)?;
        let rhs = 2.0 * self.dimension as f64 / block.cube.side * integral;
        Ok(BoundCheck::new(inc.value.abs(), rhs))
    }

    /// `|avg_Q(T(·,t) - T(·,s))| ≤ 2dA ψ(l)`.
    pub fn cube_oscillation_bound_check(
        &self,
        psi: &GaugeFunction,
        averaging_constant: f64,
        block: &BlockRegion,
    ) -> Result<BoundCheck> {
        let inc = self.transform_t_increment_cube_average(&block.cube, block.s, block.t)?;
        let rhs = 2.0 * self.dimension as f64 * averaging_constant * psi.eval(block.cube.side)?;
        Ok(BoundCheck::new(inc.value.abs(), rhs))
    }

    /// `|T(z,y) - T(x,y)| ≤ 2(|z-x|/y + 1) ψ(y)`.
    pub fn horizontal_oscillation_check(
        &self,
        psi: &GaugeFunction,
        x: &[f64],
        z: &[f64],
        y: f64,
    ) -> Result<BoundCheck> {
        let dist = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let lhs = if dist == 0.0 {
            0.0
        } else {
            (self.transform_t(z, y)? - self.transform_t(x, y)?).abs()
        };
        Ok(BoundCheck::new(lhs, 2.0 * (dist / y + 1.0) * psi.eval(y)?))
    }

    /// Sups of `y|∇u|/ψ(y)` and `y³|∇Δu|/ε(y)` over a grid.
    pub fn membership_check(
        &self,
        psi: &GaugeFunction,
        eps: &GaugeFunction,
        grid: &MembershipGrid,
    ) -> Result<MembershipReport> {
        let mut report = MembershipReport {
            gradient_sup: 0.0,
            gradient_worst: ([0.0; 2], 1.0),
            laplacian_gradient_sup: 0.0,
            laplacian_gradient_worst: ([0.0; 2], 1.0),
            probes: 0,
        };
        let points = grid.points(self.dimension);
        for y in grid.heights() {
            let (ps, es) = (psi.eval(y)?, eps.eval(y)?);
            for &p in &points {
                let g = y * self.gradient_at(p, y)?.norm() / ps;
                if g > report.gradient_sup || g.is_nan() {
                    report.gradient_sup = if g.is_nan() { f64::INFINITY } else { g };
                    report.gradient_worst = (p, y);
                }
                let e = y * y * y * self.laplacian_gradient_at(p, y)?.norm() / es;
                if e > report.laplacian_gradient_sup || e.is_nan() {
                    report.laplacian_gradient_sup = if e.is_nan() { f64::INFINITY } else { e };
                    report.laplacian_gradient_worst = (p, y);
                }
                report.probes += 1;
            }
        }
        Ok(report)
    }

    /// `|u(x,y) - ∫_y^1 t Δu(x,t) dt| / sqrt(Ψ(y) log log Ψ(y))`.
    pub fn lil_ratio(&self, psi: &GaugeFunction, x: &[f64], y: f64) -> Result<f64> {
        let denominator = psi.lil_denominator(y)?;
        Ok(self.lil_numerator(x, y)? / denominator)
    }

    /// `|u(x,y) - ∫_y^1 t Δu(x,t) dt|`.
    pub fn lil_numerator(&self, x: &[f64], y: f64) -> Result<f64> {
        Ok((self.value(x, y)? - self.vertical_laplacian_integral(x, y)?).abs())
    }

    /// For x-independent fields: `(u, ∫_y^1 tΔu dt)` at `y = e^{-L}`, from
    /// closed forms in `L`. This reaches heights far below the smallest
    /// positive double.
    pub fn vertical_profile_at_log(&self, log_inv: f64) -> Result<(f64, f64)> {
        if !(log_inv >= 0.0 && log_inv.is_finite()) {
            return Err(Error::Domain {
                what: "log height",
                value: log_inv,
            });
        }
        match &self.kind {
            FieldKind::VerticalLog => Ok((log_inv, log_inv)),
            FieldKind::VerticalLogPower { alpha, shift } => {
                let g = shift + log_inv;
                let anti = |g: f64| alpha * g.powf(alpha - 1.0) + g.powf(*alpha);
                Ok((g.powf(*alpha), anti(g) - anti(*shift)))
            }
            FieldKind::HarmonicHeight => Ok(((-log_inv).exp(), 0.0)),
            _ => Err(Error::Precondition("log-height profile needs an x-independent field")),
        }
    }

    /// [`ScalarField::lil_ratio`] for x-independent fields at `y = e^{-L}`.
    pub fn lil_ratio_at_log(&self, psi: &GaugeFunction, log_inv: f64) -> Result<f64> {
        let (u, moment) = self.vertical_profile_at_log(log_inv)?;
        let v = psi.square_function_at_log(log_inv)?;
        Ok((u - moment).abs() / lil_normalizer(v)?)
    }
}

/// `h(g) = α(α-1)g^(α-2) + α g^(α-1)`, so that `Δ(c + log 1/y)^α = h/y²`.
fn log_power_h(alpha: f64, g: f64) -> f64 {
    alpha * (alpha - 1.0) * g.powf(alpha - 2.0) + alpha * g.powf(alpha - 1.0)
}

/// Cayley image of `w = x + iy` with its defect `1 - |z|² = 4y/|w+i|²`.
fn cayley(x: f64, y: f64) -> DiscPoint {
    let w = C64::new(x, y);
    let i = C64::new(0.0, 1.0);
    let denom = w + i;
    DiscPoint {
        z: (w - i) / denom,
        defect: 4.0 * y / denom.norm_sqr(),
    }
}

/// `f∘C` at `x + iy` and its derivative in `w`.
fn disc_pull_sample(f: &DiscMap, x: f64, y: f64) -> Result<(crate::disc::MapSample, C64)> {
    let s = f.sample(&cayley(x, y));
    if !(s.defect > 0.0) {
        return Err(Error::Saturation { partial: f64::NAN });
    }
    let w = C64::new(x, y);
    let i = C64::new(0.0, 1.0);
    let dc = 2.0 * i / ((w + i) * (w + i));
    Ok((s, s.derivative * dc))
}

fn check_unit_height(y: f64) -> Result<()> {
    if y > 0.0 && y <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "height",
            value: y,
        })
    }
}

/// Panel caps: total nodes per level stay below about 2^20.
fn max_panels(dims: usize) -> usize {
    match dims {
        1 => 64,
        _ => 8,
    }
}

/// Mean of `f` over the box `[lo, hi]` (1 or 2 dimensions) by tensor
/// Gauss–Legendre, doubling the panel count until two levels agree to
/// [`AVERAGE_REL_TOL`] relative to the mean of `|f|`.
pub fn box_mean<F: FnMut([f64; 2]) -> Result<f64>>(
    rule: &GaussLegendre,
    dims: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    mut f: F,
) -> Result<Estimate> {
    let mut level = |panels: usize| -> Result<(f64, f64)> {
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        let w0 = (hi[0] - lo[0]) / panels as f64;
        let w1 = (hi[1] - lo[1]) / panels as f64;
        for i in 0..panels {
            let a0 = lo[0] + w0 * i as f64;
            for (x0, c0) in rule.mapped(a0, a0 + w0) {
                if dims == 1 {
                    let v = f([x0, 0.0])?;
                    sum += c0 * v;
                    abs_sum += c0 * v.abs();
                    continue;
                }
                for j in 0..panels {
                    let a1 = lo[1] + w1 * j as f64;
                    for (x1, c1) in rule.mapped(a1, a1 + w1) {
                        let v = f([x0, x1])?;
                        sum += c0 * c1 * v;
                        abs_sum += c0 * c1 * v.abs();
                    }
                }
            }
        }
        let volume = if dims == 1 {
            hi[0] - lo[0]
        } else {
            (hi[0] - lo[0]) * (hi[1] - lo[1])
        };
        Ok((sum / volume, abs_sum / volume))
    };
    let (mut prev, _) = level(1)?;
    let mut panels = 2;
    loop {
        let (cur, scale) = level(panels)?;
        let diff = (cur - prev).abs();
        if !cur.is_finite() {
            return Err(Error::Quadrature {
                partial: cur,
                error_estimate: f64::INFINITY,
            });
        }
        if diff <= AVERAGE_REL_TOL * scale.max(cur.abs()) || diff == 0.0 {
            return Ok(Estimate {
                value: cur,
                error: diff,
            });
        }
        if panels >= max_panels(dims) {
            return Err(Error::Quadrature {
                partial: cur,
                error_estimate: diff,
            });
        }
        prev = cur;
        panels *= 2;
    }
}

/// Upper bound on `sup_y y|∇u|` for every unit-coefficient lacunary series.
///
/// `y|∇u| ≤ Σ_k w_k e^{-w_k}` with `w_k = 2^k y`; over all integers `k` this
/// sum is invariant under `y → 2y`, so its sup over `[1, 2]` bounds it. The
/// grid maximum is padded by the grid step times a bound on the derivative.
pub fn lacunary_unit_bloch_bound() -> f64 {
    let series = |t: f64| -> f64 {
        (-64..=64)
            .map(|k| {
                let w = (k as f64).exp2() * t;
                w * (-w).exp()
            })
            .sum()
    };
    let steps = 1024;
    let max = (0..=steps)
        .map(|i| series(1.0 + i as f64 / steps as f64))
        .fold(0.0f64, f64::max);
    // |d/dt Σ w e^{-w}| = |Σ (1 - w) w e^{-w}| / t ≤ 2 on [1, 2]
    max + 2.0 / steps as f64
}

/// `∫_y^1 ε(t)/t dt`, the correction budget that decides whether the plain
/// `|u(x,y)|` numerator may replace the corrected one.
pub fn corrected_numerator(eps: &GaugeFunction, y: f64) -> Result<f64> {
    eps.log_integral(y)
}
