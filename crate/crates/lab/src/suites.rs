//! Invariant suites and the acceptance criteria, with tolerances pinned here.
//! `verify` and the `acceptance` test target both run these.

use std::f64::consts::{LN_2, PI};
use std::time::{Duration, Instant};

use lil_lab_core::cascade::{self, CascadeMeasure, PoissonExtension};
use lil_lab_core::disc::{self, DiscMap, DiscPoint, C64};
use lil_lab_core::field::{self, BlockRegion, Cube, HeightHarmonic, ScalarField};
use lil_lab_core::martingale::{field_node, DyadicCube, DyadicMartingale, FieldNode, DEFAULT_TAIL_DEPTH};
use lil_lab_core::rng::keyed_stream;
use lil_lab_core::threshold::{self, PositiveSequence};
use lil_lab_core::{GaugeFunction, Result};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::run::{path_stats, run_experiment};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(module: &'static str, name: &str, passed: bool, detail: String) -> Check {
    Check {
        module,
        name: name.to_string(),
        passed,
        detail,
    }
}

/// A check whose computation failed outright.
fn broken(module: &'static str, name: &str, e: impl std::fmt::Display) -> Check {
    check(module, name, false, format!("error: {e}"))
}

fn from_result(module: &'static str, name: &str, r: Result<Check>) -> Check {
    r.unwrap_or_else(|e| broken(module, name, e))
}

pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub module: &'static str,
    pub budget: Duration,
    pub run: fn() -> Vec<Check>,
}

pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CriterionOutcome {
    pub fn within_budget(&self) -> bool {
        self.elapsed <= self.budget
    }

    pub fn passed(&self) -> bool {
        self.within_budget() && self.checks.iter().all(|c| c.passed)
    }

    /// One line: `PASS criterion 3 (martingale LIL) 4.1s/60s: ...`.
    pub fn line(&self) -> String {
        let failing: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} [{}]", c.name, c.detail))
            .collect();
        let detail = if failing.is_empty() {
            self.checks
                .iter()
                .map(|c| c.detail.as_str())
                .collect::<Vec<_>>()
                .join("; ")
        } else {
            failing.join("; ")
        };
        format!(
            "{} criterion {} ({}) {:.1}s/{}s: {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            detail
        )
    }
}

pub fn run_criterion(c: &Criterion) -> CriterionOutcome {
    let start = Instant::now();
    let checks = (c.run)();
    CriterionOutcome {
        id: c.id,
        title: c.title,
        checks,
        elapsed: start.elapsed(),
        budget: c.budget,
    }
}

pub fn criteria() -> Vec<Criterion> {
    let secs = Duration::from_secs;
    vec![
        Criterion {
            id: 1,
            title: "exact identities",
            module: "field",
            budget: secs(5),
            run: criterion_1,
        },
        Criterion {
            id: 2,
            title: "Green identity",
            module: "field",
            budget: secs(60),
            run: criterion_2,
        },
        Criterion {
            id: 3,
            title: "martingale LIL",
            module: "martingale",
            budget: secs(60),
            run: criterion_3,
        },
        Criterion {
            id: 4,
            title: "field-induced martingale",
            module: "martingale",
            budget: secs(120),
            run: criterion_4,
        },
        Criterion {
            id: 5,
            title: "cascade lower bound",
            module: "cascade",
            budget: secs(600),
            run: criterion_5,
        },
        Criterion {
            id: 6,
            title: "disc suite",
            module: "disc",
            budget: secs(120),
            run: criterion_6,
        },
        Criterion {
            id: 7,
            title: "threshold suite",
            module: "threshold",
            budget: secs(10),
            run: criterion_7,
        },
        Criterion {
            id: 8,
            title: "reproducibility",
            module: "cli",
            budget: secs(600),
            run: criterion_8,
        },
    ]
}

/// Every check of the selected modules (all when `None`), criteria included;
/// a criterion over its runtime budget adds a failing `runtime` check.
pub fn run_modules(modules: Option<&[String]>) -> Vec<Check> {
    let wanted = |m: &str| modules.is_none_or(|ms| ms.iter().any(|x| x == m));
    let mut out = Vec::new();
    if wanted("gauges") {
        out.extend(gauge_checks());
    }
    for c in criteria() {
        if !wanted(c.module) {
            continue;
        }
        let o = run_criterion(&c);
        out.extend(o.checks.iter().cloned().map(|mut k| {
            k.name = format!("criterion-{}/{}", c.id, k.name);
            k
        }));
        out.push(check(
            c.module,
            &format!("criterion-{}/runtime", c.id),
            o.within_budget(),
            format!("{:.1}s <= {}s", o.elapsed.as_secs_f64(), c.budget.as_secs()),
        ));
    }
    out
}

// ---- gauges ----

const GAUGE_AVERAGING_TOL: f64 = 1e-4;
const GAUGE_SQUARE_REL_TOL: f64 = 1e-8;

fn gauge_checks() -> Vec<Check> {
    const M: &str = "gauges";
    let mut out = Vec::new();
    out.push(from_result(
        M,
        "constant-averaging",
        (|| {
            let d = GaugeFunction::constant(1.0)?.diagnose(16)?;
            let err = (d.averaging_constant_estimate - 1.0).abs();
            Ok(check(
                M,
                "constant-averaging",
                d.passes() && err <= GAUGE_AVERAGING_TOL,
                format!("|A - 1| = {err:e}"),
            ))
        })(),
    ));
    out.push(from_result(
        M,
        "power-law-averaging",
        (|| {
            // (1/y) int_0^y t^(-1/2) dt = 2 y^(-1/2)
            let d = GaugeFunction::power_law(0.5)?.diagnose(16)?;
            let err = (d.averaging_constant_estimate - 2.0).abs();
            Ok(check(
                M,
                "power-law-averaging",
                d.passes() && err <= GAUGE_AVERAGING_TOL,
                format!("|A - 2| = {err:e}"),
            ))
        })(),
    ));
    out.push(from_result(
        M,
        "divergent-averaging-flagged",
        (|| {
            let d = GaugeFunction::power_law(1.0)?.diagnose(8)?;
            Ok(check(
                M,
                "divergent-averaging-flagged",
                !d.converged && !d.passes(),
                format!("converged = {}", d.converged),
            ))
        })(),
    ));
    out.push(from_result(
        M,
        "square-function-closed-form",
        (|| {
            let g = GaugeFunction::shifted_log_power(1.0, 1.0)?;
            let mut worst: f64 = 0.0;
            for k in 1..=30 {
                let y = 2f64.powi(-k);
                let closed = g.square_function(y)?;
                let quad = g.square_function_quadrature(y)?.value;
                worst = worst.max((closed - quad).abs() / closed.abs().max(f64::MIN_POSITIVE));
            }
            Ok(check(
                M,
                "square-function-closed-form",
                worst <= GAUGE_SQUARE_REL_TOL,
                format!("max rel {worst:e}"),
            ))
        })(),
    ));
    out
}

// ---- criterion 1 ----

const IDENTITY_PROBES: u64 = 1000;
const IDENTITY_T_TOL: f64 = 1e-6;
const IDENTITY_A2_TOL: f64 = 1e-8;

fn criterion_1() -> Vec<Check> {
    const M: &str = "field";
    let mut out = Vec::new();
    for d in [1usize, 2] {
        let name = format!("transform-vertical-log-d{d}");
        out.push(from_result(
            M,
            &name,
            (|| {
                let f = ScalarField::vertical_log(d)?;
                let mut worst: f64 = 0.0;
                for i in 0..IDENTITY_PROBES {
                    let mut rng = keyed_stream(1, d as u64, i);
                    let x = [rng.uniform(), rng.uniform()];
                    let y = (-40.0 * rng.uniform()).exp2();
                    worst = worst.max((f.transform_t(&x[..d], y)? - 1.0).abs());
                }
                Ok(check(
                    M,
                    &name,
                    worst <= IDENTITY_T_TOL,
                    format!("max |T - 1| = {worst:e}"),
                ))
            })(),
        ));
    }
    out.push(from_result(
        M,
        "height-square-function",
        (|| {
            let v = HeightHarmonic { dimension: 1 };
            let (mut a2_err, mut num_err): (f64, f64) = (0.0, 0.0);
            for k in 1..=40 {
                let x = [keyed_stream(1, 9, k).uniform(), 0.0];
                let y = 2f64.powi(-(k as i32));
                a2_err = a2_err.max((cascade::a_squared_v(&v, x, y)? - k as f64 * LN_2).abs());
                num_err = num_err.max(cascade::log_v_lil_numerator(&v, x, y)?.abs());
            }
            Ok(check(
                M,
                "height-square-function",
                a2_err <= IDENTITY_A2_TOL && num_err <= IDENTITY_A2_TOL,
                format!("max |A^2 - log 1/y| = {a2_err:e}, max numerator = {num_err:e}"),
            ))
        })(),
    ));
    out
}

// ---- criterion 2 ----

const GREEN_BLOCKS: u64 = 100;
const GREEN_TOL: f64 = 1e-6;

/// Built-in fields with closed-form derivatives. Poisson extensions of
/// cascades are left out: their derivatives come from a tree walk over the
/// measure, not from a formula.
pub fn closed_form_fields() -> Result<Vec<(&'static str, ScalarField)>> {
    Ok(vec![
        ("vertical-log-1", ScalarField::vertical_log(1)?),
        ("vertical-log-2", ScalarField::vertical_log(2)?),
        ("vertical-log-power", ScalarField::vertical_log_power(1, 0.5, 1.0)?),
        ("harmonic-linear-1", ScalarField::harmonic_linear(1)?),
        ("harmonic-linear-2", ScalarField::harmonic_linear(2)?),
        ("harmonic-height-1", ScalarField::harmonic_height(1)?),
        ("harmonic-height-2", ScalarField::harmonic_height(2)?),
        ("lacunary", ScalarField::lacunary(vec![1.0; 6])?),
        (
            "disc-pull",
            ScalarField::disc_pull(DiscMap::random_blaschke(4, 0.8, 3, 0)?)?,
        ),
    ])
}

fn random_block(stream: u64, i: u64) -> Result<BlockRegion> {
    let mut rng = keyed_stream(2, stream, i);
    let side = (-4.0 * rng.uniform()).exp2();
    let corner = [rng.uniform(), rng.uniform()];
    let t = side * (0.1 + 0.9 * rng.uniform());
    let s = t * (0.05 + 0.9 * rng.uniform());
    BlockRegion::new(Cube::new(corner, side)?, s, t)
}

fn criterion_2() -> Vec<Check> {
    const M: &str = "field";
    let fields = match closed_form_fields() {
        Ok(f) => f,
        Err(e) => return vec![broken(M, "fields", e)],
    };
    fields
        .iter()
        .enumerate()
        .map(|(j, (name, f))| {
            let residuals: Result<Vec<f64>> = (0..GREEN_BLOCKS)
                .into_par_iter()
                .map(|i| Ok(f.green_identity_residual(&random_block(j as u64, i)?)?.residual))
                .collect();
            from_result(
                M,
                name,
                residuals.map(|r| {
                    let worst = r.into_iter().fold(0.0f64, f64::max);
                    check(M, name, worst <= GREEN_TOL, format!("{name}: max residual {worst:e}"))
                }),
            )
        })
        .collect()
}

// ---- criterion 3 ----

const LIL_PATHS: u64 = 2000;
const LIL_LOG_DEPTH: u32 = 14;
const LIL_SEED: u64 = 7;
const LIL_THRESHOLD: f64 = 3.0;
const LIL_EXCEED_MAX: f64 = 0.01;
const LIL_MEDIAN_RANGE: (f64, f64) = (0.2, 2.0);

fn criterion_3() -> Vec<Check> {
    const M: &str = "martingale";
    let s = path_stats(
        1,
        &vec![1.0; 1 << LIL_LOG_DEPTH],
        LIL_SEED,
        LIL_PATHS,
        LIL_LOG_DEPTH,
        (1 << 10, 1 << LIL_LOG_DEPTH),
        LIL_THRESHOLD,
    );
    let errors = s.digests.iter().filter(|d| d.is_err()).count();
    let median = s.median_terminal_ratio.unwrap_or(f64::NAN);
    vec![
        check(M, "paths", errors == 0, format!("{errors} failed paths")),
        check(
            M,
            "exceed-fraction",
            s.exceed_fraction < LIL_EXCEED_MAX,
            format!("fraction above {LIL_THRESHOLD} = {}", s.exceed_fraction),
        ),
        check(
            M,
            "median-terminal-ratio",
            median >= LIL_MEDIAN_RANGE.0 && median <= LIL_MEDIAN_RANGE.1,
            format!("median = {median:.4}"),
        ),
    ]
}

// ---- criterion 4 ----

const FIELD_MARTINGALE_DEPTH: usize = 12;
const FIELD_MARTINGALE_POINTS: usize = 32;

/// Field-induced martingale with node values computed in parallel.
pub fn parallel_field_martingale(
    f: &ScalarField,
    psi: &GaugeFunction,
    depth: usize,
    tail_depth: usize,
) -> Result<DyadicMartingale> {
    let d = f.dimension();
    let nodes: Result<Vec<Vec<FieldNode>>> = (0..=depth)
        .map(|n| {
            (0..1usize << (n * d))
                .into_par_iter()
                .map(|lin| field_node(f, &DyadicCube::from_linear(d, n, lin), tail_depth))
                .collect()
        })
        .collect();
    DyadicMartingale::from_field_nodes(f, psi, tail_depth, nodes?)
}

fn criterion_4() -> Vec<Check> {
    const M: &str = "martingale";
    let n = FIELD_MARTINGALE_DEPTH;
    let built = (|| {
        // the series is cut where every omitted term is below the quadrature
        // floor at the smallest height the martingale touches
        let y_min = (-((n + DEFAULT_TAIL_DEPTH + 1) as f64)).exp2();
        let f = ScalarField::lacunary_unit(y_min)?;
        let psi = GaugeFunction::constant(field::lacunary_unit_bloch_bound())?;
        let m = parallel_field_martingale(&f, &psi, n, DEFAULT_TAIL_DEPTH)?;
        Ok::<_, lil_lab_core::Error>((psi, m))
    })();
    let (psi, m) = match built {
        Ok(x) => x,
        Err(e) => return vec![broken(M, "build", e)],
    };
    let mp = m.mean_property();
    let mut out = vec![check(
        M,
        "mean-property",
        mp.holds,
        format!(
            "{} nodes, {} over tol_mart, worst defect - tol = {:e}",
            mp.checked, mp.violations, mp.worst_margin
        ),
    )];
    let cal = cascade::sample_points(1, FIELD_MARTINGALE_POINTS, 4, 0);
    let val = cascade::sample_points(1, FIELD_MARTINGALE_POINTS, 4, 1);
    out.push(from_result(
        M,
        "increment-and-qv-bounds",
        (|| {
            let r = lil_lab_core::martingale::increment_bound_check(&m, &psi, &cal, &val)?;
            Ok(check(
                M,
                "increment-and-qv-bounds",
                r.holds,
                format!(
                    "increment C = {:.4} (validation max {:.4}), qv C = {:.4} (validation max {:.4})",
                    r.increment.constant,
                    r.increment.validation_max,
                    r.quadratic_variation.constant,
                    r.quadratic_variation.validation_max
                ),
            ))
        })(),
    ));
    out
}

// ---- criterion 5 ----

const CASCADE_WEIGHTS: [f64; 2] = [0.7, 0.3];
const CASCADE_DEPTH: usize = 14;
const CASCADE_HALF_WIDTH: usize = 8;
const CASCADE_SAMPLES: usize = 200;
const CASCADE_INF_MIN: f64 = 0.005;
const HARNACK_PROBES: usize = 400;
const HARNACK_REL_TOL: f64 = 0.05;

fn p_cascade(depth: usize) -> Result<PoissonExtension> {
    PoissonExtension::new(CascadeMeasure::new(
        1,
        CASCADE_WEIGHTS.to_vec(),
        depth,
        CASCADE_HALF_WIDTH,
    )?)
}

fn criterion_5() -> Vec<Check> {
    const M: &str = "cascade";
    let mut out = Vec::new();
    out.push(from_result(
        M,
        "lower-bound",
        (|| {
            let v = p_cascade(CASCADE_DEPTH)?;
            let xs = cascade::sample_points(1, CASCADE_SAMPLES, 2024, 0);
            let heights: Vec<f64> = (6..=11).map(|k| 2f64.powi(-k)).collect();
            let parts: Result<Vec<_>> = xs
                .par_iter()
                .map(|&x| cascade::cascade_lower_bound_point(&v, x, &heights))
                .collect();
            let r = cascade::combine_lower_bounds(parts?)?;
            Ok(check(
                M,
                "lower-bound",
                r.inf_ratio >= CASCADE_INF_MIN,
                format!("inf A^2/log(1/y) = {:.5}", r.inf_ratio),
            ))
        })(),
    ));
    out.push(from_result(
        M,
        "harnack-stability",
        (|| {
            let probes: Vec<([f64; 2], f64)> = cascade::sample_points(1, HARNACK_PROBES, 5, 1)
                .into_iter()
                .enumerate()
                .map(|(i, x)| (x, 2f64.powi(-(1 + (i % 11) as i32))))
                .collect();
            let sup = |v: &PoissonExtension| -> Result<f64> {
                let r: Result<Vec<f64>> = probes.par_iter().map(|&(x, y)| v.harnack_ratio(x, y)).collect();
                Ok(r?.into_iter().fold(0.0, f64::max))
            };
            let base = sup(&p_cascade(CASCADE_DEPTH)?)?;
            let refined = sup(&p_cascade(CASCADE_DEPTH + 1)?)?;
            let rel = (refined / base - 1.0).abs();
            Ok(check(
                M,
                "harnack-stability",
                rel <= HARNACK_REL_TOL,
                format!("sup N=14 {base:.5}, N=15 {refined:.5}, rel change {rel:.2e}"),
            ))
        })(),
    ));
    out
}

// ---- criterion 6 ----

const SCHWARZ_PICK_MAPS: u64 = 20;
const SCHWARZ_PICK_PROBES: u64 = 500;
const SCHWARZ_PICK_SLACK: f64 = 1e-9;
const LAPLACIAN_PROBES: u64 = 200;
const LAPLACIAN_REL_TOL: f64 = 1e-4;
/// FD step relative to the distance to the circle; the extrapolated stencil
/// still has an O(h^4) error of about 1e-4 at 0.02.
const LAPLACIAN_STEP: f64 = 0.005;

fn random_point(rng: &mut lil_lab_core::rng::Stream, max: f64) -> C64 {
    C64::from_polar(max * rng.uniform().sqrt(), 2.0 * PI * rng.uniform())
}

fn criterion_6() -> Vec<Check> {
    const M: &str = "disc";
    let mut out = Vec::new();
    let sp: Result<Vec<(f64, f64)>> = (0..SCHWARZ_PICK_MAPS)
        .into_par_iter()
        .map(|i| {
            let f = DiscMap::random_blaschke(1 + (i % 8) as usize, 0.95, 12, i)?;
            let mut rng = keyed_stream(12, 1, i);
            let (mut dh, mut bridge): (f64, f64) = (0.0, 0.0);
            for _ in 0..SCHWARZ_PICK_PROBES {
                let p = DiscPoint::new(random_point(&mut rng, 0.999))?;
                dh = dh.max(disc::hyperbolic_derivative_at(&f, &p)?);
                bridge = bridge.max(disc::bridge_gap(&f, &p)?);
            }
            Ok((dh, bridge))
        })
        .collect();
    match sp {
        Ok(v) => {
            let dh = v.iter().map(|p| p.0).fold(0.0, f64::max);
            let bridge = v.iter().map(|p| p.1).fold(0.0, f64::max);
            out.push(check(
                M,
                "schwarz-pick",
                dh <= 1.0 + SCHWARZ_PICK_SLACK,
                format!("max D_h = {dh:.12}"),
            ));
            out.push(check(
                M,
                "bridge",
                bridge <= 2.0 * LN_2 + SCHWARZ_PICK_SLACK,
                format!("max bridge gap = {bridge:.6} (2 log 2 = {:.6})", 2.0 * LN_2),
            ));
        }
        Err(e) => out.push(broken(M, "schwarz-pick", e)),
    }
    out.push(from_result(
        M,
        "laplacian-identity",
        (|| {
            let f = DiscMap::random_blaschke(5, 0.9, 13, 0)?;
            let mut rng = keyed_stream(13, 1, 0);
            let mut worst: f64 = 0.0;
            for _ in 0..LAPLACIAN_PROBES {
                let z = random_point(&mut rng, 0.95);
                let exact = disc::potential_laplacian(&f, &DiscPoint::new(z)?)?;
                let fd = disc::fd_potential_laplacian(&f, z, LAPLACIAN_STEP * (1.0 - z.norm()))?;
                worst = worst.max((fd - exact).abs() / exact);
            }
            Ok(check(
                M,
                "laplacian-identity",
                worst <= LAPLACIAN_REL_TOL,
                format!("max rel error {worst:e}"),
            ))
        })(),
    ));
    out.push(from_result(
        M,
        "blaschke-lower-bound",
        (|| {
            let h = 0.5;
            let zeros = vec![C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(0.0, h), C64::new(0.0, -h)];
            let f = DiscMap::blaschke(zeros, 0.0)?;
            let gaps: Vec<f64> = (1..=20).map(|k| 2f64.powi(-k)).collect();
            let r = disc::blaschke_lower_bound_check(&f, &gaps, &crate::run::directions(64))?;
            Ok(check(
                M,
                "blaschke-lower-bound",
                r.passes,
                format!("inf ratio {:.5}, refined {:.5}", r.inf_ratio, r.refined_inf_ratio),
            ))
        })(),
    ));
    out
}

// ---- criterion 7 ----

const POWER_FINAL_MAX: f64 = 0.02;
const CONSTANT_RATIO_TOL: f64 = 1e-9;

fn criterion_7() -> Vec<Check> {
    const M: &str = "threshold";
    let mut out = Vec::new();
    out.push(from_result(
        M,
        "power-of-index",
        (|| {
            let s = PositiveSequence::power_of_index(1.0, 1 << 20)?;
            let cond = threshold::check_conditions(&s)?;
            let ns: Vec<usize> = (6..=20).map(|k| 1usize << k).collect();
            let r = threshold::improvement_ratios(&s, &ns)?;
            let decreasing = r.windows(2).all(|w| w[1] < w[0]);
            let last = *r.last().expect("non-empty ladder");
            Ok(check(
                M,
                "power-of-index",
                cond.passes() && decreasing && last < POWER_FINAL_MAX,
                format!(
                    "conditions {}, decreasing {decreasing}, ratio(2^20) = {last:.5}",
                    cond.passes()
                ),
            ))
        })(),
    ));
    out.push(from_result(
        M,
        "geometric",
        (|| {
            let s = PositiveSequence::geometric(0.5, 400)?;
            let cond = threshold::check_conditions(&s)?;
            let r = threshold::improvement_ratios(&s, &[100, 400])?;
            Ok(check(
                M,
                "geometric",
                !cond.passes() && r[1] > r[0],
                format!(
                    "conditions {}, ratio(100) = {:.5}, ratio(400) = {:.5}",
                    cond.passes(),
                    r[0],
                    r[1]
                ),
            ))
        })(),
    ));
    out.push(from_result(
        M,
        "constant",
        (|| {
            let n = 1_000_000usize;
            let s = PositiveSequence::constant(n)?;
            let got = threshold::improvement_ratio(&s, n)?;
            let nf = n as f64;
            let want = (nf * nf.ln().ln()).sqrt() / nf;
            let err = (got - want).abs();
            Ok(check(
                M,
                "constant",
                err <= CONSTANT_RATIO_TOL,
                format!("|ratio - closed form| = {err:e}"),
            ))
        })(),
    ));
    out
}

// ---- criterion 8 ----

/// The shipped example configs, one per experiment.
pub const ACCEPTANCE_CONFIGS: [(&str, &str); 6] = [
    ("martingale-lil", include_str!("../configs/martingale-lil.json")),
    ("field-lil", include_str!("../configs/field-lil.json")),
    ("cascade", include_str!("../configs/cascade.json")),
    ("disc", include_str!("../configs/disc.json")),
    ("threshold-power", include_str!("../configs/threshold-power.json")),
    (
        "threshold-geometric",
        include_str!("../configs/threshold-geometric.json"),
    ),
];

/// CSV bytes of one run on a fresh pool of `threads` workers.
pub fn csv_bytes(cfg: &ExperimentConfig, threads: usize) -> anyhow::Result<Vec<u8>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(|| run_experiment(cfg))?.table.to_csv()
}

fn criterion_8() -> Vec<Check> {
    const M: &str = "cli";
    ACCEPTANCE_CONFIGS
        .iter()
        .map(|(name, text)| {
            let r = (|| -> anyhow::Result<Check> {
                let cfg = ExperimentConfig::from_json(text)?;
                let a = csv_bytes(&cfg, 2)?;
                let b = csv_bytes(&cfg, 2)?;
                let c = csv_bytes(&cfg, 1)?;
                Ok(check(
                    M,
                    name,
                    a == b && a == c,
                    format!(
                        "{name}: {} bytes, same threads {}, 1 vs 2 threads {}",
                        a.len(),
                        a == b,
                        a == c
                    ),
                ))
            })();
            r.unwrap_or_else(|e| broken(M, name, e))
        })
        .collect()
}
