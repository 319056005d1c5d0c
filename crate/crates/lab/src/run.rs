//! Experiment bodies. Each maps a validated config to a [`Report`]; parallel
//! stages collect in index order so the CSV does not depend on scheduling.

use std::f64::consts::PI;

use lil_lab_core::cascade::{self, PoissonExtension};
use lil_lab_core::disc::{self, DiscMap, DiscPoint, C64};
use lil_lab_core::field::ScalarField;
use lil_lab_core::gauges::bloch_normalizer;
use lil_lab_core::martingale::{gauge_scales, random_path, MartingalePath};
use lil_lab_core::rng::keyed_stream;
use lil_lab_core::threshold;
use lil_lab_core::{Error, GaugeFunction};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::*;
use crate::output::{jnum, num, opt, Column, Report, Table};
use crate::suites;

const FIELD_POINT_TAG: u64 = 0xf1e1d;

pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Report> {
    Ok(match cfg {
        ExperimentConfig::MartingaleLil(c) => martingale_lil(c)?,
        ExperimentConfig::FieldLil(c) => field_lil(c)?,
        ExperimentConfig::Cascade(c) => cascade_experiment(c)?,
        ExperimentConfig::Disc(c) => disc_experiment(c)?,
        ExperimentConfig::Threshold(c) => threshold_experiment(c)?,
        ExperimentConfig::Verify(c) => verify_experiment(c.modules.as_deref()),
    })
}

/// Short tag for a guard trip, written to the `error` column.
pub fn error_tag(e: &Error) -> String {
    match e {
        Error::Domain { what, value } => format!("domain: {what} = {value}"),
        Error::LilRegime { quantity } => format!("lil-regime: {quantity} <= e^e"),
        Error::Quadrature {
            partial,
            error_estimate,
        } => {
            format!("quadrature: partial {partial}, error {error_estimate}")
        }
        Error::Resolution { height, floor } => {
            format!("resolution: height {height} < floor {floor}")
        }
        Error::Saturation { partial } => format!("saturation: partial {partial}"),
        Error::Precondition(m) => format!("precondition: {m}"),
        Error::Config(m) => format!("config: {m}"),
    }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    xs.into_iter().reduce(f64::max)
}

fn x2(d: usize, x: [f64; 2]) -> String {
    if d == 2 {
        num(x[1])
    } else {
        String::new()
    }
}

// ---- martingale-lil ----

const MARTINGALE_COLUMNS: &[Column] = &[
    (
        "path",
        "path index; the path's boundary point and signs derive from (seed, path)",
    ),
    ("x1", "first coordinate of the boundary point (first 52 binary digits)"),
    ("x2", "second coordinate (d = 2 only)"),
    ("n", "generation, a power of two"),
    ("t_n", "martingale value T_n(x)"),
    ("qv_n", "quadratic variation <T>_n(x)"),
    ("ratio", "|T_n| / sqrt(<T>_n log log <T>_n); empty when guarded"),
    ("error", "guard trip, if any"),
];

/// Per-path digest kept instead of the full trajectory.
#[derive(Debug, Clone)]
pub struct PathDigest {
    pub x: [f64; 2],
    pub checkpoints: Vec<(usize, f64, f64, Result<f64, Error>)>,
    /// Largest ratio over the window, `None` if every generation was guarded.
    pub window_max: Option<f64>,
    pub terminal: Option<f64>,
}

fn digest(path: &MartingalePath, log_depth: u32, lo: usize, hi: usize) -> PathDigest {
    let checkpoints = (0..=log_depth)
        .map(|j| {
            let n = 1usize << j;
            (n, path.values[n], path.quadratic_variation[n - 1], path.lil_ratio(n))
        })
        .collect();
    PathDigest {
        x: path.x,
        checkpoints,
        window_max: path.max_ratio(lo, hi),
        terminal: path.lil_ratio(path.depth()).ok(),
    }
}

/// Statistics over many random-sign paths.
#[derive(Debug, Clone)]
pub struct PathStats {
    pub digests: Vec<Result<PathDigest, Error>>,
    pub median_terminal_ratio: Option<f64>,
    pub max_window_ratio: Option<f64>,
    pub exceed_fraction: f64,
    pub unguarded_paths: usize,
}

pub fn path_stats(
    d: usize,
    scales: &[f64],
    seed: u64,
    paths: u64,
    log_depth: u32,
    window: (usize, usize),
    threshold: f64,
) -> PathStats {
    let digests: Vec<Result<PathDigest, Error>> = (0..paths)
        .into_par_iter()
        .map(|p| random_path(d, scales, seed, p).map(|path| digest(&path, log_depth, window.0, window.1)))
        .collect();
    let ok = || digests.iter().filter_map(|r| r.as_ref().ok());
    let exceed = ok().filter(|p| p.window_max.is_some_and(|m| m > threshold)).count();
    PathStats {
        median_terminal_ratio: median(ok().filter_map(|p| p.terminal).collect()),
        max_window_ratio: max_of(ok().filter_map(|p| p.window_max)),
        exceed_fraction: exceed as f64 / paths as f64,
        unguarded_paths: ok().filter(|p| p.window_max.is_some()).count(),
        digests,
    }
}

pub fn martingale_scales(spec: &ScalesSpec, n: usize) -> anyhow::Result<Vec<f64>> {
    Ok(match spec {
        ScalesSpec::Unit => vec![1.0; n],
        ScalesSpec::Gauge(g) => gauge_scales(&g.build()?, n),
        ScalesSpec::Geometric(r) => (1..=n).map(|k| r.powi(k as i32)).collect(),
    })
}

fn martingale_lil(c: &MartingaleLilConfig) -> anyhow::Result<Report> {
    let n = 1usize << c.depth;
    let scales = martingale_scales(&c.scales, n)?;
    let [lo, hi] = c.window.unwrap_or([10.min(c.depth), c.depth]);
    let window = (1usize << lo, 1usize << hi);
    let stats = path_stats(c.d, &scales, c.seed, c.paths, c.depth, window, c.threshold);
    let mut table = Table::new(MARTINGALE_COLUMNS);
    let mut guard_trips = 0usize;
    for (p, r) in stats.digests.iter().enumerate() {
        match r {
            Ok(dg) => {
                for (n, t, qv, ratio) in &dg.checkpoints {
                    let (ratio, err) = match ratio {
                        Ok(v) => (num(*v), String::new()),
                        Err(e) => {
                            guard_trips += 1;
                            (String::new(), error_tag(e))
                        }
                    };
                    table.push(vec![
                        p.to_string(),
                        num(dg.x[0]),
                        x2(c.d, dg.x),
                        n.to_string(),
                        num(*t),
                        num(*qv),
                        ratio,
                        err,
                    ]);
                }
            }
            Err(e) => {
                guard_trips += 1;
                let mut row = vec![p.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(error_tag(e));
                table.push(row);
            }
        }
    }
    let mut results = Map::new();
    results.insert("paths".into(), json!(c.paths));
    results.insert("generations".into(), json!(n));
    results.insert("window".into(), json!([window.0, window.1]));
    results.insert("threshold".into(), jnum(c.threshold));
    results.insert(
        "median_terminal_ratio".into(),
        stats.median_terminal_ratio.map_or(Value::Null, jnum),
    );
    results.insert(
        "max_window_ratio".into(),
        stats.max_window_ratio.map_or(Value::Null, jnum),
    );
    results.insert("exceed_fraction".into(), jnum(stats.exceed_fraction));
    results.insert("paths_with_window_ratio".into(), json!(stats.unguarded_paths));
    results.insert("guard_trips".into(), json!(guard_trips));
    Ok(Report {
        experiment: "martingale-lil",
        table,
        passed: Some(stats.exceed_fraction < 0.01),
        results,
    })
}

// ---- field-lil ----

const FIELD_COLUMNS: &[Column] = &[
    ("point", "sample index"),
    ("x1", "first boundary coordinate"),
    ("x2", "second boundary coordinate (d = 2 only)"),
    ("log_inv_y", "L = log(1/y)"),
    ("numerator", "|u(x,y) - int_y^1 t Lap u(x,t) dt|"),
    ("ratio", "numerator / sqrt(Psi(y) log log Psi(y)); empty when guarded"),
    ("error", "guard trip, if any"),
];

fn field_row(field: &ScalarField, psi: &GaugeFunction, x: &[f64], l: f64) -> Result<(f64, f64), Error> {
    if field.is_x_independent() {
        let (u, moment) = field.vertical_profile_at_log(l)?;
        return Ok(((u - moment).abs(), field.lil_ratio_at_log(psi, l)?));
    }
    let y = (-l).exp();
    if !(y > 0.0) {
        return Err(Error::Domain {
            what: "height",
            value: y,
        });
    }
    let numerator = field.lil_numerator(x, y)?;
    Ok((numerator, numerator / psi.lil_denominator(y)?))
}

fn field_lil(c: &FieldLilConfig) -> anyhow::Result<Report> {
    let field = c.field.build(c.seed)?;
    let psi = c.psi.build()?;
    let d = field.dimension();
    let points: Vec<[f64; 2]> = (0..c.points as u64)
        .map(|i| {
            let mut rng = keyed_stream(c.seed, FIELD_POINT_TAG, i);
            let a = rng.uniform();
            [a, if d == 2 { rng.uniform() } else { 0.0 }]
        })
        .collect();
    let jobs: Vec<(usize, f64)> = (0..points.len())
        .flat_map(|p| c.log_heights.iter().map(move |&l| (p, l)))
        .collect();
    let out: Vec<Result<(f64, f64), Error>> = jobs
        .par_iter()
        .map(|&(p, l)| field_row(&field, &psi, &points[p][..d], l))
        .collect();
    let mut table = Table::new(FIELD_COLUMNS);
    let mut ratios_at_top = Vec::new();
    let mut guard_trips = 0;
    let top = c.log_heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (&(p, l), r) in jobs.iter().zip(&out) {
        let x = points[p];
        let (numer, ratio, err) = match r {
            Ok((n, q)) => {
                if l == top {
                    ratios_at_top.push(*q);
                }
                (num(*n), num(*q), String::new())
            }
            Err(e) => {
                guard_trips += 1;
                (String::new(), String::new(), error_tag(e))
            }
        };
        table.push(vec![p.to_string(), num(x[0]), x2(d, x), num(l), numer, ratio, err]);
    }
    let mut results = Map::new();
    results.insert(
        "max_ratio".into(),
        max_of(out.iter().filter_map(|r| r.as_ref().ok().map(|v| v.1))).map_or(Value::Null, jnum),
    );
    results.insert("largest_log_height".into(), jnum(top));
    results.insert(
        "median_ratio_at_largest_log_height".into(),
        median(ratios_at_top).map_or(Value::Null, jnum),
    );
    results.insert("x_independent".into(), json!(field.is_x_independent()));
    results.insert("guard_trips".into(), json!(guard_trips));
    Ok(Report {
        experiment: "field-lil",
        table,
        passed: None,
        results,
    })
}

// ---- cascade ----

const CASCADE_COLUMNS: &[Column] = &[
    ("sample", "sample index"),
    ("x1", "first boundary coordinate"),
    ("x2", "second boundary coordinate (d = 2 only)"),
    ("y", "height"),
    ("v", "Poisson extension of the cascade measure"),
    ("grad_norm", "|grad v|"),
    ("harnack", "y |grad v| / v"),
    ("a_squared", "A^2(v)(x,y) = int_y^1 t |grad v|^2 / v^2 dt"),
    ("ratio", "A^2(v)(x,y) / log(1/y)"),
    ("truncation_bound", "bound on the mass outside the window"),
    ("error", "guard trip, if any"),
];

struct CascadePoint {
    a_squared: Result<Vec<f64>, Error>,
    jets: Vec<Result<(f64, f64, f64, f64), Error>>,
}

fn cascade_point(v: &PoissonExtension, x: [f64; 2], heights: &[f64]) -> CascadePoint {
    CascadePoint {
        a_squared: cascade::a_squared_v_ladder(v, x, heights),
        jets: heights
            .iter()
            .map(|&y| {
                let s = v.eval(x, y)?;
                let g = s.jet.gradient.norm();
                Ok((s.jet.value, g, y * g / s.jet.value, s.truncation_bound))
            })
            .collect(),
    }
}

fn cascade_experiment(c: &CascadeConfig) -> anyhow::Result<Report> {
    let v = c.cascade.build(c.seed)?;
    let d = v.dimension();
    let mut ks = c.heights_log2.clone();
    ks.sort_unstable();
    ks.dedup();
    let heights: Vec<f64> = ks.iter().map(|&k| (-(k as f64)).exp2()).collect();
    let xs = cascade::sample_points(d, c.samples, c.seed, 0);
    let points: Vec<CascadePoint> = xs.par_iter().map(|&x| cascade_point(&v, x, &heights)).collect();
    let mut table = Table::new(CASCADE_COLUMNS);
    let mut guard_trips = 0;
    let mut inf_ratio = f64::INFINITY;
    let mut harnack_sup: f64 = 0.0;
    for (i, (x, p)) in xs.iter().zip(&points).enumerate() {
        for (k, &y) in heights.iter().enumerate() {
            let mut row = vec![i.to_string(), num(x[0]), x2(d, *x), num(y)];
            let mut errs = Vec::new();
            match &p.jets[k] {
                Ok((val, g, h, tb)) => {
                    harnack_sup = harnack_sup.max(*h);
                    row.extend([num(*val), num(*g), num(*h)]);
                    let a2 = p.a_squared.as_ref().map(|a| a[k]);
                    match a2 {
                        Ok(a) => {
                            let ratio = a / -y.ln();
                            inf_ratio = inf_ratio.min(ratio);
                            row.extend([num(a), num(ratio)]);
                        }
                        Err(e) => {
                            row.extend([String::new(), String::new()]);
                            errs.push(error_tag(e));
                        }
                    }
                    row.push(num(*tb));
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(String::new(), 6));
                    errs.push(error_tag(e));
                }
            }
            if !errs.is_empty() {
                guard_trips += 1;
            }
            row.push(errs.join("; "));
            table.push(row);
        }
    }
    let mut results = Map::new();
    results.insert("samples".into(), json!(c.samples));
    results.insert(
        "heights".into(),
        Value::Array(heights.iter().map(|&y| jnum(y)).collect()),
    );
    results.insert("inf_ratio".into(), jnum(inf_ratio));
    results.insert("harnack_sup".into(), jnum(harnack_sup));
    results.insert("resolution_floor".into(), jnum(v.resolution_floor()));
    results.insert("guard_trips".into(), json!(guard_trips));
    let measure = v.measure().expect("cascade extension");
    if c.lower_bound && !measure.has_equal_weights() {
        let parts: Result<Vec<_>, Error> = xs
            .par_iter()
            .map(|&x| cascade::cascade_lower_bound_point(&v, x, &heights))
            .collect();
        match parts.and_then(cascade::combine_lower_bounds) {
            Ok(r) => {
                results.insert(
                    "lower_bound".into(),
                    json!({
                        "inf_ratio": jnum(r.inf_ratio),
                        "window_ratio": jnum(r.window_ratio),
                        "oscillation_constant": jnum(r.oscillation_constant),
                        "cauchy_schwarz_holds": r.cauchy_schwarz_holds,
                    }),
                );
            }
            Err(e) => {
                results.insert("lower_bound".into(), json!({ "error": error_tag(&e) }));
            }
        }
    }
    Ok(Report {
        experiment: "cascade",
        table,
        passed: Some(guard_trips == 0 && inf_ratio > 0.0),
        results,
    })
}

// ---- disc ----

const DISC_COLUMNS: &[Column] = &[
    ("direction", "direction index"),
    ("xi_angle", "argument of the boundary direction xi"),
    ("gap", "1 - r"),
    ("r", "radius"),
    ("d_h", "hyperbolic distance d_h(f(r xi), 0)"),
    ("a_squared", "A^2(f)(xi, r)"),
    ("ratio", "A^2(f)(xi, r) / log(1/(1-r))"),
    (
        "lil_ratio",
        "|d_h - A^2| / sqrt(L log log log L), L = log(1/(1-r)); empty when guarded",
    ),
    ("error", "guard trip, if any"),
];

pub fn directions(count: usize) -> Vec<C64> {
    (0..count)
        .map(|k| C64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / count as f64))
        .collect()
}

fn disc_direction(f: &DiscMap, xi: C64, gaps: &[f64]) -> Vec<[Result<f64, Error>; 3]> {
    let a2 = disc::a_squared_f_ladder(f, xi, gaps);
    gaps.iter()
        .enumerate()
        .map(|(k, &g)| {
            let s = f.sample(&DiscPoint::radial(xi, g));
            let dh = if s.defect > 0.0 {
                Ok(disc::distance_to_origin(&DiscPoint {
                    z: s.value,
                    defect: s.defect,
                }))
            } else {
                Err(Error::Saturation { partial: f64::NAN })
            };
            let a = a2.as_ref().map(|v| v[k]).map_err(|e| e.clone());
            let lil = match (&dh, &a) {
                (Ok(dh), Ok(a)) => bloch_normalizer(-g.ln()).map(|n| (dh - a).abs() / n),
                (Err(e), _) | (_, Err(e)) => Err(e.clone()),
            };
            [dh, a, lil]
        })
        .collect()
}

fn disc_experiment(c: &DiscConfig) -> anyhow::Result<Report> {
    let f = c.map.build(c.seed)?;
    let mut ks = c.gaps_log2.clone();
    ks.sort_unstable();
    ks.dedup();
    let gaps: Vec<f64> = ks.iter().map(|&k| (-(k as f64)).exp2()).collect();
    let dirs = directions(c.directions);
    let out: Vec<_> = dirs.par_iter().map(|&xi| disc_direction(&f, xi, &gaps)).collect();
    let mut table = Table::new(DISC_COLUMNS);
    let mut guard_trips = 0;
    let mut per_gap_inf = vec![f64::INFINITY; gaps.len()];
    for (i, (xi, rows)) in dirs.iter().zip(&out).enumerate() {
        for (k, (&g, [dh, a, lil])) in gaps.iter().zip(rows).enumerate() {
            let mut errs = Vec::new();
            let mut cell = |r: &Result<f64, Error>| match r {
                Ok(v) => num(*v),
                Err(e) => {
                    let t = error_tag(e);
                    if !errs.contains(&t) {
                        errs.push(t);
                    }
                    String::new()
                }
            };
            let dh_s = cell(dh);
            let a_s = cell(a);
            let ratio = a.as_ref().ok().map(|a| a / -g.ln());
            if let Some(q) = ratio {
                per_gap_inf[k] = per_gap_inf[k].min(q);
            }
            let lil_s = cell(lil);
            if !errs.is_empty() {
                guard_trips += 1;
            }
            table.push(vec![
                i.to_string(),
                num(xi.arg()),
                num(g),
                num(1.0 - g),
                dh_s,
                a_s,
                opt(ratio),
                lil_s,
                errs.join("; "),
            ]);
        }
    }
    let mut results = Map::new();
    results.insert("directions".into(), json!(c.directions));
    results.insert("finite_blaschke".into(), json!(f.is_finite_blaschke()));
    results.insert(
        "inf_ratio_per_gap".into(),
        Value::Array(
            gaps.iter()
                .zip(&per_gap_inf)
                .map(|(g, q)| json!([jnum(*g), jnum(*q)]))
                .collect(),
        ),
    );
    results.insert("guard_trips".into(), json!(guard_trips));
    let mut passed = None;
    if f.is_finite_blaschke() {
        match disc::blaschke_lower_bound_check(&f, &gaps, &dirs) {
            Ok(r) => {
                passed = Some(r.passes);
                results.insert(
                    "lower_bound".into(),
                    json!({
                        "inf_ratio": jnum(r.inf_ratio),
                        "refined_inf_ratio": jnum(r.refined_inf_ratio),
                        "passes": r.passes,
                    }),
                );
            }
            Err(e) => {
                results.insert("lower_bound".into(), json!({ "error": error_tag(&e) }));
            }
        }
    }
    Ok(Report {
        experiment: "disc",
        table,
        passed,
        results,
    })
}

// ---- threshold ----

const THRESHOLD_COLUMNS: &[Column] = &[
    ("section", "discrete (sequence index) or continuous (gauge height)"),
    ("index", "n for discrete rows, y for continuous rows"),
    ("value", "a_n, or psi(y)"),
    ("ratio", "discrete: sqrt(S log log S) / sum_1^n a_k with S = sum_1^n a_k^2; continuous: sqrt(Psi log log Psi) / int_y^1 psi(t)/t dt"),
    ("lambda", "a_n / a_(n-1) - 1 (discrete only)"),
    ("threshold_quantity", "continuous: log psi(y) log log(1/y) / log(1/y)"),
    ("concave", "continuous: psi(y/2) psi(2y) <= psi(y)^2"),
    ("error", "guard trip, if any"),
];

fn default_ns(len: usize) -> Vec<usize> {
    (2..usize::BITS)
        .map(|k| 1usize << k)
        .take_while(|&n| n <= len)
        .collect()
}

fn threshold_experiment(c: &ThresholdConfig) -> anyhow::Result<Report> {
    let s = c.sequence.build()?;
    let ns = c.ns.clone().unwrap_or_else(|| default_ns(s.len()));
    let ratios: Vec<Result<f64, Error>> = ns.par_iter().map(|&n| threshold::improvement_ratio(&s, n)).collect();
    let cond = threshold::check_conditions(&s)?;
    let mf = threshold::multiplicative_form(&s);
    let mut table = Table::new(THRESHOLD_COLUMNS);
    let mut guard_trips = 0;
    for (&n, r) in ns.iter().zip(&ratios) {
        let (ratio, err) = match r {
            Ok(v) => (num(*v), String::new()),
            Err(e) => {
                guard_trips += 1;
                (String::new(), error_tag(e))
            }
        };
        table.push(vec![
            "discrete".into(),
            n.to_string(),
            num(s.value(n)),
            ratio,
            num(mf.lambdas[n - 1]),
            String::new(),
            String::new(),
            err,
        ]);
    }
    let ok: Vec<f64> = ratios.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let decreasing = ok.windows(2).all(|w| w[1] < w[0]);
    let mut results = Map::new();
    results.insert(
        "conditions".into(),
        json!({
            "monotone": cond.monotone,
            "doubling_constant": jnum(cond.doubling_constant),
            "log_concave": cond.log_concave,
            "threshold_tail_slope": cond.threshold_tail_slope.map_or(Value::Null, jnum),
            "threshold_tail_decreasing": cond.threshold_tail_decreasing,
        }),
    );
    results.insert("conditions_pass".into(), json!(cond.passes()));
    results.insert("threshold_failed".into(), json!(!cond.passes()));
    results.insert(
        "multiplicative_form".into(),
        json!({
            "bounded": mf.bounded,
            "nonincreasing": mf.nonincreasing,
            "sum_dominates": mf.sum_dominates,
            "tail_decreasing": mf.tail_decreasing,
        }),
    );
    results.insert("ratio_strictly_decreasing".into(), json!(decreasing));
    results.insert("final_ratio".into(), ok.last().map_or(Value::Null, |v| jnum(*v)));
    if let Some(g) = &c.gauge {
        let g = g.build()?;
        let report = threshold::continuous_threshold_check(&g, &threshold::default_threshold_ladder())?;
        for p in &report.points {
            let (ratio, err) = match p.ratio {
                Some(r) => (num(r), String::new()),
                None => {
                    guard_trips += 1;
                    (String::new(), "lil-regime: Psi(y) <= e^e".to_string())
                }
            };
            let value = g.at_log_height(-p.y.ln());
            table.push(vec![
                "continuous".into(),
                num(p.y),
                num(value),
                ratio,
                String::new(),
                num(p.threshold_quantity),
                p.concave.to_string(),
                err,
            ]);
        }
        results.insert(
            "continuous".into(),
            json!({
                "ratio_decreasing": report.ratio_decreasing,
                "concavity_violations": report.concavity_violations,
            }),
        );
    }
    results.insert("guard_trips".into(), json!(guard_trips));
    Ok(Report {
        experiment: "threshold",
        table,
        passed: Some(cond.passes()),
        results,
    })
}

// ---- verify ----

const VERIFY_COLUMNS: &[Column] = &[
    ("module", "module whose invariant suite ran the check"),
    ("check", "check name"),
    ("passed", "true or false"),
    ("detail", "measured value against its pinned tolerance"),
];

fn verify_experiment(modules: Option<&[String]>) -> Report {
    let checks = suites::run_modules(modules);
    let mut table = Table::new(VERIFY_COLUMNS);
    for c in &checks {
        table.push(vec![
            c.module.to_string(),
            c.name.clone(),
            c.passed.to_string(),
            c.detail.clone(),
        ]);
    }
    let failed: Vec<Value> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| json!(format!("{}/{}", c.module, c.name)))
        .collect();
    let mut results = Map::new();
    results.insert("checks".into(), json!(checks.len()));
    results.insert("failed".into(), Value::Array(failed.clone()));
    Report {
        experiment: "verify",
        table,
        passed: Some(failed.is_empty()),
        results,
    }
}
