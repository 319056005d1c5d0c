//! JSON experiment configs. Every record rejects unknown keys; semantic
//! checks run in [`ExperimentConfig::validate`] before any computation.

use std::path::PathBuf;

use lil_lab_core::cascade::{CascadeMeasure, PoissonExtension};
use lil_lab_core::disc::{DiscMap, C64};
use lil_lab_core::field::ScalarField;
use lil_lab_core::threshold::PositiveSequence;
use lil_lab_core::GaugeFunction;
use serde::de::{DeserializeOwned, IgnoredAny};
use serde::Deserialize;
use serde_json::error::Category;
use std::sync::Arc;

/// A config that failed to parse or validate; the CLI exits with status 2.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    /// Dotted path of the offending field (`config` for the whole document).
    pub field: String,
    pub message: String,
    /// 1-based line and column in the source text, when known.
    pub location: Option<(usize, usize)>,
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some((line, column)) = self.location {
            write!(f, "line {line}, column {column}: ")?;
        }
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for SchemaError {}

fn schema(field: &str, message: impl std::fmt::Display) -> SchemaError {
    SchemaError {
        field: field.to_string(),
        message: message.to_string(),
        location: None,
    }
}

/// Position of the first `"key"` used as an object key.
fn locate_key(text: &str, key: &str) -> Option<(usize, usize)> {
    let quoted = format!("\"{key}\"");
    let mut from = 0;
    while let Some(i) = text[from..].find(&quoted) {
        let start = from + i;
        let rest = text[start + quoted.len()..].trim_start();
        if rest.starts_with(':') {
            let before = &text[..start];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |n| n + 1) + 1;
            return Some((line, column));
        }
        from = start + quoted.len();
    }
    None
}

/// First backticked name in a serde message, e.g. the key of
/// "unknown field `colour`".
fn backticked(message: &str) -> Option<&str> {
    let a = message.find('`')? + 1;
    let b = message[a..].find('`')? + a;
    Some(&message[a..b])
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GaugeSpec {
    Constant {
        value: f64,
    },
    ShiftedLogPower {
        alpha: f64,
        #[serde(default = "one")]
        shift: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    PowerLaw {
        delta: f64,
    },
    Tabulated {
        knots: Vec<(f64, f64)>,
    },
    IteratedLogDecay {
        cap: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl GaugeSpec {
    pub fn build(&self) -> lil_lab_core::Result<GaugeFunction> {
        match self {
            GaugeSpec::Constant { value } => GaugeFunction::constant(*value),
            GaugeSpec::ShiftedLogPower { alpha, shift, scale } => {
                GaugeFunction::shifted_log_power(*alpha, *shift)?.scaled(*scale)
            }
            GaugeSpec::PowerLaw { delta } => GaugeFunction::power_law(*delta),
            GaugeSpec::Tabulated { knots } => GaugeFunction::tabulated(knots.clone()),
            GaugeSpec::IteratedLogDecay { cap } => GaugeFunction::iterated_log_decay(*cap),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiscMapSpec {
    Identity,
    Monomial {
        k: u32,
    },
    Constant {
        c: [f64; 2],
    },
    Blaschke {
        zeros: Vec<[f64; 2]>,
        #[serde(default)]
        rotation: f64,
    },
    RandomBlaschke {
        degree: usize,
        #[serde(default = "default_max_modulus")]
        max_modulus: f64,
        #[serde(default)]
        index: u64,
    },
    Automorphism {
        a: [f64; 2],
        #[serde(default)]
        rotation: f64,
    },
    Compose {
        outer: Box<DiscMapSpec>,
        inner: Box<DiscMapSpec>,
    },
}

fn default_max_modulus() -> f64 {
    0.9
}

fn c64(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

impl DiscMapSpec {
    pub fn build(&self, seed: u64) -> lil_lab_core::Result<DiscMap> {
        Ok(match self {
            DiscMapSpec::Identity => DiscMap::identity(),
            DiscMapSpec::Monomial { k } => DiscMap::monomial(*k)?,
            DiscMapSpec::Constant { c } => DiscMap::constant(c64(*c))?,
            DiscMapSpec::Blaschke { zeros, rotation } => {
                DiscMap::blaschke(zeros.iter().copied().map(c64).collect(), *rotation)?
            }
            DiscMapSpec::RandomBlaschke {
                degree,
                max_modulus,
                index,
            } => DiscMap::random_blaschke(*degree, *max_modulus, seed, *index)?,
            DiscMapSpec::Automorphism { a, rotation } => DiscMap::automorphism(c64(*a), *rotation)?,
            DiscMapSpec::Compose { outer, inner } => DiscMap::compose(outer.build(seed)?, inner.build(seed)?),
        })
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CascadeSpec {
    pub weights: Vec<f64>,
    pub depth: usize,
    #[serde(default = "default_half_width")]
    pub half_width: usize,
    /// Seeded child permutation (seed from the config).
    #[serde(default)]
    pub permute: bool,
    pub theta: Option<f64>,
}

fn default_half_width() -> usize {
    8
}

impl CascadeSpec {
    pub fn dimension(&self) -> usize {
        if self.weights.len() == 4 {
            2
        } else {
            1
        }
    }

    pub fn build(&self, seed: u64) -> lil_lab_core::Result<PoissonExtension> {
        let mut m = CascadeMeasure::new(self.dimension(), self.weights.clone(), self.depth, self.half_width)?;
        if self.permute {
            m = m.with_permutation(seed);
        }
        let v = PoissonExtension::new(m)?;
        match self.theta {
            Some(t) => v.with_theta(t),
            None => Ok(v),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    VerticalLog {
        #[serde(default = "one_usize")]
        d: usize,
    },
    VerticalLogPower {
        #[serde(default = "one_usize")]
        d: usize,
        alpha: f64,
        #[serde(default = "one")]
        shift: f64,
    },
    HarmonicLinear {
        #[serde(default = "one_usize")]
        d: usize,
    },
    HarmonicHeight {
        #[serde(default = "one_usize")]
        d: usize,
    },
    Lacunary {
        coefficients: Vec<f64>,
    },
    LacunaryUnit {
        y_min: f64,
    },
    DiscPull {
        map: DiscMapSpec,
    },
    PoissonLog {
        cascade: CascadeSpec,
    },
}

fn one_usize() -> usize {
    1
}

impl FieldSpec {
    pub fn build(&self, seed: u64) -> lil_lab_core::Result<ScalarField> {
        match self {
            FieldSpec::VerticalLog { d } => ScalarField::vertical_log(*d),
            FieldSpec::VerticalLogPower { d, alpha, shift } => ScalarField::vertical_log_power(*d, *alpha, *shift),
            FieldSpec::HarmonicLinear { d } => ScalarField::harmonic_linear(*d),
            FieldSpec::HarmonicHeight { d } => ScalarField::harmonic_height(*d),
            FieldSpec::Lacunary { coefficients } => ScalarField::lacunary(coefficients.clone()),
            FieldSpec::LacunaryUnit { y_min } => ScalarField::lacunary_unit(*y_min),
            FieldSpec::DiscPull { map } => ScalarField::disc_pull(map.build(seed)?),
            FieldSpec::PoissonLog { cascade } => ScalarField::poisson_log(Arc::new(cascade.build(seed)?)),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SequenceSpec {
    Explicit {
        values: Vec<f64>,
    },
    Gauge {
        gauge: GaugeSpec,
        #[serde(default = "default_sequence_len")]
        n: usize,
    },
    PowerOfIndex {
        beta: f64,
        #[serde(default = "default_sequence_len")]
        n: usize,
    },
    Geometric {
        delta: f64,
        #[serde(default = "default_sequence_len")]
        n: usize,
    },
    Constant {
        #[serde(default = "default_sequence_len")]
        n: usize,
    },
}

pub const DEFAULT_SEQUENCE_LEN: usize = 1 << 20;

fn default_sequence_len() -> usize {
    DEFAULT_SEQUENCE_LEN
}

impl SequenceSpec {
    pub fn build(&self) -> lil_lab_core::Result<PositiveSequence> {
        match self {
            SequenceSpec::Explicit { values } => PositiveSequence::explicit(values),
            SequenceSpec::Gauge { gauge, n } => PositiveSequence::from_gauge(&gauge.build()?, *n),
            SequenceSpec::PowerOfIndex { beta, n } => PositiveSequence::power_of_index(*beta, *n),
            SequenceSpec::Geometric { delta, n } => PositiveSequence::geometric(*delta, *n),
            SequenceSpec::Constant { n } => PositiveSequence::constant(*n),
        }
    }
}

/// Increment scales `s_k` of a random-sign martingale.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalesSpec {
    /// `s_k = 1`.
    Unit,
    /// `s_k = ψ(2^-k)`.
    Gauge(GaugeSpec),
    /// `s_k = r^k`.
    Geometric(f64),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MartingaleLilConfig {
    /// The `experiment` tag, already dispatched on.
    #[serde(default, rename = "experiment")]
    tag: Option<IgnoredAny>,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    #[serde(default = "one_usize")]
    pub d: usize,
    pub scales: ScalesSpec,
    /// Paths run for `2^depth` generations.
    pub depth: u32,
    pub paths: u64,
    /// `[lo, hi]` in log2 generations for the running-ratio sup; defaults to
    /// `[10, depth]`.
    pub window: Option<[u32; 2]>,
    #[serde(default = "default_ratio_threshold")]
    pub threshold: f64,
}

fn default_ratio_threshold() -> f64 {
    3.0
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldLilConfig {
    /// The `experiment` tag, already dispatched on.
    #[serde(default, rename = "experiment")]
    tag: Option<IgnoredAny>,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub field: FieldSpec,
    pub psi: GaugeSpec,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Ladder of `L = log(1/y)`.
    pub log_heights: Vec<f64>,
}

fn default_points() -> usize {
    16
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    /// The `experiment` tag, already dispatched on.
    #[serde(default, rename = "experiment")]
    tag: Option<IgnoredAny>,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub cascade: CascadeSpec,
    #[serde(default = "default_points")]
    pub samples: usize,
    /// Heights `2^-k` for the square-function rows.
    #[serde(default = "default_cascade_heights")]
    pub heights_log2: Vec<u32>,
    #[serde(default = "yes")]
    pub lower_bound: bool,
}

fn default_cascade_heights() -> Vec<u32> {
    (6..=11).collect()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiscConfig {
    /// The `experiment` tag, already dispatched on.
    #[serde(default, rename = "experiment")]
    tag: Option<IgnoredAny>,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub map: DiscMapSpec,
    #[serde(default = "default_points")]
    pub directions: usize,
    /// Gaps `1 - r = 2^-k`.
    #[serde(default = "default_disc_gaps")]
    pub gaps_log2: Vec<u32>,
}

fn default_disc_gaps() -> Vec<u32> {
    vec![2, 4, 8, 12, 16, 24, 32]
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    /// The `experiment` tag, already dispatched on.
    #[serde(default, rename = "experiment")]
    tag: Option<IgnoredAny>,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub sequence: SequenceSpec,
    /// Indices for the improvement ratio; powers of two by default.
    pub ns: Option<Vec<usize>>,
    /// Optional gauge for the continuous threshold check.
    pub gauge: Option<GaugeSpec>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// The `experiment` tag, already dispatched on.
    #[serde(default, rename = "experiment")]
    tag: Option<IgnoredAny>,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub modules: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    MartingaleLil(MartingaleLilConfig),
    FieldLil(FieldLilConfig),
    Cascade(CascadeConfig),
    Disc(DiscConfig),
    Threshold(ThresholdConfig),
    Verify(VerifyConfig),
}

pub const MODULES: [&str; 7] = ["gauges", "field", "martingale", "cascade", "disc", "threshold", "cli"];

/// Deserializes one record with its field path and source position.
fn parse<T: DeserializeOwned>(text: &str) -> Result<T, SchemaError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let syntax = matches!(inner.classify(), Category::Syntax | Category::Eof);
        let mut message = inner.to_string();
        let location = if inner.line() > 0 {
            if let Some(i) = message.rfind(" at line ") {
                message.truncate(i);
            }
            Some((inner.line(), inner.column()))
        } else {
            // tagged sub-records are buffered, which drops serde's position;
            // fall back to the offending key
            backticked(&message).and_then(|k| locate_key(text, k))
        };
        let field = match path.as_str() {
            _ if syntax => "syntax".to_string(),
            "." | "?" => "config".to_string(),
            _ => path,
        };
        SchemaError {
            field,
            message,
            location,
        }
    })?;
    de.end().map_err(|e| SchemaError {
        field: "syntax".into(),
        message: "trailing characters after the config object".into(),
        location: Some((e.line(), e.column())),
    })?;
    Ok(value)
}

impl VerifyConfig {
    pub fn new(modules: Option<Vec<String>>) -> Self {
        VerifyConfig {
            tag: None,
            seed: 0,
            threads: None,
            output: None,
            modules,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the offending field and, for
    /// syntax and schema errors, the line and column.
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        #[derive(Deserialize)]
        struct Tag {
            experiment: String,
        }
        let tag: Tag = parse(text)?;
        let cfg = match tag.experiment.as_str() {
            "martingale-lil" => ExperimentConfig::MartingaleLil(parse(text)?),
            "field-lil" => ExperimentConfig::FieldLil(parse(text)?),
            "cascade" => ExperimentConfig::Cascade(parse(text)?),
            "disc" => ExperimentConfig::Disc(parse(text)?),
            "threshold" => ExperimentConfig::Threshold(parse(text)?),
            "verify" => ExperimentConfig::Verify(parse(text)?),
            other => {
                return Err(SchemaError {
                    field: "experiment".into(),
                    message: format!(
                        "unknown experiment `{other}`; expected one of martingale-lil, field-lil, cascade, disc, threshold, verify"
                    ),
                    location: locate_key(text, "experiment"),
                })
            }
        };
        cfg.validate().map_err(|mut e| {
            let key = e.field.rsplit('.').next().unwrap_or(&e.field).to_string();
            e.location = locate_key(text, &key);
            e
        })?;
        Ok(cfg)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::MartingaleLil(_) => "martingale-lil",
            ExperimentConfig::FieldLil(_) => "field-lil",
            ExperimentConfig::Cascade(_) => "cascade",
            ExperimentConfig::Disc(_) => "disc",
            ExperimentConfig::Threshold(_) => "threshold",
            ExperimentConfig::Verify(_) => "verify",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::MartingaleLil(c) => c.seed,
            ExperimentConfig::FieldLil(c) => c.seed,
            ExperimentConfig::Cascade(c) => c.seed,
            ExperimentConfig::Disc(c) => c.seed,
            ExperimentConfig::Threshold(c) => c.seed,
            ExperimentConfig::Verify(c) => c.seed,
        }
    }

    pub fn threads(&self) -> Option<usize> {
        match self {
            ExperimentConfig::MartingaleLil(c) => c.threads,
            ExperimentConfig::FieldLil(c) => c.threads,
            ExperimentConfig::Cascade(c) => c.threads,
            ExperimentConfig::Disc(c) => c.threads,
            ExperimentConfig::Threshold(c) => c.threads,
            ExperimentConfig::Verify(c) => c.threads,
        }
    }

    pub fn output(&self) -> Option<&PathBuf> {
        match self {
            ExperimentConfig::MartingaleLil(c) => c.output.as_ref(),
            ExperimentConfig::FieldLil(c) => c.output.as_ref(),
            ExperimentConfig::Cascade(c) => c.output.as_ref(),
            ExperimentConfig::Disc(c) => c.output.as_ref(),
            ExperimentConfig::Threshold(c) => c.output.as_ref(),
            ExperimentConfig::Verify(c) => c.output.as_ref(),
        }
    }

    /// Builds every component once so that domain errors surface as schema
    /// violations instead of mid-run failures.
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.threads() == Some(0) {
            return Err(schema("threads", "must be at least 1"));
        }
        let seed = self.seed();
        match self {
            ExperimentConfig::MartingaleLil(c) => {
                if !(c.d == 1 || c.d == 2) {
                    return Err(schema("d", "must be 1 or 2"));
                }
                if c.depth == 0 || c.depth > 20 {
                    return Err(schema("depth", "log2 path length must be in 1..=20"));
                }
                if c.paths == 0 {
                    return Err(schema("paths", "must be positive"));
                }
                if let Some([lo, hi]) = c.window {
                    if lo > hi || hi > c.depth {
                        return Err(schema("window", "needs lo <= hi <= depth"));
                    }
                }
                if !(c.threshold > 0.0) {
                    return Err(schema("threshold", "must be positive"));
                }
                match &c.scales {
                    ScalesSpec::Unit => {}
                    ScalesSpec::Gauge(g) => {
                        g.build().map_err(|e| schema("scales.gauge", e))?;
                    }
                    ScalesSpec::Geometric(r) => {
                        if !(*r > 0.0 && *r <= 1.0) {
                            return Err(schema("scales.geometric", "ratio must be in (0, 1]"));
                        }
                        if !(r.powi(1 << c.depth) > 0.0) {
                            return Err(schema(
                                "scales.geometric",
                                "scales underflow before the last generation",
                            ));
                        }
                    }
                }
            }
            ExperimentConfig::FieldLil(c) => {
                c.field.build(seed).map_err(|e| schema("field", e))?;
                c.psi.build().map_err(|e| schema("psi", e))?;
                if c.points == 0 {
                    return Err(schema("points", "must be positive"));
                }
                if c.log_heights.is_empty() || c.log_heights.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                    return Err(schema("log_heights", "needs positive finite values"));
                }
            }
            ExperimentConfig::Cascade(c) => {
                if !(c.cascade.weights.len() == 2 || c.cascade.weights.len() == 4) {
                    return Err(schema("cascade.weights", "needs 2 (d=1) or 4 (d=2) weights"));
                }
                c.cascade.build(seed).map_err(|e| schema("cascade", e))?;
                if c.samples == 0 {
                    return Err(schema("samples", "must be positive"));
                }
                if c.heights_log2.is_empty() {
                    return Err(schema("heights_log2", "must not be empty"));
                }
                let floor = c.cascade.depth as i64 - 2;
                if c.heights_log2.iter().any(|&k| k as i64 > floor) {
                    return Err(schema(
                        "heights_log2",
                        "heights must stay above the resolution floor 4·2^-depth",
                    ));
                }
            }
            ExperimentConfig::Disc(c) => {
                c.map.build(seed).map_err(|e| schema("map", e))?;
                if c.directions == 0 {
                    return Err(schema("directions", "must be positive"));
                }
                if c.gaps_log2.is_empty() || c.gaps_log2.iter().any(|&k| k == 0 || k > 48) {
                    return Err(schema("gaps_log2", "needs values in 1..=48"));
                }
            }
            ExperimentConfig::Threshold(c) => {
                let s = c.sequence.build().map_err(|e| schema("sequence", e))?;
                if let Some(ns) = &c.ns {
                    if ns.iter().any(|&n| n == 0 || n > s.len()) {
                        return Err(schema("ns", "indices must lie in 1..=sequence length"));
                    }
                }
                if let Some(g) = &c.gauge {
                    g.build().map_err(|e| schema("gauge", e))?;
                }
            }
            ExperimentConfig::Verify(c) => {
                if let Some(mods) = &c.modules {
                    if let Some(bad) = mods.iter().find(|m| !MODULES.contains(&m.as_str())) {
                        return Err(schema("modules", format!("unknown module `{bad}`")));
                    }
                }
            }
        }
        Ok(())
    }
}
