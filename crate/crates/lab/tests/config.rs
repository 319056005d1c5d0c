use lil_lab::config::{ExperimentConfig, ScalesSpec, DEFAULT_SEQUENCE_LEN};

fn parse(text: &str) -> Result<ExperimentConfig, lil_lab::SchemaError> {
    ExperimentConfig::from_json(text)
}

#[test]
fn martingale_defaults_and_scales() {
    let c = parse(r#"{"experiment": "martingale-lil", "scales": "unit", "depth": 14, "paths": 10}"#).unwrap();
    let ExperimentConfig::MartingaleLil(m) = c else {
        panic!()
    };
    assert_eq!((m.d, m.seed, m.threshold, m.window), (1, 0, 3.0, None));
    assert_eq!(m.scales, ScalesSpec::Unit);

    let g = r#"{"experiment": "martingale-lil", "scales": {"gauge": {"kind": "shifted-log-power", "alpha": 1.5}},
                "depth": 10, "paths": 1, "d": 2}"#;
    assert!(
        matches!(parse(g).unwrap(), ExperimentConfig::MartingaleLil(m) if matches!(m.scales, ScalesSpec::Gauge(_)))
    );
    let r = r#"{"experiment": "martingale-lil", "scales": {"geometric": 0.9}, "depth": 8, "paths": 1}"#;
    assert!(parse(r).is_ok());
}

#[test]
fn martingale_semantic_errors() {
    let base = |extra: &str| format!(r#"{{"experiment": "martingale-lil", "scales": "unit", "paths": 4, {extra}}}"#);
    for (extra, field) in [
        (r#""depth": 0"#, "depth"),
        (r#""depth": 21"#, "depth"),
        (r#""depth": 8, "d": 3"#, "d"),
        (r#""depth": 8, "window": [6, 9]"#, "window"),
        (r#""depth": 8, "threads": 0"#, "threads"),
        (r#""depth": 8, "threshold": -1"#, "threshold"),
    ] {
        let e = parse(&base(extra)).unwrap_err();
        assert_eq!(e.field, field, "{extra}: {e}");
    }
    // 0.5^(2^12) underflows
    let e = parse(r#"{"experiment": "martingale-lil", "scales": {"geometric": 0.5}, "depth": 12, "paths": 1}"#)
        .unwrap_err();
    assert_eq!(e.field, "scales.geometric");
}

#[test]
fn every_field_kind_builds() {
    for field in [
        r#"{"kind": "vertical-log", "d": 2}"#,
        r#"{"kind": "vertical-log-power", "alpha": 0.5}"#,
        r#"{"kind": "harmonic-linear"}"#,
        r#"{"kind": "harmonic-height"}"#,
        r#"{"kind": "lacunary", "coefficients": [1, 0.5]}"#,
        r#"{"kind": "lacunary-unit", "y_min": 1e-6}"#,
        r#"{"kind": "disc-pull", "map": {"kind": "random-blaschke", "degree": 3}}"#,
        r#"{"kind": "poisson-log", "cascade": {"weights": [0.6, 0.4], "depth": 8, "permute": true}}"#,
    ] {
        let text = format!(
            r#"{{"experiment": "field-lil", "field": {field}, "psi": {{"kind": "constant", "value": 1}}, "log_heights": [4]}}"#
        );
        parse(&text).unwrap_or_else(|e| panic!("{field}: {e}"));
    }
}

#[test]
fn every_map_and_gauge_kind_builds() {
    for map in [
        r#"{"kind": "identity"}"#,
        r#"{"kind": "monomial", "k": 3}"#,
        r#"{"kind": "constant", "c": [0.1, 0.2]}"#,
        r#"{"kind": "automorphism", "a": [0.3, 0], "rotation": 1}"#,
        r#"{"kind": "compose", "outer": {"kind": "monomial", "k": 2}, "inner": {"kind": "blaschke", "zeros": [[0.2, 0.1]]}}"#,
    ] {
        parse(&format!(r#"{{"experiment": "disc", "map": {map}}}"#)).unwrap_or_else(|e| panic!("{map}: {e}"));
    }
    for gauge in [
        r#"{"kind": "constant", "value": 2}"#,
        r#"{"kind": "shifted-log-power", "alpha": 1.5, "shift": 2, "scale": 3}"#,
        r#"{"kind": "power-law", "delta": 0.3}"#,
        r#"{"kind": "tabulated", "knots": [[1, 1], [0.5, 2]]}"#,
        r#"{"kind": "iterated-log-decay", "cap": 1}"#,
    ] {
        let t = format!(r#"{{"experiment": "threshold", "sequence": {{"kind": "gauge", "gauge": {gauge}, "n": 64}}}}"#);
        parse(&t).unwrap_or_else(|e| panic!("{gauge}: {e}"));
    }
}

#[test]
fn domain_errors_surface_as_schema_errors() {
    let e = parse(r#"{"experiment": "disc", "map": {"kind": "monomial", "k": 0}}"#).unwrap_err();
    assert_eq!(e.field, "map");
    let e = parse(r#"{"experiment": "threshold", "sequence": {"kind": "constant", "n": 8}, "ns": [9]}"#).unwrap_err();
    assert_eq!(e.field, "ns");
    let e = parse(r#"{"experiment": "verify", "modules": ["disc", "plots"]}"#).unwrap_err();
    assert_eq!(e.field, "modules");
}

#[test]
fn sequence_length_defaults() {
    let ExperimentConfig::Threshold(t) =
        parse(r#"{"experiment": "threshold", "sequence": {"kind": "geometric", "delta": 0.5}}"#).unwrap()
    else {
        panic!()
    };
    assert_eq!(t.sequence.build().unwrap().len(), DEFAULT_SEQUENCE_LEN);
}

#[test]
fn errors_carry_positions() {
    let e = parse("{\"experiment\": \"disc\",\n \"map\": {\"kind\": \"identity\"},\n \"directions\": -1}").unwrap_err();
    assert_eq!(e.field, "directions");
    assert_eq!(e.location.map(|l| l.0), Some(3));
    let e = parse("{\"experiment\": \"disc\"").unwrap_err();
    assert_eq!(e.field, "syntax");
    let e = parse(r#"{"seed": 1}"#).unwrap_err();
    assert!(e.message.contains("experiment"), "{e}");
}
