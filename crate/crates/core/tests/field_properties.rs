use std::sync::Arc;

use lil_lab_core::cascade::{CascadeMeasure, PoissonExtension};
use lil_lab_core::disc::DiscMap;
use lil_lab_core::field::{BlockRegion, Cube, DerivativeMode, FieldKind, ScalarField, DEFAULT_FD_STEP};
use lil_lab_core::fit::fit_and_validate;
use lil_lab_core::rng::keyed_stream;
use lil_lab_core::GaugeFunction;

const PROBES: usize = 1000;
const FD_REL_TOL: f64 = 1e-4;

fn builtins() -> Vec<(&'static str, ScalarField, usize)> {
    let cascade = CascadeMeasure::new(1, vec![0.7, 0.3], 8, 2).unwrap();
    // exact leaf sums: the tree walk is not smooth enough to difference
    let v = PoissonExtension::new(cascade).unwrap().with_theta(0.0).unwrap();
    vec![
        ("vertical-log-1", ScalarField::vertical_log(1).unwrap(), PROBES),
        ("vertical-log-2", ScalarField::vertical_log(2).unwrap(), PROBES),
        (
            "vertical-log-power",
            ScalarField::vertical_log_power(1, 0.5, 1.0).unwrap(),
            PROBES,
        ),
        ("harmonic-linear", ScalarField::harmonic_linear(2).unwrap(), PROBES),
        ("harmonic-height", ScalarField::harmonic_height(1).unwrap(), PROBES),
        ("lacunary", ScalarField::lacunary(vec![1.0; 6]).unwrap(), PROBES),
        ("poisson-log", ScalarField::poisson_log(Arc::new(v)).unwrap(), 200),
        (
            "disc-pull",
            ScalarField::disc_pull(DiscMap::random_blaschke(4, 0.8, 3, 0).unwrap()).unwrap(),
            PROBES,
        ),
    ]
}

fn probe(field: &ScalarField, i: u64) -> (Vec<f64>, f64) {
    let mut rng = keyed_stream(77, field.dimension() as u64, i);
    let x: Vec<f64> = (0..field.dimension()).map(|_| rng.uniform()).collect();
    // Poisson fields refuse heights near their resolution floor
    let octaves = if matches!(field.kind(), FieldKind::PoissonLog(_)) {
        5.0
    } else {
        8.0
    };
    let y = (-octaves * rng.uniform()).exp2();
    (x, y)
}

#[test]
fn finite_differences_match_closed_forms() {
    for (name, closed, probes) in builtins() {
        let fd = closed
            .clone()
            .with_mode(DerivativeMode::FiniteDifference {
                step_scale: DEFAULT_FD_STEP,
            })
            .unwrap();
        for i in 0..probes as u64 {
            let (x, y) = probe(&closed, i);
            let g = closed.gradient(&x, y).unwrap();
            let gf = fd.gradient(&x, y).unwrap();
            // harmonic and constant parts vanish; compare at the natural scale
            let scale = g.norm().max(1e-12);
            let diff = ((g.vertical - gf.vertical).powi(2)
                + (0..x.len())
                    .map(|k| (g.spatial[k] - gf.spatial[k]).powi(2))
                    .sum::<f64>())
            .sqrt();
            assert!(
                diff <= FD_REL_TOL * scale,
                "{name} gradient at {x:?} {y}: {diff} vs {scale}"
            );
            let l = closed.laplacian(&x, y).unwrap();
            let lf = fd.laplacian(&x, y).unwrap();
            let lscale = l.abs() + g.norm() / y;
            assert!(
                (l - lf).abs() <= FD_REL_TOL * lscale,
                "{name} laplacian at {x:?} {y}: {l} {lf}"
            );
            let h = closed.laplacian_gradient(&x, y).unwrap();
            let hf = fd.laplacian_gradient(&x, y).unwrap();
            let hscale = h.norm() + g.norm() / (y * y);
            let hdiff = ((h.vertical - hf.vertical).powi(2)
                + (0..x.len())
                    .map(|k| (h.spatial[k] - hf.spatial[k]).powi(2))
                    .sum::<f64>())
            .sqrt();
            assert!(
                hdiff <= FD_REL_TOL * hscale,
                "{name} grad laplacian at {x:?} {y}: {hdiff} vs {hscale}"
            );
        }
    }
}

#[test]
fn harmonic_transform_is_local() {
    for f in [
        ScalarField::harmonic_linear(2).unwrap(),
        ScalarField::lacunary(vec![1.0, -0.5, 0.25]).unwrap(),
    ] {
        for i in 0..50 {
            let (x, y) = probe(&f, i);
            let local = f.value(&x, y).unwrap() - y * f.gradient(&x, y).unwrap().vertical;
            assert!((f.transform_t(&x, y).unwrap() - local).abs() < 1e-9);
        }
    }
}

#[test]
fn green_residual_within_quadrature_error() {
    for (name, f, _) in builtins() {
        if name == "poisson-log" {
            continue;
        }
        for i in 0..20 {
            let mut rng = keyed_stream(5, 1, i);
            let side = (-4.0 * rng.uniform()).exp2();
            let corner = [rng.uniform(), rng.uniform()];
            let t = side * (0.1 + 0.9 * rng.uniform());
            let s = t * (0.05 + 0.9 * rng.uniform());
            let block = BlockRegion::new(Cube::new(corner, side).unwrap(), s, t).unwrap();
            let r = f.green_identity_residual(&block).unwrap();
            assert!(r.residual <= (10.0 * r.error_estimate).max(1e-9), "{name}: {r:?}");
        }
    }
}

#[test]
fn cube_oscillation_bound_with_diagnosed_constant() {
    let psi = GaugeFunction::shifted_log_power(0.5, 1.0).unwrap();
    let f = ScalarField::vertical_log_power(1, 0.5, 1.0).unwrap();
    let a = psi.diagnose(64).unwrap().averaging_constant_estimate;
    for i in 0..100 {
        let mut rng = keyed_stream(6, 0, i);
        let side = (-10.0 * rng.uniform()).exp2();
        let t = side * rng.uniform().max(1e-3);
        let s = t * rng.uniform().max(1e-6);
        let block = BlockRegion::new(Cube::new([rng.uniform(), 0.0], side).unwrap(), s, t).unwrap();
        assert!(f.cube_oscillation_bound_check(&psi, a, &block).unwrap().holds);
    }
}

#[test]
fn cube_limit_close_to_pointwise_transform() {
    // |T_Q - T(x,y)| ≤ C ψ(l) for x ∈ Q, l/2 ≤ y ≤ l; C fitted on one set of
    // cubes and validated on another
    let f = ScalarField::lacunary(vec![1.0; 8]).unwrap();
    let psi = GaugeFunction::constant(lil_lab_core::field::lacunary_unit_bloch_bound()).unwrap();
    let ratios = |stream: u64| -> Vec<f64> {
        (0..60)
            .map(|i| {
                let mut rng = keyed_stream(8, stream, i);
                let n = 1 + (rng.below(8)) as i32;
                let l = 2f64.powi(-n);
                let corner = (rng.below(1 << n) as f64) * l;
                let cube = Cube::new([corner, 0.0], l).unwrap();
                let tq = f.transform_t_cube_average(&cube, l * 2f64.powi(-10)).unwrap().value;
                let x = corner + l * rng.uniform();
                let y = l * (0.5 + 0.5 * rng.uniform());
                (tq - f.transform_t(&[x], y).unwrap()).abs() / psi.eval(l).unwrap()
            })
            .collect()
    };
    let fit = fit_and_validate(&ratios(0), &ratios(1));
    assert!(fit.holds, "{fit:?}");
}
