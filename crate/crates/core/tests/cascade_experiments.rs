use lil_lab_core::cascade::{
    a_squared_v, cascade_lower_bound_check, log_v_lil_ratio, sample_points, CascadeMeasure, PoissonExtension,
};
use lil_lab_core::field::PositiveHarmonic;
use std::f64::consts::PI;

fn p73(depth: usize, w: usize) -> PoissonExtension {
    PoissonExtension::new(CascadeMeasure::new(1, vec![0.7, 0.3], depth, w).unwrap()).unwrap()
}

fn ladder() -> Vec<f64> {
    (6..=11).map(|k| 2f64.powi(-k)).collect()
}

#[test]
fn lower_bound_holds_at_desk_scale() {
    let v = p73(14, 8);
    let xs = sample_points(1, 200, 2024, 0);
    let report = cascade_lower_bound_check(&v, &xs, &ladder()).unwrap();
    assert!(report.inf_ratio >= 0.005, "inf ratio {}", report.inf_ratio);
    assert!(report.cauchy_schwarz_holds);
    assert!(report.oscillation_constant > 1.0);
}

#[test]
fn harnack_sup_is_stable_under_refinement() {
    let probes: Vec<([f64; 2], f64)> = sample_points(1, 400, 5, 1)
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, 2f64.powi(-(1 + (i % 11) as i32))))
        .collect();
    let sup = |v: &PoissonExtension| {
        probes
            .iter()
            .map(|&(x, y)| v.harnack_ratio(x, y).unwrap())
            .fold(0.0f64, f64::max)
    };
    let base = sup(&p73(14, 8));
    for refined in [p73(15, 8), p73(14, 16)] {
        let s = sup(&refined);
        assert!((s / base - 1.0).abs() <= 0.05, "{base} {s}");
    }
}

#[test]
fn extension_is_positive_and_finite() {
    let v = p73(14, 8);
    let xs = sample_points(1, 10_000, 9, 2);
    let mut bound: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let y = 2f64.powi(-((i % 12) as i32));
        let s = v.eval(*x, y).unwrap();
        assert!(s.jet.value > 0.0 && s.jet.value.is_finite());
        bound = bound.max(y * s.jet.gradient.norm() / s.jet.value);
    }
    assert!(bound.is_finite() && bound < 2.0, "{bound}");
}

#[test]
fn lebesgue_matches_interval_formula() {
    let w = 8;
    let v = PoissonExtension::new(CascadeMeasure::lebesgue(1, 12, w).unwrap()).unwrap();
    let probes = sample_points(1, 100, 4, 3);
    for (i, p) in probes.iter().enumerate() {
        let x = 8.0 * p[0] - 4.0;
        let y = 2f64.powi(-((i % 9) as i32));
        let s = v.eval([x, 0.0], y).unwrap();
        let exact = (((w as f64 - x) / y).atan() + ((w as f64 + x) / y).atan()) / PI;
        assert!((s.jet.value - exact).abs() < 1e-6, "{x} {y}");
        assert!((s.jet.value - 1.0).abs() <= s.truncation_bound + 1e-6);
    }
}

#[test]
fn log_laplacian_identity() {
    // Δ log v = -|∇v|²/v², from the Hessian and by finite differences of log v;
    // differences need the exact leaf sum, since the tree walk's aggregation
    // switches with position
    let v = p73(10, 4).with_theta(0.0).unwrap();
    for (i, x) in sample_points(1, 50, 6, 4).iter().enumerate() {
        let y = 2f64.powi(-((1 + i % 7) as i32));
        let j = v.jet(*x, y).unwrap();
        let g2 = j.gradient.norm().powi(2) / (j.value * j.value);
        let lap_v = j.hessian[0][0] + j.hessian[2][2];
        assert!(lap_v.abs() < 1e-6 * j.value / (y * y));
        let h = 1e-3 * y;
        let lv = |dx: f64, dy: f64| v.jet([x[0] + dx, 0.0], y + dy).unwrap().value.ln();
        let fd = (lv(h, 0.0) + lv(-h, 0.0) + lv(0.0, h) + lv(0.0, -h) - 4.0 * lv(0.0, 0.0)) / (h * h);
        assert!((fd + g2).abs() <= 1e-3 * g2.max(1.0 / (y * y) * 1e-3), "{fd} {g2}");
    }
}

#[test]
fn square_function_ratio_is_bracketed() {
    let v = p73(14, 8);
    let y = 2f64.powi(-10);
    let ratios: Vec<f64> = sample_points(1, 40, 8, 5)
        .iter()
        .map(|x| a_squared_v(&v, *x, y).unwrap() / -y.ln())
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    assert!(lo > 0.0 && hi < 2.0, "{lo} {hi}");
}

#[test]
fn log_v_lil_median_is_bounded() {
    // the guard needs log(1/y) > e^e, so go below 2^-22 with a deep cascade
    let v = p73(26, 8);
    let y = 2f64.powi(-24);
    let mut ratios: Vec<f64> = sample_points(1, 200, 12, 6)
        .iter()
        .map(|x| log_v_lil_ratio(&v, *x, y).unwrap())
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = ratios[100];
    assert!(median <= 10.0, "{median}");
    assert!(log_v_lil_ratio(&v, [0.5, 0.0], 2f64.powi(-12)).is_err());
}

#[test]
fn point_mass_is_an_illustrative_non_example() {
    let v = PoissonExtension::point_mass(1).unwrap();
    // log v = L - log π and A² = L, so the numerator is 2L - log π
    for k in [30, 60, 120] {
        let y = 2f64.powi(-k);
        let l = -y.ln();
        let num = lil_lab_core::cascade::log_v_lil_numerator(&v, [0.0, 0.0], y).unwrap();
        assert!((num - (2.0 * l - PI.ln())).abs() < 1e-6 * l);
        assert!(log_v_lil_ratio(&v, [0.0, 0.0], y).unwrap() > 10.0);
    }
}
