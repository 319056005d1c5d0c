use lil_lab_core::martingale::{gauge_scales, random_path};
use lil_lab_core::GaugeFunction;

const PATHS: u64 = 2000;
const DEPTH: usize = 1 << 14;

#[test]
fn unit_increments_obey_the_lil() {
    let scales = vec![1.0; DEPTH];
    let mut terminal = Vec::new();
    let mut exceed = 0;
    for id in 0..PATHS {
        let p = random_path(1, &scales, 7, id).unwrap();
        assert_eq!(*p.quadratic_variation.last().unwrap(), DEPTH as f64);
        if p.max_ratio(1 << 10, DEPTH).unwrap() > 3.0 {
            exceed += 1;
        }
        terminal.push(p.lil_ratio(DEPTH).unwrap());
    }
    terminal.sort_by(f64::total_cmp);
    let median = terminal[terminal.len() / 2];
    assert!((0.2..=2.0).contains(&median), "median {median}");
    assert!((exceed as f64) < 0.01 * PATHS as f64, "exceed {exceed}");
}

#[test]
fn gauge_scaled_increments_stay_bounded() {
    // ⟨T⟩ = Σ 1/(1 + k log 2) is still 15.03 < e^e at n = 2^16, so the ratio
    // only exists past that point
    let psi = GaugeFunction::shifted_log_power(0.5, 1.0).unwrap();
    let scales = gauge_scales(&psi, 1 << 17);
    let paths = 200;
    let mut exceed = 0;
    for id in 0..paths {
        let p = random_path(1, &scales, 3, id).unwrap();
        assert!(p.max_ratio(1 << 10, 1 << 16).is_none());
        if p.max_ratio(1 << 16, 1 << 17).unwrap() > 3.0 {
            exceed += 1;
        }
    }
    assert!((exceed as f64) < 0.01 * paths as f64, "exceed {exceed}");
}
