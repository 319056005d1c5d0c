//! Fitted constants for inequalities whose constants are only known to exist.
//!
//! A constant is fitted on a calibration sample as twice the largest observed
//! ratio (plus a small absolute floor for rounding noise) and then checked on
//! a disjoint validation sample.

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

/// Absolute floor added to every fitted constant.
pub const FIT_FLOOR: f64 = 1e-9;

/// Safety factor applied to the calibration maximum.
pub const FIT_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedConstant {
    pub constant: f64,
    pub calibration_max: f64,
    pub validation_max: f64,
    pub holds: bool,
}

/// Fits `C` on `calibration` ratios and checks `validation` ratios against it.
/// Non-finite ratios make the check fail.
pub fn fit_and_validate(calibration: &[f64], validation: &[f64]) -> FittedConstant {
    let max = |xs: &[f64]| {
        xs.iter()
            .fold(0.0f64, |m, &v| if v.is_finite() { m.max(v) } else { f64::INFINITY })
    };
    let calibration_max = max(calibration);
    let validation_max = max(validation);
    let constant = FIT_FACTOR * calibration_max + FIT_FLOOR;
    FittedConstant {
        constant,
        calibration_max,
        validation_max,
        holds: constant.is_finite() && validation_max <= constant,
    }
}
