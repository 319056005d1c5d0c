use core::fmt;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    Domain { what: &'static str, value: f64 },
    /// The quantity feeding an iterated logarithm is at or below `e^e`,
    /// so the LIL normalisation is undefined.
    LilRegime { quantity: f64 },
    /// Adaptive quadrature did not reach its tolerance.
    Quadrature { partial: f64, error_estimate: f64 },
    /// Height below the resolution floor of a discretised measure.
    Resolution { height: f64, floor: f64 },
    /// `|f|` is numerically 1 on the evaluation path.
    Saturation { partial: f64 },
    /// A structural precondition does not hold.
    Precondition(&'static str),
    /// A requested construction exceeds the configured size limits.
    Config(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::LilRegime { quantity } => {
                write!(f, "height too large for LIL regime (square function {quantity} <= e^e)")
            }
            Error::Quadrature {
                partial,
                error_estimate,
            } => write!(
                f,
                "quadrature did not converge (partial {partial}, error estimate {error_estimate})"
            ),
            Error::Resolution { height, floor } => {
                write!(f, "height {height} below resolution floor {floor}")
            }
            Error::Saturation { partial } => {
                write!(f, "|f| saturates at 1 on the path (partial value {partial})")
            }
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

/// `e^e`, the threshold above which `log log` of a quantity exceeds 1.
pub const E_TO_E: f64 = 15.154_262_241_479_262;

pub(crate) fn check_height(y: f64) -> Result<()> {
    if y > 0.0 && y <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "height",
            value: y,
        })
    }
}
