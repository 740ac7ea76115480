use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("eigenvalue or uniform bound {0} is not positive")]
    NonPositiveEigenvalue(f64),
    #[error("component weight {0} is not positive")]
    NonPositiveWeight(f64),
    #[error("weights sum to {0}, not 1")]
    WeightsDoNotSumToOne(f64),
    #[error("atom at {0} appears twice")]
    DuplicateAtom(f64),
    #[error("uniform component [{0}, {1}] is empty")]
    DegenerateUniform(f64, f64),
    #[error("comb component {index} has eigenvalue {eigenvalue} and weight {weight}")]
    InvalidComb { index: usize, eigenvalue: f64, weight: f64 },
    #[error("aspect ratio gamma = 1 is excluded")]
    GammaEqualsOne,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid precision: {0}")]
    InvalidPrecision(String),
    #[error("v = {re} + {im}i is a pole of the inverse map")]
    PoleHit { re: f64, im: f64 },
    #[error("v = 0 is outside the domain of the inverse map")]
    ZeroV,
    #[error("fixed-point iteration stopped after {iterations} iterations with residual {residual}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("no sign change of z' found near the lowest pole")]
    NoSignChange,
    #[error("z'(v) vanished at x = {x}")]
    CriticalPoint { x: f64 },
    #[error("could not obtain a starting value at x = {x}")]
    FpaStartFailure { x: f64 },
    #[error("could not obtain the starting value of the contour: {0}")]
    StartFailure(String),
    #[error("contour meets the support near {re} + {im}i")]
    ContourTouchesSupport { re: f64, im: f64 },
    #[error("h is not finite at x = {x}")]
    NonFiniteH { x: f64 },
    #[error("imaginary part {imag} exceeds the tolerance {tolerance}")]
    ImaginaryResidue { imag: f64, tolerance: f64 },
    #[error("cubic leading coefficient {0} vanishes")]
    DegenerateCubic(f64),
    #[error("dimension {p} exceeds the cap {cap}")]
    DimensionTooLarge { p: usize, cap: usize },
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("density {value} at x = {x} is negative beyond rounding")]
    NegativeDensity { x: f64, value: f64 },
}

impl Error {
    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveEigenvalue(_) => "NonPositiveEigenvalue",
            Error::NonPositiveWeight(_) => "NonPositiveWeight",
            Error::WeightsDoNotSumToOne(_) => "WeightsDoNotSumToOne",
            Error::DuplicateAtom(_) => "DuplicateAtom",
            Error::DegenerateUniform(..) => "DegenerateUniform",
            Error::InvalidComb { .. } => "InvalidComb",
            Error::GammaEqualsOne => "GammaEqualsOne",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::InvalidPrecision(_) => "InvalidPrecision",
            Error::PoleHit { .. } => "PoleHit",
            Error::ZeroV => "ZeroV",
            Error::NotConverged { .. } => "NotConverged",
            Error::NoSignChange => "NoSignChange",
            Error::CriticalPoint { .. } => "CriticalPoint",
            Error::FpaStartFailure { .. } => "FpaStartFailure",
            Error::StartFailure(_) => "StartFailure",
            Error::ContourTouchesSupport { .. } => "ContourTouchesSupport",
            Error::NonFiniteH { .. } => "NonFiniteH",
            Error::ImaginaryResidue { .. } => "ImaginaryResidue",
            Error::DegenerateCubic(_) => "DegenerateCubic",
            Error::DimensionTooLarge { .. } => "DimensionTooLarge",
            Error::StepSizeUnderflow { .. } => "StepSizeUnderflow",
            Error::TooManySteps { .. } => "TooManySteps",
            Error::NegativeDensity { .. } => "NegativeDensity",
        }
    }

    /// True for rejected inputs, false for failures of a numerical method.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveEigenvalue(_)
                | Error::NonPositiveWeight(_)
                | Error::WeightsDoNotSumToOne(_)
                | Error::DuplicateAtom(_)
                | Error::DegenerateUniform(..)
                | Error::InvalidComb { .. }
                | Error::GammaEqualsOne
                | Error::InvalidArgument(_)
                | Error::InvalidPrecision(_)
                | Error::DimensionTooLarge { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
