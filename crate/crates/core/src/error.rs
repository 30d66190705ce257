use core::fmt;

/// Every failure the core can report.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// `Lm² >= Ls·Lr`: the leakage coefficient is not in (0, 1).
    SingularLeakage { sigma: f64 },
    /// A machine parameter is non-positive or non-finite.
    InvalidParameter(&'static str),
    /// A state derivative or integrated state is NaN or infinite.
    NonFiniteState,
    /// Reference flux of zero leaves the torque-producing current undefined.
    ZeroFlux,
    EmptyBank,
    LengthMismatch { expected: usize, found: usize },
    DimensionMismatch { expected: usize, found: usize },
    /// `C·B` is (numerically) singular: the surface is not actuated.
    SingularCB { det: f64 },
    /// The Lyapunov operator is singular (closed loop is marginally stable).
    SingularLyapunov,
    NonPositiveWeight { index: usize },
    TooShortTrace { len: usize },
    EmptyTrace,
    /// A configuration value violates its invariant; the message names it.
    Invalid(&'static str),
    /// An error raised while simulating, tagged with the step time.
    AtTime { t: f64, source: alloc::boxed::Box<Error> },
}

impl Error {
    pub(crate) fn at(self, t: f64) -> Self {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime { t, source: alloc::boxed::Box::new(e) },
        }
    }

    /// The innermost error, with any timestamp annotation stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            e => e,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::SingularLeakage { sigma } => {
                write!(f, "leakage coefficient sigma = {sigma} is not in (0, 1); need Lm^2 < Ls*Lr")
            }
            Error::InvalidParameter(name) => write!(f, "machine parameter {name} must be finite and > 0"),
            Error::NonFiniteState => write!(f, "state became non-finite"),
            Error::ZeroFlux => write!(f, "flux reference must be non-zero"),
            Error::EmptyBank => write!(f, "sub-model bank is empty"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::SingularCB { det } => write!(f, "C*B is singular (det = {det:e})"),
            Error::SingularLyapunov => write!(f, "Lyapunov equation is singular (marginally stable closed loop)"),
            Error::NonPositiveWeight { index } => write!(f, "Lyapunov weight {index} must be > 0"),
            Error::TooShortTrace { len } => write!(f, "trace has {len} samples, need at least 2"),
            Error::EmptyTrace => write!(f, "trace is empty"),
            Error::Invalid(what) => write!(f, "invalid value: {what}"),
            Error::AtTime { t, source } => write!(f, "at t = {t}: {source}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
