use core::fmt;

use alloc::string::String;

/// Errors from the simulation, detection, and statistics layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A qubit id was not found in the layout.
    UnknownQubit(u32),
    /// A value that must be finite was NaN or infinite.
    NonFinite(&'static str),
    /// A parameter violated its validity constraint.
    InvalidParameter(String),
    /// Impact events must be sorted by time.
    UnsortedImpacts,
    /// Input trace shorter than the matched-filter template.
    TraceTooShort { trace_len: usize, template_len: usize },
    /// An analysis was asked to run on an empty detection set.
    NoDetections,
    /// Not enough data to perform the requested fit.
    InsufficientData(&'static str),
    /// A fit was structurally under-determined (e.g. a single distinct
    /// abscissa) rather than merely noisy.
    DegenerateFit(&'static str),
    /// Two series that must share a time base have different lengths.
    MisalignedSeries { left: usize, right: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnknownQubit(id) => write!(f, "unknown qubit id {id}"),
            Error::NonFinite(what) => write!(f, "non-finite value for {what}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::UnsortedImpacts => write!(f, "impact events must be sorted by time"),
            Error::TraceTooShort { trace_len, template_len } => write!(
                f,
                "trace of length {trace_len} shorter than template of length {template_len}"
            ),
            Error::NoDetections => write!(f, "no detections to analyze"),
            Error::InsufficientData(what) => write!(f, "insufficient data: {what}"),
            Error::DegenerateFit(what) => write!(f, "degenerate fit: {what}"),
            Error::MisalignedSeries { left, right } => {
                write!(f, "misaligned series lengths: {left} vs {right}")
            }
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidParameter(alloc::format!("{msg}"))
    }
}
