use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Requested subspace exceeds the configured basis-state cap.
    Capacity {
        modes: usize,
        photons: usize,
        size: u128,
        cap: usize,
    },
    /// Mismatched sizes between operands.
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// State and operator live on different bases.
    BasisMismatch,
    /// An input that must have nonzero norm was zero.
    ZeroNorm,
    /// A state vector is not normalized.
    NotNormalized { deviation: f64 },
    /// A circuit references a parameter slot the vector does not cover,
    /// or declares a slot that no gate uses.
    BadSlot { slot: usize, provided: usize },
    /// A matrix failed a structural check.
    NotUnitary { deviation: f64 },
    /// A density operator failed a structural check.
    NotDensity { what: &'static str, deviation: f64 },
    /// Filter size does not partition a register.
    FilterShape {
        register: usize,
        size: usize,
        filter: usize,
    },
    /// Image is not an outer product and approximation was not requested.
    NotRankOne { relative_residual: f64 },
    /// Readout binning assigns no detection event to a class.
    EmptyBin { label: u8 },
    /// No coincidence mass left to renormalize over.
    NoEventMass,
    /// Dataset content problem, with a line number when it comes from a file.
    Data {
        line: Option<usize>,
        message: String,
    },
    /// Not enough samples for the requested split.
    InsufficientSamples { need: usize, have: usize },
    /// File I/O failure, with the offending path.
    Io { path: String, message: String },
    /// A non-finite number appeared where finite values are required.
    NonFinite { what: &'static str },
    /// Unknown tag for a stage or strategy.
    InvalidTag { what: &'static str, got: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Capacity {
                modes,
                photons,
                size,
                cap,
            } => write!(
                f,
                "subspace for {modes} modes and {photons} photons has {size} states, above the cap of {cap}"
            ),
            Error::Dimension {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch for {what}: expected {expected}, got {got}"),
            Error::BasisMismatch => write!(f, "state and operator are defined on different bases"),
            Error::ZeroNorm => write!(f, "input has zero norm and cannot be normalized"),
            Error::NotNormalized { deviation } => {
                write!(f, "state is not normalized (deviation {deviation:.3e})")
            }
            Error::BadSlot { slot, provided } => write!(
                f,
                "parameter slot {slot} out of range for a vector of {provided} parameters"
            ),
            Error::NotUnitary { deviation } => {
                write!(f, "matrix is not unitary (deviation {deviation:.3e})")
            }
            Error::NotDensity { what, deviation } => {
                write!(f, "density operator violates {what} (deviation {deviation:.3e})")
            }
            Error::FilterShape {
                register,
                size,
                filter,
            } => write!(
                f,
                "filter size {filter} does not divide register {register} of {size} modes"
            ),
            Error::NotRankOne { relative_residual } => write!(
                f,
                "image is not an outer product (relative residual {relative_residual:.3e}); \
                 pass --nearest-rank1 to encode its best rank-1 approximation"
            ),
            Error::EmptyBin { label } => {
                write!(f, "readout binning assigns no detection event to label {label}")
            }
            Error::NoEventMass => write!(f, "no probability mass on coincidence events"),
            Error::Data { line, message } => match line {
                Some(n) => write!(f, "data error at line {n}: {message}"),
                None => write!(f, "data error: {message}"),
            },
            Error::InsufficientSamples { need, have } => {
                write!(f, "split needs {need} samples but only {have} are available")
            }
            Error::Io { path, message } => write!(f, "io error on {path}: {message}"),
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::InvalidTag { what, got } => write!(f, "invalid {what}: {got:?}"),
        }
    }
}

impl std::error::Error for Error {}
