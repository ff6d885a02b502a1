use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
///
/// Variants marked as hypothesis failures correspond to inputs that violate
/// the nondegeneracy assumptions of the degree formula (not-Morse `K`,
/// vanishing first condition, near-zero least eigenvalue). The CLI maps
/// those to exit code 2 and everything else to exit code 1.
#[derive(Debug)]
pub enum Error {
    NotMorse(String),
    KNotPositive(f64),
    ConditionOneViolated { index: usize, value: f64 },
    DegenerateSubset { subset: Vec<usize>, mu: f64 },
    QuadratureDiverged { last: f64, prev: f64 },
    NewtonDiverged { context: String, trace: Vec<f64> },
    ChartCutPoint,
    GreenSingularity,
    Parse { line: usize, message: String },
    DegreeOverflow { degree: u32, cap: u32 },
    InvalidArgument(String),
    NotRegularValue(String),
    BoundaryZero(f64),
    NoBlowup,
    LinearSolve(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotMorse(msg) => write!(f, "K is not a Morse function: {msg}"),
            Error::KNotPositive(v) => write!(
                f,
                "K must be strictly positive on the sphere (min sampled value {v:.6e})"
            ),
            Error::ConditionOneViolated { index, value } => write!(
                f,
                "condition (1.3) vanishes at critical point {index}: value {value:.6e}"
            ),
            Error::DegenerateSubset { subset, mu } => write!(
                f,
                "degenerate configuration: |mu(M(S))| = {mu:.6e} below tolerance for subset {subset:?}"
            ),
            Error::QuadratureDiverged { last, prev } => write!(
                f,
                "quadrature failed to converge: last estimates {last:.12e}, {prev:.12e}"
            ),
            Error::NewtonDiverged { context, trace } => {
                write!(f, "Newton iteration diverged: {context} (residual trace {trace:?})")
            }
            Error::ChartCutPoint => write!(f, "point at the cut locus of the chart"),
            Error::GreenSingularity => {
                write!(f, "evaluation at the Green function singularity p = q")
            }
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::DegreeOverflow { degree, cap } => {
                write!(f, "monomial degree {degree} exceeds cap {cap}")
            }
            Error::InvalidArgument(msg) => write!(f, "{msg}"),
            Error::NotRegularValue(msg) => {
                write!(f, "degree target is not a regular value: {msg}")
            }
            Error::BoundaryZero(v) => {
                write!(f, "map vanishes on the box boundary (min |F - target| = {v:.6e})")
            }
            Error::NoBlowup => {
                write!(f, "no blow-up detected: peak heights do not grow along the schedule")
            }
            Error::LinearSolve(msg) => write!(f, "linear solver failed: {msg}"),
            Error::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl Error {
    /// True for errors that signal a violated hypothesis of the degree
    /// theorem rather than a numerical or I/O failure.
    pub fn is_hypothesis_failure(&self) -> bool {
        matches!(
            self,
            Error::NotMorse(_)
                | Error::KNotPositive(_)
                | Error::ConditionOneViolated { .. }
                | Error::DegenerateSubset { .. }
        )
    }
}
