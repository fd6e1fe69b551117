use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("stiffness tensor is not positive definite (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },
    #[error("invalid elastic moduli: {0}")]
    InvalidModuli(String),
    #[error("matrix is not a proper rotation (orthogonality defect {0:e})")]
    NotRotation(f64),
    #[error("density must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("horizontal covector must be non-zero and tangential")]
    InvalidDirection,
    #[error("leading coefficient of the matrix polynomial is singular")]
    SingularLeadingCoefficient,
    #[error("contour quadrature did not converge ({nodes} nodes)")]
    ContourFailure { nodes: usize },
    #[error("polynomial has (nearly) real spectrum: min |Im| = {min_im:e}")]
    NearRealSpectrum { min_im: f64 },
    #[error("speed {c} is not subsonic (limiting speed {c_inf})")]
    Supersonic { c: f64, c_inf: f64 },
    #[error("no subsonic surface wave for this direction")]
    NoSubsonicWave,
    #[error("secular root {c_r} lies too close to the limiting speed {c_inf}")]
    NearSonicRoot { c_r: f64, c_inf: f64 },
    #[error("null space of the impedance tensor is not one-dimensional")]
    RankDeficiencyAmbiguous,
    #[error("Sylvester equation is singular")]
    SingularSylvester,
    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),
    #[error("point outside the chart domain")]
    OutOfDomain,
    #[error("depth {depth} is beyond the focal distance {focal}")]
    BeyondFocalDistance { depth: f64, focal: f64 },
    #[error("unsupported request: {0}")]
    Unsupported(String),
    #[error("ODE step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("kernel drift {0:e} exceeds tolerance")]
    KernelDrift(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::InvalidModuli(_)
            | Error::NotPositiveDefinite { .. }
            | Error::NotRotation(_)
            | Error::NonPositiveDensity(_)
            | Error::InvalidDirection => 1,
            _ => 2,
        }
    }
}
