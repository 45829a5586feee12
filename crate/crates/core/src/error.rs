use thiserror::Error;

/// Errors raised by jet arithmetic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("jet order {requested} exceeds the configured maximum {max}")]
    Order { requested: usize, max: usize },
    #[error("expression is not polynomial: {0}")]
    NotPolynomial(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable `{name}` at offset {offset}")]
    UnknownVariable { name: String, offset: usize },
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("scene file line {line}: {message}")]
    SceneFile { line: usize, message: String },
    #[error("immersion rank deficient at t = {t:?}")]
    Rank { t: Vec<f64> },
    #[error("non-degeneracy determinant {det:e} vanishes (scale {scale:e})")]
    Degenerate { det: f64, scale: f64 },
    #[error("frame basis is singular (determinant {det:e})")]
    SingularBasis { det: f64 },
    #[error("empty grid: {0}")]
    EmptyGrid(String),
    #[error("point is not on the discriminant: {0}")]
    NotOnDiscriminant(String),
    #[error("jet order too small to decide; need at least {min_order}")]
    UnresolvedOrder { min_order: usize },
    #[error("corank {corank} is too high to classify")]
    CorankTooHigh { corank: usize },
    #[error("germ is not an A_k point (class {class})")]
    NotAkPoint { class: String },
    #[error("osculating plane degenerate: nu(gamma'') = {value:e}")]
    OsculatingDegenerate { value: f64 },
    #[error("sigma vanishes at the point ({sigma:e}); no regression point")]
    SigmaZero { sigma: f64 },
    #[error("hypersurface is degenerate (Hessian determinant {det:e})")]
    DegenerateHypersurface { det: f64 },
    #[error("series reversion failed: {0}")]
    ReversionFailure(String),
    #[error("hyperplane section is degenerate (determinant {det:e})")]
    DegenerateSection { det: f64 },
    #[error("need at least {needed} sections, got {got}")]
    NeedMoreSections { needed: usize, got: usize },
    #[error("curvature {value:e} is too close to the threshold {threshold:e} to decide")]
    InconclusiveTolerance { value: f64, threshold: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl Error {
    /// True for errors caused by the geometry of the input rather than its syntax.
    pub fn is_degeneracy(&self) -> bool {
        !matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownVariable { .. }
                | Error::Dimension(_)
                | Error::SceneFile { .. }
                | Error::EmptyGrid(_)
                | Error::Invalid(_)
                | Error::NeedMoreSections { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
