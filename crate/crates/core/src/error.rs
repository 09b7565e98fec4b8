use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearityError {
    #[error("invalid nonlinearity parameter: {0}")]
    BadParameter(String),
    #[error("invalid nonlinearity selection: {0}")]
    Selection(String),
    #[error("invalid truncation sequence: {0}")]
    InvalidTruncation(String),
    #[error("no admissible abscissa in [k,2k] for k = {k}")]
    NoAdmissibleAbscissa { k: f64 },
    #[error("q = {q} with d = {d}: q >= 2*={two_star} violates the growth hypothesis")]
    Supercritical { q: f64, d: usize, two_star: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("field length {got} does not match grid size {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },
    #[error("time step {dt} violates the stability bound dt <= {bound}")]
    Cfl { dt: f64, bound: f64 },
    #[error("blow-up: non-finite state after t = {last_valid_t}")]
    BlowUp { last_valid_t: f64 },
    #[error("constant estimate for {name} is unbounded (sup kept growing under three successive refinements)")]
    Unbounded { name: String },
    #[error("constant estimate for {name} is unstable under sample doubling ({coarse} vs {fine})")]
    Unstable { name: String, coarse: f64, fine: f64 },
    #[error("no admissible shift A <= {max} found")]
    NoShift { max: f64 },
    #[error("trajectories are incompatible: {0}")]
    Mismatch(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}
