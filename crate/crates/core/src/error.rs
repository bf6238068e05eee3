use thiserror::Error;

/// Library-wide error type.
///
/// Variants are grouped into input/configuration problems and estimation
/// infeasibilities; [`Error::exit_code`] maps them onto the CLI convention
/// (2 = input error, 3 = estimation infeasible).
#[derive(Debug, Error)]
pub enum Error {
    // --- input / configuration ---
    #[error("column '{0}' not found in header")]
    MissingColumn(String),
    #[error("row {row}: non-numeric value '{value}' in column '{column}'")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: non-finite value in column '{column}'")]
    NonFiniteCell { row: usize, column: String },
    #[error("row {row}: treatment take-up must be 0 or 1, got '{value}'")]
    InvalidTakeup { row: usize, value: String },
    #[error("row {row}: unknown arm label '{label}'")]
    UnknownArm { row: usize, label: String },
    #[error("no data rows found")]
    EmptyFile,
    #[error("site '{site}': observed covariate '{column}' is not constant within the site")]
    NonConstantCovariate { site: String, column: String },
    #[error("focal arm '{0}' is not in the declared treatment arms")]
    UnknownFocalArm(String),
    #[error("all {0} sites were dropped by the per-arm count filter")]
    AllSitesDropped(usize),
    #[error("min_per_arm must be at least 2, got {0}")]
    MinPerArmTooSmall(usize),
    #[error("custom weight missing for site '{0}'")]
    MissingCustomWeight(String),
    #[error("custom weight for site '{0}' must be strictly positive")]
    NonPositiveCustomWeight(String),
    #[error("unknown predictor column '{0}'")]
    UnknownCovariate(String),
    #[error("unknown mediator '{0}'")]
    UnknownMediator(String),
    #[error("duplicate predictor name '{0}'")]
    DuplicatePredictorName(String),
    #[error("predictor spec is empty")]
    EmptyPredictorSpec,
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    // --- estimation ---
    #[error("site '{site}': arm '{arm}' has {n} units, need at least 2")]
    ArmTooSmall { site: String, arm: String, n: usize },
    #[error("need at least {need} sites, have {have}")]
    TooFewSites { need: usize, have: usize },
    #[error("predictor '{predictor}' needs data that is missing: {what}")]
    PredictorNeedsData { predictor: String, what: String },
    #[error(
        "aggregate first stage {value:.3e} is within {floor:.0e} of zero; \
         LATE quantities are not identified"
    )]
    WeakFirstStage { value: f64, floor: f64 },
    #[error(
        "EB variance estimate is negative ({0:.6}); report the point estimate \
         with its confidence interval instead of a ratio"
    )]
    NegativeEbVariance(f64),
    #[error("mean estimate is zero; ratio undefined")]
    ZeroMeanEstimate,
    #[error("variance must be strictly positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("truncation bounds must satisfy lo < 0 < hi, got [{0}, {1}]")]
    BadTruncationBounds(f64, f64),
    #[error(
        "moment matrix is singular or ill-conditioned \
         (reciprocal condition {rcond:.3e}, floor {floor:.0e})"
    )]
    IllConditioned { rcond: f64, floor: f64 },
    #[error("linear solve residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    SolveResidual { residual: f64, tol: f64 },
    #[error("corrected variance of predictor '{0}' is not positive; the predictor is degenerate")]
    DegeneratePredictor(String),
    #[error("GCV denominator vanishes at lambda = {0:.6e}")]
    GcvDenominatorZero(f64),
    #[error("no lambda in the grid yields a well-conditioned moment matrix")]
    NoFeasibleLambda,
    #[error("lambda grid is empty")]
    EmptyLambdaGrid,
    #[error("bootstrap needs at least 2 replications, got {0}")]
    TooFewBootstrapReps(usize),
    #[error("bootstrap: {skipped} of {total} replicates were infeasible (limit 10%)")]
    BootstrapTooManySkips { skipped: usize, total: usize },
    #[error("denominator of the LATE variance is not positive ({0:.6e})")]
    NonPositiveLateDenominator(f64),
    #[error("simulation: {failed} of {total} replications failed estimator '{estimator}' (limit 10%)")]
    TooManyEstimatorFailures {
        estimator: String,
        failed: usize,
        total: usize,
    },
    #[error("simulation config: {0}")]
    Dgp(String),
    #[error("enumeration supports at most {max} units, site has {n}")]
    SiteTooLargeToEnumerate { n: usize, max: usize },
}

impl Error {
    /// CLI exit code for this error: 2 for input/config problems, 3 for
    /// estimation infeasibilities.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            MissingColumn(_)
            | NonNumericCell { .. }
            | NonFiniteCell { .. }
            | InvalidTakeup { .. }
            | UnknownArm { .. }
            | EmptyFile
            | NonConstantCovariate { .. }
            | UnknownFocalArm(_)
            | AllSitesDropped(_)
            | MinPerArmTooSmall(_)
            | MissingCustomWeight(_)
            | NonPositiveCustomWeight(_)
            | UnknownCovariate(_)
            | UnknownMediator(_)
            | DuplicatePredictorName(_)
            | EmptyPredictorSpec
            | Config(_)
            | Io(_)
            | Csv(_)
            | Dgp(_) => 2,
            _ => 3,
        }
    }
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
