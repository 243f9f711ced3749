use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type covering input validation, numerical failures, and
/// mismatched inputs across pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("duplicate region id {0:?}")]
    DuplicateRegion(String),
    #[error("region {id:?} has nonpositive population {population}")]
    NonpositivePopulation { id: String, population: i64 },
    #[error("parent chain of region {0:?} is cyclic or deeper than two levels")]
    BadParentChain(String),
    #[error("unknown region id {0:?}")]
    UnknownRegion(String),
    #[error("negative mobility volume {volume} on {origin} -> {destination}")]
    NegativeVolume {
        origin: String,
        destination: String,
        volume: f64,
    },
    #[error("negative case count {count} for region {region} on {date}")]
    NegativeCount {
        region: String,
        date: NaiveDate,
        count: i64,
    },
    #[error("no mobility reduction covers {0} at the national level")]
    DateNotCovered(NaiveDate),
    #[error("case data ends {end}; exposures on {date} need reports through {needed}")]
    InsufficientLookahead {
        date: NaiveDate,
        needed: NaiveDate,
        end: NaiveDate,
    },
    #[error("{date} is outside the loaded case window ending {end}")]
    DateOutOfRange { date: NaiveDate, end: NaiveDate },
    #[error("prevalence on {date} is {value}; must be positive")]
    NonpositivePrevalence { date: NaiveDate, value: f64 },
    #[error("no tested infectious individuals on {0}; tested fraction is undefined")]
    ZeroTestedInfectious(NaiveDate),
    #[error("inferred burden exceeds population of region {region} on {date} (S = {susceptible:.3})")]
    NegativeSusceptible {
        region: String,
        date: NaiveDate,
        susceptible: f64,
    },
    #[error("all covariates are zero; transmission rates are not identifiable")]
    DegenerateDesign,
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },
    #[error("records were fitted on different data: {0}")]
    MismatchedData(String),
    #[error("local contact fraction p is undefined: beta_loc = 0 with beta_mob > 0")]
    UndefinedLocalFraction,
    #[error("{dropped} of {total} bootstrap replicas failed to refit")]
    TooManyDroppedReplicas { dropped: usize, total: usize },
    #[error("region sets differ: {0}")]
    MismatchedRegions(String),
    #[error("issue dates differ between forecast sets")]
    MismatchedDates,
    #[error("rank correlation is undefined when all values are identical")]
    DegenerateRanks,
    #[error("only {0} overlapping points after shifting; need at least 10")]
    InsufficientOverlap(usize),
    #[error("estimates missing for {0}")]
    MissingEstimates(NaiveDate),
    #[error("config error: {0}")]
    Config(String),
}
