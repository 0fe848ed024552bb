use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    Grid(String),

    #[error("mass degeneracy at particle {index}: m = {mass}")]
    MassDegeneracy { index: usize, mass: f64 },

    #[error("degenerate quantile: values not strictly increasing at index {index}")]
    DegenerateQuantile { index: usize },

    #[error("numerical blowup at t = {t}: {detail}")]
    Blowup { t: f64, detail: String },

    #[error("monotonicity violated at t = {t}: {count} inversions, max {magnitude:e}")]
    MonotoneReject { t: f64, count: usize, magnitude: f64 },

    #[error("ill-conditioned inversion: f({k}) = {value:e} is below the floor")]
    IllConditioned { k: f64, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("Picard iteration did not converge after {iterations} iterations (last gap {last_gap:e})")]
    Divergence { iterations: usize, last_gap: f64 },
}

impl Error {
    /// True for errors caused by numerics rather than by input validation.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Blowup { .. }
                | Error::MassDegeneracy { .. }
                | Error::MonotoneReject { .. }
                | Error::IllConditioned { .. }
                | Error::Divergence { .. }
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
