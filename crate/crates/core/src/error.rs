use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidSpec(String),

    #[error("spectral leakage: waveform spans {periods} periods of {fundamental_hz} Hz, not an integer count")]
    Leakage { periods: f64, fundamental_hz: f64 },

    #[error("harmonic index {index} outside retained range 1..={max}")]
    HarmonicOutOfRange { index: usize, max: usize },

    #[error("frequency {freq_hz} Hz is not on the analysis grid (resolution {resolution_hz} Hz)")]
    OffGrid { freq_hz: f64, resolution_hz: f64 },

    #[error("underdetermined calibration ({detail}); free parameters: {}", free.join(", "))]
    Underdetermined { free: Vec<String>, detail: String },

    #[error("simulation unstable at t = {time_s:e} s: {reason}")]
    Unstable { time_s: f64, reason: String },

    #[error("second derivative has no sign change inside [{lo}, {hi}]")]
    LinearityNotFound {
        lo: f64,
        hi: f64,
        /// Fitted second-derivative curve as (x, SD(x)) pairs.
        sd_curve: Vec<(f64, f64)>,
    },

    #[error("missing tone at {0} Hz")]
    MissingTone(f64),

    #[error("symbol synchronisation failed: correlation peak {peak:.3} below {threshold:.3}")]
    SyncFailure { peak: f64, threshold: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
