//! Signal region detection for genome-wide association scans.
//!
//! A null GLM is fitted once; marginal score statistics and multiplier
//! bootstrap pseudo-scores feed a binary search with level-specific
//! thresholds (sBiRS). dBiRS runs the same search on blocks of variants and
//! combines the per-block summaries centrally.

pub mod cli;
pub mod dbirs;
pub mod error;
pub mod evaluate;
pub mod family;
pub mod io;
pub mod null_model;
pub mod region;
pub mod sbirs;
pub mod score;
pub mod simulate;

pub use dbirs::{run_dbirs, BlockResult, DbirsConfig, DbirsOutcome};
pub use error::{Error, Result};
pub use family::Family;
pub use null_model::{fit_null, CovariateMatrix, NullModel};
pub use region::Region;
pub use sbirs::{run_sbirs, DetectionResult, SbirsConfig};
pub use score::{compute_score_set, GenotypeMatrix, ScoreSet};
