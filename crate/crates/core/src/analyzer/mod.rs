//! Corpus statistics, sampling, filter sweeps and cleaner previews.

mod debug;
mod sample;
mod stats;

pub use debug::{
    preview_clean, sweep_filter, DebugError, MatchCase, MatchCaseReport, PreviewRequest, SweepRequest, SweepResult,
    DEFAULT_MAX_CASES, DEFAULT_SAMPLE,
};
pub use sample::{reservoir, sample, sample_indices};
pub use stats::{
    compare_corpora, compute_stats, diff_stats, CorpusStats, FeatureDiff, FeatureStats, Histogram, StatsDiff,
    StatsModels, StatsOptions, DEFAULT_BINS, LOG_SCALE_RATIO,
};
