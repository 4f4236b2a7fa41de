//! Face identification from a handful of randomly sampled, edge-dense
//! blocks described by local directional patterns, directional run counts
//! and co-occurrence texture statistics.
//!
//! ```no_run
//! use blockface::{extract_signature, classify, load_gray, MatchConfig, PipelineParams};
//!
//! let params = PipelineParams::default();
//! let enrolled = extract_signature(&load_gray("s1/1.pgm")?, "s1/1", "s1", &params)?;
//! let probe = extract_signature(&load_gray("probe.pgm")?, "probe", "", &params)?;
//! let result = classify(&probe, &[enrolled], &MatchConfig::default())?;
//! println!("{}", result.prediction);
//! # Ok::<(), blockface::Error>(())
//! ```

pub mod blocks;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod imaging;
pub mod matching;
pub mod morph_runs;
pub mod texture_glcm;
pub mod texture_ldp;

pub use blocks::{
    sample_significant_blocks, BlockSelectConfig, BlockSelection, BlockSpec, SelectedBlock, RNG_ALGORITHM,
};
pub use error::{Error, Result};
pub use evaluation::{
    confusion, metrics, run_experiment, ConfusionCounts, Dataset, ExperimentConfig, ExperimentReport, Metrics,
    SplitConfig, Trial,
};
pub use features::{extract_signature, BlockFeature, FaceSignature, FeatureParams, PipelineParams, FEATURE_LEN};
pub use imaging::{load_gray, preprocess, BinaryImage, GrayImage, PreprocessConfig, Preprocessed};
pub use matching::{
    chi_square, classify, image_dissimilarity, Aggregation, MatchConfig, MatchResult, Prediction, RankedMatch,
    RejectReason,
};
