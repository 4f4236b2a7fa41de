//! Per-image pipeline: preprocess, select significant blocks, and describe
//! each block by `[56 LDP | 4 runs | 12 GLCM]` features.

use serde::{Deserialize, Serialize};

use crate::blocks::{sample_significant_blocks, BlockSelectConfig, BlockSpec};
use crate::error::{Error, Result};
use crate::imaging::{preprocess, GrayImage, PreprocessConfig, Preprocessed};
use crate::morph_runs::run_features;
use crate::texture_glcm::{glcm_feature_vector, DEFAULT_DISTANCES, DEFAULT_LEVELS};
use crate::texture_ldp::{ldp_histogram, LDP_BINS, LDP_K};

/// Length of a block feature vector with the default three GLCM distances.
pub const FEATURE_LEN: usize = LDP_BINS + 4 + 4 * DEFAULT_DISTANCES.len();

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub glcm_levels: usize,
    pub glcm_distances: Vec<usize>,
    pub ldp_k: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            glcm_levels: DEFAULT_LEVELS,
            glcm_distances: DEFAULT_DISTANCES.to_vec(),
            ldp_k: LDP_K,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        if !(2..=256).contains(&self.glcm_levels) {
            return Err(Error::config(format!(
                "GLCM levels {} outside [2, 256]",
                self.glcm_levels
            )));
        }
        if self.glcm_distances.is_empty() || self.glcm_distances.contains(&0) {
            return Err(Error::config(
                "GLCM distances must be a non-empty list of positive integers",
            ));
        }
        if self.ldp_k != LDP_K {
            return Err(Error::config(format!(
                "LDP k = {} is not supported (only 3)",
                self.ldp_k
            )));
        }
        Ok(())
    }

    pub fn vector_len(&self) -> usize {
        LDP_BINS + 4 + 4 * self.glcm_distances.len()
    }
}

/// Everything that determines a signature besides the image itself.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub preprocess: PreprocessConfig,
    pub blocks: BlockSelectConfig,
    pub features: FeatureParams,
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.blocks.validate()?;
        self.features.validate()?;
        crate::blocks::block_size(
            self.preprocess.target_width,
            self.preprocess.target_height,
            &self.blocks,
        )
        .map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockFeature {
    #[serde(flatten)]
    pub spec: BlockSpec,
    pub white_count: usize,
    /// Number of pixels that received an LDP code.
    pub interior_count: usize,
    pub vec: Vec<f64>,
}

impl BlockFeature {
    pub fn ldp(&self) -> &[f64] {
        &self.vec[..LDP_BINS]
    }

    pub fn runs(&self) -> &[f64] {
        &self.vec[LDP_BINS..LDP_BINS + 4]
    }

    pub fn glcm(&self) -> &[f64] {
        &self.vec[LDP_BINS + 4..]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceSignature {
    pub image_id: String,
    pub subject_id: String,
    pub width: usize,
    pub height: usize,
    pub blocks: Vec<BlockFeature>,
    /// Fewer blocks than requested were found.
    pub shortfall: bool,
    pub params: PipelineParams,
}

impl FaceSignature {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Largest block dimension, the default spatial gate radius.
    pub fn block_extent(&self) -> Option<usize> {
        self.blocks.iter().map(|b| b.spec.u.max(b.spec.v)).max()
    }
}

pub fn extract_signature(
    img: &GrayImage,
    image_id: impl Into<String>,
    subject_id: impl Into<String>,
    params: &PipelineParams,
) -> Result<FaceSignature> {
    extract_signature_with_stages(img, image_id, subject_id, params).map(|(sig, _)| sig)
}

/// Like [`extract_signature`], also returning the preprocessing rasters.
pub fn extract_signature_with_stages(
    img: &GrayImage,
    image_id: impl Into<String>,
    subject_id: impl Into<String>,
    params: &PipelineParams,
) -> Result<(FaceSignature, Preprocessed)> {
    params.validate()?;
    let image_id = image_id.into();
    let stages = preprocess(img, &params.preprocess)?;
    let selection = sample_significant_blocks(&stages.binary, &params.blocks)?;
    if selection.blocks.is_empty() {
        log::warn!("{image_id}: no significant blocks found");
    }

    let mut blocks = Vec::with_capacity(selection.blocks.len());
    for selected in &selection.blocks {
        let BlockSpec { x, y, u, v } = selected.spec;
        let gray = stages.resized.region(x, y, u, v)?;
        let binary = stages.binary.region(x, y, u, v)?;

        let ldp = ldp_histogram(&gray)?;
        let runs = run_features(&binary)?;
        let glcm = glcm_feature_vector(&gray, params.features.glcm_levels, &params.features.glcm_distances)?;

        let mut vec = Vec::with_capacity(params.features.vector_len());
        vec.extend_from_slice(&ldp.bins);
        vec.extend_from_slice(&runs);
        vec.extend_from_slice(&glcm.values);
        blocks.push(BlockFeature {
            spec: selected.spec,
            white_count: selected.white_count,
            interior_count: ldp.interior,
            vec,
        });
    }

    let signature = FaceSignature {
        image_id,
        subject_id: subject_id.into(),
        width: stages.resized.width(),
        height: stages.resized.height(),
        blocks,
        shortfall: selection.shortfall,
        params: params.clone(),
    };
    Ok((signature, stages))
}
