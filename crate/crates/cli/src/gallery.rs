//! JSON documents for enrolled galleries and single signatures.

use std::fs;
use std::path::Path;

use blockface::{FaceSignature, PipelineParams, RNG_ALGORITHM};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// Parameters that determine a signature, recorded with every document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub rng_algorithm: String,
    pub pipeline: PipelineParams,
    pub center_crop: Option<f64>,
}

impl ParamRecord {
    pub fn new(pipeline: PipelineParams, center_crop: Option<f64>) -> Self {
        Self {
            rng_algorithm: RNG_ALGORITHM.to_string(),
            pipeline,
            center_crop,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gallery {
    pub format_version: u32,
    pub params: ParamRecord,
    pub signatures: Vec<FaceSignature>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignatureDocument {
    pub format_version: u32,
    pub params: ParamRecord,
    pub signature: FaceSignature,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn check_version(path: &Path, version: u32) -> Result<(), CliError> {
    if version != FORMAT_VERSION {
        return Err(CliError::Data(format!(
            "{}: format version {version} is not supported (expected {FORMAT_VERSION})",
            path.display()
        )));
    }
    Ok(())
}

impl Gallery {
    pub fn new(params: ParamRecord) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            params,
            signatures: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let g: Gallery = read_json(path)?;
        check_version(path, g.format_version)?;
        if let Some(s) = g.signatures.iter().find(|s| s.params != g.params.pipeline) {
            return Err(CliError::Data(format!(
                "{}: signature {} was extracted with different parameters",
                path.display(),
                s.image_id
            )));
        }
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        write_text(path, &to_json(self)?)
    }

    /// Adds signatures, skipping image ids already present. Returns the
    /// ids that were skipped.
    pub fn extend(&mut self, params: &ParamRecord, signatures: Vec<FaceSignature>) -> Result<Vec<String>, CliError> {
        if *params != self.params {
            return Err(CliError::Usage(format!(
                "parameter mismatch: gallery was built with {}, this run uses {}",
                serde_json::to_string(&self.params).unwrap_or_default(),
                serde_json::to_string(params).unwrap_or_default()
            )));
        }
        let mut skipped = Vec::new();
        for s in signatures {
            if self.signatures.iter().any(|g| g.image_id == s.image_id) {
                skipped.push(s.image_id);
            } else {
                self.signatures.push(s);
            }
        }
        Ok(skipped)
    }
}

impl SignatureDocument {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let d: SignatureDocument = read_json(path)?;
        check_version(path, d.format_version)?;
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use blockface::{extract_signature, BlockSelectConfig, GrayImage};

    fn signature(id: &str, params: &PipelineParams) -> FaceSignature {
        let img = GrayImage::from_fn(92, 112, |x, y| {
            if (30..60).contains(&x) && (40..70).contains(&y) {
                30
            } else {
                210
            }
        });
        extract_signature(&img, id, "s1", params).unwrap()
    }

    fn params() -> PipelineParams {
        PipelineParams {
            blocks: BlockSelectConfig {
                iterations: 5_000,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = params();
        let record = ParamRecord::new(p.clone(), None);
        let mut g = Gallery::new(record.clone());
        g.extend(&record, vec![signature("s1/a", &p), signature("s1/b", &p)])
            .unwrap();

        let first = dir.path().join("a.json");
        let second = dir.path().join("b.json");
        g.save(&first).unwrap();
        let loaded = Gallery::load(&first).unwrap();
        assert_eq!(loaded, g);
        loaded.save(&second).unwrap();
        assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    }

    #[test]
    fn mismatched_params_and_duplicates() {
        let p = params();
        let record = ParamRecord::new(p.clone(), None);
        let mut g = Gallery::new(record.clone());
        assert!(g.extend(&record, vec![signature("x", &p)]).unwrap().is_empty());
        assert_eq!(
            g.extend(&record, vec![signature("x", &p)]).unwrap(),
            vec!["x".to_string()]
        );

        let mut other = p.clone();
        other.features.glcm_levels = 8;
        let err = g.extend(&ParamRecord::new(other, None), vec![]).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        let mut g = Gallery::new(ParamRecord::new(params(), None));
        g.format_version = 99;
        g.save(&path).unwrap();
        assert!(matches!(Gallery::load(&path), Err(CliError::Data(_))));
        fs::write(&path, "{ not json").unwrap();
        assert!(matches!(Gallery::load(&path), Err(CliError::Data(_))));
    }
}
