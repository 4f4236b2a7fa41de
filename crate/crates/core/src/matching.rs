//! Spatially gated χ² dissimilarity between face signatures and
//! nearest-neighbor identification against an enrolled gallery.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::BlockSpec;
use crate::error::{Error, Result};
use crate::features::FaceSignature;

/// How per-block χ² values are combined into an image dissimilarity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Each probe block takes its best (smallest) χ² among gallery blocks
    /// inside the gate; probe blocks with no gated partner are skipped.
    #[default]
    GatedMin,
    /// Each probe block takes `max_l gate(k, l) * χ²(k, l)`, averaged over
    /// all probe blocks. Ungated pairs contribute zero.
    #[serde(rename = "paper-literal-max")]
    GatedMax,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::GatedMin => "gated-min",
            Aggregation::GatedMax => "paper-literal-max",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gated-min" => Ok(Aggregation::GatedMin),
            "paper-literal-max" | "gated-max" => Ok(Aggregation::GatedMax),
            other => Err(Error::config(format!(
                "unknown aggregation mode '{other}' (expected gated-min or paper-literal-max)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Gate radius in pixels; `None` uses the probe's largest block side.
    pub th1: Option<f64>,
    pub mode: Aggregation,
    /// Reject the best match when its dissimilarity exceeds this ceiling.
    pub reject_above: Option<f64>,
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.th1 {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config(format!("th1 = {t} must be positive and finite")));
            }
        }
        if let Some(t) = self.reject_above {
            if t.is_nan() || t < 0.0 {
                return Err(Error::config(format!("rejection threshold {t} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// `Σ (a - b)² / (a + b)` over components, with `0 / 0 = 0`.
pub fn chi_square(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "feature vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if let Some(v) = a.iter().chain(b).find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::invalid(format!("χ² needs non-negative features, got {v}")));
    }
    Ok(chi_square_unchecked(a, b))
}

#[inline]
fn chi_square_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let s = x + y;
            if s > 0.0 {
                (x - y) * (x - y) / s
            } else {
                0.0
            }
        })
        .sum()
}

/// True when the top-left corners lie strictly closer than `th1`.
pub fn spatial_gate(a: &BlockSpec, b: &BlockSpec, th1: f64) -> bool {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    (dx * dx + dy * dy).sqrt() < th1
}

/// Dissimilarity of one probe/gallery pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    /// `+inf` when no probe block has a gated partner (gated-min) or either
    /// signature is empty.
    pub distance: f64,
    /// Probe blocks that contributed to the mean.
    pub matched_blocks: usize,
}

fn gate_radius(probe: &FaceSignature, cfg: &MatchConfig) -> Option<f64> {
    cfg.th1.or_else(|| probe.block_extent().map(|e| e as f64))
}

pub fn compare(probe: &FaceSignature, gallery: &FaceSignature, cfg: &MatchConfig) -> Result<Comparison> {
    const UNMATCHED: Comparison = Comparison {
        distance: f64::INFINITY,
        matched_blocks: 0,
    };
    if probe.is_empty() || gallery.is_empty() {
        return Ok(UNMATCHED);
    }
    let dim = probe.blocks[0].vec.len();
    if probe.blocks.iter().chain(&gallery.blocks).any(|b| b.vec.len() != dim) {
        return Err(Error::invalid(format!(
            "signatures '{}' and '{}' have feature vectors of different lengths",
            probe.image_id, gallery.image_id
        )));
    }
    let th1 = gate_radius(probe, cfg).expect("probe has blocks");

    let mut total = 0.0;
    let mut matched = 0;
    for k in &probe.blocks {
        let gated = gallery
            .blocks
            .iter()
            .filter(|l| spatial_gate(&k.spec, &l.spec, th1))
            .map(|l| chi_square_unchecked(&k.vec, &l.vec));
        match cfg.mode {
            Aggregation::GatedMin => {
                if let Some(best) = gated.min_by(f64::total_cmp) {
                    total += best;
                    matched += 1;
                }
            }
            Aggregation::GatedMax => {
                total += gated.fold(0.0, f64::max);
                matched += 1;
            }
        }
    }
    if matched == 0 {
        return Ok(UNMATCHED);
    }
    Ok(Comparison {
        distance: total / matched as f64,
        matched_blocks: matched,
    })
}

pub fn image_dissimilarity(probe: &FaceSignature, gallery: &FaceSignature, cfg: &MatchConfig) -> Result<f64> {
    compare(probe, gallery, cfg).map(|c| c.distance)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RejectReason {
    /// Every comparison was `+inf`.
    NoComparableBlocks,
    /// The best dissimilarity exceeded the configured ceiling.
    AboveThreshold,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Subject(String),
    Reject(RejectReason),
}

impl Prediction {
    pub fn subject(&self) -> Option<&str> {
        match self {
            Prediction::Subject(s) => Some(s),
            Prediction::Reject(_) => None,
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::Subject(s) => f.write_str(s),
            Prediction::Reject(RejectReason::NoComparableBlocks) => f.write_str("reject (no comparable blocks)"),
            Prediction::Reject(RejectReason::AboveThreshold) => f.write_str("reject (above threshold)"),
        }
    }
}

/// `+inf` is written as `null`.
pub mod distance_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &f64, s: S) -> Result<S::Ok, S::Error> {
        if d.is_finite() {
            s.serialize_f64(*d)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch {
    pub image_id: String,
    pub subject_id: String,
    #[serde(with = "distance_serde")]
    pub distance: f64,
    pub matched_blocks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub probe_id: String,
    pub prediction: Prediction,
    /// Ascending by distance; ties keep enrollment order.
    pub ranking: Vec<RankedMatch>,
}

impl MatchResult {
    pub fn best(&self) -> Option<&RankedMatch> {
        self.ranking.first()
    }
}

pub fn classify(probe: &FaceSignature, gallery: &[FaceSignature], cfg: &MatchConfig) -> Result<MatchResult> {
    if gallery.is_empty() {
        return Err(Error::invalid("cannot classify against an empty gallery"));
    }
    cfg.validate()?;
    let comparisons = gallery
        .par_iter()
        .map(|g| compare(probe, g, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut ranking: Vec<RankedMatch> = gallery
        .iter()
        .zip(comparisons)
        .map(|(g, c)| RankedMatch {
            image_id: g.image_id.clone(),
            subject_id: g.subject_id.clone(),
            distance: c.distance,
            matched_blocks: c.matched_blocks,
        })
        .collect();
    ranking.sort_by(|a, b| a.distance.total_cmp(&b.distance));

    let best = &ranking[0];
    let prediction = if best.distance.is_infinite() {
        Prediction::Reject(RejectReason::NoComparableBlocks)
    } else if cfg.reject_above.is_some_and(|t| best.distance > t) {
        Prediction::Reject(RejectReason::AboveThreshold)
    } else {
        Prediction::Subject(best.subject_id.clone())
    };
    Ok(MatchResult {
        probe_id: probe.image_id.clone(),
        prediction,
        ranking,
    })
}
