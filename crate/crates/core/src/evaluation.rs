//! Train/probe experiments over a subject-per-directory dataset, with
//! confusion counts and the sensitivity/specificity/accuracy metrics.
//!
//! For every subject a class is formed from its own probe images (genuine
//! trials) and a number of probe images drawn from other subjects
//! (impostor trials). A trial is accepted for its class when the nearest
//! gallery image belongs to the claimed subject at a finite dissimilarity.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::RNG_ALGORITHM;
use crate::error::{Error, Result};
use crate::features::{extract_signature, FaceSignature, PipelineParams};
use crate::imaging::load_gray;
use crate::matching::{classify, distance_serde, MatchConfig, MatchResult, Prediction, RankedMatch};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Rates in `[0, 1]`; `None` where the denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    let sensitivity = ratio(c.tp, c.tp + c.fn_);
    let specificity = ratio(c.tn, c.fp + c.tn);
    Metrics {
        sensitivity,
        specificity,
        accuracy: ratio(c.tp + c.tn, c.total()),
        fpr: specificity.map(|s| 1.0 - s),
        fnr: sensitivity.map(|s| 1.0 - s),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    TruePositive,
    FalseNegative,
    FalsePositive,
    TrueNegative,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub probe_id: String,
    pub true_subject: String,
    /// Class the probe is tested against; equals `true_subject` for genuine trials.
    pub claimed_subject: String,
    pub genuine: bool,
    pub prediction: Prediction,
}

impl Trial {
    pub fn outcome(&self) -> Outcome {
        let accepted = self.prediction.subject() == Some(self.claimed_subject.as_str());
        match (self.genuine, accepted) {
            (true, true) => Outcome::TruePositive,
            (true, false) => Outcome::FalseNegative,
            (false, true) => Outcome::FalsePositive,
            (false, false) => Outcome::TrueNegative,
        }
    }
}

pub fn confusion(trials: &[Trial]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for t in trials {
        match t.outcome() {
            Outcome::TruePositive => c.tp += 1,
            Outcome::FalseNegative => c.fn_ += 1,
            Outcome::FalsePositive => c.fp += 1,
            Outcome::TrueNegative => c.tn += 1,
        }
    }
    c
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectImages {
    pub id: String,
    /// Sorted by file name; the first entries are the training images.
    pub images: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub root: PathBuf,
    pub subjects: Vec<SubjectImages>,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "png"))
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = entries
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    paths.sort();
    Ok(paths)
}

impl Dataset {
    /// Reads `root/<subject>/<image>` with subjects and images in
    /// lexicographic order. Files other than `.pgm`/`.png` are ignored.
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        let mut subjects = Vec::new();
        for dir in read_dir_sorted(root)? {
            if !dir.is_dir() {
                continue;
            }
            let id = dir
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::Dataset(format!("non-UTF-8 subject directory {}", dir.display())))?
                .to_string();
            let images = read_dir_sorted(&dir)?
                .into_iter()
                .filter(|p| p.is_file() && is_image(p))
                .collect();
            subjects.push(SubjectImages { id, images });
        }
        if subjects.is_empty() {
            return Err(Error::Dataset(format!(
                "no subject directories under {}",
                root.display()
            )));
        }
        Ok(Self {
            root: root.to_path_buf(),
            subjects,
        })
    }
}

/// `subject/file-name`, the identifier used for dataset images.
pub fn image_id(subject: &str, path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
    format!("{subject}/{name}")
}

/// Loads an image, optionally center-crops it, and extracts its signature.
pub fn signature_from_path(
    path: &Path,
    image_id: &str,
    subject_id: &str,
    params: &PipelineParams,
    center_crop: Option<f64>,
) -> Result<FaceSignature> {
    let mut img = load_gray(path)?;
    if let Some(fraction) = center_crop {
        img = img.center_crop(fraction)?;
    }
    extract_signature(&img, image_id, subject_id, params)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// The first images of each subject (by file name) are enrolled.
    pub train_per_subject: usize,
    /// Impostor probes tested against each subject's class.
    pub impostors_per_subject: usize,
    /// Seeds the impostor draw.
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_per_subject: 2,
            impostors_per_subject: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub pipeline: PipelineParams,
    pub split: SplitConfig,
    pub matching: MatchConfig,
    /// Fraction of each dimension kept by a center crop before resizing.
    pub center_crop: Option<f64>,
    /// Gallery entries kept per probe in the report.
    pub top_n: usize,
    /// Identification accuracy to compare against, if any.
    pub reference_accuracy: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.matching.validate()?;
        if self.split.train_per_subject == 0 {
            return Err(Error::config("train-per-subject must be at least 1"));
        }
        if let Some(r) = self.reference_accuracy {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::config(format!("reference accuracy {r} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub probe_id: String,
    pub true_subject: String,
    pub claimed_subject: String,
    pub genuine: bool,
    pub prediction: Prediction,
    #[serde(with = "distance_serde")]
    pub best_distance: f64,
    pub outcome: Outcome,
    pub ranking: Vec<RankedMatch>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub measured: Option<f64>,
    pub reference: f64,
    pub difference: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub rng_algorithm: String,
    pub config: ExperimentConfig,
    pub subjects: usize,
    pub enrolled: usize,
    pub genuine_trials: usize,
    pub impostor_trials: usize,
    pub warnings: Vec<String>,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    /// Fraction of genuine probes whose nearest gallery image has the right subject.
    pub identification_accuracy: Option<f64>,
    pub comparison: Vec<ComparisonRow>,
    pub probes: Vec<ProbeRecord>,
}

impl ExperimentReport {
    /// One row per trial.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("probe_id,true_subject,claimed_subject,genuine,prediction,best_distance,outcome\n");
        for p in &self.probes {
            let predicted = match &p.prediction {
                Prediction::Subject(s) => s.clone(),
                Prediction::Reject(_) => "reject".to_string(),
            };
            let distance = if p.best_distance.is_finite() {
                p.best_distance.to_string()
            } else {
                "inf".to_string()
            };
            let outcome = match p.outcome {
                Outcome::TruePositive => "TP",
                Outcome::FalseNegative => "FN",
                Outcome::FalsePositive => "FP",
                Outcome::TrueNegative => "TN",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(&p.probe_id),
                csv_field(&p.true_subject),
                csv_field(&p.claimed_subject),
                p.genuine,
                csv_field(&predicted),
                distance,
                outcome
            );
        }
        out
    }

    /// Markdown table of measured values against reference values.
    pub fn comparison_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.4}"));
        let mut out = String::from("| metric | measured | reference | difference |\n|---|---|---|---|\n");
        for row in &self.comparison {
            let _ = writeln!(
                out,
                "| {} | {} | {:.4} | {} |",
                row.metric,
                fmt(row.measured),
                row.reference,
                fmt(row.difference)
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

struct Enrolled {
    id: String,
    train: Vec<usize>,
    probes: Vec<usize>,
}

pub fn run_experiment(root: impl AsRef<Path>, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let dataset = Dataset::load(root)?;
    let train_n = cfg.split.train_per_subject;
    let mut warnings = Vec::new();

    // Flat image list; subjects refer into it by index.
    let mut images: Vec<(String, String, PathBuf)> = Vec::new();
    let mut subjects: Vec<Enrolled> = Vec::new();
    for s in &dataset.subjects {
        if s.images.is_empty() {
            warnings.push(format!("subject {}: no images, skipped", s.id));
            continue;
        }
        if s.images.len() < train_n {
            warnings.push(format!(
                "subject {}: {} images, fewer than {train_n} training images; skipped",
                s.id,
                s.images.len()
            ));
            continue;
        }
        if s.images.len() == train_n {
            warnings.push(format!("subject {}: no images left for probing", s.id));
        }
        let base = images.len();
        images.extend(s.images.iter().map(|p| (image_id(&s.id, p), s.id.clone(), p.clone())));
        subjects.push(Enrolled {
            id: s.id.clone(),
            train: (base..base + train_n).collect(),
            probes: (base + train_n..base + s.images.len()).collect(),
        });
    }
    if subjects.is_empty() {
        return Err(Error::Dataset("no subject has enough images for the split".into()));
    }

    let extracted: Vec<Result<FaceSignature>> = images
        .par_iter()
        .map(|(id, subject, path)| signature_from_path(path, id, subject, &cfg.pipeline, cfg.center_crop))
        .collect();
    let mut signatures: Vec<Option<FaceSignature>> = Vec::with_capacity(images.len());
    for ((id, _, _), sig) in images.iter().zip(extracted) {
        match sig {
            Ok(sig) => {
                if sig.is_empty() {
                    warnings.push(format!("{id}: no significant blocks"));
                }
                signatures.push(Some(sig));
            }
            Err(e) => {
                warnings.push(format!("{id}: {e}; skipped"));
                signatures.push(None);
            }
        }
    }

    let gallery: Vec<FaceSignature> = subjects
        .iter()
        .flat_map(|s| s.train.iter())
        .filter_map(|&i| signatures[i].clone())
        .collect();
    if gallery.is_empty() {
        return Err(Error::Dataset("no training image could be enrolled".into()));
    }

    // Probe images that actually produced a signature, per subject.
    let usable: Vec<Vec<usize>> = subjects
        .iter()
        .map(|s| s.probes.iter().copied().filter(|&i| signatures[i].is_some()).collect())
        .collect();

    // (probe image, claimed subject index, genuine)
    let mut planned: Vec<(usize, usize, bool)> = Vec::new();
    for (si, probes) in usable.iter().enumerate() {
        planned.extend(probes.iter().map(|&i| (i, si, true)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.split.seed);
    for si in 0..subjects.len() {
        let others: Vec<usize> = (0..subjects.len())
            .filter(|&o| o != si && !usable[o].is_empty())
            .collect();
        if others.is_empty() || cfg.split.impostors_per_subject == 0 {
            continue;
        }
        let start = rng.random_range(0..others.len());
        for j in 0..cfg.split.impostors_per_subject {
            let pool = &usable[others[(start + j) % others.len()]];
            let pick = pool[rng.random_range(0..pool.len())];
            planned.push((pick, si, false));
        }
    }

    // Each distinct probe image is classified once.
    let mut distinct: Vec<usize> = planned.iter().map(|&(i, _, _)| i).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let results: BTreeMap<usize, MatchResult> = distinct
        .par_iter()
        .map(|&i| {
            let sig = signatures[i].as_ref().expect("usable probes have signatures");
            classify(sig, &gallery, &cfg.matching).map(|r| (i, r))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();

    let mut trials = Vec::with_capacity(planned.len());
    let mut probes = Vec::with_capacity(planned.len());
    let mut identified = 0usize;
    let mut genuine_trials = 0usize;
    for &(i, si, genuine) in &planned {
        let result = &results[&i];
        let trial = Trial {
            probe_id: images[i].0.clone(),
            true_subject: images[i].1.clone(),
            claimed_subject: subjects[si].id.clone(),
            genuine,
            prediction: result.prediction.clone(),
        };
        if genuine {
            genuine_trials += 1;
            if trial.prediction.subject() == Some(trial.true_subject.as_str()) {
                identified += 1;
            }
        }
        probes.push(ProbeRecord {
            probe_id: trial.probe_id.clone(),
            true_subject: trial.true_subject.clone(),
            claimed_subject: trial.claimed_subject.clone(),
            genuine,
            prediction: trial.prediction.clone(),
            best_distance: result.best().map_or(f64::INFINITY, |b| b.distance),
            outcome: trial.outcome(),
            ranking: result.ranking.iter().take(cfg.top_n).cloned().collect(),
        });
        trials.push(trial);
    }

    let counts = confusion(&trials);
    let identification_accuracy = ratio(identified as u64, genuine_trials as u64);
    let comparison = cfg
        .reference_accuracy
        .map(|reference| ComparisonRow {
            metric: "identification_accuracy".into(),
            measured: identification_accuracy,
            reference,
            difference: identification_accuracy.map(|m| m - reference),
        })
        .into_iter()
        .collect();

    Ok(ExperimentReport {
        format_version: REPORT_FORMAT_VERSION,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        config: cfg.clone(),
        subjects: subjects.len(),
        enrolled: gallery.len(),
        genuine_trials,
        impostor_trials: trials.len() - genuine_trials,
        warnings,
        counts,
        metrics: metrics(&counts),
        identification_accuracy,
        comparison,
        probes,
    })
}
