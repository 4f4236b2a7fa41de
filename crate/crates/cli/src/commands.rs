use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use blockface::evaluation::{image_id, signature_from_path};
use blockface::features::extract_signature_with_stages;
use blockface::imaging::write_pgm;
use blockface::matching::distance_serde;
use blockface::{classify, load_gray, run_experiment, Dataset, FaceSignature, Prediction, RankedMatch};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{self, RunConfig};
use crate::gallery::{to_json, write_text, Gallery, ParamRecord, SignatureDocument, FORMAT_VERSION};
use crate::{CliError, Command, MatchKnobs};

type CmdResult = Result<(), CliError>;

fn io_err(e: std::io::Error) -> CliError {
    CliError::Internal(format!("writing output: {e}"))
}

pub fn dispatch(command: Command, out: &mut dyn Write) -> CmdResult {
    match command {
        Command::Extract {
            images,
            knobs,
            out: dir,
            debug_dir,
        } => {
            let cfg = knobs.resolve()?;
            cmd_extract(&images, &cfg, dir.as_deref(), debug_dir.as_deref(), out)
        }
        Command::Enroll {
            dataset,
            knobs,
            train_per_subject,
            out: path,
        } => {
            let mut pairs = knobs.pairs();
            pairs.extend(train_per_subject.map(|v| ("train-per-subject".to_string(), v)));
            let cfg = resolve_with(&knobs, &pairs)?;
            cmd_enroll(&dataset, &cfg, &path, out)
        }
        Command::Identify {
            gallery,
            probes,
            config,
            matching,
            json,
        } => cmd_identify(&gallery, &probes, config.as_deref(), &matching, json, out),
        Command::Evaluate {
            dataset,
            knobs,
            train_per_subject,
            impostors_per_subject,
            reference_accuracy,
            out: dir,
            json,
        } => {
            let mut pairs = knobs.pairs();
            for (k, v) in [
                ("train-per-subject", train_per_subject),
                ("impostors-per-subject", impostors_per_subject),
                ("reference-accuracy", reference_accuracy),
            ] {
                pairs.extend(v.map(|v| (k.to_string(), v)));
            }
            let cfg = resolve_with(&knobs, &pairs)?;
            cmd_evaluate(&dataset, &cfg, dir.as_deref(), json, out)
        }
        Command::Inspect { path } => cmd_inspect(&path, out),
    }
}

fn resolve_with(knobs: &crate::Knobs, pairs: &[(String, String)]) -> Result<RunConfig, CliError> {
    let env_seed = std::env::var(config::SEED_ENV).ok();
    config::resolve(knobs.config.as_deref(), env_seed.as_deref(), pairs)
}

fn subject_of(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn cmd_extract(
    images: &[PathBuf],
    cfg: &RunConfig,
    out_dir: Option<&Path>,
    debug_dir: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let mut stems = BTreeSet::new();
    if let Some(p) = images.iter().find(|p| !stems.insert(stem_of(p))) {
        return Err(CliError::Usage(format!(
            "{}: another input has the same file name; outputs would collide",
            p.display()
        )));
    }
    for dir in [out_dir, debug_dir].into_iter().flatten() {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    let params = ParamRecord::new(cfg.pipeline.clone(), cfg.center_crop);

    let results: Vec<Result<(SignatureDocument, Option<blockface::Preprocessed>), CliError>> = images
        .par_iter()
        .map(|path| {
            let mut img = load_gray(path)?;
            if let Some(f) = cfg.center_crop {
                img = img.center_crop(f)?;
            }
            let id = path.to_string_lossy().into_owned();
            let (signature, stages) = extract_signature_with_stages(&img, id, subject_of(path), &cfg.pipeline)?;
            let doc = SignatureDocument {
                format_version: FORMAT_VERSION,
                params: params.clone(),
                signature,
            };
            Ok((doc, debug_dir.map(|_| stages)))
        })
        .collect();

    let mut failures = 0;
    for (path, result) in images.iter().zip(results) {
        match result {
            Ok((doc, stages)) => {
                let text = to_json(&doc)?;
                match out_dir {
                    Some(dir) => write_text(&dir.join(format!("{}.json", stem_of(path))), &text)?,
                    None => out.write_all(text.as_bytes()).map_err(io_err)?,
                }
                if let (Some(dir), Some(s)) = (debug_dir, stages) {
                    let stem = stem_of(path);
                    for (name, img) in [
                        ("resized", &s.resized),
                        ("gradient", &s.gradient),
                        ("posterized", &s.posterized),
                        ("binary", &s.binary.to_gray()),
                    ] {
                        write_pgm(dir.join(format!("{stem}.{name}.pgm")), img)?;
                    }
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                failures += 1;
            }
        }
    }
    if failures > 0 {
        return Err(CliError::Data(format!("{failures} of {} images failed", images.len())));
    }
    Ok(())
}

pub fn cmd_enroll(dataset: &Path, cfg: &RunConfig, gallery_path: &Path, out: &mut dyn Write) -> CmdResult {
    let data = Dataset::load(dataset)?;
    let train = cfg.split.train_per_subject;
    let mut todo = Vec::new();
    for s in &data.subjects {
        if s.images.len() < train {
            eprintln!(
                "warning: subject {}: {} images, fewer than {train}; skipped",
                s.id,
                s.images.len()
            );
            continue;
        }
        todo.extend(
            s.images[..train]
                .iter()
                .map(|p| (image_id(&s.id, p), s.id.clone(), p.clone())),
        );
    }
    if todo.is_empty() {
        return Err(CliError::Data(format!("{}: nothing to enroll", dataset.display())));
    }

    let params = ParamRecord::new(cfg.pipeline.clone(), cfg.center_crop);
    let mut gallery = if gallery_path.exists() {
        Gallery::load(gallery_path)?
    } else {
        Gallery::new(params.clone())
    };
    if gallery.params != params {
        // Fails before any extraction work.
        gallery.extend(&params, Vec::new())?;
    }

    let signatures = todo
        .par_iter()
        .map(|(id, subject, path)| signature_from_path(path, id, subject, &cfg.pipeline, cfg.center_crop))
        .collect::<Result<Vec<FaceSignature>, _>>()?;
    for s in signatures.iter().filter(|s| s.is_empty()) {
        eprintln!("warning: {}: no significant blocks", s.image_id);
    }
    let added = signatures.len();
    let skipped = gallery.extend(&params, signatures)?;
    for id in &skipped {
        eprintln!("warning: {id}: already enrolled; skipped");
    }
    gallery.save(gallery_path)?;
    writeln!(
        out,
        "enrolled {} signatures ({} total) into {}",
        added - skipped.len(),
        gallery.signatures.len(),
        gallery_path.display()
    )
    .map_err(io_err)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifyRecord {
    pub probe_id: String,
    pub prediction: Prediction,
    #[serde(with = "distance_serde")]
    pub distance: f64,
    pub note: Option<String>,
    pub ranking: Vec<RankedMatch>,
}

pub fn cmd_identify(
    gallery_path: &Path,
    probes: &[PathBuf],
    config_file: Option<&Path>,
    knobs: &MatchKnobs,
    json: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let mut pairs = Vec::new();
    knobs.pairs(&mut pairs);
    let file_pairs = match config_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            config::parse_file(&text)?
        }
        None => Vec::new(),
    };
    let mut cfg = config::defaults();
    for (k, v) in &file_pairs {
        if matches!(k.as_str(), "th1" | "mode" | "threshold" | "top") {
            config::set(&mut cfg, k, v)?;
        } else {
            log::warn!("identify: ignoring '{k}'; extraction uses the gallery's parameters");
        }
    }
    for (k, v) in &pairs {
        config::set(&mut cfg, k, v)?;
    }
    cfg.matching.validate()?;

    let gallery = Gallery::load(gallery_path)?;
    if gallery.signatures.is_empty() {
        return Err(CliError::Data(format!("{}: gallery is empty", gallery_path.display())));
    }
    let pipeline = &gallery.params.pipeline;

    let mut records = Vec::with_capacity(probes.len());
    for path in probes {
        let id = path.to_string_lossy().into_owned();
        let probe = signature_from_path(path, &id, "", pipeline, gallery.params.center_crop)?;
        let result = classify(&probe, &gallery.signatures, &cfg.matching)?;
        let note = probe
            .is_empty()
            .then(|| "probe has no significant blocks; nothing to compare".to_string());
        records.push(IdentifyRecord {
            probe_id: id,
            distance: result.best().map_or(f64::INFINITY, |b| b.distance),
            prediction: result.prediction,
            note,
            ranking: result.ranking.into_iter().take(cfg.top_n).collect(),
        });
    }

    if json {
        return out.write_all(to_json(&records)?.as_bytes()).map_err(io_err);
    }
    for r in &records {
        writeln!(
            out,
            "{}: {} (D = {})",
            r.probe_id,
            r.prediction,
            fmt_distance(r.distance)
        )
        .map_err(io_err)?;
        if let Some(note) = &r.note {
            writeln!(out, "  note: {note}").map_err(io_err)?;
        }
        for (rank, m) in r.ranking.iter().enumerate() {
            writeln!(
                out,
                "  {:>2}. {:<12} {:<24} D = {:<12} gated blocks = {}",
                rank + 1,
                m.subject_id,
                m.image_id,
                fmt_distance(m.distance),
                m.matched_blocks
            )
            .map_err(io_err)?;
        }
    }
    Ok(())
}

fn fmt_distance(d: f64) -> String {
    if d.is_finite() {
        format!("{d:.6}")
    } else {
        "inf".to_string()
    }
}

fn fmt_rate(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.5}"))
}

pub fn cmd_evaluate(
    dataset: &Path,
    cfg: &RunConfig,
    out_dir: Option<&Path>,
    json: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let report = run_experiment(dataset, cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let text = to_json(&report)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        write_text(&dir.join("report.json"), &text)?;
        write_text(&dir.join("report.csv"), &report.to_csv())?;
        if !report.comparison.is_empty() {
            write_text(&dir.join("comparison.md"), &report.comparison_table())?;
        }
    }
    if json {
        return out.write_all(text.as_bytes()).map_err(io_err);
    }
    let c = report.counts;
    let m = report.metrics;
    let mut s = String::new();
    s += &format!(
        "subjects {}  enrolled {}  genuine trials {}  impostor trials {}\n",
        report.subjects, report.enrolled, report.genuine_trials, report.impostor_trials
    );
    s += &format!("TP {}  FP {}  TN {}  FN {}\n", c.tp, c.fp, c.tn, c.fn_);
    s += &format!(
        "sensitivity {}  specificity {}  accuracy {}\n",
        fmt_rate(m.sensitivity),
        fmt_rate(m.specificity),
        fmt_rate(m.accuracy)
    );
    s += &format!("identification accuracy {}\n", fmt_rate(report.identification_accuracy));
    if !report.comparison.is_empty() {
        s += &report.comparison_table();
    }
    out.write_all(s.as_bytes()).map_err(io_err)
}

fn describe_signature(sig: &FaceSignature, s: &mut String) {
    s.push_str(&format!(
        "{} (subject '{}'): {} blocks on {}x{}{}\n",
        sig.image_id,
        sig.subject_id,
        sig.blocks.len(),
        sig.width,
        sig.height,
        if sig.shortfall { ", fewer than requested" } else { "" }
    ));
    for b in &sig.blocks {
        let ldp = b.ldp();
        let (top_bin, top) = ldp
            .iter()
            .enumerate()
            .fold((0, 0.0), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
        s.push_str(&format!(
            "  block ({:>2},{:>3}) {}x{} white {:>3}  ldp mode bin {top_bin} ({top:.3})  runs [{}]  glcm [{}]\n",
            b.spec.x,
            b.spec.y,
            b.spec.u,
            b.spec.v,
            b.white_count,
            fmt(b.runs()),
            fmt(b.glcm())
        ));
    }
}

fn describe_params(p: &ParamRecord, s: &mut String) {
    let pl = &p.pipeline;
    s.push_str(&format!(
        "params: {}x{}, {} poster levels, grid {}x{}, retain {}, {} iterations, seed {}, glcm levels {}, distances {:?}, rng {}{}\n",
        pl.preprocess.target_width,
        pl.preprocess.target_height,
        pl.preprocess.poster_levels,
        pl.blocks.grid_cols,
        pl.blocks.grid_rows,
        pl.blocks.retain_count,
        pl.blocks.iterations,
        pl.blocks.seed,
        pl.features.glcm_levels,
        pl.features.glcm_distances,
        p.rng_algorithm,
        p.center_crop.map(|c| format!(", center crop {c}")).unwrap_or_default()
    ));
}

pub fn cmd_inspect(path: &Path, out: &mut dyn Write) -> CmdResult {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut s = String::new();
    if value.get("signatures").is_some() {
        let g = Gallery::load(path)?;
        s.push_str(&format!(
            "gallery, format {}, {} signatures\n",
            g.format_version,
            g.signatures.len()
        ));
        describe_params(&g.params, &mut s);
        for sig in &g.signatures {
            describe_signature(sig, &mut s);
        }
    } else if value.get("signature").is_some() {
        let d = SignatureDocument::load(path)?;
        s.push_str(&format!("signature, format {}\n", d.format_version));
        describe_params(&d.params, &mut s);
        describe_signature(&d.signature, &mut s);
    } else {
        return Err(CliError::Data(format!(
            "{}: neither a gallery nor a signature document",
            path.display()
        )));
    }
    out.write_all(s.as_bytes()).map_err(io_err)
}
