//! The work behind each `rehab` subcommand, separated from argument
//! parsing so tests can call commands directly.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use rehab_core::assessment::{
    assess, calibrate, prepare_sequence, report_svg, report_to_json, timeseries_csv,
    AssessmentReport,
};
use rehab_core::feedback::{
    aggregate_features, annotate_report, load_advice, load_classifier, save_classifier,
    tangent_residuals, train_error_classifier, AdviceDictionary, ErrorExample,
};
use rehab_core::movement_model::{
    align_demos, gmr_ideal, load_model, save_model, train_on_aligned, IdealMovement,
};
use rehab_core::skeleton_io::{
    load_sequence, raw_sequence_to_json, write_raw_sequence_json, JointSet, PoseSequence,
    RawFrame, RawJoint, RawSequence,
};
use rehab_core::Error;

use crate::config::ToolConfig;
use crate::synth::{generate, SynthSpec};

/// Command failures, split by the exit code they should produce.
#[derive(Debug)]
pub enum CmdError {
    /// Bad arguments or option values (exit 2).
    Usage(String),
    /// Unreadable, malformed, or inconsistent inputs (exit 3).
    Data(String),
    /// Numerical breakdown such as a singular covariance (exit 4).
    Numeric(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Usage(_) => 2,
            CmdError::Data(_) => 3,
            CmdError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Usage(m) | CmdError::Data(m) | CmdError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularCovariance(_) => CmdError::Numeric(e.to_string()),
            other => CmdError::Data(other.to_string()),
        }
    }
}

pub type CmdResult<T> = std::result::Result<T, CmdError>;

/// Attaches the offending file to an error message.
fn at_file<T>(path: &Path, r: rehab_core::Result<T>) -> CmdResult<T> {
    r.map_err(|e| {
        let base: CmdError = e.into();
        match base {
            CmdError::Data(m) => CmdError::Data(format!("{}: {m}", path.display())),
            CmdError::Numeric(m) => CmdError::Numeric(format!("{}: {m}", path.display())),
            u => u,
        }
    })
}

/// Generates a synthetic recording; writes the sequence and a
/// `.meta.json` sidecar holding the ground-truth phase boundaries.
pub fn cmd_synth(spec: &SynthSpec, out: &Path) -> CmdResult<String> {
    let (raw, meta) = generate(spec)?;
    let seq_json = raw_sequence_to_json(&raw);
    let meta_json = meta.to_json();
    let meta_path = out.with_extension("meta.json");
    std::fs::write(out, seq_json).map_err(|e| CmdError::Data(format!("{}: {e}", out.display())))?;
    std::fs::write(&meta_path, meta_json)
        .map_err(|e| CmdError::Data(format!("{}: {e}", meta_path.display())))?;
    Ok(format!(
        "wrote {} ({} frames, {} exercise, error {:?}) and {}",
        out.display(),
        raw.frames.len(),
        spec.exercise,
        spec.error,
        meta_path.display()
    ))
}

fn load_demo(path: &Path, joints: &JointSet) -> CmdResult<PoseSequence> {
    at_file(path, load_sequence(path, joints))
}

/// Trains a model from demonstration files and calibrates its score
/// anchors, all in one artifact.
pub fn cmd_train(
    cfg: &ToolConfig,
    demo_paths: &[PathBuf],
    k: Option<usize>,
    out: &Path,
) -> CmdResult<String> {
    if demo_paths.len() < 2 {
        return Err(CmdError::Usage(
            "training needs at least two demonstration files".into(),
        ));
    }
    let joints = JointSet::upper_body();
    let mut demos = Vec::with_capacity(demo_paths.len());
    for path in demo_paths {
        demos.push(load_demo(path, &joints)?);
    }
    let k = k.unwrap_or(cfg.k);
    let aligned = align_demos(&demos)?;
    let mut model = train_on_aligned(&aligned, k, &cfg.em())?;

    // Calibration anchors are computed on demonstrations pushed through
    // the same start-detection and warping an assessment will use.
    let ideal = gmr_ideal(&model)?;
    let assess_cfg = cfg.assess();
    let mut prepared = Vec::with_capacity(demos.len());
    for (path, demo) in demo_paths.iter().zip(&demos) {
        prepared.push(at_file(path, prepare_sequence(&model, &ideal, demo, &assess_cfg))?.warped);
    }
    model.calibration = Some(calibrate(&model, &prepared, &cfg.margin())?);
    save_model(&model, out)?;

    let trace = &model.training.em_trace;
    Ok(format!(
        "trained {} on {} demos: K = {}, {} reference frames, EM {} iterations \
         (log-likelihood {:.3} -> {:.3}, converged: {}), wrote {}",
        model.exercise,
        demos.len(),
        k,
        model.t_ref,
        trace.len() - 1,
        trace.first().unwrap_or(&f64::NAN),
        trace.last().unwrap_or(&f64::NAN),
        model.training.em_converged,
        out.display()
    ))
}

/// The regenerated ideal movement as a plain sequence file: normalized
/// coordinates on the reference timeline.
fn ideal_to_raw(ideal: &IdealMovement) -> RawSequence {
    let frames = ideal
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let joints = ideal
                .joint_set
                .names
                .iter()
                .zip(&f.pose.joints)
                .map(|(name, j)| {
                    (
                        name.clone(),
                        RawJoint {
                            position: j.position,
                            orientation: j.orientation,
                            tracked: true,
                        },
                    )
                })
                .collect();
            RawFrame {
                t: i as f64 / ideal.fps,
                joints,
            }
        })
        .collect();
    RawSequence {
        subject: "ideal".into(),
        exercise: ideal.exercise.clone(),
        fps: ideal.fps,
        frames,
    }
}

/// Regenerates the ideal movement from a trained model and writes it as
/// a sequence file.
pub fn cmd_generate(model_path: &Path, out: &Path) -> CmdResult<String> {
    let model = at_file(model_path, load_model(model_path))?;
    let ideal = gmr_ideal(&model)?;
    let raw = ideal_to_raw(&ideal);
    write_raw_sequence_json(&raw, out)?;
    Ok(format!(
        "wrote ideal {} movement ({} frames) to {}",
        model.exercise,
        raw.frames.len(),
        out.display()
    ))
}

/// Options for one assessment run beyond the shared config.
#[derive(Debug, Default)]
pub struct AssessOptions {
    pub svg: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub classifier: Option<PathBuf>,
    pub advice: Option<PathBuf>,
}

/// Scores a sequence against a model, optionally classifying errors and
/// exporting plots. All outputs are rendered before anything is written.
pub fn cmd_assess(
    cfg: &ToolConfig,
    model_path: &Path,
    input: &Path,
    report_path: &Path,
    opts: &AssessOptions,
) -> CmdResult<String> {
    let model = at_file(model_path, load_model(model_path))?;
    let joints = JointSet::upper_body();
    let seq = load_demo(input, &joints)?;
    let ideal = gmr_ideal(&model)?;
    let (mut report, detail) = assess(&model, &ideal, &seq, &cfg.assess())?;

    if let Some(clf_path) = &opts.classifier {
        let classifier = at_file(clf_path, load_classifier(clf_path))?;
        let dict = match &opts.advice {
            Some(p) => at_file(p, load_advice(p))?,
            None => AdviceDictionary::default(),
        };
        annotate_report(
            &mut report,
            &detail,
            &ideal,
            &classifier,
            &dict,
            cfg.error_score_threshold,
        )?;
    }

    // Render everything first so a failure cannot leave partial files.
    let report_json = report_to_json(&report)?;
    let svg_text = opts.svg.as_ref().map(|_| report_svg(&report));
    let csv_text = opts.csv.as_ref().map(|_| timeseries_csv(&detail));
    std::fs::write(report_path, report_json)
        .map_err(|e| CmdError::Data(format!("{}: {e}", report_path.display())))?;
    if let (Some(svg_path), Some(text)) = (&opts.svg, svg_text) {
        std::fs::write(svg_path, text)
            .map_err(|e| CmdError::Data(format!("{}: {e}", svg_path.display())))?;
    }
    if let (Some(csv_path), Some(text)) = (&opts.csv, csv_text) {
        std::fs::write(csv_path, text)
            .map_err(|e| CmdError::Data(format!("{}: {e}", csv_path.display())))?;
    }

    Ok(format!(
        "global {:.1}% | {} | start frame {}, {} segments, wrote {}",
        report.global,
        report
            .parts
            .iter()
            .map(|(p, s)| format!("{p} {s:.1}%"))
            .collect::<Vec<_>>()
            .join(", "),
        report.start_frame,
        report.segments.len(),
        report_path.display()
    ))
}

#[derive(Debug, Deserialize)]
struct LabeledFile {
    examples: Vec<LabeledExample>,
}

/// One labeled mistake: which sequence shows it, which body part and
/// assessment segment it lives in, and its class label.
#[derive(Debug, Deserialize)]
struct LabeledExample {
    sequence: PathBuf,
    part: String,
    segment: usize,
    label: String,
}

/// Trains the error classifier from a labeled-examples file. Sequence
/// paths are resolved relative to the labeled file.
pub fn cmd_train_errors(
    cfg: &ToolConfig,
    model_path: &Path,
    labeled_path: &Path,
    out: &Path,
) -> CmdResult<String> {
    let model = at_file(model_path, load_model(model_path))?;
    let ideal = gmr_ideal(&model)?;
    let text = std::fs::read_to_string(labeled_path)
        .map_err(|e| CmdError::Data(format!("{}: {e}", labeled_path.display())))?;
    let labeled: LabeledFile = serde_json::from_str(&text)
        .map_err(|e| CmdError::Data(format!("{}: {e}", labeled_path.display())))?;
    if labeled.examples.is_empty() {
        return Err(CmdError::Data(format!(
            "{}: no labeled examples",
            labeled_path.display()
        )));
    }
    let base = labeled_path.parent().unwrap_or(Path::new("."));
    let joints = JointSet::upper_body();
    let assess_cfg = cfg.assess();

    let mut examples = Vec::with_capacity(labeled.examples.len());
    for ex in &labeled.examples {
        let seq_path = base.join(&ex.sequence);
        let seq = load_demo(&seq_path, &joints)?;
        let (_, detail) = assess(&model, &ideal, &seq, &assess_cfg)?;
        let segment = detail.segments.get(ex.segment).ok_or_else(|| {
            CmdError::Data(format!(
                "{}: segment {} out of range ({} segments found)",
                seq_path.display(),
                ex.segment,
                detail.segments.len()
            ))
        })?;
        let residuals = tangent_residuals(&ideal, &detail.warped)?;
        let feature = aggregate_features(&residuals, segment, &model.joint_set, &ex.part)?;
        examples.push(ErrorExample {
            exercise: model.exercise.clone(),
            part: ex.part.clone(),
            label: ex.label.clone(),
            feature,
        });
    }

    let classifier = train_error_classifier(&examples, cfg.theta, &cfg.svm())?;
    save_classifier(&classifier, out)?;
    let scopes: Vec<String> = classifier
        .scopes
        .iter()
        .map(|s| format!("{}/{} ({} classes)", s.exercise, s.part, s.classes.len()))
        .collect();
    Ok(format!(
        "trained error classifier on {} examples: {}; wrote {}",
        examples.len(),
        scopes.join(", "),
        out.display()
    ))
}

/// Renders a stored report as human-readable text.
pub fn cmd_report(report_path: &Path) -> CmdResult<String> {
    let report: AssessmentReport = at_file(report_path, rehab_core::assessment::load_report(report_path))?;
    let mut out = String::new();
    out.push_str(&format!(
        "exercise:  {}\nsubject:   {}\nglobal:    {:.1}%\n",
        report.diagnostics.exercise, report.diagnostics.subject, report.global
    ));
    for (part, score) in &report.parts {
        out.push_str(&format!("  {part:<10} {score:.1}%\n"));
    }
    out.push_str(&format!(
        "start frame {}, strategy {}, {} frames assessed\nsegments:\n",
        report.start_frame, report.diagnostics.strategy, report.diagnostics.assessed_frames
    ));
    for (i, s) in report.segments.iter().enumerate() {
        out.push_str(&format!(
            "  {:>2}. frames {:>4}-{:<4} {:<10} {:.1}%\n",
            i + 1,
            s.start,
            s.end,
            format!("{:?}", s.kind).to_lowercase(),
            s.score
        ));
    }
    if report.errors.is_empty() {
        out.push_str("no errors classified\n");
    } else {
        out.push_str("errors:\n");
        for e in &report.errors {
            out.push_str(&format!(
                "  {} segment {}: {} ({:.0}% confident) - {}\n",
                e.part,
                e.segment + 1,
                e.label,
                100.0 * e.confidence,
                e.advice
            ));
        }
    }
    Ok(out)
}
