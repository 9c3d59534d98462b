//! Assessing a recorded sequence against a trained exercise model.
//!
//! The pipeline: detect where the exercise starts (motion profile against
//! a threshold), warp the remainder onto the model's reference timeline,
//! evaluate per-frame log-likelihoods globally and per body part, split
//! the timeline into transition/hold segments from the warped motion
//! profile, and map mean log-likelihoods to 0-100 scores anchored at what
//! the demonstrations themselves achieve.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::{dtw_align, warp_to_reference};
use crate::error::{Error, Result};
use crate::movement_model::{
    marginalize_bodypart, sequence_loglik, ExerciseModel, IdealMovement,
};
use crate::pose_manifold::{
    geodesic_distance, karcher_mean, KARCHER_MAX_ITER, KARCHER_TOL,
};
use crate::skeleton_io::PoseSequence;

/// Scope key for whole-body calibration entries.
pub const GLOBAL_SCOPE: &str = "global";

/// Frames to back off before the first threshold crossing when locating
/// the exercise start, compensating for the profile's window lag.
pub const START_BACKOFF_FRAMES: usize = 10;

/// Default motion-profile window length in frames.
pub const DEFAULT_WINDOW: usize = 15;

/// Default fraction of the ideal movement's peak motion used as the
/// transition threshold.
pub const DEFAULT_TAU_FACTOR: f64 = 0.25;

/// Default score below which a part/segment cell is sent to the error
/// classifier.
pub const DEFAULT_ERROR_SCORE_THRESHOLD: f64 = 60.0;

/// Local motion profile of a sequence: for every frame, the standard
/// deviation of geodesic distances to the Karcher mean of a centered
/// window (truncated symmetrically near the edges; windows longer than
/// the sequence fall back to the whole sequence).
#[derive(Debug, Clone, PartialEq)]
pub struct MotionProfile {
    pub sigma: Vec<f64>,
    pub window: usize,
}

pub fn motion_profile(seq: &PoseSequence, window: usize) -> Result<MotionProfile> {
    if window < 2 {
        return Err(Error::InvalidConfig(
            "motion profile window must be at least 2 frames".into(),
        ));
    }
    let n = seq.len();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let mut sigma = Vec::with_capacity(n);
    for c in 0..n {
        let (lo, hi) = if window > n {
            (0, n)
        } else {
            let r = (window / 2).min(c).min(n - 1 - c);
            (c - r, c + r + 1)
        };
        let poses: Vec<_> = seq.frames[lo..hi].iter().map(|f| f.pose.clone()).collect();
        let mean = karcher_mean(&poses, KARCHER_TOL, KARCHER_MAX_ITER)?.pose;
        let mut sq = 0.0;
        for p in &poses {
            let d = geodesic_distance(&mean, p)?;
            sq += d * d;
        }
        sigma.push((sq / poses.len() as f64).sqrt());
    }
    Ok(MotionProfile { sigma, window })
}

/// Locates the start of the exercise: the first frame whose motion
/// exceeds `tau`, backed off by [`START_BACKOFF_FRAMES`] (clamped at 0).
/// No crossing at all means no motion was detected.
pub fn detect_start(profile: &MotionProfile, tau: f64) -> Result<usize> {
    let crossing = profile
        .sigma
        .iter()
        .position(|&s| s > tau)
        .ok_or(Error::NoMotionDetected)?;
    Ok(crossing.saturating_sub(START_BACKOFF_FRAMES))
}

/// Temporal segmentation strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Alternating transition (motion above threshold) and hold
    /// (motion below threshold) segments.
    TransitionHold,
    /// Transitions only: each interior hold is collapsed to a single
    /// boundary at its calmest frame; leading and trailing holds merge
    /// into their neighboring transition.
    TransitionOnly,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::TransitionHold => write!(f, "transition_hold"),
            Strategy::TransitionOnly => write!(f, "transition_only"),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "transition_hold" => Ok(Strategy::TransitionHold),
            "transition_only" => Ok(Strategy::TransitionOnly),
            other => Err(format!(
                "unknown strategy {other:?}, expected transition_hold or transition_only"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Transition,
    Hold,
}

/// A half-open frame range `[start, end)` of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
}

/// Splits the span `[from, len)` of a motion profile into segments.
/// Frames with `sigma >= tau` count as transition, others as hold.
pub fn segment(profile: &MotionProfile, tau: f64, strategy: Strategy, from: usize) -> Vec<Segment> {
    let n = profile.sigma.len();
    if from >= n {
        return Vec::new();
    }
    // Maximal runs of constant transition/hold labeling.
    let mut runs: Vec<Segment> = Vec::new();
    for i in from..n {
        let kind = if profile.sigma[i] >= tau {
            SegmentKind::Transition
        } else {
            SegmentKind::Hold
        };
        match runs.last_mut() {
            Some(r) if r.kind == kind => r.end = i + 1,
            _ => runs.push(Segment {
                start: i,
                end: i + 1,
                kind,
            }),
        }
    }
    match strategy {
        Strategy::TransitionHold => runs,
        Strategy::TransitionOnly => {
            // Cut at the calmest frame of each interior hold; holds at
            // either end merge into their neighboring transition.
            let mut cuts = Vec::new();
            for (i, r) in runs.iter().enumerate() {
                if r.kind == SegmentKind::Hold && i > 0 && i + 1 < runs.len() {
                    let calmest = (r.start..r.end)
                        .min_by(|&a, &b| {
                            profile.sigma[a]
                                .partial_cmp(&profile.sigma[b])
                                .expect("finite sigma")
                        })
                        .expect("non-empty run");
                    cuts.push(calmest);
                }
            }
            let mut segments = Vec::with_capacity(cuts.len() + 1);
            let mut start = from;
            for cut in cuts {
                segments.push(Segment {
                    start,
                    end: cut,
                    kind: SegmentKind::Transition,
                });
                start = cut;
            }
            segments.push(Segment {
                start,
                end: n,
                kind: SegmentKind::Transition,
            });
            segments.retain(|s| s.end > s.start);
            segments
        }
    }
}

/// Margin policy when anchoring scores to demonstration likelihoods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginConfig {
    /// Multiple of the across-demo std of mean log-likelihood.
    pub sigma_mult: f64,
    /// Lower bound on the margin, in nats.
    pub min_nats: f64,
}

impl Default for MarginConfig {
    fn default() -> Self {
        Self {
            sigma_mult: 3.0,
            min_nats: 5.0,
        }
    }
}

/// Score anchors for one scope (global or one body part): what per-frame
/// log-likelihood the demonstrations achieved, and the floor mapping to a
/// zero score. Per-demo traces are kept so anchors can be recomputed for
/// any frame range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeCalibration {
    pub ll_good: f64,
    pub ll_floor: f64,
    /// Per demonstration, the per-frame log-likelihood on the reference
    /// timeline.
    pub demo_frame_loglik: Vec<Vec<f64>>,
}

impl ScopeCalibration {
    /// Linear score of a mean log-likelihood against this scope's
    /// anchors, clamped to [0, 100].
    pub fn percent(&self, x: f64) -> f64 {
        percent(x, self.ll_good, self.ll_floor)
    }
}

/// Score anchors per scope, stored alongside the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub scopes: BTreeMap<String, ScopeCalibration>,
}

impl Calibration {
    pub fn validate(&self, t_ref: usize) -> Result<()> {
        if !self.scopes.contains_key(GLOBAL_SCOPE) {
            return Err(Error::ModelValidation(
                "calibration is missing the global scope".into(),
            ));
        }
        for (name, scope) in &self.scopes {
            if !(scope.ll_floor < scope.ll_good) {
                return Err(Error::ModelValidation(format!(
                    "scope {name}: ll_floor must lie strictly below ll_good"
                )));
            }
            if scope.demo_frame_loglik.is_empty() {
                return Err(Error::ModelValidation(format!(
                    "scope {name}: no demonstration traces"
                )));
            }
            for trace in &scope.demo_frame_loglik {
                if trace.len() != t_ref {
                    return Err(Error::ModelValidation(format!(
                        "scope {name}: demo trace has {} frames, expected {t_ref}",
                        trace.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn anchors_from_demo_means(demo_means: &[f64], margin: &MarginConfig) -> (f64, f64) {
    let good = demo_means
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let m = mean(demo_means);
    let var = demo_means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / demo_means.len() as f64;
    let margin_nats = (margin.sigma_mult * var.sqrt()).max(margin.min_nats);
    (good, good - margin_nats)
}

/// Maps a mean log-likelihood linearly onto [0, 100]: `good` and above
/// score 100, `floor` and below score 0.
pub fn percent(x: f64, good: f64, floor: f64) -> f64 {
    (100.0 * (x - good + (good - floor)) / (good - floor)).clamp(0.0, 100.0)
}

/// Computes score anchors from the aligned demonstrations: the weakest
/// demonstration's mean per-frame log-likelihood anchors 100, and the
/// floor sits a margin below it (at least `min_nats`, or `sigma_mult`
/// standard deviations across demos if larger). One scope is produced
/// globally and per body part.
pub fn calibrate(
    model: &ExerciseModel,
    aligned_demos: &[PoseSequence],
    margin: &MarginConfig,
) -> Result<Calibration> {
    if aligned_demos.is_empty() {
        return Err(Error::NotEnoughData(
            "calibration needs at least one demonstration".into(),
        ));
    }
    let mut scopes = BTreeMap::new();
    let part_names: Vec<String> = model.joint_set.parts.keys().cloned().collect();
    for scope_name in std::iter::once(GLOBAL_SCOPE.to_string()).chain(part_names) {
        let scoped_model;
        let model_ref = if scope_name == GLOBAL_SCOPE {
            model
        } else {
            scoped_model = marginalize_bodypart(model, &scope_name)?;
            &scoped_model
        };
        let mut traces = Vec::with_capacity(aligned_demos.len());
        for demo in aligned_demos {
            let scoped_demo;
            let demo_ref = if scope_name == GLOBAL_SCOPE {
                demo
            } else {
                scoped_demo = demo.restrict_to_part(&scope_name)?;
                &scoped_demo
            };
            let (_, per_frame) = sequence_loglik(model_ref, demo_ref)?;
            traces.push(per_frame);
        }
        let demo_means: Vec<f64> = traces.iter().map(|t| mean(t)).collect();
        let (ll_good, ll_floor) = anchors_from_demo_means(&demo_means, margin);
        scopes.insert(
            scope_name,
            ScopeCalibration {
                ll_good,
                ll_floor,
                demo_frame_loglik: traces,
            },
        );
    }
    Ok(Calibration { scopes })
}

/// Anchors recomputed over one frame range of the reference timeline,
/// from the stored per-demo traces.
pub fn segment_anchors(
    scope: &ScopeCalibration,
    start: usize,
    end: usize,
    margin: &MarginConfig,
) -> Result<(f64, f64)> {
    if start >= end || scope.demo_frame_loglik.iter().any(|t| end > t.len()) {
        return Err(Error::LengthMismatch {
            expected: scope.demo_frame_loglik.first().map_or(0, |t| t.len()),
            found: end,
        });
    }
    let demo_means: Vec<f64> = scope
        .demo_frame_loglik
        .iter()
        .map(|t| mean(&t[start..end]))
        .collect();
    Ok(anchors_from_demo_means(&demo_means, margin))
}

/// Settings for one assessment run.
#[derive(Debug, Clone)]
pub struct AssessConfig {
    pub window: usize,
    /// Explicit transition threshold; `None` derives it from the ideal
    /// movement's own motion profile.
    pub tau: Option<f64>,
    pub tau_factor: f64,
    pub strategy: Strategy,
    pub margin: MarginConfig,
    /// Per-part weight on the penalty (100 minus score); missing parts
    /// use 1.0.
    pub part_weights: BTreeMap<String, f64>,
}

impl Default for AssessConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            tau: None,
            tau_factor: DEFAULT_TAU_FACTOR,
            strategy: Strategy::TransitionHold,
            margin: MarginConfig::default(),
            part_weights: BTreeMap::new(),
        }
    }
}

/// One scored segment as reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
    pub score: f64,
}

/// One classified error with its advice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorFinding {
    pub part: String,
    /// Index into the report's segment list.
    pub segment: usize,
    pub label: String,
    pub confidence: f64,
    pub advice: String,
}

/// Run context worth keeping with the scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub exercise: String,
    pub subject: String,
    pub tau: f64,
    pub window: usize,
    pub strategy: Strategy,
    pub dtw_cost: f64,
    pub assessed_frames: usize,
    pub mean_frame_loglik: f64,
}

/// The assessment result written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    /// Whole-body score in [0, 100].
    pub global: f64,
    /// Per body-part scores in [0, 100].
    pub parts: BTreeMap<String, f64>,
    /// Frame of the input sequence where the exercise was detected to
    /// begin.
    pub start_frame: usize,
    pub segments: Vec<SegmentScore>,
    pub errors: Vec<ErrorFinding>,
    pub diagnostics: Diagnostics,
}

/// Intermediate data of an assessment, for feedback classification and
/// time-series exports.
#[derive(Debug, Clone)]
pub struct AssessmentDetail {
    /// The assessed sequence warped onto the reference timeline.
    pub warped: PoseSequence,
    pub per_frame_loglik: Vec<f64>,
    pub part_per_frame: BTreeMap<String, Vec<f64>>,
    /// Motion profile of the warped sequence.
    pub sigma: Vec<f64>,
    pub segments: Vec<Segment>,
    /// Per part, one score per segment (same order as `segments`).
    pub part_segment_scores: BTreeMap<String, Vec<f64>>,
}

/// Transition threshold for a model: a fraction of the peak motion of
/// its regenerated ideal movement.
pub fn ideal_tau(ideal: &IdealMovement, window: usize, tau_factor: f64) -> Result<f64> {
    let profile = motion_profile(&ideal.to_pose_sequence(), window)?;
    let peak = profile.sigma.iter().fold(0.0_f64, |a, &b| a.max(b));
    if !(peak > 0.0) {
        return Err(Error::NoMotionDetected);
    }
    Ok(tau_factor * peak)
}

/// A sequence brought onto the model's reference timeline the same way
/// an assessment would do it.
#[derive(Debug, Clone)]
pub struct PreparedSequence {
    /// Threshold actually used for start detection.
    pub tau: f64,
    /// Frame of the input where the exercise was detected to begin.
    pub start: usize,
    /// The trimmed sequence warped onto the reference timeline.
    pub warped: PoseSequence,
    pub dtw_cost: f64,
    /// Frames of the input that took part (from `start` to the end).
    pub assessed_frames: usize,
}

/// Runs the warping half of an assessment: detect the exercise start
/// from the motion profile, trim, and time-align the remainder against
/// the ideal movement. Calibration feeds demonstrations through this
/// same path so score anchors and assessed sequences are comparable.
pub fn prepare_sequence(
    model: &ExerciseModel,
    ideal: &IdealMovement,
    seq: &PoseSequence,
    cfg: &AssessConfig,
) -> Result<PreparedSequence> {
    if seq.joint_set.names != model.joint_set.names {
        return Err(Error::JointSetMismatch);
    }
    let tau = match cfg.tau {
        Some(t) => t,
        None => ideal_tau(ideal, cfg.window, cfg.tau_factor)?,
    };
    let raw_profile = motion_profile(seq, cfg.window)?;
    let start = detect_start(&raw_profile, tau)?;
    let trimmed = seq.slice_from(start);
    let ideal_seq = ideal.to_pose_sequence();
    let path = dtw_align(&trimmed, &ideal_seq)?;
    let warped = warp_to_reference(&trimmed, &path, model.t_ref)?;
    Ok(PreparedSequence {
        tau,
        start,
        warped,
        dtw_cost: path.cost,
        assessed_frames: trimmed.len(),
    })
}

/// Scores a sequence against a calibrated model. `ideal` must be the
/// model's regenerated ideal movement (see
/// [`gmr_ideal`](crate::movement_model::gmr_ideal)); it drives the
/// transition threshold and serves as the warping reference.
pub fn assess(
    model: &ExerciseModel,
    ideal: &IdealMovement,
    seq: &PoseSequence,
    cfg: &AssessConfig,
) -> Result<(AssessmentReport, AssessmentDetail)> {
    let calibration = model
        .calibration
        .as_ref()
        .ok_or_else(|| Error::ModelValidation("model has no calibration".into()))?;
    calibration.validate(model.t_ref)?;

    let PreparedSequence {
        tau,
        start,
        warped,
        dtw_cost,
        assessed_frames,
    } = prepare_sequence(model, ideal, seq, cfg)?;

    // Likelihoods: global and per part.
    let (_, per_frame) = sequence_loglik(model, &warped)?;
    let mut part_per_frame = BTreeMap::new();
    for part in model.joint_set.parts.keys() {
        let marg = marginalize_bodypart(model, part)?;
        let restricted = warped.restrict_to_part(part)?;
        let (_, pf) = sequence_loglik(&marg, &restricted)?;
        part_per_frame.insert(part.clone(), pf);
    }

    // Segmentation of the warped timeline.
    let warped_profile = motion_profile(&warped, cfg.window)?;
    let segments = segment(&warped_profile, tau, cfg.strategy, 0);

    let global_scope = calibration
        .scopes
        .get(GLOBAL_SCOPE)
        .ok_or_else(|| Error::ModelValidation("calibration is missing the global scope".into()))?;
    let global = global_scope.percent(mean(&per_frame));

    let mut parts = BTreeMap::new();
    let mut part_segment_scores = BTreeMap::new();
    for (part, pf) in &part_per_frame {
        let scope = calibration.scopes.get(part).ok_or_else(|| {
            Error::ModelValidation(format!("calibration is missing scope {part}"))
        })?;
        let raw_score = scope.percent(mean(pf));
        let weight = cfg.part_weights.get(part).copied().unwrap_or(1.0);
        parts.insert(
            part.clone(),
            (100.0 - weight * (100.0 - raw_score)).clamp(0.0, 100.0),
        );
        let mut seg_scores = Vec::with_capacity(segments.len());
        for s in &segments {
            let (good, floor) = segment_anchors(scope, s.start, s.end, &cfg.margin)?;
            seg_scores.push(percent(mean(&pf[s.start..s.end]), good, floor));
        }
        part_segment_scores.insert(part.clone(), seg_scores);
    }

    let mut segment_scores = Vec::with_capacity(segments.len());
    for s in &segments {
        let (good, floor) = segment_anchors(global_scope, s.start, s.end, &cfg.margin)?;
        segment_scores.push(SegmentScore {
            start: s.start,
            end: s.end,
            kind: s.kind,
            score: percent(mean(&per_frame[s.start..s.end]), good, floor),
        });
    }

    let report = AssessmentReport {
        global,
        parts,
        start_frame: start,
        segments: segment_scores,
        errors: Vec::new(),
        diagnostics: Diagnostics {
            exercise: model.exercise.clone(),
            subject: seq.subject.clone(),
            tau,
            window: cfg.window,
            strategy: cfg.strategy,
            dtw_cost,
            assessed_frames,
            mean_frame_loglik: mean(&per_frame),
        },
    };
    let detail = AssessmentDetail {
        warped,
        per_frame_loglik: per_frame,
        part_per_frame,
        sigma: warped_profile.sigma,
        segments,
        part_segment_scores,
    };
    Ok((report, detail))
}

/// Canonical JSON text for a report.
pub fn report_to_json(report: &AssessmentReport) -> Result<String> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    Ok(json)
}

pub fn save_report(report: &AssessmentReport, path: &Path) -> Result<()> {
    std::fs::write(path, report_to_json(report)?)?;
    Ok(())
}

pub fn load_report(path: &Path) -> Result<AssessmentReport> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Per-frame log-likelihood and motion CSV (`frame,loglik,sigma`) of the
/// warped timeline.
pub fn timeseries_csv(detail: &AssessmentDetail) -> String {
    let mut out = String::from("frame,loglik,sigma\n");
    for (i, (ll, s)) in detail
        .per_frame_loglik
        .iter()
        .zip(&detail.sigma)
        .enumerate()
    {
        out.push_str(&format!("{i},{ll},{s}\n"));
    }
    out
}

/// Color for a score: red at 0 through blue at 100.
fn score_color(score: f64) -> String {
    let t = (score / 100.0).clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(211.0, 33.0), lerp(47.0, 101.0), lerp(47.0, 211.0))
}

/// A simple score visualization: one colored band per segment along the
/// reference timeline (red = poor, blue = good), with scores printed and
/// segment boundaries marked.
pub fn report_svg(report: &AssessmentReport) -> String {
    let width = 800.0;
    let height = 170.0;
    let band_top = 60.0;
    let band_bottom = 130.0;
    let total = report
        .segments
        .last()
        .map(|s| s.end as f64)
        .unwrap_or(1.0)
        .max(1.0);
    let x_of = |frame: usize| 20.0 + (width - 40.0) * frame as f64 / total;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"20\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">\
         {} | subject {} | global {:.1}%</text>\n",
        xml_escape(&report.diagnostics.exercise),
        xml_escape(&report.diagnostics.subject),
        report.global
    ));
    let mut part_line = String::new();
    for (part, score) in &report.parts {
        part_line.push_str(&format!("{part} {score:.1}%  "));
    }
    svg.push_str(&format!(
        "  <text x=\"20\" y=\"44\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
        xml_escape(part_line.trim_end())
    ));
    for s in &report.segments {
        let x0 = x_of(s.start);
        let x1 = x_of(s.end);
        svg.push_str(&format!(
            "  <rect x=\"{:.2}\" y=\"{band_top}\" width=\"{:.2}\" height=\"{}\" \
             fill=\"{}\" stroke=\"none\"/>\n",
            x0,
            x1 - x0,
            band_bottom - band_top,
            score_color(s.score)
        ));
        let label = match s.kind {
            SegmentKind::Transition => "T",
            SegmentKind::Hold => "H",
        };
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             fill=\"#ffffff\" text-anchor=\"middle\">{label} {:.0}%</text>\n",
            (x0 + x1) / 2.0,
            (band_top + band_bottom) / 2.0 + 4.0,
            s.score
        ));
    }
    for s in &report.segments {
        let x = x_of(s.start);
        svg.push_str(&format!(
            "  <line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" \
             stroke=\"#222222\" stroke-width=\"1\"/>\n",
            band_top - 6.0,
            band_bottom + 6.0
        ));
    }
    if let Some(last) = report.segments.last() {
        let x = x_of(last.end);
        svg.push_str(&format!(
            "  <line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" \
             stroke=\"#222222\" stroke-width=\"1\"/>\n",
            band_top - 6.0,
            band_bottom + 6.0
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"20\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">\
         frames 0..{} on the reference timeline; start offset {} frames</text>\n",
        height - 14.0,
        total as usize,
        report.start_frame
    ));
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn save_svg(report: &AssessmentReport, path: &Path) -> Result<()> {
    std::fs::write(path, report_svg(report))?;
    Ok(())
}

pub fn save_timeseries_csv(detail: &AssessmentDetail, path: &Path) -> Result<()> {
    std::fs::write(path, timeseries_csv(detail))?;
    Ok(())
}
