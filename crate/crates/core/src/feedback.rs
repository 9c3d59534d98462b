//! Turning low-scoring segments into coaching feedback.
//!
//! Deviations from the ideal movement are summarized as tangent-space
//! residuals, averaged per segment and body part into fixed-length
//! feature vectors, and classified into known error patterns with linear
//! one-vs-rest SVMs whose decision values are calibrated into
//! probabilities. Confident classifications are rendered through an
//! advice template dictionary.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::assessment::{AssessmentDetail, AssessmentReport, ErrorFinding, Segment};
use crate::error::{Error, Result};
use crate::movement_model::IdealMovement;
use crate::pose_manifold::{pose_log, PoseTangent};
use crate::skeleton_io::{JointSet, PoseSequence};

/// Default confidence gate: below this no advice is emitted.
pub const DEFAULT_CONFIDENCE_GATE: f64 = 0.6;

/// Per-frame deviation of a warped sequence from the ideal movement,
/// expressed in the tangent space at each ideal frame.
pub fn tangent_residuals(
    ideal: &IdealMovement,
    warped: &PoseSequence,
) -> Result<Vec<PoseTangent>> {
    if ideal.frames.len() != warped.len() {
        return Err(Error::LengthMismatch {
            expected: ideal.frames.len(),
            found: warped.len(),
        });
    }
    if ideal.joint_set.names != warped.joint_set.names {
        return Err(Error::JointSetMismatch);
    }
    ideal
        .frames
        .iter()
        .zip(&warped.frames)
        .map(|(i, w)| pose_log(&i.pose, &w.pose))
        .collect()
}

/// Mean residual of one body part over one segment: the six tangent
/// components of each of the part's joints, averaged over the segment's
/// frames. Feature length is `6 * (number of joints in the part)`.
pub fn aggregate_features(
    residuals: &[PoseTangent],
    segment: &Segment,
    joint_set: &JointSet,
    part: &str,
) -> Result<DVector<f64>> {
    let idx = joint_set.part_indices(part)?;
    if segment.start >= segment.end || segment.end > residuals.len() {
        return Err(Error::NotEnoughData(format!(
            "segment [{}, {}) is empty or exceeds the {} residual frames",
            segment.start,
            segment.end,
            residuals.len()
        )));
    }
    let dim = 6 * idx.len();
    let mut feature = DVector::zeros(dim);
    for r in &residuals[segment.start..segment.end] {
        for (slot, &j) in idx.iter().enumerate() {
            for d in 0..6 {
                feature[6 * slot + d] += r.coords[6 * j + d];
            }
        }
    }
    feature /= (segment.end - segment.start) as f64;
    Ok(feature)
}

/// One labeled training example for the error classifier.
#[derive(Debug, Clone)]
pub struct ErrorExample {
    pub exercise: String,
    pub part: String,
    pub label: String,
    pub feature: DVector<f64>,
}

/// SVM training settings.
#[derive(Debug, Clone)]
pub struct SvmConfig {
    /// Hinge-loss weight of the soft-margin objective.
    pub c: f64,
    /// Deterministic batch subgradient epochs.
    pub epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 2000,
        }
    }
}

/// Sigmoid calibration parameters for one class: maps a decision value
/// `s` to `1 / (1 + exp(a s + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

/// One-vs-rest linear classifiers for a single (exercise, part) scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeClassifier {
    pub exercise: String,
    pub part: String,
    pub classes: Vec<String>,
    /// One weight vector per class.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub platt: Vec<PlattParams>,
}

pub const CLASSIFIER_VERSION: u32 = 1;

/// A trained error classifier over one or more scopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorClassifier {
    pub version: u32,
    /// Confidence gate: classifications below it yield no advice.
    pub theta: f64,
    pub scopes: Vec<ScopeClassifier>,
}

impl ErrorClassifier {
    pub fn scope(&self, exercise: &str, part: &str) -> Option<&ScopeClassifier> {
        self.scopes
            .iter()
            .find(|s| s.exercise == exercise && s.part == part)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CLASSIFIER_VERSION {
            return Err(Error::ClassifierValidation(format!(
                "unsupported classifier version {}",
                self.version
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::ClassifierValidation(
                "theta must lie in [0, 1]".into(),
            ));
        }
        for s in &self.scopes {
            let n = s.classes.len();
            if n < 2 {
                return Err(Error::ClassifierValidation(format!(
                    "scope {}/{} has fewer than two classes",
                    s.exercise, s.part
                )));
            }
            if s.weights.len() != n || s.biases.len() != n || s.platt.len() != n {
                return Err(Error::ClassifierValidation(format!(
                    "scope {}/{} has inconsistent per-class arrays",
                    s.exercise, s.part
                )));
            }
            let dim = s.weights[0].len();
            if dim == 0 || s.weights.iter().any(|w| w.len() != dim) {
                return Err(Error::ClassifierValidation(format!(
                    "scope {}/{} has inconsistent weight dimensions",
                    s.exercise, s.part
                )));
            }
        }
        Ok(())
    }
}

/// Soft-margin linear SVM via deterministic batch subgradient descent on
/// `||w||^2 / 2 + C * sum hinge(y (w.x + b))`. The bias is folded in as a
/// constant feature. Labels must be +/-1.
fn train_linear_svm(
    features: &[DVector<f64>],
    labels: &[f64],
    cfg: &SvmConfig,
) -> (DVector<f64>, f64) {
    let n = features.len();
    let dim = features[0].len();
    // Augmented weights: last entry is the bias.
    let mut w = DVector::<f64>::zeros(dim + 1);
    let lambda = 1.0 / (cfg.c * n as f64);
    for epoch in 0..cfg.epochs {
        let eta = 1.0 / (lambda * (epoch + 1) as f64);
        let mut grad = &w * lambda;
        for (x, &y) in features.iter().zip(labels) {
            let mut score = w[dim];
            for d in 0..dim {
                score += w[d] * x[d];
            }
            if y * score < 1.0 {
                let scale = -y / n as f64;
                for d in 0..dim {
                    grad[d] += scale * x[d];
                }
                grad[dim] += scale;
            }
        }
        w -= grad * eta;
    }
    let bias = w[dim];
    (w.remove_row(dim), bias)
}

/// Platt scaling: fits `p(y=1 | s) = 1 / (1 + exp(a s + b))` to decision
/// values by regularized maximum likelihood (Newton iterations with the
/// standard smoothed targets). Deterministic.
fn fit_platt(scores: &[f64], labels: &[f64]) -> PlattParams {
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&y| y > 0.0).count() as f64;
    let n_neg = n as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels
        .iter()
        .map(|&y| if y > 0.0 { hi } else { lo })
        .collect();
    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let sigma = 1e-12;
    for _ in 0..100 {
        let (mut g_a, mut g_b) = (0.0, 0.0);
        let (mut h_aa, mut h_ab, mut h_bb) = (sigma, 0.0, sigma);
        for (&s, &t) in scores.iter().zip(&targets) {
            let z = a * s + b;
            // p = probability of the positive class.
            let p = if z >= 0.0 {
                let e = (-z).exp();
                e / (1.0 + e)
            } else {
                1.0 / (1.0 + z.exp())
            };
            let d = p - t;
            g_a += d * s;
            g_b += d;
            let w = p * (1.0 - p);
            h_aa += w * s * s;
            h_ab += w * s;
            h_bb += w;
        }
        // The gradient above is for minimizing cross-entropy of p
        // against t; note dp/dz = -p(1-p), so flip signs accordingly.
        let (g_a, g_b) = (-g_a, -g_b);
        let det = h_aa * h_bb - h_ab * h_ab;
        if det.abs() < 1e-18 {
            break;
        }
        let da = (g_a * h_bb - g_b * h_ab) / det;
        let db = (g_b * h_aa - g_a * h_ab) / det;
        a -= da;
        b -= db;
        if da.abs().max(db.abs()) < 1e-10 {
            break;
        }
    }
    PlattParams { a, b }
}

fn platt_prob(p: &PlattParams, score: f64) -> f64 {
    let z = p.a * score + p.b;
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Trains one-vs-rest linear SVMs per (exercise, part) scope, with
/// sigmoid probability calibration per class. Every scope needs at least
/// two classes and every class at least three examples.
pub fn train_error_classifier(
    examples: &[ErrorExample],
    theta: f64,
    cfg: &SvmConfig,
) -> Result<ErrorClassifier> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidConfig("theta must lie in [0, 1]".into()));
    }
    let mut by_scope: BTreeMap<(String, String), Vec<&ErrorExample>> = BTreeMap::new();
    for ex in examples {
        by_scope
            .entry((ex.exercise.clone(), ex.part.clone()))
            .or_default()
            .push(ex);
    }
    if by_scope.is_empty() {
        return Err(Error::NotEnoughData("no labeled examples".into()));
    }
    let mut scopes = Vec::with_capacity(by_scope.len());
    for ((exercise, part), exs) in by_scope {
        let mut classes: Vec<String> = exs.iter().map(|e| e.label.clone()).collect();
        classes.sort();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::NotEnoughData(format!(
                "scope {exercise}/{part} has a single class {:?}; need at least two",
                classes.first()
            )));
        }
        let dim = exs[0].feature.len();
        for e in &exs {
            if e.feature.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    found: e.feature.len(),
                });
            }
        }
        let features: Vec<DVector<f64>> = exs.iter().map(|e| e.feature.clone()).collect();
        let mut weights = Vec::with_capacity(classes.len());
        let mut biases = Vec::with_capacity(classes.len());
        let mut platt = Vec::with_capacity(classes.len());
        for class in &classes {
            let count = exs.iter().filter(|e| &e.label == class).count();
            if count < 3 {
                return Err(Error::NotEnoughData(format!(
                    "class {class} in scope {exercise}/{part} has {count} examples; need at least 3"
                )));
            }
            let labels: Vec<f64> = exs
                .iter()
                .map(|e| if &e.label == class { 1.0 } else { -1.0 })
                .collect();
            let (w, b) = train_linear_svm(&features, &labels, cfg);
            let scores: Vec<f64> = features.iter().map(|x| w.dot(x) + b).collect();
            platt.push(fit_platt(&scores, &labels));
            weights.push(w.iter().copied().collect());
            biases.push(b);
        }
        scopes.push(ScopeClassifier {
            exercise,
            part,
            classes,
            weights,
            biases,
            platt,
        });
    }
    Ok(ErrorClassifier {
        version: CLASSIFIER_VERSION,
        theta,
        scopes,
    })
}

/// Classifies a feature vector within a scope. Returns the winning label
/// and its calibrated confidence, or `None` when the confidence stays
/// below the classifier's gate.
pub fn classify_error(
    classifier: &ErrorClassifier,
    feature: &DVector<f64>,
    exercise: &str,
    part: &str,
) -> Result<Option<(String, f64)>> {
    let scope = classifier
        .scope(exercise, part)
        .ok_or_else(|| Error::UnknownScope {
            exercise: exercise.to_string(),
            part: part.to_string(),
        })?;
    let dim = scope.weights[0].len();
    if feature.len() != dim {
        return Err(Error::LengthMismatch {
            expected: dim,
            found: feature.len(),
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, (w, &b)) in scope.weights.iter().zip(&scope.biases).enumerate() {
        let score: f64 = w.iter().zip(feature.iter()).map(|(a, b)| a * b).sum::<f64>() + b;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    let (idx, score) = best.expect("at least two classes");
    let confidence = platt_prob(&scope.platt[idx], score);
    if confidence < classifier.theta {
        Ok(None)
    } else {
        Ok(Some((scope.classes[idx].clone(), confidence)))
    }
}

// ---------------------------------------------------------------------
// Advice rendering
// ---------------------------------------------------------------------

/// Advice templates: exercise -> part -> error label -> template. The
/// placeholders `{part}` and `{segment}` are substituted at render time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdviceDictionary {
    pub templates: BTreeMap<String, BTreeMap<String, BTreeMap<String, String>>>,
}

impl AdviceDictionary {
    pub fn lookup(&self, exercise: &str, part: &str, label: &str) -> Option<&String> {
        self.templates.get(exercise)?.get(part)?.get(label)
    }
}

/// Human-readable body part name: `LeftArm` becomes `left arm`.
pub fn part_display_name(part: &str) -> String {
    let mut out = String::new();
    for (i, ch) in part.chars().enumerate() {
        if ch.is_uppercase() && i > 0 {
            out.push(' ');
        }
        out.push(ch.to_ascii_lowercase());
    }
    out
}

/// Renders advice for a classified error. Falls back to a generic
/// sentence when the dictionary has no template for the error.
/// `segment_number` is 1-based as shown to the user.
pub fn advise(
    dict: &AdviceDictionary,
    exercise: &str,
    part: &str,
    label: &str,
    segment_number: usize,
) -> String {
    let part_name = part_display_name(part);
    match dict.lookup(exercise, part, label) {
        Some(template) => template
            .replace("{part}", &part_name)
            .replace("{segment}", &segment_number.to_string()),
        None => format!("Your {part_name} movement needs correction in part {segment_number}."),
    }
}

/// Fills a report's error list: every part/segment cell whose score is
/// below `score_threshold` is classified, and confident classifications
/// become findings with advice. Parts without a trained scope are
/// skipped.
pub fn annotate_report(
    report: &mut AssessmentReport,
    detail: &AssessmentDetail,
    ideal: &IdealMovement,
    classifier: &ErrorClassifier,
    dict: &AdviceDictionary,
    score_threshold: f64,
) -> Result<()> {
    classifier.validate()?;
    let residuals = tangent_residuals(ideal, &detail.warped)?;
    let exercise = &report.diagnostics.exercise;
    let mut findings = Vec::new();
    for (part, seg_scores) in &detail.part_segment_scores {
        if classifier.scope(exercise, part).is_none() {
            continue;
        }
        for (si, (seg, &score)) in detail.segments.iter().zip(seg_scores).enumerate() {
            if score >= score_threshold {
                continue;
            }
            let feature = aggregate_features(&residuals, seg, &detail.warped.joint_set, part)?;
            if let Some((label, confidence)) =
                classify_error(classifier, &feature, exercise, part)?
            {
                let advice = advise(dict, exercise, part, &label, si + 1);
                findings.push(ErrorFinding {
                    part: part.clone(),
                    segment: si,
                    label,
                    confidence,
                    advice,
                });
            }
        }
    }
    report.errors = findings;
    Ok(())
}

// ---------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------

/// Canonical JSON text for a classifier.
pub fn classifier_to_json(classifier: &ErrorClassifier) -> Result<String> {
    let mut json = serde_json::to_string_pretty(classifier)?;
    json.push('\n');
    Ok(json)
}

pub fn save_classifier(classifier: &ErrorClassifier, path: &Path) -> Result<()> {
    std::fs::write(path, classifier_to_json(classifier)?)?;
    Ok(())
}

pub fn load_classifier(path: &Path) -> Result<ErrorClassifier> {
    let text = std::fs::read_to_string(path)?;
    let classifier: ErrorClassifier = serde_json::from_str(&text)?;
    classifier.validate()?;
    Ok(classifier)
}

pub fn load_advice(path: &Path) -> Result<AdviceDictionary> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
