//! Probabilistic movement model: a Gaussian mixture over `(time, pose)`
//! learned from aligned demonstrations, and Gaussian mixture regression
//! to reproduce the ideal movement.
//!
//! Each mixture component carries a scalar mean time, a mean pose on the
//! manifold and a full covariance over `[dt, dpose]` expressed in the
//! tangent space at its own mean pose, so densities are evaluated by
//! log-mapping a frame into a component's chart. EM is deterministic:
//! components are initialized from consecutive time slices, the E step
//! uses log-sum-exp, and the M step re-estimates pose means as weighted
//! Karcher means.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::alignment::{dtw_align, warp_to_reference, WarpPath};
use crate::assessment::Calibration;
use crate::error::{Error, Result};
use crate::pose_manifold::{
    karcher_mean_weighted, pose_exp, pose_log, HumanPose, PoseTangent, TangentCovariance,
};
use crate::skeleton_io::{JointSet, PoseSequence};

const LN_2PI: f64 = 1.8378770664093453;

/// One component of the movement mixture.
#[derive(Debug, Clone)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean_time: f64,
    pub mean_pose: HumanPose,
    /// Covariance over `[dt, dpose]` in the tangent space at `mean_pose`;
    /// dimension `1 + 6J`.
    pub covariance: TangentCovariance,
}

/// Summary of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub demo_count: usize,
    /// Total data log-likelihood after initialization and after each
    /// accepted EM iteration.
    pub em_trace: Vec<f64>,
    pub em_converged: bool,
}

/// A trained exercise model.
#[derive(Debug, Clone)]
pub struct ExerciseModel {
    pub exercise: String,
    pub joint_set: JointSet,
    /// Number of frames of the reference timeline all sequences are
    /// warped onto before evaluation.
    pub t_ref: usize,
    pub fps: f64,
    pub components: Vec<GaussianComponent>,
    pub training: TrainingInfo,
    pub calibration: Option<Calibration>,
}

/// EM and numeric settings for training.
#[derive(Debug, Clone)]
pub struct EmConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub regularization: f64,
    pub karcher_tol: f64,
    pub karcher_max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_tol: 1e-6,
            regularization: 1e-6,
            karcher_tol: 1e-9,
            karcher_max_iter: 100,
        }
    }
}

/// Normalized time of frame `idx` on a reference timeline of `t_ref`
/// frames: 0 at the first frame, 1 at the last.
pub fn normalized_time(idx: usize, t_ref: usize) -> f64 {
    if t_ref <= 1 {
        0.0
    } else {
        idx as f64 / (t_ref - 1) as f64
    }
}

fn log_sum_exp(vals: &[f64]) -> f64 {
    let max = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = vals.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// A component with its Cholesky factor ready for density evaluation.
struct PreparedComponent<'a> {
    component: &'a GaussianComponent,
    chol: Cholesky<f64, Dyn>,
    /// `-(D ln 2pi + ln det Sigma) / 2`
    log_norm: f64,
}

fn prepare(component: &GaussianComponent) -> Result<PreparedComponent<'_>> {
    let chol = Cholesky::new(component.covariance.matrix.clone()).ok_or_else(|| {
        Error::SingularCovariance("component covariance is not positive definite".into())
    })?;
    let d = component.covariance.dim() as f64;
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    Ok(PreparedComponent {
        component,
        chol,
        log_norm: -0.5 * (d * LN_2PI + log_det),
    })
}

impl PreparedComponent<'_> {
    /// Log density of `(t, pose)` under this component, evaluated in the
    /// tangent chart at the component's mean pose.
    fn log_density(&self, t: f64, pose: &HumanPose) -> Result<f64> {
        let dp = pose_log(&self.component.mean_pose, pose)?;
        let mut v = DVector::zeros(1 + dp.dim());
        v[0] = t - self.component.mean_time;
        v.rows_mut(1, dp.dim()).copy_from(&dp.coords);
        let quad = v.dot(&self.chol.solve(&v));
        Ok(self.log_norm - 0.5 * quad)
    }
}

fn check_joint_names(model: &ExerciseModel, seq: &PoseSequence) -> Result<()> {
    if model.joint_set.names != seq.joint_set.names {
        return Err(Error::JointSetMismatch);
    }
    Ok(())
}

/// Warps every demonstration onto the first one's timeline, so all
/// returned sequences have the same length and frame indices correspond.
pub fn align_demos(demos: &[PoseSequence]) -> Result<Vec<PoseSequence>> {
    let reference = demos
        .first()
        .ok_or_else(|| Error::NotEnoughData("no demonstrations".into()))?;
    if reference.len() < 2 {
        return Err(Error::NotEnoughData(
            "reference demonstration needs at least two frames".into(),
        ));
    }
    let t_ref = reference.len();
    let mut aligned = Vec::with_capacity(demos.len());
    for demo in demos {
        if demo.joint_set.names != reference.joint_set.names {
            return Err(Error::JointSetMismatch);
        }
        let path = if std::ptr::eq(demo, reference) {
            WarpPath::identity(t_ref)
        } else {
            dtw_align(demo, reference)?
        };
        aligned.push(warp_to_reference(demo, &path, t_ref)?);
    }
    Ok(aligned)
}

/// Trains a mixture model: aligns the demonstrations onto the first one,
/// then runs EM on the pooled `(time, pose)` frames.
pub fn train_model(demos: &[PoseSequence], k: usize, cfg: &EmConfig) -> Result<ExerciseModel> {
    let aligned = align_demos(demos)?;
    train_on_aligned(&aligned, k, cfg)
}

/// Trains on demonstrations that are already aligned to a common
/// timeline (all the same length).
pub fn train_on_aligned(
    aligned: &[PoseSequence],
    k: usize,
    cfg: &EmConfig,
) -> Result<ExerciseModel> {
    if aligned.len() < 2 {
        return Err(Error::NotEnoughData(
            "training needs at least two demonstrations".into(),
        ));
    }
    let t_ref = aligned[0].len();
    if t_ref < 2 {
        return Err(Error::NotEnoughData(
            "demonstrations need at least two frames".into(),
        ));
    }
    for demo in aligned {
        if demo.len() != t_ref {
            return Err(Error::LengthMismatch {
                expected: t_ref,
                found: demo.len(),
            });
        }
        if demo.joint_set.names != aligned[0].joint_set.names {
            return Err(Error::JointSetMismatch);
        }
    }
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if k > t_ref {
        return Err(Error::NotEnoughData(format!(
            "K = {k} exceeds the {t_ref} frames of the reference timeline"
        )));
    }

    // Pooled data: (normalized time, pose) for every frame of every demo.
    let data: Vec<(f64, &HumanPose)> = aligned
        .iter()
        .flat_map(|demo| {
            demo.frames
                .iter()
                .enumerate()
                .map(|(i, f)| (normalized_time(i, t_ref), &f.pose))
        })
        .collect();
    let n = data.len();

    // Deterministic initialization: split [0, 1] into K equal time slices
    // and fit each component to its slice.
    let mut components = Vec::with_capacity(k);
    for c in 0..k {
        let lo = c as f64 / k as f64;
        let hi = (c + 1) as f64 / k as f64;
        let members: Vec<usize> = (0..n)
            .filter(|&i| {
                let t = data[i].0;
                t >= lo && (t < hi || (c == k - 1 && t <= hi))
            })
            .collect();
        if members.is_empty() {
            return Err(Error::NotEnoughData(format!(
                "time slice {c} of {k} received no frames"
            )));
        }
        let weights = vec![1.0; members.len()];
        let poses: Vec<HumanPose> = members.iter().map(|&i| data[i].1.clone()).collect();
        let mean_pose =
            karcher_mean_weighted(&poses, &weights, cfg.karcher_tol, cfg.karcher_max_iter)?.pose;
        let mean_time: f64 =
            members.iter().map(|&i| data[i].0).sum::<f64>() / members.len() as f64;
        let covariance = accumulate_covariance(
            &data,
            members.iter().map(|&i| (i, 1.0)),
            members.len() as f64,
            mean_time,
            &mean_pose,
            cfg.regularization,
        )?;
        components.push(GaussianComponent {
            weight: members.len() as f64 / n as f64,
            mean_time,
            mean_pose,
            covariance,
        });
    }

    let mut loglik = total_loglik(&components, &data)?;
    let mut trace = vec![loglik];
    let mut converged = false;

    for _ in 0..cfg.max_iter {
        let next = em_step(&components, &data, cfg)?;
        let next_loglik = total_loglik(&next, &data)?;
        if next_loglik + 1e-12 * loglik.abs().max(1.0) < loglik {
            // Numerical regression: keep the previous parameters.
            converged = true;
            break;
        }
        components = next;
        trace.push(next_loglik);
        let improvement = next_loglik - loglik;
        loglik = next_loglik;
        if improvement.abs() <= cfg.rel_tol * loglik.abs().max(1e-12) {
            converged = true;
            break;
        }
    }

    Ok(ExerciseModel {
        exercise: aligned[0].exercise.clone(),
        joint_set: aligned[0].joint_set.clone(),
        t_ref,
        fps: aligned[0].fps,
        components,
        training: TrainingInfo {
            demo_count: aligned.len(),
            em_trace: trace,
            em_converged: converged,
        },
        calibration: None,
    })
}

/// Covariance over `[dt, dpose]` from weighted data, in the chart at
/// `mean_pose`, normalized by `total_weight`, with diagonal loading.
fn accumulate_covariance(
    data: &[(f64, &HumanPose)],
    weighted_members: impl Iterator<Item = (usize, f64)>,
    total_weight: f64,
    mean_time: f64,
    mean_pose: &HumanPose,
    regularization: f64,
) -> Result<TangentCovariance> {
    let d = 1 + mean_pose.tangent_dim();
    let mut m = DMatrix::zeros(d, d);
    for (i, w) in weighted_members {
        let (t, pose) = (data[i].0, data[i].1);
        let dp = pose_log(mean_pose, pose)?;
        let mut v = DVector::zeros(d);
        v[0] = t - mean_time;
        v.rows_mut(1, d - 1).copy_from(&dp.coords);
        m.syger(w, &v, &v, 1.0);
    }
    m /= total_weight;
    for r in 0..d {
        for c in (r + 1)..d {
            m[(r, c)] = m[(c, r)];
        }
    }
    for i in 0..d {
        m[(i, i)] += regularization;
    }
    Ok(TangentCovariance { matrix: m })
}

fn total_loglik(components: &[GaussianComponent], data: &[(f64, &HumanPose)]) -> Result<f64> {
    let prepared: Vec<PreparedComponent> =
        components.iter().map(prepare).collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut logs = vec![0.0; prepared.len()];
    for &(t, pose) in data {
        for (k, p) in prepared.iter().enumerate() {
            logs[k] = p.component.weight.ln() + p.log_density(t, pose)?;
        }
        total += log_sum_exp(&logs);
    }
    Ok(total)
}

fn em_step(
    components: &[GaussianComponent],
    data: &[(f64, &HumanPose)],
    cfg: &EmConfig,
) -> Result<Vec<GaussianComponent>> {
    let n = data.len();
    let k = components.len();
    let prepared: Vec<PreparedComponent> =
        components.iter().map(prepare).collect::<Result<_>>()?;

    // E step: responsibilities via log-sum-exp.
    let mut gamma = vec![0.0; n * k];
    let mut logs = vec![0.0; k];
    for (i, &(t, pose)) in data.iter().enumerate() {
        for (c, p) in prepared.iter().enumerate() {
            logs[c] = p.component.weight.ln() + p.log_density(t, pose)?;
        }
        let lse = log_sum_exp(&logs);
        for c in 0..k {
            gamma[i * k + c] = (logs[c] - lse).exp();
        }
    }

    // M step.
    let mut next = Vec::with_capacity(k);
    let poses: Vec<HumanPose> = data.iter().map(|&(_, p)| p.clone()).collect();
    for c in 0..k {
        let weights: Vec<f64> = (0..n).map(|i| gamma[i * k + c]).collect();
        let nk: f64 = weights.iter().sum();
        if !(nk > 0.0) {
            return Err(Error::SingularCovariance(format!(
                "component {c} lost all responsibility"
            )));
        }
        let mean_time = (0..n).map(|i| weights[i] * data[i].0).sum::<f64>() / nk;
        let mean_pose = karcher_mean_weighted(
            &poses,
            &weights,
            cfg.karcher_tol,
            cfg.karcher_max_iter,
        )?
        .pose;
        let covariance = accumulate_covariance(
            data,
            (0..n).map(|i| (i, weights[i])),
            nk,
            mean_time,
            &mean_pose,
            cfg.regularization,
        )?;
        next.push(GaussianComponent {
            weight: nk / n as f64,
            mean_time,
            mean_pose,
            covariance,
        });
    }
    Ok(next)
}

/// Total and per-frame log-likelihood of a sequence that is already on
/// the reference timeline (exactly `t_ref` frames, same joint set).
pub fn sequence_loglik(model: &ExerciseModel, seq: &PoseSequence) -> Result<(f64, Vec<f64>)> {
    check_joint_names(model, seq)?;
    if seq.len() != model.t_ref {
        return Err(Error::LengthMismatch {
            expected: model.t_ref,
            found: seq.len(),
        });
    }
    let prepared: Vec<PreparedComponent> =
        model.components.iter().map(prepare).collect::<Result<_>>()?;
    let mut per_frame = Vec::with_capacity(seq.len());
    let mut logs = vec![0.0; prepared.len()];
    for (i, frame) in seq.frames.iter().enumerate() {
        let t = normalized_time(i, model.t_ref);
        for (c, p) in prepared.iter().enumerate() {
            logs[c] = p.component.weight.ln() + p.log_density(t, &frame.pose)?;
        }
        per_frame.push(log_sum_exp(&logs));
    }
    Ok((per_frame.iter().sum(), per_frame))
}

/// One frame of the regenerated ideal movement.
#[derive(Debug, Clone)]
pub struct IdealFrame {
    /// Normalized time in [0, 1].
    pub time: f64,
    pub pose: HumanPose,
    /// Expected pose covariance at this time, in the tangent space at
    /// `pose` (dimension `6J`).
    pub covariance: TangentCovariance,
}

/// The ideal movement regression output.
#[derive(Debug, Clone)]
pub struct IdealMovement {
    pub exercise: String,
    pub joint_set: JointSet,
    pub fps: f64,
    pub frames: Vec<IdealFrame>,
}

impl IdealMovement {
    /// View as a pose sequence on the reference timeline (timestamps are
    /// frame indices, like warped sequences).
    pub fn to_pose_sequence(&self) -> PoseSequence {
        PoseSequence {
            subject: "ideal".into(),
            exercise: self.exercise.clone(),
            fps: self.fps,
            joint_set: self.joint_set.clone(),
            frames: self
                .frames
                .iter()
                .enumerate()
                .map(|(i, f)| crate::skeleton_io::PoseFrame {
                    t: i as f64,
                    pose: f.pose.clone(),
                })
                .collect(),
        }
    }
}

/// The reference timeline as normalized timestamps, one per frame.
pub fn reference_timestamps(model: &ExerciseModel) -> Vec<f64> {
    (0..model.t_ref)
        .map(|i| normalized_time(i, model.t_ref))
        .collect()
}

/// Gaussian mixture regression of pose given time, at each requested
/// normalized timestamp (all must lie in [0, 1]).
pub fn gmr_generate(model: &ExerciseModel, timestamps: &[f64]) -> Result<IdealMovement> {
    if model.components.is_empty() {
        return Err(Error::ModelValidation("model has no components".into()));
    }
    let k = model.components.len();
    let d_pose = 6 * model.joint_set.len();

    // Per-component pieces that do not depend on t: the time variance,
    // the pose-time cross column, and the conditional pose covariance
    // (Schur complement), all in the component's own chart.
    struct CondPiece {
        s_tt: f64,
        s_pt: DVector<f64>,
        cond_cov: DMatrix<f64>,
    }
    let mut pieces = Vec::with_capacity(k);
    for comp in &model.components {
        let cov = &comp.covariance.matrix;
        if cov.nrows() != 1 + d_pose {
            return Err(Error::ModelValidation(format!(
                "component covariance has dimension {}, expected {}",
                cov.nrows(),
                1 + d_pose
            )));
        }
        let s_tt = cov[(0, 0)];
        if !(s_tt > 0.0) {
            return Err(Error::SingularCovariance(
                "non-positive time variance".into(),
            ));
        }
        let s_pt = DVector::from_fn(d_pose, |r, _| cov[(r + 1, 0)]);
        let s_pp = DMatrix::from_fn(d_pose, d_pose, |r, c| cov[(r + 1, c + 1)]);
        let cond_cov = &s_pp - &s_pt * s_pt.transpose() / s_tt;
        pieces.push(CondPiece { s_tt, s_pt, cond_cov });
    }

    let mut frames = Vec::with_capacity(timestamps.len());
    for &t in timestamps {
        if !(-1e-9..=1.0 + 1e-9).contains(&t) {
            return Err(Error::TimestampOutOfRange { value: t });
        }

        // Responsibilities of the components for this time, from the
        // 1-D time marginal.
        let mut logs = Vec::with_capacity(k);
        for (comp, piece) in model.components.iter().zip(&pieces) {
            let dt = t - comp.mean_time;
            logs.push(
                comp.weight.ln()
                    - 0.5 * (LN_2PI + piece.s_tt.ln() + dt * dt / piece.s_tt),
            );
        }
        let lse = log_sum_exp(&logs);
        let h: Vec<f64> = logs.iter().map(|l| (l - lse).exp()).collect();

        // Per-component conditional pose means, mapped back to the
        // manifold from each component's chart.
        let mut xi = Vec::with_capacity(k);
        for (comp, piece) in model.components.iter().zip(&pieces) {
            let mk = &piece.s_pt * ((t - comp.mean_time) / piece.s_tt);
            xi.push(pose_exp(&comp.mean_pose, &PoseTangent { coords: mk })?);
        }

        // Combine the component estimates: weighted intrinsic mean by
        // iterated tangent averaging, started at the dominant component.
        let start = h
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite responsibilities"))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut pose = xi[start].clone();
        for _ in 0..100 {
            let mut update = DVector::zeros(d_pose);
            for (p, w) in xi.iter().zip(&h) {
                update += pose_log(&pose, p)?.coords * *w;
            }
            let done = update.norm() < 1e-9;
            if !done {
                pose = pose_exp(&pose, &PoseTangent { coords: update })?;
            } else {
                break;
            }
        }

        // Blended covariance in the chart at the combined pose.
        let mut cov = DMatrix::zeros(d_pose, d_pose);
        for ((p, w), piece) in xi.iter().zip(&h).zip(&pieces) {
            let m = pose_log(&pose, p)?.coords;
            cov += (&piece.cond_cov + &m * m.transpose()) * *w;
        }
        let cov = (&cov + cov.transpose()) * 0.5;

        frames.push(IdealFrame {
            time: t,
            pose,
            covariance: TangentCovariance { matrix: cov },
        });
    }
    Ok(IdealMovement {
        exercise: model.exercise.clone(),
        joint_set: model.joint_set.clone(),
        fps: model.fps,
        frames,
    })
}

/// Regenerates the ideal movement on the model's own reference timeline
/// (exactly `t_ref` frames).
pub fn gmr_ideal(model: &ExerciseModel) -> Result<IdealMovement> {
    gmr_generate(model, &reference_timestamps(model))
}

/// Restriction of the model to one body part: the time dimension plus
/// the six tangent dimensions of each of the part's joints. Gaussian
/// marginals are principal sub-blocks, so weights and mean times are
/// unchanged while pose means and covariances are projected.
pub fn marginalize_bodypart(model: &ExerciseModel, part: &str) -> Result<ExerciseModel> {
    let joint_idx = model.joint_set.part_indices(part)?;
    let joint_set = model.joint_set.restrict(part)?;
    let mut dims = vec![0usize];
    for &j in &joint_idx {
        for d in 0..6 {
            dims.push(1 + 6 * j + d);
        }
    }
    let components = model
        .components
        .iter()
        .map(|comp| {
            let m = &comp.covariance.matrix;
            let sub = DMatrix::from_fn(dims.len(), dims.len(), |r, c| m[(dims[r], dims[c])]);
            GaussianComponent {
                weight: comp.weight,
                mean_time: comp.mean_time,
                mean_pose: comp.mean_pose.select_joints(&joint_idx),
                covariance: TangentCovariance { matrix: sub },
            }
        })
        .collect();
    Ok(ExerciseModel {
        exercise: model.exercise.clone(),
        joint_set,
        t_ref: model.t_ref,
        fps: model.fps,
        components,
        training: model.training.clone(),
        calibration: None,
    })
}

// ---------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    exercise: String,
    joint_set: Vec<String>,
    body_parts: std::collections::BTreeMap<String, Vec<String>>,
    #[serde(rename = "T_ref")]
    t_ref: usize,
    fps: f64,
    #[serde(rename = "K")]
    k: usize,
    components: Vec<ComponentFile>,
    training: TrainingInfo,
    calibration: Option<Calibration>,
}

#[derive(Serialize, Deserialize)]
struct ComponentFile {
    weight: f64,
    mean_time: f64,
    mean_pose: HumanPose,
    cov: Vec<Vec<f64>>,
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::ModelValidation(
            "covariance matrix is not square".into(),
        ));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

/// Canonical JSON text for a model.
pub fn model_to_json(model: &ExerciseModel) -> Result<String> {
    let file = ModelFile {
        version: MODEL_VERSION,
        exercise: model.exercise.clone(),
        joint_set: model.joint_set.names.clone(),
        body_parts: model.joint_set.parts.clone(),
        t_ref: model.t_ref,
        fps: model.fps,
        k: model.components.len(),
        components: model
            .components
            .iter()
            .map(|c| ComponentFile {
                weight: c.weight,
                mean_time: c.mean_time,
                mean_pose: c.mean_pose.clone(),
                cov: matrix_to_rows(&c.covariance.matrix),
            })
            .collect(),
        training: model.training.clone(),
        calibration: model.calibration.clone(),
    };
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    Ok(json)
}

pub fn save_model(model: &ExerciseModel, path: &Path) -> Result<()> {
    let json = model_to_json(model)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Parses and validates a model file.
pub fn model_from_json(text: &str) -> Result<ExerciseModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.version != MODEL_VERSION {
        return Err(Error::ModelValidation(format!(
            "unsupported model version {}",
            file.version
        )));
    }
    let joint_set = JointSet {
        names: file.joint_set,
        parts: file.body_parts,
    };
    joint_set
        .validate()
        .map_err(|e| Error::ModelValidation(format!("bad joint set: {e}")))?;
    if file.t_ref < 2 {
        return Err(Error::ModelValidation("T_ref must be at least 2".into()));
    }
    if !(file.fps > 0.0) {
        return Err(Error::ModelValidation("fps must be positive".into()));
    }
    if file.components.is_empty() {
        return Err(Error::ModelValidation("model has no components".into()));
    }
    if file.components.len() != file.k {
        return Err(Error::ModelValidation(format!(
            "K = {} but {} components present",
            file.k,
            file.components.len()
        )));
    }
    let weight_sum: f64 = file.components.iter().map(|c| c.weight).sum();
    if (weight_sum - 1.0).abs() > 1e-9 {
        return Err(Error::ModelValidation(format!(
            "component weights sum to {weight_sum}, expected 1"
        )));
    }
    let d = 1 + 6 * joint_set.len();
    let mut components = Vec::with_capacity(file.components.len());
    for (i, c) in file.components.into_iter().enumerate() {
        if !(c.weight > 0.0) {
            return Err(Error::ModelValidation(format!(
                "component {i} has non-positive weight"
            )));
        }
        if !c.mean_time.is_finite() {
            return Err(Error::ModelValidation(format!(
                "component {i} has non-finite mean time"
            )));
        }
        if c.mean_pose.joint_count() != joint_set.len() {
            return Err(Error::ModelValidation(format!(
                "component {i} mean pose has {} joints, expected {}",
                c.mean_pose.joint_count(),
                joint_set.len()
            )));
        }
        let matrix = rows_to_matrix(&c.cov)?;
        if matrix.nrows() != d {
            return Err(Error::ModelValidation(format!(
                "component {i} covariance has dimension {}, expected {d}",
                matrix.nrows()
            )));
        }
        let covariance = TangentCovariance { matrix };
        if !covariance.is_symmetric(1e-9) {
            return Err(Error::ModelValidation(format!(
                "component {i} covariance is not symmetric"
            )));
        }
        if Cholesky::new(covariance.matrix.clone()).is_none() {
            return Err(Error::ModelValidation(format!(
                "component {i} covariance is not positive definite"
            )));
        }
        components.push(GaussianComponent {
            weight: c.weight,
            mean_time: c.mean_time,
            mean_pose: c.mean_pose,
            covariance,
        });
    }
    if let Some(cal) = &file.calibration {
        cal.validate(file.t_ref)
            .map_err(|e| Error::ModelValidation(format!("bad calibration: {e}")))?;
    }
    Ok(ExerciseModel {
        exercise: file.exercise,
        joint_set,
        t_ref: file.t_ref,
        fps: file.fps,
        components,
        training: file.training,
        calibration: file.calibration,
    })
}

pub fn load_model(path: &Path) -> Result<ExerciseModel> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text)
}
