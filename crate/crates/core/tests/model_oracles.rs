//! Cross-checks of the movement model against independent references.
//!
//! When every frame carries the same orientation, the pose manifold's
//! curved factors contribute nothing: logarithms of identical rotations
//! are zero, intrinsic means reduce to arithmetic means, and training
//! collapses to ordinary Euclidean mixture fitting. These tests exploit
//! that to compare the full pipeline against a plain flat-space EM and
//! GMR written from scratch here, plus closed-form Gaussian facts.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};
use rehab_core::movement_model::{
    gmr_generate, marginalize_bodypart, normalized_time, sequence_loglik, train_on_aligned,
    EmConfig, ExerciseModel, GaussianComponent, TrainingInfo,
};
use rehab_core::pose_manifold::{HumanPose, JointPose, TangentCovariance, UnitQuaternion};
use rehab_core::skeleton_io::{JointSet, PoseFrame, PoseSequence};

const LN_2PI: f64 = 1.8378770664093453;

fn jitter(state: &mut u64) -> f64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    ((*state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 2.0
}

fn two_joint_set() -> JointSet {
    let mut parts = BTreeMap::new();
    parts.insert("Left".to_string(), vec!["A".to_string()]);
    parts.insert("Right".to_string(), vec!["B".to_string()]);
    JointSet {
        names: vec!["A".to_string(), "B".to_string()],
        parts,
    }
}

/// Demonstrations whose orientations are all the identity, so the model
/// lives entirely in the flat factors. White jitter keeps EM busy.
fn flat_demos(demo_count: usize, frames: usize) -> Vec<PoseSequence> {
    let joint_set = two_joint_set();
    (0..demo_count)
        .map(|d| {
            let mut state = (d as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15).max(1);
            let frames = (0..frames)
                .map(|i| {
                    let u = i as f64 / (frames - 1) as f64;
                    let a = Vector3::new(
                        0.4 * (std::f64::consts::PI * u).sin() + 0.05 * jitter(&mut state),
                        0.2 * u + 0.05 * jitter(&mut state),
                        0.05 * jitter(&mut state),
                    );
                    let b = Vector3::new(
                        -0.3 * u * u + 0.05 * jitter(&mut state),
                        0.1 * (2.0 * std::f64::consts::PI * u).cos() + 0.05 * jitter(&mut state),
                        0.5 + 0.05 * jitter(&mut state),
                    );
                    PoseFrame {
                        t: i as f64,
                        pose: HumanPose {
                            joints: vec![
                                JointPose {
                                    position: a,
                                    orientation: UnitQuaternion::identity(),
                                },
                                JointPose {
                                    position: b,
                                    orientation: UnitQuaternion::identity(),
                                },
                            ],
                        },
                    }
                })
                .collect();
            PoseSequence {
                subject: format!("s{d}"),
                exercise: "flat".into(),
                fps: 20.0,
                joint_set: joint_set.clone(),
                frames,
            }
        })
        .collect()
}

/// Flattens a pose sequence frame into the `[t, dp_A, dq_A, dp_B, dq_B]`
/// coordinates the model works in; orientation coordinates are zero by
/// construction of the fixtures.
fn flatten(demos: &[PoseSequence]) -> Vec<DVector<f64>> {
    let t_ref = demos[0].len();
    let mut out = Vec::new();
    for demo in demos {
        for (i, frame) in demo.frames.iter().enumerate() {
            let mut v = DVector::zeros(13);
            v[0] = normalized_time(i, t_ref);
            for (j, joint) in frame.pose.joints.iter().enumerate() {
                v[1 + 6 * j] = joint.position.x;
                v[2 + 6 * j] = joint.position.y;
                v[3 + 6 * j] = joint.position.z;
            }
            out.push(v);
        }
    }
    out
}

#[derive(Clone)]
struct FlatComponent {
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Gaussian log density via LU inverse and determinant, deliberately a
/// different numeric route from the library's Cholesky solve.
fn flat_log_density(c: &FlatComponent, x: &DVector<f64>) -> f64 {
    let d = c.mean.len() as f64;
    let inv = c.cov.clone().try_inverse().expect("invertible covariance");
    let det = c.cov.determinant();
    let v = x - &c.mean;
    -0.5 * (d * LN_2PI + det.ln() + v.dot(&(inv * &v)))
}

fn flat_total_loglik(comps: &[FlatComponent], data: &[DVector<f64>]) -> f64 {
    data.iter()
        .map(|x| {
            let logs: Vec<f64> = comps
                .iter()
                .map(|c| c.weight.ln() + flat_log_density(c, x))
                .collect();
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
        })
        .sum()
}

fn flat_covariance(
    data: &[DVector<f64>],
    weights: &[f64],
    total: f64,
    mean: &DVector<f64>,
    reg: f64,
) -> DMatrix<f64> {
    let d = mean.len();
    let mut m = DMatrix::zeros(d, d);
    for (x, w) in data.iter().zip(weights) {
        let v = x - mean;
        m += &v * v.transpose() * *w;
    }
    m /= total;
    for i in 0..d {
        m[(i, i)] += reg;
    }
    m
}

/// Plain Euclidean mixture EM mirroring the library's initialization,
/// update equations, and stopping rules.
fn flat_em(data: &[DVector<f64>], k: usize, cfg: &EmConfig) -> (Vec<FlatComponent>, Vec<f64>) {
    let n = data.len();
    let mut comps = Vec::with_capacity(k);
    for c in 0..k {
        let lo = c as f64 / k as f64;
        let hi = (c + 1) as f64 / k as f64;
        let members: Vec<usize> = (0..n)
            .filter(|&i| {
                let t = data[i][0];
                t >= lo && (t < hi || (c == k - 1 && t <= hi))
            })
            .collect();
        assert!(!members.is_empty());
        let mut mean = DVector::zeros(13);
        for &i in &members {
            mean += &data[i];
        }
        mean /= members.len() as f64;
        let member_weights: Vec<f64> = (0..n)
            .map(|i| if members.contains(&i) { 1.0 } else { 0.0 })
            .collect();
        let cov = flat_covariance(
            data,
            &member_weights,
            members.len() as f64,
            &mean,
            cfg.regularization,
        );
        comps.push(FlatComponent {
            weight: members.len() as f64 / n as f64,
            mean,
            cov,
        });
    }

    let mut loglik = flat_total_loglik(&comps, data);
    let mut trace = vec![loglik];
    for _ in 0..cfg.max_iter {
        // E step.
        let mut gamma = vec![0.0; n * k];
        for (i, x) in data.iter().enumerate() {
            let logs: Vec<f64> = comps
                .iter()
                .map(|c| c.weight.ln() + flat_log_density(c, x))
                .collect();
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            for c in 0..k {
                gamma[i * k + c] = (logs[c] - lse).exp();
            }
        }
        // M step.
        let mut next = Vec::with_capacity(k);
        for c in 0..k {
            let weights: Vec<f64> = (0..n).map(|i| gamma[i * k + c]).collect();
            let nk: f64 = weights.iter().sum();
            let mut mean = DVector::zeros(13);
            for (x, w) in data.iter().zip(&weights) {
                mean += x * *w;
            }
            mean /= nk;
            let cov = flat_covariance(data, &weights, nk, &mean, cfg.regularization);
            next.push(FlatComponent {
                weight: nk / n as f64,
                mean,
                cov,
            });
        }
        let next_loglik = flat_total_loglik(&next, data);
        if next_loglik + 1e-12 * loglik.abs().max(1.0) < loglik {
            break;
        }
        comps = next;
        trace.push(next_loglik);
        let improvement = next_loglik - loglik;
        loglik = next_loglik;
        if improvement.abs() <= cfg.rel_tol * loglik.abs().max(1e-12) {
            break;
        }
    }
    (comps, trace)
}

fn assert_close(a: f64, b: f64, rel: f64, what: &str) {
    let scale = a.abs().max(b.abs()).max(1.0);
    assert!(
        (a - b).abs() <= rel * scale,
        "{what}: {a} vs {b} (tol {rel} rel)"
    );
}

#[test]
fn training_matches_flat_space_em_when_orientations_are_constant() {
    let demos = flat_demos(3, 24);
    let cfg = EmConfig::default();
    let model = train_on_aligned(&demos, 3, &cfg).unwrap();

    let data = flatten(&demos);
    let (oracle, oracle_trace) = flat_em(&data, 3, &cfg);

    let trace = &model.training.em_trace;
    assert!(
        trace.len() >= 3,
        "fixture should make EM iterate, trace = {trace:?}"
    );
    assert_eq!(trace.len(), oracle_trace.len(), "EM iteration counts differ");
    for (i, (a, b)) in trace.iter().zip(&oracle_trace).enumerate() {
        assert_close(*a, *b, 1e-6, &format!("trace[{i}]"));
    }

    assert_eq!(model.components.len(), oracle.len());
    for (c, (lib, orc)) in model.components.iter().zip(&oracle).enumerate() {
        assert_close(lib.weight, orc.weight, 1e-6, &format!("weight[{c}]"));
        assert_close(lib.mean_time, orc.mean[0], 1e-6, &format!("mean_time[{c}]"));
        for (j, joint) in lib.mean_pose.joints.iter().enumerate() {
            for d in 0..3 {
                assert_close(
                    joint.position[d],
                    orc.mean[1 + 6 * j + d],
                    1e-6,
                    &format!("mean_pose[{c}] joint {j} dim {d}"),
                );
            }
        }
        let m = &lib.covariance.matrix;
        assert_eq!(m.nrows(), 13);
        for r in 0..13 {
            for col in 0..13 {
                assert_close(
                    m[(r, col)],
                    orc.cov[(r, col)],
                    1e-6,
                    &format!("cov[{c}][{r},{col}]"),
                );
            }
        }
    }

    // Scoring a sequence must agree with the oracle densities too.
    let (total, per_frame) = sequence_loglik(&model, &demos[0]).unwrap();
    let frame_vecs = flatten(&demos[..1]);
    for (i, x) in frame_vecs.iter().enumerate() {
        let logs: Vec<f64> = oracle
            .iter()
            .map(|c| c.weight.ln() + flat_log_density(c, x))
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let expect = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        assert_close(per_frame[i], expect, 1e-6, &format!("frame loglik {i}"));
    }
    assert_close(total, per_frame.iter().sum(), 1e-12, "total vs sum");
}

/// Hand-built one-joint model with diagonal covariance: the sequence
/// log-likelihood must equal the textbook Gaussian density formula.
#[test]
fn loglik_matches_closed_form_for_diagonal_gaussian() {
    let mut parts = BTreeMap::new();
    parts.insert("Only".to_string(), vec!["A".to_string()]);
    let joint_set = JointSet {
        names: vec!["A".to_string()],
        parts,
    };
    let variances = [0.04, 0.5, 0.3, 0.2, 0.09, 0.11, 0.25];
    let mut cov = DMatrix::zeros(7, 7);
    for (i, v) in variances.iter().enumerate() {
        cov[(i, i)] = *v;
    }
    let mean_pose = HumanPose {
        joints: vec![JointPose {
            position: Vector3::new(0.1, -0.2, 0.3),
            orientation: UnitQuaternion::identity(),
        }],
    };
    let model = ExerciseModel {
        exercise: "closed-form".into(),
        joint_set: joint_set.clone(),
        t_ref: 3,
        fps: 10.0,
        components: vec![GaussianComponent {
            weight: 1.0,
            mean_time: 0.5,
            mean_pose: mean_pose.clone(),
            covariance: TangentCovariance { matrix: cov },
        }],
        training: TrainingInfo {
            demo_count: 2,
            em_trace: vec![0.0],
            em_converged: true,
        },
        calibration: None,
    };

    // Three frames: identity orientations, so the orientation residuals
    // are zero and only time and position enter the quadratic form.
    let positions = [
        Vector3::new(0.1, -0.2, 0.3),
        Vector3::new(0.2, 0.0, 0.0),
        Vector3::new(-0.1, -0.5, 0.45),
    ];
    let seq = PoseSequence {
        subject: "probe".into(),
        exercise: "closed-form".into(),
        fps: 10.0,
        joint_set,
        frames: positions
            .iter()
            .enumerate()
            .map(|(i, p)| PoseFrame {
                t: i as f64,
                pose: HumanPose {
                    joints: vec![JointPose {
                        position: *p,
                        orientation: UnitQuaternion::identity(),
                    }],
                },
            })
            .collect(),
    };

    let (_, per_frame) = sequence_loglik(&model, &seq).unwrap();
    for (i, p) in positions.iter().enumerate() {
        let t = i as f64 / 2.0;
        let resid = [
            t - 0.5,
            p.x - 0.1,
            p.y + 0.2,
            p.z - 0.3,
            0.0,
            0.0,
            0.0,
        ];
        let mut expect = -0.5 * 7.0 * LN_2PI;
        for (r, v) in resid.iter().zip(&variances) {
            expect += -0.5 * (v.ln() + r * r / v);
        }
        assert_close(per_frame[i], expect, 1e-12, &format!("frame {i}"));
    }
}

/// Hand-built two-component flat model: regression output must match an
/// independently coded Gaussian mixture regression.
#[test]
fn gmr_matches_flat_space_regression() {
    let mut parts = BTreeMap::new();
    parts.insert("Only".to_string(), vec!["A".to_string()]);
    let joint_set = JointSet {
        names: vec!["A".to_string()],
        parts,
    };

    // Covariances with genuine time-position coupling; orientation rows
    // stay decoupled so the flat picture is exact.
    let build = |s_tt: f64, s_pt: [f64; 3], pos_diag: [f64; 3], rot: f64| {
        let mut m = DMatrix::zeros(7, 7);
        m[(0, 0)] = s_tt;
        for i in 0..3 {
            m[(0, 1 + i)] = s_pt[i];
            m[(1 + i, 0)] = s_pt[i];
            m[(1 + i, 1 + i)] = pos_diag[i];
        }
        // A little position-position correlation.
        m[(1, 2)] = 0.02;
        m[(2, 1)] = 0.02;
        for i in 4..7 {
            m[(i, i)] = rot;
        }
        m
    };
    let comp = |w: f64, mt: f64, p: Vector3<f64>, cov: DMatrix<f64>| GaussianComponent {
        weight: w,
        mean_time: mt,
        mean_pose: HumanPose {
            joints: vec![JointPose {
                position: p,
                orientation: UnitQuaternion::identity(),
            }],
        },
        covariance: TangentCovariance { matrix: cov },
    };
    let c0 = comp(
        0.6,
        0.25,
        Vector3::new(0.0, 0.1, -0.2),
        build(0.03, [0.01, -0.004, 0.002], [0.09, 0.05, 0.07], 0.4),
    );
    let c1 = comp(
        0.4,
        0.75,
        Vector3::new(0.3, -0.1, 0.1),
        build(0.05, [-0.006, 0.01, 0.003], [0.06, 0.08, 0.05], 0.5),
    );
    let model = ExerciseModel {
        exercise: "gmr".into(),
        joint_set,
        t_ref: 5,
        fps: 10.0,
        components: vec![c0.clone(), c1.clone()],
        training: TrainingInfo {
            demo_count: 2,
            em_trace: vec![0.0],
            em_converged: true,
        },
        calibration: None,
    };

    let stamps = [0.0, 0.2, 0.45, 0.7, 1.0];
    let ideal = gmr_generate(&model, &stamps).unwrap();

    for (f, &t) in ideal.frames.iter().zip(&stamps) {
        // Oracle: responsibilities from the time marginal.
        let comps = [&c0, &c1];
        let mut h = [0.0f64; 2];
        for (i, c) in comps.iter().enumerate() {
            let s_tt = c.covariance.matrix[(0, 0)];
            let dt = t - c.mean_time;
            h[i] = c.weight * (-0.5 * dt * dt / s_tt).exp() / (2.0 * std::f64::consts::PI * s_tt).sqrt();
        }
        let z = h[0] + h[1];
        h[0] /= z;
        h[1] /= z;

        // Oracle: conditional means and blended estimate, flat space.
        let mut xi = [Vector3::zeros(), Vector3::zeros()];
        for (i, c) in comps.iter().enumerate() {
            let m = &c.covariance.matrix;
            let s_tt = m[(0, 0)];
            let s_pt = Vector3::new(m[(1, 0)], m[(2, 0)], m[(3, 0)]);
            xi[i] = c.mean_pose.joints[0].position + s_pt * ((t - c.mean_time) / s_tt);
        }
        let blended = xi[0] * h[0] + xi[1] * h[1];
        let got = f.pose.joints[0].position;
        assert!(
            (got - blended).norm() < 1e-9,
            "t = {t}: position {got:?} vs oracle {blended:?}"
        );

        // Oracle covariance: blended conditionals plus spread of the
        // conditional means, 6x6 with a zero cross block.
        let mut expect = DMatrix::zeros(6, 6);
        for (i, c) in comps.iter().enumerate() {
            let m = &c.covariance.matrix;
            let s_tt = m[(0, 0)];
            let s_pt = Vector3::new(m[(1, 0)], m[(2, 0)], m[(3, 0)]);
            let mut cond = DMatrix::zeros(6, 6);
            for r in 0..3 {
                for col in 0..3 {
                    cond[(r, col)] = m[(1 + r, 1 + col)] - s_pt[r] * s_pt[col] / s_tt;
                }
            }
            for d in 0..3 {
                cond[(3 + d, 3 + d)] = m[(4 + d, 4 + d)];
            }
            let delta = xi[i] - blended;
            for r in 0..3 {
                for col in 0..3 {
                    cond[(r, col)] += delta[r] * delta[col];
                }
            }
            expect += cond * h[i];
        }
        let got_cov = &f.covariance.matrix;
        assert_eq!(got_cov.nrows(), 6);
        for r in 0..6 {
            for col in 0..6 {
                assert!(
                    (got_cov[(r, col)] - expect[(r, col)]).abs() < 1e-9,
                    "t = {t}: cov[{r},{col}] = {} vs {}",
                    got_cov[(r, col)],
                    expect[(r, col)]
                );
            }
        }
    }
}

/// The marginalization lemma itself, checked by quadrature: integrating
/// a correlated 2-D Gaussian over one coordinate gives the 1-D density
/// with the sub-block parameters.
#[test]
fn gaussian_marginal_matches_quadrature()
{
    let (mx, my) = (0.3, -0.2);
    let (sxx, sxy, syy) = (0.5, 0.2, 0.4);
    let det = sxx * syy - sxy * sxy;
    let density2 = |x: f64, y: f64| {
        let (dx, dy) = (x - mx, y - my);
        let quad = (syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det;
        (-0.5 * quad).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
    };
    let density1 = |x: f64| {
        let dx = x - mx;
        (-0.5 * dx * dx / sxx).exp() / (2.0 * std::f64::consts::PI * sxx).sqrt()
    };
    for &x in &[-1.0, 0.0, 0.3, 1.2] {
        // Simpson's rule over +-8 standard deviations of y.
        let (lo, hi) = (my - 8.0 * syy.sqrt(), my + 8.0 * syy.sqrt());
        let n = 4000;
        let hstep = (hi - lo) / n as f64;
        let mut integral = density2(x, lo) + density2(x, hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            integral += w * density2(x, lo + i as f64 * hstep);
        }
        integral *= hstep / 3.0;
        assert!(
            (integral - density1(x)).abs() < 1e-9,
            "x = {x}: quadrature {integral} vs closed form {}",
            density1(x)
        );
    }
}

/// The body-part restriction must take exactly the principal sub-blocks
/// the lemma prescribes, and score restricted sequences accordingly.
#[test]
fn bodypart_marginal_takes_principal_subblocks() {
    let demos = flat_demos(3, 24);
    let cfg = EmConfig::default();
    let model = train_on_aligned(&demos, 3, &cfg).unwrap();

    let marginal = marginalize_bodypart(&model, "Right").unwrap();
    assert_eq!(marginal.joint_set.names, vec!["B".to_string()]);
    // Joint B occupies tangent dims 7..13 of the full model; with the
    // time dimension the marginal dims are [0, 7..13].
    let dims: Vec<usize> = std::iter::once(0).chain(7..13).collect();
    for (full, sub) in model.components.iter().zip(&marginal.components) {
        assert_eq!(sub.weight, full.weight);
        assert_eq!(sub.mean_time, full.mean_time);
        assert_eq!(
            sub.mean_pose.joints[0].position,
            full.mean_pose.joints[1].position
        );
        let m = &full.covariance.matrix;
        let s = &sub.covariance.matrix;
        assert_eq!(s.nrows(), 7);
        for (r, &dr) in dims.iter().enumerate() {
            for (c, &dc) in dims.iter().enumerate() {
                assert_eq!(s[(r, c)], m[(dr, dc)], "sub-block entry [{r},{c}]");
            }
        }
    }

    // Scoring through the marginal equals an oracle density on the
    // sub-vector.
    let restricted = demos[0].restrict_to_part("Right").unwrap();
    let (_, per_frame) = sequence_loglik(&marginal, &restricted).unwrap();
    let data = flatten(&demos[..1]);
    for (i, x) in data.iter().enumerate() {
        let sub = DVector::from_iterator(7, dims.iter().map(|&d| x[d]));
        let logs: Vec<f64> = marginal
            .components
            .iter()
            .map(|c| {
                let mut mean = DVector::zeros(7);
                mean[0] = c.mean_time;
                for d in 0..3 {
                    mean[1 + d] = c.mean_pose.joints[0].position[d];
                }
                let flat = FlatComponent {
                    weight: c.weight,
                    mean,
                    cov: c.covariance.matrix.clone(),
                };
                flat.weight.ln() + flat_log_density(&flat, &sub)
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let expect = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        assert_close(per_frame[i], expect, 1e-9, &format!("marginal frame {i}"));
    }
}
