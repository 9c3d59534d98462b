//! Temporal alignment of pose sequences with dynamic time warping.
//!
//! Execution speed varies between repetitions and subjects, so sequences
//! are aligned on the pose manifold before any statistics: DTW finds the
//! monotone frame correspondence minimizing summed geodesic distance, and
//! `warp_to_reference` resamples a sequence onto a reference timeline by
//! Karcher-averaging the frames matched to each reference index.

use crate::error::{Error, Result};
use crate::pose_manifold::{
    geodesic_distance, karcher_mean, HumanPose, KARCHER_MAX_ITER, KARCHER_TOL,
};
use crate::skeleton_io::{PoseFrame, PoseSequence};

/// A monotone alignment between two sequences: index pairs from `(0, 0)`
/// to `(n-1, m-1)` with steps in {(1,0), (0,1), (1,1)}, plus the summed
/// geodesic distance along the path.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpPath {
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

impl WarpPath {
    /// The identity alignment of two equal-length sequences.
    pub fn identity(len: usize) -> WarpPath {
        WarpPath {
            pairs: (0..len).map(|i| (i, i)).collect(),
            cost: 0.0,
        }
    }
}

/// Dynamic time warping between two sequences over the same joint set.
/// Returns the cheapest monotone path under the geodesic frame distance.
/// Ties prefer the diagonal step, keeping the result deterministic.
pub fn dtw_align(a: &PoseSequence, b: &PoseSequence) -> Result<WarpPath> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySequence);
    }
    if a.joint_set.names != b.joint_set.names {
        return Err(Error::JointSetMismatch);
    }
    let n = a.len();
    let m = b.len();
    let mut cost = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            cost[i * m + j] = geodesic_distance(&a.frames[i].pose, &b.frames[j].pose)?;
        }
    }
    // Accumulated cost with an infinite border, folded left-to-right so
    // the summation order is reproducible.
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let c = cost[i * m + j];
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 {
                    acc[(i - 1) * m + (j - 1)]
                } else {
                    f64::INFINITY
                };
                let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
                let left = if j > 0 { acc[i * m + (j - 1)] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i * m + j] = best + c;
        }
    }
    // Backtrack, preferring diagonal, then the previous sequence-a frame,
    // then the previous reference frame.
    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let diag = if i > 0 && j > 0 {
            acc[(i - 1) * m + (j - 1)]
        } else {
            f64::INFINITY
        };
        let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
        let left = if j > 0 { acc[i * m + (j - 1)] } else { f64::INFINITY };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(WarpPath {
        pairs,
        cost: acc[(n - 1) * m + (m - 1)],
    })
}

/// Resamples `seq` onto the reference timeline described by `path` (an
/// alignment of `seq` against a reference of length `ref_len`). Every
/// reference index receives the Karcher mean of the frames matched to it,
/// and timestamps become the reference frame indices, so the output has
/// exactly `ref_len` frames.
pub fn warp_to_reference(
    seq: &PoseSequence,
    path: &WarpPath,
    ref_len: usize,
) -> Result<PoseSequence> {
    if seq.is_empty() || ref_len == 0 {
        return Err(Error::EmptySequence);
    }
    let valid = path.pairs.first() == Some(&(0, 0))
        && path.pairs.last() == Some(&(seq.len() - 1, ref_len - 1))
        && path
            .pairs
            .iter()
            .all(|&(i, j)| i < seq.len() && j < ref_len);
    if !valid {
        return Err(Error::LengthMismatch {
            expected: ref_len,
            found: path.pairs.last().map(|&(_, j)| j + 1).unwrap_or(0),
        });
    }
    let mut groups: Vec<Vec<&HumanPose>> = vec![Vec::new(); ref_len];
    for &(i, j) in &path.pairs {
        groups[j].push(&seq.frames[i].pose);
    }
    let mut frames = Vec::with_capacity(ref_len);
    for (j, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::LengthMismatch {
                expected: ref_len,
                found: j,
            });
        }
        let pose = if group.len() == 1 {
            group[0].clone()
        } else {
            let owned: Vec<HumanPose> = group.iter().map(|&p| p.clone()).collect();
            karcher_mean(&owned, KARCHER_TOL, KARCHER_MAX_ITER)?.pose
        };
        frames.push(PoseFrame { t: j as f64, pose });
    }
    Ok(PoseSequence {
        subject: seq.subject.clone(),
        exercise: seq.exercise.clone(),
        fps: seq.fps,
        joint_set: seq.joint_set.clone(),
        frames,
    })
}
