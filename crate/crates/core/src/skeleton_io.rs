//! Reading skeleton recordings and turning them into manifold-valued
//! pose sequences.
//!
//! Recordings arrive as timestamped frames of Kinect-style joints (3D
//! position, orientation quaternion, tracked flag) in JSON or CSV.
//! Conversion to [`PoseSequence`] selects the working joint set, fills
//! untracked joints by carrying the last tracked value forward (dropping
//! leading frames that never had one), normalizes positions to be
//! translation- and scale-invariant, and flips quaternion signs for
//! temporal hemisphere continuity.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose_manifold::{HumanPose, JointPose, UnitQuaternion};

/// The 25 joints tracked by a Kinect v2 style sensor.
pub const KINECT_JOINTS: [&str; 25] = [
    "SpineBase",
    "SpineMid",
    "Neck",
    "Head",
    "ShoulderLeft",
    "ElbowLeft",
    "WristLeft",
    "HandLeft",
    "ShoulderRight",
    "ElbowRight",
    "WristRight",
    "HandRight",
    "HipLeft",
    "KneeLeft",
    "AnkleLeft",
    "FootLeft",
    "HipRight",
    "KneeRight",
    "AnkleRight",
    "FootRight",
    "SpineShoulder",
    "HandTipLeft",
    "ThumbLeft",
    "HandTipRight",
    "ThumbRight",
];

/// Distance below which the SpineShoulder-SpineMid segment is considered
/// degenerate and normalization fails.
pub const MIN_SPINE_LENGTH: f64 = 1e-6;

/// An ordered selection of joints plus a partition of them into named
/// body parts. Joint order fixes the tangent-space layout everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointSet {
    pub names: Vec<String>,
    pub parts: BTreeMap<String, Vec<String>>,
}

impl JointSet {
    /// Default working set: spine/head chain plus both arms.
    pub fn upper_body() -> Self {
        let names = [
            "SpineBase",
            "SpineMid",
            "SpineShoulder",
            "Neck",
            "Head",
            "ShoulderLeft",
            "ElbowLeft",
            "WristLeft",
            "ShoulderRight",
            "ElbowRight",
            "WristRight",
        ];
        let mut parts = BTreeMap::new();
        parts.insert(
            "Spine".to_string(),
            ["SpineBase", "SpineMid", "SpineShoulder", "Neck", "Head"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        parts.insert(
            "LeftArm".to_string(),
            ["ShoulderLeft", "ElbowLeft", "WristLeft"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        parts.insert(
            "RightArm".to_string(),
            ["ShoulderRight", "ElbowRight", "WristRight"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        let set = JointSet {
            names: names.iter().map(|s| s.to_string()).collect(),
            parts,
        };
        debug_assert!(set.validate().is_ok());
        set
    }

    /// Checks that names are unique and the parts exactly partition them.
    pub fn validate(&self) -> Result<()> {
        if self.names.is_empty() {
            return Err(Error::InvalidJointSet("no joints".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for n in &self.names {
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidJointSet(format!("duplicate joint {n}")));
            }
        }
        let mut assigned = std::collections::BTreeSet::new();
        for (part, joints) in &self.parts {
            for j in joints {
                if !seen.contains(j.as_str()) {
                    return Err(Error::InvalidJointSet(format!(
                        "part {part} references unknown joint {j}"
                    )));
                }
                if !assigned.insert(j.as_str()) {
                    return Err(Error::InvalidJointSet(format!(
                        "joint {j} assigned to more than one part"
                    )));
                }
            }
        }
        if assigned.len() != self.names.len() {
            return Err(Error::InvalidJointSet(
                "body parts do not cover every joint".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, joint: &str) -> Option<usize> {
        self.names.iter().position(|n| n == joint)
    }

    /// Indices of a part's joints in joint-set order.
    pub fn part_indices(&self, part: &str) -> Result<Vec<usize>> {
        let joints = self
            .parts
            .get(part)
            .ok_or_else(|| Error::UnknownBodyPart(part.to_string()))?;
        let mut idx: Vec<usize> = joints
            .iter()
            .map(|j| self.index_of(j).expect("validated joint set"))
            .collect();
        idx.sort_unstable();
        Ok(idx)
    }

    /// Joint set restricted to a single body part (order preserved).
    pub fn restrict(&self, part: &str) -> Result<JointSet> {
        let idx = self.part_indices(part)?;
        let names: Vec<String> = idx.iter().map(|&i| self.names[i].clone()).collect();
        let mut parts = BTreeMap::new();
        parts.insert(part.to_string(), names.clone());
        Ok(JointSet { names, parts })
    }
}

/// One raw joint observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawJoint {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion,
    pub tracked: bool,
}

/// One raw frame: timestamp plus whatever joints the sensor reported.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub t: f64,
    pub joints: BTreeMap<String, RawJoint>,
}

/// A parsed recording, prior to normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSequence {
    pub subject: String,
    pub exercise: String,
    pub fps: f64,
    pub frames: Vec<RawFrame>,
}

/// Supported recording file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceFormat {
    Json,
    Csv,
}

#[derive(Serialize, Deserialize)]
struct JsonSequence {
    subject: String,
    exercise: String,
    fps: f64,
    frames: Vec<JsonFrame>,
}

#[derive(Serialize, Deserialize)]
struct JsonFrame {
    t: f64,
    joints: BTreeMap<String, JsonJoint>,
}

#[derive(Serialize, Deserialize)]
struct JsonJoint {
    p: [f64; 3],
    q: [f64; 4],
    #[serde(default = "default_tracked")]
    tracked: bool,
}

fn default_tracked() -> bool {
    true
}

/// Parses a recording. JSON files carry their own metadata; CSV files are
/// one frame per row, `t` followed by seven values (`px py pz qw qx qy qz`)
/// per joint in `joints` order. Unknown joint names in JSON are ignored.
pub fn parse_sequence(path: &Path, format: SequenceFormat, joints: &JointSet) -> Result<RawSequence> {
    let text = std::fs::read_to_string(path)?;
    match format {
        SequenceFormat::Json => parse_json(&text),
        SequenceFormat::Csv => parse_csv(&text, joints),
    }
}

/// Guesses the format from the file extension (`.csv` means CSV,
/// everything else JSON) and parses.
pub fn parse_sequence_auto(path: &Path, joints: &JointSet) -> Result<RawSequence> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => SequenceFormat::Csv,
        _ => SequenceFormat::Json,
    };
    parse_sequence(path, format, joints)
}

fn parse_json(text: &str) -> Result<RawSequence> {
    let parsed: JsonSequence = serde_json::from_str(text)?;
    if parsed.frames.is_empty() {
        return Err(Error::EmptySequence);
    }
    let known: std::collections::BTreeSet<&str> = KINECT_JOINTS.iter().copied().collect();
    let mut frames = Vec::with_capacity(parsed.frames.len());
    let mut prev_t = f64::NEG_INFINITY;
    for (i, f) in parsed.frames.iter().enumerate() {
        if f.t <= prev_t {
            return Err(Error::NonMonotonicTimestamps { frame: i });
        }
        prev_t = f.t;
        let mut joints = BTreeMap::new();
        for (name, j) in &f.joints {
            if !known.contains(name.as_str()) {
                continue;
            }
            if j.p.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedRecord {
                    line: i,
                    detail: format!("non-finite position for joint {name}"),
                });
            }
            let orientation = UnitQuaternion::new(j.q[0], j.q[1], j.q[2], j.q[3]).ok_or(
                Error::InvalidQuaternion {
                    frame: i,
                    joint: name.clone(),
                },
            )?;
            joints.insert(
                name.clone(),
                RawJoint {
                    position: Vector3::new(j.p[0], j.p[1], j.p[2]),
                    orientation,
                    tracked: j.tracked,
                },
            );
        }
        frames.push(RawFrame { t: f.t, joints });
    }
    Ok(RawSequence {
        subject: parsed.subject,
        exercise: parsed.exercise,
        fps: parsed.fps,
        frames,
    })
}

fn parse_csv(text: &str, joint_set: &JointSet) -> Result<RawSequence> {
    let mut frames = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = 1 + 7 * joint_set.len();
        if fields.len() != expected {
            return Err(Error::MalformedRecord {
                line: line_no + 1,
                detail: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::MalformedRecord {
                line: line_no + 1,
                detail: format!("not a number: {s:?}"),
            })
        };
        let t = parse_f(fields[0])?;
        if t <= prev_t {
            return Err(Error::NonMonotonicTimestamps {
                frame: frames.len(),
            });
        }
        prev_t = t;
        let mut joints = BTreeMap::new();
        for (j, name) in joint_set.names.iter().enumerate() {
            let base = 1 + 7 * j;
            let mut vals = [0.0; 7];
            for (k, v) in vals.iter_mut().enumerate() {
                *v = parse_f(fields[base + k])?;
            }
            let orientation = UnitQuaternion::new(vals[3], vals[4], vals[5], vals[6]).ok_or(
                Error::InvalidQuaternion {
                    frame: frames.len(),
                    joint: name.clone(),
                },
            )?;
            joints.insert(
                name.clone(),
                RawJoint {
                    position: Vector3::new(vals[0], vals[1], vals[2]),
                    orientation,
                    tracked: true,
                },
            );
        }
        frames.push(RawFrame { t, joints });
    }
    if frames.is_empty() {
        return Err(Error::EmptySequence);
    }
    let fps = if frames.len() >= 2 {
        let span = frames.last().unwrap().t - frames[0].t;
        if span > 0.0 {
            (frames.len() - 1) as f64 / span
        } else {
            30.0
        }
    } else {
        30.0
    };
    Ok(RawSequence {
        subject: "unknown".into(),
        exercise: "unknown".into(),
        fps,
        frames,
    })
}

/// Writes a raw sequence as canonical JSON (sorted joint keys, pretty
/// printed) so identical inputs produce identical bytes.
pub fn write_raw_sequence_json(seq: &RawSequence, path: &Path) -> Result<()> {
    let json = raw_sequence_to_json(seq);
    std::fs::write(path, json)?;
    Ok(())
}

/// Canonical JSON text for a raw sequence.
pub fn raw_sequence_to_json(seq: &RawSequence) -> String {
    let wire = JsonSequence {
        subject: seq.subject.clone(),
        exercise: seq.exercise.clone(),
        fps: seq.fps,
        frames: seq
            .frames
            .iter()
            .map(|f| JsonFrame {
                t: f.t,
                joints: f
                    .joints
                    .iter()
                    .map(|(name, j)| {
                        (
                            name.clone(),
                            JsonJoint {
                                p: [j.position.x, j.position.y, j.position.z],
                                q: [
                                    j.orientation.w,
                                    j.orientation.x,
                                    j.orientation.y,
                                    j.orientation.z,
                                ],
                                tracked: j.tracked,
                            },
                        )
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&wire).expect("sequence serialization");
    json.push('\n');
    json
}

/// One normalized frame of a pose sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame {
    pub t: f64,
    pub pose: HumanPose,
}

/// A normalized, manifold-valued recording: every frame holds one pose
/// over the same joint set.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub subject: String,
    pub exercise: String,
    pub fps: f64,
    pub joint_set: JointSet,
    pub frames: Vec<PoseFrame>,
}

impl PoseSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn poses(&self) -> impl Iterator<Item = &HumanPose> {
        self.frames.iter().map(|f| &f.pose)
    }

    /// Copy of the tail starting at `start` (frame indices are kept as
    /// timestamps are).
    pub fn slice_from(&self, start: usize) -> PoseSequence {
        PoseSequence {
            subject: self.subject.clone(),
            exercise: self.exercise.clone(),
            fps: self.fps,
            joint_set: self.joint_set.clone(),
            frames: self.frames[start.min(self.frames.len())..].to_vec(),
        }
    }

    /// Sequence restricted to the joints of one body part.
    pub fn restrict_to_part(&self, part: &str) -> Result<PoseSequence> {
        let idx = self.joint_set.part_indices(part)?;
        let joint_set = self.joint_set.restrict(part)?;
        Ok(PoseSequence {
            subject: self.subject.clone(),
            exercise: self.exercise.clone(),
            fps: self.fps,
            joint_set,
            frames: self
                .frames
                .iter()
                .map(|f| PoseFrame {
                    t: f.t,
                    pose: f.pose.select_joints(&idx),
                })
                .collect(),
        })
    }
}

/// Normalizes one frame into a [`HumanPose`]: positions are re-expressed
/// relative to SpineShoulder and divided by the SpineShoulder-SpineMid
/// distance, making poses invariant to sensor placement and body size.
/// Orientations are kept as-is (renormalized on parse).
pub fn normalize_pose(frame: &RawFrame, joints: &JointSet) -> Result<HumanPose> {
    normalize_pose_at(frame, joints, 0)
}

fn normalize_pose_at(frame: &RawFrame, joints: &JointSet, frame_idx: usize) -> Result<HumanPose> {
    let get = |name: &str| -> Result<&RawJoint> {
        frame.joints.get(name).ok_or_else(|| Error::MissingJoint {
            frame: frame_idx,
            joint: name.to_string(),
        })
    };
    let anchor = get("SpineShoulder")?.position;
    let mid = get("SpineMid")?.position;
    let spine_len = (anchor - mid).norm();
    if spine_len < MIN_SPINE_LENGTH {
        return Err(Error::DegenerateSpine { frame: frame_idx });
    }
    let mut out = Vec::with_capacity(joints.len());
    for name in &joints.names {
        let j = get(name)?;
        out.push(JointPose {
            position: (j.position - anchor) / spine_len,
            orientation: j.orientation,
        });
    }
    Ok(HumanPose { joints: out })
}

/// Flips quaternion signs along the sequence so each joint's orientation
/// stays in the same hemisphere as in the previous frame, removing
/// double-cover sign jumps before any tangent-space statistics.
pub fn hemisphere_align(mut seq: PoseSequence) -> PoseSequence {
    for f in 1..seq.frames.len() {
        let (head, tail) = seq.frames.split_at_mut(f);
        let prev = &head[f - 1].pose;
        let cur = &mut tail[0].pose;
        for (pj, cj) in prev.joints.iter().zip(cur.joints.iter_mut()) {
            if pj.orientation.dot(&cj.orientation) < 0.0 {
                cj.orientation = -cj.orientation;
            }
        }
    }
    seq
}

/// Full conversion of a raw recording into a normalized pose sequence:
/// untracked joints carry the last tracked value forward, frames before
/// every required joint has been tracked at least once are dropped, then
/// each frame is normalized and the result hemisphere-aligned.
pub fn to_pose_sequence(raw: &RawSequence, joints: &JointSet) -> Result<PoseSequence> {
    joints.validate()?;
    let mut required: Vec<String> = joints.names.clone();
    for anchor in ["SpineShoulder", "SpineMid"] {
        if !required.iter().any(|n| n == anchor) {
            required.push(anchor.to_string());
        }
    }
    let mut last: BTreeMap<String, RawJoint> = BTreeMap::new();
    let mut frames = Vec::with_capacity(raw.frames.len());
    for (i, frame) in raw.frames.iter().enumerate() {
        for name in &required {
            if let Some(j) = frame.joints.get(name) {
                if j.tracked {
                    last.insert(name.clone(), *j);
                }
            }
        }
        if last.len() < required.len() {
            continue; // leading frames with never-tracked joints are dropped
        }
        let filled = RawFrame {
            t: frame.t,
            joints: last.clone(),
        };
        frames.push(PoseFrame {
            t: frame.t,
            pose: normalize_pose_at(&filled, joints, i)?,
        });
    }
    if frames.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(hemisphere_align(PoseSequence {
        subject: raw.subject.clone(),
        exercise: raw.exercise.clone(),
        fps: raw.fps,
        joint_set: joints.clone(),
        frames,
    }))
}

/// Parses and normalizes a recording in one step.
pub fn load_sequence(path: &Path, joints: &JointSet) -> Result<PoseSequence> {
    let raw = parse_sequence_auto(path, joints)?;
    to_pose_sequence(&raw, joints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn raw_joint(p: [f64; 3]) -> RawJoint {
        RawJoint {
            position: Vector3::new(p[0], p[1], p[2]),
            orientation: UnitQuaternion::identity(),
            tracked: true,
        }
    }

    fn minimal_set() -> JointSet {
        let mut parts = BTreeMap::new();
        parts.insert(
            "Spine".into(),
            vec!["SpineMid".into(), "SpineShoulder".into()],
        );
        parts.insert("LeftArm".into(), vec!["WristLeft".into()]);
        JointSet {
            names: vec!["SpineMid".into(), "SpineShoulder".into(), "WristLeft".into()],
            parts,
        }
    }

    fn frame_at(t: f64, wrist: [f64; 3]) -> RawFrame {
        let mut joints = BTreeMap::new();
        joints.insert("SpineShoulder".to_string(), raw_joint([1.0, 2.0, 3.0]));
        joints.insert("SpineMid".to_string(), raw_joint([1.0, 1.5, 3.0]));
        joints.insert("WristLeft".to_string(), raw_joint(wrist));
        RawFrame { t, joints }
    }

    #[test]
    fn upper_body_set_is_valid_with_eleven_joints() {
        let set = JointSet::upper_body();
        assert_eq!(set.len(), 11);
        set.validate().unwrap();
        assert_eq!(set.parts["Spine"].len(), 5);
        assert_eq!(set.parts["LeftArm"].len(), 3);
        assert_eq!(set.parts["RightArm"].len(), 3);
    }

    #[test]
    fn normalization_centers_on_spine_shoulder_and_scales_by_spine_length() {
        // Sensor-frame skeleton with spine length 0.5 and the wrist half a
        // meter right of the anchor: normalized wrist lands at (1, 0, 0).
        let set = minimal_set();
        let pose = normalize_pose(&frame_at(0.0, [1.5, 2.0, 3.0]), &set).unwrap();
        let wrist = pose.joints[set.index_of("WristLeft").unwrap()];
        assert_relative_eq!(wrist.position.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(wrist.position.y, 0.0, epsilon = 1e-12);
        let anchor = pose.joints[set.index_of("SpineShoulder").unwrap()];
        assert!(anchor.position.norm() < 1e-12);
    }

    #[test]
    fn translated_and_scaled_skeletons_normalize_identically() {
        let set = minimal_set();
        let a = normalize_pose(&frame_at(0.0, [1.5, 2.3, 2.8]), &set).unwrap();
        // Same skeleton, doubled in size and moved by (10, -4, 2).
        let mut joints = BTreeMap::new();
        let shift = Vector3::new(10.0, -4.0, 2.0);
        for (name, j) in frame_at(0.0, [1.5, 2.3, 2.8]).joints {
            joints.insert(
                name,
                RawJoint {
                    position: j.position * 2.0 + shift,
                    orientation: j.orientation,
                    tracked: true,
                },
            );
        }
        let b = normalize_pose(&RawFrame { t: 0.0, joints }, &set).unwrap();
        assert!(crate::pose_manifold::geodesic_distance(&a, &b).unwrap() < 1e-9);
    }

    #[test]
    fn degenerate_spine_is_rejected() {
        let set = minimal_set();
        let mut frame = frame_at(0.0, [1.5, 2.0, 3.0]);
        frame
            .joints
            .insert("SpineMid".to_string(), raw_joint([1.0, 2.0, 3.0]));
        assert!(matches!(
            normalize_pose(&frame, &set),
            Err(Error::DegenerateSpine { .. })
        ));
    }

    #[test]
    fn untracked_joint_carries_last_tracked_value_forward() {
        let set = minimal_set();
        let mut f0 = frame_at(0.0, [1.5, 2.0, 3.0]);
        let mut f1 = frame_at(0.1, [9.9, 9.9, 9.9]);
        if let Some(j) = f1.joints.get_mut("WristLeft") {
            j.tracked = false;
        }
        f0.joints.get_mut("WristLeft").unwrap().tracked = true;
        let raw = RawSequence {
            subject: "s".into(),
            exercise: "e".into(),
            fps: 10.0,
            frames: vec![f0, f1],
        };
        let seq = to_pose_sequence(&raw, &set).unwrap();
        assert_eq!(seq.len(), 2);
        let w = set.index_of("WristLeft").unwrap();
        let d = (seq.frames[0].pose.joints[w].position - seq.frames[1].pose.joints[w].position)
            .norm();
        assert!(d < 1e-12, "untracked wrist should repeat the tracked value");
    }

    #[test]
    fn leading_never_tracked_frames_are_dropped() {
        let set = minimal_set();
        let mut f0 = frame_at(0.0, [1.5, 2.0, 3.0]);
        f0.joints.get_mut("WristLeft").unwrap().tracked = false;
        let f1 = frame_at(0.1, [1.6, 2.0, 3.0]);
        let raw = RawSequence {
            subject: "s".into(),
            exercise: "e".into(),
            fps: 10.0,
            frames: vec![f0, f1],
        };
        let seq = to_pose_sequence(&raw, &set).unwrap();
        assert_eq!(seq.len(), 1);
        assert_relative_eq!(seq.frames[0].t, 0.1);
    }

    #[test]
    fn hemisphere_alignment_keeps_consecutive_dots_non_negative() {
        let set = minimal_set();
        let mut f0 = frame_at(0.0, [1.5, 2.0, 3.0]);
        let mut f1 = frame_at(0.1, [1.5, 2.0, 3.0]);
        let q = UnitQuaternion::from_axis_angle(Vector3::z(), 0.3);
        f0.joints.get_mut("WristLeft").unwrap().orientation = q;
        f1.joints.get_mut("WristLeft").unwrap().orientation = -q;
        let raw = RawSequence {
            subject: "s".into(),
            exercise: "e".into(),
            fps: 10.0,
            frames: vec![f0, f1],
        };
        let seq = to_pose_sequence(&raw, &set).unwrap();
        let w = set.index_of("WristLeft").unwrap();
        let dot = seq.frames[0].pose.joints[w]
            .orientation
            .dot(&seq.frames[1].pose.joints[w].orientation);
        assert!(dot > 0.99, "sign flip should have been removed, dot={dot}");
    }

    #[test]
    fn json_roundtrip_preserves_sequence() {
        let set = minimal_set();
        let raw = RawSequence {
            subject: "s1".into(),
            exercise: "ex".into(),
            fps: 30.0,
            frames: vec![frame_at(0.0, [1.5, 2.0, 3.0]), frame_at(0.1, [1.6, 2.1, 3.0])],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.json");
        write_raw_sequence_json(&raw, &path).unwrap();
        let parsed = parse_sequence(&path, SequenceFormat::Json, &set).unwrap();
        assert_eq!(parsed, raw);
    }

    #[test]
    fn corrupt_quaternion_error_names_frame_and_joint() {
        let set = minimal_set();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let text = r#"{
            "subject": "s", "exercise": "e", "fps": 30.0,
            "frames": [
                {"t": 0.0, "joints": {
                    "SpineShoulder": {"p": [0,1,0], "q": [1,0,0,0], "tracked": true},
                    "SpineMid": {"p": [0,0.5,0], "q": [1,0,0,0], "tracked": true},
                    "WristLeft": {"p": [1,1,0], "q": [1,0,0,0], "tracked": true}
                }},
                {"t": 0.1, "joints": {
                    "SpineShoulder": {"p": [0,1,0], "q": [1,0,0,0], "tracked": true},
                    "SpineMid": {"p": [0,0.5,0], "q": [1,0,0,0], "tracked": true},
                    "WristLeft": {"p": [1,1,0], "q": [0,0,0,0], "tracked": true}
                }}
            ]
        }"#;
        std::fs::write(&path, text).unwrap();
        match parse_sequence(&path, SequenceFormat::Json, &set) {
            Err(Error::InvalidQuaternion { frame, joint }) => {
                assert_eq!(frame, 1);
                assert_eq!(joint, "WristLeft");
            }
            other => panic!("expected InvalidQuaternion, got {other:?}"),
        }
    }

    #[test]
    fn non_monotonic_timestamps_are_rejected() {
        let set = minimal_set();
        let raw_text = raw_sequence_to_json(&RawSequence {
            subject: "s".into(),
            exercise: "e".into(),
            fps: 30.0,
            frames: vec![frame_at(0.2, [1.5, 2.0, 3.0]), frame_at(0.1, [1.5, 2.0, 3.0])],
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.json");
        std::fs::write(&path, raw_text).unwrap();
        assert!(matches!(
            parse_sequence(&path, SequenceFormat::Json, &set),
            Err(Error::NonMonotonicTimestamps { frame: 1 })
        ));
    }

    #[test]
    fn csv_parses_one_row_per_frame() {
        let set = minimal_set();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.csv");
        // Columns: t, then p/q per joint in set order (SpineMid,
        // SpineShoulder, WristLeft).
        let text = "0.0, 1.0,1.5,3.0, 1,0,0,0, 1.0,2.0,3.0, 1,0,0,0, 1.5,2.0,3.0, 1,0,0,0\n\
                    0.1, 1.0,1.5,3.0, 1,0,0,0, 1.0,2.0,3.0, 1,0,0,0, 1.6,2.0,3.0, 1,0,0,0\n";
        std::fs::write(&path, text).unwrap();
        let raw = parse_sequence(&path, SequenceFormat::Csv, &set).unwrap();
        assert_eq!(raw.frames.len(), 2);
        assert_relative_eq!(raw.fps, 10.0, epsilon = 1e-9);
        let seq = to_pose_sequence(&raw, &set).unwrap();
        assert_eq!(seq.len(), 2);
    }

    #[test]
    fn csv_with_wrong_field_count_reports_line() {
        let set = minimal_set();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.csv");
        std::fs::write(&path, "0.0, 1.0, 2.0\n").unwrap();
        match parse_sequence(&path, SequenceFormat::Csv, &set) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected MalformedRecord, got {other:?}"),
        }
    }

    #[test]
    fn restrict_to_part_keeps_only_that_parts_joints() {
        let set = minimal_set();
        let raw = RawSequence {
            subject: "s".into(),
            exercise: "e".into(),
            fps: 30.0,
            frames: vec![frame_at(0.0, [1.5, 2.0, 3.0])],
        };
        let seq = to_pose_sequence(&raw, &set).unwrap();
        let arm = seq.restrict_to_part("LeftArm").unwrap();
        assert_eq!(arm.joint_set.names, vec!["WristLeft".to_string()]);
        assert_eq!(arm.frames[0].pose.joint_count(), 1);
        assert!(matches!(
            seq.restrict_to_part("Tail"),
            Err(Error::UnknownBodyPart(_))
        ));
    }
}
