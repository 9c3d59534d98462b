//! Synthetic upper-body exercise recordings.
//!
//! Movements are composed in the joint-angle space of a small kinematic
//! chain (a three-link spine carrying two two-link arms) and converted
//! to world positions and orientations, so injected mistakes stay
//! physically coherent. Every exercise follows the same phase plan:
//!
//! ```text
//! rest | raise | hold | action | hold | lower | rest
//! ```
//!
//! where `raise` lifts the active arm(s), `action` is the archetype's
//! distinctive move (trunk turn, sideways lean, or arm spread), and
//! `lower` returns everything to rest. Holds are exactly static when
//! noise is zero, which gives segmentation tests hard ground truth.

use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use rehab_core::pose_manifold::{quat_exp, UnitQuaternion};
use rehab_core::skeleton_io::{RawFrame, RawJoint, RawSequence};
use rehab_core::{Error, Result};

// Segment lengths of the kinematic chain, in meters. The normalization
// scale of loaded sequences is the mid-to-shoulder spine link.
const L_MID_SHOULDER: f64 = 0.25;
const L_BASE_MID: f64 = 0.25;
const L_SHOULDER_NECK: f64 = 0.10;
const L_NECK_HEAD: f64 = 0.15;
const SHOULDER_HALF_WIDTH: f64 = 0.20;
const L_UPPER_ARM: f64 = 0.28;
const L_FOREARM: f64 = 0.26;

/// Where the anchor joint sits in the world; arbitrary, since loading
/// normalizes it away.
const ROOT: Vector3<f64> = Vector3::new(0.05, 1.42, 2.30);

/// Fraction of the timeline spent in each phase, in order.
const PHASE_FRACTIONS: [(Phase, f64); 7] = [
    (Phase::Rest, 0.10),
    (Phase::Raise, 0.20),
    (Phase::Hold, 0.15),
    (Phase::Action, 0.20),
    (Phase::Hold, 0.15),
    (Phase::Lower, 0.15),
    (Phase::Rest, 0.05),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Rest,
    Raise,
    Hold,
    Action,
    Lower,
}

impl Phase {
    /// Whether the skeleton is nominally static during this phase.
    pub fn is_static(self) -> bool {
        matches!(self, Phase::Rest | Phase::Hold)
    }
}

/// The three exercise archetypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    /// Raise the right arm sideways, then turn the trunk.
    ArmRaiseRotate,
    /// Raise the right arm overhead, then lean the trunk sideways.
    ArmUpLean,
    /// Raise both arms to the front, then spread them apart.
    ArmsFrontSpread,
}

impl Archetype {
    pub fn name(self) -> &'static str {
        match self {
            Archetype::ArmRaiseRotate => "arm_raise_rotate",
            Archetype::ArmUpLean => "arm_up_lean",
            Archetype::ArmsFrontSpread => "arms_front_spread",
        }
    }

    pub const ALL: [Archetype; 3] = [
        Archetype::ArmRaiseRotate,
        Archetype::ArmUpLean,
        Archetype::ArmsFrontSpread,
    ];

    /// Peak elevation of the active arm(s), radians from hanging.
    fn elevation_target(self) -> f64 {
        match self {
            Archetype::ArmRaiseRotate => 1.4,
            Archetype::ArmUpLean => 2.0,
            Archetype::ArmsFrontSpread => std::f64::consts::FRAC_PI_2,
        }
    }
}

impl std::fmt::Display for Archetype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Archetype {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "arm_raise_rotate" => Ok(Archetype::ArmRaiseRotate),
            "arm_up_lean" => Ok(Archetype::ArmUpLean),
            "arms_front_spread" => Ok(Archetype::ArmsFrontSpread),
            other => Err(format!(
                "unknown exercise `{other}` (expected arm_raise_rotate, arm_up_lean \
                 or arms_front_spread)"
            )),
        }
    }
}

/// A mistake to bake into the generated movement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorInjection {
    None,
    /// During the hold phases the active arms sag until the wrist sits
    /// `delta` lower (in normalized units); the sag ramps in and out
    /// inside the hold so the transitions stay correct.
    ArmsTooLow { delta: f64 },
    /// The trunk lean of the action phase is skipped entirely.
    NoLean,
    /// One arm joint (and everything past it) is displaced `delta`
    /// normalized units forward for the whole recording.
    ArmOffset { joint: String, delta: f64 },
}

impl FromStr for ErrorInjection {
    type Err = String;

    /// Accepts `none`, `no_lean`, `arms_too_low:<delta>`, and
    /// `arm_offset:<joint>:<delta>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut it = s.split(':');
        let kind = it.next().unwrap_or("");
        let parsed = match kind {
            "none" => ErrorInjection::None,
            "no_lean" => ErrorInjection::NoLean,
            "arms_too_low" => {
                let delta = it
                    .next()
                    .ok_or("arms_too_low needs a delta, e.g. arms_too_low:0.3")?
                    .parse::<f64>()
                    .map_err(|e| format!("bad delta: {e}"))?;
                ErrorInjection::ArmsTooLow { delta }
            }
            "arm_offset" => {
                let joint = it
                    .next()
                    .ok_or("arm_offset needs a joint, e.g. arm_offset:ElbowRight:0.25")?
                    .to_string();
                let delta = it
                    .next()
                    .ok_or("arm_offset needs a delta, e.g. arm_offset:ElbowRight:0.25")?
                    .parse::<f64>()
                    .map_err(|e| format!("bad delta: {e}"))?;
                ErrorInjection::ArmOffset { joint, delta }
            }
            other => return Err(format!("unknown error kind `{other}`")),
        };
        if it.next().is_some() {
            return Err(format!("trailing fields in error spec `{s}`"));
        }
        Ok(parsed)
    }
}

/// Everything that determines one synthetic recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub exercise: Archetype,
    /// Nominal duration in seconds (scaled by `tempo`).
    pub duration: f64,
    pub fps: f64,
    /// Standard deviation of the sensor noise in normalized tangent
    /// units (positions and orientation angles alike).
    pub noise: f64,
    pub error: ErrorInjection,
    pub seed: u64,
    pub subject: String,
    /// Multiplies every motion amplitude; 1.0 is the canonical form.
    /// Small per-demonstration spreads make training sets realistic.
    pub amplitude: f64,
    /// Multiplies the duration; 1.0 is the canonical tempo.
    pub tempo: f64,
}

impl SynthSpec {
    pub fn new(exercise: Archetype, seed: u64) -> Self {
        Self {
            exercise,
            duration: 10.0,
            fps: 20.0,
            noise: 0.01,
            error: ErrorInjection::None,
            seed,
            subject: format!("synth-{seed}"),
            amplitude: 1.0,
            tempo: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::InvalidConfig("duration must be positive".into()));
        }
        if !(10.0..=120.0).contains(&self.fps) {
            return Err(Error::InvalidConfig(format!(
                "fps {} outside the supported 10..=120 range",
                self.fps
            )));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::InvalidConfig("noise must be non-negative".into()));
        }
        if !(self.amplitude > 0.0) || !(self.tempo > 0.0) {
            return Err(Error::InvalidConfig(
                "amplitude and tempo must be positive".into(),
            ));
        }
        if let ErrorInjection::ArmOffset { joint, .. } = &self.error {
            if arm_chain(joint).is_none() {
                return Err(Error::InvalidConfig(format!(
                    "arm_offset joint must be a shoulder, elbow or wrist, got `{joint}`"
                )));
            }
        }
        Ok(())
    }
}

/// One phase's frame range, half open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub phase: Phase,
    pub start: usize,
    pub end: usize,
}

/// Ground-truth sidecar emitted next to each synthetic recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthMeta {
    pub exercise: Archetype,
    pub seed: u64,
    pub duration: f64,
    pub fps: f64,
    pub noise: f64,
    pub error: ErrorInjection,
    pub amplitude: f64,
    pub tempo: f64,
    /// Phase boundaries in frame indices.
    pub phases: Vec<PhaseSpan>,
    /// First frame with nominal motion (start of the raise phase).
    pub first_motion_frame: usize,
}

impl SynthMeta {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("meta serializes");
        s.push('\n');
        s
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Which joints move when `joint` is displaced: the joint itself plus
/// everything distal on the same arm.
fn arm_chain(joint: &str) -> Option<Vec<&'static str>> {
    match joint {
        "ShoulderLeft" => Some(vec!["ShoulderLeft", "ElbowLeft", "WristLeft"]),
        "ElbowLeft" => Some(vec!["ElbowLeft", "WristLeft"]),
        "WristLeft" => Some(vec!["WristLeft"]),
        "ShoulderRight" => Some(vec!["ShoulderRight", "ElbowRight", "WristRight"]),
        "ElbowRight" => Some(vec!["ElbowRight", "WristRight"]),
        "WristRight" => Some(vec!["WristRight"]),
        _ => None,
    }
}

/// Elevation that puts the wrist `delta` normalized units lower than
/// `elevation` does. With a straight arm the wrist height is
/// `-cos(elevation) * (upper + forearm)`, so this is a closed form.
fn sagged_elevation(elevation: f64, delta: f64) -> f64 {
    let reach = (L_UPPER_ARM + L_FOREARM) / L_MID_SHOULDER;
    (elevation.cos() + delta / reach).clamp(-1.0, 1.0).acos()
}

/// Joint-angle state of the chain at one instant.
#[derive(Debug, Clone, Copy)]
struct ChainAngles {
    /// Arm elevation from hanging, per side.
    elev_left: f64,
    elev_right: f64,
    /// Arm azimuth: 0 points sideways, pi/2 points front.
    azim_left: f64,
    azim_right: f64,
    /// Sideways trunk lean (lower spine relative to the shoulders).
    lean: f64,
    /// Trunk turn about the vertical axis.
    turn: f64,
}

/// Phase index and progress within the phase at normalized time `s`.
fn phase_at(s: f64) -> (usize, f64) {
    let mut acc = 0.0;
    for (i, (_, frac)) in PHASE_FRACTIONS.iter().enumerate() {
        if s < acc + frac || i == PHASE_FRACTIONS.len() - 1 {
            return (i, ((s - acc) / frac).clamp(0.0, 1.0));
        }
        acc += frac;
    }
    unreachable!()
}

/// Progress of the raise parameter (0 at rest, 1 while raised) and of
/// the action parameter at normalized time `s`.
fn nominal_progress(s: f64) -> (f64, f64) {
    let (idx, u) = phase_at(s);
    match PHASE_FRACTIONS[idx].0 {
        Phase::Rest => (0.0, 0.0),
        Phase::Raise => (smoothstep(u), 0.0),
        Phase::Hold => {
            // First hold precedes the action, second follows it.
            if idx < 3 {
                (1.0, 0.0)
            } else {
                (1.0, 1.0)
            }
        }
        Phase::Action => (1.0, smoothstep(u)),
        Phase::Lower => (1.0 - smoothstep(u), 1.0 - smoothstep(u)),
    }
}

/// Sag envelope inside hold phases: ramps in over the first 40% of the
/// hold, stays flat, and ramps out over the last 40%, so the enclosing
/// transitions are untouched and the drift stays slow.
fn hold_sag(s: f64) -> f64 {
    let (idx, u) = phase_at(s);
    if PHASE_FRACTIONS[idx].0 != Phase::Hold {
        return 0.0;
    }
    if u < 0.4 {
        smoothstep(u / 0.4)
    } else if u > 0.6 {
        smoothstep((1.0 - u) / 0.4)
    } else {
        1.0
    }
}

fn chain_angles(spec: &SynthSpec, s: f64) -> ChainAngles {
    let (raise_p, action_p) = nominal_progress(s);
    let amp = spec.amplitude;
    let target = amp * spec.exercise.elevation_target();
    let mut elevation = target * raise_p;

    if let ErrorInjection::ArmsTooLow { delta } = spec.error {
        let sag = hold_sag(s);
        if sag > 0.0 {
            let sagged = sagged_elevation(target, delta);
            elevation += sag * (sagged - target);
        }
    }

    let mut angles = ChainAngles {
        elev_left: 0.0,
        elev_right: elevation,
        azim_left: 0.0,
        azim_right: 0.0,
        lean: 0.0,
        turn: 0.0,
    };
    match spec.exercise {
        Archetype::ArmRaiseRotate => {
            angles.turn = amp * 0.5 * action_p;
        }
        Archetype::ArmUpLean => {
            let lean = if spec.error == ErrorInjection::NoLean {
                0.0
            } else {
                amp * 0.9 * action_p
            };
            angles.lean = lean;
        }
        Archetype::ArmsFrontSpread => {
            angles.elev_left = elevation;
            // Arms rise toward the front, then the action sweeps them
            // sideways; lowering retraces both angles.
            let azim = std::f64::consts::FRAC_PI_2 * (1.0 - amp * action_p) * raise_p;
            angles.azim_left = azim;
            angles.azim_right = azim;
        }
    }
    angles
}

/// Quaternion rotating the rest direction of a hanging arm onto `dir`.
fn segment_orientation(dir: Vector3<f64>) -> UnitQuaternion {
    let rest = Vector3::new(0.0, -1.0, 0.0);
    let dot = rest.dot(&dir).clamp(-1.0, 1.0);
    let axis = rest.cross(&dir);
    let norm = axis.norm();
    if norm < 1e-12 {
        return UnitQuaternion::identity();
    }
    UnitQuaternion::from_axis_angle(axis / norm, dot.acos())
}

fn rot_y(angle: f64) -> UnitQuaternion {
    UnitQuaternion::from_axis_angle(Vector3::new(0.0, 1.0, 0.0), angle)
}

fn rot_z(angle: f64) -> UnitQuaternion {
    UnitQuaternion::from_axis_angle(Vector3::new(0.0, 0.0, 1.0), angle)
}

/// World positions and orientations of the eleven upper-body joints for
/// one set of chain angles.
fn skeleton_at(angles: &ChainAngles) -> BTreeMap<String, (Vector3<f64>, UnitQuaternion)> {
    let mut joints = BTreeMap::new();
    let turn = rot_y(angles.turn);
    let lean = rot_z(angles.lean);

    // Spine: the anchor sits at the origin of the torso frame; the
    // lower spine swings with the lean, the upper joints carry the turn.
    let mid = lean.rotate(Vector3::new(0.0, -L_MID_SHOULDER, 0.0));
    let base = lean.rotate(Vector3::new(0.0, -L_MID_SHOULDER - L_BASE_MID, 0.0));
    joints.insert("SpineBase".to_string(), (base, lean));
    joints.insert("SpineMid".to_string(), (mid, lean));
    joints.insert(
        "SpineShoulder".to_string(),
        (Vector3::zeros(), turn),
    );
    joints.insert(
        "Neck".to_string(),
        (Vector3::new(0.0, L_SHOULDER_NECK, 0.0), turn),
    );
    joints.insert(
        "Head".to_string(),
        (Vector3::new(0.0, L_SHOULDER_NECK + L_NECK_HEAD, 0.0), turn),
    );

    for (side, label) in [(1.0, "Right"), (-1.0, "Left")] {
        let (elev, azim) = if side > 0.0 {
            (angles.elev_right, angles.azim_right)
        } else {
            (angles.elev_left, angles.azim_left)
        };
        let shoulder = turn.rotate(Vector3::new(side * SHOULDER_HALF_WIDTH, 0.0, 0.0));
        let dir = turn.rotate(Vector3::new(
            side * elev.sin() * azim.cos(),
            -elev.cos(),
            elev.sin() * azim.sin(),
        ));
        let elbow = shoulder + dir * L_UPPER_ARM;
        let wrist = elbow + dir * L_FOREARM;
        let seg = segment_orientation(dir);
        joints.insert(format!("Shoulder{label}"), (shoulder, turn));
        joints.insert(format!("Elbow{label}"), (elbow, seg));
        joints.insert(format!("Wrist{label}"), (wrist, seg));
    }
    joints
}

/// Phase frame spans for a recording of `n` frames.
fn phase_spans(n: usize) -> Vec<PhaseSpan> {
    let mut spans = Vec::with_capacity(PHASE_FRACTIONS.len());
    let mut acc = 0.0;
    for (phase, frac) in PHASE_FRACTIONS {
        let start = (acc * n as f64).round() as usize;
        acc += frac;
        let end = (acc * n as f64).round() as usize;
        spans.push(PhaseSpan {
            phase,
            start,
            end: end.min(n),
        });
    }
    spans
}

/// Generates one synthetic recording and its ground-truth metadata.
pub fn generate(spec: &SynthSpec) -> Result<(RawSequence, SynthMeta)> {
    spec.validate()?;
    let frames_f = spec.duration * spec.tempo * spec.fps;
    let n = (frames_f.round() as usize).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = StandardNormal;
    let mut gauss = || -> f64 { normal.sample(&mut rng) };

    // For the arms-too-low error on a single-arm exercise only the
    // right arm sags; with both arms active the sag applies to both.
    // chain_angles already mirrors elevation for two-arm archetypes.
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let s = i as f64 / n as f64;
        let angles = chain_angles(spec, s);
        let mut skeleton = skeleton_at(&angles);

        if let ErrorInjection::ArmOffset { joint, delta } = &spec.error {
            if let Some(chain) = arm_chain(joint) {
                let shift = Vector3::new(0.0, 0.0, delta * L_MID_SHOULDER);
                for name in chain {
                    if let Some(entry) = skeleton.get_mut(name) {
                        entry.0 += shift;
                    }
                }
            }
        }

        let mut joints = BTreeMap::new();
        for (name, (pos, orient)) in skeleton {
            let (pos, orient) = if spec.noise > 0.0 {
                let dp = Vector3::new(gauss(), gauss(), gauss()) * (spec.noise * L_MID_SHOULDER);
                let dq = Vector3::new(gauss(), gauss(), gauss()) * spec.noise;
                (pos + dp, quat_exp(orient, dq))
            } else {
                (pos, orient)
            };
            joints.insert(
                name,
                RawJoint {
                    position: ROOT + pos,
                    orientation: orient,
                    tracked: true,
                },
            );
        }
        frames.push(RawFrame {
            t: i as f64 / spec.fps,
            joints,
        });
    }

    let spans = phase_spans(n);
    let first_motion_frame = spans
        .iter()
        .find(|s| s.phase == Phase::Raise)
        .map(|s| s.start)
        .unwrap_or(0);
    let meta = SynthMeta {
        exercise: spec.exercise,
        seed: spec.seed,
        duration: spec.duration,
        fps: spec.fps,
        noise: spec.noise,
        error: spec.error.clone(),
        amplitude: spec.amplitude,
        tempo: spec.tempo,
        phases: spans,
        first_motion_frame,
    };
    let raw = RawSequence {
        subject: spec.subject.clone(),
        exercise: spec.exercise.name().to_string(),
        fps: spec.fps,
        frames,
    };
    Ok((raw, meta))
}
