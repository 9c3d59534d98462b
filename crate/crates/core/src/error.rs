//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("empty sequence")]
    EmptySequence,

    #[error("timestamps not strictly increasing at frame {frame}")]
    NonMonotonicTimestamps { frame: usize },

    #[error("invalid quaternion (norm too close to zero) at frame {frame}, joint {joint}")]
    InvalidQuaternion { frame: usize, joint: String },

    #[error("malformed record at line {line}: {detail}")]
    MalformedRecord { line: usize, detail: String },

    #[error("missing joint {joint} at frame {frame}")]
    MissingJoint { frame: usize, joint: String },

    #[error("degenerate spine (SpineShoulder and SpineMid coincide) at frame {frame}")]
    DegenerateSpine { frame: usize },

    #[error("joint count mismatch: expected {expected}, found {found}")]
    JointCountMismatch { expected: usize, found: usize },

    #[error("sequences use different joint sets")]
    JointSetMismatch,

    #[error("tangent vector has dimension {found}, expected {expected}")]
    TangentDimension { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("unknown body part: {0}")]
    UnknownBodyPart(String),

    #[error("invalid joint set: {0}")]
    InvalidJointSet(String),

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("timestamp {value} outside the modelled range [0, 1]")]
    TimestampOutOfRange { value: f64 },

    #[error("no motion detected above the threshold")]
    NoMotionDetected,

    #[error("invalid model file: {0}")]
    ModelValidation(String),

    #[error("invalid classifier file: {0}")]
    ClassifierValidation(String),

    #[error("no classifier trained for exercise {exercise}, part {part}")]
    UnknownScope { exercise: String, part: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
