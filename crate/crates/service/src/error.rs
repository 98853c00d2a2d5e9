use gridlock_core::content::CurriculumError;
use gridlock_core::sim::SimError;
use gridlock_core::telemetry::TelemetryError;
use gridlock_core::tutor::TutorError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown curriculum `{0}`")]
    UnknownCurriculum(String),
    #[error("unknown block `{0}`")]
    UnknownBlock(String),
    #[error("block `{0}` is not unlocked for this session")]
    BlockLocked(String),
    #[error("block `{block}` is a {kind} activity, not a code task")]
    WrongActivityType { block: String, kind: String },
    #[error("`{0}` events are recorded by the server and cannot be posted")]
    ServerOnlyEvent(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Tutor(#[from] TutorError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error("replay diverged at seq {seq}: {message}")]
    ReplayDiverged { seq: u64, message: String },
    #[error("agent snapshot `{path}`: {message}")]
    Snapshot { path: String, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "UnknownSession",
            ServiceError::UnknownCurriculum(_) => "UnknownCurriculum",
            ServiceError::UnknownBlock(_) => "UnknownBlockId",
            ServiceError::BlockLocked(_) => "BlockLocked",
            ServiceError::WrongActivityType { .. } => "WrongActivityType",
            ServiceError::ServerOnlyEvent(_) => "ServerOnlyEvent",
            ServiceError::NotFound(_) => "NotFound",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Telemetry(TelemetryError::InvalidPayload { .. }) => "InvalidPayload",
            ServiceError::Telemetry(TelemetryError::StorageFailure(_)) => "StorageFailure",
            ServiceError::Telemetry(TelemetryError::CorruptLog { .. }) => "CorruptLog",
            ServiceError::Tutor(TutorError::UnknownAction { .. }) => "UnknownAction",
            ServiceError::Tutor(TutorError::OutOfRangeScore(_)) => "OutOfRangeScore",
            ServiceError::Tutor(TutorError::EmptyCatalog(_)) => "EmptyCatalog",
            ServiceError::Tutor(TutorError::CorruptSnapshot(_)) => "CorruptSnapshot",
            ServiceError::Sim(_) => "MalformedMix",
            ServiceError::Curriculum(CurriculumError::UnknownBlockId(_)) => "UnknownBlockId",
            ServiceError::Curriculum(_) => "MalformedDocument",
            ServiceError::ReplayDiverged { .. } => "ReplayDiverged",
            ServiceError::Snapshot { .. } => "CorruptSnapshot",
            ServiceError::Io(_) => "StorageFailure",
        }
    }

    /// HTTP status for the error body.
    pub fn status(&self) -> u16 {
        match self.code() {
            "UnknownSession" | "UnknownCurriculum" | "UnknownBlockId" | "NotFound" => 404,
            "BlockLocked" | "WrongActivityType" => 409,
            "ServerOnlyEvent" | "BadRequest" | "MalformedMix" | "MalformedDocument" => 400,
            "InvalidPayload" | "UnknownAction" | "OutOfRangeScore" => 422,
            _ => 500,
        }
    }

    pub fn detail(&self) -> Value {
        match self {
            ServiceError::UnknownSession(id) => json!({ "session": id }),
            ServiceError::UnknownCurriculum(id) => json!({ "curriculum": id }),
            ServiceError::UnknownBlock(b) | ServiceError::BlockLocked(b) => json!({ "block": b }),
            ServiceError::WrongActivityType { block, kind } => json!({ "block": block, "activity": kind }),
            ServiceError::ServerOnlyEvent(t) => json!({ "type": t }),
            ServiceError::Telemetry(TelemetryError::InvalidPayload { field, .. }) => json!({ "field": field }),
            ServiceError::Telemetry(TelemetryError::CorruptLog { line, .. }) => json!({ "line": line }),
            ServiceError::ReplayDiverged { seq, .. } => json!({ "seq": seq }),
            _ => Value::Null,
        }
    }

    pub fn body(&self) -> Value {
        json!({ "code": self.code(), "message": self.to_string(), "detail": self.detail() })
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
