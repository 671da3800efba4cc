use std::fmt;

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Invalid or unreadable configuration (exit 2).
    Config(String),
    /// A pipeline stage failed (exit 1).
    Stage { stage: String, message: String },
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }

    pub fn stage(stage: &str, msg: impl fmt::Display) -> Self {
        Failure::Stage { stage: stage.to_string(), message: msg.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Stage { .. } => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Stage { stage, message } => write!(f, "stage {stage} failed: {message}"),
        }
    }
}

impl std::error::Error for Failure {}
