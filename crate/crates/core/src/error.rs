use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A structural problem with an instance, located by stage/state/action index
/// where applicable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stage: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub state: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub action: Option<usize>,
    pub message: String,
}

impl Violation {
    pub fn global(message: impl Into<String>) -> Self {
        Self {
            stage: None,
            state: None,
            action: None,
            message: message.into(),
        }
    }

    pub fn at_stage(stage: usize, message: impl Into<String>) -> Self {
        Self {
            stage: Some(stage),
            ..Self::global(message)
        }
    }

    pub fn at_state(stage: usize, state: usize, message: impl Into<String>) -> Self {
        Self {
            stage: Some(stage),
            state: Some(state),
            ..Self::global(message)
        }
    }

    pub fn at_action(stage: usize, state: usize, action: usize, message: impl Into<String>) -> Self {
        Self {
            stage: Some(stage),
            state: Some(state),
            action: Some(action),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut sep = "";
        write!(f, "[")?;
        if let Some(n) = self.stage {
            write!(f, "n={n}")?;
            sep = ", ";
        }
        if let Some(s) = self.state {
            write!(f, "{sep}s={s}")?;
            sep = ", ";
        }
        if let Some(a) = self.action {
            write!(f, "{sep}a={a}")?;
        }
        write!(f, "] {}", self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("instance has {} violation(s); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),

    #[error("action {action} is not admissible at stage {stage}, state {state}")]
    Inadmissible {
        stage: usize,
        state: usize,
        action: usize,
    },

    #[error("enumeration needs {count} policy evaluations, above the cap of {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("malformed policy: {0}")]
    MalformedPolicy(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no {0} element exists in the ambiguity set")]
    NoExtremeElement(&'static str),

    #[error("linear program failed: {0}")]
    LinearProgram(String),

    #[error("instance does not match the schema: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
