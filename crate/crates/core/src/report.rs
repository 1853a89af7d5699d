//! Check results shared by the engines and the CLI.

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Diagnostic outcome; never fails a run.
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub data: Value,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool) -> Check {
        Check {
            name: name.into(),
            status: if pass { Status::Pass } else { Status::Fail },
            witness: None,
            data: Value::Null,
        }
    }

    pub fn info(name: impl Into<String>, data: Value) -> Check {
        Check { name: name.into(), status: Status::Info, witness: None, data }
    }

    pub fn from_result<E: std::fmt::Display>(name: impl Into<String>, r: Result<(), E>) -> Check {
        match r {
            Ok(()) => Check::new(name, true),
            Err(e) => Check::new(name, false).witness(e.to_string()),
        }
    }

    pub fn witness(mut self, w: impl Into<String>) -> Check {
        self.witness = Some(w.into());
        self
    }

    pub fn data(mut self, d: Value) -> Check {
        self.data = d;
        self
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| !c.failed())
}
