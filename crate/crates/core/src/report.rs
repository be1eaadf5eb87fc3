//! Pass/fail records for identity checks.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub status: Status,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn new(suite: impl Into<String>) -> Self {
        VerificationReport {
            suite: suite.into(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, status: Status, detail: impl Into<String>) {
        self.checks.push(Check {
            id: id.into(),
            status,
            detail: detail.into(),
            elapsed_ms: None,
        });
    }

    pub fn pass(&mut self, id: impl Into<String>, detail: impl Into<String>) {
        self.push(id, Status::Pass, detail);
    }

    pub fn fail(&mut self, id: impl Into<String>, detail: impl Into<String>) {
        self.push(id, Status::Fail, detail);
    }

    pub fn skip(&mut self, id: impl Into<String>, detail: impl Into<String>) {
        self.push(id, Status::Skipped, detail);
    }

    /// Records a check whose outcome is `Ok(detail)` for PASS and
    /// `Err(detail)` for FAIL, timing the closure.
    pub fn run(&mut self, id: impl Into<String>, f: impl FnOnce() -> Result<String, String>) {
        let start = Instant::now();
        let (status, detail) = match f() {
            Ok(d) => (Status::Pass, d),
            Err(d) => (Status::Fail, d),
        };
        let elapsed = start.elapsed().as_millis() as u64;
        self.checks.push(Check {
            id: id.into(),
            status,
            detail,
            elapsed_ms: Some(elapsed),
        });
    }

    pub fn check(&mut self, id: impl Into<String>, ok: bool, detail: impl Into<String>) {
        let status = if ok { Status::Pass } else { Status::Fail };
        self.push(id, status, detail);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        let prefix = other.suite;
        for mut c in other.checks {
            if !prefix.is_empty() {
                c.id = format!("{prefix}/{}", c.id);
            }
            self.checks.push(c);
        }
    }

    pub fn overall(&self) -> Status {
        if self.checks.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else {
            Status::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.overall() == Status::Pass
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn strip_timing(&mut self) {
        for c in &mut self.checks {
            c.elapsed_ms = None;
        }
    }

    pub fn to_json_string(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            suite: &'a str,
            overall: Status,
            checks: &'a [Check],
        }
        let doc = Doc {
            suite: &self.suite,
            overall: self.overall(),
            checks: &self.checks,
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!("{:<7} {}", c.status.name(), c.id));
            if let Some(ms) = c.elapsed_ms {
                out.push_str(&format!(" ({ms} ms)"));
            }
            if !c.detail.is_empty() {
                out.push_str(": ");
                out.push_str(&c.detail);
            }
            out.push('\n');
        }
        out.push_str(&format!("{} {}\n", self.suite, self.overall()));
        out
    }
}
