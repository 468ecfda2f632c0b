//! Check records, their JSON-lines form and the summary table.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub id: String,
    /// Name of the identity or formula being checked.
    pub anchor: String,
    pub params: Map<String, Value>,
    pub expected: Value,
    pub observed: Value,
    pub residual: Option<f64>,
    pub status: Status,
    pub seed: u64,
    pub wall_ms: f64,
}

/// Rounds to 15 significant digits so reports do not depend on the last
/// bits of floating point noise.
pub fn round15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// Builder for one record; the clock starts at creation.
pub struct Check {
    id: String,
    anchor: &'static str,
    params: Map<String, Value>,
    start: Instant,
}

impl Check {
    pub fn new(id: impl Into<String>, anchor: &'static str) -> Check {
        Check {
            id: id.into(),
            anchor,
            params: Map::new(),
            start: Instant::now(),
        }
    }

    pub fn param(mut self, key: &str, v: impl Into<Value>) -> Check {
        self.params.insert(key.into(), v.into());
        self
    }

    fn finish(self, expected: Value, observed: Value, residual: Option<f64>, status: Status) -> Record {
        Record {
            id: self.id,
            anchor: self.anchor.into(),
            params: self.params,
            expected,
            observed,
            residual: residual.map(round15),
            status,
            seed: 0,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        }
    }

    /// Exact comparison.
    pub fn equal<T: PartialEq + Into<Value>>(self, expected: T, observed: T) -> Record {
        let status = if expected == observed { Status::Pass } else { Status::Fail };
        self.finish(expected.into(), observed.into(), None, status)
    }

    /// `residual < tol`, with NaN failing.
    pub fn below(self, residual: f64, tol: f64) -> Record {
        let status = if residual < tol { Status::Pass } else { Status::Fail };
        let expected = serde_json::json!({ "below": tol });
        self.finish(expected, Value::from(round15(residual)), Some(residual), status)
    }

    pub fn truth(self, ok: bool, observed: impl Into<Value>) -> Record {
        let status = if ok { Status::Pass } else { Status::Fail };
        self.finish(Value::Bool(true), observed.into(), None, status)
    }

    pub fn fail(self, message: impl Into<String>) -> Record {
        self.finish(Value::Null, Value::String(message.into()), None, Status::Fail)
    }

    pub fn skipped(self, reason: impl Into<String>) -> Record {
        self.finish(Value::Null, Value::String(reason.into()), None, Status::Skipped)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub records: Vec<Record>,
}

impl Report {
    /// Sorts by id and stamps the seed; the order is independent of how
    /// checks were scheduled.
    pub fn new(mut records: Vec<Record>, seed: u64) -> Report {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        for r in &mut records {
            r.seed = seed;
        }
        Report { records }
    }

    pub fn count(&self, s: Status) -> usize {
        self.records.iter().filter(|r| r.status == s).count()
    }

    /// 0 when everything passed, 2 on any failure, 3 on skips without failures.
    pub fn exit_code(&self) -> i32 {
        if self.count(Status::Fail) > 0 {
            2
        } else if self.count(Status::Skipped) > 0 {
            3
        } else {
            0
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialise"));
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let width = self.records.iter().map(|r| r.id.len()).max().unwrap_or(2).max(5);
        let _ = writeln!(s, "{:<width$}  {:<8}  {:>10}", "check", "status", "ms");
        for r in &self.records {
            let status = match r.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIPPED",
            };
            let _ = writeln!(s, "{:<width$}  {:<8}  {:>10.1}", r.id, status, r.wall_ms);
        }
        let _ = writeln!(
            s,
            "{} passed, {} failed, {} skipped",
            self.count(Status::Pass),
            self.count(Status::Fail),
            self.count(Status::Skipped)
        );
        if let Some(first) = self.records.iter().find(|r| r.status == Status::Fail) {
            let _ = writeln!(s, "first failure: {} ({}): observed {}", first.id, first.anchor, first.observed);
        }
        s
    }
}
