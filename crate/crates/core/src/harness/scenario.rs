use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::checks::{find, CheckContext, CheckDef};
use crate::catalog::{ConnSpec, MetricSpec};
use crate::error::{Error, Result};

fn default_points() -> usize {
    5
}

/// A declarative list of checks with shared settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub paper_ref: String,
    pub seed: u64,
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub conn: Option<ConnSpec>,
    pub checks: Vec<CheckEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckEntry {
    pub name: String,
    /// Report name, for running one check on several fixtures.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub conn: Option<ConnSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub paper_ref: String,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub seed: u64,
    pub order: usize,
    pub checks: Vec<CheckResult>,
}

/// Overall outcome, mapped to the CLI exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Pass,
    Fail,
    EvalError,
}

impl RunOutcome {
    pub fn exit_code(self) -> i32 {
        match self {
            RunOutcome::Pass => 0,
            RunOutcome::Fail => 1,
            RunOutcome::EvalError => 3,
        }
    }
}

impl Report {
    pub fn outcome(&self) -> RunOutcome {
        if self.checks.iter().any(|c| c.error.is_some()) {
            RunOutcome::EvalError
        } else if self.checks.iter().all(|c| c.pass) {
            RunOutcome::Pass
        } else {
            RunOutcome::Fail
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs one registered check and records the result.
pub fn run_check(def: &CheckDef, ctx: &CheckContext, label: &str, tolerance: f64) -> CheckResult {
    let start = Instant::now();
    let out = (def.run)(ctx);
    let ms = start.elapsed().as_millis() as u64;
    let (residual, error) = match out {
        Ok(r) if r.is_finite() => (Some(r), None),
        Ok(r) => (None, Some(format!("non-finite residual {r}"))),
        Err(e) => (None, Some(e.to_string())),
    };
    CheckResult {
        name: label.to_string(),
        paper_ref: def.paper_ref.to_string(),
        residual,
        tolerance,
        pass: residual.is_some_and(|r| r <= tolerance),
        ms,
        error,
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::InvalidParam(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParam(format!("cannot read {}: {e}", path.display())))?;
        Scenario::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        for c in &self.checks {
            if find(&c.name).is_none() {
                return Err(Error::Unknown(c.name.clone()));
            }
            if let Some(t) = c.tolerance {
                if t.is_nan() || t < 0.0 {
                    return Err(Error::InvalidParam(format!("tolerance of {} must be non-negative", c.name)));
                }
            }
            if let Some(m) = &c.metric {
                m.validate()?;
            }
        }
        if let Some(m) = &self.metric {
            m.validate()?;
        }
        Ok(())
    }

    /// Runs every check concurrently. `order` overrides the scenario order.
    pub fn run(&self, order: Option<usize>) -> Report {
        let order = order.or(self.order).unwrap_or_else(super::default_order);
        let mut results: Vec<CheckResult> = std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .checks
                .iter()
                .map(|entry| {
                    scope.spawn(move || {
                        let def = find(&entry.name).expect("validated");
                        let ctx = CheckContext {
                            points: self.points,
                            metric: entry.metric.clone().or_else(|| self.metric.clone()),
                            conn: entry.conn.clone().or_else(|| self.conn.clone()),
                            ..CheckContext::new(self.seed, order)
                        };
                        let label = entry.label.as_deref().unwrap_or(def.name);
                        run_check(def, &ctx, label, entry.tolerance.unwrap_or(def.tolerance))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("check thread panicked")).collect()
        });
        results.sort_by(|a, b| a.name.cmp(&b.name));
        Report { version: env!("CARGO_PKG_VERSION").to_string(), seed: self.seed, order, checks: results }
    }
}

/// Loads, runs and optionally writes the report. Parse errors are returned as `Err`.
pub fn run_scenario(path: &Path, out: Option<&Path>, order: Option<usize>) -> Result<Report> {
    let report = Scenario::load(path)?.run(order);
    if let Some(out) = out {
        std::fs::write(out, report.to_json() + "\n")
            .map_err(|e| Error::InvalidParam(format!("cannot write {}: {e}", out.display())))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_check_is_rejected() {
        let s = r#"{"name":"x","paper_ref":"y","seed":1,"checks":[{"name":"nope"}]}"#;
        assert!(matches!(Scenario::parse(s), Err(Error::Unknown(_))));
        assert!(Scenario::parse("{not json").is_err());
    }

    #[test]
    fn zero_tolerance_fails_with_residual() {
        let s = r#"{"name":"x","paper_ref":"y","seed":1,"order":3,"points":2,
                    "checks":[{"name":"diag_sphere_scale_tractor","tolerance":0.0}]}"#;
        let r = Scenario::parse(s).unwrap().run(None);
        assert_eq!(r.checks.len(), 1);
        assert!(r.checks[0].residual.is_some());
        assert!(!r.checks[0].pass);
        assert_eq!(r.outcome(), RunOutcome::Fail);
    }

    #[test]
    fn order_exhaustion_is_an_evaluation_error() {
        let s = r#"{"name":"x","paper_ref":"y","seed":1,"order":2,"points":1,
                    "checks":[{"name":"kappa_closed_form"}]}"#;
        let r = Scenario::parse(s).unwrap().run(None);
        assert!(r.checks[0].error.is_some());
        assert_eq!(r.outcome().exit_code(), 3);
    }

    #[test]
    fn registry_names_are_unique() {
        let reg = crate::harness::registry();
        let mut names: Vec<_> = reg.iter().map(|c| c.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), reg.len());
        for c in reg {
            assert!(!c.paper_ref.is_empty());
        }
    }
}
