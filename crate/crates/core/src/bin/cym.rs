use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use cym_core::catalog::{ConnSpec, MetricSpec, CONNECTIONS, METRICS};
use cym_core::curvature::FullCurvature;
use cym_core::gauge::{cym_current, ym_current};
use cym_core::harness::{self, run_scenario, CheckContext};
use cym_core::{Error, Result, Tensor};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "cym", version, about = "Jet-based verifier for conformal and Yang-Mills identities")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List catalog entries and registered checks.
    List,
    /// Print tensor components of a catalog entry at a point as JSON.
    Eval {
        /// Metric or connection name, or a full spec (`name,key=val` or JSON).
        entry: String,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long)]
        order: Option<usize>,
        /// Extra `key=val` parameters merged into the entry spec.
        #[arg(long)]
        params: Vec<String>,
        /// Base metric for a connection entry.
        #[arg(long)]
        metric: Option<String>,
        /// Derived field: metric, christoffel, riemann, ricci, schouten, weyl,
        /// cotton, bach (metrics); potential, curvature, ym_current,
        /// cym_current (connections).
        #[arg(long)]
        field: Option<String>,
        /// Include all Taylor coefficients, not just values.
        #[arg(long)]
        jets: bool,
    },
    /// Run one registered check.
    Check {
        name: String,
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        conn: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long, default_value_t = 5)]
        points: usize,
    },
    /// Run a scenario file and write a JSON report.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        order: Option<usize>,
    },
}

/// Parses `name,key=val,...` (array values use `:` separators) or JSON.
fn parse_spec_value(text: &str) -> Result<Value> {
    let text = text.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text).map_err(|e| Error::InvalidParam(e.to_string()));
    }
    let mut parts = text.split(',');
    let mut map = Map::new();
    map.insert("name".into(), Value::String(parts.next().unwrap_or_default().to_string()));
    for kv in parts.filter(|s| !s.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::InvalidParam(format!("expected key=val, got {kv}")))?;
        map.insert(k.to_string(), param_value(v)?);
    }
    Ok(Value::Object(map))
}

fn param_value(v: &str) -> Result<Value> {
    if v.contains(':') {
        let xs: Result<Vec<Value>> = v.split(':').map(param_value).collect();
        return Ok(Value::Array(xs?));
    }
    Ok(serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string())))
}

fn merge_params(mut spec: Value, params: &[String]) -> Result<Value> {
    for p in params {
        let (k, v) = p.split_once('=').ok_or_else(|| Error::InvalidParam(format!("expected key=val, got {p}")))?;
        spec[k] = param_value(v)?;
    }
    Ok(spec)
}

fn metric_spec(v: Value) -> Result<MetricSpec> {
    let m: MetricSpec = serde_json::from_value(v).map_err(|e| Error::Unknown(format!("metric spec: {e}")))?;
    m.validate()?;
    Ok(m)
}

fn conn_spec(v: Value) -> Result<ConnSpec> {
    serde_json::from_value(v).map_err(|e| Error::Unknown(format!("connection spec: {e}")))
}

fn tensor_json(t: &Tensor, jets: bool) -> Value {
    let mut v = json!({
        "slots": t.slots().iter().map(|s| format!("{s:?}")).collect::<Vec<_>>(),
        "dims": t.dims(),
        "order": t.order(),
        "values": t.values(),
    });
    if jets {
        v["coeffs"] = t.data().iter().map(|j| j.coeffs().to_vec()).collect::<Vec<_>>().into();
    }
    v
}

fn eval(
    entry: &str,
    at: &str,
    order: usize,
    params: &[String],
    metric: Option<&str>,
    field: Option<&str>,
    jets: bool,
) -> Result<Value> {
    let p: Vec<f64> = at
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::InvalidParam(format!("bad coordinate {s}"))))
        .collect::<Result<_>>()?;
    let spec = merge_params(parse_spec_value(entry)?, params)?;
    let name = spec["name"].as_str().unwrap_or_default().to_string();
    let tensor = if METRICS.contains(&name.as_str()) {
        let ms = metric_spec(spec.clone())?;
        if p.len() != ms.dim() {
            return Err(Error::InvalidParam(format!("{} coordinates for a {}-dimensional metric", p.len(), ms.dim())));
        }
        if !ms.in_domain(&p) {
            return Err(Error::ChartDomain(format!("{p:?}")));
        }
        let field = field.unwrap_or("metric");
        let need = match field {
            "metric" => 0,
            "christoffel" => 1,
            "riemann" | "ricci" | "schouten" => 2,
            "weyl" | "cotton" => 3,
            "bach" => 4,
            other => return Err(Error::Unknown(format!("field {other}"))),
        };
        let m = ms.metric(&p, order.max(need))?;
        if need > 1 {
            let full = FullCurvature::new(&m)?;
            match field {
                "riemann" => full.curv.riemann,
                "ricci" => full.curv.ricci,
                "schouten" => full.curv.schouten,
                "weyl" => full.weyl,
                "cotton" => full.cotton,
                _ => full.bach,
            }
        } else if need == 1 {
            m.gamma.clone()
        } else {
            m.g
        }
    } else if CONNECTIONS.contains(&name.as_str()) {
        let cs = conn_spec(spec.clone())?;
        let default_metric = json!({"name": "flat", "n": p.len()});
        let ms = metric_spec(match metric {
            Some(s) => parse_spec_value(s)?,
            None => default_metric,
        })?;
        if p.len() != ms.dim() {
            return Err(Error::InvalidParam(format!("{} coordinates for a {}-dimensional metric", p.len(), ms.dim())));
        }
        let field = field.unwrap_or("potential");
        let need = match field {
            "potential" => 0,
            "curvature" => 1,
            "ym_current" => 2,
            "cym_current" => 4,
            other => return Err(Error::Unknown(format!("field {other}"))),
        };
        let k = order.max(need);
        let a = cs.connection(&ms, &p, k)?;
        match field {
            "potential" => a.a.clone(),
            "curvature" => a.curvature()?,
            "ym_current" => ym_current(&ms.metric(&p, k)?, &a)?,
            _ => {
                let m = ms.metric(&p, k)?;
                let full = FullCurvature::new(&m)?;
                cym_current(&m, &full.curv, &a)?
            }
        }
    } else {
        return Err(Error::Unknown(name));
    };
    Ok(json!({"entry": spec, "at": p, "field": tensor_json(&tensor, jets)}))
}

fn list() {
    say!("metrics:");
    for m in METRICS {
        say!("  {m}");
    }
    say!("connections:");
    for c in CONNECTIONS {
        say!("  {c}");
    }
    say!("checks:");
    for c in harness::registry() {
        let crit = c.criterion.map(|k| format!("[{k}]")).unwrap_or_else(|| "[diag]".into());
        say!("  {:<32} {:<7} tol {:<8e} {}", c.name, crit, c.tolerance, c.paper_ref);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::List => {
            list();
            0
        }
        Cmd::Eval { entry, at, order, params, metric, field, jets } => {
            let order = order.unwrap_or_else(harness::default_order);
            match eval(&entry, &at, order, &params, metric.as_deref(), field.as_deref(), jets) {
                Ok(v) => {
                    say!("{}", serde_json::to_string_pretty(&v).expect("json"));
                    0
                }
                Err(e @ (Error::Unknown(_) | Error::InvalidParam(_))) => {
                    eprintln!("error: {e}");
                    2
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    3
                }
            }
        }
        Cmd::Check { name, metric, conn, seed, tol, order, points } => {
            let Some(def) = harness::find(&name) else {
                eprintln!("error: unknown check {name}");
                return ExitCode::from(2);
            };
            let metric = match metric.map(|s| parse_spec_value(&s).and_then(metric_spec)).transpose() {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let conn = match conn.map(|s| parse_spec_value(&s).and_then(conn_spec)).transpose() {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let ctx = CheckContext {
                points,
                metric,
                conn,
                ..CheckContext::new(seed, order.unwrap_or_else(harness::default_order))
            };
            let r = harness::run_check(def, &ctx, def.name, tol.unwrap_or(def.tolerance));
            say!("{}", serde_json::to_string_pretty(&r).expect("json"));
            if r.error.is_some() {
                3
            } else if r.pass {
                0
            } else {
                1
            }
        }
        Cmd::Run { scenario, out, order } => match run_scenario(&scenario, out.as_deref(), order) {
            Ok(report) => {
                for c in &report.checks {
                    let status = match (&c.error, c.pass) {
                        (Some(_), _) => "ERROR",
                        (None, true) => "pass",
                        (None, false) => "FAIL",
                    };
                    let res = c.residual.map(|r| format!("{r:.3e}")).unwrap_or_else(|| "-".into());
                    say!("{status:<5} {:<36} {res:>10} <= {:.1e}  {}ms", c.name, c.tolerance, c.ms);
                    if let Some(e) = &c.error {
                        say!("      {e}");
                    }
                }
                if out.is_none() {
                    say!("{}", report.to_json());
                }
                report.outcome().exit_code()
            }
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
    };
    ExitCode::from(code as u8)
}
