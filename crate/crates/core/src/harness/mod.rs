//! Check registry, scenario files and JSON reports.

pub mod checks;
mod scenario;

pub use checks::{find, registry, CheckContext, CheckDef};
pub use scenario::{run_check, run_scenario, CheckEntry, CheckResult, Report, RunOutcome, Scenario};

/// Environment variable holding the default jet order.
pub const ORDER_ENV: &str = "CYM_JET_ORDER";
pub const DEFAULT_ORDER: usize = 6;

/// Jet order from the environment, or the built-in default.
pub fn default_order() -> usize {
    std::env::var(ORDER_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_ORDER)
}
