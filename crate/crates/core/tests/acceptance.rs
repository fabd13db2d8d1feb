//! One line per acceptance criterion, driven by the bundled scenarios.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use cym_core::harness::{find, registry, Scenario};

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name);
    Scenario::load(&path).unwrap()
}

const SCENARIOS: [&str; 8] = [
    "euclid.json",
    "g6_example.json",
    "einstein_instances.json",
    "conformal_invariance.json",
    "tractor_identities.json",
    "laplacian_conservation.json",
    "holography.json",
    "transformation_laws.json",
];

/// Checks whose stated form does not hold; see the project notes.
const KNOWN_CONFLICTS: [&str; 7] = [
    "k_conformal_invariance",
    "lastgasp",
    "tractor_bianchi",
    "laplacian_f_identity",
    "k_conservation",
    "tractor_current_obstruction",
    "ptrans_bach",
];

struct Line {
    checks: Vec<(String, Option<f64>, f64, bool)>,
}

#[test]
fn acceptance_criteria() {
    let mut by_criterion: BTreeMap<u8, Line> = BTreeMap::new();
    let mut errors = Vec::new();
    let mut unexpected = Vec::new();
    for file in SCENARIOS {
        let sc = scenario(file);
        let report = sc.run(None);
        for entry in &sc.checks {
            let def = find(&entry.name).unwrap();
            let label = entry.label.clone().unwrap_or_else(|| entry.name.clone());
            let r = report.checks.iter().find(|c| c.name == label).unwrap();
            if let Some(e) = &r.error {
                errors.push(format!("{label}: {e}"));
            }
            if !r.pass && !KNOWN_CONFLICTS.contains(&def.name) {
                unexpected.push(label.clone());
            }
            let crit = def.criterion.expect("acceptance scenarios hold criterion checks only");
            by_criterion
                .entry(crit)
                .or_insert(Line { checks: Vec::new() })
                .checks
                .push((label, r.residual, r.tolerance, r.pass));
        }
    }
    let _ = writeln!(std::io::stderr());
    for (crit, line) in &by_criterion {
        let failing: Vec<String> = line
            .checks
            .iter()
            .filter(|c| !c.3)
            .map(|(n, r, t, _)| format!("{n} {} > {t:e}", r.map(|r| format!("{r:.2e}")).unwrap_or_else(|| "error".into())))
            .collect();
        let status = if failing.is_empty() { "PASS" } else { "FAIL" };
        let detail = if failing.is_empty() {
            format!("{n}/{n} checks pass", n = line.checks.len())
        } else {
            failing.join("; ")
        };
        // written to the raw handle so the line shows up without --nocapture
        let _ = writeln!(std::io::stderr(), "criterion {crit}: {status} ({detail})");
    }
    assert_eq!(by_criterion.keys().copied().collect::<Vec<_>>(), (1..=9).collect::<Vec<u8>>());
    assert!(errors.is_empty(), "evaluation errors: {errors:?}");
    assert!(unexpected.is_empty(), "unexpected failures: {unexpected:?}");
}

#[test]
fn bundled_scenarios_cover_every_criterion_check() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut named = std::collections::BTreeSet::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let sc = Scenario::load(&path).unwrap();
        assert!(!sc.paper_ref.is_empty(), "{}", path.display());
        named.extend(sc.checks.into_iter().map(|c| c.name));
    }
    for def in registry() {
        assert!(named.contains(def.name), "{} is not in any bundled scenario", def.name);
    }
}
