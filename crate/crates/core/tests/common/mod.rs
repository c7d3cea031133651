//! Event-log replay used as an independent check on the simulator's own
//! accounting.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use fogsim::report::ReportDocument;
use fogsim::runtime::{parse_event_log, write_event_log, LogRecord};
use fogsim::scenario::{generate_builtin, run_scenario, RunOptions, ScenarioRun};

pub fn run_builtin(name: &str, seed: u64, horizon_ms: Option<f64>) -> ScenarioRun {
    let s = generate_builtin(name, seed).expect("builtin generates");
    run_scenario(
        &s,
        &RunOptions {
            horizon_ms,
            record_events: true,
            ..RunOptions::default()
        },
    )
    .expect("builtin runs")
}

/// The log as written to disk and read back.
pub fn replayed_log(run: &ScenarioRun) -> Vec<LogRecord> {
    parse_event_log(&write_event_log(&run.output.events)).expect("log parses")
}

/// Σ rate_per_mips(host) × cpu_length over processing completions, summed
/// per host in log order and then over hosts in device-table order.
pub fn replay_cost(doc: &ReportDocument, log: &[LogRecord]) -> f64 {
    let rates: BTreeMap<&str, f64> = doc.topology.iter().map(|d| (d.name.as_str(), d.rate_per_mips)).collect();
    let mut per_host: BTreeMap<&str, f64> = BTreeMap::new();
    for r in log.iter().filter(|r| r.kind == "process") {
        let host = r.device.as_deref().expect("process records name their host");
        *per_host.entry(host).or_default() += rates[host] * r.cpu_length.expect("process records carry cpu length");
    }
    doc.topology
        .iter()
        .map(|d| per_host.get(d.name.as_str()).copied().unwrap_or(0.0))
        .sum()
}

#[derive(Debug, PartialEq, Eq)]
pub struct TupleAudit {
    pub emitted: u64,
    pub delivered: u64,
    pub in_flight: u64,
    pub shortfall: i64,
    pub reported_in_flight: u64,
}

/// Counts tuple fates from the log alone: a tuple is in flight at the horizon
/// when it was created (emitted or derived) but never processed or delivered.
pub fn audit_tuples(log: &[LogRecord]) -> TupleAudit {
    let mut created = BTreeSet::new();
    let mut consumed = BTreeSet::new();
    let (mut emitted, mut delivered, mut shortfall) = (0u64, 0u64, 0i64);
    let mut reported_in_flight = 0;
    for r in log {
        match r.kind.as_str() {
            "emit" => {
                emitted += 1;
                created.insert(r.tuple.unwrap());
            }
            "derive" => {
                created.insert(r.tuple.unwrap());
            }
            "process" => {
                consumed.insert(r.tuple.unwrap());
                shortfall += 1 - r.outputs.unwrap() as i64;
            }
            "deliver" => {
                delivered += 1;
                consumed.insert(r.tuple.unwrap());
            }
            "simulation-end" => reported_in_flight = r.in_flight.unwrap(),
            _ => {}
        }
    }
    TupleAudit {
        emitted,
        delivered,
        in_flight: created.difference(&consumed).count() as u64,
        shortfall,
        reported_in_flight,
    }
}
