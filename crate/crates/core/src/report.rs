//! Report documents and their human, machine (JSON) and CSV renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::MetricsReport;
use crate::placement::Placement;
use crate::scenario::{Scenario, ScenarioRun, FORMAT_VERSION};
use crate::topology::{Clusters, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Human,
    Machine,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceRow {
    pub name: String,
    pub level: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub mips: f64,
    pub rate_per_mips: f64,
    pub busy_power: f64,
    pub idle_power: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub module: String,
    pub host: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client: Option<String>,
    pub allocated_mips: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub format_version: u32,
    pub tool_version: String,
    pub metrics: MetricsReport,
    /// Device table at the horizon, after any mobility.
    pub topology: Vec<DeviceRow>,
    pub placement: Vec<InstanceRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<Vec<Vec<String>>>,
    pub scenario: Scenario,
}

pub fn topology_rows(topo: &Topology) -> Vec<DeviceRow> {
    topo.devices()
        .iter()
        .map(|d| DeviceRow {
            name: d.name.clone(),
            level: d.level,
            parent: d.parent.map(|p| topo.name_of(p).to_string()),
            mips: d.mips,
            rate_per_mips: d.rate_per_mips,
            busy_power: d.busy_power,
            idle_power: d.idle_power,
            x: d.x,
            y: d.y,
        })
        .collect()
}

pub fn placement_rows(topo: &Topology, placement: &Placement) -> Vec<InstanceRow> {
    placement
        .instances()
        .iter()
        .map(|i| InstanceRow {
            module: i.module.clone(),
            host: topo.name_of(i.host).to_string(),
            client: i.client_scope.map(|c| topo.name_of(c).to_string()),
            allocated_mips: i.allocated_mips,
        })
        .collect()
}

fn cluster_rows(topo: &Topology, clusters: &Clusters) -> Vec<Vec<String>> {
    clusters
        .values()
        .map(|members| members.iter().map(|d| topo.name_of(*d).to_string()).collect())
        .collect()
}

impl ReportDocument {
    pub fn from_run(run: &ScenarioRun) -> Self {
        let p = &run.prepared;
        ReportDocument {
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            metrics: run.output.report.clone(),
            topology: topology_rows(&run.output.final_topology),
            placement: placement_rows(&p.topology, &p.placement),
            clusters: p.clusters.as_ref().map(|c| cluster_rows(&p.topology, c)),
            scenario: p.scenario.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn emit_report(doc: &ReportDocument, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Human => human(doc).into_bytes(),
        ReportFormat::Machine => doc.to_json().into_bytes(),
        ReportFormat::Csv => csv_rows(&doc.metrics),
    }
}

fn human(doc: &ReportDocument) -> String {
    let m = &doc.metrics;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scenario {} (seed {}, horizon {} ms, policy {})",
        doc.scenario.name, m.seed, m.horizon_ms, doc.scenario.placement.policy
    );
    out.push_str("\nAPPLICATION LOOP DELAYS\n");
    if m.loops.is_empty() {
        out.push_str("  (no loops)\n");
    }
    for lp in &m.loops {
        let _ = writeln!(out, "  {}: mean {:.3} ms over {} samples", lp.label, lp.mean_ms, lp.count);
    }
    out.push_str("\nTUPLE PROCESSING DELAYS\n");
    for (t, d) in &m.processing_delay_ms {
        let _ = writeln!(out, "  {t}: {d:.3} ms");
    }
    out.push_str("\nENERGY CONSUMED\n");
    let width = m.energy_j.keys().map(String::len).max().unwrap_or(0);
    for (name, e) in &m.energy_j {
        let _ = writeln!(out, "  {name:<width$}  {e:.3} J");
    }
    out.push_str("\nNETWORK USAGE\n");
    let _ = writeln!(out, "  total transferred: {:.3} kB", m.network.total_kb);
    let _ = writeln!(out, "  latency-weighted:  {:.3} kB*ms", m.network.usage_kb_ms);
    let _ = writeln!(
        out,
        "  per second of simulated time: {:.3} kB*ms/s",
        if m.horizon_ms > 0.0 {
            m.network.usage_kb_ms / (m.horizon_ms / 1000.0)
        } else {
            0.0
        }
    );
    let _ = writeln!(out, "\nCOST OF EXECUTION\n  {:.3}", m.total_cost);
    let t = &m.tuples;
    let _ = writeln!(
        out,
        "\nTUPLES\n  emitted {}  derived {}  processed {}  delivered {}  in flight {}",
        t.emitted, t.derived, t.processed, t.delivered, t.in_flight
    );
    if let Some(clusters) = &doc.clusters {
        out.push_str("\nCLUSTERS\n");
        for (i, members) in clusters.iter().enumerate() {
            let _ = writeln!(out, "  {i}: {}", members.join(", "));
        }
    }
    out
}

/// One row per loop and per device, then the three scalar totals.
fn csv_rows(m: &MetricsReport) -> Vec<u8> {
    let mut rows: Vec<(&str, &str, f64)> = Vec::new();
    for lp in &m.loops {
        rows.push(("loop_mean_latency_ms", &lp.label, lp.mean_ms));
    }
    for (name, e) in &m.energy_j {
        rows.push(("energy_j", name, *e));
    }
    rows.push(("network_total_kb", "all", m.network.total_kb));
    rows.push(("network_usage_kb_ms", "all", m.network.usage_kb_ms));
    rows.push(("total_cost", "all", m.total_cost));

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "entity", "value"]).expect("writing to memory");
    for (metric, entity, value) in rows {
        w.write_record([metric, entity, &value.to_string()])
            .expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}
