//! Acceptance criteria A1-A12. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use fogsim::app::{builtin_application, derive_tuples, IdGen, LineageId, Tuple, TupleId};
use fogsim::kernel::{RngStream, SimTime};
use fogsim::placement::capacity_check;
use fogsim::report::ReportDocument;
use fogsim::scenario::{
    client_deadlines, generate_builtin, parse_scenario, run_scenario, RunOptions, BUILTIN_SCENARIOS,
};
use fogsim::topology::{form_clusters, ClusterConfig, DeviceId, DeviceSpec, Topology};

use common::{audit_tuples, replay_cost, replayed_log, run_builtin};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn a1_placement_arithmetic() -> Outcome {
    for seed in 0..20 {
        let p = generate_builtin("deadline_test", seed)
            .and_then(|s| s.materialize(&RunOptions::default()))
            .map_err(|e| e.to_string())?;
        let t = &p.topology;
        let count = |d: DeviceId| p.placement.instances_on(d).filter(|i| i.module == "mainModule").count();
        for g in t.devices_at_level(1) {
            ensure(count(g.id) == 1, || format!("seed {seed}: {} hosts {}", g.name, count(g.id)))?;
        }
        let root = t.root().unwrap();
        ensure(count(root) == 4, || format!("seed {seed}: cloud hosts {}", count(root)))?;
    }
    Ok("20 seeds: one mainModule per gateway, four in the cloud".into())
}

fn a2_deadline_ordering() -> Outcome {
    for seed in 0..20 {
        let p = generate_builtin("deadline_test", seed)
            .and_then(|s| s.materialize(&RunOptions::default()))
            .map_err(|e| e.to_string())?;
        let t = &p.topology;
        let deadlines = client_deadlines(&p.scenario);
        for g in t.devices_at_level(1) {
            let mut kids: Vec<(f64, DeviceId)> = t
                .children(g.id)
                .into_iter()
                .map(|c| (deadlines[t.name_of(c)][0].1, c))
                .collect();
            kids.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let hosted: Vec<bool> = kids
                .iter()
                .map(|(_, c)| {
                    p.placement
                        .instances_on(g.id)
                        .any(|i| i.module == "mainModule" && i.client_scope == Some(*c))
                })
                .collect();
            let prefix_len = hosted.iter().take_while(|h| **h).count();
            ensure(hosted.iter().skip(prefix_len).all(|h| !h), || {
                format!("seed {seed}: {} hosts a non-prefix of its deadline order", g.name)
            })?;
            ensure(hosted[0], || format!("seed {seed}: {} skips its tightest deadline", g.name))?;
        }
    }
    Ok("gateway-hosted clients are a deadline-sorted prefix on 20 seeds".into())
}

fn a3_idle_energy() -> Outcome {
    let mut checked = 0;
    for name in BUILTIN_SCENARIOS {
        let run = run_builtin(name, 5, None);
        let doc = ReportDocument::from_run(&run);
        let t_ms = doc.metrics.horizon_ms;
        let hosts: Vec<&str> = doc.placement.iter().map(|i| i.host.as_str()).collect();
        for d in doc.topology.iter().filter(|d| !hosts.contains(&d.name.as_str())) {
            let expected = d.idle_power * t_ms / 1000.0;
            let got = doc.metrics.energy_j[&d.name];
            let rel = ((got - expected) / expected).abs();
            ensure(rel <= 1e-9, || format!("{name}/{}: {got} J vs {expected} J", d.name))?;
            checked += 1;
        }
    }
    ensure(checked > 0, || "no idle device found".into())?;
    Ok(format!("{checked} idle devices at idle_power*T/1000 (rel err <= 1e-9)"))
}

fn a4_energy_bounds() -> Outcome {
    let mut checked = 0;
    for name in BUILTIN_SCENARIOS {
        for seed in [1, 2] {
            let doc = ReportDocument::from_run(&run_builtin(name, seed, None));
            let t_s = doc.metrics.horizon_ms / 1000.0;
            for d in &doc.topology {
                let e = doc.metrics.energy_j[&d.name];
                let (lo, hi) = (d.idle_power * t_s, d.busy_power * t_s);
                let slack = 1e-12 * hi;
                ensure(e >= lo - slack && e <= hi + slack, || {
                    format!("{name}/{}: {e} outside [{lo}, {hi}]", d.name)
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} device energies within [idle*T, busy*T]"))
}

fn a5_loop_latency() -> Outcome {
    let s = parse_scenario(&scenario_dir().join("deadline_single_leaf.json")).map_err(|e| e.to_string())?;
    let run = run_scenario(&s, &RunOptions::default()).map_err(|e| e.to_string())?;
    let p = &run.prepared;
    let (app, t) = (&p.application, &p.topology);
    let leaf = t.device(t.id_of("e-0-0").unwrap()).unwrap();
    let gw = t.device(t.id_of("g-0").unwrap()).unwrap();
    let module_mips = |m: &str| app.module(m).unwrap().mips;
    let edge = |ty: &str| app.edge_by_type(ty).unwrap();
    // hand sum from the scenario's own constants
    let expected = p.scenario.sensors[0].latency
        + edge("IoTSensor").cpu_length / module_mips("clientModule") * 1000.0
        + (edge("RawData").nw_length / leaf.up_bw * 1000.0 + leaf.uplink_latency)
        + edge("RawData").cpu_length / module_mips("mainModule") * 1000.0
        + (edge("ResultData").nw_length / gw.down_bw * 1000.0 + leaf.uplink_latency)
        + edge("ResultData").cpu_length / module_mips("clientModule") * 1000.0
        + p.scenario.actuators[0].latency;
    ensure(expected == 4276.0, || format!("hand sum {expected} != 4276"))?;
    let samples = &run.output.report.loops[0].samples_ms;
    ensure(!samples.is_empty(), || "no loop sample".into())?;
    ensure((samples[0] - 4276.0).abs() <= 1e-6, || format!("first sample {}", samples[0]))?;
    Ok(format!("first sample {} ms", samples[0]))
}

fn a6_selectivity() -> Outcome {
    let app = builtin_application("master_worker").unwrap();
    let sensor = app.edge_by_type("Sensor").unwrap();
    let mut counts = Vec::new();
    for seed in [1, 2, 3, 4, 5] {
        let mut rng = RngStream::named(seed, "selectivity");
        let mut ids = IdGen::default();
        let mut n = 0;
        for i in 0..10_000 {
            let input = Tuple::from_edge(sensor, TupleId(i), LineageId(i), DeviceId(0), SimTime::ZERO);
            n += derive_tuples(&app, "MasterModule", &input, &mut rng, &mut ids)
                .iter()
                .filter(|t| t.tuple_type == "Task-1")
                .count();
        }
        ensure((2863..=3137).contains(&n), || format!("seed {seed}: {n} outside [2863, 3137]"))?;
        counts.push(n);
    }
    Ok(format!("Task-1 counts {counts:?}"))
}

/// Connected components of the neighbour relation, by repeated flood fill.
fn brute_force_clusters(t: &Topology, level: u32, threshold: f64) -> Vec<Vec<usize>> {
    let members: Vec<_> = t.devices().iter().filter(|d| d.level == level).collect();
    let near = |i: usize, j: usize| {
        let (a, b) = (members[i], members[j]);
        a.parent == b.parent && ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt() < threshold
    };
    let mut label = vec![usize::MAX; members.len()];
    for start in 0..members.len() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = start;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for (j, l) in label.iter_mut().enumerate() {
                if *l == usize::MAX && near(i, j) {
                    *l = start;
                    stack.push(j);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, l) in label.iter().enumerate() {
        groups.entry(*l).or_default().push(members[i].id.0);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    for g in &mut out {
        g.sort();
    }
    out.sort();
    out
}

fn a7_cluster_oracle() -> Outcome {
    let mut rng = RngStream::named(2024, "clusters");
    for case in 0..100 {
        let mut t = Topology::new();
        let spec = |name: String, level, parent, x, y| DeviceSpec {
            name,
            mips: 1000.0,
            ram: 1000.0,
            up_bw: 1000.0,
            down_bw: 1000.0,
            level,
            rate_per_mips: 0.0,
            busy_power: 10.0,
            idle_power: 5.0,
            parent,
            uplink_latency: 1.0,
            x,
            y,
        };
        let cloud = t.add_device(spec("cloud".into(), 0, None, 0.0, 0.0)).unwrap();
        let parents: Vec<DeviceId> = (0..rng.sample_int(1, 4).unwrap())
            .map(|i| t.add_device(spec(format!("p{i}"), 1, Some(cloud), 0.0, 0.0)).unwrap())
            .collect();
        let n = rng.sample_int(0, 51).unwrap();
        let side = rng.sample_uniform(2.0, 20.0).unwrap();
        for i in 0..n {
            let parent = parents[rng.sample_int(0, parents.len() as i64).unwrap() as usize];
            let x = rng.sample_uniform(0.0, side).unwrap();
            let y = rng.sample_uniform(0.0, side).unwrap();
            t.add_device(spec(format!("d{i}"), 2, Some(parent), x, y)).unwrap();
        }
        let mut got: Vec<Vec<usize>> = form_clusters(&t, 2, &ClusterConfig::default())
            .into_values()
            .map(|g| g.into_iter().map(|d| d.0).collect())
            .collect();
        got.sort();
        let want = brute_force_clusters(&t, 2, 2.0);
        ensure(got == want, || format!("case {case}: {got:?} != {want:?}"))?;
    }
    Ok("100 random topologies match the transitive-closure oracle".into())
}

fn a8_mobility_routing() -> Outcome {
    let (mut moved_total, mut before, mut after) = (0, 0, 0);
    for seed in 0..5 {
        let run = run_builtin("mobility_demo", seed, None);
        let log = replayed_log(&run);
        let s = &run.prepared.scenario;
        let original: BTreeMap<&str, &str> = s
            .topology
            .devices
            .as_ref()
            .unwrap()
            .iter()
            .filter_map(|d| d.parent.as_deref().map(|p| (d.name.as_str(), p)))
            .collect();
        for m in &s.mobility {
            moved_total += 1;
            for r in log
                .iter()
                .filter(|r| r.kind == "transmit" && r.device.as_deref() == Some(m.device.as_str()))
            {
                let to = r.to.as_deref().unwrap();
                if r.t < m.at_ms {
                    before += 1;
                    ensure(to == original[m.device.as_str()], || {
                        format!("seed {seed}: {} sent to {to} at {} before moving", m.device, r.t)
                    })?;
                } else {
                    after += 1;
                    ensure(to == m.new_parent, || {
                        format!("seed {seed}: {} sent to {to} at {} after moving", m.device, r.t)
                    })?;
                }
            }
        }
    }
    ensure(moved_total > 0 && before > 0 && after > 0, || {
        format!("vacuous audit: {moved_total} moves, {before} before, {after} after")
    })?;
    Ok(format!(
        "{moved_total} moved devices; {before} transmissions before and {after} after the move routed correctly"
    ))
}

fn a9_determinism() -> Outcome {
    for name in BUILTIN_SCENARIOS {
        let outputs: Vec<(String, String)> = (0..3)
            .map(|_| {
                let run = run_builtin(name, 9, None);
                (
                    ReportDocument::from_run(&run).to_json(),
                    fogsim::runtime::write_event_log(&run.output.events),
                )
            })
            .collect();
        ensure(outputs.windows(2).all(|w| w[0] == w[1]), || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} builtins byte-identical over 3 runs", BUILTIN_SCENARIOS.len()))
}

fn a10_cost_oracle() -> Outcome {
    let mut nonzero = 0;
    for name in BUILTIN_SCENARIOS {
        let run = run_builtin(name, 3, None);
        let doc = ReportDocument::from_run(&run);
        let replayed = replay_cost(&doc, &replayed_log(&run));
        ensure(replayed == doc.metrics.total_cost, || {
            format!("{name}: replayed {replayed} vs reported {}", doc.metrics.total_cost)
        })?;
        if replayed > 0.0 {
            nonzero += 1;
        }
    }
    ensure(nonzero > 0, || "every builtin had zero cost".into())?;
    Ok(format!("log replay equals reported cost on every builtin ({nonzero} with non-zero cost)"))
}

fn a11_conservation() -> Outcome {
    for name in BUILTIN_SCENARIOS {
        let run = run_builtin(name, 4, None);
        let a = audit_tuples(&replayed_log(&run));
        ensure(a.in_flight == a.reported_in_flight, || {
            format!("{name}: log shows {} in flight, run reported {}", a.in_flight, a.reported_in_flight)
        })?;
        let rhs = a.delivered as i64 + a.in_flight as i64 + a.shortfall;
        ensure(a.emitted as i64 == rhs, || format!("{name}: {a:?}"))?;
        let t = run.output.report.tuples;
        ensure(
            t.emitted == a.emitted && t.delivered == a.delivered && t.derivation_shortfall == a.shortfall,
            || format!("{name}: report {t:?} vs log {a:?}"),
        )?;
    }
    Ok("created = delivered + in flight + shortfall on every builtin".into())
}

fn a12_capacity_boundary() -> Outcome {
    let p = generate_builtin("deadline_test", 1)
        .and_then(|s| s.materialize(&RunOptions::default()))
        .map_err(|e| e.to_string())?;
    let gw = p.topology.devices_at_level(1).next().unwrap();
    ensure(!capacity_check(gw, 1000.0, 1500.0, 300.0), || "exact fill accepted".into())?;
    ensure(capacity_check(gw, 1000.0, 1500.0, 299.5), || "fill below capacity rejected".into())?;
    Ok(format!("used + base + extra = {} rejected", gw.mips))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("A1", "placement arithmetic", a1_placement_arithmetic),
        ("A2", "deadline ordering", a2_deadline_ordering),
        ("A3", "idle energy", a3_idle_energy),
        ("A4", "energy bounds", a4_energy_bounds),
        ("A5", "analytic loop latency", a5_loop_latency),
        ("A6", "selectivity statistics", a6_selectivity),
        ("A7", "cluster oracle", a7_cluster_oracle),
        ("A8", "mobility routing", a8_mobility_routing),
        ("A9", "determinism", a9_determinism),
        ("A10", "cost oracle", a10_cost_oracle),
        ("A11", "conservation", a11_conservation),
        ("A12", "capacity boundary", a12_capacity_boundary),
    ];
    let mut failed = 0;
    for (id, title, check) in criteria {
        match check() {
            Ok(detail) => println!("{id:<4} PASS  {title}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("{id:<4} FAIL  {title}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
