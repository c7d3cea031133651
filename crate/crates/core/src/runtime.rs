//! Executes a placed scenario on the event kernel.
//!
//! Tuples travel up the hierarchy until a device hosts an instance of their
//! destination module, recording each device they leave on `down_path`; DOWN
//! tuples retrace that path. Links serialize transmissions (size/bandwidth)
//! and then add their latency. Instances serve one tuple at a time, FIFO, at
//! their allocated MIPS.

use std::collections::{BTreeMap, VecDeque};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app::{derive_tuples, validate_application, AppError, Application, Direction, EdgeKind, IdGen, Tuple};
use crate::kernel::{EventKind, Kernel, KernelError, RngStream, SimTime};
use crate::metrics::{Metrics, MetricsError, MetricsReport};
use crate::placement::{InstanceId, Placement};
use crate::topology::{ActuatorId, DeviceId, MobilityEntry, SensorId, Topology, TopologyError};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("sensor {0:?}: the application has no sensor edge for its tuple type")]
    NoSensorEdge(String),
    #[error("module {0:?} has no placed instance")]
    UnplacedModule(String),
    #[error("tuple {tuple} ({tuple_type}) reached the root without finding module {module:?}")]
    NoHost {
        tuple: u64,
        tuple_type: String,
        module: String,
    },
    #[error("DOWN tuple {tuple} ({tuple_type}) at {device:?} has no recorded path and no local instance of {module:?}")]
    LostDown {
        tuple: u64,
        tuple_type: String,
        device: String,
        module: String,
    },
    #[error("no actuator for {consumer:?} on device {device:?}")]
    NoActuator { consumer: String, device: String },
    #[error("link {from:?} -> {to:?} has zero bandwidth")]
    ZeroBandwidth { from: String, to: String },
    #[error("mobility entry at {0} is before the current clock")]
    MobilityInPast(SimTime),
    #[error("invalid topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("invalid application: {0}")]
    Application(#[from] AppError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("configuration invalid: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    Device(DeviceId),
    Actuator(ActuatorId),
}

#[derive(Clone, Debug)]
pub enum SimEvent {
    SensorEmit(SensorId),
    TupleArrival { at: Endpoint, tuple: Tuple },
    TransmissionComplete { from: DeviceId, to: DeviceId, tuple: u64 },
    ProcessingComplete(InstanceId),
    Mobility(MobilityEntry),
    PeriodicEdgeFire { instance: InstanceId, edge: usize },
    SimulationEnd,
}

impl EventKind for SimEvent {
    fn kind_name(&self) -> &'static str {
        match self {
            SimEvent::SensorEmit(_) => "sensor-emit",
            SimEvent::TupleArrival { .. } => "tuple-arrival",
            SimEvent::TransmissionComplete { .. } => "transmission-complete",
            SimEvent::ProcessingComplete(_) => "processing-complete",
            SimEvent::Mobility(_) => "mobility",
            SimEvent::PeriodicEdgeFire { .. } => "periodic-edge-fire",
            SimEvent::SimulationEnd => "simulation-end",
        }
    }
}

/// One line of the event log.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: f64,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuple: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lineage: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuple_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nw_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_flight: Option<u64>,
}

/// Serializes records as line-delimited JSON.
pub fn write_event_log(records: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("log records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_event_log(text: &str) -> Result<Vec<LogRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

/// Where a tuple goes next from `device`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Process(InstanceId),
    Forward(DeviceId),
    Deliver(ActuatorId),
}

/// Decides the next hop of `tuple` at `device`, updating its `down_path`.
///
/// UP tuples are processed by a matching instance on the device (scoped to
/// the tuple's origin first, then unscoped) or forwarded to the parent, with
/// the device pushed onto `down_path`. DOWN tuples are processed locally when
/// possible, otherwise sent to the child popped from `down_path`. Actuator
/// tuples are delivered once they reach their origin device.
pub fn route_tuple(
    topo: &Topology,
    placement: &Placement,
    device: DeviceId,
    tuple: &mut Tuple,
) -> Result<Route, RuntimeError> {
    if tuple.edge_kind == EdgeKind::Actuator {
        if device == tuple.origin_device {
            let actuator = topo
                .actuators()
                .iter()
                .position(|a| {
                    a.gateway_device == device
                        && (a.consumed_tuple_type == tuple.dest_module || a.consumed_tuple_type == tuple.tuple_type)
                })
                .ok_or_else(|| RuntimeError::NoActuator {
                    consumer: tuple.dest_module.clone(),
                    device: topo.name_of(device).to_string(),
                })?;
            return Ok(Route::Deliver(ActuatorId(actuator)));
        }
        return pop_down(topo, device, tuple);
    }
    if let Some(inst) = placement.find_instance(device, &tuple.dest_module, tuple.origin_device) {
        return Ok(Route::Process(inst));
    }
    match tuple.direction {
        Direction::Up => match topo.device(device)?.parent {
            Some(parent) => {
                tuple.down_path.push(device);
                Ok(Route::Forward(parent))
            }
            None => Err(RuntimeError::NoHost {
                tuple: tuple.id.0,
                tuple_type: tuple.tuple_type.clone(),
                module: tuple.dest_module.clone(),
            }),
        },
        Direction::Down => pop_down(topo, device, tuple),
    }
}

fn pop_down(topo: &Topology, device: DeviceId, tuple: &mut Tuple) -> Result<Route, RuntimeError> {
    tuple
        .down_path
        .pop()
        .map(Route::Forward)
        .ok_or_else(|| RuntimeError::LostDown {
            tuple: tuple.id.0,
            tuple_type: tuple.tuple_type.clone(),
            device: topo.name_of(device).to_string(),
            module: tuple.dest_module.clone(),
        })
}

/// Serialization state of one link direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkState {
    pub bandwidth: f64,
    pub latency: f64,
    pub busy_until: SimTime,
}

impl LinkState {
    /// Books a transmission of `nw_length` kB starting no earlier than `now`.
    /// Returns `(start, end of serialization, arrival)`.
    pub fn transmit(&mut self, now: SimTime, nw_length: f64) -> Option<(SimTime, SimTime, SimTime)> {
        if self.bandwidth <= 0.0 {
            return None;
        }
        let start = now.max(self.busy_until);
        let service = nw_length / self.bandwidth * 1000.0;
        let end = SimTime::new(start.as_ms() + service).ok()?;
        self.busy_until = end;
        let arrival = SimTime::new(end.as_ms() + self.latency).ok()?;
        Some((start, end, arrival))
    }
}

#[derive(Clone, Debug, Default)]
struct InstanceQueue {
    pending: VecDeque<(Tuple, SimTime)>,
    in_service: Option<(Tuple, SimTime)>,
}

/// Inputs of one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub topology: Topology,
    pub application: Application,
    pub placement: Placement,
    pub mobility: Vec<MobilityEntry>,
    pub horizon: SimTime,
    pub seed: u64,
    pub record_events: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub events: Vec<LogRecord>,
    /// Topology as it stood at the horizon (after mobility).
    pub final_topology: Topology,
    pub end_clock: SimTime,
}

struct World {
    topo: Topology,
    app: Application,
    placement: Placement,
    metrics: Metrics,
    selectivity: RngStream,
    ids: IdGen,
    uplinks: Vec<SimTime>,
    downlinks: BTreeMap<(DeviceId, DeviceId), SimTime>,
    queues: Vec<InstanceQueue>,
    instances_by_device: Vec<Vec<InstanceId>>,
    emitted_by_sensor: Vec<u64>,
    record: bool,
    log: Vec<LogRecord>,
}

impl World {
    fn log(&mut self, rec: LogRecord) {
        if self.record {
            self.log.push(rec);
        }
    }

    fn tuple_record(&self, t: SimTime, kind: &str, device: Option<DeviceId>, tuple: &Tuple) -> LogRecord {
        LogRecord {
            t: t.as_ms(),
            kind: kind.to_string(),
            device: device.map(|d| self.topo.name_of(d).to_string()),
            tuple: Some(tuple.id.0),
            lineage: Some(tuple.lineage_id.0),
            tuple_type: Some(tuple.tuple_type.clone()),
            direction: Some(tuple.direction),
            ..Default::default()
        }
    }

    fn utilization(&self, device: DeviceId) -> f64 {
        let busy: f64 = self.instances_by_device[device.0]
            .iter()
            .filter(|i| self.queues[i.0].in_service.is_some())
            .map(|i| self.placement.instance(*i).allocated_mips)
            .sum();
        let mips = self.topo.devices()[device.0].mips;
        (busy / mips).min(1.0)
    }

    fn refresh_utilization(&mut self, device: DeviceId, now: SimTime) -> Result<(), RuntimeError> {
        let u = self.utilization(device);
        self.metrics.record_utilization_change(device, u, now)?;
        Ok(())
    }

    fn emit_sensor(&mut self, k: &mut Kernel<SimEvent>, sensor_id: SensorId) -> Result<(), RuntimeError> {
        let sensor = self.topo.sensor(sensor_id).expect("scheduled sensor exists").clone();
        if sensor.max_tuples.is_some_and(|cap| self.emitted_by_sensor[sensor_id.0] >= cap) {
            return Ok(());
        }
        let edge = self
            .app
            .sensor_edge(&sensor.tuple_type)
            .ok_or_else(|| RuntimeError::NoSensorEdge(sensor.name.clone()))?;
        let now = k.now();
        let tuple = Tuple::from_edge(edge, self.ids.tuple(), self.ids.lineage(), sensor.gateway_device, now);
        self.emitted_by_sensor[sensor_id.0] += 1;
        self.metrics.tuples.emitted += 1;
        let rec = self.tuple_record(now, "emit", Some(sensor.gateway_device), &tuple);
        self.log(rec);
        k.schedule(
            SimEvent::TupleArrival {
                at: Endpoint::Device(sensor.gateway_device),
                tuple,
            },
            sensor.latency,
        )?;
        let under_cap = sensor
            .max_tuples
            .is_none_or(|cap| self.emitted_by_sensor[sensor_id.0] < cap);
        if under_cap {
            k.schedule(SimEvent::SensorEmit(sensor_id), sensor.emission_interval)?;
        }
        Ok(())
    }

    fn periodic_fire(&mut self, k: &mut Kernel<SimEvent>, instance: InstanceId, edge_index: usize) -> Result<(), RuntimeError> {
        let edge = self.app.edges[edge_index].clone();
        let inst = self.placement.instance(instance).clone();
        let now = k.now();
        let origin = inst.client_scope.unwrap_or(inst.host);
        let tuple = Tuple::from_edge(&edge, self.ids.tuple(), self.ids.lineage(), origin, now);
        self.metrics.tuples.emitted += 1;
        let mut rec = self.tuple_record(now, "emit", Some(inst.host), &tuple);
        rec.module = Some(inst.module.clone());
        self.log(rec);
        self.dispatch(k, inst.host, tuple)?;
        if let Some(period) = edge.period {
            k.schedule(SimEvent::PeriodicEdgeFire { instance, edge: edge_index }, period)?;
        }
        Ok(())
    }

    /// Routes a tuple that is present at `device` right now.
    fn dispatch(&mut self, k: &mut Kernel<SimEvent>, device: DeviceId, mut tuple: Tuple) -> Result<(), RuntimeError> {
        match route_tuple(&self.topo, &self.placement, device, &mut tuple)? {
            Route::Process(inst) => self.enqueue(k, inst, tuple),
            Route::Forward(next) => self.transmit(k, device, next, tuple),
            Route::Deliver(actuator) => {
                let latency = self.topo.actuator(actuator).expect("routed actuator exists").latency;
                k.schedule(
                    SimEvent::TupleArrival {
                        at: Endpoint::Actuator(actuator),
                        tuple,
                    },
                    latency,
                )?;
                Ok(())
            }
        }
    }

    fn transmit(&mut self, k: &mut Kernel<SimEvent>, from: DeviceId, to: DeviceId, tuple: Tuple) -> Result<(), RuntimeError> {
        let now = k.now();
        let src = self.topo.device(from)?;
        let up = src.parent == Some(to);
        let (bandwidth, latency, busy_until) = if up {
            (src.up_bw, src.uplink_latency, self.uplinks[from.0])
        } else {
            let child = self.topo.device(to)?;
            let busy = self.downlinks.get(&(from, to)).copied().unwrap_or(SimTime::ZERO);
            (src.down_bw, child.uplink_latency, busy)
        };
        let mut link = LinkState {
            bandwidth,
            latency,
            busy_until,
        };
        let (start, end, arrival) = link.transmit(now, tuple.nw_length).ok_or_else(|| RuntimeError::ZeroBandwidth {
            from: self.topo.name_of(from).to_string(),
            to: self.topo.name_of(to).to_string(),
        })?;
        if up {
            self.uplinks[from.0] = link.busy_until;
        } else {
            self.downlinks.insert((from, to), link.busy_until);
        }
        self.metrics.record_transmission(tuple.nw_length, latency);
        let mut rec = self.tuple_record(now, "transmit", Some(from), &tuple);
        rec.to = Some(self.topo.name_of(to).to_string());
        rec.nw_length = Some(tuple.nw_length);
        rec.latency = Some(latency);
        rec.start = Some(start.as_ms());
        rec.end = Some(end.as_ms());
        self.log(rec);
        k.schedule_at(
            SimEvent::TransmissionComplete {
                from,
                to,
                tuple: tuple.id.0,
            },
            end,
        )?;
        k.schedule_at(
            SimEvent::TupleArrival {
                at: Endpoint::Device(to),
                tuple,
            },
            arrival,
        )?;
        Ok(())
    }

    fn enqueue(&mut self, k: &mut Kernel<SimEvent>, inst: InstanceId, tuple: Tuple) -> Result<(), RuntimeError> {
        let now = k.now();
        let host = self.placement.instance(inst).host;
        let mut rec = self.tuple_record(now, "enqueue", Some(host), &tuple);
        rec.instance = Some(inst.0);
        rec.module = Some(self.placement.instance(inst).module.clone());
        self.log(rec);
        self.queues[inst.0].pending.push_back((tuple, now));
        if self.queues[inst.0].in_service.is_none() {
            self.start_next(k, inst)?;
            self.refresh_utilization(host, now)?;
        }
        Ok(())
    }

    /// Moves the head of the queue into service. Returns whether it did.
    fn start_next(&mut self, k: &mut Kernel<SimEvent>, inst: InstanceId) -> Result<bool, RuntimeError> {
        let Some((tuple, enqueued)) = self.queues[inst.0].pending.pop_front() else {
            return Ok(false);
        };
        let mips = self.placement.instance(inst).allocated_mips;
        let service = tuple.cpu_length / mips * 1000.0;
        self.queues[inst.0].in_service = Some((tuple, enqueued));
        k.schedule(SimEvent::ProcessingComplete(inst), service)?;
        Ok(true)
    }

    fn complete(&mut self, k: &mut Kernel<SimEvent>, inst: InstanceId) -> Result<(), RuntimeError> {
        let now = k.now();
        let instance = self.placement.instance(inst).clone();
        let (tuple, enqueued) = self.queues[inst.0]
            .in_service
            .take()
            .expect("completion for an instance in service");
        self.metrics.accrue_cost(instance.host, tuple.cpu_length);
        self.metrics
            .record_processing_delay(&tuple.tuple_type, now.as_ms() - enqueued.as_ms());
        let outputs = derive_tuples(&self.app, &instance.module, &tuple, &mut self.selectivity, &mut self.ids);
        let n = outputs.len() as u64;
        self.metrics.tuples.processed += 1;
        self.metrics.tuples.derived += n;
        self.metrics.tuples.derivation_shortfall += 1 - n as i64;
        let mut rec = self.tuple_record(now, "process", Some(instance.host), &tuple);
        rec.instance = Some(inst.0);
        rec.module = Some(instance.module.clone());
        rec.cpu_length = Some(tuple.cpu_length);
        rec.outputs = Some(n);
        self.log(rec);
        for out in outputs {
            let rec = self.tuple_record(now, "derive", Some(instance.host), &out);
            self.log(rec);
            self.dispatch(k, instance.host, out)?;
        }
        if self.queues[inst.0].in_service.is_none() {
            self.start_next(k, inst)?;
        }
        self.refresh_utilization(instance.host, now)
    }

    fn arrive(&mut self, k: &mut Kernel<SimEvent>, at: Endpoint, tuple: Tuple) -> Result<(), RuntimeError> {
        let now = k.now();
        match at {
            Endpoint::Device(d) => {
                let rec = self.tuple_record(now, "arrive", Some(d), &tuple);
                self.log(rec);
                self.dispatch(k, d, tuple)
            }
            Endpoint::Actuator(a) => {
                let actuator = self.topo.actuator(a).expect("actuator exists").clone();
                self.metrics.tuples.delivered += 1;
                let loop_index = self.app.match_loop(&tuple.tuple_type, &tuple.visited);
                if let Some(i) = loop_index {
                    self.metrics.record_loop_completion(i, tuple.emitted_at, now);
                }
                let mut rec = self.tuple_record(now, "deliver", Some(actuator.gateway_device), &tuple);
                rec.to = Some(actuator.name.clone());
                rec.loop_index = loop_index;
                rec.start = Some(tuple.emitted_at.as_ms());
                self.log(rec);
                Ok(())
            }
        }
    }

    fn apply_mobility(&mut self, now: SimTime, entry: MobilityEntry) -> Result<(), RuntimeError> {
        let (old, mismatch) = self.topo.reparent(entry.device, entry.new_parent)?;
        let name = self.topo.name_of(entry.device).to_string();
        let new_name = self.topo.name_of(entry.new_parent).to_string();
        let old_name = old.map(|o| self.topo.name_of(o).to_string());
        if mismatch {
            warn!("{name} moved under {new_name}, which is not one level closer to the cloud");
        }
        info!(
            "{:.3} {name} is now connected to {new_name} (was {})",
            now.as_ms(),
            old_name.as_deref().unwrap_or("none")
        );
        self.log(LogRecord {
            t: now.as_ms(),
            kind: "mobility".into(),
            device: Some(name),
            to: Some(new_name),
            old_parent: old_name,
            ..Default::default()
        });
        Ok(())
    }

    fn handle(&mut self, k: &mut Kernel<SimEvent>, ev: SimEvent) -> Result<(), RuntimeError> {
        match ev {
            SimEvent::SensorEmit(s) => self.emit_sensor(k, s),
            SimEvent::TupleArrival { at, tuple } => self.arrive(k, at, tuple),
            SimEvent::TransmissionComplete { from, to, tuple } => {
                let now = k.now();
                self.log(LogRecord {
                    t: now.as_ms(),
                    kind: "transmission-complete".into(),
                    device: Some(self.topo.name_of(from).to_string()),
                    to: Some(self.topo.name_of(to).to_string()),
                    tuple: Some(tuple),
                    ..Default::default()
                });
                Ok(())
            }
            SimEvent::ProcessingComplete(inst) => self.complete(k, inst),
            SimEvent::Mobility(entry) => self.apply_mobility(k.now(), entry),
            SimEvent::PeriodicEdgeFire { instance, edge } => self.periodic_fire(k, instance, edge),
            SimEvent::SimulationEnd => Ok(()),
        }
    }

    fn in_flight(&self, k: &Kernel<SimEvent>) -> u64 {
        let travelling = k
            .queued()
            .filter(|e| matches!(e.payload, SimEvent::TupleArrival { .. }))
            .count();
        let queued: usize = self
            .queues
            .iter()
            .map(|q| q.pending.len() + usize::from(q.in_service.is_some()))
            .sum();
        (travelling + queued) as u64
    }
}

/// Checks that everything the run needs is consistent; lists all problems.
pub fn validate_run(cfg: &RunConfig) -> Vec<String> {
    let mut problems: Vec<String> = cfg.topology.validate().iter().map(ToString::to_string).collect();
    problems.extend(validate_application(&cfg.application).iter().map(ToString::to_string));
    for s in cfg.topology.sensors() {
        if cfg.application.sensor_edge(&s.tuple_type).is_none() {
            problems.push(RuntimeError::NoSensorEdge(s.name.clone()).to_string());
        }
    }
    for m in &cfg.application.modules {
        if !cfg.placement.instances().iter().any(|i| i.module == m.name) {
            problems.push(RuntimeError::UnplacedModule(m.name.clone()).to_string());
        }
    }
    for e in &cfg.mobility {
        if let Err(err) = cfg.topology.validate_mobility(e) {
            problems.push(err.to_string());
        }
    }
    problems
}

/// Runs one simulation to its horizon.
pub fn run(cfg: RunConfig) -> Result<RunOutput, RuntimeError> {
    let problems = validate_run(&cfg);
    if !problems.is_empty() {
        return Err(RuntimeError::Invalid(problems));
    }
    let RunConfig {
        topology,
        application,
        placement,
        mobility,
        horizon,
        seed,
        record_events,
    } = cfg;
    let n_devices = topology.devices().len();
    let mut instances_by_device = vec![Vec::new(); n_devices];
    for inst in placement.instances() {
        instances_by_device[inst.host.0].push(inst.id);
    }
    let mut world = World {
        metrics: Metrics::new(&topology, &application.loops),
        selectivity: RngStream::named(seed, "selectivity"),
        ids: IdGen::default(),
        uplinks: vec![SimTime::ZERO; n_devices],
        downlinks: BTreeMap::new(),
        queues: vec![InstanceQueue::default(); placement.instances().len()],
        instances_by_device,
        emitted_by_sensor: vec![0; topology.sensors().len()],
        record: record_events,
        log: Vec::new(),
        topo: topology,
        app: application,
        placement,
    };

    let mut kernel: Kernel<SimEvent> = Kernel::new();
    for entry in &mobility {
        kernel.schedule_at(SimEvent::Mobility(*entry), entry.at_time)?;
    }
    for (i, s) in world.topo.sensors().iter().enumerate() {
        if s.max_tuples != Some(0) {
            kernel.schedule(SimEvent::SensorEmit(SensorId(i)), s.emission_interval)?;
        }
    }
    for (ei, edge) in world.app.edges.iter().enumerate() {
        let Some(period) = edge.period else { continue };
        for inst in world.placement.instances().iter().filter(|i| i.module == edge.source) {
            kernel.schedule(
                SimEvent::PeriodicEdgeFire {
                    instance: inst.id,
                    edge: ei,
                },
                period,
            )?;
        }
    }

    let end_clock = kernel.run_until(horizon, |k, ev| world.handle(k, ev.payload))?;
    kernel.terminate();
    world.metrics.tuples.in_flight = world.in_flight(&kernel);
    world.log(LogRecord {
        t: horizon.as_ms(),
        kind: SimEvent::SimulationEnd.kind_name().into(),
        in_flight: Some(world.metrics.tuples.in_flight),
        ..Default::default()
    });
    let report = world.metrics.finalize(horizon, seed)?;
    Ok(RunOutput {
        report,
        events: world.log,
        final_topology: world.topo,
        end_clock,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::{builtin_application, LineageId, TupleId};
    use crate::placement::{deadline_aware_place, pin_module, PinList};
    use crate::placement::tests::one_gateway;
    use crate::topology::{Actuator, Sensor};

    fn t(ms: f64) -> SimTime {
        SimTime::new(ms).unwrap()
    }

    #[test]
    fn link_serialization() {
        let mut link = LinkState {
            bandwidth: 10000.0,
            latency: 2.0,
            busy_until: SimTime::ZERO,
        };
        let (_, _, first) = link.transmit(t(0.0), 600.0).unwrap();
        assert_eq!(first.as_ms(), 62.0);
        let (start, _, second) = link.transmit(t(0.0), 600.0).unwrap();
        assert_eq!(start.as_ms(), 60.0);
        assert_eq!(second.as_ms() - first.as_ms(), 60.0);
        let (_, _, zero) = link.transmit(t(500.0), 0.0).unwrap();
        assert_eq!(zero.as_ms(), 502.0);
        let mut dead = LinkState {
            bandwidth: 0.0,
            latency: 1.0,
            busy_until: SimTime::ZERO,
        };
        assert!(dead.transmit(t(0.0), 1.0).is_none());
    }

    /// One gateway, one leaf; mainModule forced onto the gateway with no extra
    /// MIPS; sensor capped at `cap` tuples.
    fn single_leaf(cap: Option<u64>) -> RunConfig {
        let (mut topo, _, _, leaves) = one_gateway(2800.0, 1);
        let leaf = leaves[0];
        topo.attach_sensor(Sensor {
            name: "IoTSensor".into(),
            tuple_type: "IoTSensor".into(),
            gateway_device: leaf,
            latency: 6.0,
            emission_interval: 5.0,
            max_tuples: cap,
        })
        .unwrap();
        topo.attach_actuator(Actuator {
            name: "a-0-0".into(),
            consumed_tuple_type: "IoTActuator".into(),
            gateway_device: leaf,
            latency: 1.0,
        })
        .unwrap();
        let mut app = builtin_application("deadline_test").unwrap();
        app.deadline_info.insert(leaf, [("mainModule".to_string(), 4.0)].into());
        app.additional_mips_info.insert(leaf, [("mainModule".to_string(), 0.0)].into());
        let mut pins = pin_module(PinList::default(), &app, &topo, "storageModule", "cloud").unwrap();
        pins = pin_module(pins, &app, &topo, "clientModule", "e-0-0").unwrap();
        let placement = deadline_aware_place(&app, &topo, &pins, "mainModule").unwrap();
        RunConfig {
            topology: topo,
            application: app,
            placement,
            mobility: vec![],
            horizon: t(10_000.0),
            seed: 7,
            record_events: true,
        }
    }

    #[test]
    fn first_loop_latency_matches_hand_sum() {
        let out = run(single_leaf(Some(1))).unwrap();
        let samples = &out.report.loops[0].samples_ms;
        assert_eq!(samples.len(), 1);
        assert!((samples[0] - 4276.0).abs() < 1e-6, "{samples:?}");
    }

    #[test]
    fn route_trace_up_and_down() {
        let cfg = single_leaf(Some(1));
        let topo = &cfg.topology;
        let leaf = topo.id_of("e-0-0").unwrap();
        let gw = topo.id_of("g-0").unwrap();
        let app = &cfg.application;
        let raw = app.edge_by_type("RawData").unwrap();
        let mut tuple = Tuple::from_edge(raw, TupleId(1), LineageId(1), leaf, SimTime::ZERO);
        assert_eq!(route_tuple(topo, &cfg.placement, leaf, &mut tuple).unwrap(), Route::Forward(gw));
        assert_eq!(tuple.down_path, vec![leaf]);
        assert!(matches!(
            route_tuple(topo, &cfg.placement, gw, &mut tuple).unwrap(),
            Route::Process(_)
        ));

        let result = app.edge_by_type("ResultData").unwrap();
        let mut down = Tuple::from_edge(result, TupleId(2), LineageId(1), leaf, SimTime::ZERO);
        down.down_path = vec![leaf];
        assert_eq!(route_tuple(topo, &cfg.placement, gw, &mut down).unwrap(), Route::Forward(leaf));
        assert!(down.down_path.is_empty());

        let response = app.edge_by_type("Response").unwrap();
        let mut act = Tuple::from_edge(response, TupleId(3), LineageId(1), leaf, SimTime::ZERO);
        assert_eq!(
            route_tuple(topo, &cfg.placement, leaf, &mut act).unwrap(),
            Route::Deliver(ActuatorId(0))
        );

        let mut lost = Tuple::from_edge(result, TupleId(4), LineageId(1), leaf, SimTime::ZERO);
        assert!(matches!(
            route_tuple(topo, &cfg.placement, gw, &mut lost),
            Err(RuntimeError::LostDown { .. })
        ));
    }

    #[test]
    fn sensor_emission_counts() {
        let mut cfg = single_leaf(None);
        cfg.horizon = t(50.0);
        let out = run(cfg).unwrap();
        assert_eq!(out.report.tuples.emitted, 10);

        let mut cfg = single_leaf(Some(100));
        cfg.horizon = t(100_000.0);
        cfg.record_events = false;
        assert_eq!(run(cfg).unwrap().report.tuples.emitted, 100);

        let cfg = single_leaf(Some(0));
        assert_eq!(run(cfg).unwrap().report.tuples.emitted, 0);
    }

    #[test]
    fn zero_horizon_is_idle() {
        let mut cfg = single_leaf(None);
        cfg.horizon = SimTime::ZERO;
        let r = run(cfg).unwrap().report;
        assert!(r.energy_j.values().all(|&e| e == 0.0));
        assert_eq!(r.total_cost, 0.0);
        assert_eq!(r.network.total_kb, 0.0);
    }

    #[test]
    fn processing_times() {
        // first emission at 5; 100 MI at 1000 MI/s on the leaf, 6000 MI at 1500 MI/s on the gateway
        let out = run(single_leaf(Some(1))).unwrap();
        let process: Vec<(f64, String)> = out
            .events
            .iter()
            .filter(|r| r.kind == "process")
            .map(|r| (r.t, r.tuple_type.clone().unwrap()))
            .collect();
        assert_eq!(process[0], (111.0, "IoTSensor".into()));
        assert_eq!(process[1], (4173.0, "RawData".into()));
    }

    #[test]
    fn missing_sensor_edge_is_config_error() {
        let mut cfg = single_leaf(None);
        cfg.application.edges.remove(0);
        cfg.application.mappings.remove(0);
        match run(cfg) {
            Err(RuntimeError::Invalid(p)) => assert!(p.iter().any(|m| m.contains("no sensor edge"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mobility_to_current_parent_changes_nothing() {
        let base = run(single_leaf(Some(3))).unwrap();
        let mut cfg = single_leaf(Some(3));
        let leaf = cfg.topology.id_of("e-0-0").unwrap();
        let gw = cfg.topology.id_of("g-0").unwrap();
        cfg.mobility.push(MobilityEntry {
            device: leaf,
            at_time: t(100.0),
            new_parent: gw,
        });
        let moved = run(cfg).unwrap();
        assert_eq!(base.report, moved.report);
    }
}
