//! Logical layer: an application is a dataflow of modules joined by typed
//! edges. Processing a tuple at a module emits new tuples according to the
//! module's tuple mappings, each firing independently with its selectivity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{RngStream, SimTime};
use crate::topology::DeviceId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EdgeKind {
    Sensor,
    Module,
    Actuator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppModule {
    pub name: String,
    /// MB.
    pub ram: f64,
    /// Service rate of one instance, MI per second.
    pub mips: f64,
    /// MB of storage.
    pub size: f64,
    /// kB per second.
    pub bw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppEdge {
    pub source: String,
    pub destination: String,
    /// MI.
    pub cpu_length: f64,
    /// kB.
    pub nw_length: f64,
    pub tuple_type: String,
    pub direction: Direction,
    pub edge_kind: EdgeKind,
    /// Periodic emission interval in ms, if the edge fires on a timer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleMapping {
    pub module: String,
    pub input_type: String,
    pub output_type: String,
    pub selectivity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppLoop {
    /// Sensor tuple type, then modules, then actuator name.
    pub sequence: Vec<String>,
}

impl AppLoop {
    pub fn new<S: Into<String>>(sequence: impl IntoIterator<Item = S>) -> Self {
        AppLoop {
            sequence: sequence.into_iter().map(Into::into).collect(),
        }
    }

    /// The modules between the sensor and the actuator.
    pub fn modules(&self) -> &[String] {
        match self.sequence.len() {
            0..=2 => &[],
            n => &self.sequence[1..n - 1],
        }
    }

    pub fn label(&self) -> String {
        self.sequence.join(" -> ")
    }
}

pub type DeviceModuleValues = BTreeMap<DeviceId, BTreeMap<String, f64>>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Application {
    pub app_id: String,
    pub modules: Vec<AppModule>,
    pub edges: Vec<AppEdge>,
    pub mappings: Vec<TupleMapping>,
    pub loops: Vec<AppLoop>,
    /// Per end device: module name to deadline (ms).
    pub deadline_info: DeviceModuleValues,
    /// Per end device: module name to extra MI/s requested on top of the
    /// module's base rate.
    pub additional_mips_info: DeviceModuleValues,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AppError {
    #[error("duplicate module {0:?}")]
    DuplicateModule(String),
    #[error("module {name:?}: mips must be positive, got {mips}")]
    NonPositiveMips { name: String, mips: f64 },
    #[error("module {name:?}: {field} must be finite and non-negative, got {value}")]
    InvalidResource {
        name: String,
        field: &'static str,
        value: f64,
    },
    #[error("unknown module {0:?}")]
    UnknownModule(String),
    #[error("edge {tuple_type:?}: endpoint {endpoint:?} {reason}")]
    DanglingEndpoint {
        tuple_type: String,
        endpoint: String,
        reason: &'static str,
    },
    #[error("tuple type {0:?} is already defined by another edge")]
    DuplicateTupleType(String),
    #[error("edge {tuple_type:?}: sensor edges must carry the sensor's own tuple type (source {source_name:?})")]
    SensorEdgeType { tuple_type: String, source_name: String },
    #[error("edge {tuple_type:?}: {field} must be finite and non-negative, got {value}")]
    InvalidLength {
        tuple_type: String,
        field: &'static str,
        value: f64,
    },
    #[error("edge {tuple_type:?}: period must be positive, got {period}")]
    InvalidPeriod { tuple_type: String, period: f64 },
    #[error("mapping {module:?}: no outgoing edge of the module defines tuple type {output_type:?}")]
    UnknownOutput { module: String, output_type: String },
    #[error("mapping {module:?}: no edge delivers tuple type {input_type:?} to the module")]
    UnknownInput { module: String, input_type: String },
    #[error("mapping {module:?} {input_type:?} -> {output_type:?}: selectivity {selectivity} outside [0, 1]")]
    Selectivity {
        module: String,
        input_type: String,
        output_type: String,
        selectivity: f64,
    },
    #[error("loop {label:?}: no edge from {from:?} to {to:?}")]
    LoopGap { label: String, from: String, to: String },
    #[error("loop {label:?}: too short; needs sensor, at least one module and an actuator")]
    LoopTooShort { label: String },
    #[error("loops {a:?} and {b:?} end in the same tuple type and cannot be told apart")]
    AmbiguousLoops { a: String, b: String },
    #[error("device {device}: {what} for {module:?} must be {expect}, got {value}")]
    ClientValue {
        device: DeviceId,
        module: String,
        what: &'static str,
        expect: &'static str,
        value: f64,
    },
    #[error("unknown builtin application {0:?}; expected one of {1}")]
    UnknownBuiltin(String, String),
}

/// Tuple types are compared after trimming surrounding whitespace.
fn norm(s: &str) -> &str {
    s.trim()
}

fn check_non_negative(value: f64) -> bool {
    value.is_finite() && value >= 0.0
}

impl Application {
    pub fn new(app_id: impl Into<String>) -> Self {
        Application {
            app_id: app_id.into(),
            ..Default::default()
        }
    }

    pub fn module(&self, name: &str) -> Option<&AppModule> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn has_module(&self, name: &str) -> bool {
        self.module(name).is_some()
    }

    pub fn edge_by_type(&self, tuple_type: &str) -> Option<&AppEdge> {
        let t = norm(tuple_type);
        self.edges.iter().find(|e| norm(&e.tuple_type) == t)
    }

    /// The sensor edge whose source is the given sensor tuple type.
    pub fn sensor_edge(&self, sensor_type: &str) -> Option<&AppEdge> {
        let t = norm(sensor_type);
        self.edges
            .iter()
            .find(|e| e.edge_kind == EdgeKind::Sensor && norm(&e.source) == t)
    }

    pub fn add_module(
        &mut self,
        name: impl Into<String>,
        ram: f64,
        mips: f64,
        size: f64,
        bw: f64,
    ) -> Result<(), AppError> {
        let module = AppModule {
            name: name.into(),
            ram,
            mips,
            size,
            bw,
        };
        check_module(&module)?;
        if self.has_module(&module.name) {
            return Err(AppError::DuplicateModule(module.name));
        }
        self.modules.push(module);
        Ok(())
    }

    pub fn add_edge(&mut self, edge: AppEdge) -> Result<(), AppError> {
        check_edge_shape(&edge)?;
        check_endpoints(self, &edge)?;
        if self.edge_by_type(&edge.tuple_type).is_some() {
            return Err(AppError::DuplicateTupleType(edge.tuple_type));
        }
        self.edges.push(edge);
        Ok(())
    }

    pub fn add_tuple_mapping(
        &mut self,
        module: impl Into<String>,
        input_type: impl Into<String>,
        output_type: impl Into<String>,
        selectivity: f64,
    ) -> Result<(), AppError> {
        let mapping = TupleMapping {
            module: module.into(),
            input_type: input_type.into(),
            output_type: output_type.into(),
            selectivity,
        };
        check_mapping(self, &mapping)?;
        self.mappings.push(mapping);
        Ok(())
    }

    pub fn add_loop(&mut self, lp: AppLoop) {
        self.loops.push(lp);
    }

    /// Modules in the order a tuple from the sensor end first meets them:
    /// loop order first, then any module not on a loop in declaration order.
    pub fn modules_in_flow_order(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut order = Vec::new();
        for lp in &self.loops {
            for m in lp.modules() {
                if self.has_module(m) && seen.insert(m.clone()) {
                    order.push(m.clone());
                }
            }
        }
        for m in &self.modules {
            if seen.insert(m.name.clone()) {
                order.push(m.name.clone());
            }
        }
        order
    }

    /// The loop a delivered tuple belongs to, if any: the loop must end in
    /// the tuple's type and its modules must appear, in order, among the
    /// modules the tuple's ancestors visited.
    pub fn match_loop(&self, tuple_type: &str, visited: &[String]) -> Option<usize> {
        self.loops.iter().position(|lp| {
            terminal_type(self, lp).is_some_and(|t| norm(t) == norm(tuple_type))
                && is_subsequence(lp.modules(), visited)
        })
    }
}

fn terminal_type<'a>(app: &'a Application, lp: &AppLoop) -> Option<&'a str> {
    let n = lp.sequence.len();
    if n < 2 {
        return None;
    }
    let (from, to) = (&lp.sequence[n - 2], &lp.sequence[n - 1]);
    app.edges
        .iter()
        .find(|e| e.source == *from && e.destination == *to)
        .map(|e| e.tuple_type.as_str())
}

fn is_subsequence(needle: &[String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

fn check_module(m: &AppModule) -> Result<(), AppError> {
    if !(m.mips.is_finite() && m.mips > 0.0) {
        return Err(AppError::NonPositiveMips {
            name: m.name.clone(),
            mips: m.mips,
        });
    }
    for (field, value) in [("ram", m.ram), ("size", m.size), ("bw", m.bw)] {
        if !check_non_negative(value) {
            return Err(AppError::InvalidResource {
                name: m.name.clone(),
                field,
                value,
            });
        }
    }
    Ok(())
}

fn check_edge_shape(e: &AppEdge) -> Result<(), AppError> {
    for (field, value) in [("cpu_length", e.cpu_length), ("nw_length", e.nw_length)] {
        if !check_non_negative(value) {
            return Err(AppError::InvalidLength {
                tuple_type: e.tuple_type.clone(),
                field,
                value,
            });
        }
    }
    if let Some(period) = e.period {
        if !(period.is_finite() && period > 0.0) {
            return Err(AppError::InvalidPeriod {
                tuple_type: e.tuple_type.clone(),
                period,
            });
        }
    }
    if e.edge_kind == EdgeKind::Sensor && norm(&e.source) != norm(&e.tuple_type) {
        return Err(AppError::SensorEdgeType {
            tuple_type: e.tuple_type.clone(),
            source_name: e.source.clone(),
        });
    }
    Ok(())
}

fn check_endpoints(app: &Application, e: &AppEdge) -> Result<(), AppError> {
    let dangling = |endpoint: &str, reason| AppError::DanglingEndpoint {
        tuple_type: e.tuple_type.clone(),
        endpoint: endpoint.to_string(),
        reason,
    };
    let (src_module, dst_module) = match e.edge_kind {
        EdgeKind::Sensor => (false, true),
        EdgeKind::Module => (true, true),
        EdgeKind::Actuator => (true, false),
    };
    for (endpoint, must_be_module) in [(&e.source, src_module), (&e.destination, dst_module)] {
        let is_module = app.has_module(endpoint);
        if must_be_module && !is_module {
            return Err(dangling(endpoint, "is not a module"));
        }
        if !must_be_module && is_module {
            return Err(dangling(endpoint, "names a module but should be a sensor or actuator"));
        }
    }
    Ok(())
}

fn check_mapping(app: &Application, m: &TupleMapping) -> Result<(), AppError> {
    if !app.has_module(&m.module) {
        return Err(AppError::UnknownModule(m.module.clone()));
    }
    if !(0.0..=1.0).contains(&m.selectivity) {
        return Err(AppError::Selectivity {
            module: m.module.clone(),
            input_type: m.input_type.clone(),
            output_type: m.output_type.clone(),
            selectivity: m.selectivity,
        });
    }
    let output_ok = app
        .edge_by_type(&m.output_type)
        .is_some_and(|e| e.source == m.module);
    if !output_ok {
        return Err(AppError::UnknownOutput {
            module: m.module.clone(),
            output_type: m.output_type.clone(),
        });
    }
    let input_ok = app
        .edge_by_type(&m.input_type)
        .is_some_and(|e| e.destination == m.module);
    if !input_ok {
        return Err(AppError::UnknownInput {
            module: m.module.clone(),
            input_type: m.input_type.clone(),
        });
    }
    Ok(())
}

/// Lists every violated invariant; an empty list means the application is
/// well formed.
pub fn validate_application(app: &Application) -> Vec<AppError> {
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    for m in &app.modules {
        if let Err(e) = check_module(m) {
            out.push(e);
        }
        if !names.insert(m.name.as_str()) {
            out.push(AppError::DuplicateModule(m.name.clone()));
        }
    }
    let mut types = BTreeSet::new();
    for e in &app.edges {
        if let Err(err) = check_edge_shape(e).and_then(|_| check_endpoints(app, e)) {
            out.push(err);
        }
        if !types.insert(norm(&e.tuple_type)) {
            out.push(AppError::DuplicateTupleType(e.tuple_type.clone()));
        }
    }
    for m in &app.mappings {
        if let Err(e) = check_mapping(app, m) {
            out.push(e);
        }
    }
    for lp in &app.loops {
        let label = lp.label();
        if lp.sequence.len() < 3 {
            out.push(AppError::LoopTooShort { label });
            continue;
        }
        for pair in lp.sequence.windows(2) {
            let found = app
                .edges
                .iter()
                .any(|e| norm(&e.source) == norm(&pair[0]) && e.destination == pair[1]);
            if !found {
                out.push(AppError::LoopGap {
                    label: label.clone(),
                    from: pair[0].clone(),
                    to: pair[1].clone(),
                });
            }
        }
    }
    for (i, a) in app.loops.iter().enumerate() {
        for b in app.loops.iter().skip(i + 1) {
            let (ta, tb) = (terminal_type(app, a), terminal_type(app, b));
            if ta.is_some()
                && ta == tb
                && (is_subsequence(a.modules(), b.modules()) || is_subsequence(b.modules(), a.modules()))
            {
                out.push(AppError::AmbiguousLoops {
                    a: a.label(),
                    b: b.label(),
                });
            }
        }
    }
    for (device, per_module) in &app.deadline_info {
        for (module, &value) in per_module {
            if !app.has_module(module) {
                out.push(AppError::UnknownModule(module.clone()));
            } else if !(value.is_finite() && value > 0.0) {
                out.push(AppError::ClientValue {
                    device: *device,
                    module: module.clone(),
                    what: "deadline",
                    expect: "positive",
                    value,
                });
            }
        }
    }
    for (device, per_module) in &app.additional_mips_info {
        for (module, &value) in per_module {
            if !app.has_module(module) {
                out.push(AppError::UnknownModule(module.clone()));
            } else if !check_non_negative(value) {
                out.push(AppError::ClientValue {
                    device: *device,
                    module: module.clone(),
                    what: "additional mips",
                    expect: "non-negative",
                    value,
                });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TupleId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineageId(pub u64);

impl fmt::Display for TupleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Monotone id source for tuples and lineages.
#[derive(Clone, Debug, Default)]
pub struct IdGen {
    next_tuple: u64,
    next_lineage: u64,
}

impl IdGen {
    pub fn tuple(&mut self) -> TupleId {
        self.next_tuple += 1;
        TupleId(self.next_tuple)
    }

    pub fn lineage(&mut self) -> LineageId {
        self.next_lineage += 1;
        LineageId(self.next_lineage)
    }

    pub fn tuples_issued(&self) -> u64 {
        self.next_tuple
    }
}

/// A unit of work in flight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub id: TupleId,
    pub lineage_id: LineageId,
    pub tuple_type: String,
    pub direction: Direction,
    pub edge_kind: EdgeKind,
    pub cpu_length: f64,
    pub nw_length: f64,
    pub source_module: String,
    pub dest_module: String,
    /// End device the lineage started from.
    pub origin_device: DeviceId,
    /// Emission time of the lineage's root tuple.
    pub emitted_at: SimTime,
    /// Devices this lineage was forwarded up from, innermost last.
    pub down_path: Vec<DeviceId>,
    /// Modules that processed this tuple's ancestors, in order.
    pub visited: Vec<String>,
}

impl Tuple {
    /// The root tuple of a fresh lineage, shaped by `edge`.
    pub fn from_edge(
        edge: &AppEdge,
        id: TupleId,
        lineage_id: LineageId,
        origin_device: DeviceId,
        emitted_at: SimTime,
    ) -> Self {
        Tuple {
            id,
            lineage_id,
            tuple_type: norm(&edge.tuple_type).to_string(),
            direction: edge.direction,
            edge_kind: edge.edge_kind,
            cpu_length: edge.cpu_length,
            nw_length: edge.nw_length,
            source_module: edge.source.clone(),
            dest_module: edge.destination.clone(),
            origin_device,
            emitted_at,
            down_path: Vec::new(),
            visited: Vec::new(),
        }
    }
}

/// Applies `module`'s mappings for the input's tuple type, in registration
/// order. Each mapping fires independently with its selectivity; a mapping
/// with selectivity 1 never consumes randomness.
pub fn derive_tuples(
    app: &Application,
    module: &str,
    input: &Tuple,
    rng: &mut RngStream,
    ids: &mut IdGen,
) -> Vec<Tuple> {
    let input_type = norm(&input.tuple_type);
    let mut out = Vec::new();
    for m in app
        .mappings
        .iter()
        .filter(|m| m.module == module && norm(&m.input_type) == input_type)
    {
        if !rng.bernoulli(m.selectivity) {
            continue;
        }
        let Some(edge) = app
            .edges
            .iter()
            .find(|e| norm(&e.tuple_type) == norm(&m.output_type) && e.source == module)
        else {
            continue;
        };
        let mut visited = input.visited.clone();
        visited.push(module.to_string());
        out.push(Tuple {
            id: ids.tuple(),
            lineage_id: input.lineage_id,
            tuple_type: norm(&edge.tuple_type).to_string(),
            direction: edge.direction,
            edge_kind: edge.edge_kind,
            cpu_length: edge.cpu_length,
            nw_length: edge.nw_length,
            source_module: module.to_string(),
            dest_module: edge.destination.clone(),
            origin_device: input.origin_device,
            emitted_at: input.emitted_at,
            down_path: input.down_path.clone(),
            visited,
        });
    }
    out
}

pub const BUILTIN_APPLICATIONS: [&str; 5] =
    ["master_worker", "sequential", "client_main", "deadline_test", "healthcare"];

fn edge(
    source: &str,
    destination: &str,
    cpu_length: f64,
    nw_length: f64,
    tuple_type: &str,
    direction: Direction,
    edge_kind: EdgeKind,
) -> AppEdge {
    AppEdge {
        source: source.into(),
        destination: destination.into(),
        cpu_length,
        nw_length,
        tuple_type: tuple_type.into(),
        direction,
        edge_kind,
        period: None,
    }
}

// Resources used when a module is declared with only a RAM figure.
const DEFAULT_MODULE_MIPS: f64 = 1000.0;
const DEFAULT_MODULE_SIZE: f64 = 10000.0;
const DEFAULT_MODULE_BW: f64 = 1000.0;

fn add_ram_only(app: &mut Application, name: &str, ram: f64) -> Result<(), AppError> {
    app.add_module(name, ram, DEFAULT_MODULE_MIPS, DEFAULT_MODULE_SIZE, DEFAULT_MODULE_BW)
}

/// One of the stock applications, with the constants they are known by.
pub fn builtin_application(name: &str) -> Result<Application, AppError> {
    use Direction::{Down, Up};
    use EdgeKind::{Actuator, Module, Sensor};
    let mut app = Application::new(name);
    match name {
        "master_worker" => {
            add_ram_only(&mut app, "MasterModule", 10.0)?;
            for i in 1..=3 {
                add_ram_only(&mut app, &format!("WorkerModule-{i}"), 10.0)?;
            }
            app.add_edge(edge("Sensor", "MasterModule", 3000.0, 500.0, "Sensor", Up, Sensor))?;
            for i in 1..=3 {
                app.add_edge(edge(
                    "MasterModule",
                    &format!("WorkerModule-{i}"),
                    100.0,
                    1000.0,
                    &format!("Task-{i}"),
                    Up,
                    Module,
                ))?;
            }
            for i in 1..=3 {
                app.add_edge(edge(
                    &format!("WorkerModule-{i}"),
                    "MasterModule",
                    20.0,
                    50.0,
                    &format!("Response-{i}"),
                    Down,
                    Module,
                ))?;
            }
            app.add_edge(edge("MasterModule", "Actuators", 100.0, 50.0, "OutputData", Down, Actuator))?;
            for i in 1..=3 {
                app.add_tuple_mapping("MasterModule", " Sensor ", format!("Task-{i}"), 0.3)?;
            }
            for i in 1..=3 {
                app.add_tuple_mapping(format!("WorkerModule-{i}"), format!("Task-{i}"), format!("Response-{i}"), 1.0)?;
            }
            for i in 1..=3 {
                app.add_tuple_mapping("MasterModule", format!("Response-{i}"), "OutputData", 0.3)?;
            }
            for i in 1..=3 {
                let worker = format!("WorkerModule-{i}");
                app.add_loop(AppLoop::new(["Sensor", "MasterModule", &worker, "MasterModule", "Actuators"]));
            }
        }
        "sequential" => {
            for i in 1..=4 {
                add_ram_only(&mut app, &format!("Module{i}"), 10.0)?;
            }
            app.add_edge(edge("Sensor", "Module1", 3000.0, 500.0, "Sensor", Up, Sensor))?;
            app.add_edge(edge("Module1", "Module2", 100.0, 1000.0, "ProcessedData-1", Up, Module))?;
            app.add_edge(edge("Module2", "Module3", 100.0, 1000.0, "ProcessedData-2", Up, Module))?;
            app.add_edge(edge("Module3", "Module4", 100.0, 1000.0, "ProcessedData-3", Up, Module))?;
            app.add_edge(edge("Module4", "Module1", 100.0, 1000.0, "ProcessedData-4", Down, Module))?;
            app.add_edge(edge("Module1", "Actuators", 100.0, 50.0, "OutputData", Down, Actuator))?;
            app.add_tuple_mapping("Module1", "Sensor", "ProcessedData-1", 1.0)?;
            app.add_tuple_mapping("Module2", "ProcessedData-1", "ProcessedData-2", 1.0)?;
            app.add_tuple_mapping("Module3", "ProcessedData-2", "ProcessedData-3", 1.0)?;
            app.add_tuple_mapping("Module4", "ProcessedData-3", "ProcessedData-4", 1.0)?;
            app.add_tuple_mapping("Module1", "ProcessedData-4", "OutputData", 1.0)?;
            app.add_loop(AppLoop::new([
                "Sensor", "Module1", "Module2", "Module3", "Module4", "Module1", "Actuators",
            ]));
        }
        "client_main" => {
            app.add_module("ClientModule", 20.0, 500.0, 1024.0, 1500.0)?;
            app.add_module("MainModule", 100.0, 1200.0, 4000.0, 100.0)?;
            app.add_edge(edge("Sensor", "ClientModule", 3000.0, 500.0, "Sensor", Up, Sensor))?;
            app.add_edge(edge("ClientModule", "MainModule", 100.0, 1000.0, "PreProcessedData", Up, Module))?;
            app.add_edge(edge("MainModule", "ClientModule", 100.0, 1000.0, "ProcessedData", Down, Module))?;
            app.add_edge(edge("ClientModule", "Actuators", 100.0, 50.0, "OutputData", Down, Actuator))?;
            app.add_tuple_mapping("ClientModule", "Sensor", "PreProcessedData", 1.0)?;
            app.add_tuple_mapping("MainModule", "PreProcessedData", "ProcessedData", 1.0)?;
            app.add_tuple_mapping("ClientModule", "ProcessedData", "OutputData", 1.0)?;
            app.add_loop(AppLoop::new(["Sensor", "ClientModule", "MainModule", "ClientModule", "Actuators"]));
        }
        "deadline_test" => {
            app.add_module("clientModule", 10.0, 1000.0, 1000.0, 100.0)?;
            app.add_module("mainModule", 50.0, 1500.0, 4000.0, 800.0)?;
            app.add_module("storageModule", 10.0, 50.0, 12000.0, 100.0)?;
            app.add_edge(edge("IoTSensor", "clientModule", 100.0, 200.0, "IoTSensor", Up, Sensor))?;
            app.add_edge(edge("clientModule", "mainModule", 6000.0, 600.0, "RawData", Up, Module))?;
            app.add_edge(edge("mainModule", "storageModule", 1000.0, 300.0, "StoreData", Up, Module))?;
            app.add_edge(edge("mainModule", "clientModule", 100.0, 50.0, "ResultData", Down, Module))?;
            app.add_edge(edge("clientModule", "IoTActuator", 100.0, 50.0, "Response", Down, Actuator))?;
            app.add_tuple_mapping("clientModule", "IoTSensor", "RawData", 1.0)?;
            app.add_tuple_mapping("mainModule", "RawData", "ResultData", 1.0)?;
            app.add_tuple_mapping("mainModule", "RawData", "StoreData", 1.0)?;
            app.add_tuple_mapping("clientModule", "ResultData", "Response", 1.0)?;
            app.add_loop(AppLoop::new(["IoTSensor", "clientModule", "mainModule", "clientModule", "IoTActuator"]));
        }
        "healthcare" => {
            // Sense on a wearable, pre-process on the phone, analyse and raise
            // events higher up, archive in the cloud.
            app.add_module("clientModule", 10.0, 1000.0, 1000.0, 100.0)?;
            app.add_module("analysisModule", 50.0, 1500.0, 4000.0, 800.0)?;
            app.add_module("eventModule", 20.0, 4000.0, 2000.0, 500.0)?;
            app.add_module("storageModule", 10.0, 2000.0, 12000.0, 100.0)?;
            app.add_edge(edge("Vitals", "clientModule", 3.0, 2.0, "Vitals", Up, Sensor))?;
            app.add_edge(edge("clientModule", "analysisModule", 10.0, 20.0, "FilteredData", Up, Module))?;
            app.add_edge(edge("analysisModule", "eventModule", 2.0, 10.0, "AnalysisResult", Up, Module))?;
            app.add_edge(edge("eventModule", "storageModule", 2.0, 10.0, "EventRecord", Up, Module))?;
            app.add_edge(edge("eventModule", "clientModule", 1.0, 5.0, "Alert", Down, Module))?;
            app.add_edge(edge("clientModule", "Display", 1.0, 5.0, "DisplayUpdate", Down, Actuator))?;
            app.add_tuple_mapping("clientModule", "Vitals", "FilteredData", 1.0)?;
            app.add_tuple_mapping("analysisModule", "FilteredData", "AnalysisResult", 1.0)?;
            app.add_tuple_mapping("eventModule", "AnalysisResult", "EventRecord", 1.0)?;
            app.add_tuple_mapping("eventModule", "AnalysisResult", "Alert", 0.8)?;
            app.add_tuple_mapping("clientModule", "Alert", "DisplayUpdate", 1.0)?;
            app.add_loop(AppLoop::new([
                "Vitals",
                "clientModule",
                "analysisModule",
                "eventModule",
                "clientModule",
                "Display",
            ]));
        }
        other => {
            return Err(AppError::UnknownBuiltin(
                other.to_string(),
                BUILTIN_APPLICATIONS.join(", "),
            ))
        }
    }
    Ok(app)
}
