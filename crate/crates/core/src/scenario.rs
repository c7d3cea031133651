//! Scenario documents: parsing, validation, materialization and the stock
//! scenarios.
//!
//! A scenario file is JSON (see `Scenario`). Any numeric device, sensor or
//! client field may be a fixed number or `{"uniform": [min, max]}`; ranges are
//! drawn from named seed streams when the scenario is materialized. Device
//! selectors accept a device name or `@leaves` (every end device, in id
//! order). Materializing yields an explicit copy of the document, which is
//! what reports echo back.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app::{
    builtin_application, validate_application, AppEdge, AppLoop, AppModule, Application, TupleMapping,
    BUILTIN_APPLICATIONS,
};
use crate::kernel::{RngStream, SimTime};
use crate::placement::{place, PinList, Placement, PlacementError, PlacementPolicy, POLICY_NAMES};
use crate::runtime::{run, RunConfig, RunOutput, RuntimeError};
use crate::topology::{
    form_clusters, select_gateways, Actuator, ClusterConfig, Clusters, DeviceId, DeviceSpec, MobilityEntry,
    Sensor, Topology,
};

pub const FORMAT_VERSION: u32 = 1;

pub const BUILTIN_SCENARIOS: [&str; 7] = [
    "snippet1",
    "master_worker",
    "sequential",
    "deadline_test",
    "mobility_demo",
    "cluster_demo",
    "healthcare",
];

const LEAVES: &str = "@leaves";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("scenario is invalid:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("unknown builtin scenario {name:?}; valid options are {}", BUILTIN_SCENARIOS.join(", "))]
    UnknownBuiltin { name: String },
    #[error("placement failed: {0}")]
    Placement(#[from] PlacementError),
    #[error("run failed: {0}")]
    Runtime(#[from] RuntimeError),
}

/// A fixed number or a uniform range `[min, max)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Fixed(f64),
    Uniform { uniform: [f64; 2] },
}

impl Value {
    fn draw(&self, rng: &mut RngStream) -> f64 {
        match self {
            Value::Fixed(v) => *v,
            Value::Uniform { uniform: [lo, hi] } => rng.sample_uniform(*lo, *hi).unwrap_or(*lo),
        }
    }

    fn check(&self, what: &str, errors: &mut Vec<String>) {
        match self {
            Value::Fixed(v) if !v.is_finite() => errors.push(format!("{what}: {v} is not a finite number")),
            Value::Uniform { uniform: [lo, hi] } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                errors.push(format!("{what}: range [{lo}, {hi}) is empty or not finite"))
            }
            _ => {}
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Fixed(v)
    }
}

fn uniform(lo: f64, hi: f64) -> Value {
    Value::Uniform { uniform: [lo, hi] }
}

fn zero() -> Value {
    Value::Fixed(0.0)
}

fn is_zero(v: &Value) -> bool {
    *v == Value::Fixed(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceTemplate {
    pub mips: Value,
    pub ram: Value,
    pub up_bw: Value,
    pub down_bw: Value,
    pub rate_per_mips: Value,
    pub busy_power: Value,
    pub idle_power: Value,
    #[serde(default = "zero", skip_serializing_if = "is_zero")]
    pub uplink_latency: Value,
    #[serde(default = "zero", skip_serializing_if = "is_zero")]
    pub x: Value,
    #[serde(default = "zero", skip_serializing_if = "is_zero")]
    pub y: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceEntry {
    pub name: String,
    pub level: u32,
    /// Name of a device listed earlier; absent for the cloud and for devices
    /// left to gateway selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(flatten)]
    pub params: DeviceTemplate,
}

/// Cloud, `gateways` level-1 devices named `g-<i>` and `leaves_per_gateway`
/// level-2 devices under each, named `e-<i>-<j>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub gateways: usize,
    pub leaves_per_gateway: usize,
    pub cloud: DeviceTemplate,
    pub gateway: DeviceTemplate,
    pub leaf: DeviceTemplate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewaySelection {
    #[serde(default = "default_max_number")]
    pub max_number: f64,
}

fn default_max_number() -> f64 {
    ClusterConfig::default().max_number
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub devices: Option<Vec<DeviceEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    /// Attach parentless non-cloud devices to their nearest upper-level device.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gateway_selection: Option<GatewaySelection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorEntry {
    pub name: String,
    /// Defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuple_type: Option<String>,
    pub device: String,
    pub latency: f64,
    pub interval_ms: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tuples: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorEntry {
    /// `{device}` is replaced by the device name.
    pub name: String,
    pub consumed_tuple_type: String,
    pub device: String,
    pub latency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppDefinition {
    pub app_id: String,
    pub modules: Vec<AppModule>,
    pub edges: Vec<AppEdge>,
    #[serde(default)]
    pub mappings: Vec<TupleMapping>,
    #[serde(default)]
    pub loops: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplicationSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<AppDefinition>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinEntry {
    pub module: String,
    pub device: String,
}

/// Deadline and extra MI/s an end device requests for a module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientEntry {
    pub device: String,
    pub module: String,
    pub deadline: Value,
    #[serde(default = "zero")]
    pub additional_mips: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSection {
    pub policy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module_to_place: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pins: Vec<PinEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clients: Vec<ClientEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityDoc {
    pub device: String,
    pub at_ms: f64,
    pub new_parent: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringSection {
    pub level: u32,
    #[serde(default = "default_cluster_distance")]
    pub cluster_distance: f64,
}

fn default_cluster_distance() -> f64 {
    ClusterConfig::default().cluster_distance
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub seed: u64,
    pub horizon_ms: f64,
    pub topology: TopologySection,
    #[serde(default)]
    pub sensors: Vec<SensorEntry>,
    #[serde(default)]
    pub actuators: Vec<ActuatorEntry>,
    pub application: ApplicationSection,
    pub placement: PlacementSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mobility: Vec<MobilityDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clustering: Option<ClusteringSection>,
}

/// Per-run overrides of the scenario's own settings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub horizon_ms: Option<f64>,
    pub policy: Option<String>,
    pub record_events: bool,
}

/// A scenario resolved into simulation objects, ready to run.
#[derive(Clone, Debug)]
pub struct Prepared {
    /// Explicit copy of the scenario: ranges drawn, selectors expanded,
    /// overrides applied.
    pub scenario: Scenario,
    pub topology: Topology,
    pub application: Application,
    pub pins: PinList,
    pub policy: PlacementPolicy,
    pub placement: Placement,
    pub mobility: Vec<MobilityEntry>,
    pub clusters: Option<Clusters>,
    pub horizon: SimTime,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub prepared: Prepared,
    pub output: RunOutput,
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    scenario.materialize(&RunOptions::default())?;
    Ok(scenario)
}

/// Reads, parses and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario_str(&text)
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenarios serialize")
}

fn leaves(topo: &Topology) -> Vec<DeviceId> {
    topo.devices()
        .iter()
        .filter(|d| d.level > 0 && topo.is_leaf(d.id))
        .map(|d| d.id)
        .collect()
}

/// Expands a device selector into device names.
fn select(topo: &Topology, selector: &str, what: &str, errors: &mut Vec<String>) -> Vec<String> {
    if selector == LEAVES {
        return leaves(topo).into_iter().map(|d| topo.name_of(d).to_string()).collect();
    }
    match topo.id_of(selector) {
        Ok(_) => vec![selector.to_string()],
        Err(_) => {
            errors.push(format!("{what}: unknown device {selector:?}"));
            vec![]
        }
    }
}

fn check_template(t: &DeviceTemplate, what: &str, errors: &mut Vec<String>) {
    for (field, v) in [
        ("mips", &t.mips),
        ("ram", &t.ram),
        ("up_bw", &t.up_bw),
        ("down_bw", &t.down_bw),
        ("rate_per_mips", &t.rate_per_mips),
        ("busy_power", &t.busy_power),
        ("idle_power", &t.idle_power),
        ("uplink_latency", &t.uplink_latency),
        ("x", &t.x),
        ("y", &t.y),
    ] {
        v.check(&format!("{what}.{field}"), errors);
    }
}

fn draw_template(t: &DeviceTemplate, rng: &mut RngStream) -> DeviceTemplate {
    let mut d = |v: &Value| Value::Fixed(v.draw(rng));
    DeviceTemplate {
        mips: d(&t.mips),
        ram: d(&t.ram),
        up_bw: d(&t.up_bw),
        down_bw: d(&t.down_bw),
        rate_per_mips: d(&t.rate_per_mips),
        busy_power: d(&t.busy_power),
        idle_power: d(&t.idle_power),
        uplink_latency: d(&t.uplink_latency),
        x: d(&t.x),
        y: d(&t.y),
    }
}

fn fixed(v: &Value) -> f64 {
    match v {
        Value::Fixed(x) => *x,
        Value::Uniform { uniform } => uniform[0],
    }
}

fn expand_generator(g: &GeneratorSpec) -> Vec<DeviceEntry> {
    let mut out = vec![DeviceEntry {
        name: "cloud".into(),
        level: 0,
        parent: None,
        params: g.cloud.clone(),
    }];
    for i in 0..g.gateways {
        out.push(DeviceEntry {
            name: format!("g-{i}"),
            level: 1,
            parent: Some("cloud".into()),
            params: g.gateway.clone(),
        });
        for j in 0..g.leaves_per_gateway {
            out.push(DeviceEntry {
                name: format!("e-{i}-{j}"),
                level: 2,
                parent: Some(format!("g-{i}")),
                params: g.leaf.clone(),
            });
        }
    }
    out
}

impl Scenario {
    /// Validates the scenario and resolves it into simulation objects,
    /// listing every problem found rather than stopping at the first.
    pub fn materialize(&self, opts: &RunOptions) -> Result<Prepared, ScenarioError> {
        let mut errors = Vec::new();
        let seed = opts.seed.unwrap_or(self.seed);
        let horizon_ms = opts.horizon_ms.unwrap_or(self.horizon_ms);
        let mut echo = self.clone();
        echo.seed = seed;
        echo.horizon_ms = horizon_ms;

        if self.format_version != FORMAT_VERSION {
            errors.push(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            ));
        }
        let horizon = SimTime::new(horizon_ms);
        if horizon.is_err() {
            errors.push(format!("horizon_ms must be finite and non-negative, got {horizon_ms}"));
        }

        // devices
        let mut topo = Topology::new();
        let entries = match (&self.topology.devices, &self.topology.generator) {
            (Some(d), None) => d.clone(),
            (None, Some(g)) => expand_generator(g),
            (Some(_), Some(_)) => {
                errors.push("topology: give either devices or generator, not both".into());
                vec![]
            }
            (None, None) => {
                errors.push("topology: devices or generator required".into());
                vec![]
            }
        };
        let mut topo_rng = RngStream::named(seed, "topology");
        let mut explicit_devices = Vec::with_capacity(entries.len());
        for entry in &entries {
            let what = format!("device {:?}", entry.name);
            check_template(&entry.params, &what, &mut errors);
            let params = draw_template(&entry.params, &mut topo_rng);
            let parent = match &entry.parent {
                None => None,
                Some(p) => match topo.id_of(p) {
                    Ok(id) => Some(id),
                    Err(_) => {
                        errors.push(format!("{what}: parent {p:?} is not a device listed before it"));
                        explicit_devices.push(DeviceEntry { params, ..entry.clone() });
                        continue;
                    }
                },
            };
            let spec = DeviceSpec {
                name: entry.name.clone(),
                mips: fixed(&params.mips),
                ram: fixed(&params.ram),
                up_bw: fixed(&params.up_bw),
                down_bw: fixed(&params.down_bw),
                level: entry.level,
                rate_per_mips: fixed(&params.rate_per_mips),
                busy_power: fixed(&params.busy_power),
                idle_power: fixed(&params.idle_power),
                parent,
                uplink_latency: fixed(&params.uplink_latency),
                x: fixed(&params.x),
                y: fixed(&params.y),
            };
            if let Err(e) = topo.add_device(spec) {
                errors.push(e.to_string());
            }
            explicit_devices.push(DeviceEntry { params, ..entry.clone() });
        }
        echo.topology = TopologySection {
            devices: Some(explicit_devices),
            generator: None,
            gateway_selection: self.topology.gateway_selection.clone(),
        };
        if let Some(sel) = &self.topology.gateway_selection {
            let cfg = ClusterConfig {
                max_number: sel.max_number,
                ..ClusterConfig::default()
            };
            if let Err(e) = select_gateways(&mut topo, &cfg) {
                errors.push(e.to_string());
            }
        }

        // application
        let mut app = match (&self.application.builtin, &self.application.definition) {
            (Some(name), None) => match builtin_application(name) {
                Ok(a) => a,
                Err(_) => {
                    errors.push(format!(
                        "application: unknown builtin {name:?}; valid options are {}",
                        BUILTIN_APPLICATIONS.join(", ")
                    ));
                    Application::default()
                }
            },
            (None, Some(def)) => Application {
                app_id: def.app_id.clone(),
                modules: def.modules.clone(),
                edges: def.edges.clone(),
                mappings: def.mappings.clone(),
                loops: def.loops.iter().map(|l| AppLoop::new(l.clone())).collect(),
                ..Application::default()
            },
            _ => {
                errors.push("application: give exactly one of builtin or definition".into());
                Application::default()
            }
        };
        errors.extend(validate_application(&app).iter().map(|e| format!("application: {e}")));

        // sensors and actuators
        let mut sensor_rng = RngStream::named(seed, "sensors");
        let mut explicit_sensors = Vec::new();
        for s in &self.sensors {
            let what = format!("sensor {:?}", s.name);
            s.interval_ms.check(&format!("{what}.interval_ms"), &mut errors);
            let tuple_type = s.tuple_type.clone().unwrap_or_else(|| s.name.clone());
            if app.sensor_edge(&tuple_type).is_none() && !app.modules.is_empty() {
                errors.push(format!("{what}: the application has no sensor edge for tuple type {tuple_type:?}"));
            }
            for device in select(&topo, &s.device, &what, &mut errors) {
                let interval = s.interval_ms.draw(&mut sensor_rng);
                let sensor = Sensor {
                    name: s.name.clone(),
                    tuple_type: tuple_type.clone(),
                    gateway_device: topo.id_of(&device).expect("selected device exists"),
                    latency: s.latency,
                    emission_interval: interval,
                    max_tuples: s.max_tuples,
                };
                if let Err(e) = topo.attach_sensor(sensor) {
                    errors.push(e.to_string());
                }
                explicit_sensors.push(SensorEntry {
                    tuple_type: Some(tuple_type.clone()),
                    device,
                    interval_ms: Value::Fixed(interval),
                    ..s.clone()
                });
            }
        }
        echo.sensors = explicit_sensors;
        let mut explicit_actuators = Vec::new();
        for a in &self.actuators {
            let what = format!("actuator {:?}", a.name);
            for device in select(&topo, &a.device, &what, &mut errors) {
                let name = a.name.replace("{device}", &device);
                let actuator = Actuator {
                    name: name.clone(),
                    consumed_tuple_type: a.consumed_tuple_type.clone(),
                    gateway_device: topo.id_of(&device).expect("selected device exists"),
                    latency: a.latency,
                };
                if let Err(e) = topo.attach_actuator(actuator) {
                    errors.push(e.to_string());
                }
                explicit_actuators.push(ActuatorEntry {
                    name,
                    device,
                    ..a.clone()
                });
            }
        }
        echo.actuators = explicit_actuators;
        errors.extend(topo.validate().iter().map(ToString::to_string));

        // placement
        let policy_name = opts.policy.clone().unwrap_or_else(|| self.placement.policy.clone());
        echo.placement.policy = policy_name.clone();
        let policy = match policy_name.as_str() {
            "cloud_only" => Some(PlacementPolicy::CloudOnly),
            "edge_ward" => Some(PlacementPolicy::EdgeWard),
            "deadline_aware" => match &self.placement.module_to_place {
                Some(m) => {
                    if !app.has_module(m) && !app.modules.is_empty() {
                        errors.push(format!("placement: module_to_place {m:?} is not an application module"));
                    }
                    Some(PlacementPolicy::DeadlineAware {
                        module_to_place: m.clone(),
                    })
                }
                None => {
                    errors.push("placement: deadline_aware needs module_to_place".into());
                    None
                }
            },
            other => {
                errors.push(format!(
                    "placement: unknown policy {other:?}; valid options are {}",
                    POLICY_NAMES.join(", ")
                ));
                None
            }
        };
        let mut pins = PinList::default();
        let mut explicit_pins = Vec::new();
        for p in &self.placement.pins {
            let what = format!("pin of {:?}", p.module);
            if !app.has_module(&p.module) && !app.modules.is_empty() {
                errors.push(format!("{what}: unknown module"));
            }
            for device in select(&topo, &p.device, &what, &mut errors) {
                pins.entries.push((p.module.clone(), device.clone()));
                explicit_pins.push(PinEntry {
                    module: p.module.clone(),
                    device,
                });
            }
        }
        echo.placement.pins = explicit_pins;
        let mut client_rng = RngStream::named(seed, "clients");
        let mut explicit_clients = Vec::new();
        for c in &self.placement.clients {
            let what = format!("client entry for {:?}", c.module);
            c.deadline.check(&format!("{what}.deadline"), &mut errors);
            c.additional_mips.check(&format!("{what}.additional_mips"), &mut errors);
            for device in select(&topo, &c.device, &what, &mut errors) {
                let id = topo.id_of(&device).expect("selected device exists");
                let deadline = c.deadline.draw(&mut client_rng);
                let extra = c.additional_mips.draw(&mut client_rng);
                app.deadline_info.entry(id).or_default().insert(c.module.clone(), deadline);
                app.additional_mips_info
                    .entry(id)
                    .or_default()
                    .insert(c.module.clone(), extra);
                explicit_clients.push(ClientEntry {
                    device,
                    module: c.module.clone(),
                    deadline: Value::Fixed(deadline),
                    additional_mips: Value::Fixed(extra),
                });
            }
        }
        echo.placement.clients = explicit_clients;
        if !app.deadline_info.is_empty() {
            errors.extend(
                validate_application(&app)
                    .iter()
                    .filter(|e| matches!(e, crate::app::AppError::ClientValue { .. }))
                    .map(|e| format!("placement: {e}")),
            );
        }

        // mobility and clustering
        let mut mobility = Vec::new();
        for m in &self.mobility {
            let what = format!("mobility of {:?}", m.device);
            let device = topo.id_of(&m.device);
            let parent = topo.id_of(&m.new_parent);
            if device.is_err() {
                errors.push(format!("{what}: unknown device"));
            }
            if parent.is_err() {
                errors.push(format!("{what}: unknown destination {:?}", m.new_parent));
            }
            let at = SimTime::new(m.at_ms);
            if at.is_err() {
                errors.push(format!("{what}: time {} must be finite and non-negative", m.at_ms));
            }
            if let (Ok(device), Ok(new_parent), Ok(at_time)) = (device, parent, at) {
                let entry = MobilityEntry {
                    device,
                    at_time,
                    new_parent,
                };
                match topo.validate_mobility(&entry) {
                    Ok(()) => mobility.push(entry),
                    Err(e) => errors.push(format!("{what}: {e}")),
                }
            }
        }
        if let Some(c) = &self.clustering {
            if !(c.cluster_distance.is_finite() && c.cluster_distance > 0.0) {
                errors.push(format!("clustering: cluster_distance must be positive, got {}", c.cluster_distance));
            }
        }

        if !errors.is_empty() {
            return Err(ScenarioError::Invalid(errors));
        }
        let policy = policy.expect("policy resolved when no errors");
        let placement = place(&policy, &app, &topo, &pins)?;
        let clusters = self.clustering.as_ref().map(|c| {
            let cfg = ClusterConfig {
                cluster_distance: c.cluster_distance,
                ..ClusterConfig::default()
            };
            form_clusters(&topo, c.level, &cfg)
        });
        Ok(Prepared {
            scenario: echo,
            topology: topo,
            application: app,
            pins,
            policy,
            placement,
            mobility,
            clusters,
            horizon: horizon.expect("horizon checked"),
            seed,
        })
    }
}

impl Prepared {
    pub fn run(&self, record_events: bool) -> Result<RunOutput, ScenarioError> {
        Ok(run(RunConfig {
            topology: self.topology.clone(),
            application: self.application.clone(),
            placement: self.placement.clone(),
            mobility: self.mobility.clone(),
            horizon: self.horizon,
            seed: self.seed,
            record_events,
        })?)
    }
}

pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<ScenarioRun, ScenarioError> {
    let prepared = scenario.materialize(opts)?;
    let output = prepared.run(opts.record_events)?;
    Ok(ScenarioRun { prepared, output })
}

// Stock parameter sets.

fn cloud_template() -> DeviceTemplate {
    DeviceTemplate {
        mips: 44800.0.into(),
        ram: 40000.0.into(),
        up_bw: 100.0.into(),
        down_bw: 10000.0.into(),
        rate_per_mips: 0.01.into(),
        busy_power: (16.0 * 103.0).into(),
        idle_power: (16.0 * 83.25).into(),
        uplink_latency: zero(),
        x: zero(),
        y: zero(),
    }
}

fn heterogeneous_fog_template() -> DeviceTemplate {
    DeviceTemplate {
        mips: uniform(12000.0, 15000.0),
        ram: uniform(4000.0, 8000.0),
        up_bw: uniform(200.0, 300.0),
        down_bw: uniform(500.0, 1000.0),
        rate_per_mips: 0.01.into(),
        busy_power: uniform(100.0, 120.0),
        idle_power: uniform(70.0, 75.0),
        uplink_latency: 10.0.into(),
        x: zero(),
        y: zero(),
    }
}

fn low_level_template() -> DeviceTemplate {
    DeviceTemplate {
        mips: 1000.0.into(),
        ram: 1000.0.into(),
        up_bw: 10000.0.into(),
        down_bw: 270.0.into(),
        rate_per_mips: zero(),
        busy_power: 87.53.into(),
        idle_power: 82.44.into(),
        uplink_latency: 2.0.into(),
        x: zero(),
        y: zero(),
    }
}

fn gateway_template() -> DeviceTemplate {
    DeviceTemplate {
        mips: 2800.0.into(),
        ram: 4000.0.into(),
        up_bw: 10000.0.into(),
        down_bw: 10000.0.into(),
        rate_per_mips: zero(),
        busy_power: 107.339.into(),
        idle_power: 83.4333.into(),
        uplink_latency: 4.0.into(),
        x: zero(),
        y: zero(),
    }
}

fn end_device_template() -> DeviceTemplate {
    DeviceTemplate {
        mips: 3200.0.into(),
        ram: 1000.0.into(),
        up_bw: 10000.0.into(),
        down_bw: 270.0.into(),
        rate_per_mips: zero(),
        busy_power: 87.53.into(),
        idle_power: 82.44.into(),
        uplink_latency: 2.0.into(),
        x: zero(),
        y: zero(),
    }
}

fn device(name: &str, level: u32, parent: Option<&str>, params: DeviceTemplate) -> DeviceEntry {
    DeviceEntry {
        name: name.into(),
        level,
        parent: parent.map(Into::into),
        params,
    }
}

/// Sensors emitting `Sensor` tuples every U[5, 15) ms, 6 ms from their device.
fn area_sensor(max_tuples: Option<u64>) -> SensorEntry {
    SensorEntry {
        name: "Sensor".into(),
        tuple_type: None,
        device: LEAVES.into(),
        latency: 6.0,
        interval_ms: uniform(5.0, 15.0),
        max_tuples,
    }
}

fn area_actuator() -> ActuatorEntry {
    ActuatorEntry {
        name: "a-{device}".into(),
        consumed_tuple_type: "OutputData".into(),
        device: LEAVES.into(),
        latency: 1.0,
    }
}

fn base_scenario(name: &str, seed: u64, app: &str, devices: Vec<DeviceEntry>, policy: &str) -> Scenario {
    Scenario {
        format_version: FORMAT_VERSION,
        name: name.into(),
        notes: vec![],
        seed,
        horizon_ms: 10_000.0,
        topology: TopologySection {
            devices: Some(devices),
            ..TopologySection::default()
        },
        sensors: vec![],
        actuators: vec![],
        application: ApplicationSection {
            builtin: Some(app.into()),
            definition: None,
        },
        placement: PlacementSection {
            policy: policy.into(),
            module_to_place: None,
            pins: vec![],
            clients: vec![],
        },
        mobility: vec![],
        clustering: None,
    }
}

/// Cloud, `fog` heterogeneous level-1 devices `FogDevice-<i>` and `low`
/// level-2 devices `LowLevelFogDevice-<i>`, the i-th under `FogDevice-<parent_of(i)>`.
fn area_devices(fog: usize, low: usize, parent_of: impl Fn(usize) -> usize) -> Vec<DeviceEntry> {
    let mut devices = vec![device("cloud", 0, None, cloud_template())];
    for i in 0..fog {
        devices.push(device(&format!("FogDevice-{i}"), 1, Some("cloud"), heterogeneous_fog_template()));
    }
    for i in 0..low {
        devices.push(device(
            &format!("LowLevelFogDevice-{i}"),
            2,
            Some(&format!("FogDevice-{}", parent_of(i))),
            low_level_template(),
        ));
    }
    devices
}

fn snippet1(seed: u64) -> Scenario {
    let mut s = base_scenario("snippet1", seed, "client_main", area_devices(10, 0, |_| 0), "edge_ward");
    s.notes = vec!["A cloud and ten heterogeneous fog devices; each fog device carries a sensor and a display.".into()];
    s.sensors = vec![area_sensor(None)];
    s.actuators = vec![area_actuator()];
    s
}

fn master_worker(seed: u64) -> Scenario {
    let mut s = base_scenario("master_worker", seed, "master_worker", area_devices(2, 4, |i| i % 2), "edge_ward");
    s.sensors = vec![area_sensor(Some(100))];
    s.actuators = vec![area_actuator()];
    s
}

fn sequential(seed: u64) -> Scenario {
    let mut s = base_scenario("sequential", seed, "sequential", area_devices(2, 4, |i| i % 2), "edge_ward");
    s.sensors = vec![area_sensor(Some(100))];
    s.actuators = vec![area_actuator()];
    s
}

fn deadline_test(seed: u64) -> Scenario {
    let mut s = base_scenario("deadline_test", seed, "deadline_test", vec![], "deadline_aware");
    s.topology = TopologySection {
        devices: None,
        generator: Some(GeneratorSpec {
            gateways: 2,
            leaves_per_gateway: 3,
            cloud: cloud_template(),
            gateway: gateway_template(),
            leaf: end_device_template(),
        }),
        gateway_selection: None,
    };
    s.sensors = vec![SensorEntry {
        name: "IoTSensor".into(),
        tuple_type: None,
        device: LEAVES.into(),
        latency: 6.0,
        interval_ms: 5.0.into(),
        max_tuples: None,
    }];
    s.actuators = vec![ActuatorEntry {
        name: "a-{device}".into(),
        consumed_tuple_type: "IoTActuator".into(),
        device: LEAVES.into(),
        latency: 1.0,
    }];
    s.placement = PlacementSection {
        policy: "deadline_aware".into(),
        module_to_place: Some("mainModule".into()),
        pins: vec![
            PinEntry {
                module: "storageModule".into(),
                device: "cloud".into(),
            },
            PinEntry {
                module: "clientModule".into(),
                device: LEAVES.into(),
            },
        ],
        clients: vec![ClientEntry {
            device: LEAVES.into(),
            module: "mainModule".into(),
            deadline: uniform(3.0, 5.0),
            additional_mips: uniform(0.0, 500.0),
        }],
    };
    s
}

/// Leaves hang off FogDevice-1..3; about half of them move under FogDevice-0
/// at t = 100 ms.
fn mobility_demo(seed: u64) -> Scenario {
    let mut s = base_scenario("mobility_demo", seed, "client_main", area_devices(4, 6, |i| 1 + i % 3), "cloud_only");
    s.horizon_ms = 2000.0;
    s.sensors = vec![area_sensor(None)];
    s.actuators = vec![area_actuator()];
    let mut coin = RngStream::named(seed, "mobility");
    s.mobility = (0..6)
        .filter(|_| coin.bernoulli(0.5))
        .map(|i| MobilityDoc {
            device: format!("LowLevelFogDevice-{i}"),
            at_ms: 100.0,
            new_parent: "FogDevice-0".into(),
        })
        .collect();
    s
}

/// Leaves start without a parent at random coordinates, are attached to the
/// nearest fog device, then grouped into clusters.
fn cluster_demo(seed: u64) -> Scenario {
    let mut devices = vec![device("cloud", 0, None, cloud_template())];
    for i in 0..4 {
        let mut t = heterogeneous_fog_template();
        t.x = (10.0 + 5.0 * (i % 2) as f64).into();
        t.y = (15.0 + 5.0 * (i / 2) as f64).into();
        devices.push(device(&format!("FogDevice-{i}"), 1, Some("cloud"), t));
    }
    for i in 0..8 {
        let mut t = low_level_template();
        t.x = uniform(10.0, 20.0);
        t.y = uniform(15.0, 25.0);
        devices.push(device(&format!("LowLevelFogDevice-{i}"), 2, None, t));
    }
    let mut s = base_scenario("cluster_demo", seed, "sequential", devices, "edge_ward");
    s.topology.gateway_selection = Some(GatewaySelection {
        max_number: default_max_number(),
    });
    s.clustering = Some(ClusteringSection {
        level: 2,
        cluster_distance: default_cluster_distance(),
    });
    s.sensors = vec![area_sensor(Some(100))];
    s.actuators = vec![area_actuator()];
    s
}

fn healthcare(seed: u64) -> Result<Scenario, ScenarioError> {
    let mut devices = vec![device("cloud", 0, None, cloud_template())];
    for g in 0..2 {
        let mut t = gateway_template();
        t.x = (10.0 * g as f64).into();
        devices.push(device(&format!("g-{g}"), 1, Some("cloud"), t));
    }
    for g in 0..2 {
        for j in 0..3 {
            let mut t = end_device_template();
            let cx = 10.0 * g as f64;
            t.x = uniform(cx - 1.5, cx + 1.5);
            t.y = uniform(-1.5, 1.5);
            devices.push(device(&format!("e-{g}-{j}"), 2, None, t));
        }
    }
    let mut s = base_scenario("healthcare", seed, "healthcare", devices, "deadline_aware");
    s.notes = vec![
        "Three tiers: cloud, two gateways g-0 and g-1, three wearable end devices per gateway.".into(),
        "End devices start unattached and join the nearest gateway; clusters are formed among them.".into(),
        "Vitals sensors emit every U[5, 15) ms, at most 100 tuples each.".into(),
        "clientModule runs on every end device, storageModule in the cloud; analysisModule is placed per client by deadline (U[3, 5) ms) with U[0, 500) extra MI/s; eventModule goes to the cloud.".into(),
        "About half of the clients served from the cloud move to the other gateway at t = 100 ms.".into(),
        "Tier count, fan-out and tuple sizes are defaults of this scenario; tuple sizes keep every stage ahead of its arrivals.".into(),
    ];
    s.topology.gateway_selection = Some(GatewaySelection {
        max_number: default_max_number(),
    });
    s.clustering = Some(ClusteringSection {
        level: 2,
        cluster_distance: default_cluster_distance(),
    });
    s.sensors = vec![SensorEntry {
        name: "Vitals".into(),
        tuple_type: None,
        device: LEAVES.into(),
        latency: 6.0,
        interval_ms: uniform(5.0, 15.0),
        max_tuples: Some(100),
    }];
    s.actuators = vec![ActuatorEntry {
        name: "display-{device}".into(),
        consumed_tuple_type: "Display".into(),
        device: LEAVES.into(),
        latency: 1.0,
    }];
    s.placement = PlacementSection {
        policy: "deadline_aware".into(),
        module_to_place: Some("analysisModule".into()),
        pins: vec![
            PinEntry {
                module: "storageModule".into(),
                device: "cloud".into(),
            },
            PinEntry {
                module: "clientModule".into(),
                device: LEAVES.into(),
            },
        ],
        clients: vec![ClientEntry {
            device: LEAVES.into(),
            module: "analysisModule".into(),
            deadline: uniform(3.0, 5.0),
            additional_mips: uniform(0.0, 500.0),
        }],
    };

    // Only clients whose analysis instance sits in the cloud can move without
    // stranding their tuples; find them by placing once.
    let prepared = s.materialize(&RunOptions::default())?;
    let topo = &prepared.topology;
    let root = topo.root().expect("healthcare topology has a cloud");
    let mut coin = RngStream::named(seed, "mobility");
    for inst in prepared.placement.instances() {
        let Some(client) = inst.client_scope else { continue };
        if inst.module != "analysisModule" || inst.host != root || !coin.bernoulli(0.5) {
            continue;
        }
        let current = topo.device(client).expect("client exists").parent;
        let other = topo
            .devices_at_level(1)
            .find(|g| Some(g.id) != current)
            .map(|g| g.name.clone());
        if let Some(dest) = other {
            s.mobility.push(MobilityDoc {
                device: topo.name_of(client).to_string(),
                at_ms: 100.0,
                new_parent: dest,
            });
        }
    }
    Ok(s)
}

/// Builds a stock scenario with every random field drawn from `seed`.
pub fn generate_builtin(name: &str, seed: u64) -> Result<Scenario, ScenarioError> {
    let s = match name {
        "snippet1" => snippet1(seed),
        "master_worker" => master_worker(seed),
        "sequential" => sequential(seed),
        "deadline_test" => deadline_test(seed),
        "mobility_demo" => mobility_demo(seed),
        "cluster_demo" => cluster_demo(seed),
        "healthcare" => healthcare(seed)?,
        _ => return Err(ScenarioError::UnknownBuiltin { name: name.into() }),
    };
    Ok(s.materialize(&RunOptions::default())?.scenario)
}

/// Device name to `(module, deadline)` pairs, as declared in the scenario.
pub fn client_deadlines(s: &Scenario) -> BTreeMap<String, Vec<(String, f64)>> {
    let mut out: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for c in &s.placement.clients {
        out.entry(c.device.clone())
            .or_default()
            .push((c.module.clone(), fixed(&c.deadline)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_validates_and_round_trips() {
        for name in BUILTIN_SCENARIOS {
            let s = generate_builtin(name, 11).unwrap();
            let text = scenario_to_json(&s);
            let back = parse_scenario_str(&text).unwrap();
            assert_eq!(back, s, "{name}");
            let again = back.materialize(&RunOptions::default()).unwrap();
            assert_eq!(again.scenario, s, "{name}: explicit form is a fixed point");
        }
    }

    #[test]
    fn unknown_builtin() {
        assert!(matches!(
            generate_builtin("nope", 1),
            Err(ScenarioError::UnknownBuiltin { .. })
        ));
    }

    #[test]
    fn snippet1_shape() {
        let p = generate_builtin("snippet1", 3)
            .unwrap()
            .materialize(&RunOptions::default())
            .unwrap();
        let t = &p.topology;
        assert_eq!(t.devices().len(), 11);
        let cloud = t.device(t.root().unwrap()).unwrap();
        assert_eq!(cloud.busy_power, 1648.0);
        assert_eq!(cloud.idle_power, 1332.0);
        for d in t.devices_at_level(1) {
            assert_eq!(d.uplink_latency, 10.0);
            assert!((12000.0..15000.0).contains(&d.mips));
            assert!((4000.0..8000.0).contains(&d.ram));
            assert!((200.0..300.0).contains(&d.up_bw));
            assert!((500.0..1000.0).contains(&d.down_bw));
            assert!((100.0..120.0).contains(&d.busy_power));
            assert!((70.0..75.0).contains(&d.idle_power));
        }
    }

    #[test]
    fn deadline_test_shape() {
        let p = generate_builtin("deadline_test", 7)
            .unwrap()
            .materialize(&RunOptions::default())
            .unwrap();
        assert_eq!(p.topology.devices_at_level(1).count(), 2);
        assert_eq!(p.topology.devices_at_level(2).count(), 6);
        assert_eq!(p.pins.entries.iter().filter(|(m, _)| m == "clientModule").count(), 6);
        assert_eq!(p.pins.entries[0], ("storageModule".to_string(), "cloud".to_string()));
        for c in &p.scenario.placement.clients {
            let (d, e) = (fixed(&c.deadline), fixed(&c.additional_mips));
            assert!((3.0..5.0).contains(&d) && (0.0..500.0).contains(&e));
        }
    }

    #[test]
    fn mobility_demo_moves_some_leaves_to_fog_device_0() {
        let mut moved = 0;
        for seed in 0..20 {
            let s = generate_builtin("mobility_demo", seed).unwrap();
            assert!(s.mobility.iter().all(|m| m.at_ms == 100.0 && m.new_parent == "FogDevice-0"));
            moved += s.mobility.len();
        }
        // 120 fair coins
        assert!((40..=80).contains(&moved), "{moved}");
    }

    #[test]
    fn seed_changes_draws() {
        assert_ne!(generate_builtin("snippet1", 1).unwrap(), generate_builtin("snippet1", 2).unwrap());
        assert_eq!(generate_builtin("snippet1", 1).unwrap(), generate_builtin("snippet1", 1).unwrap());
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_scenario_str("") {
            Err(ScenarioError::Syntax { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match parse_scenario_str("{\n  \"name\": 3,\n") {
            Err(ScenarioError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_are_exhaustive() {
        let mut s = generate_builtin("deadline_test", 1).unwrap();
        s.placement.policy = "fastest".into();
        s.mobility.push(MobilityDoc {
            device: "ghost".into(),
            at_ms: 5.0,
            new_parent: "cloud".into(),
        });
        s.horizon_ms = -1.0;
        match s.materialize(&RunOptions::default()) {
            Err(ScenarioError::Invalid(errs)) => {
                assert_eq!(errs.len(), 3, "{errs:?}");
                assert!(errs.iter().any(|e| e.contains("cloud_only, edge_ward, deadline_aware")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sensor_naming_rule_enforced() {
        let mut s = generate_builtin("deadline_test", 1).unwrap();
        s.sensors[0].name = "s-0-0".into();
        let Err(ScenarioError::Invalid(errs)) = s.materialize(&RunOptions::default()) else {
            panic!("expected a validation error");
        };
        assert!(errs.iter().any(|e| e.contains("s-0-0")));
    }

    #[test]
    fn overrides_apply_and_echo() {
        let s = generate_builtin("deadline_test", 1).unwrap();
        let p = s
            .materialize(&RunOptions {
                seed: Some(99),
                horizon_ms: Some(500.0),
                policy: Some("cloud_only".into()),
                record_events: false,
            })
            .unwrap();
        assert_eq!(p.seed, 99);
        assert_eq!(p.scenario.seed, 99);
        assert_eq!(p.horizon.as_ms(), 500.0);
        assert_eq!(p.policy, PlacementPolicy::CloudOnly);
        assert_eq!(p.scenario.placement.policy, "cloud_only");
    }

    #[test]
    fn healthcare_moves_only_cloud_served_clients() {
        for seed in 0..10 {
            let s = generate_builtin("healthcare", seed).unwrap();
            let p = s.materialize(&RunOptions::default()).unwrap();
            let root = p.topology.root().unwrap();
            for m in &p.mobility {
                let inst = p
                    .placement
                    .instances()
                    .iter()
                    .find(|i| i.module == "analysisModule" && i.client_scope == Some(m.device))
                    .unwrap();
                assert_eq!(inst.host, root);
            }
            assert!(p.clusters.is_some());
            assert_eq!(p.topology.devices_at_level(2).count(), 6);
            assert!(p.topology.validate().is_empty());
        }
    }
}
