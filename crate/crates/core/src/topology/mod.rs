//! Physical layer: fog devices arranged in a hierarchy rooted at the cloud,
//! with sensors and actuators attached to edge devices.
//!
//! Level 0 is the cloud; levels grow toward the edge. A parent is always
//! exactly one level closer to the cloud than its child, except after a
//! mobility event that deliberately violates this (logged, not rejected).

mod cluster;
mod gateway;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::SimTime;

pub use cluster::{form_clusters, ClusterId, Clusters};
pub use gateway::{euclidean_distance, select_gateways};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub usize);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensorId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActuatorId(pub usize);

/// Everything needed to register a device; the id is assigned on insertion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub name: String,
    /// Processing capacity in MI per second.
    pub mips: f64,
    /// MB.
    pub ram: f64,
    /// kB per second toward the parent.
    pub up_bw: f64,
    /// kB per second toward children.
    pub down_bw: f64,
    pub level: u32,
    /// Currency per MI processed.
    pub rate_per_mips: f64,
    /// Watts at full utilization.
    pub busy_power: f64,
    /// Watts when idle.
    pub idle_power: f64,
    pub parent: Option<DeviceId>,
    /// Latency (ms) of the link between this device and its parent.
    pub uplink_latency: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FogDevice {
    pub id: DeviceId,
    pub name: String,
    pub mips: f64,
    pub ram: f64,
    pub up_bw: f64,
    pub down_bw: f64,
    pub level: u32,
    pub rate_per_mips: f64,
    pub busy_power: f64,
    pub idle_power: f64,
    pub parent: Option<DeviceId>,
    pub uplink_latency: f64,
    pub x: f64,
    pub y: f64,
}

impl FogDevice {
    fn from_spec(id: DeviceId, s: DeviceSpec) -> Self {
        FogDevice {
            id,
            name: s.name,
            mips: s.mips,
            ram: s.ram,
            up_bw: s.up_bw,
            down_bw: s.down_bw,
            level: s.level,
            rate_per_mips: s.rate_per_mips,
            busy_power: s.busy_power,
            idle_power: s.idle_power,
            parent: s.parent,
            uplink_latency: s.uplink_latency,
            x: s.x,
            y: s.y,
        }
    }
}

/// An IoT sensor emitting tuples at a fixed interval into its gateway device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub name: String,
    /// Must equal `name`: a sensor is named after the tuple type it emits.
    pub tuple_type: String,
    pub gateway_device: DeviceId,
    /// ms from sensor to gateway device.
    pub latency: f64,
    /// ms between consecutive emissions.
    pub emission_interval: f64,
    pub max_tuples: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Actuator {
    pub name: String,
    pub consumed_tuple_type: String,
    pub gateway_device: DeviceId,
    pub latency: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityEntry {
    pub device: DeviceId,
    pub at_time: SimTime,
    pub new_parent: DeviceId,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Two devices closer than this (strictly) are cluster neighbours.
    pub cluster_distance: f64,
    /// Initial value of the nearest-parent search.
    pub max_number: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            cluster_distance: 2.0,
            max_number: 9_999_999.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("duplicate device name {0:?}")]
    DuplicateName(String),
    #[error("device {name:?}: mips must be positive, got {mips}")]
    NonPositiveMips { name: String, mips: f64 },
    #[error("device {name:?}: power model requires busy >= idle >= 0 (busy {busy}, idle {idle})")]
    InvalidPower { name: String, busy: f64, idle: f64 },
    #[error("device {name:?}: {field} must be finite and non-negative, got {value}")]
    InvalidField {
        name: String,
        field: &'static str,
        value: f64,
    },
    #[error("unknown device {0}")]
    UnknownDevice(DeviceId),
    #[error("unknown device name {0:?}")]
    UnknownDeviceName(String),
    #[error("device {name:?} at level {level} cannot have parent {parent:?} at level {parent_level}")]
    LevelMismatch {
        name: String,
        level: u32,
        parent: String,
        parent_level: u32,
    },
    #[error("device {0:?}: only one level-0 device without a parent is allowed")]
    SecondRoot(String),
    #[error("level-0 device {0:?} cannot have a parent")]
    RootWithParent(String),
    #[error("topology has no level-0 root device")]
    NoRoot,
    #[error("device {0:?} has no parent")]
    Orphan(String),
    #[error("reparenting {device:?} under {new_parent:?} would create a cycle")]
    Cycle { device: String, new_parent: String },
    #[error("sensor {name:?} emits tuple type {tuple_type:?}; a sensor must be named after its tuple type")]
    SensorNaming { name: String, tuple_type: String },
    #[error("sensor {name:?}: emission interval must be positive, got {interval}")]
    InvalidInterval { name: String, interval: f64 },
    #[error("{what} {name:?}: latency must be finite and non-negative, got {latency}")]
    InvalidLatency {
        what: &'static str,
        name: String,
        latency: f64,
    },
    #[error("sensor {name:?} is attached to {device:?}, which is not a leaf device")]
    SensorNotOnLeaf { name: String, device: String },
    #[error("no candidate parent for orphan device {0:?}")]
    NoCandidateParent(String),
    #[error("mobility entry moves {0:?} under itself")]
    SelfParent(String),
}

/// The device hierarchy plus attached sensors and actuators.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Topology {
    devices: Vec<FogDevice>,
    sensors: Vec<Sensor>,
    actuators: Vec<Actuator>,
}

fn check_non_negative(name: &str, field: &'static str, value: f64) -> Result<(), TopologyError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(TopologyError::InvalidField {
            name: name.to_string(),
            field,
            value,
        })
    }
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn devices(&self) -> &[FogDevice] {
        &self.devices
    }

    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    pub fn actuators(&self) -> &[Actuator] {
        &self.actuators
    }

    pub fn device(&self, id: DeviceId) -> Result<&FogDevice, TopologyError> {
        self.devices.get(id.0).ok_or(TopologyError::UnknownDevice(id))
    }

    pub(crate) fn device_mut(&mut self, id: DeviceId) -> Result<&mut FogDevice, TopologyError> {
        self.devices
            .get_mut(id.0)
            .ok_or(TopologyError::UnknownDevice(id))
    }

    pub fn sensor(&self, id: SensorId) -> Option<&Sensor> {
        self.sensors.get(id.0)
    }

    pub fn actuator(&self, id: ActuatorId) -> Option<&Actuator> {
        self.actuators.get(id.0)
    }

    pub fn id_of(&self, name: &str) -> Result<DeviceId, TopologyError> {
        self.devices
            .iter()
            .find(|d| d.name == name)
            .map(|d| d.id)
            .ok_or_else(|| TopologyError::UnknownDeviceName(name.to_string()))
    }

    pub fn name_of(&self, id: DeviceId) -> &str {
        self.devices.get(id.0).map(|d| d.name.as_str()).unwrap_or("?")
    }

    /// Registers a device. A named parent must already exist and sit exactly
    /// one level closer to the cloud.
    pub fn add_device(&mut self, spec: DeviceSpec) -> Result<DeviceId, TopologyError> {
        if self.devices.iter().any(|d| d.name == spec.name) {
            return Err(TopologyError::DuplicateName(spec.name));
        }
        if !(spec.mips.is_finite() && spec.mips > 0.0) {
            return Err(TopologyError::NonPositiveMips {
                name: spec.name,
                mips: spec.mips,
            });
        }
        if !(spec.idle_power >= 0.0 && spec.busy_power >= spec.idle_power && spec.busy_power.is_finite()) {
            return Err(TopologyError::InvalidPower {
                name: spec.name,
                busy: spec.busy_power,
                idle: spec.idle_power,
            });
        }
        for (field, value) in [
            ("ram", spec.ram),
            ("up_bw", spec.up_bw),
            ("down_bw", spec.down_bw),
            ("rate_per_mips", spec.rate_per_mips),
            ("uplink_latency", spec.uplink_latency),
        ] {
            check_non_negative(&spec.name, field, value)?;
        }
        for (field, value) in [("x", spec.x), ("y", spec.y)] {
            if !value.is_finite() {
                return Err(TopologyError::InvalidField {
                    name: spec.name,
                    field,
                    value,
                });
            }
        }
        match spec.parent {
            Some(parent) => {
                if spec.level == 0 {
                    return Err(TopologyError::RootWithParent(spec.name));
                }
                let p = self.device(parent)?;
                if p.level + 1 != spec.level {
                    return Err(TopologyError::LevelMismatch {
                        name: spec.name,
                        level: spec.level,
                        parent: p.name.clone(),
                        parent_level: p.level,
                    });
                }
            }
            None => {
                if spec.level == 0 && self.root().is_some() {
                    return Err(TopologyError::SecondRoot(spec.name));
                }
            }
        }
        let id = DeviceId(self.devices.len());
        self.devices.push(FogDevice::from_spec(id, spec));
        Ok(id)
    }

    pub fn attach_sensor(&mut self, sensor: Sensor) -> Result<SensorId, TopologyError> {
        self.device(sensor.gateway_device)?;
        if sensor.name.trim() != sensor.tuple_type.trim() {
            return Err(TopologyError::SensorNaming {
                name: sensor.name,
                tuple_type: sensor.tuple_type,
            });
        }
        if !(sensor.emission_interval.is_finite() && sensor.emission_interval > 0.0) {
            return Err(TopologyError::InvalidInterval {
                name: sensor.name,
                interval: sensor.emission_interval,
            });
        }
        if !(sensor.latency.is_finite() && sensor.latency >= 0.0) {
            return Err(TopologyError::InvalidLatency {
                what: "sensor",
                name: sensor.name,
                latency: sensor.latency,
            });
        }
        let id = SensorId(self.sensors.len());
        self.sensors.push(sensor);
        Ok(id)
    }

    pub fn attach_actuator(&mut self, actuator: Actuator) -> Result<ActuatorId, TopologyError> {
        self.device(actuator.gateway_device)?;
        if !(actuator.latency.is_finite() && actuator.latency >= 0.0) {
            return Err(TopologyError::InvalidLatency {
                what: "actuator",
                name: actuator.name,
                latency: actuator.latency,
            });
        }
        let id = ActuatorId(self.actuators.len());
        self.actuators.push(actuator);
        Ok(id)
    }

    /// The level-0 device without a parent.
    pub fn root(&self) -> Option<DeviceId> {
        self.devices
            .iter()
            .find(|d| d.level == 0 && d.parent.is_none())
            .map(|d| d.id)
    }

    /// Children of `id` in ascending id order.
    pub fn children(&self, id: DeviceId) -> Vec<DeviceId> {
        self.devices
            .iter()
            .filter(|d| d.parent == Some(id))
            .map(|d| d.id)
            .collect()
    }

    pub fn is_leaf(&self, id: DeviceId) -> bool {
        !self.devices.iter().any(|d| d.parent == Some(id))
    }

    pub fn devices_at_level(&self, level: u32) -> impl Iterator<Item = &FogDevice> {
        self.devices.iter().filter(move |d| d.level == level)
    }

    /// Devices from `from` up to the root, inclusive. Stops early if a cycle
    /// is detected.
    pub fn path_to_root(&self, from: DeviceId) -> Vec<DeviceId> {
        let mut path = vec![from];
        let mut cur = from;
        while let Some(p) = self.devices.get(cur.0).and_then(|d| d.parent) {
            if path.contains(&p) {
                break;
            }
            path.push(p);
            cur = p;
        }
        path
    }

    fn is_ancestor_or_self(&self, candidate: DeviceId, of: DeviceId) -> bool {
        self.path_to_root(of).contains(&candidate)
    }

    /// Replaces `device`'s parent. Returns the previous parent and whether the
    /// new parent breaks the one-level-up rule (applied anyway).
    pub fn reparent(
        &mut self,
        device: DeviceId,
        new_parent: DeviceId,
    ) -> Result<(Option<DeviceId>, bool), TopologyError> {
        let level = self.device(device)?.level;
        let parent_level = self.device(new_parent)?.level;
        if device == new_parent || self.is_ancestor_or_self(device, new_parent) {
            return Err(TopologyError::Cycle {
                device: self.name_of(device).to_string(),
                new_parent: self.name_of(new_parent).to_string(),
            });
        }
        let mismatch = parent_level + 1 != level;
        let d = self.device_mut(device)?;
        let old = d.parent.replace(new_parent);
        Ok((old, mismatch))
    }

    pub fn validate_mobility(&self, entry: &MobilityEntry) -> Result<(), TopologyError> {
        let d = self.device(entry.device)?;
        self.device(entry.new_parent)?;
        if entry.device == entry.new_parent {
            return Err(TopologyError::SelfParent(d.name.clone()));
        }
        Ok(())
    }

    /// Checks the hierarchy: one root, every other device parented one level
    /// up, no cycles, and sensors on leaf devices.
    pub fn validate(&self) -> Vec<TopologyError> {
        let mut errors = Vec::new();
        let roots: Vec<_> = self
            .devices
            .iter()
            .filter(|d| d.level == 0 && d.parent.is_none())
            .collect();
        if roots.is_empty() {
            errors.push(TopologyError::NoRoot);
        }
        for extra in roots.iter().skip(1) {
            errors.push(TopologyError::SecondRoot(extra.name.clone()));
        }
        for d in &self.devices {
            match d.parent {
                None if d.level > 0 => errors.push(TopologyError::Orphan(d.name.clone())),
                None => {}
                Some(p) => match self.devices.get(p.0) {
                    None => errors.push(TopologyError::UnknownDevice(p)),
                    Some(pd) if pd.level + 1 != d.level => errors.push(TopologyError::LevelMismatch {
                        name: d.name.clone(),
                        level: d.level,
                        parent: pd.name.clone(),
                        parent_level: pd.level,
                    }),
                    Some(_) => {}
                },
            }
            let path = self.path_to_root(d.id);
            if let Some(last) = path.last() {
                if self.devices[last.0].parent.is_some() {
                    errors.push(TopologyError::Cycle {
                        device: d.name.clone(),
                        new_parent: self.name_of(self.devices[last.0].parent.unwrap()).to_string(),
                    });
                }
            }
        }
        for s in &self.sensors {
            if !self.is_leaf(s.gateway_device) {
                errors.push(TopologyError::SensorNotOnLeaf {
                    name: s.name.clone(),
                    device: self.name_of(s.gateway_device).to_string(),
                });
            }
        }
        errors
    }

    /// Parent links keyed by device name, for dumps.
    pub fn parent_table(&self) -> BTreeMap<String, Option<String>> {
        self.devices
            .iter()
            .map(|d| (d.name.clone(), d.parent.map(|p| self.name_of(p).to_string())))
            .collect()
    }
}
