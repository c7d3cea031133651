//! Module placement policies.
//!
//! Every policy starts from the pin list: pinned instances are created first
//! and count against their host's MIPS ledger. The policies then decide where
//! the remaining module instances go.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app::Application;
use crate::topology::{DeviceId, FogDevice, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleInstance {
    pub id: InstanceId,
    pub module: String,
    pub host: DeviceId,
    /// End device whose tuples this instance is dedicated to.
    pub client_scope: Option<DeviceId>,
    /// Service rate in MI/s: base module rate plus the client's extra request.
    pub allocated_mips: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    instances: Vec<ModuleInstance>,
    used_mips: BTreeMap<DeviceId, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PinList {
    /// `(module, device name)` pairs in pin order.
    pub entries: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PlacementPolicy {
    CloudOnly,
    EdgeWard,
    DeadlineAware { module_to_place: String },
}

pub const POLICY_NAMES: [&str; 3] = ["cloud_only", "edge_ward", "deadline_aware"];

impl PlacementPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            PlacementPolicy::CloudOnly => "cloud_only",
            PlacementPolicy::EdgeWard => "edge_ward",
            PlacementPolicy::DeadlineAware { .. } => "deadline_aware",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlacementError {
    #[error("unknown module {0:?}")]
    UnknownModule(String),
    #[error("unknown device {0:?}")]
    UnknownDevice(String),
    #[error("topology has no root device")]
    NoRoot,
    #[error("device {device:?} has no {what} entry for module {module:?}")]
    MissingClientInfo {
        device: String,
        module: String,
        what: &'static str,
    },
    #[error("gateway {0:?} has no parent to fall back to")]
    NoFallback(String),
    #[error("module {module:?} needs {needed} MI/s but even the root has only {available} free (deficit {deficit})")]
    Unplaceable {
        module: String,
        needed: f64,
        available: f64,
        deficit: f64,
    },
    #[error("unknown placement policy {0:?}; valid options are cloud_only, edge_ward, deadline_aware")]
    UnknownPolicy(String),
}

/// `true` iff the device can take `base + extra` more MI/s on top of `used`.
/// The comparison is strict: filling a device exactly to capacity fails.
pub fn capacity_check(device: &FogDevice, used: f64, base: f64, extra: f64) -> bool {
    used + base + extra < device.mips
}

pub fn pin_module(
    mut pins: PinList,
    app: &Application,
    topo: &Topology,
    module: &str,
    device: &str,
) -> Result<PinList, PlacementError> {
    if !app.has_module(module) {
        return Err(PlacementError::UnknownModule(module.to_string()));
    }
    topo.id_of(device)
        .map_err(|_| PlacementError::UnknownDevice(device.to_string()))?;
    pins.entries.push((module.to_string(), device.to_string()));
    Ok(pins)
}

impl Placement {
    pub fn instances(&self) -> &[ModuleInstance] {
        &self.instances
    }

    pub fn instance(&self, id: InstanceId) -> &ModuleInstance {
        &self.instances[id.0]
    }

    pub fn used_mips(&self, device: DeviceId) -> f64 {
        self.used_mips.get(&device).copied().unwrap_or(0.0)
    }

    pub fn ledger(&self) -> &BTreeMap<DeviceId, f64> {
        &self.used_mips
    }

    pub fn instances_on(&self, device: DeviceId) -> impl Iterator<Item = &ModuleInstance> {
        self.instances.iter().filter(move |i| i.host == device)
    }

    pub fn count_on(&self, device: DeviceId, module: &str) -> usize {
        self.instances_on(device).filter(|i| i.module == module).count()
    }

    fn add(&mut self, module: &str, host: DeviceId, client_scope: Option<DeviceId>, allocated_mips: f64) -> InstanceId {
        let id = InstanceId(self.instances.len());
        self.instances.push(ModuleInstance {
            id,
            module: module.to_string(),
            host,
            client_scope,
            allocated_mips,
        });
        *self.used_mips.entry(host).or_insert(0.0) += allocated_mips;
        id
    }

    fn has_module(&self, module: &str) -> bool {
        self.instances.iter().any(|i| i.module == module)
    }

    /// The instance on `device` that serves `module` for tuples from
    /// `origin`: one scoped to that client if present, else an unscoped one.
    pub fn find_instance(&self, device: DeviceId, module: &str, origin: DeviceId) -> Option<InstanceId> {
        let mut unscoped = None;
        for inst in self.instances_on(device).filter(|i| i.module == module) {
            match inst.client_scope {
                Some(c) if c == origin => return Some(inst.id),
                None if unscoped.is_none() => unscoped = Some(inst.id),
                _ => {}
            }
        }
        unscoped
    }

    /// Ledger rebuilt from the instance list.
    pub fn recomputed_ledger(&self) -> BTreeMap<DeviceId, f64> {
        let mut ledger = BTreeMap::new();
        for inst in &self.instances {
            *ledger.entry(inst.host).or_insert(0.0) += inst.allocated_mips;
        }
        ledger
    }
}

fn extra_mips(app: &Application, client: Option<DeviceId>, module: &str) -> f64 {
    client
        .and_then(|c| app.additional_mips_info.get(&c))
        .and_then(|m| m.get(module))
        .copied()
        .unwrap_or(0.0)
}

fn base_mips(app: &Application, module: &str) -> Result<f64, PlacementError> {
    app.module(module)
        .map(|m| m.mips)
        .ok_or_else(|| PlacementError::UnknownModule(module.to_string()))
}

/// Creates the pinned instances. A pin onto a leaf device is scoped to that
/// device; a pin elsewhere is shared.
pub fn apply_pins(app: &Application, topo: &Topology, pins: &PinList) -> Result<Placement, PlacementError> {
    let mut placement = Placement::default();
    for (module, device) in &pins.entries {
        let base = base_mips(app, module)?;
        let host = topo
            .id_of(device)
            .map_err(|_| PlacementError::UnknownDevice(device.clone()))?;
        if placement.count_on(host, module) > 0 {
            continue;
        }
        let scope = topo.is_leaf(host).then_some(host);
        placement.add(module, host, scope, base + extra_mips(app, scope, module));
    }
    Ok(placement)
}

fn root(topo: &Topology) -> Result<DeviceId, PlacementError> {
    topo.root().ok_or(PlacementError::NoRoot)
}

/// Pins, then one shared instance of every remaining module on the cloud.
pub fn cloud_only_place(app: &Application, topo: &Topology, pins: &PinList) -> Result<Placement, PlacementError> {
    let mut placement = apply_pins(app, topo, pins)?;
    place_rest_on_root(app, topo, &mut placement)?;
    Ok(placement)
}

fn place_rest_on_root(app: &Application, topo: &Topology, placement: &mut Placement) -> Result<(), PlacementError> {
    let root = root(topo)?;
    for m in &app.modules {
        if !placement.has_module(&m.name) {
            placement.add(&m.name, root, None, m.mips);
        }
    }
    Ok(())
}

/// Devices whose sensors start a dataflow; all leaves when no sensor exists.
fn source_devices(topo: &Topology) -> Vec<DeviceId> {
    let mut leaves: Vec<DeviceId> = topo.sensors().iter().map(|s| s.gateway_device).collect();
    if leaves.is_empty() {
        leaves = topo.devices().iter().map(|d| d.id).filter(|&d| topo.is_leaf(d)).collect();
    }
    leaves.sort();
    leaves.dedup();
    leaves
}

/// Walks every sensor-to-cloud path and puts each unpinned module on the
/// lowest device, at or above its predecessor's host, with enough free MIPS.
/// Instances already on the path are reused.
pub fn edge_ward_place(app: &Application, topo: &Topology, pins: &PinList) -> Result<Placement, PlacementError> {
    let mut placement = apply_pins(app, topo, pins)?;
    let pinned: Vec<&str> = pins.entries.iter().map(|(m, _)| m.as_str()).collect();
    let order = app.modules_in_flow_order();
    for leaf in source_devices(topo) {
        let path = topo.path_to_root(leaf);
        let mut floor = 0;
        for module in &order {
            let serving = |placement: &Placement, from: usize| {
                path.iter()
                    .enumerate()
                    .skip(from)
                    .find(|(_, &d)| placement.find_instance(d, module, leaf).is_some())
                    .map(|(i, _)| i)
            };
            if pinned.contains(&module.as_str()) {
                if let Some(i) = serving(&placement, 0) {
                    floor = floor.max(i);
                }
                continue;
            }
            if let Some(i) = serving(&placement, floor) {
                floor = i;
                continue;
            }
            let need = base_mips(app, module)?;
            let slot = path.iter().enumerate().skip(floor).find(|(_, &d)| {
                let dev = topo.device(d).expect("path device exists");
                dev.mips - placement.used_mips(d) >= need
            });
            match slot {
                Some((i, &d)) => {
                    placement.add(module, d, None, need);
                    floor = i;
                }
                None => {
                    let top = *path.last().expect("path is non-empty");
                    let available = topo.device(top).map(|d| d.mips).unwrap_or(0.0) - placement.used_mips(top);
                    return Err(PlacementError::Unplaceable {
                        module: module.clone(),
                        needed: need,
                        available,
                        deficit: need - available,
                    });
                }
            }
        }
    }
    Ok(placement)
}

/// Per gateway (level-1 device), serves its children in ascending deadline
/// order: each child's instance of `module_to_place` goes on the gateway while
/// the strict capacity check passes, otherwise on the gateway's parent with
/// no capacity check. Modules that still have no instance go to the cloud.
pub fn deadline_aware_place(
    app: &Application,
    topo: &Topology,
    pins: &PinList,
    module_to_place: &str,
) -> Result<Placement, PlacementError> {
    let mut placement = apply_pins(app, topo, pins)?;
    let base = base_mips(app, module_to_place)?;
    for gateway in topo.devices_at_level(1) {
        let mut children = Vec::new();
        for child in topo.children(gateway.id) {
            let lookup = |info: &crate::app::DeviceModuleValues, what| {
                info.get(&child)
                    .and_then(|m| m.get(module_to_place))
                    .copied()
                    .ok_or_else(|| PlacementError::MissingClientInfo {
                        device: topo.name_of(child).to_string(),
                        module: module_to_place.to_string(),
                        what,
                    })
            };
            let deadline = lookup(&app.deadline_info, "deadline")?;
            let extra = lookup(&app.additional_mips_info, "additional mips")?;
            children.push((deadline, child, extra));
        }
        children.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, child, extra) in children {
            let need = base + extra;
            if capacity_check(gateway, placement.used_mips(gateway.id), base, extra) {
                placement.add(module_to_place, gateway.id, Some(child), need);
            } else {
                let parent = gateway
                    .parent
                    .ok_or_else(|| PlacementError::NoFallback(gateway.name.clone()))?;
                placement.add(module_to_place, parent, Some(child), need);
            }
        }
    }
    place_rest_on_root(app, topo, &mut placement)?;
    Ok(placement)
}

pub fn place(
    policy: &PlacementPolicy,
    app: &Application,
    topo: &Topology,
    pins: &PinList,
) -> Result<Placement, PlacementError> {
    match policy {
        PlacementPolicy::CloudOnly => cloud_only_place(app, topo, pins),
        PlacementPolicy::EdgeWard => edge_ward_place(app, topo, pins),
        PlacementPolicy::DeadlineAware { module_to_place } => deadline_aware_place(app, topo, pins, module_to_place),
    }
}
