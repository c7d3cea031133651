//! Run accounting: loop latency, energy, network usage, cost and per-type
//! processing delay.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app::AppLoop;
use crate::kernel::SimTime;
use crate::topology::{DeviceId, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("metrics already finalized")]
    AlreadyFinalized,
    #[error("time went backwards for device {device}: {t} < {last}")]
    TimeReversal { device: DeviceId, t: SimTime, last: SimTime },
}

/// Linear power model state of one device.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLedger {
    pub busy_power: f64,
    pub idle_power: f64,
    pub last_update: SimTime,
    pub current_utilization: f64,
    /// Joules.
    pub accumulated_energy: f64,
}

impl EnergyLedger {
    pub fn new(busy_power: f64, idle_power: f64) -> Self {
        EnergyLedger {
            busy_power,
            idle_power,
            last_update: SimTime::ZERO,
            current_utilization: 0.0,
            accumulated_energy: 0.0,
        }
    }

    fn power(&self) -> f64 {
        self.idle_power + (self.busy_power - self.idle_power) * self.current_utilization
    }

    fn advance(&mut self, t: SimTime) {
        let dt_s = (t.as_ms() - self.last_update.as_ms()) / 1000.0;
        self.accumulated_energy += dt_s * self.power();
        self.last_update = t;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopStats {
    pub label: String,
    pub sequence: Vec<String>,
    pub count: u64,
    pub mean_ms: f64,
    pub samples_ms: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkUsage {
    pub total_kb: f64,
    /// Size times link latency, summed over transmissions.
    pub usage_kb_ms: f64,
}

/// Where every tuple ended up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleAccounting {
    /// Lineage roots: sensor emissions and periodic edge firings.
    pub emitted: u64,
    /// Tuples produced by module processing.
    pub derived: u64,
    pub processed: u64,
    pub delivered: u64,
    /// Travelling, queued or in service when the run stopped.
    pub in_flight: u64,
    /// Sum over processings of (1 - outputs produced).
    pub derivation_shortfall: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub horizon_ms: f64,
    pub seed: u64,
    pub loops: Vec<LoopStats>,
    /// Joules per device, keyed by device name.
    pub energy_j: BTreeMap<String, f64>,
    pub network: NetworkUsage,
    pub total_cost: f64,
    pub cost_by_device: BTreeMap<String, f64>,
    /// Mean time from enqueue at an instance to processing completion.
    pub processing_delay_ms: BTreeMap<String, f64>,
    pub tuples: TupleAccounting,
}

#[derive(Clone, Debug)]
pub struct Metrics {
    device_names: Vec<String>,
    energy: Vec<EnergyLedger>,
    rates: Vec<f64>,
    cost: Vec<f64>,
    network: NetworkUsage,
    loops: Vec<LoopStats>,
    delay_sum: BTreeMap<String, (f64, u64)>,
    pub tuples: TupleAccounting,
    finalized: bool,
}

impl Metrics {
    pub fn new(topo: &Topology, loops: &[AppLoop]) -> Self {
        let devices = topo.devices();
        Metrics {
            device_names: devices.iter().map(|d| d.name.clone()).collect(),
            energy: devices
                .iter()
                .map(|d| EnergyLedger::new(d.busy_power, d.idle_power))
                .collect(),
            rates: devices.iter().map(|d| d.rate_per_mips).collect(),
            cost: vec![0.0; devices.len()],
            network: NetworkUsage::default(),
            loops: loops
                .iter()
                .map(|lp| LoopStats {
                    label: lp.label(),
                    sequence: lp.sequence.clone(),
                    ..Default::default()
                })
                .collect(),
            delay_sum: BTreeMap::new(),
            tuples: TupleAccounting::default(),
            finalized: false,
        }
    }

    pub fn energy_ledger(&self, device: DeviceId) -> &EnergyLedger {
        &self.energy[device.0]
    }

    /// Integrates the device's power since its last update, then switches to
    /// the new utilization. Values outside `[0, 1]` are clamped.
    pub fn record_utilization_change(&mut self, device: DeviceId, new_u: f64, t: SimTime) -> Result<(), MetricsError> {
        let ledger = &mut self.energy[device.0];
        if t < ledger.last_update {
            return Err(MetricsError::TimeReversal {
                device,
                t,
                last: ledger.last_update,
            });
        }
        let u = if (0.0..=1.0).contains(&new_u) {
            new_u
        } else {
            warn!("utilization {new_u} of {} clamped to [0, 1]", self.device_names[device.0]);
            new_u.clamp(0.0, 1.0)
        };
        ledger.advance(t);
        ledger.current_utilization = u;
        Ok(())
    }

    pub fn record_transmission(&mut self, nw_length: f64, latency: f64) {
        self.network.total_kb += nw_length;
        self.network.usage_kb_ms += nw_length * latency;
    }

    pub fn accrue_cost(&mut self, device: DeviceId, cpu_length: f64) {
        self.cost[device.0] += self.rates[device.0] * cpu_length;
    }

    pub fn record_loop_completion(&mut self, loop_index: usize, t_emit: SimTime, t_done: SimTime) {
        let sample = t_done.as_ms() - t_emit.as_ms();
        debug_assert!(sample >= 0.0);
        self.loops[loop_index].samples_ms.push(sample);
    }

    pub fn record_processing_delay(&mut self, tuple_type: &str, delay_ms: f64) {
        let entry = self.delay_sum.entry(tuple_type.to_string()).or_insert((0.0, 0));
        entry.0 += delay_ms;
        entry.1 += 1;
    }

    pub fn network(&self) -> NetworkUsage {
        self.network
    }

    pub fn total_cost(&self) -> f64 {
        self.cost.iter().sum()
    }

    /// Flushes energy to `t_end` and freezes the totals.
    pub fn finalize(&mut self, t_end: SimTime, seed: u64) -> Result<MetricsReport, MetricsError> {
        if self.finalized {
            return Err(MetricsError::AlreadyFinalized);
        }
        self.finalized = true;
        for (i, ledger) in self.energy.iter_mut().enumerate() {
            if t_end < ledger.last_update {
                return Err(MetricsError::TimeReversal {
                    device: DeviceId(i),
                    t: t_end,
                    last: ledger.last_update,
                });
            }
            ledger.advance(t_end);
        }
        let loops = self
            .loops
            .iter()
            .map(|lp| {
                let count = lp.samples_ms.len() as u64;
                let mean_ms = if count == 0 {
                    0.0
                } else {
                    lp.samples_ms.iter().sum::<f64>() / count as f64
                };
                LoopStats {
                    count,
                    mean_ms,
                    ..lp.clone()
                }
            })
            .collect();
        let names = &self.device_names;
        Ok(MetricsReport {
            horizon_ms: t_end.as_ms(),
            seed,
            loops,
            energy_j: names
                .iter()
                .cloned()
                .zip(self.energy.iter().map(|l| l.accumulated_energy))
                .collect(),
            network: self.network,
            total_cost: self.cost.iter().sum(),
            cost_by_device: names.iter().cloned().zip(self.cost.iter().copied()).collect(),
            processing_delay_ms: self
                .delay_sum
                .iter()
                .map(|(k, (sum, n))| (k.clone(), sum / *n as f64))
                .collect(),
            tuples: self.tuples,
        })
    }
}
