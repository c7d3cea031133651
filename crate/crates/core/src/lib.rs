//! Discrete-event simulation of fog/edge computing environments.
//!
//! A run wires four layers together: a device hierarchy ([`topology`]), a
//! sense-process-actuate application ([`app`]), a placement of application
//! modules onto devices ([`placement`]) and the event-driven execution of it
//! all ([`runtime`]) on the [`kernel`]. [`metrics`] collects latency, energy,
//! network usage and cost; [`scenario`] and [`report`] handle the file formats
//! and stock scenarios.

pub mod app;
pub mod kernel;
pub mod metrics;
pub mod placement;
pub mod report;
pub mod runtime;
pub mod scenario;
pub mod topology;

pub use app::{Application, Tuple};
pub use kernel::{Kernel, RngStream, SimTime};
pub use metrics::MetricsReport;
pub use placement::{Placement, PlacementPolicy};
pub use report::{ReportDocument, ReportFormat};
pub use runtime::{run, RunConfig, RunOutput};
pub use scenario::{generate_builtin, parse_scenario, run_scenario, Scenario};
pub use topology::{DeviceId, Topology};
