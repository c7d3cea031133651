//! Fixtures shared by the benchmarks.

use fogsim::kernel::EventKind;
use fogsim::scenario::{generate_builtin, Prepared, RunOptions};

/// Materializes a builtin scenario with the given horizon.
pub fn prepared(name: &str, seed: u64, horizon_ms: f64) -> Prepared {
    generate_builtin(name, seed)
        .and_then(|s| {
            s.materialize(&RunOptions {
                horizon_ms: Some(horizon_ms),
                ..RunOptions::default()
            })
        })
        .expect("builtin scenarios materialize")
}

#[derive(Clone, Copy, Debug)]
pub struct Tick(pub u32);

impl EventKind for Tick {
    fn kind_name(&self) -> &'static str {
        "tick"
    }
}
