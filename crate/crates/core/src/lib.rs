//! Networked-microgrid frequency simulator with barrier-function safety
//! controllers on grid-forming inverters.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: droop dynamics of inverters and generators, the ride-through
//!   relay of grid-following inverters.
//! - [`dac`]: the per-inverter safety controller that rewrites set-points
//!   when frequency leaves `[ω_min, ω_max]`.
//! - [`network`]: lossless angle-based flow, breakers and islands.
//! - [`secondary`]: slow set-point dispatcher and the masking attack.
//! - [`engine`]: the fixed-step simulation loop, traces, metrics, sweeps.
//! - [`scenario`]: JSON scenario documents and the bundled cases.
//! - [`cli`]: `run`, `sweep` and `validate` commands behind the `dacgrid` binary.
//!
//! The `examples/` directory has one program per capability:
//!
//! ```text
//! cargo run --release --example dac_kernel
//! cargo run --release --example droop_step
//! cargo run --release --example islanding
//! cargo run --release --example transient_band
//! cargo run --release --example large_disturbance
//! cargo run --release --example setpoint_attack
//! cargo run --release --example size_sweep
//! ```
//!
//! A minimal run:
//!
//! ```no_run
//! use dacgrid::engine::run_scenario;
//! use dacgrid::scenario::load_bundled;
//!
//! let doc = load_bundled("transient_band").unwrap();
//! let out = run_scenario(&doc).unwrap();
//! println!("settled at {:.3} Hz", out.metrics.settled_frequency);
//! ```

pub mod cli;
pub mod dac;
pub mod engine;
pub mod model;
pub mod network;
pub mod scenario;
pub mod secondary;

pub use dac::{dac_compute, DacDecision, DacInputs, DacMode};
pub use engine::{run_scenario, Event, EventKind, Metrics, RunOutput, SimConfig, Trace, World};
pub use model::{DacConfig, InverterParams};
pub use scenario::{parse_and_validate, ScenarioDoc};
