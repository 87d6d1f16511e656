//! Process-aware anomaly detection testbed for a PLC-controlled water
//! tank.
//!
//! The crate simulates the whole loop in one process: a water tank under
//! four-threshold on/off control ([`plant`]), Modbus/TCP traffic between
//! sensor, PLC, and actuators ([`protocol`]), a man-in-the-middle channel
//! that injects false sensor data ([`wire`]), scenario execution and
//! dataset assembly ([`dataset`]), a from-scratch random forest detector
//! ([`forest`]), and evaluation against the labeled test set ([`eval`]).
//! [`pipeline`] ties the stages into one reproducible experiment driven
//! by a master seed.
//!
//! Start with the runnable examples:
//!
//! ```text
//! cargo run --release --example simulate_tank
//! cargo run --release --example modbus_frames
//! cargo run --release --example mitm_channel
//! cargo run --release --example collect_dataset
//! cargo run --release --example grid_search
//! cargo run --release --example train_and_evaluate
//! cargo run --release --example full_pipeline
//! ```
//!
//! or run the experiment end to end with the `tankguard` binary:
//!
//! ```text
//! tankguard pipeline --seed 42 --out runs/demo
//! ```

pub mod config;
pub mod dataset;
pub mod eval;
pub mod forest;
pub mod pipeline;
pub mod plant;
pub mod protocol;
pub mod seeds;
pub mod wire;

pub use config::Config;
pub use dataset::{Dataset, Intensity, Label, Provenance, SampleRecord, ScenarioConfig};
pub use eval::{ConfusionMatrix, EvalReport, Metrics};
pub use forest::{Forest, Hyperparams};
pub use pipeline::{PipelineConfig, PipelineError};
pub use plant::{PlantParams, PlantState, SafetyStatus, Thresholds};
pub use protocol::{ModbusFrame, Pdu, RegisterMap};
pub use wire::{AttackConfig, Channel, SignPolicy};
