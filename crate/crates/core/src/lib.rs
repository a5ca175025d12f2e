//! Energy-aware scheduling of imprecise DNN inference tasks on intermittently
//! powered devices.
//!
//! The crate covers harvester characterisation ([`energy`]), utility
//! estimation by semi-supervised clustering ([`cluster`]), the layer-aware
//! training loss ([`loss`]), the imprecise task model ([`task`]), scheduling
//! policies ([`sched`]) and a slot-based simulator ([`sim`]).

pub mod check;
pub mod cluster;
pub mod energy;
pub mod error;
pub mod io;
pub mod loss;
pub mod sched;
pub mod sim;
pub mod task;

pub use cluster::{Assignment, ClusterModel};
pub use energy::{Capacitor, CeeCurve, EnergyTrace, EventParams, EventSeries, HarvesterProfile};
pub use error::{Error, Result};
pub use loss::{LayerWeights, PairBatch};
pub use sched::{Decision, DecisionReason, EnergyTaskSpec, Policy, PolicyKind};
pub use sim::{run_sim, Action, LogRow, ScheduleLog, SimConfig, SimReport, Workload};
pub use task::{ImpreciseTask, PriorityParams, Slot, Subtask, TaskId, TaskState, Unit};
