//! Streaming density-peak clustering over decaying cluster-cells.

pub mod cellspace;
pub mod config;
pub mod decay;
pub mod dptree;
pub mod engine;
pub mod error;
pub mod evolution;
pub mod io;
pub mod oracle;
pub mod reservoir;
pub mod scenario;
pub mod tauctl;

pub use cellspace::{
    AssignKind, AssignResult, CellId, CellState, CellStore, ClusterCell, Distance, Metric,
    StreamPoint, TimeOrder,
};
pub use decay::{DecayClock, DecayParams, Horizon, Timestamp};
pub use error::{Error, Result};
pub use dptree::{Cluster, ClusterSnapshot, DpTree, FilterMode, RelinkRecord, TreeStats};
pub use reservoir::{capacity_bound, Activation, OutlierReservoir};
pub use tauctl::{DecisionGraphPoint, TauState};
pub use evolution::{AdjustKind, Cause, EventKind, EventLog, EvolutionEvent};
pub use config::EngineConfig;
pub use engine::{Counters, Engine};
pub use scenario::{Epoch, PlantedScenario, Source};
