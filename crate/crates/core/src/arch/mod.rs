//! Network description, parameter storage and the executable layer-reuse network.

pub mod network;
pub mod params;
pub mod spec;

pub use network::{Mode, Network, TraceEntry};
pub use params::{Param, ParamStore};
pub use spec::{ArchName, InputShape, NetworkSpec, ReuseMode, StageTail, Widths};
