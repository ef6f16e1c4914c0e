//! Parameters, sessions and the layers the model is assembled from.

pub mod dpt;
pub mod gradcheck;
pub mod layers;
pub mod params;

pub use dpt::{DptBlock, DptDims, SequenceLayer};
pub use layers::{Builder, GlobalLayerNorm, LayerNorm, Linear, Lstm, PRelu};
pub use params::{ParamId, ParamStore, Session};
