//! The separation/extraction network.

pub mod config;
pub mod eda;
pub mod frontend;
pub mod muse;
pub mod tse;

pub use config::ModelConfig;
pub use eda::{AttractorSet, CountMode, Eda};
pub use muse::{is_tse_param, ExtractResult, Muse, MuseModel, SeparateResult, TSE_PREFIX};
