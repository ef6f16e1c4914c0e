//! Dataset simulation: rooms, corpora, mixtures and manifests.

pub mod corpus;
pub mod manifest;
pub mod mixture;
pub mod rir;

pub use corpus::{pick_enrollment, synthetic_corpus, Corpus, SyntheticCorpusConfig};
pub use manifest::{load_manifest, manifest_base, write_dataset, write_manifest, ExampleRecord, LoadedExample, Manifest};
pub use mixture::{generate_examples, make_example, Acoustics, MixtureExample, SimulationConfig, MAX_SPEAKERS};
pub use rir::{simulate_rir, Reverb, RoomSpec};
