//! Accelerator design space, ordinal embeddings, and shipped presets.

pub mod embedding;
pub mod presets;
pub mod space;

pub use embedding::{decode, encode, AccelEmbedding, NearestConfigIter, ACCEL_EMBED_DIM};
pub use presets::{preset, presets, Preset};
pub use space::{AccelSpace, AcceleratorConfig, MemConfig, MemType};
