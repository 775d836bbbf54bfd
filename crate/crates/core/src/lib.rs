//! Unsupervised extraction of the relations hidden between co-occurring
//! sensory streams.
//!
//! Every stream is encoded by a [`SelfOrganizingMap`]; pairs of maps are tied
//! together by a [`CrossLink`] trained with a covariance Hebbian rule. A
//! [`RelationGraph`] of maps and links can then decode, denoise and infer
//! missing streams by relaxing activity across the links.
//!
//! - [`som`], [`schedule`]: per-stream maps and their decaying rates
//! - [`hebbian`]: cross-modal weight matrices
//! - [`brent`], [`decode`]: population decoding
//! - [`graph`]: networks of streams, training, inference
//! - [`experiment`]: seeded recipes from data to trained graph
//! - [`synth`]: synthetic streams with known relations
//! - [`vision`]: intensity, gradient, temporal derivative and optical flow streams from frames
//! - [`io`]: CSV streams, JSON configs and model files

pub mod brent;
pub mod decode;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod hebbian;
pub mod io;
pub mod schedule;
pub mod som;
pub mod synth;
pub mod table;
pub mod vision;

pub use brent::{brent_minimize, BrentResult};
pub use decode::{decode, decode_population, decode_scalar, decode_vector, DecodeResult};
pub use error::{Error, Result};
pub use experiment::ExperimentConfig;
pub use graph::{GraphSpec, Inference, LinkSpec, NodeSpec, RelationGraph, RelaxParams, Schedules, Stage};
pub use hebbian::{CrossLink, Direction};
pub use io::ModelFile;
pub use schedule::DecaySchedule;
pub use som::{ActivityVector, SelfOrganizingMap};
pub use synth::{generate, RelationSpec, TopologySpec};
pub use table::{Sample, StreamTable};
