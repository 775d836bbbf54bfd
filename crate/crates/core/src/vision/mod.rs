//! Scene quantities from grayscale frames: intensity `I`, spatial gradient
//! `G`, temporal derivative `V` and optical flow `F`, related by `G = ∇I`
//! and `-V = F·G`.

pub mod frame;
pub mod ops;
pub mod scene;

pub use frame::{Frame, ScalarField, VectorField};
pub use ops::{lucas_kanade, sobel_gradient, temporal_derivative, FlowField, EPS_EIGEN, EPS_GRADIENT};
pub use scene::{
    extract_streams, flow_constraint_residual, scene_table, synth_sequence, FrameSequence, Sampling,
    SceneSample, SceneTruth, SequenceKind, SyntheticScene, SCENE_COLUMNS,
};
