//! Signal model, RFI simulator, dataset store, classical baselines and
//! evaluation metrics for visibility-domain RFI mitigation.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod signal;
pub mod simulate;

pub use error::{Result, VfdmError};
pub use grid::GridSpec;
pub use signal::{
    as_covariance_matrix, demodify_bt, forward_visibility, from_covariance_matrix, inverse_bt,
    modify_bt, point_source_visibility, AntennaPattern, ModifiedBT, SceneImage, VisRole,
    VisibilityGrid,
};
pub use simulate::{
    inject, rfi_mask, sample_rfi_scenario, synth_scene, Mask, Regime, RfiMode, RfiScenario,
    RfiSource, SceneKind, SimConfig,
};
