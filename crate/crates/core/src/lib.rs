//! Accuracy-aware cooperative sensing and computing for connected vehicles.
//!
//! The pipeline runs in stages:
//!
//! 1. [`scene`]: ray-cast LiDAR scans of a road scene and per-object point sets.
//! 2. [`quality`]: voxel-count quality indicators and their fusion across vehicles.
//! 3. [`accuracy`]: a closed-form accuracy oracle, training data, and an MLP estimator.
//! 4. [`netmodel`]: computing, communication and topology relations plus the cost.
//! 5. [`resalloc`]: optimal bandwidth / compute fractions for a fixed selection and placement.
//! 6. [`ga`]: genetic search over data selection and subtask placement, with an
//!    exhaustive solver for small instances.
//! 7. [`bench`]: baseline schemes and scheme comparison.
//! 8. [`experiment`]: config-driven sweeps writing CSV results.

pub mod accuracy;
pub mod bench;
pub mod context;
pub mod error;
pub mod experiment;
pub mod ga;
pub mod netmodel;
pub mod quality;
pub mod resalloc;
pub mod scene;

pub use error::{Error, Result};
