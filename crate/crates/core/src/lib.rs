//! Targetless camera-LiDAR extrinsic calibration by multi-feature edge
//! alignment.
//!
//! The pipeline fuses depth, reflectivity and foreground-object edge cues
//! from a LiDAR point cloud, aligns them against camera image edges and
//! estimates the 6-DOF extrinsic transform with Barzilai-Borwein gradient
//! ascent. See the `pipeline` module for the end-to-end driver.

pub mod densify;
pub mod edges;
pub mod error;
pub mod geometry;
pub mod image;
pub mod io;
pub mod objective;
pub mod pipeline;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, ExtrinsicParams, PanoramaGeometry, Point3};
pub use image::{EdgeMap, GrayImage};
pub use objective::CalibrationResult;
