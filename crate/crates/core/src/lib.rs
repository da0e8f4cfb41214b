//! Global point cloud registration on compact quadric scene representations.
//!
//! A cloud is reduced to a few dozen typed quadric primitives
//! ([`scene::represent`]), primitives are matched across clouds and pruned
//! with multi-level compatibility graphs ([`matching`]), and a rigid
//! transform is estimated from the surviving matches with a
//! degeneracy-aware quadric distance ([`registration`]).

pub mod cloud;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod matching;
pub mod quadric;
pub mod registration;
pub mod scene;
pub mod transform;

pub use cloud::PointCloud;
pub use config::Config;
pub use error::{Error, Result};
pub use transform::RigidTransform;
