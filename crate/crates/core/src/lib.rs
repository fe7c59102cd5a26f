//! Dynamic hierarchical k-center and k-diameter clustering of points in
//! `{1..delta}^d`.
//!
//! Two interchangeable structures maintain a nested family of point sets
//! under insertions and deletions: [`lowdim::LowDim`] hashes every level
//! into a fixed grid, and [`highdim::HighDim`] uses randomly shifted grids.
//! Queries for any `k` are answered from the family through
//! [`hierarchy::Family`].

pub mod backend;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod hierarchy;
pub mod highdim;
pub mod lowdim;
pub mod model;
pub mod rankset;

pub use backend::Backend;
pub use error::{Error, Result};
pub use hierarchy::{Family, GoodFamily};
pub use model::{Config, CostValue, Mode, Point, PointId, PointRecord};
