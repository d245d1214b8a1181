//! Congruence testing, point labeling, rigid alignment and distance-based
//! reconstruction of finite point configurations.
//!
//! The modules build on each other roughly in this order:
//!
//! - [`geometry`]: configurations, distances, areas, volumes and `g`.
//! - [`alignment`]: Kabsch and friends for labelled pairs.
//! - [`epsilon`]: area and `g` intervals under bounded distance distortion.
//! - [`labeling`]: recover the correspondence from areas of small shapes.
//! - [`reconstructibility`]: the 11-tuple test for genericity.
//! - [`reconstruct3d`]: rebuild a convex 3D configuration from distances and volume.
//! - [`io`], [`simulate`] and [`cli`]: files, the error simulation and the
//!   command-line front end.

pub mod alignment;
pub mod cli;
pub mod epsilon;
pub mod error;
pub mod geometry;
pub mod io;
pub mod labeling;
pub mod reconstruct3d;
pub mod reconstructibility;
pub mod simulate;

pub use error::{Error, Result};
pub use geometry::{DistanceMultiset, DistanceRecord, PointConfig};

/// Builds a rayon pool honouring `PROCKIT_THREADS` (unset or `0` means one
/// thread per core).
pub fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var("PROCKIT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

// The book's code listings run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/alignment.md")]
    mod alignment {}
    #[doc = include_str!("../../../book/src/labeling.md")]
    mod labeling {}
    #[doc = include_str!("../../../book/src/epsilon-bounds.md")]
    mod epsilon_bounds {}
    #[doc = include_str!("../../../book/src/reconstructibility.md")]
    mod reconstructibility {}
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    mod reconstruction {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
