//! Two-sample tests for random convex compact sets, built on N-distances
//! over discretized support functions, plus the full pipeline that turns a
//! pair of raster realisations of general random sets into a test decision:
//! maximal Poisson-disc cover, Voronoi tessellation, cell-in-disc convex
//! pieces, non-neighbouring cell sampling, support vectors, kernel test.
//!
//! Crate layout mirrors the pipeline stages:
//!
//! * [`geometry`] — convex bodies, support functions, half-plane clipping
//! * [`kernels`] — strongly negative definite kernels on support vectors
//! * [`nstat`] — kernel matrices and the unbiased N-distance U-statistic
//! * [`hyptest`] — permutation test and the split KS/AD test
//! * [`pointproc`] — Boolean, cluster and repulsive disc process simulators
//! * [`pipeline`] — the two-realisation approximation and test driver
//! * [`io`] — PGM masks, CSV tables and JSON dumps
//!
//! With the default `parallel` feature the hot loops (kernel matrix rows,
//! permutation replicates, Voronoi cells) run on rayon; all of them have a
//! sequential fallback (`*_seq`) that produces bit-identical results, and
//! disabling the feature compiles the crate without the rayon dependency.

pub mod error;
pub mod geometry;
pub mod hyptest;
pub mod io;
pub mod kernels;
pub mod nstat;
pub mod pipeline;
pub mod pointproc;
pub mod rng;

mod summation;

pub use error::{Error, Result};
