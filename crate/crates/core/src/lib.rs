//! Design, simulation and reconstruction toolkit for Voronoi-Fresnel
//! lensless cameras.
//!
//! A Voronoi-Fresnel mask tiles the aperture with convex cells, each holding
//! a small Fresnel lens focused on the sensor. The crate covers the whole
//! chain: bounded Voronoi tessellation ([`geometry`]), phase synthesis and
//! diffraction ([`optics`]), MTF-volume driven layout optimization
//! ([`optimizer`]), capture simulation ([`imaging`]), ADMM total-variation
//! deconvolution ([`recon`]) and first-order system figures ([`analysis`]).
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fft;
pub mod geometry;
pub mod imaging;
pub mod io;
pub mod optics;
pub mod optimizer;
pub mod raster;
pub mod recon;
pub mod scalar;

pub use error::{Error, Result};
pub use raster::Raster;
pub use scalar::Real;

pub type Point = geometry::Point<f64>;
pub type RasterGrid = geometry::RasterGrid<f64>;
pub type Site = geometry::Site<f64>;
pub type VoronoiCell = geometry::VoronoiCell<f64>;
pub type Tessellation = geometry::Tessellation<f64>;
pub type Spectrum = optics::Spectrum<f64>;
pub type DesignConfig = optics::DesignConfig<f64>;
pub type PhaseProfile = optics::PhaseProfile<f64>;
pub type PsfStack = optics::PsfStack<f64>;
pub type MtfReport = optics::MtfReport<f64>;
pub type OptimizeParams = optimizer::OptimizeParams<f64>;
pub type OptimizeResult = optimizer::OptimizeResult<f64>;
pub type SweepResult = optimizer::SweepResult<f64>;
pub type ColorResponse = imaging::ColorResponse<f64>;
pub type RasterImage = imaging::RasterImage<f64>;
pub type ReconParams = recon::ReconParams<f64>;
