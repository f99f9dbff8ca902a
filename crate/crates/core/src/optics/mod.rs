//! Voronoi-Fresnel phase synthesis, diffraction and MTF metrics.

mod config;
mod mtf;
mod phase;
mod propagate;
mod psf;

pub use config::{DesignConfig, Spectrum};
pub use mtf::{mtf, mtfv, mtfv_value, volume_factor, MtfReport};
pub use phase::{build_phase, fresnel_phase, wrap_phase, PhaseProfile};
pub use propagate::{propagate_fresnel, Propagation, SamplingWarning};
pub use psf::{
    panchromatic_psf, sinc, spectral_psf_fast, spectral_psf_optical, spectral_slices, PsfStack,
};
