//! Spectral radiation: Planck emission, angular quadrature and the
//! discrete-ordinates sweep that yields the radiative flux and source.

pub mod planck;
pub mod quadrature;
pub mod transport;

pub use planck::{band_emission, planck_intensity, total_intensity, C1, C2};
pub use quadrature::OrdinateSet;
pub use transport::{
    default_bands, radiative_flux, radiative_source, validate_bands, BoundaryIntensity,
    IntensityField, RadiationModel, SpectralBand,
};
