//! Spectral simulation and Gibbs-measure laboratory for the periodic
//! Schrödinger–Benjamin-Ono system.

pub mod dynamics;
pub mod error;
pub mod gibbs;
pub mod illposed;
pub mod invariance;
pub mod product;
pub mod resonance;
pub mod spectral;
pub mod stats;

pub use dynamics::{Conserved, SBOParams, Trajectory};
pub use error::{Error, Result};
pub use spectral::{RealSpectralField, SpectralField, SpectralPair};
