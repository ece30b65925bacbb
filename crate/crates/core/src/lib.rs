//! Birth-death chains built from Koornwinder's orthogonal polynomials, and
//! tools for measuring how slowly they mix.

pub mod analysis;
pub mod chain;
pub mod error;
pub mod koornwinder;
pub mod oracle;
pub mod orthopoly;
pub mod spectral;
mod sum;

pub use chain::{Chain, ChainSpec, RecurrenceCoeffs, ReversibilityMeasure, StationaryDistribution, TailEstimate};
pub use error::{Error, Result};
pub use koornwinder::{KoornwinderParams, SpectralMeasure};
pub use orthopoly::JacobiParams;
pub use spectral::{DistributionSnapshot, Method, QuadratureRule, TvEstimate, TvOptions};
pub use sum::{compensated_sum, NeumaierSum};
