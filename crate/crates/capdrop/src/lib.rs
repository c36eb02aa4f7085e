pub mod cli;
pub mod config;
pub mod dn;
pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod linear;
pub mod real;
pub mod selftest;
pub mod spectral;
pub mod waves;

pub use error::{Error, Result};
pub use real::Real;
pub use spectral::{Mode, SobolevSpec, SpectralGrid, TorusField};

pub use functionals::{Model, NaturalState, PhysicalParams, WahlenState};

/// Double-precision aliases.
pub type Grid = SpectralGrid<f64>;
pub type Field = TorusField<f64>;
pub type Wahlen = WahlenState<f64>;
pub type Natural = NaturalState<f64>;

/// Single-precision aliases.
pub type Grid32 = SpectralGrid<f32>;
pub type Field32 = TorusField<f32>;
