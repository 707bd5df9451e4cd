pub mod cli;
pub mod continuation;
pub mod equilibria;
pub mod error;
pub mod model;
pub mod presets;
pub mod quadrature;
pub mod ratefn;
pub mod simulate;
pub mod spectrum;
pub mod tabulated;

pub use error::{Error, Result};
pub use model::{Model, ModelSpec, NumericOptions};
