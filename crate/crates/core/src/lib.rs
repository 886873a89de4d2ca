//! Reconstruction of distributions from coherent germs.

pub mod analysis;
pub mod bump;
pub mod error;
pub mod functions;
pub mod germs;
pub mod geom;
pub mod multiscale;
pub mod pairing;
pub mod presets;
pub mod reconstruction;
pub mod young;
pub mod par;

pub use error::{Error, Result};
pub use geom::{BoxDomain, MultiIndex, Point, Poly};
