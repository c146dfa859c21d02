//! Image geometry and the linear operators of the forward model.

pub mod abel;
pub mod forward;
pub mod grid;
pub mod image;
pub mod psf;

pub use abel::{chord_weight, project_at, AbelOperator, SectorMode};
pub use forward::{forward_mu, Coefficients, ForwardModel, SensitivityMap};
pub use grid::{dyadic_size, DoubledProfile, RadialGrid};
pub use image::{Center, PixelImage};
pub use psf::{BlurOperator, PsfModel, PsfParams};
