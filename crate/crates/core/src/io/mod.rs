//! Run configuration, image files, CSV tables and SVG plots.

pub mod image_file;
pub mod run_config;
pub mod svg;
pub mod tables;

pub use image_file::{read_image, read_to_string, with_path, write_image, ByteOrder, ImageFile, ValueKind};
pub use run_config::RunConfig;
