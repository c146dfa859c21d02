//! Radial expansion dictionary: King atoms plus periodic wavelets on the
//! doubled signed-radius grid.

pub mod dictionary;
pub mod king;
pub mod wavelet;

pub use dictionary::{synthesize_profile, Dictionary, DictionaryConfig};
pub use king::{build_king_atoms, king, KingAtoms, KingGrid};
pub use wavelet::{wavelet_analyze, wavelet_synthesize, WaveletFamily, WaveletSpec, WaveletTransform};
