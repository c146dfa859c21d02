//! Instrument and geometry settings shared by simulation and fitting.

use serde::{Deserialize, Serialize};

use crate::basis::{Dictionary, DictionaryConfig};
use crate::error::{Error, Result};
use crate::model::{Center, ForwardModel, PixelImage, PsfModel, PsfParams, RadialGrid, SectorMode, SensitivityMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SensitivityModel {
    Uniform,
    /// Columns of dead pixels, as left by gaps between detector chips.
    DeadColumns { columns: Vec<usize> },
    /// Efficiency falling linearly from 1 at the center to `edge` at the
    /// farthest corner.
    Vignetting { edge: f64 },
}

impl Default for SensitivityModel {
    fn default() -> Self {
        Self::Uniform
    }
}

impl SensitivityModel {
    pub fn build(&self, n: usize, center: Center) -> Result<SensitivityMap> {
        match self {
            Self::Uniform => Ok(SensitivityMap::ones(n)),
            Self::DeadColumns { columns } => {
                if let Some(c) = columns.iter().find(|c| **c >= n) {
                    return Err(Error::InvalidParameter(format!("dead column {c} outside a {n}-pixel image")));
                }
                let dead = columns.iter().flat_map(|c| (0..n).map(move |y| y * n + c));
                Ok(SensitivityMap::ones(n).with_dead(dead))
            }
            Self::Vignetting { edge } => {
                if !(0.0..=1.0).contains(edge) {
                    return Err(Error::InvalidParameter(format!("vignetting edge {edge} must lie in [0, 1]")));
                }
                let far = RadialGrid::for_image(n, center)?.r_max();
                let mut v = Vec::with_capacity(n * n);
                for y in 0..n {
                    for x in 0..n {
                        let r = (x as f64 + 0.5 - center.x).hypot(y as f64 + 0.5 - center.y);
                        v.push(1.0 - (1.0 - edge) * (r / far).min(1.0));
                    }
                }
                SensitivityMap::new(n, v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub psf: PsfParams,
    /// Switch the blur off entirely.
    pub blur: bool,
    /// Constant background intensity per pixel at unit exposure.
    pub background: f64,
    pub sensitivity: SensitivityModel,
    pub sector_mode: SectorMode,
    /// Cluster center in pixel coordinates; image center when absent.
    pub center: Option<[f64; 2]>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            psf: PsfParams::default(),
            blur: true,
            background: 1e-4,
            sensitivity: SensitivityModel::Uniform,
            sector_mode: SectorMode::LeftRight,
            center: None,
        }
    }
}

impl ModelConfig {
    pub fn center(&self, n: usize) -> Center {
        self.center.map(|[x, y]| Center::new(x, y)).unwrap_or_else(|| Center::of_image(n))
    }

    pub fn psf_model(&self) -> Result<PsfModel> {
        if self.blur {
            PsfModel::from_params(&self.psf)
        } else {
            Ok(PsfModel::identity())
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.background >= 0.0 && self.background.is_finite()) {
            return Err(Error::InvalidParameter(format!("background {} must be >= 0", self.background)));
        }
        self.psf_model().map(|_| ())
    }

    /// Forward model for an `n x n` image whose background is scaled by
    /// `exposure`.
    pub fn build(&self, n: usize, dict: &DictionaryConfig, exposure: f64) -> Result<ForwardModel> {
        self.build_with(n, dict, exposure, None)
    }

    /// As [`ModelConfig::build`] with extra dead pixels (oracle masks).
    pub fn build_with(
        &self,
        n: usize,
        dict: &DictionaryConfig,
        exposure: f64,
        dead: Option<&[usize]>,
    ) -> Result<ForwardModel> {
        self.validate()?;
        let center = self.center(n);
        let grid = RadialGrid::for_image(n, center)?;
        let dictionary = Dictionary::with_config(grid, dict)?;
        let mut sens = self.sensitivity.build(n, center)?;
        if let Some(d) = dead {
            sens = sens.with_dead(d.iter().copied());
        }
        let background = PixelImage::constant(n, self.background * exposure, center)?;
        ForwardModel::new(center, self.psf_model()?, sens, background, dictionary, self.sector_mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sensitivity_models() {
        let c = Center::of_image(8);
        let s = SensitivityModel::DeadColumns { columns: vec![2] }.build(8, c).unwrap();
        assert_eq!(s.values().iter().filter(|v| **v == 0.0).count(), 8);
        assert!(SensitivityModel::DeadColumns { columns: vec![8] }.build(8, c).is_err());
        let v = SensitivityModel::Vignetting { edge: 0.5 }.build(8, c).unwrap();
        assert!(v.values().iter().all(|e| (0.5..=1.0).contains(e)));
    }

    #[test]
    fn background_scales_with_exposure() {
        let m = ModelConfig::default().build(16, &DictionaryConfig::default(), 3.0).unwrap();
        assert!(m.background().iter().all(|b| (b - 3e-4).abs() < 1e-18));
    }
}
