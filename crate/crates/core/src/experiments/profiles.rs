//! Test emissivity profiles on the shell grid.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::basis::king;
use crate::error::{Error, Result};
use crate::model::{DoubledProfile, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileName {
    #[serde(rename = "cosmoBlocks")]
    CosmoBlocks,
    #[serde(rename = "cosmo1")]
    Cosmo1,
    #[serde(rename = "cosmo2")]
    Cosmo2,
    #[serde(rename = "custom")]
    Custom,
}

impl ProfileName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::CosmoBlocks => "cosmoBlocks",
            Self::Cosmo1 => "cosmo1",
            Self::Cosmo2 => "cosmo2",
            Self::Custom => "custom",
        }
    }

    /// Default peak emissivity per unit length at unit exposure.
    pub fn default_peak(&self) -> f64 {
        match self {
            Self::CosmoBlocks => COSMO_BLOCKS_PEAK,
            Self::Cosmo1 | Self::Cosmo2 => COSMO_KING_PEAK,
            Self::Custom => 1.0,
        }
    }
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosmoBlocks" => Ok(Self::CosmoBlocks),
            "cosmo1" => Ok(Self::Cosmo1),
            "cosmo2" => Ok(Self::Cosmo2),
            "custom" => Ok(Self::Custom),
            other => Err(Error::UnknownProfile(other.to_string())),
        }
    }
}

pub const COSMO_BLOCKS_PEAK: f64 = 0.2;
pub const COSMO_KING_PEAK: f64 = 0.05;

const BLOCK_T: [f64; 11] = [0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81];
const BLOCK_H: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2];

/// The classic piecewise-constant `blocks` test signal on `[0, 1]`.
pub fn blocks(t: f64) -> f64 {
    BLOCK_T.iter().zip(BLOCK_H).map(|(tj, hj)| if t >= *tj { hj } else { 0.0 }).sum()
}

/// Blocks on `t = r / r_max`, clipped at zero.
pub fn cosmo_blocks(r: f64, r_max: f64) -> f64 {
    blocks(r / r_max).max(0.0)
}

fn shape(name: ProfileName, r: f64, r_max: f64) -> f64 {
    match name {
        ProfileName::CosmoBlocks => cosmo_blocks(r, r_max),
        ProfileName::Cosmo1 => king(r, 0.1 * r_max, 1.2),
        ProfileName::Cosmo2 => king(r, 0.05 * r_max, 1.5) + 0.1 * king(r, 0.4 * r_max, 2.0),
        ProfileName::Custom => unreachable!(),
    }
}

/// Symmetric test profile sampled at shell midpoints and scaled so its
/// largest value equals `peak`.
pub fn make_test_profile(name: ProfileName, grid: &RadialGrid, peak: f64) -> Result<DoubledProfile> {
    if name == ProfileName::Custom {
        return Err(Error::InvalidParameter("custom profiles are loaded with load_custom_profile".into()));
    }
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidParameter(format!("profile peak {peak} must be > 0")));
    }
    let half: Vec<f64> = grid.shell_mids().iter().map(|r| shape(name, *r, grid.r_max())).collect();
    let top = half.iter().cloned().fold(0.0, f64::max);
    DoubledProfile::symmetric(*grid, &half.iter().map(|v| v * peak / top).collect::<Vec<_>>())
}

/// Profile from `radius,value` rows, linearly interpolated to the shell
/// midpoints (held constant beyond the first and last rows).
pub fn custom_profile(points: &[(f64, f64)], grid: &RadialGrid) -> Result<DoubledProfile> {
    if points.is_empty() {
        return Err(Error::Format("custom profile has no rows".into()));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Format("custom profile radii must be strictly increasing".into()));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 >= 0.0 && p.1.is_finite())) {
        return Err(Error::Format(format!("custom profile value {} at radius {} is negative", p.1, p.0)));
    }
    let half: Vec<f64> = grid
        .shell_mids()
        .iter()
        .map(|r| {
            let k = points.partition_point(|p| p.0 <= *r);
            if k == 0 {
                points[0].1
            } else if k == points.len() {
                points[k - 1].1
            } else {
                let (a, b) = (points[k - 1], points[k]);
                a.1 + (b.1 - a.1) * (r - a.0) / (b.0 - a.0)
            }
        })
        .collect();
    DoubledProfile::symmetric(*grid, &half)
}

pub fn load_custom_profile(path: &Path, grid: &RadialGrid) -> Result<DoubledProfile> {
    let text = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (k == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
            continue;
        }
        let mut it = line.split(',').map(|f| f.trim().parse::<f64>());
        match (it.next(), it.next()) {
            (Some(Ok(r)), Some(Ok(v))) => points.push((r, v)),
            _ => return Err(Error::Format(format!("{}:{}: expected 'radius,value'", path.display(), k + 1))),
        }
    }
    custom_profile(&points, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RadialGrid {
        RadialGrid::new(64, 90.0).unwrap()
    }

    #[test]
    fn blocks_has_many_jumps() {
        let p = make_test_profile(ProfileName::CosmoBlocks, &grid(), 2.0).unwrap();
        let half = p.right();
        let jumps = half.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(jumps >= 5, "{jumps}");
        assert!(half.iter().all(|v| *v >= 0.0));
        assert!((half.iter().cloned().fold(0.0, f64::max) - 2.0).abs() < 1e-15);
        assert_eq!(*half.last().unwrap(), 0.0);
    }

    #[test]
    fn king_profiles_decrease() {
        for name in [ProfileName::Cosmo1, ProfileName::Cosmo2] {
            let half = make_test_profile(name, &grid(), 1.0).unwrap().right();
            assert!(half.windows(2).all(|w| w[1] < w[0]));
            assert!(half[63] < 0.05 * half[0]);
        }
    }

    #[test]
    fn names_round_trip() {
        for name in [ProfileName::CosmoBlocks, ProfileName::Cosmo1, ProfileName::Cosmo2, ProfileName::Custom] {
            assert_eq!(name.as_str().parse::<ProfileName>().unwrap(), name);
        }
        assert!(matches!("cosmo3".parse::<ProfileName>(), Err(Error::UnknownProfile(_))));
    }

    #[test]
    fn custom_interpolates() {
        let g = RadialGrid::new(4, 8.0).unwrap();
        let p = custom_profile(&[(0.0, 4.0), (8.0, 0.0)], &g).unwrap();
        assert_eq!(p.right(), vec![3.5, 2.5, 1.5, 0.5]);
        assert!(custom_profile(&[(1.0, 1.0), (0.5, 1.0)], &g).is_err());
    }
}
