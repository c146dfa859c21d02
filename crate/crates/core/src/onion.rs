//! Onion-peeling deprojection: mask, average in annuli, and solve the
//! upper-triangular shell-volume system from the outermost shell inwards.
//! The blur is ignored on purpose.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::image::check_len;
use crate::model::{chord_weight, Center, PixelImage, RadialGrid, SensitivityMap};

/// How annulus-averaged chord lengths are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeGeometry {
    /// Exact shell-annulus intersection volumes over the annulus area.
    #[default]
    Analytic,
    /// Mean chord over the pixel centres that fall in each annulus, the
    /// same binning the projection operator uses.
    PixelCenters,
}

/// `v[i][j]`: volume of shell `j` inside cylindrical annulus `i`, per unit
/// annulus area. Upper triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellVolumeMatrix {
    grid: RadialGrid,
    v: Vec<f64>,
}

fn ball_outside_cylinder(r: f64, s: f64) -> f64 {
    (4.0 * PI / 3.0) * (r * r - s * s).max(0.0).powf(1.5)
}

/// Volume of shell `[r_in, r_out]` within cylindrical annulus `[s_in, s_out]`.
pub fn shell_annulus_volume(r_in: f64, r_out: f64, s_in: f64, s_out: f64) -> f64 {
    ball_outside_cylinder(r_out, s_in) - ball_outside_cylinder(r_out, s_out) - ball_outside_cylinder(r_in, s_in)
        + ball_outside_cylinder(r_in, s_out)
}

impl ShellVolumeMatrix {
    pub fn analytic(grid: RadialGrid) -> Self {
        let n_r = grid.n_r();
        let mut v = vec![0.0; n_r * n_r];
        for i in 0..n_r {
            let (s0, s1) = (grid.edge(i), grid.edge(i + 1));
            let area = PI * (s1 * s1 - s0 * s0);
            for j in i..n_r {
                let vol = shell_annulus_volume(grid.edge(j), grid.edge(j + 1), s0, s1);
                v[i * n_r + j] = (vol / area).max(0.0);
            }
        }
        Self { grid, v }
    }

    /// Rows from the mean chord over usable pixels at the given projected
    /// radii; annuli without usable pixels fall back to the analytic row.
    pub fn pixel_centers(grid: RadialGrid, radii: &[f64], usable: &[bool]) -> Result<Self> {
        check_len("usable mask", usable.len(), radii.len())?;
        let n_r = grid.n_r();
        let mut out = Self::analytic(grid);
        let mut sums = vec![0.0; n_r * n_r];
        let mut counts = vec![0usize; n_r];
        for (s, ok) in radii.iter().zip(usable) {
            if !ok {
                continue;
            }
            let Some(i) = grid.shell_of(*s) else { continue };
            counts[i] += 1;
            for j in i..n_r {
                sums[i * n_r + j] += chord_weight(&grid, j, *s);
            }
        }
        for i in 0..n_r {
            if counts[i] > 0 {
                for j in i..n_r {
                    out.v[i * n_r + j] = sums[i * n_r + j] / counts[i] as f64;
                }
            }
        }
        Ok(out)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn n_r(&self) -> usize {
        self.grid.n_r()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.n_r() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_r();
        &self.v[i * n..(i + 1) * n]
    }

    pub fn apply(&self, eps: &[f64]) -> Result<Vec<f64>> {
        check_len("emissivity", eps.len(), self.n_r())?;
        Ok((0..self.n_r()).map(|i| self.row(i).iter().zip(eps).map(|(a, b)| a * b).sum()).collect())
    }
}

pub fn shell_volume_matrix(grid: RadialGrid) -> ShellVolumeMatrix {
    ShellVolumeMatrix::analytic(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusProfile {
    /// Mean of `(y - e) / E` over usable pixels of each annulus.
    pub values: Vec<f64>,
    pub pixels: Vec<usize>,
    pub masked: Vec<usize>,
    /// Annuli with no usable pixel, filled from their neighbours.
    pub interpolated: Vec<bool>,
}

/// Pixels that enter the annulus averages: not masked and `E > 0`.
pub fn usable_pixels(sensitivity: &SensitivityMap, mask: Option<&[bool]>) -> Result<Vec<bool>> {
    let e = sensitivity.values();
    if let Some(m) = mask {
        check_len("mask", m.len(), e.len())?;
    }
    Ok(e.iter().enumerate().map(|(p, ep)| *ep > 0.0 && !mask.is_some_and(|m| m[p])).collect())
}

pub fn pixel_radii(n: usize, center: Center) -> Vec<f64> {
    let mut r = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            r.push((x as f64 + 0.5 - center.x).hypot(y as f64 + 0.5 - center.y));
        }
    }
    r
}

/// Annulus means of the background-subtracted, sensitivity-corrected image.
/// `mask[p] = true` excludes pixel `p`.
pub fn annulus_profile(
    y: &PixelImage,
    sensitivity: &SensitivityMap,
    background: &[f64],
    mask: Option<&[bool]>,
    grid: &RadialGrid,
) -> Result<AnnulusProfile> {
    let n = y.n();
    check_len("sensitivity map", sensitivity.values().len(), n * n)?;
    check_len("background", background.len(), n * n)?;
    let usable = usable_pixels(sensitivity, mask)?;
    let radii = pixel_radii(n, y.center());
    let n_r = grid.n_r();
    let mut sums = vec![0.0; n_r];
    let mut pixels = vec![0usize; n_r];
    let mut masked = vec![0usize; n_r];
    for p in 0..n * n {
        let Some(i) = grid.shell_of(radii[p]) else { continue };
        if usable[p] {
            sums[i] += (y.values()[p] - background[p]) / sensitivity.values()[p];
            pixels[i] += 1;
        } else {
            masked[i] += 1;
        }
    }
    let mut values: Vec<f64> = sums.iter().zip(&pixels).map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 }).collect();
    let interpolated: Vec<bool> = pixels.iter().map(|c| *c == 0).collect();
    if interpolated.iter().all(|f| *f) {
        return Err(Error::Domain("no usable pixel in any annulus".into()));
    }
    let filled: Vec<usize> = (0..n_r).filter(|i| !interpolated[*i]).collect();
    for i in 0..n_r {
        if !interpolated[i] {
            continue;
        }
        let below = filled.iter().rev().find(|k| **k < i).copied();
        let above = filled.iter().find(|k| **k > i).copied();
        values[i] = match (below, above) {
            (Some(a), Some(b)) => {
                let w = (i - a) as f64 / (b - a) as f64;
                values[a] * (1.0 - w) + values[b] * w
            }
            (Some(a), None) => values[a],
            (None, Some(b)) => values[b],
            (None, None) => unreachable!(),
        };
    }
    Ok(AnnulusProfile { values, pixels, masked, interpolated })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnionEstimate {
    /// Back-substituted emissivity per shell; may be negative.
    pub emissivity: Vec<f64>,
    /// Same with negative entries set to zero.
    pub clamped: Vec<f64>,
}

/// Back-substitution `eps_i = (I_i - sum_{j>i} v_ij eps_j) / v_ii`, outermost first.
pub fn onion_deproject(profile: &[f64], v: &ShellVolumeMatrix) -> Result<OnionEstimate> {
    let n_r = v.n_r();
    check_len("annulus profile", profile.len(), n_r)?;
    let mut eps = vec![0.0; n_r];
    for i in (0..n_r).rev() {
        let d = v.get(i, i);
        if !(d > 0.0) {
            return Err(Error::Singular(i));
        }
        let tail: f64 = (i + 1..n_r).map(|j| v.get(i, j) * eps[j]).sum();
        eps[i] = (profile[i] - tail) / d;
    }
    let clamped = eps.iter().map(|v| v.max(0.0)).collect();
    Ok(OnionEstimate { emissivity: eps, clamped })
}

/// Mask, average and deproject in one call.
pub fn onion_baseline(
    y: &PixelImage,
    sensitivity: &SensitivityMap,
    background: &[f64],
    mask: Option<&[bool]>,
    grid: &RadialGrid,
    geometry: VolumeGeometry,
) -> Result<(AnnulusProfile, OnionEstimate)> {
    let prof = annulus_profile(y, sensitivity, background, mask, grid)?;
    let v = match geometry {
        VolumeGeometry::Analytic => ShellVolumeMatrix::analytic(*grid),
        VolumeGeometry::PixelCenters => ShellVolumeMatrix::pixel_centers(
            *grid,
            &pixel_radii(y.n(), y.center()),
            &usable_pixels(sensitivity, mask)?,
        )?,
    };
    let est = onion_deproject(&prof.values, &v)?;
    Ok((prof, est))
}
