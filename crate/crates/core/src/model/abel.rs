//! Line-of-sight projection of a radial emissivity profile onto the pixel
//! grid, for a profile that is constant on each spherical shell.

use serde::{Deserialize, Serialize};

use super::grid::{DoubledProfile, RadialGrid};
use super::image::{check_len, check_side, Center};
use crate::error::{Error, Result};

/// How a pixel reads the doubled profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorMode {
    /// Both halves are averaged into one radial profile.
    Symmetric,
    /// Pixels with `x < cx` see the left half, the others the right half.
    #[default]
    LeftRight,
}

/// Chord length of shell `j` along the line of sight at projected radius `s`:
/// `2 (sqrt((r_{j+1}^2 - s^2)_+) - sqrt((r_j^2 - s^2)_+))`.
pub fn chord_weight(grid: &RadialGrid, j: usize, s: f64) -> f64 {
    let s2 = s * s;
    let outer = grid.edge(j + 1);
    let inner = grid.edge(j);
    2.0 * ((outer * outer - s2).max(0.0).sqrt() - (inner * inner - s2).max(0.0).sqrt())
}

/// Projected value at radius `s` of a profile given per shell.
pub fn project_at(grid: &RadialGrid, shells: &[f64], s: f64) -> f64 {
    (0..grid.n_r()).map(|j| chord_weight(grid, j, s) * shells[j]).sum()
}

#[derive(Debug, Clone)]
pub struct AbelOperator {
    n: usize,
    grid: RadialGrid,
    center: Center,
    mode: SectorMode,
    radius: Vec<f64>,
    right_half: Vec<bool>,
    first_shell: Vec<usize>,
    offsets: Vec<usize>,
    weights: Vec<f64>,
}

impl AbelOperator {
    pub fn new(n: usize, center: Center, grid: RadialGrid, mode: SectorMode) -> Result<Self> {
        check_side(n)?;
        let n_r = grid.n_r();
        let mut radius = Vec::with_capacity(n * n);
        let mut right_half = Vec::with_capacity(n * n);
        let mut first_shell = Vec::with_capacity(n * n);
        let mut offsets = Vec::with_capacity(n * n + 1);
        let mut weights = Vec::new();
        offsets.push(0);
        for y in 0..n {
            for x in 0..n {
                let dx = x as f64 + 0.5 - center.x;
                let dy = y as f64 + 0.5 - center.y;
                let s = dx.hypot(dy);
                radius.push(s);
                right_half.push(dx >= 0.0);
                let j0 = grid.shell_of(s).unwrap_or(n_r);
                first_shell.push(j0);
                for j in j0..n_r {
                    weights.push(chord_weight(&grid, j, s));
                }
                offsets.push(weights.len());
            }
        }
        Ok(Self { n, grid, center, mode, radius, right_half, first_shell, offsets, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn center(&self) -> Center {
        self.center
    }

    pub fn mode(&self) -> SectorMode {
        self.mode
    }

    /// Projected radius of every pixel center.
    pub fn radii(&self) -> &[f64] {
        &self.radius
    }

    /// Whether each pixel reads the right half of the profile.
    pub fn right_half(&self) -> &[bool] {
        &self.right_half
    }

    /// Non-zero chord weights of one pixel as `(shell, weight)` pairs.
    pub fn row(&self, pixel: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let j0 = self.first_shell[pixel];
        self.weights[self.offsets[pixel]..self.offsets[pixel + 1]]
            .iter()
            .enumerate()
            .map(move |(k, w)| (j0 + k, *w))
    }

    /// Per-shell values seen by the left (`[0, n_r)`) and right
    /// (`[n_r, 2 n_r)`) halves of the image.
    fn resolve_halves(&self, doubled: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let n_r = g.n_r();
        let mut halves = vec![0.0; 2 * n_r];
        for j in 0..n_r {
            let (l, r) = (doubled[g.left_index(j)], doubled[g.right_index(j)]);
            let (l, r) = match self.mode {
                SectorMode::LeftRight => (l, r),
                SectorMode::Symmetric => (0.5 * (l + r), 0.5 * (l + r)),
            };
            halves[j] = l;
            halves[n_r + j] = r;
        }
        halves
    }

    /// Image of a doubled profile given as raw values.
    pub fn apply_into(&self, doubled: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("doubled profile", doubled.len(), self.grid.doubled_len())?;
        check_len("projected image", out.len(), self.n * self.n)?;
        let n_r = self.grid.n_r();
        let halves = self.resolve_halves(doubled);
        for (p, o) in out.iter_mut().enumerate() {
            let base = if self.right_half[p] { n_r } else { 0 };
            let j0 = self.first_shell[p];
            let ws = &self.weights[self.offsets[p]..self.offsets[p + 1]];
            let vs = &halves[base + j0..base + n_r];
            *o = ws.iter().zip(vs).map(|(w, v)| w * v).sum();
        }
        Ok(())
    }

    pub fn apply(&self, doubled: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n * self.n];
        self.apply_into(doubled, &mut out)?;
        Ok(out)
    }

    pub fn project(&self, profile: &DoubledProfile) -> Result<Vec<f64>> {
        if profile.grid() != &self.grid {
            return Err(Error::DimensionMismatch("profile grid differs from operator grid".into()));
        }
        self.apply(profile.values())
    }

    /// Exact transpose of [`apply`](Self::apply).
    pub fn adjoint_into(&self, image: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("image", image.len(), self.n * self.n)?;
        check_len("doubled profile", out.len(), self.grid.doubled_len())?;
        let g = self.grid;
        let n_r = g.n_r();
        let mut halves = vec![0.0; 2 * n_r];
        for (p, &v) in image.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let base = if self.right_half[p] { n_r } else { 0 };
            let j0 = self.first_shell[p];
            let ws = &self.weights[self.offsets[p]..self.offsets[p + 1]];
            for (acc, w) in halves[base + j0..base + n_r].iter_mut().zip(ws) {
                *acc += w * v;
            }
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..n_r {
            let (l, r) = (halves[j], halves[n_r + j]);
            match self.mode {
                SectorMode::LeftRight => {
                    out[g.left_index(j)] = l;
                    out[g.right_index(j)] = r;
                }
                SectorMode::Symmetric => {
                    let m = 0.5 * (l + r);
                    out[g.left_index(j)] = m;
                    out[g.right_index(j)] = m;
                }
            }
        }
        Ok(())
    }

    pub fn adjoint(&self, image: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.grid.doubled_len()];
        self.adjoint_into(image, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::image::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn op(n: usize, mode: SectorMode) -> AbelOperator {
        let c = Center::of_image(n);
        AbelOperator::new(n, c, RadialGrid::for_image(n, c).unwrap(), mode).unwrap()
    }

    #[test]
    fn zero_profile_projects_to_zero() {
        let a = op(16, SectorMode::LeftRight);
        let img = a.apply(&vec![0.0; 16]).unwrap();
        assert!(img.iter().all(|v| *v == 0.0));
        assert!(a.adjoint(&vec![0.0; 256]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_ball_matches_chord() {
        // Constant c inside radius R: line integral 2c sqrt(R^2 - s^2).
        let grid = RadialGrid::new(64, 10.0).unwrap();
        let shells = vec![3.0; 64];
        for s in [0.0, 2.5, 7.0, 9.9] {
            let want: f64 = 2.0 * 3.0 * (100.0_f64 - s * s).sqrt();
            assert!((project_at(&grid, &shells, s) - want).abs() < 1e-9 * want.max(1.0));
        }
    }

    #[test]
    fn adjoint_identity_both_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for mode in [SectorMode::LeftRight, SectorMode::Symmetric] {
            let a = op(16, mode);
            let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = dot(&a.apply(&x).unwrap(), &y);
            let rhs = dot(&x, &a.adjoint(&y).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
        }
    }

    #[test]
    fn delta_image_gives_chord_row() {
        let a = op(16, SectorMode::LeftRight);
        let g = *a.grid();
        let pixel = 5 * 16 + 12; // right half
        let mut img = vec![0.0; 256];
        img[pixel] = 1.0;
        let back = a.adjoint(&img).unwrap();
        let s = a.radii()[pixel];
        for j in 0..g.n_r() {
            assert!((back[g.right_index(j)] - chord_weight(&g, j, s)).abs() < 1e-14);
            assert_eq!(back[g.left_index(j)], 0.0);
        }
    }

    #[test]
    fn sector_selects_half() {
        let a = op(16, SectorMode::LeftRight);
        let g = *a.grid();
        let prof = DoubledProfile::from_halves(g, &vec![0.0; 8], &vec![1.0; 8]).unwrap();
        let img = a.project(&prof).unwrap();
        for (p, v) in img.iter().enumerate() {
            if a.right_half()[p] {
                assert!(*v > 0.0);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }
}
