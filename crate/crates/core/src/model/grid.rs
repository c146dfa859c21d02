use serde::{Deserialize, Serialize};

use super::image::{check_side, Center};
use crate::error::{Error, Result};

/// Equispaced shell edges `0 = r_0 < r_1 < ... < r_{n_r} = r_max` (pixels).
/// Shell `j` is `[r_j, r_{j+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    n_r: usize,
    r_max: f64,
}

/// `P = 2^floor(log2 n)`: the dyadic size tied to the image side.
pub fn dyadic_size(n: usize) -> usize {
    1usize << (usize::BITS - 1 - n.leading_zeros())
}

impl RadialGrid {
    pub fn new(n_r: usize, r_max: f64) -> Result<Self> {
        if n_r == 0 || !n_r.is_power_of_two() {
            return Err(Error::InvalidDimension(format!(
                "number of shells {n_r} must be a power of two"
            )));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidParameter(format!("r_max = {r_max} must be positive")));
        }
        Ok(Self { n_r, r_max })
    }

    /// Grid for an `n × n` image: `n_r = P/2` shells reaching the farthest
    /// image corner, so every pixel (not only its center) is covered.
    pub fn for_image(n: usize, center: Center) -> Result<Self> {
        check_side(n)?;
        let side = n as f64;
        if !(center.x >= 0.0 && center.x <= side && center.y >= 0.0 && center.y <= side) {
            return Err(Error::InvalidParameter(format!(
                "center ({}, {}) lies outside the {n}x{n} image",
                center.x, center.y
            )));
        }
        let dx = center.x.max(side - center.x);
        let dy = center.y.max(side - center.y);
        Self::new(dyadic_size(n) / 2, dx.hypot(dy))
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    /// Length of the doubled (signed-radius) signal.
    pub fn doubled_len(&self) -> usize {
        2 * self.n_r
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn delta(&self) -> f64 {
        self.r_max / self.n_r as f64
    }

    pub fn edge(&self, k: usize) -> f64 {
        if k == self.n_r {
            self.r_max
        } else {
            k as f64 * self.delta()
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n_r).map(|k| self.edge(k)).collect()
    }

    pub fn shell_mid(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.delta()
    }

    pub fn shell_mids(&self) -> Vec<f64> {
        (0..self.n_r).map(|j| self.shell_mid(j)).collect()
    }

    /// Shell containing radius `r`, or `None` beyond `r_max`.
    pub fn shell_of(&self, r: f64) -> Option<usize> {
        if r < 0.0 || r >= self.r_max {
            return None;
        }
        Some(((r / self.delta()) as usize).min(self.n_r - 1))
    }

    /// Doubled-signal index of shell `j` on the left half.
    pub fn left_index(&self, j: usize) -> usize {
        self.n_r - 1 - j
    }

    pub fn right_index(&self, j: usize) -> usize {
        self.n_r + j
    }

    /// Signed radius at doubled index `k` (negative on the left half).
    pub fn signed_radius(&self, k: usize) -> f64 {
        if k < self.n_r {
            -self.shell_mid(self.n_r - 1 - k)
        } else {
            self.shell_mid(k - self.n_r)
        }
    }
}

/// Left and right half-profiles concatenated on the signed-radius axis:
/// index `k < n_r` holds the left half at shell `n_r - 1 - k` (outermost
/// first), index `k >= n_r` the right half at shell `k - n_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubledProfile {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl DoubledProfile {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.doubled_len() {
            return Err(Error::DimensionMismatch(format!(
                "doubled profile needs {} values, got {}",
                grid.doubled_len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("profile values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self { grid, values: vec![0.0; grid.doubled_len()] }
    }

    /// Same half-profile (indexed by shell) mirrored on both sides.
    pub fn symmetric(grid: RadialGrid, half: &[f64]) -> Result<Self> {
        Self::from_halves(grid, half, half)
    }

    pub fn from_halves(grid: RadialGrid, left: &[f64], right: &[f64]) -> Result<Self> {
        let n_r = grid.n_r();
        if left.len() != n_r || right.len() != n_r {
            return Err(Error::DimensionMismatch(format!(
                "half-profiles need {n_r} shells, got {} and {}",
                left.len(),
                right.len()
            )));
        }
        let mut values = vec![0.0; 2 * n_r];
        for j in 0..n_r {
            values[grid.left_index(j)] = left[j];
            values[grid.right_index(j)] = right[j];
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn left(&self) -> Vec<f64> {
        (0..self.grid.n_r()).map(|j| self.values[self.grid.left_index(j)]).collect()
    }

    pub fn right(&self) -> Vec<f64> {
        (0..self.grid.n_r()).map(|j| self.values[self.grid.right_index(j)]).collect()
    }

    /// Left/right average per shell.
    pub fn mean(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..g.n_r())
            .map(|j| 0.5 * (self.values[g.left_index(j)] + self.values[g.right_index(j)]))
            .collect()
    }

    /// Copy with negative values replaced by zero, for reporting.
    pub fn clamped(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.max(0.0)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_sizes() {
        assert_eq!(dyadic_size(128), 128);
        assert_eq!(dyadic_size(200), 128);
        assert_eq!(dyadic_size(8), 8);
    }

    #[test]
    fn grid_for_128() {
        let g = RadialGrid::for_image(128, Center::new(64.0, 64.0)).unwrap();
        assert_eq!(g.n_r(), 64);
        assert_eq!(g.doubled_len(), 128);
    }

    #[test]
    fn grid_for_8_covers_corner() {
        let g = RadialGrid::for_image(8, Center::new(4.0, 4.0)).unwrap();
        assert_eq!(g.n_r(), 4);
        assert!(g.r_max() >= 4.0 * 2f64.sqrt());
    }

    #[test]
    fn grid_256_equispaced() {
        let g = RadialGrid::for_image(256, Center::of_image(256)).unwrap();
        assert_eq!(g.n_r(), 128);
        let e = g.edges();
        let d = e[1] - e[0];
        for w in e.windows(2) {
            assert!(((w[1] - w[0]) - d).abs() < 1e-12);
        }
        assert_eq!(*e.last().unwrap(), g.r_max());
    }

    #[test]
    fn small_image_rejected() {
        assert!(matches!(
            RadialGrid::for_image(7, Center::new(3.5, 3.5)),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn doubled_layout() {
        let g = RadialGrid::new(4, 4.0).unwrap();
        let p = DoubledProfile::from_halves(g, &[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(p.values(), &[4.0, 3.0, 2.0, 1.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(p.left(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.mean(), vec![3.0, 4.0, 5.0, 6.0]);
        assert_eq!(g.signed_radius(0), -3.5);
        assert_eq!(g.signed_radius(4), 0.5);
    }
}
