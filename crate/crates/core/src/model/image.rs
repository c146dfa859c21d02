use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sub-pixel coordinates in pixel units. Pixel `(x, y)` covers
/// `[x, x+1) × [y, y+1)` and has its center at `(x + 0.5, y + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Center {
    pub x: f64,
    pub y: f64,
}

impl Center {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Geometric center of an `n × n` image.
    pub fn of_image(n: usize) -> Self {
        Self::new(n as f64 / 2.0, n as f64 / 2.0)
    }
}

pub const MIN_SIDE: usize = 8;

/// Square grid of non-negative values stored row-major (`values[y * n + x]`).
#[derive(Debug, Clone, PartialEq)]
pub struct PixelImage {
    n: usize,
    values: Vec<f64>,
    center: Center,
}

impl PixelImage {
    pub fn new(n: usize, values: Vec<f64>, center: Center) -> Result<Self> {
        check_side(n)?;
        if values.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for a {n}x{n} image, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain(format!(
                "pixel {i} has invalid value {} (must be finite and >= 0)",
                values[i]
            )));
        }
        if !(center.x >= 0.0 && center.x <= n as f64 && center.y >= 0.0 && center.y <= n as f64) {
            return Err(Error::InvalidParameter(format!(
                "center ({}, {}) lies outside the {n}x{n} image",
                center.x, center.y
            )));
        }
        Ok(Self { n, values, center })
    }

    pub fn zeros(n: usize, center: Center) -> Result<Self> {
        Self::new(n, vec![0.0; n * n], center)
    }

    pub fn constant(n: usize, value: f64, center: Center) -> Result<Self> {
        Self::new(n, vec![value; n * n], center)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn center(&self) -> Center {
        self.center
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.n + x]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub(crate) fn check_side(n: usize) -> Result<()> {
    if n < MIN_SIDE {
        return Err(Error::InvalidDimension(format!(
            "image side {n} is below the minimum of {MIN_SIDE}"
        )));
    }
    Ok(())
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected length {want}, got {got}"
        )));
    }
    Ok(())
}

#[allow(dead_code)]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_small() {
        assert!(PixelImage::new(8, vec![-1.0; 64], Center::of_image(8)).is_err());
        assert!(matches!(
            PixelImage::zeros(4, Center::of_image(4)),
            Err(Error::InvalidDimension(_))
        ));
        assert!(PixelImage::zeros(8, Center::new(9.0, 1.0)).is_err());
    }

    #[test]
    fn row_major_access() {
        let img = PixelImage::new(8, (0..64).map(f64::from).collect(), Center::of_image(8)).unwrap();
        assert_eq!(img.get(3, 2), 19.0);
    }
}
