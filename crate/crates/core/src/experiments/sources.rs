use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSource {
    pub x: usize,
    pub y: usize,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointSourceSet {
    pub n: usize,
    pub sources: Vec<PointSource>,
}

impl PointSourceSet {
    pub fn empty(n: usize) -> Self {
        Self { n, sources: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn to_image(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n * self.n];
        for p in &self.sources {
            s[p.y * self.n + p.x] += p.amplitude;
        }
        s
    }

    /// Pixels within `radius` of any source.
    pub fn mask(&self, radius: f64) -> Vec<bool> {
        let n = self.n;
        let mut m = vec![false; n * n];
        let reach = radius.floor() as isize;
        for p in &self.sources {
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    let (x, y) = (p.x as isize + dx, p.y as isize + dy);
                    if x < 0 || y < 0 || x >= n as isize || y >= n as isize {
                        continue;
                    }
                    if ((dx * dx + dy * dy) as f64).sqrt() <= radius {
                        m[y as usize * n + x as usize] = true;
                    }
                }
            }
        }
        m
    }
}

/// `count` distinct pixels chosen uniformly, amplitudes uniform on `range`.
pub fn sample_point_sources<R: Rng + ?Sized>(
    n: usize,
    count: usize,
    range: [f64; 2],
    rng: &mut R,
) -> Result<PointSourceSet> {
    if count > n * n {
        return Err(Error::InvalidParameter(format!("{count} sources do not fit in {n}x{n} pixels")));
    }
    if !(range[0] >= 0.0 && range[1] >= range[0] && range[1].is_finite()) {
        return Err(Error::InvalidParameter(format!("amplitude range {range:?} must satisfy 0 <= lo <= hi")));
    }
    let mut pixels = sample(rng, n * n, count).into_vec();
    pixels.sort_unstable();
    let sources = pixels
        .into_iter()
        .map(|p| {
            let amplitude = if range[1] > range[0] { rng.random_range(range[0]..range[1]) } else { range[0] };
            PointSource { x: p % n, y: p / n, amplitude }
        })
        .collect();
    Ok(PointSourceSet { n, sources })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn defaults_and_determinism() {
        let a = sample_point_sources(128, 32, [0.0, 0.002], &mut stream(1, 2, 3)).unwrap();
        let b = sample_point_sources(128, 32, [0.0, 0.002], &mut stream(1, 2, 3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 32);
        assert!(a.sources.iter().all(|s| (0.0..0.002).contains(&s.amplitude)));
        let mut px: Vec<_> = a.sources.iter().map(|s| (s.x, s.y)).collect();
        px.dedup();
        assert_eq!(px.len(), 32);
        assert!(sample_point_sources(8, 0, [0.0, 1.0], &mut stream(0, 0, 0)).unwrap().is_empty());
        assert!(sample_point_sources(4, 17, [0.0, 1.0], &mut stream(0, 0, 0)).is_err());
    }

    #[test]
    fn mask_disc() {
        let s = PointSourceSet { n: 8, sources: vec![PointSource { x: 0, y: 0, amplitude: 1.0 }] };
        assert_eq!(s.mask(1.0).iter().filter(|m| **m).count(), 3);
        assert_eq!(s.mask(0.0).iter().filter(|m| **m).count(), 1);
    }
}
