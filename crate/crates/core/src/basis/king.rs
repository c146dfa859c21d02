use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::grid::RadialGrid;

pub const DEFAULT_BETA_RANGE: (f64, f64) = (0.6, 3.0);

/// `(1 + (r/rho)^2)^(-beta)`
pub fn king(r: f64, rho: f64, beta: f64) -> f64 {
    (1.0 + (r / rho).powi(2)).powf(-beta)
}

/// Tensor grid of King core radii and slopes; atom `p = i * J + j` uses
/// `(rho[i], beta[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KingGrid {
    pub rho: Vec<f64>,
    pub beta: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect(),
    }
}

impl KingGrid {
    pub fn new(rho: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if rho.is_empty() || beta.is_empty() {
            return Err(Error::Layout("king grid needs at least one rho and one beta".into()));
        }
        if rho.iter().chain(&beta).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter("king rho and beta values must be > 0".into()));
        }
        Ok(Self { rho, beta })
    }

    /// `n_r` atoms: rho log-spaced over `[1, r_max/2]`, beta linear over
    /// `[0.6, 3.0]`, with the most balanced power-of-two factor pair.
    pub fn default_for(grid: &RadialGrid) -> Self {
        let atoms = grid.n_r();
        let bits = atoms.trailing_zeros();
        let i = 1usize << bits.div_ceil(2);
        let j = atoms / i;
        let hi = (grid.r_max() / 2.0).max(1.0);
        let rho = linspace(0.0, hi.ln(), i).into_iter().map(f64::exp).collect();
        let beta = linspace(DEFAULT_BETA_RANGE.0, DEFAULT_BETA_RANGE.1, j);
        Self { rho, beta }
    }

    pub fn len(&self) -> usize {
        self.rho.len() * self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn params(&self, p: usize) -> (f64, f64) {
        let j = self.beta.len();
        (self.rho[p / j], self.beta[p % j])
    }
}

/// Atom matrix on the doubled grid, column-major (`L` rows per atom),
/// evaluated at `|signed radius|`.
#[derive(Debug, Clone, PartialEq)]
pub struct KingAtoms {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub fn build_king_atoms(grid: &RadialGrid, kg: &KingGrid) -> Result<KingAtoms> {
    if kg.len() != grid.n_r() {
        return Err(Error::Layout(format!(
            "king grid has {} atoms but the radial grid needs {} (P/2)",
            kg.len(),
            grid.n_r()
        )));
    }
    let rows = grid.doubled_len();
    let radii: Vec<f64> = (0..rows).map(|k| grid.signed_radius(k).abs()).collect();
    let mut data = Vec::with_capacity(rows * kg.len());
    for p in 0..kg.len() {
        let (rho, beta) = kg.params(p);
        data.extend(radii.iter().map(|r| king(*r, rho, beta)));
    }
    Ok(KingAtoms { rows, cols: kg.len(), data })
}

impl KingAtoms {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, p: usize) -> &[f64] {
        &self.data[p * self.rows..(p + 1) * self.rows]
    }

    /// `out += atoms * w`
    pub fn accumulate(&self, w: &[f64], out: &mut [f64]) {
        for (p, &wp) in w.iter().enumerate() {
            if wp != 0.0 {
                for (o, a) in out.iter_mut().zip(self.column(p)) {
                    *o += wp * a;
                }
            }
        }
    }

    /// `out = atoms^T v`
    pub fn transpose_apply(&self, v: &[f64], out: &mut [f64]) {
        for (p, o) in out.iter_mut().enumerate() {
            *o = self.column(p).iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}
