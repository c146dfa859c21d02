use serde::{Deserialize, Serialize};

use super::king::{build_king_atoms, KingAtoms, KingGrid};
use super::wavelet::{WaveletSpec, WaveletTransform};
use crate::error::{Error, Result};
use crate::model::grid::{DoubledProfile, RadialGrid};

/// Optional overrides for the dictionary; missing pieces take grid-based
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DictionaryConfig {
    pub king: Option<KingGrid>,
    pub wavelet: WaveletSpec,
}

/// Emissivity expansion on the doubled grid:
/// `eps = alpha0 + atoms * alpha_king + W^T alpha_wavelet`.
///
/// Penalized coefficients are laid out as `[king (n_r) | wavelet (2 n_r)]`;
/// the king block is sign-constrained (non-negative).
#[derive(Debug, Clone)]
pub struct Dictionary {
    grid: RadialGrid,
    king: KingGrid,
    wavelet_spec: WaveletSpec,
    atoms: KingAtoms,
    wavelets: WaveletTransform,
}

impl Dictionary {
    pub fn new(grid: RadialGrid, king: KingGrid, wavelet_spec: WaveletSpec) -> Result<Self> {
        let atoms = build_king_atoms(&grid, &king)?;
        let wavelets = WaveletTransform::new(&wavelet_spec, grid.doubled_len())?;
        Ok(Self { grid, king, wavelet_spec, atoms, wavelets })
    }

    pub fn with_config(grid: RadialGrid, cfg: &DictionaryConfig) -> Result<Self> {
        let king = cfg.king.clone().unwrap_or_else(|| KingGrid::default_for(&grid));
        Self::new(grid, king, cfg.wavelet)
    }

    pub fn default_for(grid: RadialGrid) -> Result<Self> {
        Self::with_config(grid, &DictionaryConfig::default())
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn king(&self) -> &KingGrid {
        &self.king
    }

    pub fn wavelet_spec(&self) -> &WaveletSpec {
        &self.wavelet_spec
    }

    pub fn atoms(&self) -> &KingAtoms {
        &self.atoms
    }

    pub fn wavelets(&self) -> &WaveletTransform {
        &self.wavelets
    }

    pub fn n_king(&self) -> usize {
        self.atoms.cols()
    }

    pub fn n_wavelet(&self) -> usize {
        self.wavelets.len()
    }

    pub fn n_penalized(&self) -> usize {
        self.n_king() + self.n_wavelet()
    }

    pub fn profile_len(&self) -> usize {
        self.grid.doubled_len()
    }

    pub fn is_sign_constrained(&self, i: usize) -> bool {
        i < self.n_king()
    }

    pub fn split<'a>(&self, alpha: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        alpha.split_at(self.n_king())
    }

    fn check_alpha(&self, len: usize) -> Result<()> {
        if len != self.n_penalized() {
            return Err(Error::Layout(format!(
                "expected {} penalized coefficients ({} king + {} wavelet), got {len}",
                self.n_penalized(),
                self.n_king(),
                self.n_wavelet()
            )));
        }
        Ok(())
    }

    /// Raw doubled-grid values of the expansion.
    pub fn synthesize_into(&self, alpha0: f64, alpha: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_alpha(alpha.len())?;
        let (king, wav) = self.split(alpha);
        self.wavelets.synthesize_into(wav, out)?;
        out.iter_mut().for_each(|v| *v += alpha0);
        self.atoms.accumulate(king, out);
        Ok(())
    }

    pub fn synthesize(&self, alpha0: f64, alpha: &[f64]) -> Result<DoubledProfile> {
        let mut out = vec![0.0; self.profile_len()];
        self.synthesize_into(alpha0, alpha, &mut out)?;
        DoubledProfile::new(self.grid, out)
    }

    /// Transpose of the expansion: returns the intercept component and the
    /// penalized components of `Phi^T v`.
    pub fn adjoint_into(&self, v: &[f64], alpha_out: &mut [f64]) -> Result<f64> {
        self.check_alpha(alpha_out.len())?;
        if v.len() != self.profile_len() {
            return Err(Error::DimensionMismatch(format!(
                "profile-space vector has length {}, expected {}",
                v.len(),
                self.profile_len()
            )));
        }
        let n_king = self.n_king();
        let (king, wav) = alpha_out.split_at_mut(n_king);
        self.atoms.transpose_apply(v, king);
        self.wavelets.analyze_into(v, wav)?;
        Ok(v.iter().sum())
    }
}

/// `alpha0 * 1 + Phi * alpha` as a profile.
pub fn synthesize_profile(alpha0: f64, alpha: &[f64], dict: &Dictionary) -> Result<DoubledProfile> {
    dict.synthesize(alpha0, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dict() -> Dictionary {
        Dictionary::default_for(RadialGrid::new(16, 24.0).unwrap()).unwrap()
    }

    #[test]
    fn zero_and_intercept() {
        let d = dict();
        let z = d.synthesize(0.0, &vec![0.0; d.n_penalized()]).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));
        let c = d.synthesize(2.5, &vec![0.0; d.n_penalized()]).unwrap();
        assert!(c.values().iter().all(|v| (*v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn single_atom_value() {
        // rho = 2, beta = 1 at r = 2 contributes 0.5; the innermost shell
        // midpoint sits exactly at r = 2.
        let grid = RadialGrid::new(4, 16.0).unwrap();
        let king = KingGrid::new(vec![2.0, 4.0], vec![1.0, 2.0]).unwrap();
        let d = Dictionary::new(grid, king, WaveletSpec::haar()).unwrap();
        let mut alpha = vec![0.0; d.n_penalized()];
        alpha[0] = 1.0;
        let p = d.synthesize(0.0, &alpha).unwrap();
        assert!((p.right()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn layout_checked() {
        let d = dict();
        assert!(matches!(d.synthesize(0.0, &[1.0]), Err(Error::Layout(_))));
        assert_eq!(d.n_penalized(), 16 + 32);
        assert!(d.is_sign_constrained(15) && !d.is_sign_constrained(16));
    }

    #[test]
    fn synthesis_linear_and_adjoint_consistent() {
        let d = dict();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..d.n_penalized()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..d.n_penalized()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let pa = d.synthesize(0.3, &a).unwrap();
        let pb = d.synthesize(-0.1, &b).unwrap();
        let pab = d.synthesize(0.2, &ab).unwrap();
        for k in 0..32 {
            assert!((pa.values()[k] + pb.values()[k] - pab.values()[k]).abs() < 1e-12);
        }
        let v: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut adj = vec![0.0; d.n_penalized()];
        let a0 = d.adjoint_into(&v, &mut adj).unwrap();
        let lhs: f64 = pa.values().iter().zip(&v).map(|(x, y)| x * y).sum();
        let rhs: f64 = 0.3 * a0 + a.iter().zip(&adj).map(|(x, y)| x * y).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}
