//! Orthonormal periodic discrete wavelet transform with Daubechies filters.
//!
//! Coefficient layout after `depth` levels on a length-`L` signal:
//! `[approx (L / 2^depth) | detail depth | ... | detail 1 (L/2)]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
const DB2: [f64; 4] = [
    0.48296291314453414337,
    0.83651630373780790558,
    0.22414386804201338103,
    -0.12940952255126038117,
];
const DB3: [f64; 6] = [
    0.332670552950082616,
    0.80689150931109257649,
    0.4598775021184915701,
    -0.1350110200102545887,
    -0.085441273882026661693,
    0.035226291885709536603,
];
const DB4: [f64; 8] = [
    0.23037781330889650086,
    0.71484657055291564709,
    0.63088076792985890788,
    -0.027983769416859854211,
    -0.18703481171909308408,
    0.030841381835560763627,
    0.032883011666885199735,
    -0.010597401785069032105,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletFamily {
    Daubechies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    /// 1 (Haar) to 4.
    pub vanishing_moments: usize,
    /// Decomposition levels; `None` means full depth `log2 L`.
    pub depth: Option<usize>,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        Self { family: WaveletFamily::Daubechies, vanishing_moments: 4, depth: None }
    }
}

impl WaveletSpec {
    pub fn haar() -> Self {
        Self { vanishing_moments: 1, ..Self::default() }
    }

    pub fn lowpass(&self) -> Result<&'static [f64]> {
        match self.vanishing_moments {
            1 => Ok(&HAAR),
            2 => Ok(&DB2),
            3 => Ok(&DB3),
            4 => Ok(&DB4),
            v => Err(Error::InvalidParameter(format!(
                "vanishing_moments = {v}: daubechies filters exist for 1..=4 only"
            ))),
        }
    }

    pub fn levels(&self, len: usize) -> Result<usize> {
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidDimension(format!(
                "wavelet signal length {len} is not a power of two >= 2"
            )));
        }
        let full = len.trailing_zeros() as usize;
        match self.depth {
            None => Ok(full),
            Some(d) if d >= 1 && d <= full => Ok(d),
            Some(d) => Err(Error::InvalidParameter(format!(
                "wavelet depth {d} must lie in 1..={full} for length {len}"
            ))),
        }
    }
}

fn highpass(h: &[f64]) -> Vec<f64> {
    let n = h.len();
    (0..n).map(|i| if i % 2 == 0 { h[n - 1 - i] } else { -h[n - 1 - i] }).collect()
}

/// Periodic orthonormal wavelet transform bound to one signal length.
#[derive(Debug, Clone)]
pub struct WaveletTransform {
    len: usize,
    levels: usize,
    h: Vec<f64>,
    g: Vec<f64>,
}

impl WaveletTransform {
    pub fn new(spec: &WaveletSpec, len: usize) -> Result<Self> {
        let levels = spec.levels(len)?;
        let h = spec.lowpass()?.to_vec();
        let g = highpass(&h);
        Ok(Self { len, levels, h, g })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn analyze_into(&self, signal: &[f64], coeffs: &mut [f64]) -> Result<()> {
        self.check(signal.len())?;
        self.check(coeffs.len())?;
        coeffs.copy_from_slice(signal);
        let mut tmp = vec![0.0; self.len];
        let mut m = self.len;
        for _ in 0..self.levels {
            let half = m / 2;
            for k in 0..half {
                let (mut a, mut d) = (0.0, 0.0);
                for (i, (h, g)) in self.h.iter().zip(&self.g).enumerate() {
                    let x = coeffs[(2 * k + i) % m];
                    a += h * x;
                    d += g * x;
                }
                tmp[k] = a;
                tmp[half + k] = d;
            }
            coeffs[..m].copy_from_slice(&tmp[..m]);
            m = half;
        }
        Ok(())
    }

    pub fn synthesize_into(&self, coeffs: &[f64], signal: &mut [f64]) -> Result<()> {
        self.check(coeffs.len())?;
        self.check(signal.len())?;
        signal.copy_from_slice(coeffs);
        let mut tmp = vec![0.0; self.len];
        let mut m = self.len >> (self.levels - 1);
        for _ in 0..self.levels {
            let half = m / 2;
            tmp[..m].iter_mut().for_each(|t| *t = 0.0);
            for k in 0..half {
                let (a, d) = (signal[k], signal[half + k]);
                for (i, (h, g)) in self.h.iter().zip(&self.g).enumerate() {
                    tmp[(2 * k + i) % m] += h * a + g * d;
                }
            }
            signal[..m].copy_from_slice(&tmp[..m]);
            m *= 2;
        }
        Ok(())
    }

    pub fn analyze(&self, signal: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len];
        self.analyze_into(signal, &mut out)?;
        Ok(out)
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len];
        self.synthesize_into(coeffs, &mut out)?;
        Ok(out)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.len {
            return Err(Error::DimensionMismatch(format!(
                "wavelet transform of length {} applied to length {len}",
                self.len
            )));
        }
        Ok(())
    }
}

pub fn wavelet_analyze(signal: &[f64], spec: &WaveletSpec) -> Result<Vec<f64>> {
    WaveletTransform::new(spec, signal.len())?.analyze(signal)
}

pub fn wavelet_synthesize(coeffs: &[f64], spec: &WaveletSpec) -> Result<Vec<f64>> {
    WaveletTransform::new(spec, coeffs.len())?.synthesize(coeffs)
}
