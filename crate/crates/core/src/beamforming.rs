//! Zero-forcing precoding and SINR/rate evaluation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{equilibrated_condition, hermitian_pd_inverse, inner, pseudo_inverse, ComplexMatrix};
use crate::power::PowerAllocation;

/// Unit-norm ZF directions plus the effective channel power each one sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    /// `N×K`, column `k` is the unit-norm direction `w_k`.
    pub directions: ComplexMatrix,
    /// `γ_k = 1/‖G†e_k‖²`.
    pub gains: Vec<f64>,
}

impl Beamformer {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// Normalizes the columns of `G†` and records their inverse squared norms.
pub fn zf_beamformer(g: &ComplexMatrix, rtol: f64) -> Result<Beamformer> {
    let raw = pseudo_inverse(g, rtol)?;
    let k = raw.cols();
    let norms: Vec<f64> = (0..k)
        .map(|j| raw.column(j).iter().map(Complex64::norm_sqr).sum::<f64>())
        .collect();
    let directions = ComplexMatrix::from_fn(raw.rows(), k, |i, j| raw[(i, j)] / norms[j].sqrt());
    Ok(Beamformer {
        directions,
        gains: norms.iter().map(|n| 1.0 / n).collect(),
    })
}

/// ZF gains straight from the Gram matrix: `γ_k = 1/[(G·Gᴴ)⁻¹]_{kk}`.
pub fn zf_gains_from_gram(gram: &ComplexMatrix, rtol: f64) -> Result<Vec<f64>> {
    let condition = equilibrated_condition(gram);
    let limit = 1.0 / rtol;
    if !(condition < limit) {
        return Err(Error::SingularChannel { condition, limit });
    }
    let inv = hermitian_pd_inverse(gram).ok_or(Error::SingularChannel { condition, limit })?;
    Ok((0..gram.rows()).map(|k| 1.0 / inv[(k, k)].re).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateVector {
    pub sinr: Vec<f64>,
    /// bits/s/Hz
    pub rates: Vec<f64>,
    pub sum_rate: f64,
}

impl RateVector {
    fn from_sinr(sinr: Vec<f64>) -> Self {
        let rates: Vec<f64> = sinr.iter().map(|s| (1.0 + s).log2()).collect();
        let sum_rate = rates.iter().sum();
        Self { sinr, rates, sum_rate }
    }
}

/// Interference-free SINR `p_k·γ_k/σ²` of a ZF beamformer.
pub fn sinr_zf(gains: &[f64], powers: &PowerAllocation, noise: f64) -> Result<RateVector> {
    if !(noise > 0.0) {
        return Err(Error::InvalidNoise(noise));
    }
    if gains.len() != powers.powers.len() {
        return Err(Error::Shape(format!(
            "{} gains but {} powers",
            gains.len(),
            powers.powers.len()
        )));
    }
    Ok(RateVector::from_sinr(
        gains.iter().zip(&powers.powers).map(|(g, p)| p * g / noise).collect(),
    ))
}

/// SINR with multiuser interference for an arbitrary precoder.
/// `channels[k]` is device `k`'s effective channel `g_k`; `directions` is `N×K`.
pub fn sinr_general(
    channels: &[Vec<Complex64>],
    directions: &ComplexMatrix,
    powers: &[f64],
    noise: f64,
) -> Result<RateVector> {
    if !(noise > 0.0) {
        return Err(Error::InvalidNoise(noise));
    }
    let k_count = channels.len();
    if directions.cols() != k_count || powers.len() != k_count {
        return Err(Error::Shape(format!(
            "{} channels, {} beams, {} powers",
            k_count,
            directions.cols(),
            powers.len()
        )));
    }
    if channels.iter().any(|g| g.len() != directions.rows()) {
        return Err(Error::Shape("channel length differs from antenna count".into()));
    }
    let beams: Vec<Vec<Complex64>> = (0..k_count).map(|i| directions.column(i)).collect();
    let sinr = (0..k_count)
        .map(|k| {
            let mut interference = 0.0;
            let mut signal = 0.0;
            for (i, w) in beams.iter().enumerate() {
                let v = powers[i] * inner(&channels[k], w).norm_sqr();
                if i == k {
                    signal = v;
                } else {
                    interference += v;
                }
            }
            signal / (interference + noise)
        })
        .collect();
    Ok(RateVector::from_sinr(sinr))
}
