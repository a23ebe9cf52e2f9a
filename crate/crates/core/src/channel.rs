//! Line-of-sight RIS channels and the stacked zero-forcing channel matrix.
//!
//! Every hop follows free-space path loss evaluated at the panel-center
//! distance, while phases use exact element-to-antenna and element-to-device
//! distances. Reflection amplitudes are fixed at one.
//!
//! Two representations are provided. [`ChannelRealization`] materializes
//! every `M×N` matrix and is meant for small arrays. [`CascadeTable`] keeps
//! only what the optimizer needs at full array size: once a panel is
//! co-phased toward the reference antenna, the device-side phases cancel and
//! every pair's cascade through panel `l` is a scalar multiple of the same
//! length-`N` vector.

use num_complex::Complex64;

use crate::association::Association;
use crate::error::{Error, Result};
use crate::geometry::{distance, path_loss_linear, CarrierConfig, NetworkGeometry};
use crate::numerics::{inner, norm_sqr, ComplexMatrix};

/// Antenna the RIS phases are aligned to.
pub const REFERENCE_ANTENNA: usize = 0;

/// Diagonal RIS reflection matrix, stored as its unit-modulus diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RisConfig {
    diagonal: Vec<Complex64>,
}

impl RisConfig {
    pub fn identity(elements: usize) -> Self {
        Self {
            diagonal: vec![Complex64::new(1.0, 0.0); elements],
        }
    }

    /// Builds a configuration from phase shifts in radians (amplitude one).
    pub fn from_phases(phases: &[f64]) -> Self {
        Self {
            diagonal: phases.iter().map(|&t| Complex64::from_polar(1.0, t)).collect(),
        }
    }

    pub fn diagonal(&self) -> &[Complex64] {
        &self.diagonal
    }

    /// Phase shifts wrapped to `[0, 2π)`.
    pub fn phases(&self) -> Vec<f64> {
        self.diagonal
            .iter()
            .map(|z| z.arg().rem_euclid(std::f64::consts::TAU))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }
}

fn element_distances(geom: &NetworkGeometry, cfg: &CarrierConfig, l: usize, target: [f64; 3]) -> Result<Vec<f64>> {
    geom.element_positions(l, cfg.element_side)
        .into_iter()
        .map(|e| distance(e, target))
        .collect()
}

/// `M×N` AP→RIS channel of panel `l`: magnitude `√PL(r_a,l)`, phase `−ω·r`
/// with `r` the distance from antenna `n` to element `m`.
pub fn gen_ap_ris_channel(geom: &NetworkGeometry, cfg: &CarrierConfig, l: usize) -> Result<ComplexMatrix> {
    let site = geom.ris()[l].position;
    let amplitude = path_loss_linear(cfg.carrier_frequency, distance(geom.ap_position(), site)?)?.sqrt();
    let omega = cfg.wave_number();
    let elements = geom.element_positions(l, cfg.element_side);
    let antennas = geom.antenna_positions(cfg.wavelength() / 2.0);
    let mut data = Vec::with_capacity(elements.len() * antennas.len());
    for e in &elements {
        for a in &antennas {
            data.push(Complex64::from_polar(amplitude, -omega * distance(*e, *a)?));
        }
    }
    ComplexMatrix::from_row_major(elements.len(), antennas.len(), data)
}

/// Length-`M` channel from panel `l`'s elements to device `k`.
pub fn gen_ris_device_channel(
    geom: &NetworkGeometry,
    cfg: &CarrierConfig,
    l: usize,
    k: usize,
) -> Result<Vec<Complex64>> {
    let device = geom.devices()[k];
    let amplitude = path_loss_linear(cfg.carrier_frequency, distance(geom.ris()[l].position, device)?)?.sqrt();
    let omega = cfg.wave_number();
    Ok(element_distances(geom, cfg, l, device)?
        .into_iter()
        .map(|r| Complex64::from_polar(amplitude, -omega * r))
        .collect())
}

/// Co-phases every reflected path so they add coherently at
/// `reference_antenna`: `θ_m = −arg(conj(H[m, ref]) · h_m)`.
pub fn configure_ris_phases(
    ap_ris: &ComplexMatrix,
    ris_device: &[Complex64],
    reference_antenna: usize,
) -> Result<RisConfig> {
    if ap_ris.rows() != ris_device.len() {
        return Err(Error::Shape(format!(
            "AP-RIS channel has {} elements, RIS-device channel {}",
            ap_ris.rows(),
            ris_device.len()
        )));
    }
    if reference_antenna >= ap_ris.cols() {
        return Err(Error::Shape(format!(
            "reference antenna {reference_antenna} out of {} antennas",
            ap_ris.cols()
        )));
    }
    let diagonal = ris_device
        .iter()
        .enumerate()
        .map(|(m, h)| {
            let path = ap_ris[(m, reference_antenna)].conj() * h;
            if path.norm() == 0.0 {
                return Err(Error::DegenerateChannel(m));
            }
            Ok((path / path.norm()).conj())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RisConfig { diagonal })
}

/// `g = Hᴴ·Θ·h`.
pub fn cascaded_channel(
    ap_ris: &ComplexMatrix,
    config: &RisConfig,
    ris_device: &[Complex64],
) -> Result<Vec<Complex64>> {
    let m = ap_ris.rows();
    if config.len() != m || ris_device.len() != m {
        return Err(Error::Shape(format!(
            "H is {}x{}, Θ has {} entries, h has {}",
            m,
            ap_ris.cols(),
            config.len(),
            ris_device.len()
        )));
    }
    let mut g = vec![Complex64::new(0.0, 0.0); ap_ris.cols()];
    for (row, (t, h)) in config.diagonal().iter().zip(ris_device).enumerate() {
        let x = t * h;
        for (gn, a) in g.iter_mut().zip(ap_ris.row(row)) {
            *gn += a.conj() * x;
        }
    }
    Ok(g)
}

/// Source of per-pair cascades `g_{l,k}` (panel `l` co-phased toward device `k`).
pub trait CascadeSource {
    fn num_ris(&self) -> usize;
    fn num_devices(&self) -> usize;
    fn num_antennas(&self) -> usize;
    fn cascade(&self, l: usize, k: usize) -> Vec<Complex64>;

    /// `‖g_{l,k}‖²`.
    fn gain(&self, l: usize, k: usize) -> f64 {
        norm_sqr(&self.cascade(l, k))
    }

    /// `g_{l1,k1}ᴴ · g_{l2,k2}`.
    fn cross(&self, a: (usize, usize), b: (usize, usize)) -> Complex64 {
        inner(&self.cascade(a.0, a.1), &self.cascade(b.0, b.1))
    }

    /// True when every cascade through a panel is a positive multiple of one
    /// per-panel vector, so `g_{l,k} = √(gain(l,k)/gain(l,0))·g_{l,0}`.
    fn collinear_per_panel(&self) -> bool {
        false
    }
}

/// Zero-forcing channel for the matched devices.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedChannel {
    /// `K'×N`; row `i` is `g_{l(k),k}ᴴ` for `k = served[i]`.
    pub matrix: ComplexMatrix,
    /// Device index of each row, ascending.
    pub served: Vec<usize>,
    /// Devices left without a panel; they are scored at zero rate.
    pub unserved: Vec<usize>,
}

pub fn assemble_channel_matrix<S: CascadeSource + ?Sized>(source: &S, assoc: &Association) -> Result<StackedChannel> {
    if assoc.num_devices() != source.num_devices() || assoc.num_ris() != source.num_ris() {
        return Err(Error::InvalidAssociation(format!(
            "association is {}x{}, channels are {}x{}",
            assoc.num_devices(),
            assoc.num_ris(),
            source.num_devices(),
            source.num_ris()
        )));
    }
    let pairs: Vec<(usize, usize)> = assoc.pairs().collect();
    let n = source.num_antennas();
    let mut data = Vec::with_capacity(pairs.len() * n);
    for &(k, l) in &pairs {
        data.extend(source.cascade(l, k).into_iter().map(|z| z.conj()));
    }
    Ok(StackedChannel {
        matrix: ComplexMatrix::from_row_major(pairs.len(), n, data)?,
        served: pairs.iter().map(|p| p.0).collect(),
        unserved: assoc.unmatched(),
    })
}

/// Gram matrix `G·Gᴴ` of the stacked channel, read straight from the source.
pub fn stacked_gram<S: CascadeSource + ?Sized>(source: &S, assoc: &Association) -> ComplexMatrix {
    let pairs: Vec<(usize, usize)> = assoc.pairs().map(|(k, l)| (l, k)).collect();
    let n = pairs.len();
    let mut gram = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        gram[(i, i)] = Complex64::new(source.gain(pairs[i].0, pairs[i].1), 0.0);
        for j in i + 1..n {
            // Row i of G is g_iᴴ, so (G·Gᴴ)_{ij} = g_iᴴ·g_j.
            let v = source.cross(pairs[i], pairs[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v.conj();
        }
    }
    gram
}

/// Fully materialized channels of one deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `H_l`, one `M×N` matrix per panel.
    pub ap_ris: Vec<ComplexMatrix>,
    /// `h_{l,k}`, indexed `[l][k]`.
    pub ris_device: Vec<Vec<Vec<Complex64>>>,
    /// Co-phased `g_{l,k}`, indexed `[l][k]`.
    pub cascaded: Vec<Vec<Vec<Complex64>>>,
}

impl ChannelRealization {
    pub fn generate(geom: &NetworkGeometry, cfg: &CarrierConfig) -> Result<Self> {
        let (l_count, k_count) = (geom.num_ris(), geom.num_devices());
        let mut ap_ris = Vec::with_capacity(l_count);
        let mut ris_device = Vec::with_capacity(l_count);
        let mut cascaded = Vec::with_capacity(l_count);
        for l in 0..l_count {
            let h = gen_ap_ris_channel(geom, cfg, l)?;
            let devs = (0..k_count)
                .map(|k| gen_ris_device_channel(geom, cfg, l, k))
                .collect::<Result<Vec<_>>>()?;
            let casc = devs
                .iter()
                .map(|d| cascaded_channel(&h, &configure_ris_phases(&h, d, REFERENCE_ANTENNA)?, d))
                .collect::<Result<Vec<_>>>()?;
            ap_ris.push(h);
            ris_device.push(devs);
            cascaded.push(casc);
        }
        Ok(Self {
            ap_ris,
            ris_device,
            cascaded,
        })
    }

    /// Reflection matrices for an association: each matched panel co-phased
    /// toward its device, idle panels left at identity.
    pub fn ris_configs(&self, assoc: &Association) -> Result<Vec<RisConfig>> {
        (0..self.ap_ris.len())
            .map(|l| match assoc.device_of(l) {
                Some(k) => configure_ris_phases(&self.ap_ris[l], &self.ris_device[l][k], REFERENCE_ANTENNA),
                None => Ok(RisConfig::identity(self.ap_ris[l].rows())),
            })
            .collect()
    }

    pub fn stacked(&self, assoc: &Association) -> Result<StackedChannel> {
        assemble_channel_matrix(self, assoc)
    }
}

impl CascadeSource for ChannelRealization {
    fn num_ris(&self) -> usize {
        self.ap_ris.len()
    }

    fn num_devices(&self) -> usize {
        self.ris_device.first().map_or(0, Vec::len)
    }

    fn num_antennas(&self) -> usize {
        self.ap_ris.first().map_or(0, ComplexMatrix::cols)
    }

    fn cascade(&self, l: usize, k: usize) -> Vec<Complex64> {
        self.cascaded[l][k].clone()
    }
}

/// Compact co-phased cascades: `g_{l,k} = a_{l,k} · u_l` where
/// `u_l[n] = Σ_m exp(jω(r_{m,n} − r_{m,ref}))` and `a_{l,k} = √(PL_{a,l}·PL_{l,k})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeTable {
    directions: Vec<Vec<Complex64>>,
    /// `[l][k]`
    amplitudes: Vec<Vec<f64>>,
    /// `u_iᴴ·u_j`
    direction_gram: ComplexMatrix,
}

impl CascadeTable {
    pub fn generate(geom: &NetworkGeometry, cfg: &CarrierConfig) -> Result<Self> {
        let omega = cfg.wave_number();
        let antennas = geom.antenna_positions(cfg.wavelength() / 2.0);
        let mut directions = Vec::with_capacity(geom.num_ris());
        let mut amplitudes = Vec::with_capacity(geom.num_ris());
        for (l, site) in geom.ris().iter().enumerate() {
            let ap_gain = path_loss_linear(cfg.carrier_frequency, distance(geom.ap_position(), site.position)?)?;
            amplitudes.push(
                geom.devices()
                    .iter()
                    .map(|&d| {
                        let dev_gain = path_loss_linear(cfg.carrier_frequency, distance(site.position, d)?)?;
                        Ok((ap_gain * dev_gain).sqrt())
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
            directions.push(panel_direction(
                &geom.element_positions(l, cfg.element_side),
                &antennas,
                omega,
            ));
        }
        let l_count = directions.len();
        let mut direction_gram = ComplexMatrix::zeros(l_count, l_count);
        for i in 0..l_count {
            for j in i..l_count {
                let v = inner(&directions[i], &directions[j]);
                direction_gram[(i, j)] = v;
                direction_gram[(j, i)] = v.conj();
            }
        }
        Ok(Self {
            directions,
            amplitudes,
            direction_gram,
        })
    }

    pub fn amplitude(&self, l: usize, k: usize) -> f64 {
        self.amplitudes[l][k]
    }

    pub fn direction(&self, l: usize) -> &[Complex64] {
        &self.directions[l]
    }
}

fn panel_direction(elements: &[[f64; 3]], antennas: &[[f64; 3]], omega: f64) -> Vec<Complex64> {
    let n = antennas.len();
    let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
    let ax: Vec<f64> = antennas.iter().map(|a| a[0]).collect();
    let ay: Vec<f64> = antennas.iter().map(|a| a[1]).collect();
    let az: Vec<f64> = antennas.iter().map(|a| a[2]).collect();
    let reference = antennas[REFERENCE_ANTENNA];
    let mut phase = vec![0.0; n];
    for e in elements {
        let r_ref = dist(*e, reference);
        for i in 0..n {
            let d = ((e[0] - ax[i]).powi(2) + (e[1] - ay[i]).powi(2) + (e[2] - az[i]).powi(2)).sqrt();
            phase[i] = omega * (d - r_ref);
        }
        for i in 0..n {
            let (s, c) = sin_cos(phase[i]);
            re[i] += c;
            im[i] += s;
        }
    }
    re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect()
}

/// Branch-free `(sin x, cos x)` for moderate `|x|` (well under 2⁵⁰), written
/// so the panel loop vectorizes. Accurate to a few ulps of `|x|·ε`.
#[inline(always)]
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    const MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5·2⁵²
    const PIO2_HI: f64 = 1.570_796_326_734_125_6;
    const PIO2_LO: f64 = 6.077_100_506_506_192e-11;
    let shifted = x * std::f64::consts::FRAC_2_PI + MAGIC;
    let quadrant = shifted.to_bits();
    let q = shifted - MAGIC;
    let r = (x - q * PIO2_HI) - q * PIO2_LO;
    let r2 = r * r;
    let sin_r = r
        * (1.0
            + r2 * (-1.0 / 6.0
                + r2 * (1.0 / 120.0
                    + r2 * (-1.0 / 5040.0
                        + r2 * (1.0 / 362_880.0
                            + r2 * (-1.0 / 39_916_800.0
                                + r2 * (1.0 / 6_227_020_800.0 + r2 * (-1.0 / 1_307_674_368_000.0))))))));
    let cos_r = 1.0
        + r2 * (-0.5
            + r2 * (1.0 / 24.0
                + r2 * (-1.0 / 720.0
                    + r2 * (1.0 / 40_320.0
                        + r2 * (-1.0 / 3_628_800.0
                            + r2 * (1.0 / 479_001_600.0
                                + r2 * (-1.0 / 87_178_291_200.0 + r2 * (1.0 / 20_922_789_888_000.0))))))));
    let odd = (quadrant & 1) as f64;
    let (s, c) = (odd * cos_r + (1.0 - odd) * sin_r, odd * sin_r + (1.0 - odd) * cos_r);
    let sin_sign = 1.0 - 2.0 * ((quadrant >> 1) & 1) as f64;
    let cos_sign = 1.0 - 2.0 * ((quadrant.wrapping_add(1) >> 1) & 1) as f64;
    (sin_sign * s, cos_sign * c)
}

#[inline]
fn dist(p: [f64; 3], q: [f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

impl CascadeSource for CascadeTable {
    fn collinear_per_panel(&self) -> bool {
        true
    }

    fn num_ris(&self) -> usize {
        self.directions.len()
    }

    fn num_devices(&self) -> usize {
        self.amplitudes.first().map_or(0, Vec::len)
    }

    fn num_antennas(&self) -> usize {
        self.directions.first().map_or(0, Vec::len)
    }

    fn cascade(&self, l: usize, k: usize) -> Vec<Complex64> {
        let a = self.amplitudes[l][k];
        self.directions[l].iter().map(|u| u * a).collect()
    }

    fn gain(&self, l: usize, k: usize) -> f64 {
        self.amplitudes[l][k].powi(2) * self.direction_gram[(l, l)].re
    }

    fn cross(&self, a: (usize, usize), b: (usize, usize)) -> Complex64 {
        self.direction_gram[(a.0, b.0)] * (self.amplitudes[a.0][a.1] * self.amplitudes[b.0][b.1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{LayoutParams, RisSite, RisTier};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single_link(ris_at: [f64; 3], device: [f64; 3], n: usize, my: usize, mz: usize) -> NetworkGeometry {
        NetworkGeometry::new(
            [0.0, 0.0, 25.0],
            vec![RisSite {
                position: ris_at,
                tier: RisTier::Terrestrial,
            }],
            vec![device],
            n,
            my,
            mz,
        )
        .unwrap()
    }

    #[test]
    fn fast_sin_cos_matches_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200_000 {
            let x: f64 = rng.gen_range(-5e4..5e4);
            let (s, c) = sin_cos(x);
            let tol = 4.0 * f64::EPSILON * x.abs().max(1.0);
            assert!((s - x.sin()).abs() < tol && (c - x.cos()).abs() < tol, "{x}");
        }
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
        for x in [0.0, 1e-300, -FRAC_PI_4, PI, -FRAC_PI_2] {
            let (s, c) = sin_cos(x);
            assert!((s - x.sin()).abs() < 1e-15 && (c - x.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn ap_ris_entries_have_center_distance_magnitude() {
        let cfg = CarrierConfig::default();
        let g = single_link([80.0, 40.0, 25.0], [10.0, 10.0, 1.5], 4, 3, 2);
        let h = gen_ap_ris_channel(&g, &cfg, 0).unwrap();
        assert_eq!((h.rows(), h.cols()), (6, 4));
        let r = distance(g.ap_position(), g.ris()[0].position).unwrap();
        let pl = path_loss_linear(cfg.carrier_frequency, r).unwrap();
        for z in h.as_slice() {
            assert!((z.norm_sqr() / pl - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_wavelength_phase_is_zero() {
        let cfg = CarrierConfig::default();
        let lambda = cfg.wavelength();
        let g = single_link([0.0, 0.0, 25.0 + lambda], [5.0, 0.0, 1.5], 1, 1, 1);
        let h = gen_ap_ris_channel(&g, &cfg, 0).unwrap();
        assert!(h[(0, 0)].arg().abs() < 1e-9);
    }

    #[test]
    fn doubling_distance_halves_magnitude() {
        let cfg = CarrierConfig::default();
        let near = gen_ap_ris_channel(&single_link([100.0, 0.0, 25.0], [0.0; 3], 1, 1, 1), &cfg, 0).unwrap();
        let far = gen_ap_ris_channel(&single_link([200.0, 0.0, 25.0], [0.0; 3], 1, 1, 1), &cfg, 0).unwrap();
        assert!((near[(0, 0)].norm() / far[(0, 0)].norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ris_device_channel_magnitudes_and_norm() {
        let cfg = CarrierConfig::default();
        let g = single_link([80.0, 40.0, 25.0], [10.0, 10.0, 1.5], 2, 4, 4);
        let h = gen_ris_device_channel(&g, &cfg, 0, 0).unwrap();
        let r = distance(g.ris()[0].position, g.devices()[0]).unwrap();
        let pl = path_loss_linear(cfg.carrier_frequency, r).unwrap();
        assert!(h.iter().all(|z| (z.norm_sqr() / pl - 1.0).abs() < 1e-12));
        assert!((norm_sqr(&h) / (16.0 * pl) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_element_boresight_phase_matches_center_distance() {
        let cfg = CarrierConfig::default();
        let g = single_link([0.0, 0.0, 25.0], [300.0, 0.0, 25.0], 1, 1, 1);
        let h = gen_ris_device_channel(&g, &cfg, 0, 0).unwrap();
        let expect = Complex64::from_polar(h[0].norm(), -cfg.wave_number() * 300.0);
        assert!((h[0] - expect).norm() < 1e-9 * h[0].norm());
    }

    #[test]
    fn zero_phase_paths_give_identity() {
        let h = ComplexMatrix::from_rows(&[vec![c(2.0, 0.0), c(0.0, 1.0)], vec![c(0.5, 0.0), c(1.0, 0.0)]]).unwrap();
        let cfg = configure_ris_phases(&h, &[c(3.0, 0.0), c(1.0, 0.0)], 0).unwrap();
        assert!(cfg.diagonal().iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn degenerate_entry_rejected() {
        let h = ComplexMatrix::from_rows(&[vec![c(0.0, 0.0)], vec![c(1.0, 0.0)]]).unwrap();
        assert!(matches!(
            configure_ris_phases(&h, &[c(1.0, 0.0), c(1.0, 0.0)], 0),
            Err(Error::DegenerateChannel(0))
        ));
    }

    fn random_c(rng: &mut ChaCha8Rng) -> Complex64 {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn cophasing_reaches_magnitude_bound_and_beats_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let h = ComplexMatrix::from_fn(4, 3, |_, _| random_c(&mut rng));
            let d: Vec<_> = (0..4).map(|_| random_c(&mut rng)).collect();
            let theta = configure_ris_phases(&h, &d, REFERENCE_ANTENNA).unwrap();
            assert!(theta.diagonal().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            let g = cascaded_channel(&h, &theta, &d).unwrap();
            let bound: f64 = (0..4).map(|m| h[(m, 0)].norm() * d[m].norm()).sum();
            assert!((g[0].norm() - bound).abs() < 1e-12 * bound);
            assert!((g[0].im).abs() < 1e-12 * bound);
            let plain = cascaded_channel(&h, &RisConfig::identity(4), &d).unwrap();
            assert!(g[0].norm() >= plain[0].norm() - 1e-12);
        }
    }

    #[test]
    fn cascade_scalar_case() {
        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 2.0)]]).unwrap();
        let g = cascaded_channel(&h, &RisConfig::identity(1), &[c(3.0, -1.0)]).unwrap();
        assert!((g[0] - c(1.0, -2.0) * c(3.0, -1.0)).norm() < 1e-15);
        let zero = cascaded_channel(&h, &RisConfig::identity(1), &[c(0.0, 0.0)]).unwrap();
        assert_eq!(zero[0], c(0.0, 0.0));
    }

    #[test]
    fn cascade_two_by_two_by_hand() {
        // H = [[1, i], [2, 1-i]], Θ = diag(i, -1), h = [1+i, 2]
        let h = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 1.0)], vec![c(2.0, 0.0), c(1.0, -1.0)]]).unwrap();
        let theta = RisConfig::from_phases(&[std::f64::consts::FRAC_PI_2, std::f64::consts::PI]);
        let g = cascaded_channel(&h, &theta, &[c(1.0, 1.0), c(2.0, 0.0)]).unwrap();
        // Θh = [i(1+i), -2] = [-1+i, -2]
        // g0 = conj(1)(-1+i) + conj(2)(-2) = -5+i
        // g1 = conj(i)(-1+i) + conj(1-i)(-2) = (1+i) + (-2-2i) = -1-i
        assert!((g[0] - c(-5.0, 1.0)).norm() < 1e-12);
        assert!((g[1] - c(-1.0, -1.0)).norm() < 1e-12);
        assert!(cascaded_channel(&h, &RisConfig::identity(3), &[c(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn compact_table_matches_explicit_channels() {
        let cfg = CarrierConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let geom = LayoutParams::default().sample(&mut rng, 3, 3, 6, 3, 4).unwrap();
            let full = ChannelRealization::generate(&geom, &cfg).unwrap();
            let compact = CascadeTable::generate(&geom, &cfg).unwrap();
            for l in 0..3 {
                for k in 0..3 {
                    let a = full.cascade(l, k);
                    let b = compact.cascade(l, k);
                    let scale = norm_sqr(&a).sqrt();
                    let err: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
                    assert!(err <= 1e-6 * scale, "pair ({l},{k}): {err} vs {scale}");
                    assert!((full.gain(l, k) / compact.gain(l, k) - 1.0).abs() < 1e-6);
                }
            }
            let cross_full = full.cross((0, 1), (2, 0));
            let cross_compact = compact.cross((0, 1), (2, 0));
            assert!((cross_full - cross_compact).norm() <= 1e-6 * cross_full.norm().max(1e-300));
        }
    }

    #[test]
    fn stacked_rows_follow_association() {
        let cfg = CarrierConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let geom = LayoutParams::default().sample(&mut rng, 3, 3, 4, 2, 2).unwrap();
        let real = ChannelRealization::generate(&geom, &cfg).unwrap();
        let assoc = Association::from_pairs(3, 3, &[(0, 2), (1, 0), (2, 1)]).unwrap();
        let stacked = real.stacked(&assoc).unwrap();
        assert_eq!(stacked.served, vec![0, 1, 2]);
        // Element-wise reconstruction of each row from H, Θ and h.
        let configs = real.ris_configs(&assoc).unwrap();
        for (row, (k, l)) in assoc.pairs().enumerate() {
            let g = cascaded_channel(&real.ap_ris[l], &configs[l], &real.ris_device[l][k]).unwrap();
            for (n, gn) in g.iter().enumerate() {
                assert!((stacked.matrix[(row, n)] - gn.conj()).norm() < 1e-15);
            }
        }
        let gram = stacked_gram(&real, &assoc);
        assert!(gram.sub(&stacked.matrix.gram()).unwrap().frobenius_norm() < 1e-12 * gram.frobenius_norm());

        let swapped = Association::from_pairs(3, 3, &[(0, 0), (1, 2), (2, 1)]).unwrap();
        let s2 = real.stacked(&swapped).unwrap();
        assert_eq!(s2.matrix.row(0), conj(&real.cascaded[0][0]).as_slice());
        assert_eq!(s2.matrix.row(1), conj(&real.cascaded[2][1]).as_slice());
    }

    #[test]
    fn single_pair_stack_and_unmatched_rows() {
        let cfg = CarrierConfig::default();
        let geom = single_link([60.0, 0.0, 25.0], [50.0, 20.0, 1.5], 2, 2, 2);
        let real = ChannelRealization::generate(&geom, &cfg).unwrap();
        let one = Association::from_pairs(1, 1, &[(0, 0)]).unwrap();
        let s = real.stacked(&one).unwrap();
        assert_eq!(s.matrix.rows(), 1);
        assert_eq!(s.matrix.row(0), conj(&real.cascaded[0][0]).as_slice());
        let none = Association::from_pairs(1, 1, &[]).unwrap();
        let s = real.stacked(&none).unwrap();
        assert_eq!((s.matrix.rows(), s.unserved.clone()), (0, vec![0]));
    }

    fn conj(v: &[Complex64]) -> Vec<Complex64> {
        v.iter().map(|z| z.conj()).collect()
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = CarrierConfig::default();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let geom = LayoutParams::default().sample(&mut rng, 2, 2, 3, 2, 2).unwrap();
            (
                ChannelRealization::generate(&geom, &cfg).unwrap(),
                CascadeTable::generate(&geom, &cfg).unwrap(),
            )
        };
        assert_eq!(draw(), draw());
    }
}
