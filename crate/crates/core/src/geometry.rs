//! Network layout, carrier parameters and link-budget helpers.

use rand::Rng;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Cartesian position in meters.
pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RisTier {
    Terrestrial,
    Haps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RisSite {
    pub position: Point,
    pub tier: RisTier,
}

/// Positions of the access point, the RIS panels and the devices, together
/// with the array sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGeometry {
    ap_position: Point,
    ris: Vec<RisSite>,
    devices: Vec<Point>,
    antennas: usize,
    elements_y: usize,
    elements_z: usize,
}

impl NetworkGeometry {
    pub fn new(
        ap_position: Point,
        ris: Vec<RisSite>,
        devices: Vec<Point>,
        antennas: usize,
        elements_y: usize,
        elements_z: usize,
    ) -> Result<Self> {
        if devices.is_empty() || ris.is_empty() || antennas == 0 || elements_y * elements_z == 0 {
            return Err(Error::InvalidGeometry(
                "device, RIS, antenna and element counts must be at least 1".into(),
            ));
        }
        if devices.len() > antennas {
            return Err(Error::InvalidGeometry(format!(
                "zero-forcing needs K <= N (K = {}, N = {antennas})",
                devices.len()
            )));
        }
        let finite = |p: &Point| p.iter().all(|c| c.is_finite());
        if !finite(&ap_position) || !ris.iter().all(|r| finite(&r.position)) || !devices.iter().all(finite) {
            return Err(Error::InvalidGeometry("positions must be finite".into()));
        }
        let max_terrestrial = ris
            .iter()
            .filter(|r| r.tier == RisTier::Terrestrial)
            .map(|r| r.position[2])
            .fold(f64::NEG_INFINITY, f64::max);
        if ris
            .iter()
            .any(|r| r.tier == RisTier::Haps && r.position[2] <= max_terrestrial)
        {
            return Err(Error::InvalidGeometry(
                "HAPS-tier RIS must sit above every terrestrial RIS".into(),
            ));
        }
        Ok(Self {
            ap_position,
            ris,
            devices,
            antennas,
            elements_y,
            elements_z,
        })
    }

    pub fn ap_position(&self) -> Point {
        self.ap_position
    }

    pub fn ris(&self) -> &[RisSite] {
        &self.ris
    }

    pub fn devices(&self) -> &[Point] {
        &self.devices
    }

    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn num_ris(&self) -> usize {
        self.ris.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.antennas
    }

    pub fn elements_y(&self) -> usize {
        self.elements_y
    }

    pub fn elements_z(&self) -> usize {
        self.elements_z
    }

    pub fn num_elements(&self) -> usize {
        self.elements_y * self.elements_z
    }

    /// Centers of RIS `l`'s elements: an `M_y × M_z` grid in the y–z plane,
    /// pitch `element_side`, centered on the panel. Element `m = iy·M_z + iz`.
    pub fn element_positions(&self, l: usize, element_side: f64) -> Vec<Point> {
        let c = self.ris[l].position;
        let oy = (self.elements_y as f64 - 1.0) / 2.0;
        let oz = (self.elements_z as f64 - 1.0) / 2.0;
        let mut out = Vec::with_capacity(self.num_elements());
        for iy in 0..self.elements_y {
            for iz in 0..self.elements_z {
                out.push([
                    c[0],
                    c[1] + (iy as f64 - oy) * element_side,
                    c[2] + (iz as f64 - oz) * element_side,
                ]);
            }
        }
        out
    }

    /// AP antennas as a uniform linear array along x centered on the AP.
    pub fn antenna_positions(&self, spacing: f64) -> Vec<Point> {
        let c = self.ap_position;
        let o = (self.antennas as f64 - 1.0) / 2.0;
        (0..self.antennas)
            .map(|n| [c[0] + (n as f64 - o) * spacing, c[1], c[2]])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierConfig {
    /// Hz
    pub carrier_frequency: f64,
    /// Hz
    pub bandwidth: f64,
    /// dBm/Hz
    pub noise_density: f64,
    /// dB
    pub noise_figure: f64,
    /// RIS element pitch in meters.
    pub element_side: f64,
}

impl CarrierConfig {
    /// Carrier with the element pitch set to half a wavelength.
    pub fn new(carrier_frequency: f64, bandwidth: f64, noise_density: f64, noise_figure: f64) -> Self {
        Self {
            carrier_frequency,
            bandwidth,
            noise_density,
            noise_figure,
            element_side: SPEED_OF_LIGHT / carrier_frequency / 2.0,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// ω = 2πf/c in rad/m.
    pub fn wave_number(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.carrier_frequency / SPEED_OF_LIGHT
    }

    pub fn noise_power(&self) -> Result<f64> {
        noise_power(self.noise_density, self.bandwidth, self.noise_figure)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("carrier_frequency", self.carrier_frequency),
            ("bandwidth", self.bandwidth),
            ("element_side", self.element_side),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation {
                    field: name.into(),
                    reason: "must be positive and finite".into(),
                });
            }
        }
        Ok(())
    }
}

impl Default for CarrierConfig {
    fn default() -> Self {
        Self::new(15e9, 400e6, -174.0, 10.0)
    }
}

pub fn distance(p: Point, q: Point) -> Result<f64> {
    if p.iter().chain(q.iter()).any(|c| !c.is_finite()) {
        return Err(Error::InvalidGeometry("non-finite coordinate".into()));
    }
    Ok(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
}

/// Free-space power gain `(c / 4πfd)²`.
pub fn path_loss_linear(frequency: f64, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::DegenerateDistance(d));
    }
    if !(frequency > 0.0) {
        return Err(Error::InvalidInput(format!(
            "frequency must be positive, got {frequency}"
        )));
    }
    Ok((SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * frequency * d)).powi(2))
}

/// Thermal noise power in watts from a dBm/Hz density, a bandwidth in Hz
/// and a noise figure in dB.
pub fn noise_power(density_dbm_hz: f64, bandwidth: f64, noise_figure_db: f64) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    Ok(dbm_to_watts(
        density_dbm_hz + 10.0 * bandwidth.log10() + noise_figure_db,
    ))
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Placement of the random deployments drawn per Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutParams {
    /// Side of the square device area, centered at the origin.
    pub area_side: f64,
    pub ap_height: f64,
    pub device_height: f64,
    /// Terrestrial RISs sit at uniform angles on a circle of this radius.
    pub ring_radius: f64,
    pub ring_height: f64,
    pub haps_altitude: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            area_side: 500.0,
            ap_height: 25.0,
            device_height: 1.5,
            ring_radius: 150.0,
            ring_height: 25.0,
            haps_altitude: 20_000.0,
        }
    }
}

impl LayoutParams {
    /// Draws one deployment: `num_ris - 1` terrestrial panels on the ring plus
    /// one HAPS panel above the area center, and devices uniform on the ground.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        num_devices: usize,
        num_ris: usize,
        antennas: usize,
        elements_y: usize,
        elements_z: usize,
    ) -> Result<NetworkGeometry> {
        let half = self.area_side / 2.0;
        let mut ris: Vec<RisSite> = (0..num_ris.saturating_sub(1))
            .map(|_| {
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                RisSite {
                    position: [
                        self.ring_radius * phi.cos(),
                        self.ring_radius * phi.sin(),
                        self.ring_height,
                    ],
                    tier: RisTier::Terrestrial,
                }
            })
            .collect();
        if num_ris > 0 {
            ris.push(RisSite {
                position: [0.0, 0.0, self.haps_altitude],
                tier: RisTier::Haps,
            });
        }
        let devices = (0..num_devices)
            .map(|_| {
                [
                    rng.gen_range(-half..half),
                    rng.gen_range(-half..half),
                    self.device_height,
                ]
            })
            .collect();
        NetworkGeometry::new(
            [0.0, 0.0, self.ap_height],
            ris,
            devices,
            antennas,
            elements_y,
            elements_z,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        assert_eq!(distance([0.0; 3], [0.0; 3]).unwrap(), 0.0);
        assert_eq!(distance([3.0, 4.0, 0.0], [0.0; 3]).unwrap(), 5.0);
        assert_eq!(distance([0.0; 3], [0.0, 0.0, 20_000.0]).unwrap(), 20_000.0);
        assert!(matches!(
            distance([f64::NAN, 0.0, 0.0], [0.0; 3]),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn fspl_at_one_meter() {
        // Independent route: 20·log10(4π d f / c) in dB.
        let loss_db = 20.0 * (4.0 * std::f64::consts::PI * 15e9 / SPEED_OF_LIGHT).log10();
        assert!((loss_db - 55.96).abs() < 0.01);
        let g = path_loss_linear(15e9, 1.0).unwrap();
        assert!((g - 10f64.powf(-loss_db / 10.0)).abs() < 1e-18);
        assert!((g - 2.53e-6).abs() < 0.01e-6);
    }

    #[test]
    fn fspl_square_law() {
        let g1 = path_loss_linear(15e9, 1.0).unwrap();
        let g100 = path_loss_linear(15e9, 100.0).unwrap();
        let g20k = path_loss_linear(15e9, 20_000.0).unwrap();
        assert!((g100 / g1 - 1e-4).abs() < 1e-16);
        assert!((g20k / g1 - 2.5e-9).abs() < 1e-20);
        assert!(matches!(path_loss_linear(15e9, 0.0), Err(Error::DegenerateDistance(_))));
    }

    #[test]
    fn noise_examples() {
        let w = noise_power(-174.0, 400e6, 10.0).unwrap();
        assert!((watts_to_dbm(w) - (-77.98)).abs() < 0.01);
        assert!((w - 1.59e-11).abs() < 0.01e-11);
        let unit = noise_power(-174.0, 1.0, 0.0).unwrap();
        assert!((watts_to_dbm(unit) + 174.0).abs() < 1e-9);
        let no_nf = noise_power(-174.0, 400e6, 0.0).unwrap();
        assert!((10.0 * (w / no_nf).log10() - 10.0).abs() < 1e-9);
        assert!(noise_power(-174.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn carrier_defaults() {
        let c = CarrierConfig::default();
        assert!((c.element_side - c.wavelength() / 2.0).abs() < 1e-15);
        assert!((c.wave_number() * c.wavelength() - std::f64::consts::TAU).abs() < 1e-12);
    }

    #[test]
    fn geometry_invariants() {
        let ris = vec![RisSite {
            position: [0.0, 0.0, 25.0],
            tier: RisTier::Terrestrial,
        }];
        assert!(NetworkGeometry::new([0.0; 3], ris.clone(), vec![[1.0; 3]; 3], 2, 1, 1).is_err());
        assert!(NetworkGeometry::new([0.0; 3], ris.clone(), vec![], 2, 1, 1).is_err());
        let low_haps = vec![
            ris[0],
            RisSite {
                position: [0.0, 0.0, 10.0],
                tier: RisTier::Haps,
            },
        ];
        assert!(NetworkGeometry::new([0.0; 3], low_haps, vec![[1.0; 3]], 2, 1, 1).is_err());
        assert!(NetworkGeometry::new([0.0; 3], ris, vec![[1.0, f64::INFINITY, 0.0]], 2, 1, 1).is_err());
    }

    #[test]
    fn element_grid_is_centered() {
        let ris = vec![RisSite {
            position: [5.0, 6.0, 7.0],
            tier: RisTier::Terrestrial,
        }];
        let g = NetworkGeometry::new([0.0; 3], ris, vec![[1.0; 3]], 4, 3, 2).unwrap();
        let e = g.element_positions(0, 0.01);
        assert_eq!(e.len(), 6);
        let mean: Vec<f64> = (0..3).map(|i| e.iter().map(|p| p[i]).sum::<f64>() / 6.0).collect();
        assert!((mean[0] - 5.0).abs() < 1e-12 && (mean[1] - 6.0).abs() < 1e-12 && (mean[2] - 7.0).abs() < 1e-12);
        assert!((e[1][2] - e[0][2] - 0.01).abs() < 1e-12);
        let a = g.antenna_positions(0.5);
        assert!((a[3][0] - a[0][0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn sampler_places_one_haps() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = LayoutParams::default().sample(&mut rng, 5, 5, 8, 2, 2).unwrap();
        assert_eq!(g.ris().iter().filter(|r| r.tier == RisTier::Haps).count(), 1);
        assert!(g.devices().iter().all(|d| d[0].abs() <= 250.0 && d[1].abs() <= 250.0));
    }

    fn point() -> impl Strategy<Value = Point> {
        [-1e4..1e4f64, -1e4..1e4f64, -1e4..1e4f64]
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in point(), b in point(), c in point()) {
            let ab = distance(a, b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, distance(b, a).unwrap());
            let ac = distance(a, c).unwrap();
            let cb = distance(c, b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-9 * (1.0 + ab));
        }

        #[test]
        fn fspl_monotone(d in 0.1..1e5f64, f in 1e8..1e11f64) {
            prop_assert!(path_loss_linear(f, d * 1.01).unwrap() < path_loss_linear(f, d).unwrap());
            prop_assert!(path_loss_linear(f * 1.01, d).unwrap() < path_loss_linear(f, d).unwrap());
        }
    }
}
