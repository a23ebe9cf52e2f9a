//! Simulation configuration and its plain `key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored. Keys not present
//! keep their defaults; unknown keys are rejected. Powers are given in dBm
//! and converted to watts only through [`SimConfig::power_watts`].

use std::fmt::Write as _;
use std::str::FromStr;

use crate::association::EXHAUSTIVE_LIMIT;
use crate::error::{Error, Result};
use crate::geometry::{dbm_to_watts, CarrierConfig, LayoutParams, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Jbpda,
    Exhaustive,
    Greedy,
    Random,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Jbpda, Scheme::Exhaustive, Scheme::Greedy, Scheme::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Jbpda => "jbpda",
            Scheme::Exhaustive => "es",
            Scheme::Greedy => "gs",
            Scheme::Random => "rs",
        }
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jbpda" => Ok(Scheme::Jbpda),
            "es" | "exhaustive" => Ok(Scheme::Exhaustive),
            "gs" | "greedy" => Ok(Scheme::Greedy),
            "rs" | "random" => Ok(Scheme::Random),
            other => Err(format!("unknown scheme `{other}` (expected jbpda, es, gs or rs)")),
        }
    }
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    None,
    /// AP budget in dBm.
    Power,
    /// Device count K (L follows K unless fixed).
    Devices,
    /// AP antenna count N.
    Antennas,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::Power => "power",
            SweepAxis::Devices => "devices",
            SweepAxis::Antennas => "antennas",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "none" => Ok(SweepAxis::None),
            "power" => Ok(SweepAxis::Power),
            "devices" => Ok(SweepAxis::Devices),
            "antennas" => Ok(SweepAxis::Antennas),
            other => Err(format!("unknown sweep axis `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// K
    pub devices: usize,
    /// L; `None` means one panel per device.
    pub ris: Option<usize>,
    /// N
    pub antennas: usize,
    pub elements_y: usize,
    pub elements_z: usize,
    pub carrier_frequency: f64,
    pub bandwidth: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Element pitch in meters; `None` means half a wavelength.
    pub element_side: Option<f64>,
    pub power_dbm: f64,
    pub layout: LayoutParams,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub max_iterations: usize,
    pub rate_tolerance: f64,
    pub sweep: SweepAxis,
    pub grid: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            devices: 7,
            ris: None,
            antennas: 256,
            elements_y: 100,
            elements_z: 100,
            carrier_frequency: 15e9,
            bandwidth: 400e6,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 10.0,
            element_side: None,
            power_dbm: 23.0,
            layout: LayoutParams::default(),
            trials: 1000,
            seed: 1,
            schemes: Scheme::ALL.to_vec(),
            max_iterations: 100,
            rate_tolerance: 1e-4,
            sweep: SweepAxis::None,
            grid: Vec::new(),
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

impl SimConfig {
    pub fn num_ris(&self) -> usize {
        self.ris.unwrap_or(self.devices)
    }

    pub fn power_watts(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
    }

    pub fn carrier(&self) -> CarrierConfig {
        CarrierConfig {
            carrier_frequency: self.carrier_frequency,
            bandwidth: self.bandwidth,
            noise_density: self.noise_density_dbm_hz,
            noise_figure: self.noise_figure_db,
            element_side: self
                .element_side
                .unwrap_or(SPEED_OF_LIGHT / self.carrier_frequency / 2.0),
        }
    }

    pub fn has(&self, scheme: Scheme) -> bool {
        self.schemes.contains(&scheme)
    }

    /// Copy of this config at one sweep grid value.
    pub fn at_point(&self, value: f64) -> SimConfig {
        let mut c = self.clone();
        match self.sweep {
            SweepAxis::None => {}
            SweepAxis::Power => c.power_dbm = value,
            SweepAxis::Devices => c.devices = value as usize,
            SweepAxis::Antennas => c.antennas = value as usize,
        }
        c
    }

    /// Grid values, or the single current value when not sweeping.
    pub fn points(&self) -> Vec<f64> {
        match self.sweep {
            SweepAxis::None => vec![self.power_dbm],
            _ => self.grid.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("devices", self.devices),
            ("antennas", self.antennas),
            ("elements_y", self.elements_y),
            ("elements_z", self.elements_z),
            ("trials", self.trials),
            ("max_iterations", self.max_iterations),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        if self.ris == Some(0) {
            return Err(invalid("ris", "must be at least 1"));
        }
        for (name, v) in [
            ("carrier_frequency_hz", self.carrier_frequency),
            ("bandwidth_hz", self.bandwidth),
            ("rate_tolerance", self.rate_tolerance),
            ("area_side_m", self.layout.area_side),
            ("haps_altitude_m", self.layout.haps_altitude),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive and finite"));
            }
        }
        if let Some(s) = self.element_side {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("element_side_m", "must be positive and finite"));
            }
        }
        for (name, v) in [
            ("noise_density_dbm_hz", self.noise_density_dbm_hz),
            ("noise_figure_db", self.noise_figure_db),
            ("power_dbm", self.power_dbm),
            ("ring_radius_m", self.layout.ring_radius),
            ("ring_height_m", self.layout.ring_height),
            ("ap_height_m", self.layout.ap_height),
            ("device_height_m", self.layout.device_height),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.layout.haps_altitude <= self.layout.ring_height {
            return Err(invalid("haps_altitude_m", "must exceed ring_height_m"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "at least one scheme is required"));
        }
        if self.sweep != SweepAxis::None && self.grid.is_empty() {
            return Err(invalid("grid", "a sweep needs at least one grid value"));
        }
        for point in self.points() {
            let c = self.at_point(point);
            if !point.is_finite() {
                return Err(invalid("grid", "values must be finite"));
            }
            if matches!(self.sweep, SweepAxis::Devices | SweepAxis::Antennas) && (point < 1.0 || point.fract() != 0.0) {
                return Err(invalid("grid", format!("{point} is not a positive count")));
            }
            if c.devices > c.antennas {
                return Err(invalid(
                    "devices",
                    format!("zero-forcing needs K <= N (K = {}, N = {})", c.devices, c.antennas),
                ));
            }
            if c.has(Scheme::Exhaustive) && c.devices.min(c.num_ris()) > EXHAUSTIVE_LIMIT {
                return Err(invalid(
                    "schemes",
                    format!(
                        "exhaustive search needs min(K, L) <= {EXHAUSTIVE_LIMIT}, got {}",
                        c.devices.min(c.num_ris())
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Parses the text format; missing keys keep defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = SimConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("duplicate key `{key}`"),
                });
            }
            c.set(key, value)
                .map_err(|reason| Error::Parse { line: line_no, reason })?;
        }
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("invalid value `{v}` for `{key}`"))
        }
        fn optional<T: FromStr>(key: &str, v: &str) -> std::result::Result<Option<T>, String> {
            if v == "auto" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        match key {
            "devices" => self.devices = num(key, value)?,
            "ris" => self.ris = optional(key, value)?,
            "antennas" => self.antennas = num(key, value)?,
            "elements_y" => self.elements_y = num(key, value)?,
            "elements_z" => self.elements_z = num(key, value)?,
            "carrier_frequency_hz" => self.carrier_frequency = num(key, value)?,
            "bandwidth_hz" => self.bandwidth = num(key, value)?,
            "noise_density_dbm_hz" => self.noise_density_dbm_hz = num(key, value)?,
            "noise_figure_db" => self.noise_figure_db = num(key, value)?,
            "element_side_m" => self.element_side = optional(key, value)?,
            "power_dbm" => self.power_dbm = num(key, value)?,
            "area_side_m" => self.layout.area_side = num(key, value)?,
            "ap_height_m" => self.layout.ap_height = num(key, value)?,
            "device_height_m" => self.layout.device_height = num(key, value)?,
            "ring_radius_m" => self.layout.ring_radius = num(key, value)?,
            "ring_height_m" => self.layout.ring_height = num(key, value)?,
            "haps_altitude_m" => self.layout.haps_altitude = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "schemes" => self.schemes = parse_schemes(value)?,
            "max_iterations" => self.max_iterations = num(key, value)?,
            "rate_tolerance" => self.rate_tolerance = num(key, value)?,
            "sweep" => self.sweep = value.parse()?,
            "grid" => {
                self.grid = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|v| num("grid", v.trim()))
                        .collect::<std::result::Result<_, _>>()?
                }
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Canonical serialization: every key, fixed order, shortest round-trip
    /// number formatting.
    pub fn to_text(&self) -> String {
        fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
            v.map_or_else(|| "auto".to_string(), |v| v.to_string())
        }
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("devices", self.devices.to_string());
        kv("ris", opt(self.ris));
        kv("antennas", self.antennas.to_string());
        kv("elements_y", self.elements_y.to_string());
        kv("elements_z", self.elements_z.to_string());
        kv("carrier_frequency_hz", self.carrier_frequency.to_string());
        kv("bandwidth_hz", self.bandwidth.to_string());
        kv("noise_density_dbm_hz", self.noise_density_dbm_hz.to_string());
        kv("noise_figure_db", self.noise_figure_db.to_string());
        kv("element_side_m", opt(self.element_side));
        kv("power_dbm", self.power_dbm.to_string());
        kv("area_side_m", self.layout.area_side.to_string());
        kv("ap_height_m", self.layout.ap_height.to_string());
        kv("device_height_m", self.layout.device_height.to_string());
        kv("ring_radius_m", self.layout.ring_radius.to_string());
        kv("ring_height_m", self.layout.ring_height.to_string());
        kv("haps_altitude_m", self.layout.haps_altitude.to_string());
        kv("trials", self.trials.to_string());
        kv("seed", self.seed.to_string());
        kv(
            "schemes",
            self.schemes.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","),
        );
        kv("max_iterations", self.max_iterations.to_string());
        kv("rate_tolerance", self.rate_tolerance.to_string());
        kv("sweep", self.sweep.as_str().to_string());
        kv(
            "grid",
            self.grid.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
        s
    }
}

/// Parses a comma-separated scheme list, dropping duplicates.
pub fn parse_schemes(value: &str) -> std::result::Result<Vec<Scheme>, String> {
    let mut out: Vec<Scheme> = Vec::new();
    for part in value.split(',').filter(|p| !p.trim().is_empty()) {
        let s: Scheme = part.parse()?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_gives_table_defaults() {
        let c = SimConfig::parse("").unwrap();
        assert_eq!(c.carrier_frequency, 15e9);
        assert_eq!(c.antennas, 256);
        assert_eq!(c.power_dbm, 23.0);
        assert_eq!((c.elements_y, c.elements_z), (100, 100));
        assert_eq!(c.bandwidth, 400e6);
        assert_eq!(c.noise_figure_db, 10.0);
        assert_eq!(c.noise_density_dbm_hz, -174.0);
        assert!((c.carrier().element_side - 0.01).abs() < 1e-4);
        assert!((c.power_watts() - 0.19952623149688797).abs() < 1e-15);
    }

    #[test]
    fn zero_devices_rejected() {
        let err = SimConfig::parse("devices = 0").unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "devices"));
    }

    #[test]
    fn exhaustive_guard() {
        let err = SimConfig::parse("devices = 12\nris = 12\nschemes = jbpda,es").unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "schemes"));
        assert!(SimConfig::parse("devices = 12\nris = 12\nschemes = jbpda,gs").is_ok());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = SimConfig::parse("# header\n\ndevices = 3\nbogus = 1").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 4,
                reason: "unknown key `bogus`".into()
            }
        );
        let err = SimConfig::parse("devices 3").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = SimConfig::parse("devices = three").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = SimConfig::parse("seed = 1\nseed = 2").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn sweep_points() {
        let c = SimConfig::parse("sweep = antennas\ngrid = 64,128,256").unwrap();
        assert_eq!(c.points(), vec![64.0, 128.0, 256.0]);
        assert_eq!(c.at_point(128.0).antennas, 128);
        assert!(SimConfig::parse("sweep = power").is_err());
        assert!(SimConfig::parse("sweep = antennas\ngrid = 4").is_err());
    }

    fn arb_config() -> impl Strategy<Value = SimConfig> {
        (
            1usize..9,
            proptest::option::of(1usize..9),
            9usize..300,
            -30.0..40.0f64,
            any::<u64>(),
            proptest::sample::subsequence(Scheme::ALL.to_vec(), 1..=4),
            1e-9..1e-1f64,
            proptest::collection::vec(-10.0..30.0f64, 0..5),
        )
            .prop_map(|(k, l, n, p, seed, schemes, tol, grid)| SimConfig {
                devices: k,
                ris: l,
                antennas: n,
                power_dbm: p,
                seed,
                schemes,
                rate_tolerance: tol,
                sweep: if grid.is_empty() {
                    SweepAxis::None
                } else {
                    SweepAxis::Power
                },
                grid,
                ..SimConfig::default()
            })
    }

    proptest! {
        #[test]
        fn text_round_trip(c in arb_config()) {
            let parsed = SimConfig::parse(&c.to_text()).unwrap();
            prop_assert_eq!(parsed, c);
        }
    }
}
