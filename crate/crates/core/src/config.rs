//! Pipeline settings read from `key = value` text files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{Connectivity, ExpansionConfig};
use crate::graindist::{DEFAULT_COARSE_CM, DEFAULT_COUNT_BIN_CM, DEFAULT_FINE_CM, DEFAULT_VOLUME_BIN_CM};
use crate::kernels::{CarafeConfig, Normalizer};
use crate::raster::{Calibration, DEFAULT_SE_HALF, DEFAULT_STRIDE, DEFAULT_WINDOW};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "FRAGSCAN_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub cm_per_pixel: f64,
    pub window: usize,
    pub stride: usize,
    pub se_half: usize,
    pub max_radius: u32,
    pub step_connectivity: u32,
    pub seed_connectivity: u32,
    pub min_diameter_px: f64,
    pub count_bin_cm: f64,
    pub volume_bin_cm: f64,
    pub fine_cm: f64,
    pub coarse_cm: f64,
    pub section_map: Option<PathBuf>,
    pub include_border_fragments: bool,
    pub carafe_sigma: usize,
    pub carafe_k_up: usize,
    pub carafe_k_encoder: usize,
    pub carafe_c_m: usize,
    pub carafe_normalizer: Normalizer,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let carafe = CarafeConfig::default();
        let exp = ExpansionConfig::default();
        Self {
            cm_per_pixel: 1.0,
            window: DEFAULT_WINDOW,
            stride: DEFAULT_STRIDE,
            se_half: DEFAULT_SE_HALF,
            max_radius: exp.max_radius,
            step_connectivity: exp.step_connectivity.count(),
            seed_connectivity: exp.seed_connectivity.count(),
            min_diameter_px: 10.0,
            count_bin_cm: DEFAULT_COUNT_BIN_CM,
            volume_bin_cm: DEFAULT_VOLUME_BIN_CM,
            fine_cm: DEFAULT_FINE_CM,
            coarse_cm: DEFAULT_COARSE_CM,
            section_map: None,
            include_border_fragments: true,
            carafe_sigma: carafe.sigma,
            carafe_k_up: carafe.k_up,
            carafe_k_encoder: carafe.k_encoder,
            carafe_c_m: carafe.c_m,
            carafe_normalizer: carafe.normalizer,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Parse(format!("config key {key}: {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Parse(format!("config key {key}: {value:?} is not a boolean"))),
    }
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 19] = [
        "cm_per_pixel",
        "window",
        "stride",
        "se_half",
        "max_radius",
        "step_connectivity",
        "seed_connectivity",
        "min_diameter_px",
        "count_bin_cm",
        "volume_bin_cm",
        "fine_cm",
        "coarse_cm",
        "section_map",
        "include_border_fragments",
        "carafe_sigma",
        "carafe_k_up",
        "carafe_k_encoder",
        "carafe_c_m",
        "carafe_normalizer",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "cm_per_pixel" => self.cm_per_pixel = parse_value(key, v)?,
            "window" => self.window = parse_value(key, v)?,
            "stride" => self.stride = parse_value(key, v)?,
            "se_half" => self.se_half = parse_value(key, v)?,
            "max_radius" => self.max_radius = parse_value(key, v)?,
            "step_connectivity" => self.step_connectivity = parse_value(key, v)?,
            "seed_connectivity" => self.seed_connectivity = parse_value(key, v)?,
            "min_diameter_px" => self.min_diameter_px = parse_value(key, v)?,
            "count_bin_cm" => self.count_bin_cm = parse_value(key, v)?,
            "volume_bin_cm" => self.volume_bin_cm = parse_value(key, v)?,
            "fine_cm" => self.fine_cm = parse_value(key, v)?,
            "coarse_cm" => self.coarse_cm = parse_value(key, v)?,
            "section_map" => self.section_map = (!v.is_empty()).then(|| PathBuf::from(v)),
            "include_border_fragments" => self.include_border_fragments = parse_bool(key, v)?,
            "carafe_sigma" => self.carafe_sigma = parse_value(key, v)?,
            "carafe_k_up" => self.carafe_k_up = parse_value(key, v)?,
            "carafe_k_encoder" => self.carafe_k_encoder = parse_value(key, v)?,
            "carafe_c_m" => self.carafe_c_m = parse_value(key, v)?,
            "carafe_normalizer" => {
                self.carafe_normalizer = match v.to_ascii_lowercase().as_str() {
                    "sigmoid" => Normalizer::Sigmoid,
                    "softmax" => Normalizer::Softmax,
                    _ => return Err(Error::Parse(format!("config key {key}: unknown normalizer {v:?}"))),
                }
            }
            other => return Err(Error::Parse(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the current values. Blank lines
    /// and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        Calibration::new(self.cm_per_pixel)?;
        if self.window == 0 || self.stride == 0 || self.stride > self.window {
            return Err(Error::invalid(format!(
                "need 1 <= stride <= window, got stride {} window {}",
                self.stride, self.window
            )));
        }
        Connectivity::from_count(self.step_connectivity)?;
        Connectivity::from_count(self.seed_connectivity)?;
        if !(self.min_diameter_px >= 0.0) {
            return Err(Error::invalid("min_diameter_px must be nonnegative"));
        }
        for (k, v) in [("count_bin_cm", self.count_bin_cm), ("volume_bin_cm", self.volume_bin_cm)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{k} must be positive, got {v}")));
            }
        }
        if !(self.fine_cm.is_finite() && self.coarse_cm.is_finite()) {
            return Err(Error::invalid("count thresholds must be finite"));
        }
        self.carafe().validate()
    }

    pub fn calibration(&self) -> Result<Calibration> {
        Calibration::new(self.cm_per_pixel)
    }

    pub fn expansion(&self) -> Result<ExpansionConfig> {
        Ok(ExpansionConfig {
            max_radius: self.max_radius,
            step_connectivity: Connectivity::from_count(self.step_connectivity)?,
            seed_connectivity: Connectivity::from_count(self.seed_connectivity)?,
        })
    }

    pub fn carafe(&self) -> CarafeConfig {
        CarafeConfig {
            sigma: self.carafe_sigma,
            k_up: self.carafe_k_up,
            k_encoder: self.carafe_k_encoder,
            c_m: self.carafe_c_m,
            normalizer: self.carafe_normalizer,
        }
    }
}
