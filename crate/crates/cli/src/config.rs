//! Layered pipeline configuration: defaults, then a key-value file, then flags.

use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use clothground::kv::KeyValues;
use clothground::terrain::{Segment, DEFAULT_NORMAL_K};
use clothground::{CsfParams, SorParams};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("`{key}` expects {expected}, got `{value}`")]
    TypeMismatch {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("`{key}` out of range: {reason}")]
    OutOfRange { key: String, reason: String },
    #[error("cannot read configuration: {0}")]
    Unreadable(String),
    #[error("no input: give an input cloud or a pose list")]
    MissingInput,
}

/// Stages that can be switched off individually.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageToggles {
    pub skip_denoise: bool,
    pub skip_normals: bool,
    pub skip_dtm: bool,
    pub skip_mesh: bool,
    pub skip_profile: bool,
    pub skip_report: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    /// Pose list for merging several scans; replaces `input`.
    pub poses: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub sor: SorParams,
    pub csf: CsfParams,
    pub normals_k: usize,
    pub dtm_cell: f64,
    pub dtm_power: f64,
    pub profile_cut: Option<Segment>,
    pub profile_halfwidth: f64,
    pub profile_bin: f64,
    pub stages: StageToggles,
    pub debug_cloth: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            poses: None,
            output_dir: PathBuf::from("out"),
            sor: SorParams::default(),
            csf: CsfParams::default(),
            normals_k: DEFAULT_NORMAL_K,
            dtm_cell: 1.0,
            dtm_power: 2.0,
            profile_cut: None,
            profile_halfwidth: 1.0,
            profile_bin: 1.0,
            stages: StageToggles::default(),
            debug_cloth: false,
            seed: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "input",
    "poses",
    "output_dir",
    "sor_k",
    "sor_sigma",
    "csf_gr",
    "csf_dt",
    "csf_rigidness",
    "csf_steep_slope",
    "csf_threshold",
    "csf_max_iter",
    "csf_gravity",
    "csf_convergence",
    "csf_slope_threshold",
    "csf_allow_fine_grid",
    "normals_k",
    "dtm_cell",
    "dtm_power",
    "profile_cut",
    "profile_halfwidth",
    "profile_bin",
    "skip_denoise",
    "skip_normals",
    "skip_dtm",
    "skip_mesh",
    "skip_profile",
    "skip_report",
    "debug_cloth",
    "seed",
];

fn typed<T: FromStr>(
    kv: &KeyValues,
    key: &str,
    expected: &'static str,
) -> Result<Option<T>, ConfigError> {
    match kv.get(key) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| ConfigError::TypeMismatch {
            key: key.to_string(),
            value: v.to_string(),
            expected,
        }),
    }
}

fn out_of_range(key: &str, reason: impl Display) -> ConfigError {
    ConfigError::OutOfRange {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

impl PipelineConfig {
    /// Defaults overridden by each layer in turn; later layers win.
    pub fn resolve(layers: &[&KeyValues]) -> Result<Self, ConfigError> {
        let mut c = PipelineConfig::default();
        for kv in layers {
            c.apply(kv)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let kv = KeyValues::parse(text).map_err(|e| ConfigError::Unreadable(e.to_string()))?;
        Self::resolve(&[&kv])
    }

    fn apply(&mut self, kv: &KeyValues) -> Result<(), ConfigError> {
        if let Some(k) = kv.unknown_key(KEYS) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        macro_rules! set {
            ($key:literal, $field:expr, $what:literal) => {
                if let Some(v) = typed(kv, $key, $what)? {
                    $field = v;
                }
            };
        }
        if let Some(v) = kv.get("input") {
            self.input = Some(PathBuf::from(v));
        }
        if let Some(v) = kv.get("poses") {
            self.poses = Some(PathBuf::from(v));
        }
        if let Some(v) = kv.get("output_dir") {
            self.output_dir = PathBuf::from(v);
        }
        set!("sor_k", self.sor.k, "a positive integer");
        set!("sor_sigma", self.sor.sigma, "a number");
        set!("csf_gr", self.csf.grid_resolution, "a number");
        set!("csf_dt", self.csf.time_step, "a number");
        set!("csf_rigidness", self.csf.rigidness, "an integer in 1..=3");
        set!("csf_steep_slope", self.csf.steep_slope_fit, "true or false");
        set!("csf_threshold", self.csf.class_threshold, "a number");
        set!(
            "csf_max_iter",
            self.csf.max_iterations,
            "a non-negative integer"
        );
        set!("csf_gravity", self.csf.gravity, "a number");
        set!("csf_convergence", self.csf.height_convergence, "a number");
        if let Some(v) = typed(kv, "csf_slope_threshold", "a number")? {
            self.csf.slope_threshold = Some(v);
        }
        set!(
            "csf_allow_fine_grid",
            self.csf.allow_fine_grid,
            "true or false"
        );
        set!("normals_k", self.normals_k, "a positive integer");
        set!("dtm_cell", self.dtm_cell, "a number");
        set!("dtm_power", self.dtm_power, "a number");
        if let Some(v) = kv.get("profile_cut") {
            let seg = Segment::parse(v).map_err(|_| ConfigError::TypeMismatch {
                key: "profile_cut".into(),
                value: v.to_string(),
                expected: "four numbers x1,y1,x2,y2",
            })?;
            self.profile_cut = Some(seg);
        }
        set!("profile_halfwidth", self.profile_halfwidth, "a number");
        set!("profile_bin", self.profile_bin, "a number");
        set!("skip_denoise", self.stages.skip_denoise, "true or false");
        set!("skip_normals", self.stages.skip_normals, "true or false");
        set!("skip_dtm", self.stages.skip_dtm, "true or false");
        set!("skip_mesh", self.stages.skip_mesh, "true or false");
        set!("skip_profile", self.stages.skip_profile, "true or false");
        set!("skip_report", self.stages.skip_report, "true or false");
        set!("debug_cloth", self.debug_cloth, "true or false");
        set!("seed", self.seed, "a non-negative integer");
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sor.k == 0 {
            return Err(out_of_range("sor_k", "must be at least 1"));
        }
        if !(self.sor.sigma.is_finite() && self.sor.sigma >= 0.0) {
            return Err(out_of_range("sor_sigma", "must be finite and non-negative"));
        }
        let c = &self.csf;
        if !(1..=3).contains(&c.rigidness) {
            return Err(out_of_range(
                "csf_rigidness",
                format!("{} is not in 1..=3", c.rigidness),
            ));
        }
        if !(c.grid_resolution.is_finite() && c.grid_resolution > 0.0) {
            return Err(out_of_range("csf_gr", "must be positive"));
        }
        if c.grid_resolution < 0.1 && !c.allow_fine_grid {
            return Err(out_of_range(
                "csf_gr",
                format!(
                    "{} is below 0.1; set csf_allow_fine_grid = true to permit",
                    c.grid_resolution
                ),
            ));
        }
        let positive = [
            ("csf_dt", c.time_step),
            ("csf_threshold", c.class_threshold),
            ("csf_gravity", c.gravity),
            ("csf_convergence", c.height_convergence),
            ("dtm_cell", self.dtm_cell),
            ("dtm_power", self.dtm_power),
            ("profile_halfwidth", self.profile_halfwidth),
            ("profile_bin", self.profile_bin),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(out_of_range(key, format!("{v} must be positive")));
            }
        }
        if let Some(t) = c.slope_threshold {
            if !(t.is_finite() && t >= 0.0) {
                return Err(out_of_range("csf_slope_threshold", "must be non-negative"));
            }
        }
        if self.normals_k == 0 {
            return Err(out_of_range("normals_k", "must be at least 1"));
        }
        c.validate().map_err(|e| out_of_range("csf", e))?;
        Ok(())
    }

    /// Every resolved value as `key = value` text; parsing it yields `self`.
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        let path = |p: &PathBuf| p.display().to_string();
        if let Some(p) = &self.input {
            kv.insert("input", path(p));
        }
        if let Some(p) = &self.poses {
            kv.insert("poses", path(p));
        }
        kv.insert("output_dir", path(&self.output_dir));
        kv.insert("sor_k", self.sor.k);
        kv.insert("sor_sigma", self.sor.sigma);
        kv.insert("csf_gr", self.csf.grid_resolution);
        kv.insert("csf_dt", self.csf.time_step);
        kv.insert("csf_rigidness", self.csf.rigidness);
        kv.insert("csf_steep_slope", self.csf.steep_slope_fit);
        kv.insert("csf_threshold", self.csf.class_threshold);
        kv.insert("csf_max_iter", self.csf.max_iterations);
        kv.insert("csf_gravity", self.csf.gravity);
        kv.insert("csf_convergence", self.csf.height_convergence);
        if let Some(t) = self.csf.slope_threshold {
            kv.insert("csf_slope_threshold", t);
        }
        kv.insert("csf_allow_fine_grid", self.csf.allow_fine_grid);
        kv.insert("normals_k", self.normals_k);
        kv.insert("dtm_cell", self.dtm_cell);
        kv.insert("dtm_power", self.dtm_power);
        if let Some(s) = &self.profile_cut {
            kv.insert(
                "profile_cut",
                format!("{},{},{},{}", s.start.0, s.start.1, s.end.0, s.end.1),
            );
        }
        kv.insert("profile_halfwidth", self.profile_halfwidth);
        kv.insert("profile_bin", self.profile_bin);
        let s = &self.stages;
        kv.insert("skip_denoise", s.skip_denoise);
        kv.insert("skip_normals", s.skip_normals);
        kv.insert("skip_dtm", s.skip_dtm);
        kv.insert("skip_mesh", s.skip_mesh);
        kv.insert("skip_profile", s.skip_profile);
        kv.insert("skip_report", s.skip_report);
        kv.insert("debug_cloth", self.debug_cloth);
        kv.insert("seed", self.seed);
        kv
    }

    pub fn to_text(&self) -> String {
        self.to_key_values().to_text()
    }
}
