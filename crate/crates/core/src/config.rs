//! Run configuration: a flat `key = value` file, every key of which can
//! also be given as a command-line flag of the same name.
//!
//! Precedence, lowest first: built-in default, the seed environment
//! variable (seed only), the config file, command-line flags.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::classifier::AlphaSchedule;
use crate::erp_cov::EstimatorConfig;
use crate::error::{Error, Result};
use crate::eval::synth::{correlated_noise, default_pattern, SynthConfig};
use crate::preprocess::{FilterSpec, PipelineConfig};
use crate::spd::MeanConfig;

/// Environment variable overriding the default seed.
pub const SEED_ENV: &str = "RIEMANN_ERP_SEED";

#[derive(Debug, Clone, Copy)]
pub struct ConfigKey {
    pub name: &'static str,
    pub flag: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, flag: &'static str, default: &'static str, help: &'static str) -> ConfigKey {
    ConfigKey {
        name,
        flag,
        default,
        help,
    }
}

pub const KEYS: &[ConfigKey] = &[
    key("low_hz", "low-hz", "1", "Band-pass lower edge in Hz"),
    key("high_hz", "high-hz", "20", "Band-pass upper edge in Hz"),
    key("filter_order", "filter-order", "5", "Butterworth prototype order"),
    key("target_hz", "target-hz", "128", "Sampling rate after decimation in Hz"),
    key("window_s", "window-s", "1", "Epoch length in seconds"),
    key("shrinkage", "shrinkage", "auto", "Shrinkage in [0, 1], or `auto` (0.1 when 2C >= N, else 0)"),
    key("mean_tol", "mean-tol", "1e-9", "Mean solver tolerance on the tangent gradient norm"),
    key("mean_max_iter", "mean-max-iter", "50", "Mean solver iteration cap"),
    key("schedule", "schedule", "linear", "Adaptation schedule: `linear` or `fixed`"),
    key("n_full", "n-full", "120", "Labeled trials until the linear schedule reaches alpha = 1"),
    key("alpha", "alpha", "1", "Blend weight of the fixed schedule"),
    key("seed", "seed", "0", "Base random seed (default also read from RIEMANN_ERP_SEED)"),
    key("blocks", "blocks", "4", "Blocks per replayed session"),
    key("sweep_max_ms", "sweep-max-ms", "55", "Largest latency offset or jitter std in ms"),
    key("sweep_step_ms", "sweep-step-ms", "11", "Sweep grid step in ms"),
    key("jitter_seeds", "jitter-seeds", "10", "Jitter realizations per standard deviation"),
    key("lc_sizes", "lc-sizes", "1,2,5,10,20", "Learning-curve training sizes in repetitions"),
    key("lc_seeds", "lc-seeds", "5", "Learning-curve resamplings per size"),
    key("train_fraction", "train-fraction", "0.5", "Share of repetitions used for training when splitting one archive"),
    key("channels", "channels", "8", "Synthetic channels"),
    key("sample_rate", "sample-rate", "128", "Synthetic sampling rate in Hz"),
    key("erp_amplitude", "erp-amplitude", "1", "Synthetic ERP peak amplitude"),
    key("erp_latency_ms", "erp-latency-ms", "300", "Synthetic ERP peak latency in ms"),
    key("erp_width_ms", "erp-width-ms", "50", "Synthetic ERP standard deviation in ms"),
    key("noise_std", "noise-std", "1", "Synthetic noise standard deviation per channel"),
    key("noise_rho", "noise-rho", "0.5", "Synthetic noise correlation between neighbouring channels"),
    key("repetitions", "repetitions", "50", "Synthetic repetitions of 12 flashes"),
    key("isi_ms", "isi-ms", "1250", "Synthetic stimulus spacing in continuous recordings, in ms"),
    key("mixing", "mixing", "0", "Strength of a random channel mixing that derives another subject"),
    key("subject", "subject", "0", "Seed of the subject mixing matrix"),
];

fn lookup(name: &str) -> Option<&'static ConfigKey> {
    let norm = name.replace('-', "_");
    KEYS.iter().find(|k| k.name == norm)
}

fn default_of(name: &str) -> String {
    lookup(name).expect("known key").default.to_string()
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("config line {}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        let key = lookup(k).ok_or_else(|| Error::InvalidConfig(format!("config line {}: unknown key `{k}`", i + 1)))?;
        if !seen.insert(key.name) {
            return Err(Error::InvalidConfig(format!("config line {}: duplicate key `{}`", i + 1, key.name)));
        }
        out.push((key.name.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub channels: usize,
    pub sample_rate: f64,
    pub erp_amplitude: f64,
    pub erp_latency_ms: f64,
    pub erp_width_ms: f64,
    pub noise_std: f64,
    pub noise_rho: f64,
    pub repetitions: usize,
    pub isi_ms: f64,
    pub mixing: f64,
    pub subject: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    /// `None` selects the shape-dependent default.
    pub shrinkage: Option<f64>,
    pub mean: MeanConfig,
    pub schedule: AlphaSchedule,
    pub seed: u64,
    pub blocks: usize,
    pub sweep_max_ms: f64,
    pub sweep_step_ms: f64,
    pub jitter_seeds: usize,
    pub lc_sizes: Vec<usize>,
    pub lc_seeds: usize,
    pub train_fraction: f64,
    pub synth: SynthSettings,
    explicit: BTreeSet<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_values(&BTreeMap::new(), BTreeSet::new()).expect("built-in defaults are valid")
    }
}

fn value<T: FromStr>(map: &BTreeMap<&str, String>, name: &str) -> Result<T> {
    let raw = &map[name];
    raw.parse()
        .map_err(|_| Error::InvalidConfig(format!("`{name}`: cannot parse `{raw}`")))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(msg()))
    }
}

impl RunConfig {
    /// Builds a configuration from an optional file and `(key, value)`
    /// overrides; `env_seed` is the value of [`SEED_ENV`] if set.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)], env_seed: Option<String>) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut explicit = BTreeSet::new();
        if let Some(seed) = env_seed {
            values.insert("seed".to_string(), seed);
        }
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_config_text(&text)? {
                explicit.insert(k.clone());
                values.insert(k, v);
            }
        }
        for (k, v) in overrides {
            let key = lookup(k).ok_or_else(|| Error::InvalidConfig(format!("unknown key `{k}`")))?;
            explicit.insert(key.name.to_string());
            values.insert(key.name.to_string(), v.clone());
        }
        Self::from_values(&values, explicit)
    }

    fn from_values(given: &BTreeMap<String, String>, explicit: BTreeSet<String>) -> Result<Self> {
        let map: BTreeMap<&str, String> = KEYS
            .iter()
            .map(|k| (k.name, given.get(k.name).cloned().unwrap_or_else(|| k.default.to_string())))
            .collect();
        let shrinkage = match map["shrinkage"].as_str() {
            "auto" => None,
            _ => Some(value::<f64>(&map, "shrinkage")?),
        };
        let linear = AlphaSchedule::LinearByTrialCount {
            n_full: value(&map, "n_full")?,
        };
        let fixed = AlphaSchedule::Fixed(value(&map, "alpha")?);
        linear.validate()?;
        fixed.validate()?;
        let schedule = match map["schedule"].as_str() {
            "linear" => linear,
            "fixed" => fixed,
            other => {
                return Err(Error::InvalidConfig(format!("`schedule`: expected `linear` or `fixed`, got `{other}`")))
            }
        };
        let lc_sizes = map["lc_sizes"]
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidConfig(format!("`lc_sizes`: cannot parse `{}`", map["lc_sizes"])))?;
        let cfg = RunConfig {
            pipeline: PipelineConfig {
                filter: FilterSpec {
                    low_hz: value(&map, "low_hz")?,
                    high_hz: value(&map, "high_hz")?,
                    order: value(&map, "filter_order")?,
                },
                target_hz: value(&map, "target_hz")?,
                window_s: value(&map, "window_s")?,
            },
            shrinkage,
            mean: MeanConfig {
                tol: value(&map, "mean_tol")?,
                max_iter: value(&map, "mean_max_iter")?,
            },
            schedule,
            seed: value(&map, "seed")?,
            blocks: value(&map, "blocks")?,
            sweep_max_ms: value(&map, "sweep_max_ms")?,
            sweep_step_ms: value(&map, "sweep_step_ms")?,
            jitter_seeds: value(&map, "jitter_seeds")?,
            lc_sizes,
            lc_seeds: value(&map, "lc_seeds")?,
            train_fraction: value(&map, "train_fraction")?,
            synth: SynthSettings {
                channels: value(&map, "channels")?,
                sample_rate: value(&map, "sample_rate")?,
                erp_amplitude: value(&map, "erp_amplitude")?,
                erp_latency_ms: value(&map, "erp_latency_ms")?,
                erp_width_ms: value(&map, "erp_width_ms")?,
                noise_std: value(&map, "noise_std")?,
                noise_rho: value(&map, "noise_rho")?,
                repetitions: value(&map, "repetitions")?,
                isi_ms: value(&map, "isi_ms")?,
                mixing: value(&map, "mixing")?,
                subject: value(&map, "subject")?,
            },
            explicit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field that does not depend on the data; the filter
    /// band against the sampling rate is checked when a recording is read.
    pub fn validate(&self) -> Result<()> {
        let f = &self.pipeline.filter;
        check(f.order > 0, || "`filter_order` must be positive".into())?;
        check(f.low_hz > 0.0 && f.low_hz < f.high_hz && f.high_hz.is_finite(), || {
            format!("band edges must satisfy 0 < low_hz ({}) < high_hz ({})", f.low_hz, f.high_hz)
        })?;
        check(self.pipeline.target_hz > 0.0 && self.pipeline.target_hz.is_finite(), || {
            "`target_hz` must be positive".into()
        })?;
        check(self.pipeline.window_s > 0.0 && self.pipeline.window_s.is_finite(), || {
            "`window_s` must be positive".into()
        })?;
        if let Some(l) = self.shrinkage {
            EstimatorConfig::new(l)?;
        }
        self.mean.validate()?;
        self.schedule.validate()?;
        check(self.blocks > 0, || "`blocks` must be positive".into())?;
        check(self.sweep_step_ms > 0.0 && self.sweep_max_ms >= 0.0 && self.sweep_max_ms.is_finite(), || {
            "sweep grid needs sweep_step_ms > 0 and sweep_max_ms >= 0".into()
        })?;
        check(self.jitter_seeds > 0 && self.lc_seeds > 0, || "seed counts must be positive".into())?;
        check(
            !self.lc_sizes.is_empty() && self.lc_sizes[0] > 0 && self.lc_sizes.windows(2).all(|w| w[0] < w[1]),
            || "`lc_sizes` must be positive and strictly increasing".into(),
        )?;
        check(self.train_fraction > 0.0 && self.train_fraction < 1.0, || {
            "`train_fraction` must lie strictly between 0 and 1".into()
        })?;
        check(self.synth.noise_std > 0.0 && self.synth.noise_std.is_finite(), || {
            "`noise_std` must be positive".into()
        })?;
        check(self.synth.noise_rho.abs() < 1.0, || "`noise_rho` must lie in (-1, 1)".into())?;
        check(self.synth.mixing.is_finite(), || "`mixing` must be finite".into())?;
        self.synth_config().map(|_| ())
    }

    pub fn is_explicit(&self, name: &str) -> bool {
        self.explicit.contains(name)
    }

    pub fn estimator(&self, channels: usize, samples: usize) -> EstimatorConfig {
        match self.shrinkage {
            Some(l) => EstimatorConfig {
                shrinkage: l,
                ..Default::default()
            },
            None => EstimatorConfig::default_for(channels, samples),
        }
    }

    /// The configured schedule if any schedule key was set, else `model_default`.
    pub fn schedule_or(&self, model_default: AlphaSchedule) -> AlphaSchedule {
        if ["schedule", "n_full", "alpha"].iter().any(|k| self.is_explicit(k)) {
            self.schedule
        } else {
            model_default
        }
    }

    /// `count` consecutive seeds starting at the base seed.
    pub fn seeds(&self, count: usize) -> Vec<u64> {
        (0..count as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        let s = &self.synth;
        check(s.noise_rho.abs() < 1.0, || "`noise_rho` must lie in (-1, 1)".into())?;
        check(s.channels > 0, || "`channels` must be positive".into())?;
        let noise = correlated_noise(s.channels, s.noise_rho)
            .and_then(|n| n.congruence(&nalgebra::DMatrix::from_diagonal_element(s.channels, s.channels, s.noise_std)))
            .map_err(|e| Error::InvalidConfig(format!("synthetic noise covariance: {e}")))?;
        let cfg = SynthConfig {
            channels: s.channels,
            sample_rate: s.sample_rate,
            window_s: self.pipeline.window_s,
            erp_amplitude: s.erp_amplitude,
            erp_latency_ms: s.erp_latency_ms,
            erp_width_ms: s.erp_width_ms,
            spatial_pattern: default_pattern(s.channels),
            noise_covariance: noise,
            repetitions: s.repetitions,
            isi_ms: s.isi_ms,
            seed: self.seed,
        };
        let cfg = if s.mixing != 0.0 {
            cfg.mixed(&crate::eval::synth::random_mixing(s.channels, s.mixing, s.subject))
                .map_err(|e| Error::InvalidConfig(format!("subject mixing: {e}")))?
        } else {
            cfg
        };
        cfg.validate().map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(m),
            other => Error::InvalidConfig(other.to_string()),
        })?;
        Ok(cfg)
    }

    /// `key = value` lines of every setting, in table order.
    pub fn to_text(&self) -> String {
        let mut map = BTreeMap::new();
        map.insert("low_hz", self.pipeline.filter.low_hz.to_string());
        map.insert("high_hz", self.pipeline.filter.high_hz.to_string());
        map.insert("filter_order", self.pipeline.filter.order.to_string());
        map.insert("target_hz", self.pipeline.target_hz.to_string());
        map.insert("window_s", self.pipeline.window_s.to_string());
        map.insert("shrinkage", self.shrinkage.map_or("auto".into(), |l| l.to_string()));
        map.insert("mean_tol", format!("{:e}", self.mean.tol));
        map.insert("mean_max_iter", self.mean.max_iter.to_string());
        let (kind, n_full, alpha) = match self.schedule {
            AlphaSchedule::LinearByTrialCount { n_full } => ("linear", n_full.to_string(), default_of("alpha")),
            AlphaSchedule::Fixed(a) => ("fixed", default_of("n_full"), a.to_string()),
        };
        map.insert("schedule", kind.into());
        map.insert("n_full", n_full);
        map.insert("alpha", alpha);
        map.insert("seed", self.seed.to_string());
        map.insert("blocks", self.blocks.to_string());
        map.insert("sweep_max_ms", self.sweep_max_ms.to_string());
        map.insert("sweep_step_ms", self.sweep_step_ms.to_string());
        map.insert("jitter_seeds", self.jitter_seeds.to_string());
        map.insert(
            "lc_sizes",
            self.lc_sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
        );
        map.insert("lc_seeds", self.lc_seeds.to_string());
        map.insert("train_fraction", self.train_fraction.to_string());
        let s = &self.synth;
        map.insert("channels", s.channels.to_string());
        map.insert("sample_rate", s.sample_rate.to_string());
        map.insert("erp_amplitude", s.erp_amplitude.to_string());
        map.insert("erp_latency_ms", s.erp_latency_ms.to_string());
        map.insert("erp_width_ms", s.erp_width_ms.to_string());
        map.insert("noise_std", s.noise_std.to_string());
        map.insert("noise_rho", s.noise_rho.to_string());
        map.insert("repetitions", s.repetitions.to_string());
        map.insert("isi_ms", s.isi_ms.to_string());
        map.insert("mixing", s.mixing.to_string());
        map.insert("subject", s.subject.to_string());
        KEYS.iter().map(|k| format!("{} = {}\n", k.name, map[k.name])).collect()
    }
}
