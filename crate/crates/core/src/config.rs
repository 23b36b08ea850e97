//! Run configuration: JSON file, then `ZC_*` environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::Tolerance;
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub abs_eps: f64,
    pub rel_eps: f64,
    pub max_iter: usize,
    pub collision_eps_factor: f64,
    pub online_eps: f64,
    pub min_interval_len: usize,
    pub worker_count: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Subsets tried by the avoidance search.
    pub search_cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tol = Tolerance::default();
        let tr = TrackerConfig::default();
        Self {
            abs_eps: tol.abs_eps,
            rel_eps: tol.rel_eps,
            max_iter: tol.max_iter,
            collision_eps_factor: tr.collision_eps_factor,
            online_eps: tr.online_eps,
            min_interval_len: 3,
            worker_count: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            output_dir: PathBuf::from("out"),
            seed: 20_240_601,
            search_cap: 64,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.tolerance().validate()?;
        self.tracker().validate()?;
        if self.min_interval_len == 0 || self.worker_count == 0 || self.search_cap == 0 {
            return Err(Error::Config(
                "min_interval_len, worker_count and search_cap must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance {
            abs_eps: self.abs_eps,
            rel_eps: self.rel_eps,
            max_iter: self.max_iter,
        }
    }

    pub fn tracker(&self) -> TrackerConfig {
        TrackerConfig {
            collision_eps_factor: self.collision_eps_factor,
            online_eps: self.online_eps,
            tol: self.tolerance(),
            ..TrackerConfig::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults, then the file (if any), then the environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `ZC_ABS_EPS`, `ZC_WORKERS`, ... from `lookup`.
    pub fn apply_env<F: Fn(&str) -> Option<String>>(&mut self, lookup: F) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, v: String) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
        }
        macro_rules! take {
            ($key:literal, $field:expr) => {
                if let Some(v) = lookup($key) {
                    $field = parse($key, v)?;
                }
            };
        }
        take!("ZC_ABS_EPS", self.abs_eps);
        take!("ZC_REL_EPS", self.rel_eps);
        take!("ZC_MAX_ITER", self.max_iter);
        take!("ZC_COLLISION_EPS_FACTOR", self.collision_eps_factor);
        take!("ZC_ONLINE_EPS", self.online_eps);
        take!("ZC_MIN_INTERVAL_LEN", self.min_interval_len);
        take!("ZC_WORKERS", self.worker_count);
        take!("ZC_SEED", self.seed);
        take!("ZC_SEARCH_CAP", self.search_cap);
        if let Some(v) = lookup("ZC_OUTPUT_DIR") {
            self.output_dir = PathBuf::from(v);
        }
        Ok(())
    }
}
