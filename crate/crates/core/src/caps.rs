//! Size caps shared by every module.
//!
//! The defaults are deliberately modest so that a laptop never allocates more
//! than a few hundred megabytes. They can be raised through the
//! `DESIGNFORGE_CAPS` environment variable, e.g.
//! `DESIGNFORGE_CAPS="dense_dim=8192,enumeration=1048576"`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CAPS_ENV: &str = "DESIGNFORGE_CAPS";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest square dimension handled by dense decompositions.
    pub dense_dim: usize,
    /// Largest number of entries a materialized matrix may have.
    pub tensor_entries: usize,
    /// Largest monomial count that may be enumerated exhaustively.
    pub enumeration: u64,
    /// Default Monte-Carlo sample count.
    pub mc_samples: usize,
    /// Largest tensor power for matching enumeration.
    pub matching_k: usize,
    /// Largest vertex count for expander certification.
    pub graph_vertices: usize,
    /// Largest state dimension for matrix-free appliers.
    pub vector_dim: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            dense_dim: 4096,
            tensor_entries: 1 << 26,
            enumeration: 1 << 16,
            mc_samples: 100_000,
            matching_k: 6,
            graph_vertices: 200_000,
            vector_dim: 1 << 24,
        }
    }
}

impl Caps {
    /// Defaults overridden by `DESIGNFORGE_CAPS`, if set.
    pub fn from_env() -> Result<Caps> {
        match std::env::var(CAPS_ENV) {
            Ok(spec) => Caps::default().with_overrides(&spec),
            Err(_) => Ok(Caps::default()),
        }
    }

    /// Applies a comma separated `key=value` list on top of `self`.
    pub fn with_overrides(mut self, spec: &str) -> Result<Caps> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("cap override `{item}` is not key=value")))?;
            let parse = |v: &str| -> Result<u64> {
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Parse(format!("cap `{key}` needs an integer, got `{v}`")))
            };
            let v = parse(value)?;
            match key.trim() {
                "dense_dim" => self.dense_dim = v as usize,
                "tensor_entries" => self.tensor_entries = v as usize,
                "enumeration" => self.enumeration = v,
                "mc_samples" => self.mc_samples = v as usize,
                "matching_k" => self.matching_k = v as usize,
                "graph_vertices" => self.graph_vertices = v as usize,
                "vector_dim" => self.vector_dim = v as usize,
                other => return Err(Error::Parse(format!("unknown cap `{other}`"))),
            }
        }
        Ok(self)
    }

    pub(crate) fn check_entries(&self, entries: u128) -> Result<()> {
        if entries > self.tensor_entries as u128 {
            return Err(Error::DimensionLimit { entries, cap: self.tensor_entries as u128 });
        }
        Ok(())
    }
}
