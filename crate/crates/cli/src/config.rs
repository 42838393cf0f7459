//! Flat `key = value` experiment config files and grid specs.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

/// Key-value config: one `key = value` pair per line, `#` comments.
#[derive(Debug, Default)]
pub struct FlatConfig {
    entries: HashMap<String, String>,
}

impl FlatConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(FlatConfig::default()) };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {}: expected key = value, got {line:?}", i + 1);
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FlatConfig { entries })
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get_str(key)
            .map(|s| s.parse().map_err(|_| anyhow!("config key {key}: bad number {s:?}")))
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get_str(key)
            .map(|s| s.parse().map_err(|_| anyhow!("config key {key}: bad integer {s:?}")))
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get_str(key)
            .map(|s| s.parse().map_err(|_| anyhow!("config key {key}: bad integer {s:?}")))
            .transpose()
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get_str(key)
            .map(|s| {
                s.split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| anyhow!("config key {key}: bad number {t:?}"))
                    })
                    .collect()
            })
            .transpose()
    }
}

/// Abscissa grid: either `start:stop:count` or an explicit comma list.
pub struct GridSpec(Vec<f64>);

impl GridSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                bail!("grid spec must be start:stop:count, got {spec:?}");
            }
            let start: f64 = parts[0].parse().map_err(|_| anyhow!("bad grid start"))?;
            let stop: f64 = parts[1].parse().map_err(|_| anyhow!("bad grid stop"))?;
            let count: usize = parts[2].parse().map_err(|_| anyhow!("bad grid count"))?;
            if count < 1 {
                bail!("grid count must be >= 1");
            }
            if count == 1 {
                return Ok(GridSpec(vec![start]));
            }
            let step = (stop - start) / (count - 1) as f64;
            Ok(GridSpec((0..count).map(|i| start + i as f64 * step).collect()))
        } else {
            let points: Result<Vec<f64>> = spec
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| anyhow!("bad grid value {t:?}")))
                .collect();
            Ok(GridSpec(points?))
        }
    }

    pub fn points(self) -> Vec<f64> {
        self.0
    }
}
