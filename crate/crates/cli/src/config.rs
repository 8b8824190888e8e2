//! TOML run configuration. Command-line flags take precedence over every
//! value read here.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub bundle: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub anchors: AnchorConfig,
    #[serde(default)]
    pub hyper: HyperConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub targets: TargetConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorConfig {
    pub file: Option<PathBuf>,
    pub grid: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig {
    pub lambda: Option<f64>,
    pub omega: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub omega_grid: Option<Vec<f64>>,
    pub shortlist: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub stationary: Option<bool>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub n_lags: Option<usize>,
    pub max_dist: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub file: Option<PathBuf>,
    pub grid: Option<Vec<usize>>,
    pub truth: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_real: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("reading config {}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    /// Relative paths in a config file are taken relative to that file.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.data);
        fix(&mut self.out);
        fix(&mut self.bundle);
        fix(&mut self.anchors.file);
        fix(&mut self.targets.file);
        fix(&mut self.targets.truth);
    }

    fn validate(&self) -> CliResult<()> {
        for (name, grid) in [("anchors.grid", &self.anchors.grid), ("targets.grid", &self.targets.grid)] {
            if let Some(g) = grid {
                check_counts(name, g)?;
            }
        }
        for (name, path) in [
            ("data", &self.data),
            ("bundle", &self.bundle),
            ("anchors.file", &self.anchors.file),
            ("targets.file", &self.targets.file),
            ("targets.truth", &self.targets.truth),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(CliError::data(format!("config {name}: {} does not exist", p.display())));
                }
            }
        }
        if self.threads == Some(0) || self.simulate.n_real == Some(0) || self.hyper.shortlist == Some(0) {
            return Err(CliError::usage("config counts (threads, simulate.n_real, hyper.shortlist) must be positive"));
        }
        Ok(())
    }
}

pub fn check_counts(name: &str, counts: &[usize]) -> CliResult<()> {
    if counts.is_empty() || counts.len() > 2 || counts.contains(&0) {
        return Err(CliError::usage(format!(
            "{name} needs one or two positive counts, got {counts:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("d.csv"), "x,z\n0,1\n1,2\n").unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "data = \"d.csv\"\nseed = 3\n[anchors]\ngrid = [5, 5]\n[hyper]\nlambda_grid = [0.2, 0.3]\n",
        )
        .unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.data.unwrap(), dir.path().join("d.csv"));
        assert_eq!(c.anchors.grid, Some(vec![5, 5]));
        assert_eq!(c.seed, Some(3));
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "colour = 1\n").unwrap();
        assert_eq!(RunConfig::load(&path).unwrap_err().kind, crate::error::Kind::Usage);
        fs::write(&path, "[anchors]\ngrid = [0, 3]\n").unwrap();
        assert_eq!(RunConfig::load(&path).unwrap_err().kind, crate::error::Kind::Usage);
        fs::write(&path, "data = \"missing.csv\"\n").unwrap();
        assert_eq!(RunConfig::load(&path).unwrap_err().kind, crate::error::Kind::Data);
    }
}
