//! Run configuration shared by all CLI subcommands: input paths, the
//! estimation window, model choices, and reproducibility knobs.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimation::{Family, ModelVariant};

fn default_nu() -> f64 {
    3.0
}

fn default_omega() -> f64 {
    9.0
}

fn default_model() -> String {
    "negbin".into()
}

fn default_true() -> bool {
    true
}

fn default_bootstrap() -> usize {
    100
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_max_shift() -> usize {
    21
}

/// Flat TOML configuration file. Relative input paths are resolved
/// against the directory containing the file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub regions: PathBuf,
    pub cases: PathBuf,
    pub mobility: PathBuf,
    pub reductions: PathBuf,
    pub prevalence: PathBuf,
    /// First day of the estimation window.
    pub start: NaiveDate,
    /// Last day of the estimation window (inclusive).
    pub end: NaiveDate,
    /// Mean latent period in days.
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// Mean infectious period in days.
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Observation family: "poisson" or "negbin".
    #[serde(default = "default_model")]
    pub model: String,
    /// When false, only the without-mobility variant is fitted.
    #[serde(default = "default_true")]
    pub mobility_term: bool,
    /// Number of bootstrap replicas.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub seed: u64,
    /// Output directory for all emitted CSV files.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Largest shift tried by the delay scan.
    #[serde(default = "default_max_shift")]
    pub max_shift: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            for p in [
                &mut cfg.regions,
                &mut cfg.cases,
                &mut cfg.mobility,
                &mut cfg.reductions,
                &mut cfg.prevalence,
            ] {
                if p.is_relative() {
                    *p = dir.join(&p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::Config(format!(
                "start {} must precede end {}",
                self.start, self.end
            )));
        }
        // is_finite also rejects a nan literal in the file
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.nu) || !positive(self.omega) {
            return Err(Error::Config(format!(
                "latent and infectious periods must be positive (nu={}, omega={})",
                self.nu, self.omega
            )));
        }
        if self.bootstrap < 1 {
            return Err(Error::Config("bootstrap must be at least 1".into()));
        }
        self.family()?;
        Ok(())
    }

    pub fn family(&self) -> Result<Family> {
        match self.model.as_str() {
            "poisson" => Ok(Family::Poisson),
            "negbin" => Ok(Family::NegBin),
            other => Err(Error::Config(format!(
                "unknown model {other:?}; expected \"poisson\" or \"negbin\""
            ))),
        }
    }

    /// The model variants to fit: with and without the mobility term, or
    /// only without when the mobility term is disabled.
    pub fn variants(&self) -> Result<Vec<ModelVariant>> {
        let family = self.family()?;
        Ok(if self.mobility_term {
            vec![
                ModelVariant {
                    family,
                    with_mobility: true,
                },
                ModelVariant {
                    family,
                    with_mobility: false,
                },
            ]
        } else {
            vec![ModelVariant {
                family,
                with_mobility: false,
            }]
        })
    }

    /// The variant whose estimates drive simulation and forecasting.
    pub fn primary_variant(&self) -> Result<ModelVariant> {
        Ok(ModelVariant {
            family: self.family()?,
            with_mobility: self.mobility_term,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("run.toml");
        let mut f = std::fs::File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    const MINIMAL: &str = r#"
regions = "regions.csv"
cases = "cases.csv"
mobility = "mobility.csv"
reductions = "reductions.csv"
prevalence = "prevalence.csv"
start = "2020-07-01"
end = "2020-08-31"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), MINIMAL);
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.nu, 3.0);
        assert_eq!(cfg.omega, 9.0);
        assert_eq!(cfg.bootstrap, 100);
        assert_eq!(cfg.model, "negbin");
        assert!(cfg.mobility_term);
        assert_eq!(cfg.max_shift, 21);
        // relative paths resolve against the config directory
        assert_eq!(cfg.regions, dir.path().join("regions.csv"));
        assert_eq!(cfg.variants().unwrap().len(), 2);
    }

    #[test]
    fn rejects_inverted_window() {
        let dir = tempfile::tempdir().unwrap();
        let body = MINIMAL.replace("2020-08-31", "2020-06-01");
        let path = write_config(dir.path(), &body);
        assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_unknown_model_and_keys() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{MINIMAL}model = \"gaussian\"\n");
        let path = write_config(dir.path(), &body);
        assert!(RunConfig::load(&path).is_err());
        let body = format!("{MINIMAL}mystery_knob = 3\n");
        let path = write_config(dir.path(), &body);
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn rejects_zero_bootstrap() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{MINIMAL}bootstrap = 0\n");
        let path = write_config(dir.path(), &body);
        assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));
    }

    #[test]
    fn no_mobility_fits_single_variant() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{MINIMAL}mobility_term = false\nmodel = \"poisson\"\n");
        let path = write_config(dir.path(), &body);
        let cfg = RunConfig::load(&path).unwrap();
        let variants = cfg.variants().unwrap();
        assert_eq!(variants.len(), 1);
        assert!(!variants[0].with_mobility);
        assert_eq!(cfg.family().unwrap(), Family::Poisson);
    }
}
