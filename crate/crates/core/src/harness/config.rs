//! Experiment configuration, read from TOML.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::PartitionMode;
use crate::multistream::LambdaPolicy;

/// Regularization weight: `"auto"` or `"fixed(<value>)"` in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LambdaMode {
    Auto,
    Fixed(f64),
}

impl FromStr for LambdaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        let inner = t
            .strip_prefix("fixed(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Config(format!("lambda_mode must be \"auto\" or \"fixed(<value>)\", got {s:?}")))?;
        let v: f64 = inner
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad fixed lambda {inner:?}")))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Config(format!("fixed lambda must be positive, got {v}")));
        }
        Ok(Self::Fixed(v))
    }
}

impl TryFrom<String> for LambdaMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LambdaMode> for String {
    fn from(m: LambdaMode) -> String {
        m.to_string()
    }
}

impl fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(v) => write!(f, "fixed({v})"),
        }
    }
}

impl From<LambdaMode> for LambdaPolicy {
    fn from(m: LambdaMode) -> Self {
        match m {
            LambdaMode::Auto => LambdaPolicy::Auto,
            LambdaMode::Fixed(v) => LambdaPolicy::Fixed(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Average,
    Oracle,
}

impl From<Partition> for PartitionMode {
    fn from(p: Partition) -> Self {
        match p {
            Partition::Average => PartitionMode::Average,
            Partition::Oracle => PartitionMode::Oracle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Baseline,
    Codeword,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Baseline => "baseline",
            Method::Codeword => "codeword",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_antennas: usize,
    pub n_ports: usize,
    pub n_user: usize,
    pub n_streams: usize,
    pub rounds: usize,
    pub trials: usize,
    pub lambda_mode: LambdaMode,
    pub partition_mode: Partition,
    pub methods: Vec<Method>,
    pub eigen_profile: Vec<f64>,
    pub codebook_size: usize,
    pub master_seed: u64,
    pub output_path: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_antennas: 32,
            n_ports: 8,
            n_user: 2,
            n_streams: 1,
            rounds: 100,
            trials: 100,
            lambda_mode: LambdaMode::Auto,
            partition_mode: Partition::Average,
            methods: vec![Method::Proposed, Method::Baseline, Method::Codeword],
            eigen_profile: vec![8.0, 1.0],
            codebook_size: 16,
            master_seed: 2024,
            output_path: "precision.csv".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_streams == 0 {
            return bad("n_streams must be at least 1".into());
        }
        if !(self.n_streams <= self.n_user && self.n_user <= self.n_ports && self.n_ports <= self.n_antennas) {
            return bad(format!(
                "need n_streams <= n_user <= n_ports <= n_antennas, got {} <= {} <= {} <= {}",
                self.n_streams, self.n_user, self.n_ports, self.n_antennas
            ));
        }
        if self.trials == 0 || self.rounds == 0 {
            return bad("trials and rounds must be at least 1".into());
        }
        if self.eigen_profile.len() != self.n_user {
            return bad(format!(
                "eigen_profile has {} entries but n_user is {}",
                self.eigen_profile.len(),
                self.n_user
            ));
        }
        if self.eigen_profile.iter().any(|s| !(s.is_finite() && *s > 0.0))
            || self.eigen_profile.windows(2).any(|w| w[0] < w[1])
        {
            return bad("eigen_profile must be positive and descending".into());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if self.codebook_size < self.n_ports || (self.n_streams > 1 && !self.codebook_size.is_multiple_of(self.n_ports)) {
            return bad(format!(
                "codebook_size {} incompatible with {} ports",
                self.codebook_size, self.n_ports
            ));
        }
        Ok(())
    }

    /// Methods in config order without repeats.
    pub fn method_list(&self) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for m in &self.methods {
            if !out.contains(m) {
                out.push(*m);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!((c.n_antennas, c.n_ports, c.n_user, c.rounds, c.trials), (32, 8, 2, 100, 100));
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), c);
    }

    #[test]
    fn lambda_mode_parsing() {
        assert_eq!("auto".parse::<LambdaMode>().unwrap(), LambdaMode::Auto);
        assert_eq!("fixed(0.01)".parse::<LambdaMode>().unwrap(), LambdaMode::Fixed(0.01));
        assert!("fixed(-1)".parse::<LambdaMode>().is_err());
        assert!("sometimes".parse::<LambdaMode>().is_err());
        let m = LambdaMode::Fixed(0.1);
        assert_eq!(m.to_string().parse::<LambdaMode>().unwrap(), m);
    }

    #[test]
    fn parses_a_full_file() {
        let c = ExperimentConfig::from_toml_str(
            r#"
n_antennas = 16
n_ports = 4
n_user = 2
n_streams = 2
rounds = 10
trials = 3
lambda_mode = "fixed(0.1)"
partition_mode = "oracle"
methods = ["proposed", "codeword"]
eigen_profile = [4.0, 1.0]
codebook_size = 8
master_seed = 9
output_path = "out.csv"
"#,
        )
        .unwrap();
        assert_eq!(c.lambda_mode, LambdaMode::Fixed(0.1));
        assert_eq!(c.partition_mode, Partition::Oracle);
        assert_eq!(c.methods, vec![Method::Proposed, Method::Codeword]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_shapes() {
        assert!(matches!(ExperimentConfig::from_toml_str("antennas = 3"), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_toml_str("n_streams = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("eigen_profile = [1.0]").is_err());
        assert!(ExperimentConfig::from_toml_str("eigen_profile = [1.0, 2.0]").is_err());
        assert!(ExperimentConfig::from_toml_str("trials = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("methods = []").is_err());
        assert!(ExperimentConfig::from_toml_str("n_streams = 2\ncodebook_size = 12").is_err());
    }
}
