//! Experiment configuration: TOML file, command-line overrides, per-experiment defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Conserve,
    Invariance,
    Converge,
    Picard,
    Counting,
    Strichartz,
    Ansatz,
    Threshold,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Conserve,
        Experiment::Invariance,
        Experiment::Converge,
        Experiment::Picard,
        Experiment::Counting,
        Experiment::Strichartz,
        Experiment::Ansatz,
        Experiment::Threshold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Conserve => "conserve",
            Experiment::Invariance => "invariance",
            Experiment::Converge => "converge",
            Experiment::Picard => "picard",
            Experiment::Counting => "counting",
            Experiment::Strichartz => "strichartz",
            Experiment::Ansatz => "ansatz",
            Experiment::Threshold => "threshold",
        }
    }

    /// `(alpha, n, T, dt, samples)` used when neither the file nor the command line sets them.
    fn defaults(self) -> (f64, u32, f64, f64, u32) {
        match self {
            Experiment::Conserve => (1.5, 64, 1.0, 1e-3, 1),
            Experiment::Invariance => (1.5, 6, 1.0, 1e-2, 2000),
            Experiment::Converge => (1.5, 128, 1.0, 1e-2, 10),
            Experiment::Picard => (1.5, 16, 0.2, 1e-2, 10_000),
            Experiment::Counting => (1.5, 1024, 1.0, 1e-2, 1000),
            Experiment::Strichartz => (1.5, 128, 1.0, 1e-2, 200),
            Experiment::Ansatz => (1.5, 128, 1.0, 1e-2, 10),
            Experiment::Threshold => (1.2, 1, 1.0, 1e-2, 1),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .with_context(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConserveParams {
    /// Cutoff of the gauge-equivalence run.
    pub gauge_n: u32,
    pub gauge_t: f64,
    pub single_mode_k: i64,
    pub single_mode_amplitude: f64,
}

impl Default for ConserveParams {
    fn default() -> Self {
        Self {
            gauge_n: 32,
            gauge_t: 0.5,
            single_mode_k: 3,
            single_mode_amplitude: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeParams {
    /// Smallest `n` of the Cauchy differences.
    pub n_min: u32,
    /// `σ₀ = (α−1)/2 − sigma_gap`.
    pub sigma_gap: f64,
    /// Consecutive decreases required at the top of the ladder.
    pub doublings: usize,
    /// Share of seeds that must decrease.
    pub pass_fraction: f64,
}

impl Default for ConvergeParams {
    fn default() -> Self {
        Self {
            n_min: 8,
            sigma_gap: 0.05,
            doublings: 3,
            pass_fraction: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardParams {
    pub times: Vec<f64>,
    pub kappa_j_max: usize,
    pub z: f64,
}

impl Default for PicardParams {
    fn default() -> Self {
        Self {
            times: vec![0.05, 0.1, 0.2],
            kappa_j_max: 30,
            z: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountingParams {
    /// Empty means "the top-level alpha if given, else 1.1, 1.5 and 2".
    pub alphas: Vec<f64>,
    pub n_list: Vec<u64>,
    pub eps: f64,
    pub growth_limit: f64,
    pub resonance_range: i64,
    pub convolution_regimes: Vec<[f64; 2]>,
    pub convolution_grid: [f64; 2],
    pub convolution_points: usize,
    pub slope_tolerance: f64,
}

impl Default for CountingParams {
    fn default() -> Self {
        Self {
            alphas: Vec::new(),
            n_list: vec![64, 256, 1024],
            eps: 0.1,
            growth_limit: 1.5,
            resonance_range: 64,
            convolution_regimes: vec![[1.0, 1.0], [0.75, 2.0], [0.6, 0.6]],
            convolution_grid: [10.0, 1e4],
            convolution_points: 25,
            slope_tolerance: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrichartzParams {
    pub n_min: u32,
    /// `s = 1/2 − α/4 + s_offset`.
    pub s_offset: f64,
    pub trend_limit: f64,
}

impl Default for StrichartzParams {
    fn default() -> Self {
        Self {
            n_min: 8,
            s_offset: 0.05,
            trend_limit: 1.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnsatzParams {
    pub delta: f64,
    /// `N` values of the telescoping check and of the ζ series.
    pub n_list: Vec<u32>,
    /// Background scale of the ζ series.
    pub zeta_l: u32,
    pub seed_fraction: f64,
    /// Scale, horizon and coarse step of the `dt⁴` residual check.
    pub residual_n: u32,
    pub residual_t: f64,
    pub residual_dt: f64,
    pub residual_ratio: f64,
    /// Kernel locality check.
    pub locality_n: u32,
    pub locality_l: u32,
    pub locality_limit: f64,
    /// Scaling table (finer step: the `X^{0,b}` proxy needs it).
    pub scaling_n_list: Vec<u32>,
    pub scaling_t: f64,
    pub scaling_dt: f64,
    pub scaling_eps: f64,
    pub scaling_b: f64,
}

impl Default for AnsatzParams {
    fn default() -> Self {
        Self {
            delta: 0.05,
            n_list: vec![16, 32, 64, 128],
            zeta_l: 2,
            seed_fraction: 0.8,
            residual_n: 16,
            residual_t: 0.5,
            residual_dt: 0.005,
            residual_ratio: 8.0,
            locality_n: 64,
            locality_l: 2,
            locality_limit: 0.2,
            scaling_n_list: vec![8, 16, 32],
            scaling_t: 0.5,
            scaling_dt: 1e-3,
            scaling_eps: 0.05,
            scaling_b: 0.55,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdParams {
    /// Exact rational `α` of the hierarchy check, e.g. `"6/5"`.
    pub hierarchy_alpha: String,
    /// Negative-control hook: evaluate the hierarchy with `b₁ = 1/2 + σ²⁰⁰`.
    pub corrupt_b1: bool,
    pub bracket: [f64; 2],
}

impl Default for ThresholdParams {
    fn default() -> Self {
        Self {
            hierarchy_alpha: "6/5".into(),
            corrupt_b1: false,
            bracket: [1.05, 1.125],
        }
    }
}

/// Contents of a TOML config file; every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<Experiment>,
    pub alpha: Option<f64>,
    pub n: Option<u32>,
    pub n_max: Option<u32>,
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub samples: Option<u32>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub conserve: ConserveParams,
    pub converge: ConvergeParams,
    pub picard: PicardParams,
    pub counting: CountingParams,
    pub strichartz: StrichartzParams,
    pub ansatz: AnsatzParams,
    pub threshold: ThresholdParams,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub n_max: Option<u32>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub samples: Option<u32>,
    pub out: Option<PathBuf>,
}

/// Fully resolved configuration, embedded verbatim in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub alpha: f64,
    /// `n` for single-cutoff experiments, `N_max` for ladders.
    pub n: u32,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub samples: u32,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub conserve: ConserveParams,
    pub converge: ConvergeParams,
    pub picard: PicardParams,
    pub counting: CountingParams,
    pub strichartz: StrichartzParams,
    pub ansatz: AnsatzParams,
    pub threshold: ThresholdParams,
}

impl ExperimentConfig {
    /// Precedence: command line, then file, then the experiment's defaults.
    pub fn resolve(experiment: Option<Experiment>, file: ConfigFile, cli: Overrides) -> Result<Self> {
        let experiment = match (experiment, file.experiment) {
            (Some(a), Some(b)) if a != b => bail!("config is for `{b}` but `{a}` was requested"),
            (Some(e), _) | (None, Some(e)) => e,
            (None, None) => bail!("no experiment given on the command line or in the config"),
        };
        let (alpha, n, t_final, dt, samples) = experiment.defaults();
        let explicit_alpha = cli.alpha.or(file.alpha);
        let mut counting = file.counting;
        if counting.alphas.is_empty() {
            counting.alphas = match explicit_alpha {
                Some(a) => vec![a],
                None => vec![1.1, 1.5, 2.0],
            };
        }
        let cfg = Self {
            experiment,
            alpha: explicit_alpha.unwrap_or(alpha),
            n: cli.n_max.or(file.n_max).or(file.n).unwrap_or(n),
            t_final: cli.t_final.or(file.t_final).unwrap_or(t_final),
            dt: cli.dt.or(file.dt).unwrap_or(dt),
            samples: cli.samples.or(file.samples).unwrap_or(samples),
            master_seed: cli.seed.or(file.seed).unwrap_or(0),
            output_dir: cli
                .out
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("out").join(experiment.name())),
            conserve: file.conserve,
            converge: file.converge,
            picard: file.picard,
            counting,
            strichartz: file.strichartz,
            ansatz: file.ansatz,
            threshold: file.threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults for `experiment` with output under `out`.
    pub fn defaults(experiment: Experiment, out: impl Into<PathBuf>) -> Self {
        let cli = Overrides {
            out: Some(out.into()),
            ..Overrides::default()
        };
        Self::resolve(Some(experiment), ConfigFile::default(), cli).expect("defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            bail!("dt must be positive (got {})", self.dt);
        }
        if !(self.t_final >= 0.0) {
            bail!("T must be non-negative (got {})", self.t_final);
        }
        if self.samples < 1 {
            bail!("samples must be at least 1");
        }
        if !(self.alpha > 1.0) && self.experiment != Experiment::Threshold {
            bail!("alpha must exceed 1 (got {})", self.alpha);
        }
        if self.n < 1 {
            bail!("n must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let file: ConfigFile = toml::from_str("experiment = \"conserve\"\nalpha = 1.3\ndt = 0.002\nseed = 4").unwrap();
        let cli = Overrides {
            alpha: Some(1.7),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::resolve(None, file, cli).unwrap();
        assert_eq!(cfg.alpha, 1.7);
        assert_eq!(cfg.dt, 0.002);
        assert_eq!(cfg.master_seed, 4);
        assert_eq!(cfg.n, 64);
        assert_eq!(cfg.output_dir, PathBuf::from("out/conserve"));
    }

    #[test]
    fn rejects_bad_values_and_keys() {
        let file = ConfigFile {
            dt: Some(0.0),
            ..ConfigFile::default()
        };
        assert!(ExperimentConfig::resolve(Some(Experiment::Conserve), file, Overrides::default()).is_err());
        assert!(toml::from_str::<ConfigFile>("colour = 3").is_err());
        let file = ConfigFile {
            experiment: Some(Experiment::Picard),
            ..ConfigFile::default()
        };
        assert!(ExperimentConfig::resolve(Some(Experiment::Conserve), file, Overrides::default()).is_err());
    }

    #[test]
    fn counting_alphas() {
        let cfg = ExperimentConfig::defaults(Experiment::Counting, "x");
        assert_eq!(cfg.counting.alphas, vec![1.1, 1.5, 2.0]);
        let cli = Overrides {
            alpha: Some(1.5),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::resolve(Some(Experiment::Counting), ConfigFile::default(), cli).unwrap();
        assert_eq!(cfg.counting.alphas, vec![1.5]);
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ExperimentConfig::defaults(Experiment::Ansatz, "x");
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
    }
}
