//! JSON configuration schema for experiments and CLI subcommands.
//!
//! Configs are versioned (`schema_version`) and fail closed: unknown keys are
//! rejected so a typo in a constant like `tau` or `eta` cannot silently
//! corrupt an experiment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{DeltaBound, NoiseSpec};
use crate::rules::{kappa_auto, Grid, KappaChoice, RuleConfig};
use crate::schemes::Scheme;
use crate::selfsim::{default_probes, KnConfig};
use crate::spectrum::{SpectralVector, Spectrum};

/// Current config schema version.
pub const SCHEMA_VERSION: u32 = 1;

fn check_schema_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {v}; this build reads version {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

/// Operator spectrum: explicit eigenvalues or the power-law generator
/// `t_j = j^(-2a)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpectrumSpec {
    Explicit {
        eigenvalues: Vec<f64>,
    },
    Power {
        a: f64,
        #[serde(rename = "J")]
        j_max: usize,
    },
}

impl SpectrumSpec {
    pub fn resolve(&self) -> Result<Spectrum> {
        match self {
            SpectrumSpec::Explicit { eigenvalues } => Spectrum::new(eigenvalues.clone()),
            SpectrumSpec::Power { a, j_max } => Spectrum::power_law(*a, *j_max),
        }
    }
}

/// Coefficient-vector generator for `x_dag` and `x0`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VectorSpec {
    #[default]
    Zero,
    Explicit {
        coefficients: Vec<f64>,
    },
    /// `x_j = scale * j^(-exponent)`.
    PowerLaw {
        scale: f64,
        exponent: f64,
    },
    /// `x_j = c * j^(-exponent)` with `c` chosen so that
    /// `sum_j (x_j / t_j^nu)^2 = 1`: the vector saturates the source ball of
    /// order `nu`.
    SourcePower {
        exponent: f64,
        nu: f64,
    },
}

impl VectorSpec {
    pub fn resolve(&self, spectrum: &Spectrum) -> Result<SpectralVector> {
        let j_max = spectrum.len();
        match self {
            VectorSpec::Zero => Ok(SpectralVector::zeros(j_max)),
            VectorSpec::Explicit { coefficients } => {
                let v = SpectralVector::new(coefficients.clone());
                v.check_paired(spectrum)?;
                Ok(v)
            }
            VectorSpec::PowerLaw { scale, exponent } => Ok(SpectralVector::new(
                (1..=j_max)
                    .map(|j| scale * (j as f64).powf(-exponent))
                    .collect(),
            )),
            VectorSpec::SourcePower { exponent, nu } => {
                let raw: Vec<f64> = (1..=j_max).map(|j| (j as f64).powf(-exponent)).collect();
                let weight: f64 = raw
                    .iter()
                    .zip(spectrum.eigenvalues())
                    .map(|(&x, &t)| (x / t.powf(*nu)).powi(2))
                    .sum();
                if !(weight > 0.0) || !weight.is_finite() {
                    return Err(Error::Config(format!(
                        "source normalization weight {weight} is not positive and finite; \
                         exponent {exponent} too shallow for nu = {nu}?"
                    )));
                }
                let c = 1.0 / weight.sqrt();
                Ok(SpectralVector::new(
                    raw.into_iter().map(|x| c * x).collect(),
                ))
            }
        }
    }
}

/// Noise source named in configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseConfig {
    /// White noise; `seed` defaults to the experiment seed.
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Power-bounded worst direction with `||A^(-mu) zeta|| = 1`.
    Power {
        mu: f64,
    },
    Explicit {
        zeta: Vec<f64>,
    },
}

impl NoiseConfig {
    pub fn resolve(&self, spectrum: &Spectrum, default_seed: u64) -> Result<NoiseSpec> {
        match self {
            NoiseConfig::Gaussian { seed } => Ok(NoiseSpec::gaussian(seed.unwrap_or(default_seed))),
            NoiseConfig::Power { mu } => NoiseSpec::power_bounded_saturated(spectrum, *mu),
            NoiseConfig::Explicit { zeta } => {
                NoiseSpec::explicit(spectrum, SpectralVector::new(zeta.clone()))
            }
        }
    }
}

/// `kappa` field: the literal string "auto" or a number.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaSpec {
    Fixed(f64),
    Named(String),
}

impl KappaSpec {
    pub fn resolve(&self) -> Result<KappaChoice> {
        match self {
            KappaSpec::Fixed(k) => Ok(KappaChoice::Fixed(*k)),
            KappaSpec::Named(s) if s == "auto" => Ok(KappaChoice::Auto),
            KappaSpec::Named(s) => Err(Error::Config(format!(
                "kappa must be a number or \"auto\", got \"{s}\""
            ))),
        }
    }
}

/// `alpha0` field: the literal string "norm" (use `t_1 = ||A||`) or a number.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha0Spec {
    Value(f64),
    Named(String),
}

impl Alpha0Spec {
    pub fn resolve(&self, spectrum: &Spectrum) -> Result<f64> {
        match self {
            Alpha0Spec::Value(v) => Ok(*v),
            Alpha0Spec::Named(s) if s == "norm" => Ok(spectrum.largest()),
            Alpha0Spec::Named(s) => Err(Error::Config(format!(
                "alpha0 must be a number or \"norm\", got \"{s}\""
            ))),
        }
    }
}

/// RG-rule constants together with the geometric grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub tau: f64,
    pub eta: f64,
    pub kappa: KappaSpec,
    pub q: f64,
    pub alpha0: Alpha0Spec,
    pub k_max: usize,
}

impl RuleSpec {
    pub fn resolve(&self, spectrum: &Spectrum) -> Result<(RuleConfig, Grid)> {
        let rule = RuleConfig::new(self.tau, self.eta, self.kappa.resolve()?)?;
        let grid = Grid::new(self.alpha0.resolve(spectrum)?, self.q, self.k_max)?;
        Ok((rule, grid))
    }
}

/// Noise-bound family for deterministic-rule experiments; the level is
/// supplied per ladder point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DeltaBoundSpec {
    PowerLaw { mu: f64 },
    StatisticalWeight { kappa: KappaSpec },
}

impl DeltaBoundSpec {
    /// Instantiates the bound at noise level `delta`. The statistical weight
    /// resolves an auto kappa against `N(alpha0)`.
    pub fn resolve(&self, delta: f64, n_alpha0: f64) -> Result<DeltaBound> {
        match self {
            DeltaBoundSpec::PowerLaw { mu } => DeltaBound::power_law(delta, *mu),
            DeltaBoundSpec::StatisticalWeight { kappa } => {
                let kappa = match kappa.resolve()? {
                    KappaChoice::Fixed(k) => k,
                    KappaChoice::Auto => kappa_auto(delta, n_alpha0)?,
                };
                DeltaBound::statistical_weight(delta, kappa)
            }
        }
    }
}

/// Self-similarity gate constants; probes default to the spectrum-derived
/// probe set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnGateSpec {
    pub c1: f64,
    pub c2: f64,
    pub t0: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<f64>>,
}

fn default_theta() -> f64 {
    0.9
}

impl KnGateSpec {
    pub fn resolve(&self, spectrum: &Spectrum) -> Result<KnConfig> {
        let probes = match &self.probes {
            Some(p) => p.clone(),
            None => default_probes(spectrum, self.t0)?,
        };
        KnConfig::new(self.c1, self.c2, self.t0, self.theta, probes)
    }
}

/// Monte Carlo experiment configuration (subcommands `mc` and `rate`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub spectrum: SpectrumSpec,
    pub x_dag: VectorSpec,
    #[serde(default)]
    pub x0: VectorSpec,
    pub scheme: Scheme,
    pub rule: RuleSpec,
    pub noise: NoiseConfig,
    /// Present: run the deterministic RG rule under this bound family.
    /// Absent: run the statistical RG rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<DeltaBoundSpec>,
    pub delta_ladder: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kn_gate: Option<KnGateSpec>,
}

/// Resolved experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub spectrum: Spectrum,
    pub x_dag: SpectralVector,
    pub x0: SpectralVector,
    pub scheme: Scheme,
    pub rule: RuleConfig,
    pub grid: Grid,
    pub noise: NoiseSpec,
    pub bound: Option<DeltaBoundSpec>,
    pub delta_ladder: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub source_nu: Option<f64>,
    pub kn: Option<KnConfig>,
    /// Verbatim echo of the configuration, stamped into reports.
    pub config_echo: serde_json::Value,
}

impl ExperimentConfig {
    pub fn resolve(&self) -> Result<Experiment> {
        check_schema_version(self.schema_version)?;
        if self.replicates < 2 {
            return Err(Error::Config("replicates must be >= 2".into()));
        }
        if self.delta_ladder.is_empty() {
            return Err(Error::Config("delta_ladder must be non-empty".into()));
        }
        for w in self.delta_ladder.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Config(
                    "delta_ladder must be strictly decreasing".into(),
                ));
            }
        }
        for &d in &self.delta_ladder {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Config(format!("delta = {d} must be finite and > 0")));
            }
        }
        let spectrum = self.spectrum.resolve()?;
        let x_dag = self.x_dag.resolve(&spectrum)?;
        let x0 = self.x0.resolve(&spectrum)?;
        let (rule, grid) = self.rule.resolve(&spectrum)?;
        let noise = self.noise.resolve(&spectrum, self.seed)?;
        let kn = self
            .kn_gate
            .as_ref()
            .map(|g| g.resolve(&spectrum))
            .transpose()?;
        Ok(Experiment {
            spectrum,
            x_dag,
            x0,
            scheme: self.scheme,
            rule,
            grid,
            noise,
            bound: self.bound.clone(),
            delta_ladder: self.delta_ladder.clone(),
            replicates: self.replicates,
            seed: self.seed,
            source_nu: self.source_nu,
            kn,
            config_echo: serde_json::to_value(self)?,
        })
    }

    /// Returns a copy with the seed replaced (CLI `--seed` override). The
    /// Gaussian noise seed follows unless the config pinned one explicitly.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.seed = seed;
        out
    }
}

/// Configuration of a single selection run (subcommand `select`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectConfig {
    pub schema_version: u32,
    pub spectrum: SpectrumSpec,
    pub x_dag: VectorSpec,
    #[serde(default)]
    pub x0: VectorSpec,
    pub scheme: Scheme,
    pub rule: RuleSpec,
    pub noise: NoiseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<DeltaBoundSpec>,
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    /// Replicate index realized for Gaussian noise.
    #[serde(default)]
    pub replicate: u64,
}

impl SelectConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema_version(self.schema_version)
    }
}

/// Configuration of a self-similarity check (subcommand `kn-check`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnCheckConfig {
    pub schema_version: u32,
    pub spectrum: SpectrumSpec,
    /// The inspected element `x_dag - x0` is formed from these two.
    pub x_dag: VectorSpec,
    #[serde(default)]
    pub x0: VectorSpec,
    pub scheme: Scheme,
    pub gate: KnGateSpec,
    /// "filter" (general form) or "projector".
    #[serde(default = "default_kn_form")]
    pub form: String,
}

fn default_kn_form() -> String {
    "filter".to_owned()
}

impl KnCheckConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema_version(self.schema_version)?;
        if self.form != "filter" && self.form != "projector" {
            return Err(Error::Config(format!(
                "form must be \"filter\" or \"projector\", got \"{}\"",
                self.form
            )));
        }
        Ok(())
    }
}

/// Configuration of a concentration study (subcommand `concentration`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub schema_version: u32,
    pub spectrum: SpectrumSpec,
    pub q: f64,
    pub alpha0: Alpha0Spec,
    pub k_max: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub kappa: KappaSpec,
    pub delta: f64,
    pub replicates: usize,
    pub seed: u64,
}

fn default_eta() -> f64 {
    1.0
}

impl ConcentrationConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema_version(self.schema_version)
    }
}

/// One case of the deterministic lemma battery.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaCaseSpec {
    pub label: String,
    pub spectrum: SpectrumSpec,
    pub x_dag: VectorSpec,
    #[serde(default)]
    pub x0: VectorSpec,
    pub scheme: Scheme,
    pub rule: RuleSpec,
    pub noise: NoiseConfig,
    pub bound: DeltaBoundSpec,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kn_gate: Option<KnGateSpec>,
    #[serde(default)]
    pub seed: u64,
}

/// Configuration of the lemma battery (subcommand `lemmas`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmasConfig {
    pub schema_version: u32,
    pub cases: Vec<LemmaCaseSpec>,
}

impl LemmasConfig {
    pub fn validate(&self) -> Result<()> {
        check_schema_version(self.schema_version)?;
        if self.cases.is_empty() {
            return Err(Error::Config(
                "lemma battery needs at least one case".into(),
            ));
        }
        Ok(())
    }
}
