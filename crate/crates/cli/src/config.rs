//! Experiment configuration: a single versioned JSON document with a
//! strict schema (unknown keys are errors, so typos in experiment
//! definitions fail loudly instead of silently running defaults).

use serde::{Deserialize, Serialize};

use hdmart_core::generators::{markov_center, GeneratorSpec, MarkovChainSpec};
use hdmart_core::spectral::{Matrix, SymMatrix};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub generator: GeneratorConfig,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub dimension: usize,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default = "default_qmc_budget")]
    pub qmc_budget: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub bounds: BoundConfig,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default = "default_budget_ceiling")]
    pub budget_ceiling_secs: f64,
    #[serde(default)]
    pub check: CheckConfig,
}

fn default_qmc_budget() -> usize {
    1 << 12
}

fn default_budget_ceiling() -> f64 {
    1800.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum GeneratorConfig {
    IidGaussian {
        sigma: Vec<Vec<f64>>,
    },
    Bolthausen {},
    Markov {
        transition: Vec<Vec<f64>>,
        initial: Vec<f64>,
        /// `f[s][s']` is a length-d vector; must be conditionally
        /// centered unless `center` is set.
        f: Vec<Vec<Vec<f64>>>,
        #[serde(default)]
        center: bool,
    },
    GaussianSurrogate {
        cond_covs: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub grid_points: usize,
    pub random_count: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        // 41-point quantile grid plus 512 random rectangles
        FamilyConfig {
            grid_points: 41,
            random_count: 512,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub c_t1: f64,
    pub c_t2: f64,
    pub c_t3: f64,
    pub c_t4: f64,
    /// Integrability index in the kappa display; conjugate exponent of
    /// the Radon-Nikodym L^p index, default p = 2.
    pub q: f64,
    /// `||d nu / d mu||_{mu,p}`; 1 when starting from stationarity.
    pub rn_norm: f64,
    pub kappa_c: f64,
    pub kappa_mode: KappaMode,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            c_t1: 1.0,
            c_t2: 1.0,
            c_t3: 1.0,
            c_t4: 1.0,
            q: 2.0,
            rn_norm: 1.0,
            kappa_c: 1.0,
            kappa_mode: KappaMode::Proof,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMode {
    /// Matrix-Hoeffding form `c sqrt((q/gap) log(2 d n rn)) (beta-alpha)/sqrt(n)`.
    Proof,
    /// Coarse form `c log(nd)/sqrt(n)`.
    Statement,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub quad_points: usize,
    /// Scale the right side by 0.1 so every sweep case must fail; used
    /// to prove the checker actually detects violations.
    pub negative_control: bool,
    /// Cross-oracle rectangles compared against empirical frequencies.
    pub cross_rectangles: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            quad_points: 100_000,
            negative_control: false,
            cross_rectangles: 100,
        }
    }
}

fn sym_from_nested(rows: &[Vec<f64>], what: &'static str) -> Result<SymMatrix, CliError> {
    let d = rows.len();
    let mut flat = Vec::with_capacity(d * d);
    for row in rows {
        if row.len() != d {
            return Err(CliError::Config(format!("{what}: matrix must be square")));
        }
        flat.extend_from_slice(row);
    }
    SymMatrix::from_entries(d, &flat)
        .map_err(|e| CliError::Config(format!("{what}: {e}")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config(format!("config parse error at {}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {})",
                self.version, SCHEMA_VERSION
            )));
        }
        if self.n_grid.is_empty() {
            return Err(CliError::Config("n_grid must be nonempty".into()));
        }
        if !self.n_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(CliError::Config("n_grid must be strictly increasing".into()));
        }
        if self.replications < 100 {
            return Err(CliError::Config("replications must be >= 100".into()));
        }
        if self.dimension == 0 {
            return Err(CliError::Config("dimension must be >= 1".into()));
        }
        if self.family.grid_points < 3 {
            return Err(CliError::Config("family.grid_points must be >= 3".into()));
        }
        if self.qmc_budget < 1024 {
            return Err(CliError::Config("qmc_budget must be >= 1024".into()));
        }
        if matches!(self.generator, GeneratorConfig::Bolthausen {})
            && self.n_grid.iter().any(|&n| n < 1024)
        {
            return Err(CliError::Config(
                "bolthausen runs need every n >= 1024".into(),
            ));
        }
        // cheap structural checks; full generator validation happens on
        // conversion
        self.build_generator().map(|_| ())
    }

    /// Convert the JSON generator block into a core spec, checking that
    /// its dimension matches the `dimension` field.
    pub fn build_generator(&self) -> Result<GeneratorSpec, CliError> {
        let spec = match &self.generator {
            GeneratorConfig::IidGaussian { sigma } => GeneratorSpec::IidGaussian {
                sigma: sym_from_nested(sigma, "generator.sigma")?,
            },
            GeneratorConfig::Bolthausen {} => GeneratorSpec::Bolthausen { d: self.dimension },
            GeneratorConfig::Markov {
                transition,
                initial,
                f,
                center,
            } => {
                let m = transition.len();
                let mut flat_p = Vec::with_capacity(m * m);
                for row in transition {
                    if row.len() != m {
                        return Err(CliError::Config(
                            "generator.transition must be square".into(),
                        ));
                    }
                    flat_p.extend_from_slice(row);
                }
                let p = Matrix::from_rows(m, m, flat_p)
                    .map_err(|e| CliError::Config(format!("generator.transition: {e}")))?;
                if f.len() != m || f.iter().any(|row| row.len() != m) {
                    return Err(CliError::Config("generator.f must be m x m x d".into()));
                }
                let d = self.dimension;
                let mut table = Vec::with_capacity(m * m * d);
                for row in f {
                    for cell in row {
                        if cell.len() != d {
                            return Err(CliError::Config(
                                "generator.f entries must have length `dimension`".into(),
                            ));
                        }
                        table.extend_from_slice(cell);
                    }
                }
                let table = if *center {
                    markov_center(&table, &p, d)
                        .map_err(|e| CliError::Config(format!("generator.f: {e}")))?
                } else {
                    table
                };
                let chain = MarkovChainSpec::new(p, initial.clone(), table, d)
                    .map_err(|e| CliError::Config(format!("generator: {e}")))?;
                GeneratorSpec::MarkovInduced { chain }
            }
            GeneratorConfig::GaussianSurrogate { cond_covs } => {
                let covs = cond_covs
                    .iter()
                    .map(|m| sym_from_nested(m, "generator.cond_covs"))
                    .collect::<Result<Vec<_>, _>>()?;
                GeneratorSpec::GaussianSurrogate { cond_covs: covs }
            }
        };
        if spec.dim() != self.dimension {
            return Err(CliError::Config(format!(
                "generator dimension {} disagrees with `dimension` {}",
                spec.dim(),
                self.dimension
            )));
        }
        Ok(spec)
    }
}
