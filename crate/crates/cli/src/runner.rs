//! Replication scheduling and the per-horizon measurement pipeline.
//!
//! Replications parallelize over a rayon pool with child seeds derived
//! from `(base_seed, replication_index)` and index-ordered collection,
//! so every number downstream is independent of the thread count.

use std::time::Instant;

use rayon::prelude::*;

use hdmart_core::bounds::{
    bound_t1, bound_t2, bound_t3, bound_t4, kappa_markov, kappa_statement, MomentStats,
    T3Variant,
};
use hdmart_core::generators::{
    generate_normalized_sum, moment_stats, reference_sigma, stationary_and_gap, GeneratorSpec,
};
use hdmart_core::kolmogorov::{build_family, estimate_dk, RectangleFamily};
use hdmart_core::seed::child_seed;
use hdmart_core::spectral::{spectral_stats, sym_inverse, Matrix, SymMatrix};

use crate::config::{ExperimentConfig, KappaMode};
use crate::report::NRow;
use crate::CliError;

// stream tags for deterministic seed derivation
const STREAM_DK: u64 = 0xD1;
const STREAM_STATS: u64 = 0x57A7;
const STREAM_FAMILY: u64 = 0xFA31;
const STREAM_PILOT: u64 = 0xB107;

/// `reps x d` matrix of normalized sums, one replication per row.
pub fn parallel_sums(
    spec: &GeneratorSpec,
    n: usize,
    reps: usize,
    base_seed: u64,
) -> Result<Matrix, CliError> {
    let d = spec.dim();
    let rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| generate_normalized_sum(spec, n, child_seed(base_seed, r as u64)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Run(format!("generator: {e}")))?;
    let mut out = Matrix::zeros(reps, d);
    for (i, row) in rows.iter().enumerate() {
        out.row_mut(i).copy_from_slice(row);
    }
    Ok(out)
}

/// Project the full run from a 10-replication pilot per horizon and
/// refuse configurations over the wall-clock ceiling.
pub fn enforce_budget_guard(cfg: &ExperimentConfig, spec: &GeneratorSpec) -> Result<(), CliError> {
    let pilot_seed = child_seed(cfg.master_seed, STREAM_PILOT);
    let mut projected = 0.0f64;
    for &n in &cfg.n_grid {
        let t0 = Instant::now();
        for r in 0..10u64 {
            generate_normalized_sum(spec, n, child_seed(pilot_seed, r))
                .map_err(|e| CliError::Run(format!("generator: {e}")))?;
        }
        let per_rep = t0.elapsed().as_secs_f64() / 10.0;
        projected += per_rep * cfg.replications as f64;
    }
    projected /= rayon::current_num_threads() as f64;
    if projected > cfg.budget_ceiling_secs {
        return Err(CliError::Config(format!(
            "projected runtime {projected:.0}s exceeds budget ceiling {:.0}s; \
             shrink n_grid or replications, or raise budget_ceiling_secs",
            cfg.budget_ceiling_secs
        )));
    }
    Ok(())
}

/// Derived once per run: kappa inputs for the Markov bound column.
pub struct MarkovBoundInputs {
    pub gap: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_inv_norm: f64,
    pub reversible: bool,
    pub second_modulus: f64,
}

pub fn markov_bound_inputs(
    spec: &GeneratorSpec,
    sigma: &SymMatrix,
) -> Result<Option<MarkovBoundInputs>, CliError> {
    let chain = match spec {
        GeneratorSpec::MarkovInduced { chain } => chain,
        _ => return Ok(None),
    };
    let info = stationary_and_gap(chain.transition())
        .map_err(|e| CliError::Run(format!("chain: {e}")))?;
    let mut alpha = f64::INFINITY;
    let mut beta: f64 = 0.0;
    for s in 0..chain.num_states() {
        let st = spectral_stats(&chain.state_cond_cov(s));
        alpha = alpha.min(st.lambda_min);
        beta = beta.max(st.d_max);
    }
    let sigma_inv_norm = sym_inverse(sigma)
        .map(|inv| inv.op_norm())
        .map_err(|e| CliError::Run(format!("sigma inverse: {e}")))?;
    Ok(Some(MarkovBoundInputs {
        gap: info.gap,
        alpha,
        beta,
        sigma_inv_norm,
        reversible: info.reversible,
        second_modulus: info.second_modulus,
    }))
}

/// Kappa at horizon `n` under the configured convention.
pub fn kappa_for(cfg: &ExperimentConfig, mk: &MarkovBoundInputs, n: usize, d: usize) -> f64 {
    match cfg.bounds.kappa_mode {
        KappaMode::Proof => kappa_markov(
            mk.beta,
            mk.alpha,
            mk.gap,
            n,
            d,
            cfg.bounds.rn_norm,
            cfg.bounds.q,
            cfg.bounds.kappa_c,
        )
        .unwrap_or(f64::NAN),
        KappaMode::Statement => kappa_statement(n, d, cfg.bounds.kappa_c),
    }
}

fn nan_unless_valid(stats: &MomentStats, v: f64) -> f64 {
    if stats.validate().is_ok() && v.is_finite() {
        v
    } else {
        f64::NAN
    }
}

/// Evaluate every bound column for one horizon; columns whose inputs
/// are undefined for this generator come out as NaN.
pub fn bound_columns(
    cfg: &ExperimentConfig,
    stats: &MomentStats,
    mk: Option<&MarkovBoundInputs>,
    n: usize,
    d: usize,
) -> [f64; 5] {
    let t1 = nan_unless_valid(stats, bound_t1(stats, cfg.bounds.c_t1).value);
    let t2 = nan_unless_valid(stats, bound_t2(stats, cfg.bounds.c_t2).value);
    let t3a = nan_unless_valid(
        stats,
        bound_t3(stats, T3Variant::WithoutAlpha, cfg.bounds.c_t3).value,
    );
    let t3b = nan_unless_valid(
        stats,
        bound_t3(stats, T3Variant::WithAlpha, cfg.bounds.c_t3).value,
    );
    let t4 = match mk {
        Some(mk) => {
            let kappa = kappa_for(cfg, mk, n, d);
            bound_t4(stats, kappa, mk.sigma_inv_norm, cfg.bounds.c_t4)
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
        }
        None => f64::NAN,
    };
    [t1, t2, t3a, t3b, t4]
}

/// Everything shared by the `distance` and `ratefit` pipelines.
pub struct Pipeline {
    pub spec: GeneratorSpec,
    pub sigma_n: SymMatrix,
    pub family: RectangleFamily,
    pub markov_inputs: Option<MarkovBoundInputs>,
    /// Hypothesis constants measured once at the largest horizon; they
    /// are n-free constants of the construction, so per-row evaluation
    /// only substitutes the row's `n`.
    pub stats_ref: MomentStats,
}

impl Pipeline {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let spec = cfg.build_generator()?;
        let n_ref = *cfg.n_grid.last().expect("validated nonempty");
        let sigma_n = reference_sigma(&spec, n_ref)
            .map_err(|e| CliError::Run(format!("reference covariance: {e}")))?;
        let family = build_family(
            cfg.dimension,
            &sigma_n,
            cfg.family.grid_points,
            cfg.family.random_count,
            child_seed(cfg.master_seed, STREAM_FAMILY),
        );
        let markov_inputs = markov_bound_inputs(&spec, &sigma_n)?;
        let stats_ref = moment_stats(
            &spec,
            n_ref,
            child_seed(cfg.master_seed, STREAM_STATS),
            256,
        )
        .map_err(|e| CliError::Run(format!("moment stats: {e}")))?;
        Ok(Pipeline {
            spec,
            sigma_n,
            family,
            markov_inputs,
            stats_ref,
        })
    }

    /// Simulate, estimate the distance, and evaluate bounds at one `n`.
    pub fn distance_row(&self, cfg: &ExperimentConfig, n: usize) -> Result<NRow, CliError> {
        let t0 = Instant::now();
        let n_seed = child_seed(cfg.master_seed, n as u64);
        let samples = parallel_sums(&self.spec, n, cfg.replications, n_seed)?;
        let est = estimate_dk(
            &samples,
            &self.sigma_n,
            &self.family,
            cfg.qmc_budget,
            child_seed(n_seed, STREAM_DK),
        )
        .map_err(|e| CliError::Run(format!("distance estimation: {e}")))?;
        let stats = MomentStats {
            n,
            ..self.stats_ref
        };
        let b = bound_columns(cfg, &stats, self.markov_inputs.as_ref(), n, cfg.dimension);
        Ok(NRow {
            n,
            d: cfg.dimension,
            replications: cfg.replications,
            dk_value: est.value,
            mc_error: est.mc_error,
            mvn_error: est.mvn_error,
            mc_bonferroni: est.mc_bonferroni,
            bound_t1: b[0],
            bound_t2: b[1],
            bound_t3a: b[2],
            bound_t3b: b[3],
            bound_t4: b[4],
            seed: n_seed,
            wall_time: t0.elapsed().as_secs_f64(),
        })
    }
}
