//! The five CLI commands.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use hdmart_core::bounds::{rate_fit, stein_integral_check, stein_sweep_grid};
use hdmart_core::gauss::{empirical_rect_prob, rect_prob, sample_mvn};
use hdmart_core::generators::{generate, yurinskii_augment, GeneratorSpec};
use hdmart_core::kolmogorov::{build_family, estimate_dk, DkEstimate};
use hdmart_core::seed::child_seed;
use hdmart_core::spectral::{cholesky_factor, Matrix, SymMatrix};

use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, FitSummary, NRow};
use crate::runner::{enforce_budget_guard, kappa_for, parallel_sums, Pipeline};
use crate::CliError;

fn config_echo(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn try_fit(series: &str, pts: &[(usize, f64)], fits: &mut Vec<FitSummary>) {
    if pts.len() >= 2 && pts.iter().all(|&(_, v)| v > 0.0 && v.is_finite()) {
        if let Ok(f) = rate_fit(pts) {
            fits.push(FitSummary {
                series: series.to_string(),
                slope: f.slope,
                intercept: f.intercept,
                r_squared: f.r_squared,
            });
        }
    }
}

fn fit_rows(rows: &[NRow], fits: &mut Vec<FitSummary>) {
    let take = |f: fn(&NRow) -> f64| -> Vec<(usize, f64)> {
        rows.iter().map(|r| (r.n, f(r))).collect()
    };
    try_fit("dk", &take(|r| r.dk_value), fits);
    try_fit("bound_t1", &take(|r| r.bound_t1), fits);
    try_fit("bound_t2", &take(|r| r.bound_t2), fits);
    try_fit("bound_t3a", &take(|r| r.bound_t3a), fits);
    try_fit("bound_t3b", &take(|r| r.bound_t3b), fits);
    try_fit("bound_t4", &take(|r| r.bound_t4), fits);
}

fn print_rows(rows: &[NRow]) {
    for r in rows {
        println!(
            "n={:>8} d={} R={} dk={:.5} (mc {:.5}, mvn {:.5}) t1={:.4} t2={:.4} t3a={:.4} t3b={:.4} t4={:.4} [{:.1}s]",
            r.n, r.d, r.replications, r.dk_value, r.mc_error, r.mvn_error,
            r.bound_t1, r.bound_t2, r.bound_t3a, r.bound_t3b, r.bound_t4, r.wall_time
        );
    }
}

/// `distance`: per-n Kolmogorov estimates and bound columns, no fits.
pub fn cmd_distance(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let pipeline = Pipeline::prepare(cfg)?;
    enforce_budget_guard(cfg, &pipeline.spec)?;
    let mut report = ExperimentReport::new("distance", config_echo(cfg), cfg.master_seed);
    for &n in &cfg.n_grid {
        report.rows.push(pipeline.distance_row(cfg, n)?);
    }
    print_rows(&report.rows);
    report.write_to(out_dir, true)
}

/// `ratefit`: the distance pipeline plus log-log rate fits of the dk
/// series and every bound series.
pub fn cmd_ratefit(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let pipeline = Pipeline::prepare(cfg)?;
    enforce_budget_guard(cfg, &pipeline.spec)?;
    let mut report = ExperimentReport::new("ratefit", config_echo(cfg), cfg.master_seed);
    for &n in &cfg.n_grid {
        report.rows.push(pipeline.distance_row(cfg, n)?);
    }
    fit_rows(&report.rows, &mut report.rate_fits);
    print_rows(&report.rows);
    for f in &report.rate_fits {
        println!("fit {:>9}: slope {:+.4}  r2 {:.4}", f.series, f.slope, f.r_squared);
    }
    report.write_to(out_dir, true)
}

/// `simulate`: replication sums only — empirical mean and covariance of
/// `S_n/sqrt(n)` per horizon, JSON report (no dk, no CSV).
pub fn cmd_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let spec = cfg.build_generator()?;
    enforce_budget_guard(cfg, &spec)?;
    let mut report = ExperimentReport::new("simulate", config_echo(cfg), cfg.master_seed);
    let d = cfg.dimension;
    let mut per_n = Vec::new();
    for &n in &cfg.n_grid {
        let t0 = Instant::now();
        let n_seed = child_seed(cfg.master_seed, n as u64);
        let samples = parallel_sums(&spec, n, cfg.replications, n_seed)?;
        let reps = samples.rows() as f64;
        let mut mean = vec![0.0f64; d];
        for i in 0..samples.rows() {
            for (m, &v) in mean.iter_mut().zip(samples.row(i).iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= reps);
        let mut cov = vec![vec![0.0f64; d]; d];
        for i in 0..samples.rows() {
            let row = samples.row(i);
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] += (row[a] - mean[a]) * (row[b] - mean[b]);
                }
            }
        }
        for row in cov.iter_mut() {
            row.iter_mut().for_each(|v| *v /= reps);
        }
        println!("n={n:>8}: simulated {} replications in {:.1}s", cfg.replications, t0.elapsed().as_secs_f64());
        per_n.push(json!({
            "n": n,
            "seed": n_seed,
            "mean": mean,
            "covariance": cov,
            "wall_time": t0.elapsed().as_secs_f64(),
        }));
    }
    report.extras = json!({ "per_n": per_n });
    report.write_to(out_dir, false)
}

struct MarkovRep {
    raw_sum: Vec<f64>,
    aug_sum: Vec<f64>,
    sigma_dev: f64,
    tau: usize,
    qv_resid: f64,
}

/// `markov`: concentration of the realized average conditional
/// covariance, the stopping-time augmentation, and both distance
/// measurements.
pub fn cmd_markov(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let pipeline = Pipeline::prepare(cfg)?;
    let spec = &pipeline.spec;
    if !matches!(spec, GeneratorSpec::MarkovInduced { .. }) {
        return Err(CliError::Config(
            "the markov command requires a markov generator".into(),
        ));
    }
    enforce_budget_guard(cfg, spec)?;
    let mk = pipeline
        .markov_inputs
        .as_ref()
        .expect("markov inputs exist for markov specs");
    let sigma = &pipeline.sigma_n;
    let d = cfg.dimension;
    if !mk.reversible {
        eprintln!(
            "warning: chain is not reversible (detailed balance violated); \
             the spectral gap convention 1 - |lambda_2| is nonstandard there"
        );
    }

    let mut report = ExperimentReport::new("markov", config_echo(cfg), cfg.master_seed);
    let mut per_n = Vec::new();
    let mut p90_series = Vec::new();
    for &n in &cfg.n_grid {
        let t0 = Instant::now();
        let n_seed = child_seed(cfg.master_seed, n as u64);
        let kappa = kappa_for(cfg, mk, n, d);
        let cap = sigma.add_scaled_identity(kappa).scale(n as f64);
        let reps: Vec<MarkovRep> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| -> Result<MarkovRep, CliError> {
                let seed_r = child_seed(n_seed, r as u64);
                let path = generate(spec, n, seed_r)
                    .map_err(|e| CliError::Run(format!("generator: {e}")))?;
                let covs = path.cond_covs.as_ref().expect("markov paths carry covs");
                let sigma_bar = covs.mean();
                let sigma_dev = sigma_bar.sub(sigma).op_norm();
                let (aug, tau) = yurinskii_augment(&path, sigma, kappa, child_seed(seed_r, 1))
                    .map_err(|e| CliError::Run(format!("augmentation: {e}")))?;
                let qv = aug.cond_covs.as_ref().unwrap().sum();
                let qv_resid = qv.sub(&cap).max_abs();
                // the augmented sum normalizes by sqrt(n): its terminal
                // quadratic variation is n (Sigma + kappa I)
                let mut aug_sum = vec![0.0f64; d];
                for k in 0..aug.increments.rows() {
                    for (s, &v) in aug_sum.iter_mut().zip(aug.increments.row(k).iter()) {
                        *s += v;
                    }
                }
                let scale = 1.0 / (n as f64).sqrt();
                aug_sum.iter_mut().for_each(|v| *v *= scale);
                Ok(MarkovRep {
                    raw_sum: path.normalized_sum(),
                    aug_sum,
                    sigma_dev,
                    tau,
                    qv_resid,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let r_count = reps.len();
        let mut raw = Matrix::zeros(r_count, d);
        let mut aug = Matrix::zeros(r_count, d);
        for (i, rep) in reps.iter().enumerate() {
            raw.row_mut(i).copy_from_slice(&rep.raw_sum);
            aug.row_mut(i).copy_from_slice(&rep.aug_sum);
        }
        let mut devs: Vec<f64> = reps.iter().map(|r| r.sigma_dev).collect();
        devs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let dev_mean = devs.iter().sum::<f64>() / r_count as f64;
        let dev_p50 = devs[r_count / 2];
        let dev_p90 = devs[(r_count * 9) / 10];
        let dev_max = devs[r_count - 1];
        let exceed = devs.iter().filter(|&&v| v > kappa).count() as f64 / r_count as f64;
        let taus: Vec<usize> = reps.iter().map(|r| r.tau).collect();
        let tau_min = *taus.iter().min().unwrap();
        let tau_max = *taus.iter().max().unwrap();
        let tau_mean = taus.iter().sum::<usize>() as f64 / r_count as f64;
        let frac_truncated = taus.iter().filter(|&&t| t < n).count() as f64 / r_count as f64;
        let qv_resid_max = reps.iter().map(|r| r.qv_resid).fold(0.0f64, f64::max);

        let est_raw = estimate_dk(
            &raw,
            sigma,
            &pipeline.family,
            cfg.qmc_budget,
            child_seed(n_seed, 0xD1),
        )
        .map_err(|e| CliError::Run(format!("distance estimation: {e}")))?;
        let sigma_aug = sigma.add_scaled_identity(kappa);
        let family_aug = build_family(
            d,
            &sigma_aug,
            cfg.family.grid_points,
            cfg.family.random_count,
            child_seed(cfg.master_seed, 0xFA32),
        );
        let est_aug = estimate_dk(
            &aug,
            &sigma_aug,
            &family_aug,
            cfg.qmc_budget,
            child_seed(n_seed, 0xD2),
        )
        .map_err(|e| CliError::Run(format!("distance estimation: {e}")))?;

        let stats = hdmart_core::generators::moment_stats(spec, n, child_seed(n_seed, 0x57A7), 0)
            .map_err(|e| CliError::Run(format!("moment stats: {e}")))?;
        let b = crate::runner::bound_columns(cfg, &stats, Some(mk), n, d);
        report.rows.push(NRow {
            n,
            d,
            replications: cfg.replications,
            dk_value: est_raw.value,
            mc_error: est_raw.mc_error,
            mvn_error: est_raw.mvn_error,
            mc_bonferroni: est_raw.mc_bonferroni,
            bound_t1: b[0],
            bound_t2: b[1],
            bound_t3a: b[2],
            bound_t3b: b[3],
            bound_t4: b[4],
            seed: n_seed,
            wall_time: t0.elapsed().as_secs_f64(),
        });
        let dk_json = |e: &DkEstimate| {
            json!({
                "value": e.value,
                "mc_error": e.mc_error,
                "mvn_error": e.mvn_error,
                "mc_bonferroni": e.mc_bonferroni,
                "argmax_index": e.argmax_index,
            })
        };
        println!(
            "n={n:>8} kappa={kappa:.5} |sigma_bar - sigma|: mean {dev_mean:.5} p90 {dev_p90:.5} \
             exceed {exceed:.4}  tau in [{tau_min},{tau_max}] trunc {frac_truncated:.4} \
             qv_resid {qv_resid_max:.2e} dk_raw {:.5} dk_aug {:.5}",
            est_raw.value, est_aug.value
        );
        per_n.push(json!({
            "n": n,
            "kappa": kappa,
            "sigma_dev": {"mean": dev_mean, "p50": dev_p50, "p90": dev_p90, "max": dev_max},
            "kappa_exceed_fraction": exceed,
            "tau": {"min": tau_min, "mean": tau_mean, "max": tau_max, "fraction_truncated": frac_truncated},
            "terminal_qv_max_residual": qv_resid_max,
            "dk_raw_vs_sigma": dk_json(&est_raw),
            "dk_augmented_vs_sigma_plus_kappa": dk_json(&est_aug),
        }));
        p90_series.push((n, dev_p90));
    }
    try_fit("sigma_dev_p90", &p90_series, &mut report.rate_fits);
    fit_rows(&report.rows, &mut report.rate_fits);
    for f in &report.rate_fits {
        println!("fit {:>14}: slope {:+.4}  r2 {:.4}", f.series, f.slope, f.r_squared);
    }
    report.extras = json!({
        "gap": mk.gap,
        "second_modulus": mk.second_modulus,
        "reversible": mk.reversible,
        "alpha": mk.alpha,
        "beta": mk.beta,
        "sigma_inv_norm": mk.sigma_inv_norm,
        "kappa_proof_at_last_n": hdmart_core::bounds::kappa_markov(
            mk.beta, mk.alpha, mk.gap, *cfg.n_grid.last().unwrap(), d,
            cfg.bounds.rn_norm, cfg.bounds.q, cfg.bounds.kappa_c).unwrap_or(f64::NAN),
        "kappa_statement_at_last_n": hdmart_core::bounds::kappa_statement(
            *cfg.n_grid.last().unwrap(), d, cfg.bounds.kappa_c),
        "per_n": per_n,
    });
    report.write_to(out_dir, true)
}

/// `check`: the integral-inequality sweep plus the engine cross-oracle;
/// exit code 0 iff everything holds.
pub fn cmd_check(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let mut report = ExperimentReport::new("check", config_echo(cfg), cfg.master_seed);
    let grid = stein_sweep_grid();
    let mut results = Vec::new();
    let scale = if cfg.check.negative_control { 0.1 } else { 1.0 };
    for &(t, e1, ek) in &grid {
        let r = stein_integral_check(t, e1, ek, cfg.check.quad_points)
            .map_err(|e| CliError::Run(format!("integral check at ({t}, {e1}, {ek}): {e}")))?;
        let holds = r.lhs <= scale * r.rhs * (1.0 + 1e-6);
        results.push(json!({
            "t": t, "eps1": e1, "epsk": ek, "lhs": r.lhs, "rhs": scale * r.rhs, "holds": holds,
        }));
        if !holds {
            report.extras = json!({"sweep": results});
            report.write_to(out_dir, false)?;
            return Err(CliError::CheckFailed(format!(
                "integral inequality violated at (t={t}, eps1={e1}, epsk={ek}): \
                 lhs {} > rhs {}",
                r.lhs,
                scale * r.rhs
            )));
        }
    }
    let worked = stein_integral_check(0.5, 1.0, 1.0, cfg.check.quad_points)
        .map_err(|e| CliError::Run(format!("integral check: {e}")))?;
    println!(
        "integral sweep: {} cases hold; worked case lhs {:.5} <= rhs {:.5}",
        grid.len(),
        worked.lhs,
        worked.rhs
    );

    // cross-oracle: QMC rectangle probabilities against empirical
    // frequencies of exact draws
    let d = 10usize;
    let mut sigma = SymMatrix::identity(d);
    for i in 0..d - 1 {
        sigma.set_sym(i, i + 1, 0.2);
    }
    let family = build_family(d, &sigma, 3, cfg.check.cross_rectangles, cfg.master_seed);
    let root = cholesky_factor(&sigma).map_err(|e| CliError::Run(format!("{e}")))?;
    let samples = sample_mvn(&root, 100_000, child_seed(cfg.master_seed, 0xC0))
        ;
    let mut worst: f64 = 0.0;
    for (idx, rect) in family.rectangles.iter().enumerate() {
        let q = rect_prob(&sigma, rect, cfg.qmc_budget, child_seed(cfg.master_seed, idx as u64))
            .map_err(|e| CliError::Run(format!("{e}")))?;
        let e = empirical_rect_prob(&samples, rect);
        let gap = (q.value - e).abs();
        worst = worst.max(gap);
        if gap > 0.01 {
            return Err(CliError::CheckFailed(format!(
                "cross-oracle disagreement {gap:.4} > 0.01 on rectangle {idx}"
            )));
        }
    }
    println!(
        "cross-oracle: {} rectangles at d={d}, worst |qmc - empirical| = {worst:.5}",
        family.len()
    );
    report.extras = json!({
        "sweep_cases": grid.len(),
        "worked_case": {"lhs": worked.lhs, "rhs": worked.rhs},
        "cross_oracle_worst_gap": worst,
        "negative_control": cfg.check.negative_control,
    });
    report.write_to(out_dir, false)
}
