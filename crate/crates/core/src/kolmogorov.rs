//! Kolmogorov distance over a finite hyper-rectangle family.
//!
//! The sup over all rectangles is not computable; we maximize
//! `|empirical - Gaussian|` over a fixed family (quantile-grid one-sided
//! rectangles, symmetric boxes, and random quantile rectangles) and
//! report the statistical and quadrature error at the maximizer, so the
//! under-approximation gap is explicit instead of hidden.

use alloc::vec::Vec;

use rand::Rng;

use crate::gauss::{empirical_rect_prob, rect_prob, GaussError};
use crate::math::{normal_cdf, normal_quantile};
use crate::rect::Rectangle;
use crate::seed::{child_seed, rng_from_seed};
use crate::spectral::{Matrix, SymMatrix};

/// A finite test class of rectangles plus the recipe that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RectangleFamily {
    pub rectangles: Vec<Rectangle>,
    pub grid_points: usize,
    pub random_count: usize,
    pub seed: u64,
}

impl RectangleFamily {
    pub fn len(&self) -> usize {
        self.rectangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rectangles.is_empty()
    }
}

/// Build the default family for dimension `d` under `N(0, sigma)`:
/// one-sided rectangles `prod_i (-inf, q_i(u)]` and symmetric boxes with
/// marginal coverage `u` for `u` on the quantile grid `j/(grid_points+1)`,
/// plus `random_count` rectangles with endpoints drawn from marginal
/// quantiles. Deterministic given `seed`.
pub fn build_family(
    d: usize,
    sigma: &SymMatrix,
    grid_points: usize,
    random_count: usize,
    seed: u64,
) -> RectangleFamily {
    debug_assert_eq!(sigma.dim(), d);
    debug_assert!(grid_points >= 3);
    let sds: Vec<f64> = (0..d).map(|i| libm::sqrt(sigma.get(i, i))).collect();
    let mut rectangles = Vec::with_capacity(2 * grid_points + random_count);
    for j in 1..=grid_points {
        let u = j as f64 / (grid_points + 1) as f64;
        let q = normal_quantile(u);
        rectangles.push(Rectangle::lower_orthant(
            sds.iter().map(|&s| q * s).collect(),
        ));
    }
    for j in 1..=grid_points {
        let u = j as f64 / (grid_points + 1) as f64;
        // half-width with two-sided marginal coverage u
        let q = normal_quantile(0.5 * (1.0 + u));
        let half: Vec<f64> = sds.iter().map(|&s| q * s).collect();
        rectangles.push(Rectangle::symmetric(&half));
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..random_count {
        let mut lower = Vec::with_capacity(d);
        let mut upper = Vec::with_capacity(d);
        for &s in &sds {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let (a, b) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            lower.push(normal_quantile(a) * s);
            upper.push(normal_quantile(b) * s);
        }
        rectangles.push(Rectangle::new(lower, upper).expect("sorted quantile endpoints"));
    }
    RectangleFamily {
        rectangles,
        grid_points,
        random_count,
        seed,
    }
}

/// A Kolmogorov-distance measurement over a finite family.
///
/// `value` is a lower bound for the true sup, up to the reported errors:
/// finite-family maximization can only undershoot. `mc_error` is the
/// binomial standard error of the empirical frequency at the maximizer,
/// `mvn_error` the quadrature standard error there, and `mc_bonferroni`
/// the uniform (Hoeffding over the whole family, 99% level) empirical
/// deviation bound, reported separately rather than folded into `value`.
#[derive(Debug, Clone, PartialEq)]
pub struct DkEstimate {
    pub value: f64,
    pub mc_error: f64,
    pub mvn_error: f64,
    pub mc_bonferroni: f64,
    pub argmax_rectangle: Rectangle,
    pub argmax_index: usize,
    pub family_size: usize,
}

/// Maximize `|empirical_rect_prob - rect_prob|` over the family.
///
/// Requires at least 100 sample rows and a positive definite `sigma`;
/// rectangle `i` integrates with seed `child_seed(seed, i)`, so the
/// result is deterministic and ties resolve to the lowest index.
pub fn estimate_dk(
    samples: &Matrix,
    sigma: &SymMatrix,
    family: &RectangleFamily,
    budget: usize,
    seed: u64,
) -> Result<DkEstimate, GaussError> {
    if samples.rows() < 100 {
        return Err(GaussError::InvalidInput("need at least 100 sample rows"));
    }
    if family.is_empty() {
        return Err(GaussError::InvalidInput("empty rectangle family"));
    }
    if samples.cols() != sigma.dim() {
        return Err(GaussError::InvalidInput("sample dimension mismatch"));
    }
    let r_count = samples.rows() as f64;
    let mut best = DkEstimate {
        value: -1.0,
        mc_error: 0.0,
        mvn_error: 0.0,
        mc_bonferroni: 0.0,
        argmax_rectangle: family.rectangles[0].clone(),
        argmax_index: 0,
        family_size: family.len(),
    };
    for (idx, rect) in family.rectangles.iter().enumerate() {
        let emp = empirical_rect_prob(samples, rect);
        let q = rect_prob(sigma, rect, budget, child_seed(seed, idx as u64))?;
        let diff = libm::fabs(emp - q.value);
        if diff > best.value {
            best.value = diff;
            best.mc_error = libm::sqrt(emp * (1.0 - emp) / r_count);
            best.mvn_error = q.stderr;
            best.argmax_rectangle = rect.clone();
            best.argmax_index = idx;
        }
    }
    best.mc_bonferroni =
        libm::sqrt(libm::log(2.0 * family.len() as f64 / 0.01) / (2.0 * r_count));
    Ok(best)
}

/// A one-dimensional law with a computable CDF.
#[derive(Debug, Clone, PartialEq)]
pub enum OneDimLaw {
    Normal { mean: f64, sd: f64 },
    PointMass(f64),
    /// Sorted sample values; construct through [`OneDimLaw::empirical`].
    Empirical(Vec<f64>),
}

impl OneDimLaw {
    pub fn normal(mean: f64, sd: f64) -> Self {
        OneDimLaw::Normal { mean, sd }
    }

    pub fn empirical(mut samples: Vec<f64>) -> Self {
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        OneDimLaw::Empirical(samples)
    }

    /// `P(X <= t)`.
    fn cdf(&self, t: f64) -> f64 {
        match self {
            OneDimLaw::Normal { mean, sd } => normal_cdf((t - mean) / sd),
            OneDimLaw::PointMass(c) => {
                if t >= *c {
                    1.0
                } else {
                    0.0
                }
            }
            OneDimLaw::Empirical(xs) => {
                xs.partition_point(|&x| x <= t) as f64 / xs.len() as f64
            }
        }
    }

    /// Left limit `P(X < t)`.
    fn cdf_left(&self, t: f64) -> f64 {
        match self {
            OneDimLaw::Normal { mean, sd } => normal_cdf((t - mean) / sd),
            OneDimLaw::PointMass(c) => {
                if t > *c {
                    1.0
                } else {
                    0.0
                }
            }
            OneDimLaw::Empirical(xs) => {
                xs.partition_point(|&x| x < t) as f64 / xs.len() as f64
            }
        }
    }

    /// Candidate interval endpoints: quantiles at `m` interior levels,
    /// plus atoms.
    fn grid_points(&self, m: usize, out: &mut Vec<f64>) {
        match self {
            OneDimLaw::Normal { mean, sd } => {
                for k in 0..m {
                    let u = (k as f64 + 0.5) / m as f64;
                    out.push(mean + sd * normal_quantile(u));
                }
            }
            OneDimLaw::PointMass(c) => out.push(*c),
            OneDimLaw::Empirical(xs) => {
                if xs.len() <= m {
                    out.extend_from_slice(xs);
                } else {
                    for k in 0..m {
                        let idx = (k as f64 + 0.5) / m as f64 * xs.len() as f64;
                        out.push(xs[(idx as usize).min(xs.len() - 1)]);
                    }
                }
            }
        }
    }
}

/// Brute-force sup over closed intervals `[s, t]` with endpoints on a
/// CDF-evaluated grid of roughly `grid` points:
/// `max |P_a([s,t]) - P_b([s,t])|`, including the degenerate `s = t` and
/// half-infinite limits.
pub fn dk_one_dim_oracle(law_a: &OneDimLaw, law_b: &OneDimLaw, grid: usize) -> f64 {
    let mut pts = Vec::with_capacity(grid + 2);
    law_a.grid_points(grid / 2, &mut pts);
    law_b.grid_points(grid / 2, &mut pts);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();

    // P_a([s,t]) - P_b([s,t]) = G(t) - H(s) with G the right-CDF gap and
    // H the left-limit gap; sweep t ascending tracking extremes of H
    let mut best = 0.0f64;
    let mut h_min = 0.0f64; // s = -inf contributes H = 0
    let mut h_max = 0.0f64;
    for &t in &pts {
        let h = law_a.cdf_left(t) - law_b.cdf_left(t);
        h_min = h_min.min(h);
        h_max = h_max.max(h);
        let g = law_a.cdf(t) - law_b.cdf(t);
        best = best.max(libm::fabs(g - h_min)).max(libm::fabs(g - h_max));
    }
    // t = +inf: G = 0
    best = best.max(libm::fabs(h_min)).max(libm::fabs(h_max));
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::sample_mvn;
    use crate::spectral::cholesky_factor;
    use approx::assert_abs_diff_eq;

    #[test]
    fn family_counts_and_determinism() {
        let f = build_family(1, &SymMatrix::identity(1), 3, 0, 9);
        assert_eq!(f.len(), 6);
        let g = build_family(1, &SymMatrix::identity(1), 3, 0, 9);
        assert_eq!(f, g);
        let h = build_family(2, &SymMatrix::identity(2), 5, 64, 11);
        assert_eq!(h.len(), 10 + 64);
    }

    #[test]
    fn family_endpoints_are_scaled_quantiles() {
        // grid 9 maps to levels 0.1 .. 0.9; variance 4 scales by 2
        let f = build_family(1, &SymMatrix::diagonal(&[4.0]), 9, 0, 0);
        let first = &f.rectangles[0];
        assert_abs_diff_eq!(first.upper()[0], 2.0 * normal_quantile(0.1), epsilon = 1e-12);
        assert_eq!(first.lower()[0], f64::NEG_INFINITY);
        // symmetric boxes carry two-sided coverage u
        let sym = &f.rectangles[9];
        assert_abs_diff_eq!(sym.upper()[0], 2.0 * normal_quantile(0.55), epsilon = 1e-12);
        assert_abs_diff_eq!(sym.lower()[0], -sym.upper()[0], epsilon = 0.0);
    }

    #[test]
    fn oracle_identical_laws_is_zero() {
        let a = OneDimLaw::normal(0.0, 1.0);
        assert_eq!(dk_one_dim_oracle(&a, &a.clone(), 1000), 0.0);
    }

    #[test]
    fn oracle_shifted_normal() {
        // sup over intervals = 2 Phi(0.25) - 1 = 0.197412651366
        let a = OneDimLaw::normal(0.5, 1.0);
        let b = OneDimLaw::normal(0.0, 1.0);
        let v = dk_one_dim_oracle(&a, &b, 10_000);
        assert_abs_diff_eq!(v, 0.197412651366, epsilon = 1e-5);
    }

    #[test]
    fn oracle_scaled_normal() {
        // sup at the symmetric interval [-t*, t*]: 0.322674568835
        let a = OneDimLaw::normal(0.0, 2.0);
        let b = OneDimLaw::normal(0.0, 1.0);
        let v = dk_one_dim_oracle(&a, &b, 10_000);
        assert_abs_diff_eq!(v, 0.322674568835, epsilon = 1e-5);
    }

    #[test]
    fn oracle_point_mass_degenerate_interval() {
        let a = OneDimLaw::normal(0.0, 1.0);
        let b = OneDimLaw::PointMass(0.0);
        // the degenerate interval [0, 0] has mass 1 under the atom, 0 under N(0,1)
        assert_abs_diff_eq!(dk_one_dim_oracle(&a, &b, 1000), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn oracle_empirical_vs_itself_and_normal() {
        let root = cholesky_factor(&SymMatrix::identity(1)).unwrap();
        let s = sample_mvn(&root, 20_000, 42);
        let xs: Vec<f64> = s.data().to_vec();
        let e = OneDimLaw::empirical(xs);
        assert_eq!(dk_one_dim_oracle(&e, &e.clone(), 2000), 0.0);
        // KS-style distance to the true law is O(1/sqrt(n))
        let v = dk_one_dim_oracle(&e, &OneDimLaw::normal(0.0, 1.0), 4000);
        assert!(v < 0.02, "empirical deviation {v}");
    }

    #[test]
    fn estimate_dk_null_case_is_small() {
        let sigma = SymMatrix::from_2x2(1.0, 0.3, 1.0);
        let root = cholesky_factor(&sigma).unwrap();
        let samples = sample_mvn(&root, 100_000, 7);
        let family = build_family(2, &sigma, 21, 128, 3);
        let est = estimate_dk(&samples, &sigma, &family, 1 << 12, 55).unwrap();
        assert!(est.value <= 0.02, "null dk {}", est.value);
        assert!(est.mc_bonferroni > 0.0);
    }

    #[test]
    fn estimate_dk_detects_mean_shift() {
        // samples from N(0.5, 1) against reference N(0, 1): sup is
        // 2 Phi(0.25) - 1 ~ 0.19741 over intervals
        let root = cholesky_factor(&SymMatrix::identity(1)).unwrap();
        let mut samples = sample_mvn(&root, 100_000, 11);
        for i in 0..samples.rows() {
            samples.row_mut(i)[0] += 0.5;
        }
        let sigma = SymMatrix::identity(1);
        let family = build_family(1, &sigma, 41, 512, 3);
        let est = estimate_dk(&samples, &sigma, &family, 1 << 12, 5).unwrap();
        let oracle = dk_one_dim_oracle(
            &OneDimLaw::normal(0.5, 1.0),
            &OneDimLaw::normal(0.0, 1.0),
            10_000,
        );
        assert!(
            libm::fabs(est.value - oracle) <= est.mc_error + est.mvn_error + 0.005,
            "estimate {} vs oracle {oracle}",
            est.value
        );
    }

    #[test]
    fn estimate_dk_family_growth_monotone() {
        let sigma = SymMatrix::identity(2);
        let root = cholesky_factor(&sigma).unwrap();
        let samples = sample_mvn(&root, 2_000, 13);
        let small = build_family(2, &sigma, 5, 16, 3);
        let mut big = small.clone();
        big.rectangles
            .extend(build_family(2, &sigma, 11, 32, 4).rectangles);
        let a = estimate_dk(&samples, &sigma, &small, 1 << 10, 9).unwrap();
        let b = estimate_dk(&samples, &sigma, &big, 1 << 10, 9).unwrap();
        assert!(b.value >= a.value);
    }

    #[test]
    fn estimate_dk_scale_invariance() {
        let sigma = SymMatrix::from_2x2(1.0, 0.4, 1.0);
        let root = cholesky_factor(&sigma).unwrap();
        let samples = sample_mvn(&root, 50_000, 3);
        let family = build_family(2, &sigma, 15, 64, 8);
        let base = estimate_dk(&samples, &sigma, &family, 1 << 12, 1).unwrap();

        // multiply samples and sigma jointly by diag(2, 0.5)
        let dscale = [2.0, 0.5];
        let mut scaled_samples = samples.clone();
        for i in 0..scaled_samples.rows() {
            let row = scaled_samples.row_mut(i);
            row[0] *= dscale[0];
            row[1] *= dscale[1];
        }
        let mut scaled_sigma = SymMatrix::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                scaled_sigma.set_sym(i, j, sigma.get(i, j) * dscale[i] * dscale[j]);
            }
        }
        let scaled_family = build_family(2, &scaled_sigma, 15, 64, 8);
        let scaled = estimate_dk(&scaled_samples, &scaled_sigma, &scaled_family, 1 << 12, 1)
            .unwrap();
        let tol = 2.0 * (base.mc_error + base.mvn_error + scaled.mc_error + scaled.mvn_error)
            + 1e-3;
        assert!(
            libm::fabs(base.value - scaled.value) <= tol,
            "{} vs {}",
            base.value,
            scaled.value
        );
    }

    #[test]
    fn estimate_dk_rejects_small_samples() {
        let sigma = SymMatrix::identity(1);
        let samples = Matrix::zeros(50, 1);
        let family = build_family(1, &sigma, 3, 0, 1);
        assert!(estimate_dk(&samples, &sigma, &family, 1 << 10, 0).is_err());
    }
}
