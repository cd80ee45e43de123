//! Sampling from N(0, Sigma) and Gaussian rectangle probabilities.
//!
//! `rect_prob` follows Genz: permute variables by increasing marginal
//! interval probability, Cholesky-factor the permuted covariance, and
//! transform the rectangle probability into an integral over the unit
//! cube, which a randomized rank-1 Kronecker lattice (sqrt-prime
//! generators, tent map, 8 independent shifts) integrates. The spread of
//! the shift means gives the standard error; all loops are fixed-order,
//! so results depend only on the arguments.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math::{normal_cdf, normal_quantile};
use crate::rect::Rectangle;
use crate::seed::{child_seed, rng_from_seed};
use crate::spectral::{cholesky_factor, Matrix, SpectralError, SymMatrix};

/// Number of independent random shifts used for the error estimate.
pub const QMC_SHIFTS: usize = 8;

/// Infinite endpoints map to this many standard deviations after
/// whitening; the tail mass beyond is below double precision.
const TAIL_CUTOFF: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GaussError {
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

impl From<SpectralError> for GaussError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::NotPositiveDefinite { .. } | SpectralError::NotPsd { .. } => {
                GaussError::NotPositiveDefinite
            }
            _ => GaussError::InvalidInput("covariance"),
        }
    }
}

/// A rectangle probability with its randomized-QMC error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbEstimate {
    /// Estimated probability, in [0, 1].
    pub value: f64,
    /// Standard error across the independent shifts (0 when the
    /// integrand is deterministic, e.g. d = 1 or the full space).
    pub stderr: f64,
    /// Total integration points consumed.
    pub n_points: usize,
}

/// Draw `count` i.i.d. rows from N(0, root * root^T).
///
/// `root` may be a Cholesky factor or a symmetric square root; rows are
/// generated in a fixed order from the seed, so the output is
/// bit-identical for identical arguments.
pub fn sample_mvn(root: &Matrix, count: usize, seed: u64) -> Matrix {
    let d = root.cols();
    debug_assert_eq!(root.rows(), d);
    let mut rng = rng_from_seed(seed);
    let mut out = Matrix::zeros(count, d);
    let mut z = vec![0.0f64; d];
    for r in 0..count {
        for zi in z.iter_mut() {
            *zi = rng.sample(rand_distr::StandardNormal);
        }
        let row = out.row_mut(r);
        for i in 0..d {
            let coeffs = root.row(i);
            let mut acc = 0.0;
            for (c, v) in coeffs.iter().zip(z.iter()) {
                acc += c * v;
            }
            row[i] = acc;
        }
    }
    out
}

/// Fraction of sample rows inside the rectangle.
pub fn empirical_rect_prob(samples: &Matrix, r: &Rectangle) -> f64 {
    debug_assert_eq!(samples.cols(), r.dim());
    let n = samples.rows();
    let mut count = 0usize;
    for i in 0..n {
        if r.contains(samples.row(i)) {
            count += 1;
        }
    }
    count as f64 / n as f64
}

/// First `n` primes by trial division; generator roots for the lattice.
fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut cand = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= cand).all(|&p| cand % p != 0) {
            primes.push(cand);
        }
        cand += 1;
    }
    primes
}

struct GenzTransform {
    dim: usize,
    chol: Matrix,
    lo: Vec<f64>, // permuted standardized-or-infinite lower bounds
    hi: Vec<f64>,
}

impl GenzTransform {
    fn new(sigma: &SymMatrix, r: &Rectangle) -> Result<Self, GaussError> {
        let d = sigma.dim();
        if r.dim() != d {
            return Err(GaussError::InvalidInput("rectangle dimension"));
        }
        // order variables by increasing marginal interval probability
        let mut order: Vec<usize> = (0..d).collect();
        let marg: Vec<f64> = (0..d)
            .map(|i| {
                let sd = libm::sqrt(sigma.get(i, i));
                if sd == 0.0 {
                    return f64::INFINITY; // degenerate; leave last
                }
                let lo = r.lower()[i];
                let hi = r.upper()[i];
                let a = if lo == f64::NEG_INFINITY { 0.0 } else { normal_cdf(lo / sd) };
                let b = if hi == f64::INFINITY { 1.0 } else { normal_cdf(hi / sd) };
                b - a
            })
            .collect();
        order.sort_by(|&a, &b| marg[a].partial_cmp(&marg[b]).unwrap().then(a.cmp(&b)));

        let mut perm_sigma = SymMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                perm_sigma.set_sym(i, j, sigma.get(order[i], order[j]));
            }
        }
        let chol = cholesky_factor(&perm_sigma)?;
        let lo: Vec<f64> = order.iter().map(|&k| r.lower()[k]).collect();
        let hi: Vec<f64> = order.iter().map(|&k| r.upper()[k]).collect();
        Ok(GenzTransform { dim: d, chol, lo, hi })
    }

    /// Integrand value at a cube point `w` (length dim - 1).
    fn eval(&self, w: &[f64], y: &mut [f64]) -> f64 {
        let d = self.dim;
        let mut f = 1.0;
        for i in 0..d {
            let mut mu = 0.0;
            let row = self.chol.row(i);
            for j in 0..i {
                mu += row[j] * y[j];
            }
            let scale = row[i];
            let da = if self.lo[i] == f64::NEG_INFINITY {
                0.0
            } else {
                normal_cdf(((self.lo[i] - mu) / scale).clamp(-TAIL_CUTOFF, TAIL_CUTOFF))
            };
            let db = if self.hi[i] == f64::INFINITY {
                1.0
            } else {
                normal_cdf(((self.hi[i] - mu) / scale).clamp(-TAIL_CUTOFF, TAIL_CUTOFF))
            };
            let width = (db - da).max(0.0);
            f *= width;
            if f == 0.0 {
                return 0.0;
            }
            if i + 1 < d {
                let p = (da + w[i] * width).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                y[i] = normal_quantile(p);
            }
        }
        f
    }
}

/// Gaussian probability of a hyper-rectangle under N(0, sigma).
///
/// `budget` is the total number of lattice points (>= 1024), split over
/// [`QMC_SHIFTS`] independent shifts; `|value - truth| <= 3 * stderr`
/// holds with roughly 99% confidence.
pub fn rect_prob(
    sigma: &SymMatrix,
    r: &Rectangle,
    budget: usize,
    seed: u64,
) -> Result<ProbEstimate, GaussError> {
    if budget < 1024 {
        return Err(GaussError::InvalidInput("budget must be >= 1024"));
    }
    let t = GenzTransform::new(sigma, r)?;
    let d = t.dim;

    if d == 1 {
        // single conditioning step is exact; no integration left
        let f = t.eval(&[], &mut []);
        return Ok(ProbEstimate {
            value: f.clamp(0.0, 1.0),
            stderr: 0.0,
            n_points: budget,
        });
    }

    let n_per_shift = budget / QMC_SHIFTS;
    let gens: Vec<f64> = first_primes(d - 1)
        .into_iter()
        .map(|p| libm::sqrt(p as f64))
        .collect();

    let mut shift_means = [0.0f64; QMC_SHIFTS];
    let mut w = vec![0.0f64; d - 1];
    let mut y = vec![0.0f64; d - 1];
    for (s, mean) in shift_means.iter_mut().enumerate() {
        let mut rng = rng_from_seed(child_seed(seed, s as u64));
        let shift: Vec<f64> = (0..d - 1).map(|_| rng.random::<f64>()).collect();
        let mut acc = 0.0;
        for k in 1..=n_per_shift {
            for j in 0..d - 1 {
                let x = (k as f64) * gens[j] + shift[j];
                let fract = x - libm::floor(x);
                w[j] = libm::fabs(2.0 * fract - 1.0); // tent map
            }
            acc += t.eval(&w, &mut y);
        }
        *mean = acc / n_per_shift as f64;
    }

    let value: f64 = shift_means.iter().sum::<f64>() / QMC_SHIFTS as f64;
    let var = shift_means
        .iter()
        .map(|m| (m - value) * (m - value))
        .sum::<f64>()
        / (QMC_SHIFTS as f64 * (QMC_SHIFTS - 1) as f64);
    Ok(ProbEstimate {
        value: value.clamp(0.0, 1.0),
        stderr: libm::sqrt(var),
        n_points: n_per_shift * QMC_SHIFTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::psd_sqrt;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sample_mvn_identity_covariance() {
        let root = cholesky_factor(&SymMatrix::identity(2)).unwrap();
        let s = sample_mvn(&root, 100_000, 7);
        let mut cov = [0.0f64; 4];
        for i in 0..s.rows() {
            let r = s.row(i);
            cov[0] += r[0] * r[0];
            cov[1] += r[0] * r[1];
            cov[3] += r[1] * r[1];
        }
        let n = s.rows() as f64;
        assert_abs_diff_eq!(cov[0] / n, 1.0, epsilon = 0.02);
        assert_abs_diff_eq!(cov[1] / n, 0.0, epsilon = 0.02);
        assert_abs_diff_eq!(cov[3] / n, 1.0, epsilon = 0.02);
    }

    #[test]
    fn sample_mvn_zero_root_and_determinism() {
        let zero = Matrix::zeros(3, 3);
        let s = sample_mvn(&zero, 3, 99);
        assert!(s.data().iter().all(|&v| v == 0.0));

        let root = cholesky_factor(&SymMatrix::from_2x2(2.0, 0.5, 1.0)).unwrap();
        let a = sample_mvn(&root, 64, 12345);
        let b = sample_mvn(&root, 64, 12345);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn rect_prob_full_space_is_one() {
        for d in [1usize, 3, 7] {
            let p = rect_prob(&SymMatrix::identity(d), &Rectangle::full_space(d), 1 << 12, 1)
                .unwrap();
            assert_eq!(p.value, 1.0);
            assert_eq!(p.stderr, 0.0);
        }
    }

    #[test]
    fn rect_prob_orthant_correlated() {
        // P(X >= 0, Y >= 0) = 1/4 + asin(rho) / (2 pi) = 1/3 at rho = 0.5
        let sigma = SymMatrix::from_2x2(1.0, 0.5, 1.0);
        let r = Rectangle::new(vec![0.0, 0.0], vec![f64::INFINITY, f64::INFINITY]).unwrap();
        let p = rect_prob(&sigma, &r, 1 << 14, 5).unwrap();
        assert_abs_diff_eq!(p.value, 1.0 / 3.0, epsilon = 1e-3);
        assert!(p.stderr < 1e-3);
    }

    #[test]
    fn rect_prob_product_box() {
        // (Phi(1) - Phi(-1))^3, reference value from mpmath
        let r = Rectangle::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let p = rect_prob(&SymMatrix::identity(3), &r, 1 << 14, 9).unwrap();
        assert_abs_diff_eq!(p.value, 0.318177639017, epsilon = 1e-3);
    }

    #[test]
    fn rect_prob_one_dim_exact() {
        let r = Rectangle::new(vec![f64::NEG_INFINITY], vec![0.0]).unwrap();
        let p = rect_prob(&SymMatrix::identity(1), &r, 1 << 10, 3).unwrap();
        assert_abs_diff_eq!(p.value, 0.5, epsilon = 1e-12);
        assert_eq!(p.stderr, 0.0);
    }

    #[test]
    fn rect_prob_rejects_bad_input() {
        let sigma = SymMatrix::from_2x2(1.0, 2.0, 1.0); // indefinite
        let r = Rectangle::full_space(2);
        assert_eq!(
            rect_prob(&sigma, &r, 1 << 12, 0),
            Err(GaussError::NotPositiveDefinite)
        );
        assert!(matches!(
            rect_prob(&SymMatrix::identity(2), &r, 512, 0),
            Err(GaussError::InvalidInput(_))
        ));
    }

    #[test]
    fn empirical_rect_prob_counts() {
        let samples = Matrix::from_rows(2, 2, vec![0.0, 0.0, 2.0, 2.0]).unwrap();
        let r = Rectangle::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(empirical_rect_prob(&samples, &r), 0.5);
        assert_eq!(empirical_rect_prob(&samples, &Rectangle::full_space(2)), 1.0);
    }

    #[test]
    fn empirical_matches_binomial_half_line() {
        let root = cholesky_factor(&SymMatrix::identity(1)).unwrap();
        let s = sample_mvn(&root, 100_000, 21);
        let r = Rectangle::new(vec![f64::NEG_INFINITY], vec![0.0]).unwrap();
        assert_abs_diff_eq!(empirical_rect_prob(&s, &r), 0.5, epsilon = 0.005);
    }

    #[test]
    fn qmc_agrees_with_empirical_frequencies() {
        // cross-oracle: exact sampler vs QMC integration, d = 4
        let mut sigma = SymMatrix::identity(4);
        sigma.set_sym(0, 1, 0.3);
        sigma.set_sym(1, 2, -0.2);
        sigma.set_sym(2, 3, 0.4);
        let root = psd_sqrt(&sigma).unwrap();
        let samples = sample_mvn(&Matrix::from_rows(4, 4, root.data().to_vec()).unwrap(), 100_000, 4);
        let r = Rectangle::new(vec![-1.0, -0.5, f64::NEG_INFINITY, 0.0], vec![1.0, 2.0, 1.5, f64::INFINITY])
            .unwrap();
        let q = rect_prob(&sigma, &r, 1 << 13, 17).unwrap();
        let e = empirical_rect_prob(&samples, &r);
        assert_abs_diff_eq!(q.value, e, epsilon = 0.01);
    }

    #[test]
    fn qmc_symmetry_under_reflection() {
        let mut sigma = SymMatrix::identity(3);
        sigma.set_sym(0, 2, 0.5);
        let r = Rectangle::new(vec![-0.3, -1.0, 0.1], vec![1.4, 0.7, 2.0]).unwrap();
        let a = rect_prob(&sigma, &r, 1 << 13, 2).unwrap();
        let b = rect_prob(&sigma, &r.negate(), 1 << 13, 3).unwrap();
        assert!((a.value - b.value).abs() <= 3.0 * (a.stderr + b.stderr) + 1e-4);
    }

    #[test]
    fn max_norm_tail_bound() {
        // P(||Z||_inf > sqrt(2 d_max log(d / delta))) <= delta, delta = 0.05
        let d = 10;
        let delta = 0.05;
        let root = cholesky_factor(&SymMatrix::identity(d)).unwrap();
        let s = sample_mvn(&root, 20_000, 31);
        let thresh = libm::sqrt(2.0 * libm::log(d as f64 / delta));
        let mut exceed = 0usize;
        for i in 0..s.rows() {
            if s.row(i).iter().any(|&v| libm::fabs(v) > thresh) {
                exceed += 1;
            }
        }
        assert!((exceed as f64 / s.rows() as f64) <= delta);
    }
}
