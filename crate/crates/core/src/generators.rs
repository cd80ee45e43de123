//! Martingale difference path generators.
//!
//! Four constructions: an i.i.d. Gaussian baseline, the Bolthausen-style
//! triangular array whose first coordinate switches to a two-atom
//! conditional law on a sqrt(n)-wide window (the lower-bound example), a
//! Markov-chain-induced sequence `X_k = f(s_{k-1}, s_k)` with centered
//! `f`, and a conditionally Gaussian surrogate `X_k = V_k^{1/2} Z_k`.
//! All generators are driven by a single sequential RNG stream per path,
//! so a path is a pure function of `(spec, n, seed)`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::bounds::MomentStats;
use crate::math::log_plus;
use crate::seed::{child_seed, rng_from_seed};
use crate::spectral::{
    eigenvalues_general, psd_sqrt, spectral_stats, sym_eigen, Matrix, SpectralError, SymMatrix,
};

/// `E |Z|^3` for a standard normal, `2 sqrt(2/pi)`.
pub const NORMAL_THIRD_ABS_MOMENT: f64 = 1.595769121605731;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(&'static str),
    #[error("invalid regime: {0}")]
    InvalidRegime(&'static str),
    #[error("no unique stationary distribution")]
    NoUniqueStationary,
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Per-step conditional covariances of a path, stored without
/// duplicating matrices when the sequence is constant or state-indexed.
#[derive(Debug, Clone, PartialEq)]
pub enum CondCovs {
    Constant { v: SymMatrix, n: usize },
    PerStep(Vec<SymMatrix>),
    Indexed { table: Vec<SymMatrix>, index: Vec<u32> },
}

impl CondCovs {
    pub fn len(&self) -> usize {
        match self {
            CondCovs::Constant { n, .. } => *n,
            CondCovs::PerStep(v) => v.len(),
            CondCovs::Indexed { index, .. } => index.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Conditional covariance of step `k` (0-based).
    pub fn get(&self, k: usize) -> &SymMatrix {
        match self {
            CondCovs::Constant { v, .. } => v,
            CondCovs::PerStep(list) => &list[k],
            CondCovs::Indexed { table, index } => &table[index[k] as usize],
        }
    }

    /// `sum_k V_k`.
    pub fn sum(&self) -> SymMatrix {
        match self {
            CondCovs::Constant { v, n } => v.scale(*n as f64),
            CondCovs::PerStep(list) => {
                let mut acc = SymMatrix::zeros(list[0].dim());
                for v in list {
                    acc.add_assign(v);
                }
                acc
            }
            CondCovs::Indexed { table, index } => {
                let mut counts = vec![0usize; table.len()];
                for &s in index {
                    counts[s as usize] += 1;
                }
                let mut acc = SymMatrix::zeros(table[0].dim());
                for (s, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        acc.add_assign(&table[s].scale(c as f64));
                    }
                }
                acc
            }
        }
    }

    /// `(1/n) sum_k V_k`.
    pub fn mean(&self) -> SymMatrix {
        self.sum().scale(1.0 / self.len() as f64)
    }
}

/// A simulated martingale difference path.
#[derive(Debug, Clone)]
pub struct MdsPath {
    pub n: usize,
    pub d: usize,
    /// n x d increments, step k in row k.
    pub increments: Matrix,
    /// Per-step conditional covariances when analytically known.
    pub cond_covs: Option<CondCovs>,
    pub generator_tag: String,
    pub seed: u64,
}

impl MdsPath {
    /// `S_n / sqrt(n)` from the stored increments.
    pub fn normalized_sum(&self) -> Vec<f64> {
        let mut sum = vec![0.0f64; self.d];
        for k in 0..self.increments.rows() {
            for (s, &x) in sum.iter_mut().zip(self.increments.row(k).iter()) {
                *s += x;
            }
        }
        let scale = 1.0 / libm::sqrt(self.n as f64);
        for s in sum.iter_mut() {
            *s *= scale;
        }
        sum
    }
}

/// Finite-state Markov chain with a centered vector observable on
/// transitions: `f(s, s')` stored as an `m * m * d` table.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainSpec {
    m: usize,
    d: usize,
    p: Matrix,
    nu: Vec<f64>,
    f_table: Vec<f64>,
}

fn check_stochastic_rows(p: &Matrix) -> Result<(), GenError> {
    if p.rows() != p.cols() || p.rows() == 0 {
        return Err(GenError::InvalidSpec("transition matrix must be square"));
    }
    for i in 0..p.rows() {
        let row = p.row(i);
        if row.iter().any(|&v| v < 0.0 || v.is_nan()) {
            return Err(GenError::InvalidSpec("negative transition probability"));
        }
        let sum: f64 = row.iter().sum();
        if libm::fabs(sum - 1.0) > 1e-12 {
            return Err(GenError::InvalidSpec("transition rows must sum to 1"));
        }
    }
    Ok(())
}

impl MarkovChainSpec {
    pub fn new(p: Matrix, nu: Vec<f64>, f_table: Vec<f64>, d: usize) -> Result<Self, GenError> {
        let spec = MarkovChainSpec {
            m: p.rows(),
            d,
            p,
            nu,
            f_table,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        check_stochastic_rows(&self.p)?;
        let m = self.m;
        if self.nu.len() != m {
            return Err(GenError::InvalidSpec("initial distribution length"));
        }
        if self.nu.iter().any(|&v| v < 0.0 || v.is_nan())
            || libm::fabs(self.nu.iter().sum::<f64>() - 1.0) > 1e-12
        {
            return Err(GenError::InvalidSpec("initial distribution must be a distribution"));
        }
        if self.d == 0 || self.f_table.len() != m * m * self.d {
            return Err(GenError::InvalidSpec("f table must be m*m*d"));
        }
        // conditional centering: sum_{s'} P[s][s'] f(s, s') = 0 per state
        let scale = self.f_table.iter().fold(0.0f64, |a, &v| a.max(libm::fabs(v)));
        let tol = 1e-10 * (1.0 + scale);
        for s in 0..m {
            for c in 0..self.d {
                let mut acc = 0.0;
                for sp in 0..m {
                    acc += self.p.get(s, sp) * self.f(s, sp)[c];
                }
                if libm::fabs(acc) > tol {
                    return Err(GenError::InvalidSpec("f is not conditionally centered"));
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn transition(&self) -> &Matrix {
        &self.p
    }

    pub fn initial(&self) -> &[f64] {
        &self.nu
    }

    #[inline]
    pub fn f(&self, s: usize, sp: usize) -> &[f64] {
        let off = (s * self.m + sp) * self.d;
        &self.f_table[off..off + self.d]
    }

    /// Exact conditional covariance at state `s`:
    /// `V(s) = sum_{s'} P[s][s'] f(s,s') f(s,s')^T`.
    pub fn state_cond_cov(&self, s: usize) -> SymMatrix {
        let mut v = SymMatrix::zeros(self.d);
        for sp in 0..self.m {
            let w = self.p.get(s, sp);
            if w > 0.0 {
                v.add_outer(self.f(s, sp), w);
            }
        }
        v
    }

    /// Exact conditional third max-norm moment at state `s`.
    pub fn state_third_moment(&self, s: usize) -> f64 {
        let mut acc = 0.0;
        for sp in 0..self.m {
            let w = self.p.get(s, sp);
            if w > 0.0 {
                let norm = self
                    .f(s, sp)
                    .iter()
                    .fold(0.0f64, |a, &v| a.max(libm::fabs(v)));
                acc += w * norm * norm * norm;
            }
        }
        acc
    }
}

/// Center a raw transition observable:
/// `f(s,s') = g(s,s') - sum_{s''} P[s][s''] g(s,s'')`.
pub fn markov_center(g_table: &[f64], p: &Matrix, d: usize) -> Result<Vec<f64>, GenError> {
    check_stochastic_rows(p)?;
    let m = p.rows();
    if d == 0 || g_table.len() != m * m * d {
        return Err(GenError::InvalidSpec("g table must be m*m*d"));
    }
    let mut f = g_table.to_vec();
    let mut mean = vec![0.0f64; d];
    for s in 0..m {
        mean.iter_mut().for_each(|v| *v = 0.0);
        for sp in 0..m {
            let w = p.get(s, sp);
            let off = (s * m + sp) * d;
            for c in 0..d {
                mean[c] += w * g_table[off + c];
            }
        }
        for sp in 0..m {
            let off = (s * m + sp) * d;
            for c in 0..d {
                f[off + c] -= mean[c];
            }
        }
    }
    Ok(f)
}

/// Stationary distribution, spectral gap, and reversibility of a
/// row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryInfo {
    pub mu: Vec<f64>,
    /// `1 - |lambda_2|`.
    pub gap: f64,
    pub second_modulus: f64,
    /// Detailed balance `mu_i P_ij = mu_j P_ji` within 1e-10. The
    /// spectral-gap convention `1 - |lambda_2|` is standard only for
    /// reversible chains; callers should warn on `false`.
    pub reversible: bool,
}

/// Stationary distribution by power iteration plus the eigenvalue gap.
///
/// Fails with [`GenError::NoUniqueStationary`] when `|lambda_2| >= 1`
/// up to solver tolerance (reducible or periodic chains) or when the
/// iteration does not converge within its sweep budget.
pub fn stationary_and_gap(p: &Matrix) -> Result<StationaryInfo, GenError> {
    check_stochastic_rows(p)?;
    let m = p.rows();
    if m == 1 {
        return Ok(StationaryInfo {
            mu: vec![1.0],
            gap: 1.0,
            second_modulus: 0.0,
            reversible: true,
        });
    }
    let eigs = eigenvalues_general(p)?;
    let mut moduli: Vec<f64> = eigs.iter().map(|&(re, im)| libm::hypot(re, im)).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let second = moduli[1];
    if second >= 1.0 - 1e-9 {
        return Err(GenError::NoUniqueStationary);
    }

    let mut mu = vec![1.0 / m as f64; m];
    let mut next = vec![0.0f64; m];
    let max_iter = 2_000_000usize;
    let mut converged = false;
    for _ in 0..max_iter {
        next.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            let w = mu[i];
            if w != 0.0 {
                for (j, nj) in next.iter_mut().enumerate() {
                    *nj += w * p.get(i, j);
                }
            }
        }
        let norm: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= norm);
        let delta: f64 = mu.iter().zip(next.iter()).map(|(a, b)| libm::fabs(a - b)).sum();
        mu.copy_from_slice(&next);
        if delta <= 5e-15 * m as f64 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(GenError::NoUniqueStationary);
    }
    // residual check: mu P = mu within 1e-12
    for j in 0..m {
        let mut acc = 0.0;
        for i in 0..m {
            acc += mu[i] * p.get(i, j);
        }
        if libm::fabs(acc - mu[j]) > 1e-12 {
            return Err(GenError::NoUniqueStationary);
        }
    }
    let mut reversible = true;
    'rev: for i in 0..m {
        for j in 0..i {
            if libm::fabs(mu[i] * p.get(i, j) - mu[j] * p.get(j, i)) > 1e-10 {
                reversible = false;
                break 'rev;
            }
        }
    }
    Ok(StationaryInfo {
        mu,
        gap: 1.0 - second,
        second_modulus: second,
        reversible,
    })
}

/// Transition-pair covariance under stationarity:
/// `Sigma = sum_s mu_s sum_{s'} P[s][s'] f(s,s') f(s,s')^T`.
pub fn markov_sigma(chain: &MarkovChainSpec) -> Result<SymMatrix, GenError> {
    let info = stationary_and_gap(&chain.p)?;
    let mut sigma = SymMatrix::zeros(chain.d);
    for s in 0..chain.m {
        if info.mu[s] > 0.0 {
            for sp in 0..chain.m {
                let w = info.mu[s] * chain.p.get(s, sp);
                if w > 0.0 {
                    sigma.add_outer(chain.f(s, sp), w);
                }
            }
        }
    }
    Ok(sigma)
}

/// Conditional law of one step of the Bolthausen first coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepLaw {
    StandardNormal,
    /// `plus` with probability `p`, `minus` with probability `1 - p`.
    TwoAtom { p: f64, plus: f64, minus: f64 },
}

impl StepLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            StepLaw::StandardNormal => 0.0,
            StepLaw::TwoAtom { p, plus, minus } => p * plus + (1.0 - p) * minus,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            StepLaw::StandardNormal => 1.0,
            StepLaw::TwoAtom { p, plus, minus } => {
                let m = self.mean();
                p * plus * plus + (1.0 - p) * minus * minus - m * m
            }
        }
    }

    pub fn third_abs_moment(&self) -> f64 {
        match *self {
            StepLaw::StandardNormal => NORMAL_THIRD_ABS_MOMENT,
            StepLaw::TwoAtom { p, plus, minus } => {
                let a = libm::fabs(plus);
                let b = libm::fabs(minus);
                p * a * a * a + (1.0 - p) * b * b * b
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            StepLaw::StandardNormal => rng.sample(rand_distr::StandardNormal),
            StepLaw::TwoAtom { p, plus, minus } => {
                if rng.random::<f64>() < p {
                    plus
                } else {
                    minus
                }
            }
        }
    }
}

/// The conditional window `floor(n - 2 sqrt(n)) < i <= floor(n - sqrt(n))`
/// of the lower-bound construction (1-based step indices).
pub fn bolthausen_window(n: usize) -> (usize, usize) {
    let nf = n as f64;
    let root = libm::sqrt(nf);
    (
        libm::floor(nf - 2.0 * root) as usize,
        libm::floor(nf - root) as usize,
    )
}

/// Conditional law of the first coordinate at step `i` of horizon `n`
/// given the partial sum `s_partial` of that coordinate.
///
/// Standard normal outside the window; inside, Rademacher when
/// `|s_partial| > sqrt(n) lambda_i / 4` and otherwise the two-atom law
/// `16 lambda_i^2 delta_rho + (1 - 16 lambda_i^2) delta_{-1/rho}` with
/// `lambda_i = (1 - i/n)^{1/2}` and
/// `rho = ((1 - 16 lambda_i^2) / (16 lambda_i^2))^{1/2}`.
///
/// Requires `n >= 1024`: inside the window `16 lambda_i^2 < 32/sqrt(n)`,
/// so the atom probability stays below 1 exactly when the horizon is at
/// least 1024.
pub fn bolthausen_step_law(i: usize, n: usize, s_partial: f64) -> Result<StepLaw, GenError> {
    if n < 1024 {
        return Err(GenError::InvalidRegime("bolthausen horizon must be >= 1024"));
    }
    if i == 0 || i > n {
        return Err(GenError::InvalidRegime("step index out of 1..=n"));
    }
    let (lo, hi) = bolthausen_window(n);
    if i <= lo || i > hi {
        return Ok(StepLaw::StandardNormal);
    }
    let lam_sq = (n - i) as f64 / n as f64;
    let p = 16.0 * lam_sq;
    if p >= 1.0 {
        return Err(GenError::InvalidRegime("16 lambda_i^2 >= 1 inside window"));
    }
    let lam = libm::sqrt(lam_sq);
    if libm::fabs(s_partial) > libm::sqrt(n as f64) * lam / 4.0 {
        Ok(StepLaw::TwoAtom {
            p: 0.5,
            plus: 1.0,
            minus: -1.0,
        })
    } else {
        let rho = libm::sqrt((1.0 - p) / p);
        Ok(StepLaw::TwoAtom {
            p,
            plus: rho,
            minus: -1.0 / rho,
        })
    }
}

/// Which construction to simulate.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    /// `X_k = Sigma^{1/2} Z_k`.
    IidGaussian { sigma: SymMatrix },
    /// The lower-bound triangular array; coordinates 2..d are i.i.d.
    /// standard normal, coordinate 1 follows [`bolthausen_step_law`].
    Bolthausen { d: usize },
    /// `X_k = f(s_{k-1}, s_k)` along a simulated chain.
    MarkovInduced { chain: MarkovChainSpec },
    /// `X_k = V_k^{1/2} Z_k` for a given covariance schedule; a
    /// single-element list means a constant `V`.
    GaussianSurrogate { cond_covs: Vec<SymMatrix> },
}

impl GeneratorSpec {
    pub fn dim(&self) -> usize {
        match self {
            GeneratorSpec::IidGaussian { sigma } => sigma.dim(),
            GeneratorSpec::Bolthausen { d } => *d,
            GeneratorSpec::MarkovInduced { chain } => chain.dim(),
            GeneratorSpec::GaussianSurrogate { cond_covs } => {
                cond_covs.first().map_or(0, |v| v.dim())
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            GeneratorSpec::IidGaussian { .. } => "iid_gaussian",
            GeneratorSpec::Bolthausen { .. } => "bolthausen",
            GeneratorSpec::MarkovInduced { .. } => "markov",
            GeneratorSpec::GaussianSurrogate { .. } => "gaussian_surrogate",
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), GenError> {
        if n == 0 {
            return Err(GenError::InvalidSpec("n must be >= 1"));
        }
        match self {
            GeneratorSpec::IidGaussian { sigma } => {
                if sigma.dim() == 0 {
                    return Err(GenError::InvalidSpec("sigma must be nonempty"));
                }
            }
            GeneratorSpec::Bolthausen { d } => {
                if *d == 0 {
                    return Err(GenError::InvalidSpec("dimension must be >= 1"));
                }
                if n < 1024 {
                    return Err(GenError::InvalidRegime("bolthausen horizon must be >= 1024"));
                }
            }
            GeneratorSpec::MarkovInduced { chain } => chain.validate()?,
            GeneratorSpec::GaussianSurrogate { cond_covs } => {
                if cond_covs.is_empty() {
                    return Err(GenError::InvalidSpec("covariance schedule is empty"));
                }
                if cond_covs.len() != 1 && cond_covs.len() != n {
                    return Err(GenError::InvalidSpec(
                        "covariance schedule length must be 1 or n",
                    ));
                }
                let d = cond_covs[0].dim();
                if d == 0 || cond_covs.iter().any(|v| v.dim() != d) {
                    return Err(GenError::InvalidSpec("covariance dimensions disagree"));
                }
            }
        }
        Ok(())
    }
}

/// Run the generator, feeding each increment row to `sink` in step
/// order. Returns the pre-step state sequence for Markov chains.
fn drive<F: FnMut(usize, &[f64])>(
    spec: &GeneratorSpec,
    n: usize,
    seed: u64,
    sink: &mut F,
) -> Result<Option<Vec<u32>>, GenError> {
    spec.validate(n)?;
    let d = spec.dim();
    let mut rng = rng_from_seed(seed);
    let mut x = vec![0.0f64; d];
    match spec {
        GeneratorSpec::IidGaussian { sigma } => {
            let root = psd_sqrt(sigma)?;
            let mut z = vec![0.0f64; d];
            for k in 0..n {
                for zi in z.iter_mut() {
                    *zi = rng.sample(rand_distr::StandardNormal);
                }
                root.mul_vec(&z, &mut x);
                sink(k, &x);
            }
            Ok(None)
        }
        GeneratorSpec::Bolthausen { .. } => {
            let mut s_partial = 0.0f64;
            for k in 0..n {
                let law = bolthausen_step_law(k + 1, n, s_partial)?;
                x[0] = law.sample(&mut rng);
                s_partial += x[0];
                for xi in x.iter_mut().skip(1) {
                    *xi = rng.sample(rand_distr::StandardNormal);
                }
                sink(k, &x);
            }
            Ok(None)
        }
        GeneratorSpec::MarkovInduced { chain } => {
            let m = chain.num_states();
            let sample_from = |weights: &[f64], u: f64| -> usize {
                let mut acc = 0.0;
                for (idx, &w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        return idx;
                    }
                }
                m - 1
            };
            let mut state = sample_from(chain.initial(), rng.random::<f64>());
            let mut pre_states = Vec::with_capacity(n);
            for k in 0..n {
                let next = sample_from(chain.transition().row(state), rng.random::<f64>());
                x.copy_from_slice(chain.f(state, next));
                pre_states.push(state as u32);
                sink(k, &x);
                state = next;
            }
            Ok(Some(pre_states))
        }
        GeneratorSpec::GaussianSurrogate { cond_covs } => {
            let roots: Vec<SymMatrix> = cond_covs
                .iter()
                .map(psd_sqrt)
                .collect::<Result<_, _>>()?;
            let mut z = vec![0.0f64; d];
            for k in 0..n {
                for zi in z.iter_mut() {
                    *zi = rng.sample(rand_distr::StandardNormal);
                }
                let root = if roots.len() == 1 { &roots[0] } else { &roots[k] };
                root.mul_vec(&z, &mut x);
                sink(k, &x);
            }
            Ok(None)
        }
    }
}

/// Simulate a full path with its conditional covariances.
pub fn generate(spec: &GeneratorSpec, n: usize, seed: u64) -> Result<MdsPath, GenError> {
    let d = spec.dim();
    let mut increments = Matrix::zeros(n, d);
    let states = drive(spec, n, seed, &mut |k, row| {
        increments.row_mut(k).copy_from_slice(row);
    })?;
    let cond_covs = match spec {
        GeneratorSpec::IidGaussian { sigma } => CondCovs::Constant {
            v: sigma.clone(),
            n,
        },
        GeneratorSpec::Bolthausen { d } => CondCovs::Constant {
            v: SymMatrix::identity(*d),
            n,
        },
        GeneratorSpec::MarkovInduced { chain } => CondCovs::Indexed {
            table: (0..chain.num_states()).map(|s| chain.state_cond_cov(s)).collect(),
            index: states.expect("markov drive returns states"),
        },
        GeneratorSpec::GaussianSurrogate { cond_covs } => {
            if cond_covs.len() == 1 {
                CondCovs::Constant {
                    v: cond_covs[0].clone(),
                    n,
                }
            } else {
                CondCovs::PerStep(cond_covs.clone())
            }
        }
    };
    Ok(MdsPath {
        n,
        d,
        increments,
        cond_covs: Some(cond_covs),
        generator_tag: String::from(spec.tag()),
        seed,
    })
}

/// `S_n / sqrt(n)` without materializing the path; consumes the same
/// RNG stream as [`generate`], so the result equals
/// `generate(spec, n, seed)?.normalized_sum()` bit for bit.
pub fn generate_normalized_sum(
    spec: &GeneratorSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, GenError> {
    let d = spec.dim();
    let mut sum = vec![0.0f64; d];
    drive(spec, n, seed, &mut |_, row| {
        for (s, &x) in sum.iter_mut().zip(row.iter()) {
            *s += x;
        }
    })?;
    let scale = 1.0 / libm::sqrt(n as f64);
    for s in sum.iter_mut() {
        *s *= scale;
    }
    Ok(sum)
}

/// `S_n / sqrt(n)` together with the realized average conditional
/// covariance `(1/n) sum_k V_k`, in one pass.
pub fn generate_sum_and_sigma_bar(
    spec: &GeneratorSpec,
    n: usize,
    seed: u64,
) -> Result<(Vec<f64>, SymMatrix), GenError> {
    let sum = generate_normalized_sum(spec, n, seed)?;
    let sigma_bar = match spec {
        GeneratorSpec::MarkovInduced { .. } => {
            // states are needed; rerun the cheap index-only pass
            let path = generate(spec, n, seed)?;
            path.cond_covs.as_ref().unwrap().mean()
        }
        GeneratorSpec::IidGaussian { sigma } => sigma.clone(),
        GeneratorSpec::Bolthausen { d } => SymMatrix::identity(*d),
        GeneratorSpec::GaussianSurrogate { cond_covs } => {
            if cond_covs.len() == 1 {
                cond_covs[0].clone()
            } else {
                let mut acc = SymMatrix::zeros(cond_covs[0].dim());
                for v in cond_covs {
                    acc.add_assign(v);
                }
                acc.scale(1.0 / n as f64)
            }
        }
    };
    Ok((sum, sigma_bar))
}

/// The Gaussian reference covariance `Sigma_n` of a generator: the
/// constant covariance for the i.i.d. and constant-surrogate cases, the
/// identity for the lower-bound array, the stationary transition-pair
/// covariance for Markov chains, and the schedule average otherwise.
pub fn reference_sigma(spec: &GeneratorSpec, n: usize) -> Result<SymMatrix, GenError> {
    spec.validate(n.max(1024))?;
    match spec {
        GeneratorSpec::IidGaussian { sigma } => Ok(sigma.clone()),
        GeneratorSpec::Bolthausen { d } => Ok(SymMatrix::identity(*d)),
        GeneratorSpec::MarkovInduced { chain } => markov_sigma(chain),
        GeneratorSpec::GaussianSurrogate { cond_covs } => {
            let mut acc = SymMatrix::zeros(cond_covs[0].dim());
            for v in cond_covs {
                acc.add_assign(v);
            }
            Ok(acc.scale(1.0 / cond_covs.len() as f64))
        }
    }
}

/// Augment a path with the Yurinskii stopping time: copy increments up
/// to `tau = sup{t <= n : sum_{i<=t} V_i <= n (Sigma + kappa I)}`, zero
/// the rest, and append one Gaussian step carrying the residual
/// covariance, so the terminal quadratic variation equals
/// `n (Sigma + kappa I)` exactly.
pub fn yurinskii_augment(
    path: &MdsPath,
    sigma: &SymMatrix,
    kappa: f64,
    seed: u64,
) -> Result<(MdsPath, usize), GenError> {
    if kappa < 0.0 || kappa.is_nan() {
        return Err(GenError::InvalidInput("kappa must be nonnegative"));
    }
    if sigma.dim() != path.d {
        return Err(GenError::InvalidInput("sigma dimension mismatch"));
    }
    let covs = path
        .cond_covs
        .as_ref()
        .ok_or(GenError::InvalidInput("path must carry cond_covs"))?;
    let n = path.n;
    let d = path.d;
    let cap = sigma.add_scaled_identity(kappa).scale(n as f64);
    let tol = cap.tol_psd().max(1e-14);
    let feasible = |prefix: &SymMatrix| spectral_stats(&cap.sub(prefix)).lambda_min >= -tol;

    // violation persists once it occurs (adding PSD mass only grows the
    // quadratic form), so scan with checkpoints and refine on the first
    // violating stride
    let stride = (n / 64).max(1);
    let mut prefix = SymMatrix::zeros(d);
    let mut prefix_at_tau = prefix.clone();
    let mut tau = n;
    let mut t = 0usize;
    'scan: while t < n {
        let t_next = (t + stride).min(n);
        let saved = prefix.clone();
        for k in t..t_next {
            prefix.add_assign(covs.get(k));
        }
        if !feasible(&prefix) {
            let mut pfx = saved;
            for k in t..t_next {
                let before = pfx.clone();
                pfx.add_assign(covs.get(k));
                if !feasible(&pfx) {
                    tau = k;
                    prefix_at_tau = before;
                    break 'scan;
                }
            }
            unreachable!("stride violation must refine");
        }
        t = t_next;
    }
    if tau == n {
        prefix_at_tau = prefix;
    }

    let residual = cap.sub(&prefix_at_tau);
    let root = psd_sqrt_lenient(&residual, tol)?;

    let mut increments = Matrix::zeros(n + 1, d);
    for k in 0..tau {
        increments.row_mut(k).copy_from_slice(path.increments.row(k));
    }
    let mut rng = rng_from_seed(seed);
    let mut eta = vec![0.0f64; d];
    for e in eta.iter_mut() {
        *e = rng.sample(rand_distr::StandardNormal);
    }
    let mut last = vec![0.0f64; d];
    root.mul_vec(&eta, &mut last);
    increments.row_mut(n).copy_from_slice(&last);

    let zero = SymMatrix::zeros(d);
    let cond_covs = match covs {
        CondCovs::Constant { v, .. } => {
            let mut index = vec![0u32; n + 1];
            for idx in index.iter_mut().take(n).skip(tau) {
                *idx = 1;
            }
            index[n] = 2;
            CondCovs::Indexed {
                table: vec![v.clone(), zero, residual],
                index,
            }
        }
        CondCovs::Indexed { table, index } => {
            let z_idx = table.len() as u32;
            let r_idx = z_idx + 1;
            let mut new_table = table.clone();
            new_table.push(zero);
            new_table.push(residual);
            let mut new_index = Vec::with_capacity(n + 1);
            new_index.extend_from_slice(&index[..tau]);
            new_index.resize(n, z_idx);
            new_index.push(r_idx);
            CondCovs::Indexed {
                table: new_table,
                index: new_index,
            }
        }
        CondCovs::PerStep(list) => {
            let mut new_list = Vec::with_capacity(n + 1);
            new_list.extend_from_slice(&list[..tau]);
            new_list.resize(n, zero);
            new_list.push(residual);
            CondCovs::PerStep(new_list)
        }
    };

    let mut tag = path.generator_tag.clone();
    tag.push_str("+yurinskii");
    Ok((
        MdsPath {
            n: n + 1,
            d,
            increments,
            cond_covs: Some(cond_covs),
            generator_tag: tag,
            seed: path.seed,
        },
        tau,
    ))
}

/// PSD square root that clamps small negative eigenvalues against an
/// externally supplied tolerance (the cap scale, not the residual's own).
fn psd_sqrt_lenient(m: &SymMatrix, tol: f64) -> Result<SymMatrix, GenError> {
    let eig = sym_eigen(m)?;
    if let Some(&lmin) = eig.values.first() {
        if lmin < -tol {
            return Err(GenError::InvalidInput("residual covariance is not PSD"));
        }
    }
    let d = m.dim();
    let mut out = SymMatrix::zeros(d);
    for (k, &val) in eig.values.iter().enumerate() {
        if val > 0.0 {
            let r = libm::sqrt(val);
            let col: Vec<f64> = (0..d).map(|i| eig.vectors.get(i, k)).collect();
            out.add_outer(&col, r);
        }
    }
    Ok(out)
}

/// Measure the scalar bound hypotheses of a generator: exact where the
/// construction pins them (Markov tables, constant covariances) and
/// Monte Carlo estimates from `probe_reps` pilot paths otherwise.
pub fn moment_stats(
    spec: &GeneratorSpec,
    n: usize,
    seed: u64,
    probe_reps: usize,
) -> Result<MomentStats, GenError> {
    spec.validate(n)?;
    let d = spec.dim();
    let sigma_n = reference_sigma(spec, n)?;
    let st = spectral_stats(&sigma_n);
    let lp = log_plus(d);

    let (alpha, beta, gamma, m_ratio, third_mean) = match spec {
        GeneratorSpec::MarkovInduced { chain } => {
            let info = stationary_and_gap(chain.transition())?;
            let mut alpha = f64::INFINITY;
            let mut beta: f64 = 0.0;
            let mut max_third: f64 = 0.0;
            let mut m_ratio: f64 = 0.0;
            let mut third_mean = 0.0;
            for s in 0..chain.num_states() {
                let v = chain.state_cond_cov(s);
                let vs = spectral_stats(&v);
                alpha = alpha.min(vs.lambda_min);
                beta = beta.max(vs.d_max);
                let third = chain.state_third_moment(s);
                max_third = max_third.max(third);
                m_ratio = m_ratio.max(if vs.lambda_min > 0.0 {
                    third / vs.lambda_min
                } else {
                    f64::INFINITY
                });
                third_mean += info.mu[s] * third;
            }
            let gamma = libm::pow(max_third, 2.0 / 3.0) / lp;
            (alpha, beta, gamma, m_ratio, third_mean)
        }
        _ => {
            // per-step mean of ||X_k||_inf^3 across pilot paths
            let reps = probe_reps.max(8);
            let mut per_step = vec![0.0f64; n];
            for r in 0..reps {
                drive(spec, n, child_seed(seed, r as u64), &mut |k, row| {
                    let norm = row.iter().fold(0.0f64, |a, &v| a.max(libm::fabs(v)));
                    per_step[k] += norm * norm * norm;
                })?;
            }
            for v in per_step.iter_mut() {
                *v /= reps as f64;
            }
            let third_mean = per_step.iter().sum::<f64>() / n as f64;
            // the max over steps of E||X_k||^3: pool steps with identical
            // laws so Monte Carlo noise does not inflate the maximum
            let max_step = match spec {
                GeneratorSpec::IidGaussian { .. } => third_mean,
                GeneratorSpec::GaussianSurrogate { cond_covs } if cond_covs.len() == 1 => {
                    third_mean
                }
                GeneratorSpec::Bolthausen { .. } => {
                    let (lo, hi) = bolthausen_window(n);
                    let mut outside_sum = 0.0;
                    let mut outside_count = 0usize;
                    let mut window_max: f64 = 0.0;
                    for (k, &v) in per_step.iter().enumerate() {
                        let i = k + 1;
                        if i > lo && i <= hi {
                            window_max = window_max.max(v);
                        } else {
                            outside_sum += v;
                            outside_count += 1;
                        }
                    }
                    (outside_sum / outside_count.max(1) as f64).max(window_max)
                }
                _ => per_step.iter().fold(0.0f64, |a, &v| a.max(v)),
            };

            let (alpha, beta, min_lambda) = match spec {
                GeneratorSpec::IidGaussian { sigma } => {
                    let s = spectral_stats(sigma);
                    (s.lambda_min, s.d_max, s.lambda_min)
                }
                GeneratorSpec::Bolthausen { .. } => (1.0, 1.0, 1.0),
                GeneratorSpec::GaussianSurrogate { cond_covs } => {
                    let mut a = f64::INFINITY;
                    let mut b: f64 = 0.0;
                    for v in cond_covs {
                        let s = spectral_stats(v);
                        a = a.min(s.lambda_min);
                        b = b.max(s.d_max);
                    }
                    (a, b, a)
                }
                GeneratorSpec::MarkovInduced { .. } => unreachable!(),
            };
            let gamma = libm::pow(max_step, 2.0 / 3.0) / lp;
            let m_ratio = if min_lambda > 0.0 {
                max_step / min_lambda
            } else {
                f64::INFINITY
            };
            (alpha, beta, gamma, m_ratio, third_mean)
        }
    };

    Ok(MomentStats {
        m_ratio,
        alpha,
        beta,
        gamma,
        lambda_min_sigma: st.lambda_min,
        d_min_sigma: st.d_min,
        d_max_sigma: st.d_max,
        third_moment_mean: third_mean,
        n,
        d,
    })
}
