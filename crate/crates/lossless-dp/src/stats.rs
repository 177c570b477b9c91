//! Statistical test helpers used by the self-check suites: Kolmogorov-
//! Smirnov tests, chi-square tests with small-bin pooling, and running
//! moment accumulators.

use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Outcome of a Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    /// Supremum distance between the compared CDFs.
    pub statistic: f64,
    /// Asymptotic p-value.
    pub p_value: f64,
    /// Effective sample size entering the asymptotic formula.
    pub n_eff: f64,
}

impl KsResult {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Outcome of a chi-square test.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareResult {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

/// Asymptotic KS survival function Q(lambda) = 2 sum_j (-1)^{j-1}
/// exp(-2 j^2 lambda^2); see Press et al., Numerical Recipes, 3rd ed.,
/// section 14.3.3.
fn ks_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 * sum.abs() || term == 0.0 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(statistic: f64, n_eff: f64) -> f64 {
    let root = n_eff.sqrt();
    ks_survival((root + 0.12 + 0.11 / root) * statistic)
}

fn sort_unstable_f64(xs: &mut [f64]) -> Result<()> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("samples must not contain NaN"));
    }
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(())
}

/// One-sample KS test of `samples` against the model CDF `cdf`.
/// Sorts `samples` in place.
pub fn ks_test_one_sample<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> Result<KsResult> {
    if samples.len() < 8 {
        return Err(Error::invalid("KS test needs at least 8 samples"));
    }
    sort_unstable_f64(samples)?;
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let model = cdf(x);
        d = d.max((model - i as f64 / n).abs());
        d = d.max((model - (i as f64 + 1.0) / n).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
        n_eff: n,
    })
}

/// Two-sample KS test. Sorts both sample sets in place.
pub fn ks_test_two_sample(xs: &mut [f64], ys: &mut [f64]) -> Result<KsResult> {
    if xs.len() < 8 || ys.len() < 8 {
        return Err(Error::invalid("KS test needs at least 8 samples per side"));
    }
    sort_unstable_f64(xs)?;
    sort_unstable_f64(ys)?;
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < xs.len() && j < ys.len() {
        let (x, y) = (xs[i], ys[j]);
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let n_eff = n * m / (n + m);
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, n_eff),
        n_eff,
    })
}

/// Pool adjacent bins until every pooled bin has expected count at least
/// `min_expected`. Returns (observed, expected) per pooled bin.
fn pool_bins(observed: &[f64], expected: &[f64], min_expected: f64) -> (Vec<f64>, Vec<f64>) {
    let mut obs_out = Vec::new();
    let mut exp_out = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= min_expected {
            obs_out.push(o_acc);
            exp_out.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        if let (Some(last_o), Some(last_e)) = (obs_out.last_mut(), exp_out.last_mut()) {
            *last_o += o_acc;
            *last_e += e_acc;
        } else {
            obs_out.push(o_acc);
            exp_out.push(e_acc);
        }
    }
    (obs_out, exp_out)
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, statistic / 2.0)
}

/// Chi-square goodness-of-fit test of observed counts against expected
/// counts, pooling adjacent bins with expected count below 5.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() {
        return Err(Error::invalid(format!(
            "bin count mismatch: {} observed vs {} expected",
            observed.len(),
            expected.len()
        )));
    }
    if expected.iter().any(|&e| !(e >= 0.0) || !e.is_finite()) {
        return Err(Error::invalid("expected counts must be finite and >= 0"));
    }
    let obs: Vec<f64> = observed.iter().map(|&o| o as f64).collect();
    let (obs, exp) = pool_bins(&obs, expected, 5.0);
    if obs.len() < 2 {
        return Err(Error::invalid(
            "fewer than two bins remain after pooling; test is degenerate",
        ));
    }
    let statistic: f64 = obs
        .iter()
        .zip(&exp)
        .map(|(&o, &e)| (o - e) * (o - e) / e)
        .sum();
    let dof = obs.len() - 1;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    })
}

/// Two-sample chi-square homogeneity test on per-class counts, pooling
/// classes whose pooled expected count falls below 5 on either side.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquareResult> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "class count mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n_a: u64 = a.iter().sum();
    let n_b: u64 = b.iter().sum();
    if n_a == 0 || n_b == 0 {
        return Err(Error::invalid("both samples must be nonempty"));
    }
    let total = (n_a + n_b) as f64;
    let (fa, fb) = (n_a as f64 / total, n_b as f64 / total);
    // Pool on the smaller of the two expected counts per class.
    let min_frac = fa.min(fb);
    let combined: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| (x + y) as f64).collect();
    let pool_driver: Vec<f64> = combined.iter().map(|&c| c * min_frac).collect();
    let obs_a: Vec<f64> = a.iter().map(|&x| x as f64).collect();
    let (pooled_a, driver_a) = pool_bins(&obs_a, &pool_driver, 5.0);
    let obs_b: Vec<f64> = b.iter().map(|&x| x as f64).collect();
    let (pooled_b, _) = pool_bins(&obs_b, &pool_driver, 5.0);
    if pooled_a.len() < 2 {
        return Err(Error::invalid(
            "fewer than two classes remain after pooling; test is degenerate",
        ));
    }
    let mut statistic = 0.0;
    for ((&oa, &ob), &driver) in pooled_a.iter().zip(&pooled_b).zip(&driver_a) {
        // Recover the pooled combined count from the pooling driver.
        let combined = driver / min_frac;
        let (ea, eb) = (combined * fa, combined * fb);
        statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
    }
    let dof = pooled_a.len() - 1;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    })
}

/// Streaming mean and variance (Welford's algorithm).
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance (divides by n).
    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.m2 / self.n as f64
        }
    }

    /// Merge two accumulators (Chan's parallel update).
    pub fn merge(&mut self, other: &RunningMoments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let d = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += d * n2 / n;
        self.m2 += other.m2 + d * d * n1 * n2 / n;
        self.n += other.n;
    }
}

/// Streaming mean vector and covariance matrix for fixed dimension.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    n: u64,
    mean: Vec<f64>,
    /// Upper triangle (row-major) of the co-moment matrix.
    comoment: Vec<f64>,
    dim: usize,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * (dim + 1) / 2],
            dim,
        }
    }

    fn tri(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && j < self.dim);
        i * self.dim - i * (i + 1) / 2 + j
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim);
        self.n += 1;
        let n = self.n as f64;
        let deltas: Vec<f64> = x.iter().zip(&self.mean).map(|(xi, mi)| xi - mi).collect();
        for (mi, di) in self.mean.iter_mut().zip(&deltas) {
            *mi += di / n;
        }
        for i in 0..self.dim {
            for j in i..self.dim {
                let idx = self.tri(i, j);
                self.comoment[idx] += deltas[i] * (x[j] - self.mean[j]);
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population covariance between coordinates `i` and `j`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.comoment[self.tri(i, j)] / self.n as f64
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_segment<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let refined = left + right;
    // Richardson criterion for Simpson's rule (Press et al., Numerical
    // Recipes, ch. 4): the error of the refined estimate is about
    // (refined - whole) / 15.
    if depth == 0 || (refined - whole).abs() <= 15.0 * tol {
        refined + (refined - whole) / 15.0
    } else {
        simpson_segment(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_segment(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_segment(f, a, b, fa, fm, fb, whole, tol, 48)
}
