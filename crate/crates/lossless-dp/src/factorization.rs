//! Re-releasable linear workloads through a matrix factorization.
//!
//! A workload `A = L R` is answered as `A x + L z`, where `z` carries
//! independent Gaussian noise sized to the sensitivity of `R x`. Keeping the
//! noise vector in a release ledger makes the whole workload re-releasable:
//! every privacy level reuses the same coupled noise, so answers at many
//! levels cost only the strongest one. Any consumer holding a left inverse
//! of `L` can map answers back to the `R`-space stream `R x + z`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::ledger::{Ledger, Release};
use crate::noise::Mechanism;

/// A workload matrix split as `A = left * right`.
#[derive(Debug, Clone)]
pub struct FactorizedQuery {
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl FactorizedQuery {
    pub fn new(left: DMatrix<f64>, right: DMatrix<f64>) -> Result<Self> {
        if left.ncols() != right.nrows() {
            return Err(Error::Linear(format!(
                "factor shapes do not compose: left is {}x{}, right is {}x{}",
                left.nrows(),
                left.ncols(),
                right.nrows(),
                right.ncols()
            )));
        }
        if left.ncols() == 0 || left.nrows() == 0 || right.ncols() == 0 {
            return Err(Error::Linear("factors must be nonempty".into()));
        }
        if left.iter().chain(right.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Linear("factor entries must be finite".into()));
        }
        Ok(Self { left, right })
    }

    pub fn left(&self) -> &DMatrix<f64> {
        &self.left
    }

    pub fn right(&self) -> &DMatrix<f64> {
        &self.right
    }

    /// The composed workload `left * right`.
    pub fn workload(&self) -> DMatrix<f64> {
        &self.left * &self.right
    }

    /// Number of noise coordinates (the inner dimension of the split).
    pub fn noise_dimension(&self) -> usize {
        self.left.ncols()
    }

    /// l2-sensitivity of `right * x` for unit changes of one coordinate of
    /// `x`: the largest column norm of `right`.
    pub fn sensitivity(&self) -> f64 {
        (0..self.right.ncols())
            .map(|j| self.right.column(j).norm())
            .fold(0.0, f64::max)
    }

    /// Left inverse of the left factor, computed by SVD and verified to
    /// satisfy `pinv * left = identity` to 1e-8. Fails if the left factor
    /// is rank deficient.
    pub fn left_inverse(&self) -> Result<DMatrix<f64>> {
        let svd = self.left.clone().svd(false, false);
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        if smax == 0.0 {
            return Err(Error::Linear("left factor is zero".into()));
        }
        let tol = 1e-10 * smax;
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        if rank < self.left.ncols() {
            return Err(Error::Linear(format!(
                "left factor has rank {rank} < {}; no left inverse exists",
                self.left.ncols()
            )));
        }
        let pinv = self
            .left
            .clone()
            .pseudo_inverse(tol)
            .map_err(|e| Error::Linear(format!("pseudo-inverse failed: {e}")))?;
        let residual = (&pinv * &self.left - DMatrix::identity(rank, rank))
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if residual > 1e-8 {
            return Err(Error::Linear(format!(
                "left-inverse residual {residual:.2e} exceeds 1e-8"
            )));
        }
        Ok(pinv)
    }
}

/// A factorized workload bound to a data vector, with coupled noise shared
/// across every release level.
#[derive(Debug, Clone)]
pub struct FactorizedLedger {
    query: FactorizedQuery,
    exact_answer: DVector<f64>,
    noise: Ledger,
}

impl FactorizedLedger {
    /// Bind `query` to `data`. The exact workload answer is retained inside
    /// (this object is trusted state, like any ledger holding a secret).
    pub fn new(query: FactorizedQuery, data: &[f64]) -> Result<Self> {
        if data.len() != query.right.ncols() {
            return Err(Error::Linear(format!(
                "data has {} coordinates but the workload expects {}",
                data.len(),
                query.right.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Linear("data coordinates must be finite".into()));
        }
        let x = DVector::from_column_slice(data);
        let exact_answer = query.workload() * &x;
        let noise = Ledger::new_unbounded(
            Mechanism::Gaussian,
            query.sensitivity(),
            vec![0.0; query.noise_dimension()],
        )?;
        Ok(Self {
            query,
            exact_answer,
            noise,
        })
    }

    pub fn query(&self) -> &FactorizedQuery {
        &self.query
    }

    /// The coupled noise ledger (entries are noise vectors in `R`-space).
    pub fn noise_ledger(&self) -> &Ledger {
        &self.noise
    }

    /// Answer the whole workload at level `rho`: `A x + left * z_rho`.
    ///
    /// Marginally each answer is a fresh factorized release at `rho`;
    /// jointly, all answers ever produced cost only the strongest level.
    pub fn release<R: Rng + ?Sized>(&mut self, rho: f64, rng: &mut R) -> Result<Vec<f64>> {
        let z = self.noise_release(rho, rng)?;
        let noise = &self.query.left * DVector::from_vec(z.value);
        Ok((&self.exact_answer + noise).as_slice().to_vec())
    }

    /// The noise vector alone at level `rho` (the workload answer is
    /// `A x + left * z`).
    pub fn noise_release<R: Rng + ?Sized>(&mut self, rho: f64, rng: &mut R) -> Result<Release> {
        self.noise.release(rho, rng)
    }
}

/// The `n x n` running-sum workload: row `i` sums the first `i + 1` inputs,
/// factored as (lower-triangular ones) * identity.
pub fn prefix_sum_query(n: usize) -> Result<FactorizedQuery> {
    let left = DMatrix::from_fn(n, n, |i, j| if j <= i { 1.0 } else { 0.0 });
    let right = DMatrix::identity(n, n);
    FactorizedQuery::new(left, right)
}
