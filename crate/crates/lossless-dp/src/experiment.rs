//! Variance comparison between lossless ledger releases and independent top-ups.
//!
//! Replays the same schedule of increasing budgets under two protocols. The
//! lossless protocol answers every query from one [`Ledger`], so the noise at
//! budget `rho` has the variance of a single fresh release at `rho`. The
//! independent protocol spends each budget increment on a fresh release and
//! reports only that release, so its variance is governed by the increment
//! rather than the cumulative budget. Empirical variances are estimated over
//! many replications, deterministically parallelized over fixed chunks.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ledger::Ledger;
use crate::noise::{sample_gaussian, Mechanism};
use crate::rng::substream;
use crate::stats::RunningMoments;

/// Replications processed per parallel chunk; fixed so results do not depend
/// on the number of worker threads.
const CHUNK_SIZE: u64 = 4096;

/// Release protocol being measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// All releases served from one ledger.
    Lossless,
    /// Each budget increment spent on a fresh, separately reported release.
    Independent,
}

impl Mode {
    /// Stable lowercase name used in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            Mode::Lossless => "lossless",
            Mode::Independent => "independent",
        }
    }
}

/// One measured point of the comparison.
#[derive(Debug, Clone, serde::Serialize)]
pub struct VariancePoint {
    /// Cumulative budget at this release.
    pub rho: f64,
    /// Protocol the point belongs to.
    pub mode: Mode,
    /// Number of releases made up to and including this one.
    pub n_releases: usize,
    /// Variance of the released value across replications.
    pub empirical_variance: f64,
    /// Variance predicted for the protocol at this point.
    pub theoretical_variance: f64,
}

/// Logarithmically spaced grid of `n` budgets from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(Error::invalid(format!(
            "grid endpoints must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    if n < 2 {
        return Err(Error::invalid("grid needs at least 2 points"));
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

/// Runs both protocols over `budgets` for `replications` independent runs.
///
/// Every replication releases a zero-valued scalar at each budget in order.
/// Returns two points per budget, lossless first, in grid order.
pub fn compare_protocols(
    budgets: &[f64],
    delta: f64,
    replications: u64,
    seed: u64,
) -> Result<Vec<VariancePoint>> {
    if budgets.is_empty() {
        return Err(Error::invalid("budget grid is empty"));
    }
    let mut prev = 0.0;
    for &rho in budgets {
        if !(rho.is_finite() && rho > prev) {
            return Err(Error::BudgetOrder {
                previous: prev,
                current: rho,
            });
        }
        prev = rho;
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!(
            "sensitivity must be positive and finite, got {delta}"
        )));
    }
    if replications == 0 {
        return Err(Error::invalid("need at least one replication"));
    }

    let n_chunks = replications.div_ceil(CHUNK_SIZE);
    let moments = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| -> Result<Vec<(RunningMoments, RunningMoments)>> {
            let mut rng = substream(seed, chunk);
            let reps = CHUNK_SIZE.min(replications - chunk * CHUNK_SIZE);
            let mut acc = vec![(RunningMoments::new(), RunningMoments::new()); budgets.len()];
            for _ in 0..reps {
                let mut ledger =
                    Ledger::new_unbounded(Mechanism::Gaussian, delta, vec![0.0])?;
                let mut rho_prev = 0.0;
                for (i, &rho) in budgets.iter().enumerate() {
                    let lossless = ledger.release_scalar(rho, &mut rng)?;
                    let fresh =
                        sample_gaussian(0.0, delta * delta / (2.0 * (rho - rho_prev)), &mut rng)?;
                    acc[i].0.push(lossless);
                    acc[i].1.push(fresh);
                    rho_prev = rho;
                }
            }
            Ok(acc)
        })
        .try_reduce(
            || vec![(RunningMoments::new(), RunningMoments::new()); budgets.len()],
            |mut left, right| {
                for (l, r) in left.iter_mut().zip(&right) {
                    l.0.merge(&r.0);
                    l.1.merge(&r.1);
                }
                Ok(left)
            },
        )?;

    let mut points = Vec::with_capacity(2 * budgets.len());
    let mut rho_prev = 0.0;
    for (i, &rho) in budgets.iter().enumerate() {
        points.push(VariancePoint {
            rho,
            mode: Mode::Lossless,
            n_releases: i + 1,
            empirical_variance: moments[i].0.variance(),
            theoretical_variance: delta * delta / (2.0 * rho),
        });
        points.push(VariancePoint {
            rho,
            mode: Mode::Independent,
            n_releases: i + 1,
            empirical_variance: moments[i].1.variance(),
            theoretical_variance: delta * delta / (2.0 * (rho - rho_prev)),
        });
        rho_prev = rho;
    }
    Ok(points)
}

/// Writes points as CSV with a header row.
pub fn write_csv<W: Write>(points: &[VariancePoint], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "rho,mode,n_releases,empirical_variance,theoretical_variance"
    )?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.rho,
            p.mode.name(),
            p.n_releases,
            p.empirical_variance,
            p.theoretical_variance
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_is_logarithmic_and_inclusive() {
        let grid = log_grid(0.001, 5.0, 20).unwrap();
        assert_eq!(grid.len(), 20);
        assert_relative_eq!(grid[0], 0.001, max_relative = 1e-12);
        assert_relative_eq!(grid[19], 5.0, max_relative = 1e-12);
        let ratio = grid[1] / grid[0];
        for w in grid.windows(2) {
            assert_relative_eq!(w[1] / w[0], ratio, max_relative = 1e-9);
        }
        assert!(log_grid(0.0, 5.0, 20).is_err());
        assert!(log_grid(1.0, 5.0, 1).is_err());
    }

    #[test]
    fn lossless_variance_tracks_cumulative_budget() {
        let grid = log_grid(0.01, 2.0, 5).unwrap();
        let points = compare_protocols(&grid, 1.0, 60_000, 7).unwrap();
        for p in &points {
            assert_relative_eq!(
                p.empirical_variance,
                p.theoretical_variance,
                max_relative = 0.05
            );
        }
        // The first grid point has no preceding release, so both protocols
        // coincide; every later point must favor the ledger.
        assert_relative_eq!(
            points[0].theoretical_variance,
            points[1].theoretical_variance,
            max_relative = 1e-12
        );
        for pair in points.chunks(2).skip(1) {
            assert!(pair[1].theoretical_variance > pair[0].theoretical_variance);
        }
    }

    #[test]
    fn results_do_not_depend_on_chunk_scheduling() {
        let grid = log_grid(0.05, 1.0, 3).unwrap();
        let a = compare_protocols(&grid, 2.0, 10_000, 42).unwrap();
        let b = compare_protocols(&grid, 2.0, 10_000, 42).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.empirical_variance.to_bits(), y.empirical_variance.to_bits());
        }
    }

    #[test]
    fn csv_has_expected_shape() {
        let grid = log_grid(0.1, 1.0, 2).unwrap();
        let points = compare_protocols(&grid, 1.0, 500, 3).unwrap();
        let mut buf = Vec::new();
        write_csv(&points, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(
            lines[0],
            "rho,mode,n_releases,empirical_variance,theoretical_variance"
        );
        assert!(lines[1].starts_with("0.1,lossless,1,"));
        assert!(lines[2].starts_with("0.1,independent,1,"));
        assert!(lines[4].starts_with("1,independent,2,"));
    }
}
