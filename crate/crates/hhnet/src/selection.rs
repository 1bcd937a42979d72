//! Smoothing-weight selection by leave-one-out cross-validation and
//! resampling uncertainty for the unpenalized estimate.
//!
//! Each fold refits on `n - 1` observations (recomputing the independence
//! target on those observations alone, so nothing leaks from the held-out
//! point) and scores the held-out observation's unpenalized log-likelihood.
//! A held-out point with zero fitted mass scores negative infinity, which
//! disqualifies that grid point from selection; this is how degenerate
//! unsmoothed fits lose to positive smoothing weights.

use rayon::prelude::*;
use thiserror::Error;

use crate::independence::{penalty_for, IndependenceError};
use crate::likelihood::{
    log_likelihood, Penalty, PenaltyChoice, PenalizedObjective, ProbabilityVector,
    INTERIOR_EPSILON,
};
use crate::network::{PartialObservation, NETWORK_COUNT};
use crate::optim::{maximize, FitOptions, OptimError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("lambda grid must be strictly increasing and nonnegative at position {0}")]
    BadGrid(usize),
    #[error("no complete grid point: every lambda had at least one failed fold")]
    NoCompleteGridPoint,
    #[error("bootstrap resample count must be at least 1")]
    NoResamples,
    #[error("{failed} of {total} bootstrap resamples failed (more than 10%)")]
    TooManyFailures { failed: usize, total: usize },
}

/// Scale on which held-out observations are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreScale {
    /// Log-likelihood of the held-out point (default).
    #[default]
    Log,
    /// Raw likelihood (the held-out point's consistent mass).
    Raw,
}

/// Options for [`loo_cross_validate`]. Per-fold optimizer seeds are derived
/// from `fit.seed`, so results are independent of execution order.
#[derive(Debug, Clone, Default)]
pub struct CvOptions {
    pub fit: FitOptions,
    pub scale: ScoreScale,
}

/// One failed fold fit.
#[derive(Debug, Clone)]
pub struct CvFailure {
    pub fold: usize,
    pub grid_index: usize,
    pub message: String,
}

/// Held-out scores over a lambda grid.
#[derive(Debug, Clone)]
pub struct CvCurve {
    pub grid: Vec<f64>,
    /// Mean held-out score per grid point; `None` where any fold failed.
    pub mean_heldout: Vec<Option<f64>>,
    /// `per_fold[fold][grid_index]`; `None` where the fit failed.
    pub per_fold: Vec<Vec<Option<f64>>>,
    pub failures: Vec<CvFailure>,
}

impl CvCurve {
    pub fn is_complete(&self, grid_index: usize) -> bool {
        self.per_fold.iter().all(|row| row[grid_index].is_some())
    }
}

fn validate_grid(grid: &[f64]) -> Result<(), SelectionError> {
    if grid.is_empty() {
        return Err(SelectionError::EmptyGrid);
    }
    for (i, &g) in grid.iter().enumerate() {
        let ok = g.is_finite() && g >= 0.0 && (i == 0 || g > grid[i - 1]);
        if !ok {
            return Err(SelectionError::BadGrid(i));
        }
    }
    Ok(())
}

/// Derive a per-job seed from a master seed and job coordinates
/// (splitmix64 over the mixed words).
pub(crate) fn mix_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut x = master ^ a.rotate_left(17) ^ b.rotate_left(41);
    for _ in 0..3 {
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x = z ^ (z >> 31);
    }
    x
}

fn fit_and_score(
    train: &[PartialObservation],
    held_out: &PartialObservation,
    lambda: f64,
    penalty: &Penalty,
    opts: &CvOptions,
    seed: u64,
) -> Result<f64, String> {
    let spec = PenalizedObjective::new(train, lambda, penalty.clone()).map_err(|e| e.to_string())?;
    let init = match penalty {
        Penalty::Independence { target } => target.clipped_interior(INTERIOR_EPSILON),
        _ => ProbabilityVector::uniform(),
    };
    let fit_opts = FitOptions {
        seed,
        ..opts.fit.clone()
    };
    let fit = maximize(&spec, &init, &fit_opts).map_err(|e| e.to_string())?;
    let score = log_likelihood(&fit.p_hat, std::slice::from_ref(held_out));
    Ok(match opts.scale {
        ScoreScale::Log => score,
        ScoreScale::Raw => score.exp(),
    })
}

/// Leave-one-out cross-validation of the held-out score over a lambda grid.
pub fn loo_cross_validate(
    data: &[PartialObservation],
    grid: &[f64],
    choice: PenaltyChoice,
    opts: &CvOptions,
) -> Result<CvCurve, SelectionError> {
    let n = data.len();
    if n < 2 {
        return Err(SelectionError::TooFewObservations { needed: 2, got: n });
    }
    validate_grid(grid)?;
    let g = grid.len();

    // Fold training sets and their penalty targets, computed once per fold.
    let folds: Vec<(Vec<PartialObservation>, Result<Penalty, IndependenceError>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut train = Vec::with_capacity(n - 1);
            train.extend_from_slice(&data[..i]);
            train.extend_from_slice(&data[i + 1..]);
            let penalty = penalty_for(choice, &train);
            (train, penalty)
        })
        .collect();

    let cells: Vec<Result<f64, String>> = (0..n * g)
        .into_par_iter()
        .map(|idx| {
            let fold = idx / g;
            let gi = idx % g;
            let (train, penalty) = &folds[fold];
            match penalty {
                Ok(pen) => fit_and_score(
                    train,
                    &data[fold],
                    grid[gi],
                    pen,
                    opts,
                    mix_seed(opts.fit.seed, fold as u64 + 1, gi as u64 + 1),
                ),
                Err(e) => Err(e.to_string()),
            }
        })
        .collect();

    let mut per_fold = vec![vec![None; g]; n];
    let mut failures = Vec::new();
    for (idx, cell) in cells.into_iter().enumerate() {
        let fold = idx / g;
        let gi = idx % g;
        match cell {
            Ok(score) => per_fold[fold][gi] = Some(score),
            Err(message) => failures.push(CvFailure {
                fold,
                grid_index: gi,
                message,
            }),
        }
    }
    let mean_heldout = (0..g)
        .map(|gi| {
            let mut sum = 0.0;
            for row in &per_fold {
                sum += row[gi]?;
            }
            Some(sum / n as f64)
        })
        .collect();
    Ok(CvCurve {
        grid: grid.to_vec(),
        mean_heldout,
        per_fold,
        failures,
    })
}

/// The grid point maximizing the mean held-out score, over complete points
/// only; ties break toward the smaller lambda (less smoothing).
pub fn select_lambda(curve: &CvCurve) -> Result<f64, SelectionError> {
    let mut best: Option<(f64, f64)> = None;
    for (gi, mean) in curve.mean_heldout.iter().enumerate() {
        let Some(mean) = mean else { continue };
        match best {
            Some((_, value)) if *mean <= value => {}
            _ => best = Some((curve.grid[gi], *mean)),
        }
    }
    best.map(|(lambda, _)| lambda)
        .ok_or(SelectionError::NoCompleteGridPoint)
}

/// Nonparametric bootstrap of the fit at a fixed smoothing weight.
#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// Requested resample count.
    pub requested: usize,
    /// Estimates from the resamples that fit successfully.
    pub estimates: Vec<ProbabilityVector>,
    /// Elementwise sample standard deviation over the estimates; all zero
    /// when only one resample was requested.
    pub standard_errors: Vec<f64>,
    pub failures: usize,
}

impl BootstrapResult {
    /// Mean of the resample estimates (itself a distribution).
    pub fn mean_estimate(&self) -> Option<ProbabilityVector> {
        if self.estimates.is_empty() {
            return None;
        }
        let mut acc = [0.0; NETWORK_COUNT];
        for est in &self.estimates {
            for (a, v) in acc.iter_mut().zip(est.iter()) {
                *a += v;
            }
        }
        ProbabilityVector::from_weights(&acc).ok()
    }
}

/// Resample the observations with replacement `resamples` times, refit at
/// `lambda` (recomputing the independence target per resample), and report
/// elementwise standard deviations. Individual failures are tolerated up to
/// 10% of the resamples.
pub fn bootstrap(
    data: &[PartialObservation],
    resamples: usize,
    lambda: f64,
    choice: PenaltyChoice,
    opts: &FitOptions,
) -> Result<BootstrapResult, SelectionError> {
    let n = data.len();
    if n < 2 {
        return Err(SelectionError::TooFewObservations { needed: 2, got: n });
    }
    if resamples == 0 {
        return Err(SelectionError::NoResamples);
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(SelectionError::BadGrid(0));
    }

    let runs: Vec<Result<ProbabilityVector, String>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            use rand::{Rng, SeedableRng};
            let mut rng =
                rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, 0xB007, r as u64));
            let resample: Vec<PartialObservation> = (0..n)
                .map(|_| data[rng.random_range(0..n)].clone())
                .collect();
            let penalty = penalty_for(choice, &resample).map_err(|e| e.to_string())?;
            let spec =
                PenalizedObjective::new(&resample, lambda, penalty.clone()).map_err(|e| e.to_string())?;
            let init = match &penalty {
                Penalty::Independence { target } => target.clipped_interior(INTERIOR_EPSILON),
                _ => ProbabilityVector::uniform(),
            };
            let fit_opts = FitOptions {
                seed: mix_seed(opts.seed, 0x5EED, r as u64),
                ..opts.clone()
            };
            maximize(&spec, &init, &fit_opts)
                .map(|fit| fit.p_hat)
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut estimates = Vec::with_capacity(resamples);
    let mut failures = 0;
    for run in runs {
        match run {
            Ok(p) => estimates.push(p),
            Err(_) => failures += 1,
        }
    }
    if failures * 10 > resamples {
        return Err(SelectionError::TooManyFailures {
            failed: failures,
            total: resamples,
        });
    }

    let m = estimates.len();
    let mut standard_errors = vec![0.0; NETWORK_COUNT];
    if m >= 2 {
        for k in 0..NETWORK_COUNT {
            let mean: f64 = estimates.iter().map(|p| p[k]).sum::<f64>() / m as f64;
            let ss: f64 = estimates.iter().map(|p| (p[k] - mean).powi(2)).sum();
            standard_errors[k] = (ss / (m - 1) as f64).sqrt();
        }
    }
    Ok(BootstrapResult {
        requested: resamples,
        estimates,
        standard_errors,
        failures,
    })
}

/// Convenience for maximizing on the full data with the independence target
/// (or uniform) as the initial point; used by the command layer and tests.
pub fn fit_full(
    data: &[PartialObservation],
    lambda: f64,
    choice: PenaltyChoice,
    opts: &FitOptions,
) -> Result<crate::optim::FitResult, FitError> {
    let penalty = penalty_for(choice, data)?;
    let spec = PenalizedObjective::new(data, lambda, penalty.clone())?;
    let init = match &penalty {
        Penalty::Independence { target } => target.clipped_interior(INTERIOR_EPSILON),
        _ => ProbabilityVector::uniform(),
    };
    Ok(maximize(&spec, &init, opts)?)
}

/// Errors from the combined fit pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error(transparent)]
    Independence(#[from] IndependenceError),
    #[error(transparent)]
    Likelihood(#[from] crate::likelihood::LikelihoodError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}
