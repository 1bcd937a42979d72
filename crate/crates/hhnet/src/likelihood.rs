//! Observed-data log-likelihood over the 64-network simplex and the
//! smoothing penalties that compose the penalized objective.
//!
//! Each respondent's likelihood contribution is the total probability of the
//! 8 complete networks consistent with their report. The penalty pulls the
//! estimate toward a reference structure: the dyad-independence product
//! distribution (squared Hellinger distance), networks differing on a single
//! dyad (adjacency), or exchangeability orbits.

use std::sync::LazyLock;

use thiserror::Error;

use crate::network::{
    exchangeability_orbits, NetworkIndex, PartialObservation, DYAD_COUNT, NETWORK_COUNT,
};

/// Tolerance on `sum(p) == 1` for a valid probability vector.
pub const SIMPLEX_SUM_TOLERANCE: f64 = 1e-10;
/// Interior floor below which penalty gradients are not evaluated in
/// probability coordinates (the Hellinger gradient is singular at zero).
pub const INTERIOR_EPSILON: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LikelihoodError {
    #[error("probability vector entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },
    #[error("probability vector sums to {sum}, not 1 within {SIMPLEX_SUM_TOLERANCE}")]
    NotNormalized { sum: f64 },
    #[error("probability vector entries must be finite")]
    NonFinite,
    #[error("cannot normalize a vector with non-positive total mass {sum}")]
    DegenerateWeights { sum: f64 },
    #[error("gradient requires an interior point: p[{index}] = {value} < {INTERIOR_EPSILON}")]
    NotInterior { index: usize, value: f64 },
    #[error("penalty weight lambda must be finite and nonnegative, got {0}")]
    InvalidLambda(f64),
    #[error("observation list is empty")]
    EmptyData,
}

/// A point on the 64-simplex: the probability of each contact network.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector([f64; NETWORK_COUNT]);

impl ProbabilityVector {
    pub fn new(values: [f64; NETWORK_COUNT]) -> Result<Self, LikelihoodError> {
        let mut sum = 0.0;
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(LikelihoodError::NonFinite);
            }
            if value < 0.0 {
                return Err(LikelihoodError::NegativeEntry { index, value });
            }
            sum += value;
        }
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOLERANCE {
            return Err(LikelihoodError::NotNormalized { sum });
        }
        Ok(ProbabilityVector(values))
    }

    /// Normalize nonnegative weights to a probability vector.
    pub fn from_weights(weights: &[f64; NETWORK_COUNT]) -> Result<Self, LikelihoodError> {
        let mut sum = 0.0;
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(LikelihoodError::NonFinite);
            }
            if value < 0.0 {
                return Err(LikelihoodError::NegativeEntry { index, value });
            }
            sum += value;
        }
        if sum <= 0.0 {
            return Err(LikelihoodError::DegenerateWeights { sum });
        }
        let mut out = *weights;
        for v in &mut out {
            *v /= sum;
        }
        Ok(ProbabilityVector(out))
    }

    pub fn uniform() -> Self {
        ProbabilityVector([1.0 / NETWORK_COUNT as f64; NETWORK_COUNT])
    }

    pub fn point_mass(k: NetworkIndex) -> Self {
        let mut p = [0.0; NETWORK_COUNT];
        p[k.value() as usize] = 1.0;
        ProbabilityVector(p)
    }

    pub fn get(&self, k: NetworkIndex) -> f64 {
        self.0[k.value() as usize]
    }

    pub fn as_array(&self) -> &[f64; NETWORK_COUNT] {
        &self.0
    }

    pub fn into_array(self) -> [f64; NETWORK_COUNT] {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    pub fn linf_distance(&self, other: &ProbabilityVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Clip entries up to `eps` and renormalize; the result is strictly
    /// positive everywhere.
    pub fn clipped_interior(&self, eps: f64) -> ProbabilityVector {
        let mut w = self.0;
        for v in &mut w {
            if *v < eps {
                *v = eps;
            }
        }
        ProbabilityVector::from_weights(&w).expect("clipped weights are positive")
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Which smoothing penalty a fit uses. Carries no data; see [`Penalty`] for
/// the instantiated functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyChoice {
    Independence,
    Adjacency,
    Exchangeability,
}

impl PenaltyChoice {
    pub const ALL: [PenaltyChoice; 3] = [
        PenaltyChoice::Independence,
        PenaltyChoice::Adjacency,
        PenaltyChoice::Exchangeability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PenaltyChoice::Independence => "independence",
            PenaltyChoice::Adjacency => "adjacency",
            PenaltyChoice::Exchangeability => "exchangeability",
        }
    }
}

impl std::fmt::Display for PenaltyChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// An instantiated penalty functional.
#[derive(Debug, Clone)]
pub enum Penalty {
    /// Squared Hellinger distance to a target distribution, normally the
    /// product distribution of the fitted dyad-independence model.
    Independence { target: ProbabilityVector },
    /// Sum of squared probability differences over pairs of networks that
    /// differ on a single dyad.
    Adjacency,
    /// Sum of squared probability differences over pairs of networks in the
    /// same exchangeability orbit.
    Exchangeability,
}

impl Penalty {
    pub fn choice(&self) -> PenaltyChoice {
        match self {
            Penalty::Independence { .. } => PenaltyChoice::Independence,
            Penalty::Adjacency => PenaltyChoice::Adjacency,
            Penalty::Exchangeability => PenaltyChoice::Exchangeability,
        }
    }
}

static ADJACENT_PAIRS: LazyLock<Vec<(usize, usize)>> = LazyLock::new(|| {
    let mut pairs = Vec::new();
    for k in 0..NETWORK_COUNT {
        for j in 0..DYAD_COUNT {
            let m = k ^ (1 << j);
            if m > k {
                pairs.push((k, m));
            }
        }
    }
    pairs
});

static EXCHANGEABLE_PAIRS: LazyLock<Vec<(usize, usize)>> = LazyLock::new(|| {
    let mut pairs = Vec::new();
    for orbit in exchangeability_orbits() {
        for (i, &a) in orbit.iter().enumerate() {
            for &b in &orbit[i + 1..] {
                pairs.push((a.value() as usize, b.value() as usize));
            }
        }
    }
    pairs
});

/// Unordered pairs of networks at Hamming distance one (192 pairs). Each
/// pair appears once; a doubled-sum convention would only rescale lambda.
pub fn adjacent_pairs() -> &'static [(usize, usize)] {
    &ADJACENT_PAIRS
}

/// Unordered pairs of distinct networks lying in the same exchangeability
/// orbit. Each pair appears once.
pub fn exchangeable_pairs() -> &'static [(usize, usize)] {
    &EXCHANGEABLE_PAIRS
}

/// Observed-data log-likelihood: for each observation, the log of the total
/// probability of the networks consistent with it.
///
/// Returns `f64::NEG_INFINITY` when some observation's consistency set
/// carries zero mass; this sentinel is how cross-validation scores held-out
/// points outside a degenerate estimate's support.
pub fn log_likelihood(p: &ProbabilityVector, data: &[PartialObservation]) -> f64 {
    let mut total = 0.0;
    for obs in data {
        let mut mass = 0.0;
        for k in obs.consistent_indices() {
            mass += p.get(k);
        }
        if mass <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += mass.ln();
    }
    total
}

/// Squared Hellinger distance `(1/2) * sum_k (sqrt(q_k) - sqrt(p_k))^2`.
/// Symmetric and bounded in `[0, 1]`.
pub fn hellinger_penalty(p: &ProbabilityVector, q: &ProbabilityVector) -> f64 {
    let mut acc = 0.0;
    for (a, b) in p.iter().zip(q.iter()) {
        let d = b.sqrt() - a.sqrt();
        acc += d * d;
    }
    0.5 * acc
}

/// Sum of `(p_i - p_j)^2` over unordered pairs of networks differing on a
/// single dyad.
pub fn adjacency_penalty(p: &ProbabilityVector) -> f64 {
    let arr = p.as_array();
    adjacent_pairs()
        .iter()
        .map(|&(i, j)| {
            let d = arr[i] - arr[j];
            d * d
        })
        .sum()
}

/// Sum of `(p_i - p_j)^2` over unordered pairs of distinct networks in the
/// same exchangeability orbit.
pub fn exchangeability_penalty(p: &ProbabilityVector) -> f64 {
    let arr = p.as_array();
    exchangeable_pairs()
        .iter()
        .map(|&(i, j)| {
            let d = arr[i] - arr[j];
            d * d
        })
        .sum()
}

/// A consistency set shared by one or more observations, with multiplicity.
#[derive(Debug, Clone)]
struct ConsistencyGroup {
    indices: [usize; 8],
    count: f64,
}

/// The penalized objective `PL(p, lambda) = logL(p) - lambda * penalty(p)`,
/// with the data's consistency structure precomputed.
#[derive(Debug, Clone)]
pub struct PenalizedObjective {
    observations: Vec<PartialObservation>,
    groups: Vec<ConsistencyGroup>,
    lambda: f64,
    penalty: Penalty,
    /// Cached square roots of the independence target, if any.
    sqrt_target: Option<[f64; NETWORK_COUNT]>,
}

impl PenalizedObjective {
    pub fn new(
        data: &[PartialObservation],
        lambda: f64,
        penalty: Penalty,
    ) -> Result<Self, LikelihoodError> {
        if data.is_empty() {
            return Err(LikelihoodError::EmptyData);
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(LikelihoodError::InvalidLambda(lambda));
        }
        let mut by_mask: Vec<(u64, [usize; 8], f64)> = Vec::new();
        for obs in data {
            let mask = obs.consistency_mask();
            match by_mask.iter_mut().find(|(m, _, _)| *m == mask) {
                Some((_, _, count)) => *count += 1.0,
                None => {
                    let mut indices = [0usize; 8];
                    for (slot, k) in indices.iter_mut().zip(obs.consistent_indices()) {
                        *slot = k.value() as usize;
                    }
                    by_mask.push((mask, indices, 1.0));
                }
            }
        }
        by_mask.sort_by_key(|&(mask, _, _)| mask);
        let groups = by_mask
            .into_iter()
            .map(|(_, indices, count)| ConsistencyGroup { indices, count })
            .collect();
        let sqrt_target = match &penalty {
            Penalty::Independence { target } => {
                let mut s = [0.0; NETWORK_COUNT];
                for (v, q) in s.iter_mut().zip(target.iter()) {
                    *v = q.sqrt();
                }
                Some(s)
            }
            _ => None,
        };
        Ok(PenalizedObjective {
            observations: data.to_vec(),
            groups,
            lambda,
            penalty,
            sqrt_target,
        })
    }

    /// Same data and penalty, different smoothing weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self, LikelihoodError> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(LikelihoodError::InvalidLambda(lambda));
        }
        let mut out = self.clone();
        out.lambda = lambda;
        Ok(out)
    }

    pub fn observations(&self) -> &[PartialObservation] {
        &self.observations
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    /// Objective value at a point of the simplex.
    pub fn value(&self, p: &ProbabilityVector) -> f64 {
        self.value_raw(p.as_array())
    }

    /// Objective value at an arbitrary nonnegative coordinate vector.
    ///
    /// The objective extends smoothly off the simplex; optimizer internals
    /// and finite-difference checks evaluate it on unnormalized points.
    pub fn value_raw(&self, p: &[f64; NETWORK_COUNT]) -> f64 {
        let mut loglik = 0.0;
        for g in &self.groups {
            let mass: f64 = g.indices.iter().map(|&k| p[k]).sum();
            if mass <= 0.0 {
                return f64::NEG_INFINITY;
            }
            loglik += g.count * mass.ln();
        }
        loglik - self.lambda * self.penalty_value(p)
    }

    fn penalty_value(&self, p: &[f64; NETWORK_COUNT]) -> f64 {
        match &self.penalty {
            Penalty::Independence { .. } => {
                let sq = self.sqrt_target.as_ref().expect("cached for independence");
                let mut acc = 0.0;
                for (&q, &v) in sq.iter().zip(p.iter()) {
                    let d = q - v.sqrt();
                    acc += d * d;
                }
                0.5 * acc
            }
            Penalty::Adjacency => adjacent_pairs()
                .iter()
                .map(|&(i, j)| {
                    let d = p[i] - p[j];
                    d * d
                })
                .sum(),
            Penalty::Exchangeability => exchangeable_pairs()
                .iter()
                .map(|&(i, j)| {
                    let d = p[i] - p[j];
                    d * d
                })
                .sum(),
        }
    }

    /// Gradient of the objective in probability coordinates.
    ///
    /// Requires a strictly interior point (`p_k >= 1e-10` everywhere): the
    /// Hellinger term's derivative is singular at zero.
    pub fn gradient(
        &self,
        p: &ProbabilityVector,
    ) -> Result<[f64; NETWORK_COUNT], LikelihoodError> {
        let arr = p.as_array();
        for (index, &value) in arr.iter().enumerate() {
            if value < INTERIOR_EPSILON {
                return Err(LikelihoodError::NotInterior { index, value });
            }
        }
        self.gradient_floored(arr)
            .ok_or(LikelihoodError::DegenerateWeights { sum: 0.0 })
    }

    /// Probability-space gradient with entries floored at the smallest
    /// positive double instead of the interior check, so optimality can be
    /// diagnosed arbitrarily close to the boundary. `None` when some
    /// consistency set carries zero mass.
    pub(crate) fn gradient_floored(
        &self,
        arr: &[f64; NETWORK_COUNT],
    ) -> Option<[f64; NETWORK_COUNT]> {
        let mut grad = [0.0; NETWORK_COUNT];
        for g in &self.groups {
            let mass: f64 = g.indices.iter().map(|&k| arr[k]).sum();
            if mass <= 0.0 {
                return None;
            }
            let w = g.count / mass;
            for &k in &g.indices {
                grad[k] += w;
            }
        }
        match &self.penalty {
            Penalty::Independence { .. } => {
                let sq = self.sqrt_target.as_ref().expect("cached for independence");
                for k in 0..NETWORK_COUNT {
                    let sp = arr[k].max(f64::MIN_POSITIVE).sqrt();
                    grad[k] += self.lambda * (sq[k] - sp) / (2.0 * sp);
                }
            }
            Penalty::Adjacency => {
                for &(i, j) in adjacent_pairs() {
                    let d = 2.0 * self.lambda * (arr[i] - arr[j]);
                    grad[i] -= d;
                    grad[j] += d;
                }
            }
            Penalty::Exchangeability => {
                for &(i, j) in exchangeable_pairs() {
                    let d = 2.0 * self.lambda * (arr[i] - arr[j]);
                    grad[i] -= d;
                    grad[j] += d;
                }
            }
        }
        Some(grad)
    }

    /// `h_k = p_k * dPL/dp_k`, computed in a form with no singularity as
    /// `p_k -> 0`. This is the building block of the gradient in softmax
    /// coordinates: `dPL/dtheta_j = h_j - p_j * sum_k h_k`.
    ///
    /// Returns `None` when some consistency set carries zero mass (where the
    /// objective itself is negative infinity).
    pub(crate) fn gradient_scaled(&self, p: &[f64; NETWORK_COUNT]) -> Option<[f64; NETWORK_COUNT]> {
        let mut h = [0.0; NETWORK_COUNT];
        for g in &self.groups {
            let mass: f64 = g.indices.iter().map(|&k| p[k]).sum();
            if mass <= 0.0 {
                return None;
            }
            let w = g.count / mass;
            for &k in &g.indices {
                h[k] += w * p[k];
            }
        }
        match &self.penalty {
            Penalty::Independence { .. } => {
                let sq = self.sqrt_target.as_ref().expect("cached for independence");
                for k in 0..NETWORK_COUNT {
                    // p * (sqrt(q) - sqrt(p)) / (2 sqrt(p)) = (sqrt(q p) - p) / 2
                    h[k] += self.lambda * ((sq[k] * p[k].sqrt()) - p[k]) / 2.0;
                }
            }
            Penalty::Adjacency => {
                for &(i, j) in adjacent_pairs() {
                    let d = 2.0 * self.lambda * (p[i] - p[j]);
                    h[i] -= d * p[i];
                    h[j] += d * p[j];
                }
            }
            Penalty::Exchangeability => {
                for &(i, j) in exchangeable_pairs() {
                    let d = 2.0 * self.lambda * (p[i] - p[j]);
                    h[i] -= d * p[i];
                    h[j] += d * p[j];
                }
            }
        }
        Some(h)
    }
}
