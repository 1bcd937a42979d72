//! Dyad-independence baseline: per-dyad binomial MLEs, the induced product
//! distribution over the 64 networks, and conservative confidence intervals
//! built from exact (Clopper-Pearson) binomial intervals.
//!
//! Some dyads can have 100% observed contact, so Wald or score intervals are
//! unusable and the bootstrap would collapse; the exact construction handles
//! those boundaries.

use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

use crate::likelihood::{Penalty, PenaltyChoice, ProbabilityVector};
use crate::network::{Dyad, DyadVector, NetworkIndex, PartialObservation, DYAD_COUNT, NETWORK_COUNT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndependenceError {
    #[error("dyad {0} was never observed; the contact probability for this composition cannot be estimated")]
    UnobservedDyad(Dyad),
    #[error("invalid counts: successes {successes} out of trials {trials}")]
    InvalidCounts { successes: u64, trials: u64 },
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
    #[error("dyad probability out of [0, 1]: {0}")]
    InvalidProbability(f64),
    #[error("crossed bounds for dyad {index}: low {low} > high {high}")]
    CrossedBounds { index: usize, low: f64, high: f64 },
    #[error("no observations provided")]
    EmptyData,
}

/// Per-dyad contact probabilities with the counts they were estimated from.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadProbabilities {
    eta: [f64; DYAD_COUNT],
    counts: [(u64, u64); DYAD_COUNT],
}

impl DyadProbabilities {
    pub fn eta(&self) -> &[f64; DYAD_COUNT] {
        &self.eta
    }

    pub fn eta_for(&self, d: Dyad) -> f64 {
        self.eta[d.index()]
    }

    /// (successes, trials) for a dyad.
    pub fn counts_for(&self, d: Dyad) -> (u64, u64) {
        self.counts[d.index()]
    }

    /// The induced product distribution over all networks.
    pub fn distribution(&self) -> ProbabilityVector {
        product_distribution(&self.eta).expect("fitted eta lies in [0,1]")
    }

    /// Exact binomial interval for each dyad probability.
    pub fn dyad_intervals(
        &self,
        level: f64,
    ) -> Result<([f64; DYAD_COUNT], [f64; DYAD_COUNT]), IndependenceError> {
        let mut low = [0.0; DYAD_COUNT];
        let mut high = [0.0; DYAD_COUNT];
        for d in Dyad::ALL {
            let (s, t) = self.counts[d.index()];
            let (lo, hi) = exact_binomial_ci(s, t, level)?;
            low[d.index()] = lo;
            high[d.index()] = hi;
        }
        Ok((low, high))
    }
}

/// Per-dyad binomial MLE: the fraction of reports on each dyad that were
/// contacts. Every dyad must appear in at least one report.
pub fn independence_mle(
    data: &[PartialObservation],
) -> Result<DyadProbabilities, IndependenceError> {
    if data.is_empty() {
        return Err(IndependenceError::EmptyData);
    }
    let mut counts = [(0u64, 0u64); DYAD_COUNT];
    for obs in data {
        for &(d, v) in obs.reports() {
            let c = &mut counts[d.index()];
            c.1 += 1;
            if v {
                c.0 += 1;
            }
        }
    }
    let mut eta = [0.0; DYAD_COUNT];
    for d in Dyad::ALL {
        let (s, t) = counts[d.index()];
        if t == 0 {
            return Err(IndependenceError::UnobservedDyad(d));
        }
        eta[d.index()] = s as f64 / t as f64;
    }
    Ok(DyadProbabilities { eta, counts })
}

/// Product distribution over networks:
/// `p_k = prod_j eta_j^{z_j} (1 - eta_j)^{1 - z_j}` for `z` the dyad vector
/// of network `k`.
pub fn product_distribution(
    eta: &[f64; DYAD_COUNT],
) -> Result<ProbabilityVector, IndependenceError> {
    for &e in eta {
        if !(0.0..=1.0).contains(&e) {
            return Err(IndependenceError::InvalidProbability(e));
        }
    }
    let mut p = [0.0; NETWORK_COUNT];
    for k in NetworkIndex::all() {
        let mut prob = 1.0;
        for d in Dyad::ALL {
            prob *= if k.bit(d) {
                eta[d.index()]
            } else {
                1.0 - eta[d.index()]
            };
        }
        p[k.value() as usize] = prob;
    }
    Ok(ProbabilityVector::new(p).expect("product of binomials is a distribution"))
}

/// Clopper-Pearson exact binomial confidence interval.
///
/// `low = BetaQuantile(alpha/2; s, t-s+1)` with `low = 0` when `s = 0`, and
/// `high = BetaQuantile(1-alpha/2; s+1, t-s)` with `high = 1` when `s = t`.
pub fn exact_binomial_ci(
    successes: u64,
    trials: u64,
    level: f64,
) -> Result<(f64, f64), IndependenceError> {
    if trials == 0 || successes > trials {
        return Err(IndependenceError::InvalidCounts { successes, trials });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(IndependenceError::InvalidLevel(level));
    }
    let alpha = 1.0 - level;
    let s = successes as f64;
    let t = trials as f64;
    let low = if successes == 0 {
        0.0
    } else {
        Beta::new(s, t - s + 1.0)
            .expect("positive shape parameters")
            .inverse_cdf(alpha / 2.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        Beta::new(s + 1.0, t - s)
            .expect("positive shape parameters")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    Ok((low, high))
}

/// Conservative interval for one network's probability from per-dyad bounds:
/// the product's extremes over the per-dyad boxes.
pub fn conservative_network_ci(
    eta_low: &[f64; DYAD_COUNT],
    eta_high: &[f64; DYAD_COUNT],
    z: &DyadVector,
) -> Result<(f64, f64), IndependenceError> {
    for (index, (&lo, &hi)) in eta_low.iter().zip(eta_high.iter()).enumerate() {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
            return Err(IndependenceError::InvalidProbability(if lo < 0.0 || lo > 1.0 {
                lo
            } else {
                hi
            }));
        }
        if lo > hi {
            return Err(IndependenceError::CrossedBounds {
                index,
                low: lo,
                high: hi,
            });
        }
    }
    let mut low = 1.0;
    let mut high = 1.0;
    for d in Dyad::ALL {
        let j = d.index();
        if z.bit(d) {
            low *= eta_low[j];
            high *= eta_high[j];
        } else {
            low *= 1.0 - eta_high[j];
            high *= 1.0 - eta_low[j];
        }
    }
    Ok((low, high))
}

/// (low, high) bounds for every network's probability.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    low: [f64; NETWORK_COUNT],
    high: [f64; NETWORK_COUNT],
}

impl IntervalVector {
    /// Conservative intervals across all 64 networks.
    pub fn conservative(
        eta_low: &[f64; DYAD_COUNT],
        eta_high: &[f64; DYAD_COUNT],
    ) -> Result<Self, IndependenceError> {
        let mut low = [0.0; NETWORK_COUNT];
        let mut high = [0.0; NETWORK_COUNT];
        for k in NetworkIndex::all() {
            let (lo, hi) = conservative_network_ci(eta_low, eta_high, &k.to_vector())?;
            low[k.value() as usize] = lo;
            high[k.value() as usize] = hi;
        }
        Ok(IntervalVector { low, high })
    }

    pub fn low(&self) -> &[f64; NETWORK_COUNT] {
        &self.low
    }

    pub fn high(&self) -> &[f64; NETWORK_COUNT] {
        &self.high
    }

    pub fn get(&self, k: NetworkIndex) -> (f64, f64) {
        (self.low[k.value() as usize], self.high[k.value() as usize])
    }
}

/// Instantiate the penalty functional for a data set. The independence
/// penalty's target is the product distribution of the MLE fitted to exactly
/// this data, so callers refitting on folds or resamples get a fresh target.
pub fn penalty_for(
    choice: PenaltyChoice,
    data: &[PartialObservation],
) -> Result<Penalty, IndependenceError> {
    match choice {
        PenaltyChoice::Independence => {
            let mle = independence_mle(data)?;
            Ok(Penalty::Independence {
                target: mle.distribution(),
            })
        }
        PenaltyChoice::Adjacency => Ok(Penalty::Adjacency),
        PenaltyChoice::Exchangeability => Ok(Penalty::Exchangeability),
    }
}
