//! Maximization of the penalized objective over the 64-simplex.
//!
//! The simplex constraint is eliminated exactly by a log-ratio (softmax)
//! reparameterization with network 0 as the anchor: 63 unconstrained
//! coordinates map bijectively onto the open simplex, so iterates stay
//! strictly interior and the Hellinger term stays differentiable. Ascent is
//! quasi-Newton (BFGS with a strong-Wolfe line search), restarted from
//! several initial points because the unpenalized likelihood is
//! non-identifiable and has plateaus.
//!
//! The observed information in the 63 free coordinates doubles as the
//! uncertainty source (inverted and delta-method-transformed to per-network
//! standard errors when positive definite) and as the identifiability
//! diagnostic (its numerical rank).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::likelihood::{
    LikelihoodError, Penalty, PenaltyChoice, PenalizedObjective, ProbabilityVector,
    INTERIOR_EPSILON,
};
use crate::network::NETWORK_COUNT;

/// Number of free coordinates on the 64-simplex.
pub const THETA_DIM: usize = NETWORK_COUNT - 1;

/// Step for central-difference second derivatives of the objective.
const FISHER_FD_STEP: f64 = 1e-5;
/// Relative eigenvalue / singular-value cutoff for invertibility and rank.
const EIGENVALUE_RATIO: f64 = 1e-8;
/// Simplex-space optimality slack, relative to the gradient scale. The
/// objective is concave over the simplex for every penalty, so the
/// suboptimality of a point is bounded by its largest positive gradient
/// deviation; this constant bounds the optimality gap of an accepted fit.
const KKT_TOLERANCE: f64 = 5e-9;
/// Maximum revive-and-rerun rounds after the multistart phase.
const POLISH_ROUNDS: usize = 8;
/// Conditional-gradient moves per revive round.
const ESCAPE_STEPS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("objective was not finite at any starting point")]
    NonFiniteObjective,
    #[error("fit did not converge: gradient norm {gradient_norm} exceeds tolerance {tolerance}")]
    NotConverged { gradient_norm: f64, tolerance: f64 },
    #[error("numerical failure while differentiating the objective")]
    NumericalFailure,
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

/// Tolerances and restart policy for [`maximize`]. All fields are
/// overridable from the command line.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Stop when the sup-norm of the gradient in free coordinates drops
    /// below this.
    pub gradient_tolerance: f64,
    /// Stop when the objective improves by no more than this between
    /// iterations.
    pub objective_tolerance: f64,
    pub max_iterations: usize,
    /// Number of starting points (given init, uniform, independence target
    /// when applicable, then random Dirichlet draws).
    pub restarts: usize,
    /// Seed for the random starting points.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            gradient_tolerance: 1e-8,
            objective_tolerance: 1e-12,
            max_iterations: 5000,
            restarts: 5,
            seed: 0,
        }
    }
}

/// Result of maximizing the penalized objective.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub p_hat: ProbabilityVector,
    pub objective_value: f64,
    /// True iff a tolerance criterion stopped the ascent: either the
    /// gradient sup-norm or the objective-change threshold. Large penalty
    /// weights rescale the gradient, so the objective-change criterion is
    /// the one that fires there; a fit that merely ran out of iterations or
    /// stalled in the line search reports `false`.
    pub converged: bool,
    /// Total quasi-Newton iterations across restarts.
    pub iterations: usize,
    /// Sup-norm of the free-coordinate gradient at the returned point.
    pub gradient_norm: f64,
    pub lambda: f64,
    pub penalty: PenaltyChoice,
}

/// Fisher-information uncertainty for a fit.
#[derive(Debug, Clone)]
pub struct UncertaintyResult {
    /// Per-network standard errors; present only when the information
    /// matrix is invertible.
    pub standard_errors: Option<Vec<f64>>,
    /// Numerical rank of the 63x63 observed information.
    pub info_matrix_rank: usize,
    pub invertible: bool,
}

/// Map free coordinates to a point of the open simplex. Coordinate `j`
/// drives network `j + 1`; network 0 is the anchor with implicit logit 0.
pub fn probabilities_from_theta(theta: &DVector<f64>) -> [f64; NETWORK_COUNT] {
    debug_assert_eq!(theta.len(), THETA_DIM);
    let shift = theta.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut w = [0.0; NETWORK_COUNT];
    w[0] = (-shift).exp();
    let mut sum = w[0];
    for (j, &t) in theta.iter().enumerate() {
        let v = (t - shift).exp();
        w[j + 1] = v;
        sum += v;
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Inverse of [`probabilities_from_theta`]. Entries are floored at the
/// smallest positive double so boundary points map to large negative logits
/// instead of infinities.
pub fn theta_from_probabilities(p: &ProbabilityVector) -> DVector<f64> {
    let anchor = p[0].max(f64::MIN_POSITIVE).ln();
    DVector::from_iterator(
        THETA_DIM,
        (1..NETWORK_COUNT).map(|k| p[k].max(f64::MIN_POSITIVE).ln() - anchor),
    )
}

/// Objective state at one point of the free-coordinate space, in
/// minimization form (`f = -PL`).
struct Eval {
    f: f64,
    grad: DVector<f64>,
}

fn eval(spec: &PenalizedObjective, theta: &DVector<f64>) -> Eval {
    let p = probabilities_from_theta(theta);
    let pl = spec.value_raw(&p);
    if !pl.is_finite() {
        return Eval {
            f: f64::INFINITY,
            grad: DVector::zeros(THETA_DIM),
        };
    }
    let h = spec
        .gradient_scaled(&p)
        .expect("finite objective implies positive consistency masses");
    let total: f64 = h.iter().sum();
    let grad = DVector::from_iterator(
        THETA_DIM,
        (1..NETWORK_COUNT).map(|k| -(h[k] - p[k] * total)),
    );
    Eval { f: -pl, grad }
}

struct LineStep {
    theta: DVector<f64>,
    eval: Eval,
}

const WOLFE_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;

/// Strong-Wolfe line search (bracket then zoom). Falls back to the best
/// sufficient-decrease point when the curvature condition cannot be met;
/// the caller's update-skip rule keeps BFGS consistent in that case.
fn wolfe_search(
    spec: &PenalizedObjective,
    theta: &DVector<f64>,
    f0: f64,
    g0: &DVector<f64>,
    dir: &DVector<f64>,
) -> Option<LineStep> {
    let dphi0 = g0.dot(dir);
    if !(dphi0 < 0.0) {
        return None;
    }
    let probe = |alpha: f64| -> (DVector<f64>, Eval, f64) {
        let t = theta + dir * alpha;
        let e = eval(spec, &t);
        let slope = if e.f.is_finite() { e.grad.dot(dir) } else { f64::INFINITY };
        (t, e, slope)
    };

    let mut alpha_prev = 0.0;
    let mut phi_prev = f0;
    let mut step_prev: Option<LineStep> = None;
    let mut alpha = 1.0;
    for i in 0..24 {
        let (t, e, slope) = probe(alpha);
        if e.f > f0 + WOLFE_C1 * alpha * dphi0 || (i > 0 && e.f >= phi_prev) || !e.f.is_finite() {
            return zoom(spec, theta, f0, dphi0, dir, alpha_prev, phi_prev, step_prev, alpha);
        }
        let step = LineStep { theta: t, eval: e };
        if slope.abs() <= WOLFE_C2 * dphi0.abs() {
            return Some(step);
        }
        if slope >= 0.0 {
            return zoom(
                spec,
                theta,
                f0,
                dphi0,
                dir,
                alpha,
                step.eval.f,
                Some(step),
                alpha_prev,
            );
        }
        phi_prev = step.eval.f;
        step_prev = Some(step);
        alpha_prev = alpha;
        alpha *= 2.0;
    }
    step_prev.filter(|s| s.eval.f < f0)
}

/// Shrink the bracket `[alpha_lo, alpha_hi]` (unordered) around a Wolfe
/// point. `alpha_lo` always carries the best sufficient-decrease value seen.
#[allow(clippy::too_many_arguments)]
fn zoom(
    spec: &PenalizedObjective,
    theta: &DVector<f64>,
    f0: f64,
    dphi0: f64,
    dir: &DVector<f64>,
    mut alpha_lo: f64,
    mut phi_lo: f64,
    mut step_lo: Option<LineStep>,
    mut alpha_hi: f64,
) -> Option<LineStep> {
    for _ in 0..50 {
        let alpha = 0.5 * (alpha_lo + alpha_hi);
        if !((alpha - alpha_lo).abs() > 1e-16 * alpha.abs().max(1.0)) {
            break;
        }
        let t = theta + dir * alpha;
        let e = eval(spec, &t);
        if e.f > f0 + WOLFE_C1 * alpha * dphi0 || e.f >= phi_lo || !e.f.is_finite() {
            alpha_hi = alpha;
            continue;
        }
        let slope = e.grad.dot(dir);
        let step = LineStep { theta: t, eval: e };
        if slope.abs() <= WOLFE_C2 * dphi0.abs() {
            return Some(step);
        }
        if slope * (alpha_hi - alpha_lo) >= 0.0 {
            alpha_hi = alpha_lo;
        }
        alpha_lo = alpha;
        phi_lo = step.eval.f;
        step_lo = Some(step);
    }
    step_lo.filter(|s| s.eval.f < f0)
}

struct RunOutcome {
    theta: DVector<f64>,
    f: f64,
    grad_sup: f64,
    iterations: usize,
    converged: bool,
}

fn bfgs_run(spec: &PenalizedObjective, theta0: DVector<f64>, opts: &FitOptions) -> Option<RunOutcome> {
    let mut theta = theta0;
    let mut state = eval(spec, &theta);
    if !state.f.is_finite() {
        return None;
    }
    let mut h_inv: DMatrix<f64> = DMatrix::identity(THETA_DIM, THETA_DIM);
    let mut first_update = true;
    let mut iterations = 0;
    loop {
        let grad_sup = state.grad.amax();
        if grad_sup <= opts.gradient_tolerance || iterations >= opts.max_iterations {
            return Some(RunOutcome {
                theta,
                f: state.f,
                grad_sup,
                iterations,
                converged: grad_sup <= opts.gradient_tolerance,
            });
        }
        let mut dir = -(&h_inv * &state.grad);
        if dir.dot(&state.grad) >= 0.0 {
            h_inv = DMatrix::identity(THETA_DIM, THETA_DIM);
            dir = -state.grad.clone();
        }
        let Some(step) = wolfe_search(spec, &theta, state.f, &state.grad, &dir) else {
            // No improving step exists along the search direction.
            return Some(RunOutcome {
                theta,
                f: state.f,
                grad_sup,
                iterations,
                converged: false,
            });
        };
        iterations += 1;
        let s = &step.theta - &theta;
        let y = &step.eval.grad - &state.grad;
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            if first_update {
                // Scale the initial inverse Hessian to the curvature of the
                // first step before applying the update.
                let scale = sy / y.dot(&y);
                if scale.is_finite() && scale > 0.0 {
                    h_inv = DMatrix::identity(THETA_DIM, THETA_DIM) * scale;
                }
                first_update = false;
            }
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            let rho = 1.0 / sy;
            let hyst = &hy * s.transpose();
            h_inv += (&s * s.transpose()) * (rho * (1.0 + yhy * rho));
            h_inv -= (&hyst + hyst.transpose()) * rho;
        }
        let improvement = state.f - step.eval.f;
        theta = step.theta;
        state = step.eval;
        if improvement.abs() <= opts.objective_tolerance {
            return Some(RunOutcome {
                theta,
                f: state.f,
                grad_sup: state.grad.amax(),
                iterations,
                converged: true,
            });
        }
    }
}

/// Largest positive deviation `g_k - sum_j p_j g_j` of the simplex-space
/// gradient, the coordinate attaining it, and the scale it should be
/// compared against. Moving mass toward the deviating coordinate would
/// improve the objective, so by concavity the deviation bounds the
/// optimality gap. Crushed coordinates have exponentially damped gradients
/// in free coordinates and can look stationary there; this check sees
/// through that.
fn kkt_deviation(
    spec: &PenalizedObjective,
    p: &[f64; NETWORK_COUNT],
) -> Option<(f64, usize, f64)> {
    let grad = spec.gradient_floored(p)?;
    let mean: f64 = p.iter().zip(grad.iter()).map(|(a, b)| a * b).sum();
    let mut max_dev = f64::NEG_INFINITY;
    let mut arg = 0;
    for (k, g) in grad.iter().enumerate() {
        let dev = g - mean;
        if dev > max_dev {
            max_dev = dev;
            arg = k;
        }
    }
    Some((max_dev, arg, 1.0 + mean.abs()))
}

/// Exact line search for the conditional-gradient move
/// `p(gamma) = (1 - gamma) p + gamma e_vertex`: the objective is concave
/// along the segment, so bisect on the directional derivative.
fn conditional_gradient_step(
    spec: &PenalizedObjective,
    p: &[f64; NETWORK_COUNT],
    vertex: usize,
) -> Option<[f64; NETWORK_COUNT]> {
    let point_at = |gamma: f64| {
        let mut q = [0.0; NETWORK_COUNT];
        for (out, &v) in q.iter_mut().zip(p.iter()) {
            *out = (1.0 - gamma) * v;
        }
        q[vertex] += gamma;
        q
    };
    let slope_at = |gamma: f64| -> Option<f64> {
        let q = point_at(gamma);
        let g = spec.gradient_floored(&q)?;
        let mut slope = g[vertex];
        for (gk, &pk) in g.iter().zip(p.iter()) {
            slope -= gk * pk;
        }
        Some(slope)
    };
    if slope_at(0.0)? <= 0.0 {
        return None;
    }
    let mut lo = 0.0;
    let mut hi = 1.0 - 1e-9;
    match slope_at(hi) {
        Some(s) if s >= 0.0 => return Some(point_at(hi)),
        Some(_) => {}
        None => {}
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match slope_at(mid) {
            Some(s) if s > 0.0 => lo = mid,
            _ => hi = mid,
        }
    }
    if lo <= 1e-12 {
        return None;
    }
    Some(point_at(lo))
}

fn dirichlet_start(rng: &mut ChaCha8Rng) -> ProbabilityVector {
    let mut w = [0.0; NETWORK_COUNT];
    for v in &mut w {
        *v = -(1.0 - rng.random::<f64>()).ln();
    }
    ProbabilityVector::from_weights(&w)
        .map(|p| p.clipped_interior(INTERIOR_EPSILON))
        .unwrap_or_else(|_| ProbabilityVector::uniform())
}

/// Maximize the penalized objective, restarting from `opts.restarts`
/// initial points and keeping the best objective.
pub fn maximize(
    spec: &PenalizedObjective,
    init: &ProbabilityVector,
    opts: &FitOptions,
) -> Result<FitResult, OptimError> {
    let restarts = opts.restarts.max(1);
    let mut starts: Vec<ProbabilityVector> = Vec::with_capacity(restarts);
    starts.push(init.clipped_interior(INTERIOR_EPSILON));
    if starts.len() < restarts {
        starts.push(ProbabilityVector::uniform());
    }
    if let Penalty::Independence { target } = spec.penalty() {
        if starts.len() < restarts {
            starts.push(target.clipped_interior(INTERIOR_EPSILON));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while starts.len() < restarts {
        starts.push(dirichlet_start(&mut rng));
    }

    let mut best: Option<RunOutcome> = None;
    let mut total_iterations = 0;
    for start in &starts {
        let theta0 = theta_from_probabilities(start);
        if let Some(run) = bfgs_run(spec, theta0, opts) {
            total_iterations += run.iterations;
            if best.as_ref().is_none_or(|b| run.f < b.f) {
                best = Some(run);
            }
        }
    }
    let mut run = best.ok_or(OptimError::NonFiniteObjective)?;

    // The softmax coordinates damp gradients of near-zero probabilities, so
    // quasi-Newton runs can stall on the wrong face. Check the
    // simplex-space optimality certificate; if it fails, transport mass to
    // the most-deviating vertex with conditional-gradient moves and rerun.
    for _ in 0..POLISH_ROUNDS {
        let mut p = probabilities_from_theta(&run.theta);
        let Some((max_dev, vertex, scale)) = kkt_deviation(spec, &p) else {
            break;
        };
        if max_dev <= KKT_TOLERANCE * scale {
            break;
        }
        let mut vertex = vertex;
        let mut moved = false;
        for _ in 0..ESCAPE_STEPS {
            let Some(next) = conditional_gradient_step(spec, &p, vertex) else {
                break;
            };
            p = next;
            moved = true;
            let Some((dev, arg, sc)) = kkt_deviation(spec, &p) else {
                break;
            };
            if dev <= 0.1 * KKT_TOLERANCE * sc {
                break;
            }
            vertex = arg;
        }
        if !moved {
            break;
        }
        let revived = ProbabilityVector::from_weights(&p).expect("segment point is a distribution");
        match bfgs_run(spec, theta_from_probabilities(&revived), opts) {
            Some(next) => {
                total_iterations += next.iterations;
                if next.f < run.f {
                    run = next;
                } else {
                    break;
                }
            }
            None => break,
        }
    }

    let p_hat = ProbabilityVector::from_weights(&probabilities_from_theta(&run.theta))
        .expect("softmax output is a positive weight vector");
    Ok(FitResult {
        p_hat,
        objective_value: -run.f,
        converged: run.converged,
        iterations: total_iterations,
        gradient_norm: run.grad_sup,
        lambda: spec.lambda(),
        penalty: spec.penalty().choice(),
    })
}

/// Observed information in free coordinates: the negated Hessian of the
/// objective at the fit, from central differences of the analytic gradient.
fn observed_information(
    fit: &FitResult,
    spec: &PenalizedObjective,
) -> Result<DMatrix<f64>, OptimError> {
    let theta = theta_from_probabilities(&fit.p_hat);
    let h = FISHER_FD_STEP;
    let mut info = DMatrix::zeros(THETA_DIM, THETA_DIM);
    for j in 0..THETA_DIM {
        let mut plus = theta.clone();
        plus[j] += h;
        let mut minus = theta.clone();
        minus[j] -= h;
        let ep = eval(spec, &plus);
        let em = eval(spec, &minus);
        if !ep.f.is_finite() || !em.f.is_finite() {
            return Err(OptimError::NumericalFailure);
        }
        // eval gradients are of -PL, so this column is -d(grad PL)/dtheta_j.
        let col = (&ep.grad - &em.grad) / (2.0 * h);
        info.set_column(j, &col);
    }
    let sym = (&info + info.transpose()) * 0.5;
    Ok(sym)
}

/// Standard errors for the fitted probabilities by inverting the observed
/// information and delta-method-transforming to probability coordinates.
/// When the information is not positive definite (the non-identifiable
/// case), reports rank and `invertible = false` instead.
pub fn fisher_standard_errors(
    fit: &FitResult,
    spec: &PenalizedObjective,
) -> Result<UncertaintyResult, OptimError> {
    if !fit.converged {
        return Err(OptimError::NotConverged {
            gradient_norm: fit.gradient_norm,
            tolerance: 0.0,
        });
    }
    let info = observed_information(fit, spec)?;
    let eigen = SymmetricEigen::new(info);
    let max_abs = eigen.eigenvalues.amax();
    let rank = if max_abs > 0.0 {
        eigen
            .eigenvalues
            .iter()
            .filter(|e| e.abs() > EIGENVALUE_RATIO * max_abs)
            .count()
    } else {
        0
    };
    let max_eig = eigen.eigenvalues.max();
    let min_eig = eigen.eigenvalues.min();
    let invertible = max_eig > 0.0 && min_eig > EIGENVALUE_RATIO * max_eig;
    let standard_errors = if invertible {
        let inv_diag = DVector::from_iterator(
            THETA_DIM,
            eigen.eigenvalues.iter().map(|e| 1.0 / e),
        );
        let cov =
            &eigen.eigenvectors * DMatrix::from_diagonal(&inv_diag) * eigen.eigenvectors.transpose();
        let p = fit.p_hat.as_array();
        let mut se = Vec::with_capacity(NETWORK_COUNT);
        for k in 0..NETWORK_COUNT {
            let jac_row = DVector::from_iterator(
                THETA_DIM,
                (1..NETWORK_COUNT).map(|j| p[k] * (f64::from(u8::from(k == j)) - p[j])),
            );
            let var = jac_row.dot(&(&cov * &jac_row));
            se.push(var.max(0.0).sqrt());
        }
        Some(se)
    } else {
        None
    };
    Ok(UncertaintyResult {
        standard_errors,
        info_matrix_rank: rank,
        invertible,
    })
}

/// Numerical rank of the observed information: the number of singular
/// values above `tol` times the largest.
pub fn hessian_rank(
    fit: &FitResult,
    spec: &PenalizedObjective,
    tol: f64,
) -> Result<usize, OptimError> {
    if !fit.converged {
        return Err(OptimError::NotConverged {
            gradient_norm: fit.gradient_norm,
            tolerance: 0.0,
        });
    }
    let info = observed_information(fit, spec)?;
    let sv = info.singular_values();
    let max = sv.max();
    if max <= 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * max).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::independence::{independence_mle, penalty_for};
    use crate::likelihood::log_likelihood;
    use crate::network::{NetworkIndex, PartialObservation, Role};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;

    fn obs(role: Role, bits: [bool; 3]) -> PartialObservation {
        let d = role.incident_dyads();
        PartialObservation::new(role, &[(d[0], bits[0]), (d[1], bits[1]), (d[2], bits[2])])
            .unwrap()
    }

    fn mixed_dataset() -> Vec<PartialObservation> {
        vec![
            obs(Role::YoungerChild, [true, true, true]),
            obs(Role::YoungerChild, [true, true, false]),
            obs(Role::YoungerChild, [false, true, true]),
            obs(Role::OlderChild, [true, true, true]),
            obs(Role::OlderChild, [true, false, true]),
            obs(Role::OlderChild, [false, false, false]),
            obs(Role::FemaleAdult, [true, true, true]),
            obs(Role::FemaleAdult, [true, true, false]),
            obs(Role::FemaleAdult, [false, true, true]),
            obs(Role::MaleAdult, [true, true, true]),
            obs(Role::MaleAdult, [true, false, true]),
            obs(Role::MaleAdult, [true, true, false]),
        ]
    }

    #[test]
    fn theta_probability_round_trip() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let mut w = [0.0; NETWORK_COUNT];
            for v in &mut w {
                *v = rng.random::<f64>() + 1e-6;
            }
            let p = ProbabilityVector::from_weights(&w).unwrap();
            let theta = theta_from_probabilities(&p);
            let back = probabilities_from_theta(&theta);
            for k in 0..NETWORK_COUNT {
                assert!((back[k] - p[k]).abs() <= 1e-12, "k={k}");
            }
        }
    }

    #[test]
    fn all_ones_data_concentrates_on_complete_network() {
        let data: Vec<_> = Role::ALL
            .into_iter()
            .map(|r| obs(r, [true, true, true]))
            .collect();
        let spec = PenalizedObjective::new(&data, 0.0, Penalty::Adjacency).unwrap();
        let fit = maximize(&spec, &ProbabilityVector::uniform(), &FitOptions::default()).unwrap();
        assert!(fit.p_hat.get(NetworkIndex::COMPLETE) >= 1.0 - 1e-6);
        assert!(fit.objective_value > -1e-5);
        assert!(fit.objective_value <= 1e-12);
    }

    #[test]
    fn huge_lambda_converges_to_independence_target() {
        let data = mixed_dataset();
        let penalty = penalty_for(PenaltyChoice::Independence, &data).unwrap();
        let Penalty::Independence { target } = penalty.clone() else {
            unreachable!()
        };
        let spec = PenalizedObjective::new(&data, 1e6, penalty).unwrap();
        let fit = maximize(&spec, &ProbabilityVector::uniform(), &FitOptions::default()).unwrap();
        assert!(
            fit.p_hat.linf_distance(&target) <= 1e-3,
            "distance {}",
            fit.p_hat.linf_distance(&target)
        );
    }

    #[test]
    fn zero_lambda_objective_is_penalty_invariant() {
        let data = mixed_dataset();
        let mut values = Vec::new();
        for choice in PenaltyChoice::ALL {
            let penalty = penalty_for(choice, &data).unwrap();
            let spec = PenalizedObjective::new(&data, 0.0, penalty).unwrap();
            let fit =
                maximize(&spec, &ProbabilityVector::uniform(), &FitOptions::default()).unwrap();
            values.push(fit.objective_value);
        }
        for v in &values[1..] {
            assert_relative_eq!(*v, values[0], epsilon = 1e-7);
        }
    }

    #[test]
    fn objective_dominates_init_and_target() {
        let data = mixed_dataset();
        let penalty = penalty_for(PenaltyChoice::Independence, &data).unwrap();
        let Penalty::Independence { target } = penalty.clone() else {
            unreachable!()
        };
        let spec = PenalizedObjective::new(&data, 7.5, penalty).unwrap();
        let init = ProbabilityVector::uniform();
        let fit = maximize(&spec, &init, &FitOptions::default()).unwrap();
        assert!(fit.objective_value >= spec.value(&init) - 1e-12);
        assert!(fit.objective_value >= spec.value(&target) - 1e-12);
        // p_hat is a valid simplex point.
        let sum: f64 = fit.p_hat.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn fisher_invertible_when_penalty_dominates() {
        let data = mixed_dataset();
        let penalty = penalty_for(PenaltyChoice::Independence, &data).unwrap();
        let spec = PenalizedObjective::new(&data, 1e6, penalty).unwrap();
        let fit = maximize(&spec, &ProbabilityVector::uniform(), &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let unc = fisher_standard_errors(&fit, &spec).unwrap();
        assert!(unc.invertible);
        assert_eq!(unc.info_matrix_rank, THETA_DIM);
        let se = unc.standard_errors.unwrap();
        assert_eq!(se.len(), NETWORK_COUNT);
        assert!(se.iter().all(|s| s.is_finite() && *s >= 0.0));
    }

    #[test]
    fn fisher_not_invertible_on_sparse_unpenalized_fit() {
        // Two observations cannot identify 63 parameters.
        let data = vec![
            obs(Role::YoungerChild, [true, true, true]),
            obs(Role::MaleAdult, [false, true, false]),
        ];
        let spec = PenalizedObjective::new(&data, 0.0, Penalty::Adjacency).unwrap();
        let fit = maximize(&spec, &ProbabilityVector::uniform(), &FitOptions::default()).unwrap();
        assert!(fit.converged, "gradient norm {}", fit.gradient_norm);
        let unc = fisher_standard_errors(&fit, &spec).unwrap();
        assert!(!unc.invertible);
        assert!(unc.standard_errors.is_none());
        assert!(unc.info_matrix_rank < THETA_DIM);
    }

    #[test]
    fn fisher_requires_convergence() {
        let data = mixed_dataset();
        let spec = PenalizedObjective::new(&data, 1.0, Penalty::Adjacency).unwrap();
        let mut fit =
            maximize(&spec, &ProbabilityVector::uniform(), &FitOptions::default()).unwrap();
        fit.converged = false;
        assert!(matches!(
            fisher_standard_errors(&fit, &spec),
            Err(OptimError::NotConverged { .. })
        ));
        assert!(matches!(
            hessian_rank(&fit, &spec, EIGENVALUE_RATIO),
            Err(OptimError::NotConverged { .. })
        ));
    }

    #[test]
    fn standard_errors_shrink_with_replication() {
        // Replicating every observation doubles the information. The
        // penalty weight is held fixed per observation (lambda doubles with
        // the data) so the optimum itself is unchanged.
        let data = mixed_dataset();
        let mut doubled = data.clone();
        doubled.extend(data.iter().cloned());

        let fit_se = |d: &[PartialObservation], lambda: f64| {
            let penalty = penalty_for(PenaltyChoice::Independence, d).unwrap();
            let spec = PenalizedObjective::new(d, lambda, penalty).unwrap();
            let fit =
                maximize(&spec, &ProbabilityVector::uniform(), &FitOptions::default()).unwrap();
            assert!(fit.converged);
            fisher_standard_errors(&fit, &spec)
                .unwrap()
                .standard_errors
                .unwrap()
        };
        let se1 = fit_se(&data, 2.0);
        let se2 = fit_se(&doubled, 4.0);
        let expected = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in se1.iter().zip(se2.iter()) {
            // Tiny standard errors sit at the numerical noise floor of the
            // finite-difference information; compare only meaningful scales.
            if *a > 1e-6 {
                let ratio = b / a;
                assert!(
                    (ratio - expected).abs() <= 0.15 * expected,
                    "ratio {ratio} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn hessian_rank_detects_single_role_data() {
        let data = vec![
            obs(Role::YoungerChild, [true, true, true]),
            obs(Role::YoungerChild, [true, false, true]),
            obs(Role::YoungerChild, [false, true, false]),
            obs(Role::YoungerChild, [false, false, false]),
        ];
        let spec = PenalizedObjective::new(&data, 0.0, Penalty::Adjacency).unwrap();
        let fit = maximize(&spec, &ProbabilityVector::uniform(), &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let rank_unpenalized = hessian_rank(&fit, &spec, EIGENVALUE_RATIO).unwrap();
        assert!(rank_unpenalized < THETA_DIM);

        let data = mixed_dataset();
        let penalty = penalty_for(PenaltyChoice::Independence, &data).unwrap();
        let spec = PenalizedObjective::new(&data, 1e6, penalty).unwrap();
        let fit = maximize(&spec, &ProbabilityVector::uniform(), &FitOptions::default()).unwrap();
        let rank_penalized = hessian_rank(&fit, &spec, EIGENVALUE_RATIO).unwrap();
        assert_eq!(rank_penalized, THETA_DIM);
        assert!(rank_unpenalized <= rank_penalized);
    }

    #[test]
    fn maximize_beats_uniform_log_likelihood() {
        let data = mixed_dataset();
        let spec = PenalizedObjective::new(&data, 0.0, Penalty::Exchangeability).unwrap();
        let fit = maximize(&spec, &ProbabilityVector::uniform(), &FitOptions::default()).unwrap();
        let uniform_ll = log_likelihood(&ProbabilityVector::uniform(), &data);
        assert!(fit.objective_value > uniform_ll);
        // The independence product is always a feasible point, so the
        // nonparametric optimum dominates it too.
        let indep = independence_mle(&data).unwrap().distribution();
        assert!(fit.objective_value >= log_likelihood(&indep, &data) - 1e-9);
    }
}
