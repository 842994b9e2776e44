//! Spectral objects of a branching MAP.
//!
//! The central object is the matrix exponent
//!
//! ```text
//! M(theta) = diag(phi_i(theta)) + Q .* G(theta) + diag(beta_i (m_i - 1))
//! ```
//!
//! whose exponential `exp(t M(theta))` is the exponentially weighted
//! first-moment semigroup of the particle system. Its Perron-Frobenius
//! eigenvalue `lambda(theta)` drives everything downstream: the additive and
//! derivative martingales, the critical parameter `theta*` solving
//! `lambda(theta) = theta lambda'(theta)`, the front speed
//! `lambda(theta*)/theta*`, and the spine tilt.
//!
//! The eigenpair is computed by power iteration on the shifted matrix
//! `M + cI`, `c = max_i |M_ii| + 1`, which is non-negative, irreducible and
//! aperiodic; no external eigensolver is involved. `lambda'` uses the exact
//! eigenvector identity `lambda' = Y^T M'(theta) V` rather than differencing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::linalg::matrix_exp;
use crate::linalg::{solve_linear, LinalgError, SquareMat};
use crate::model::{generating_fn, ModelError, ModelSpec};
use crate::real::Real;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("off-diagonal entry ({i},{j}) is negative; not an intensity-like matrix")]
    NegativeOffDiagonal { i: usize, j: usize },
    #[error("matrix support graph is reducible")]
    Reducible,
    #[error("power iteration did not reach tolerance after {0} iterations")]
    PowerIterationStalled(usize),
    #[error("lambda(0) = {lambda0} <= 0: mean population growth is not supercritical")]
    NotSupercritical { lambda0: f64 },
    #[error("lambda(theta)/theta has no interior minimum: no sign change of theta*lambda'(theta)-lambda(theta) on the search grid; the infimum sits at a boundary")]
    ThetaStarAtBoundary,
    #[error("extinction fixed point did not converge after {0} iterations")]
    ExtinctionStalled(usize),
    #[error("theta = {0} outside (0, inf): derivative quantities need theta > 0")]
    ThetaNotPositive(f64),
}

/// Tolerances and iteration caps. All thresholds are part of the public
/// contract; defaults are tuned for `f64` and should be relaxed for `f32`.
#[derive(Debug, Clone)]
pub struct SpectralOptions<F> {
    /// Relative eigenvector-residual tolerance for power iteration.
    pub power_tol: F,
    pub power_max_iter: usize,
    /// Tolerance on `|theta lambda'(theta) - lambda(theta)|`, relative to
    /// `max(1, |lambda|)`, in the `theta*` root solve.
    pub theta_star_tol: F,
    /// Sup-norm tolerance of the extinction fixed-point iteration.
    pub extinction_tol: F,
    pub extinction_max_iter: usize,
    /// Step factor for the centred difference used for `V'(theta)`:
    /// `h = vprime_step * max(1, theta)`.
    pub vprime_step: F,
    /// Half-width of the relative window around `theta*` classified as
    /// critical.
    pub critical_window: F,
}

impl<F: Real> Default for SpectralOptions<F> {
    fn default() -> Self {
        Self {
            power_tol: F::lit(1e-13),
            power_max_iter: 100_000,
            theta_star_tol: F::lit(1e-10),
            extinction_tol: F::lit(1e-12),
            extinction_max_iter: 1_000_000,
            vprime_step: F::lit(1e-5),
            critical_window: F::lit(1e-9),
        }
    }
}

fn ensure_valid<F: Real>(model: &ModelSpec<F>) -> Result<(), SpectralError> {
    let violations = model.validate();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ModelError::Invalid(violations).into())
    }
}

/// `M(theta)`: diagonal Laplace exponents plus entrywise `Q .* G(theta)`
/// plus the diagonal mean-offspring drift.
pub fn matrix_exponent<F: Real>(
    model: &ModelSpec<F>,
    theta: F,
) -> Result<SquareMat<F>, SpectralError> {
    ensure_valid(model)?;
    let d = model.d();
    let g = model.switch_transform(theta)?;
    let mut m = SquareMat::from_fn(d, |i, j| model.q[(i, j)] * g[(i, j)]);
    for i in 0..d {
        let phi = model.types[i].motion.laplace_exponent(theta)?;
        let beta = model.branch_rate(i);
        let mean = model.offspring_mean(i)?;
        m[(i, i)] += phi + beta * (mean - F::one());
    }
    Ok(m)
}

/// Entrywise derivative `M'(theta)`.
pub fn matrix_exponent_prime<F: Real>(
    model: &ModelSpec<F>,
    theta: F,
) -> Result<SquareMat<F>, SpectralError> {
    ensure_valid(model)?;
    let d = model.d();
    let gp = model.switch_transform_prime(theta)?;
    let mut m = SquareMat::from_fn(d, |i, j| model.q[(i, j)] * gp[(i, j)]);
    for i in 0..d {
        m[(i, i)] += model.types[i].motion.laplace_exponent_prime(theta)?;
    }
    Ok(m)
}

/// Raw Perron-Frobenius pair of a matrix with non-negative off-diagonals and
/// irreducible support, normalized `||v||_1 = 1`, `y.v = 1`.
#[derive(Debug, Clone)]
pub struct PfPair<F> {
    pub lambda: F,
    pub v_right: Vec<F>,
    pub y_left: Vec<F>,
    pub iterations: usize,
}

pub fn pf_eigenpair<F: Real>(
    m: &SquareMat<F>,
    opts: &SpectralOptions<F>,
) -> Result<PfPair<F>, SpectralError> {
    let d = m.dim();
    if d == 1 {
        return Ok(PfPair {
            lambda: m[(0, 0)],
            v_right: vec![F::one()],
            y_left: vec![F::one()],
            iterations: 0,
        });
    }
    for i in 0..d {
        for j in 0..d {
            if i != j && m[(i, j)] < F::zero() {
                return Err(SpectralError::NegativeOffDiagonal { i, j });
            }
        }
    }
    if !m.is_irreducible_support() {
        return Err(SpectralError::Reducible);
    }

    // Shift so the iteration matrix is non-negative with positive diagonal.
    let shift = (0..d).map(|i| m[(i, i)].abs()).fold(F::zero(), F::max) + F::one();
    let mut a = m.clone();
    for i in 0..d {
        a[(i, i)] += shift;
    }
    let norm_a = a.inf_norm();
    let tol = opts.power_tol * norm_a;

    let uniform = F::one() / F::lit(d as f64);
    let mut v = vec![uniform; d];
    let mut y = vec![uniform; d];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.power_max_iter {
        iterations += 1;
        let av = a.matvec(&v);
        let ya = a.vecmat(&y);
        let rho_v: F = av.iter().copied().sum();
        let rho_y: F = ya.iter().copied().sum();
        let res_v = av
            .iter()
            .zip(&v)
            .map(|(&x, &w)| (x - rho_v * w).abs())
            .fold(F::zero(), F::max);
        let res_y = ya
            .iter()
            .zip(&y)
            .map(|(&x, &w)| (x - rho_y * w).abs())
            .fold(F::zero(), F::max);
        for (slot, x) in v.iter_mut().zip(&av) {
            *slot = *x / rho_v;
        }
        for (slot, x) in y.iter_mut().zip(&ya) {
            *slot = *x / rho_y;
        }
        if res_v <= tol && res_y <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SpectralError::PowerIterationStalled(iterations));
    }

    // Two-sided Rayleigh quotient: accurate to the square of the residual.
    let av = a.matvec(&v);
    let yav: F = y.iter().zip(&av).map(|(&a, &b)| a * b).sum();
    let yv: F = y.iter().zip(&v).map(|(&a, &b)| a * b).sum();
    let lambda = yav / yv - shift;
    let y_scale = F::one() / yv;
    let y_left = y.iter().map(|&x| x * y_scale).collect();
    Ok(PfPair { lambda, v_right: v, y_left, iterations })
}

/// Stationary distribution of an irreducible intensity matrix: the unique
/// probability vector with `pi^T q = 0`, obtained from the transposed system
/// with one row replaced by the normalization.
pub fn stationary_distribution<F: Real>(q: &SquareMat<F>) -> Result<Vec<F>, SpectralError> {
    let d = q.dim();
    if d == 1 {
        return Ok(vec![F::one()]);
    }
    if !q.is_irreducible_support() {
        return Err(SpectralError::Reducible);
    }
    let a = SquareMat::from_fn(d, |i, j| if i == d - 1 { F::one() } else { q[(j, i)] });
    let mut b = vec![F::zero(); d];
    b[d - 1] = F::one();
    let pi = solve_linear(&a, &b)?;
    Ok(pi)
}

/// Spectral data of one model at one `theta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(
    serialize = "F: Serialize + Clone",
    deserialize = "F: Deserialize<'de> + Real"
))]
pub struct SpectralReport<F> {
    pub theta: F,
    pub m_matrix: SquareMat<F>,
    pub lambda: F,
    /// Right PF eigenvector, normalized `pi . v = 1`.
    pub v_right: Vec<F>,
    /// Left PF eigenvector, normalized `y . v = 1`.
    pub y_left: Vec<F>,
    pub lambda_prime: F,
    pub pi: Vec<F>,
}

impl<F: Real> SpectralReport<F> {
    pub fn compute(
        model: &ModelSpec<F>,
        theta: F,
        opts: &SpectralOptions<F>,
    ) -> Result<Self, SpectralError> {
        let m = matrix_exponent(model, theta)?;
        let pf = pf_eigenpair(&m, opts)?;
        let pi = stationary_distribution(&model.q)?;

        let pi_v: F = pi.iter().zip(&pf.v_right).map(|(&a, &b)| a * b).sum();
        let v_right: Vec<F> = pf.v_right.iter().map(|&x| x / pi_v).collect();
        let y_v: F = pf.y_left.iter().zip(&v_right).map(|(&a, &b)| a * b).sum();
        let y_left: Vec<F> = pf.y_left.iter().map(|&x| x / y_v).collect();

        let mp = matrix_exponent_prime(model, theta)?;
        let mp_v = mp.matvec(&v_right);
        let lambda_prime: F = y_left.iter().zip(&mp_v).map(|(&a, &b)| a * b).sum();

        Ok(Self { theta, m_matrix: m, lambda: pf.lambda, v_right, y_left, lambda_prime, pi })
    }

    pub fn d(&self) -> usize {
        self.v_right.len()
    }

    /// Speed `lambda(theta)/theta` of the level-`theta` exponential front.
    pub fn wave_speed(&self) -> F {
        self.lambda / self.theta
    }
}

/// PF eigenvalue alone.
pub fn lambda<F: Real>(
    model: &ModelSpec<F>,
    theta: F,
    opts: &SpectralOptions<F>,
) -> Result<F, SpectralError> {
    Ok(pf_eigenpair(&matrix_exponent(model, theta)?, opts)?.lambda)
}

/// `lambda'(theta) = Y^T M'(theta) V` with the report normalization;
/// requires `theta > 0`.
pub fn lambda_prime<F: Real>(
    model: &ModelSpec<F>,
    theta: F,
    opts: &SpectralOptions<F>,
) -> Result<F, SpectralError> {
    if !(theta > F::zero()) {
        return Err(SpectralError::ThetaNotPositive(theta.f64()));
    }
    Ok(SpectralReport::compute(model, theta, opts)?.lambda_prime)
}

/// Centred finite difference of the normalized eigenvector `V(theta)`,
/// needed by the derivative martingale. The normalization `pi . V = 1` uses
/// a `theta`-independent `pi`, so differencing the normalized vector is
/// well posed.
pub fn v_prime<F: Real>(
    model: &ModelSpec<F>,
    theta: F,
    opts: &SpectralOptions<F>,
) -> Result<Vec<F>, SpectralError> {
    if !(theta > F::zero()) {
        return Err(SpectralError::ThetaNotPositive(theta.f64()));
    }
    let h = opts.vprime_step * F::max(F::one(), theta);
    let lo = if theta - h > F::zero() { theta - h } else { theta };
    let hi = theta + h;
    let r_lo = SpectralReport::compute(model, lo, opts)?;
    let r_hi = SpectralReport::compute(model, hi, opts)?;
    let width = hi - lo;
    Ok(r_hi
        .v_right
        .iter()
        .zip(&r_lo.v_right)
        .map(|(&a, &b)| (a - b) / width)
        .collect())
}

/// The critical parameter: unique root of
/// `h(theta) = theta lambda'(theta) - lambda(theta)`.
///
/// `h` is strictly increasing (strict convexity of `lambda`), negative near
/// 0 when `lambda(0) > 0`. The root is bracketed on the geometric grid
/// `theta = 2^k * 1e-3, k = 0..=40` and then bisected. A missing sign change
/// means the infimum of `lambda(theta)/theta` sits at a boundary and is
/// reported as an error, never guessed.
pub fn theta_star<F: Real>(
    model: &ModelSpec<F>,
    opts: &SpectralOptions<F>,
) -> Result<F, SpectralError> {
    ensure_valid(model)?;
    let lambda0 = lambda(model, F::zero(), opts)?;
    if !(lambda0 > F::zero()) {
        return Err(SpectralError::NotSupercritical { lambda0: lambda0.f64() });
    }
    let h = |theta: F| -> Result<F, SpectralError> {
        let report = SpectralReport::compute(model, theta, opts)?;
        Ok(theta * report.lambda_prime - report.lambda)
    };

    let mut lo = F::lit(1e-3);
    let mut h_lo = h(lo)?;
    if h_lo > F::zero() {
        // Root below the first grid point; extend the grid downwards.
        let mut found = false;
        let mut probe = lo;
        for _ in 0..20 {
            probe = probe * F::lit(0.5);
            if h(probe)? <= F::zero() {
                lo = probe;
                h_lo = h(lo)?;
                found = true;
                break;
            }
        }
        if !found {
            return Err(SpectralError::ThetaStarAtBoundary);
        }
    }
    let mut hi = lo;
    let mut bracketed = false;
    for _ in 0..=40 {
        hi = hi * F::lit(2.0);
        if h(hi)? >= F::zero() {
            bracketed = true;
            break;
        }
    }
    if !bracketed {
        return Err(SpectralError::ThetaStarAtBoundary);
    }

    let mut mid = (lo + hi) * F::lit(0.5);
    for _ in 0..200 {
        mid = (lo + hi) * F::lit(0.5);
        let h_mid = h(mid)?;
        let scale = F::max(F::one(), lambda(model, mid, opts)?.abs());
        if h_mid.abs() <= opts.theta_star_tol * scale {
            return Ok(mid);
        }
        if (h_mid > F::zero()) == (h_lo > F::zero()) {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= F::epsilon() * mid {
            break;
        }
    }
    Ok(mid)
}

/// Minimal solution of the extinction system
/// `beta_i (g_i(s_i) - s_i) + (Q s)_i = 0` on `[0,1]^d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtinctionVector<F> {
    pub q: Vec<F>,
    /// True when `lambda(0) <= 0`: extinction is certain and the vector is
    /// all ones without any iteration.
    pub degenerate: bool,
}

/// Fixed-point iteration `s <- F(s)` from `s = 0`, where `F` is the
/// first-event decomposition map
/// `F(s)_i = (beta_i g_i(s_i) + sum_{j != i} q_ij s_j) / (beta_i + q_i)`.
/// The map is monotone, so the iterates increase to the minimal root.
pub fn extinction_vector<F: Real>(
    model: &ModelSpec<F>,
    opts: &SpectralOptions<F>,
) -> Result<ExtinctionVector<F>, SpectralError> {
    ensure_valid(model)?;
    let d = model.d();
    let lambda0 = lambda(model, F::zero(), opts)?;
    if !(lambda0 > F::zero()) {
        return Ok(ExtinctionVector { q: vec![F::one(); d], degenerate: true });
    }
    let coeffs: Vec<Vec<F>> = (0..d)
        .map(|i| model.types[i].offspring.integer_coefficients())
        .collect::<Result<_, _>>()?;
    let beta: Vec<F> = (0..d).map(|i| model.branch_rate(i)).collect();
    let out_rate: Vec<F> = (0..d).map(|i| model.switch_rate(i)).collect();

    let mut s = vec![F::zero(); d];
    let mut next = vec![F::zero(); d];
    for _ in 0..opts.extinction_max_iter {
        let mut delta = F::zero();
        for i in 0..d {
            let total = beta[i] + out_rate[i];
            next[i] = if total > F::zero() {
                let mut acc = beta[i] * generating_fn(&coeffs[i], s[i]);
                for j in 0..d {
                    if j != i {
                        acc = acc + model.q[(i, j)] * s[j];
                    }
                }
                acc / total
            } else {
                // No branching and no switching: the particle is immortal.
                s[i]
            };
            delta = F::max(delta, (next[i] - s[i]).abs());
        }
        std::mem::swap(&mut s, &mut next);
        if delta <= opts.extinction_tol {
            return Ok(ExtinctionVector { q: s, degenerate: false });
        }
    }
    Err(SpectralError::ExtinctionStalled(opts.extinction_max_iter))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Supercritical,
    Critical,
    Subcritical,
}

/// Criticality summary of a model: `theta*`, extinction probabilities and
/// the minimal wave speed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeReport<F> {
    pub theta_star: F,
    pub lambda0: F,
    pub extinction: Vec<F>,
    pub critical_speed: F,
    #[serde(skip)]
    critical_window: F,
}

impl<F: Real> RegimeReport<F> {
    pub fn compute(model: &ModelSpec<F>, opts: &SpectralOptions<F>) -> Result<Self, SpectralError> {
        let lambda0 = lambda(model, F::zero(), opts)?;
        if !(lambda0 > F::zero()) {
            return Err(SpectralError::NotSupercritical { lambda0: lambda0.f64() });
        }
        let theta_star = theta_star(model, opts)?;
        let extinction = extinction_vector(model, opts)?.q;
        let critical_speed = lambda(model, theta_star, opts)? / theta_star;
        Ok(Self {
            theta_star,
            lambda0,
            extinction,
            critical_speed,
            critical_window: opts.critical_window,
        })
    }

    /// Trichotomy by position of `theta` relative to `theta*`; a relative
    /// window around `theta*` counts as critical.
    pub fn regime_of(&self, theta: F) -> Regime {
        if (theta - self.theta_star).abs() <= self.critical_window * self.theta_star {
            Regime::Critical
        } else if theta < self.theta_star {
            Regime::Supercritical
        } else {
            Regime::Subcritical
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiscreteLaw, MotionSpec, TypeSpec};

    fn binary_bbm() -> ModelSpec<f64> {
        ModelSpec::single_type(TypeSpec {
            motion: MotionSpec::brownian(1.0, 0.0),
            branch_rate: 1.0,
            offspring: DiscreteLaw::new(vec![(2.0, 1.0)]).unwrap(),
        })
    }

    fn dying_law() -> DiscreteLaw<f64> {
        DiscreteLaw::new(vec![(0.0, 0.25), (2.0, 0.75)]).unwrap()
    }

    #[test]
    fn stationary_symmetric_two_state() {
        let q = SquareMat::from_rows(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let pi = stationary_distribution(&q).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-14 && (pi[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn stationary_asymmetric_two_state() {
        // pi Q = 0 with Q = [[-2,2],[1,-1]] gives pi = (1/3, 2/3).
        let q = SquareMat::from_rows(vec![vec![-2.0, 2.0], vec![1.0, -1.0]]).unwrap();
        let pi = stationary_distribution(&q).unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((pi[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn stationary_single_state() {
        assert_eq!(stationary_distribution(&SquareMat::<f64>::zeros(1)).unwrap(), vec![1.0]);
    }

    #[test]
    fn pf_of_exchange_matrix() {
        let m = SquareMat::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let pf = pf_eigenpair(&m, &SpectralOptions::default()).unwrap();
        assert!((pf.lambda - 1.0).abs() < 1e-12);
        assert!((pf.v_right[0] - pf.v_right[1]).abs() < 1e-12);
    }

    #[test]
    fn pf_rejects_reducible_and_negative() {
        let opts = SpectralOptions::default();
        let reducible = SquareMat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert!(matches!(pf_eigenpair(&reducible, &opts), Err(SpectralError::Reducible)));
        let negative = SquareMat::from_rows(vec![vec![1.0, -0.5], vec![0.2, 1.0]]).unwrap();
        assert!(matches!(
            pf_eigenpair(&negative, &opts),
            Err(SpectralError::NegativeOffDiagonal { .. })
        ));
    }

    #[test]
    fn matrix_exponent_at_zero_without_branching_is_q() {
        let mk = || TypeSpec {
            motion: MotionSpec::brownian(1.0, 0.3),
            branch_rate: 0.0,
            offspring: DiscreteLaw::point_mass(1.0),
        };
        let q = SquareMat::from_rows(vec![vec![-0.8, 0.8], vec![1.3, -1.3]]).unwrap();
        let model = ModelSpec::without_transitional_jumps(vec![mk(), mk()], q.clone()).unwrap();
        let m = matrix_exponent(&model, 0.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m[(i, j)], q[(i, j)]);
            }
        }
    }

    #[test]
    fn matrix_exponent_two_type_entries() {
        // Diagonals f_i = sigma_i^2 theta^2/2 - a_i theta - q_i + beta_i(m_i-1),
        // off-diagonals the switch rates, when switches carry no jump.
        let types = vec![
            TypeSpec {
                motion: MotionSpec::brownian(1.0, 0.2),
                branch_rate: 1.0,
                offspring: DiscreteLaw::point_mass(2.0),
            },
            TypeSpec {
                motion: MotionSpec::brownian(0.5, -0.1),
                branch_rate: 0.7,
                offspring: dying_law(),
            },
        ];
        let (q1, q2) = (0.8, 1.3);
        let q = SquareMat::from_rows(vec![vec![-q1, q1], vec![q2, -q2]]).unwrap();
        let model = ModelSpec::without_transitional_jumps(types, q).unwrap();
        let theta = 0.9f64;
        let m = matrix_exponent(&model, theta).unwrap();
        let f1 = 0.5 * theta * theta - 0.2 * theta - q1 + 1.0 * (2.0 - 1.0);
        let f2 = 0.25 * theta * theta + 0.1 * theta - q2 + 0.7 * (1.5 - 1.0);
        assert!((m[(0, 0)] - f1).abs() < 1e-14);
        assert!((m[(1, 1)] - f2).abs() < 1e-14);
        assert_eq!(m[(0, 1)], q1);
        assert_eq!(m[(1, 0)], q2);
    }

    #[test]
    fn lambda_prime_of_single_type_brownian() {
        // lambda(theta) = theta^2/2 + 1, so lambda'(1) = 1.
        let model = binary_bbm();
        let lp = lambda_prime(&model, 1.0, &SpectralOptions::default()).unwrap();
        assert!((lp - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_prime_requires_positive_theta() {
        let model = binary_bbm();
        assert!(matches!(
            lambda_prime(&model, 0.0, &SpectralOptions::default()),
            Err(SpectralError::ThetaNotPositive(_))
        ));
    }

    #[test]
    fn theta_star_of_binary_bbm_is_sqrt_two() {
        let model = binary_bbm();
        let opts = SpectralOptions::default();
        let ts = theta_star(&model, &opts).unwrap();
        assert!((ts - std::f64::consts::SQRT_2).abs() < 1e-8, "theta* = {ts}");
        let speed = lambda(&model, ts, &opts).unwrap() / ts;
        assert!((speed - std::f64::consts::SQRT_2).abs() < 1e-8, "speed = {speed}");
    }

    #[test]
    fn theta_star_requires_supercritical_growth() {
        let model = ModelSpec::single_type(TypeSpec {
            motion: MotionSpec::brownian(1.0, 0.0),
            branch_rate: 1.0,
            offspring: DiscreteLaw::point_mass(1.0), // m = 1: lambda(0) = 0
        });
        assert!(matches!(
            theta_star(&model, &SpectralOptions::default()),
            Err(SpectralError::NotSupercritical { .. })
        ));
    }

    #[test]
    fn extinction_single_type_is_one_third() {
        // Root of 1/4 + 3/4 q^2 = q below 1.
        let model = ModelSpec::single_type(TypeSpec {
            motion: MotionSpec::brownian(1.0, 0.0),
            branch_rate: 1.0,
            offspring: dying_law(),
        });
        let ext = extinction_vector(&model, &SpectralOptions::default()).unwrap();
        assert!(!ext.degenerate);
        assert!((ext.q[0] - 1.0 / 3.0).abs() < 1e-10, "q = {}", ext.q[0]);
    }

    #[test]
    fn extinction_two_symmetric_types() {
        let mk = || TypeSpec {
            motion: MotionSpec::brownian(1.0, 0.0),
            branch_rate: 1.0,
            offspring: dying_law(),
        };
        let q = SquareMat::from_rows(vec![vec![-0.7, 0.7], vec![0.7, -0.7]]).unwrap();
        let model = ModelSpec::without_transitional_jumps(vec![mk(), mk()], q).unwrap();
        let ext = extinction_vector(&model, &SpectralOptions::default()).unwrap();
        assert!((ext.q[0] - 1.0 / 3.0).abs() < 1e-10);
        assert!((ext.q[1] - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn extinction_zero_when_no_deaths() {
        let ext = extinction_vector(&binary_bbm(), &SpectralOptions::default()).unwrap();
        assert_eq!(ext.q, vec![0.0]);
    }

    #[test]
    fn regime_trichotomy_for_bbm() {
        let report = RegimeReport::compute(&binary_bbm(), &SpectralOptions::default()).unwrap();
        assert_eq!(report.regime_of(1.0), Regime::Supercritical);
        assert_eq!(report.regime_of(report.theta_star), Regime::Critical);
        assert_eq!(report.regime_of(2.0), Regime::Subcritical);
    }

    #[test]
    fn markov_semigroup_rows_sum_to_one() {
        // With no branching, exp(t M(0)) is a stochastic semigroup.
        let mk = || TypeSpec {
            motion: MotionSpec::brownian(1.0, 0.0),
            branch_rate: 0.0,
            offspring: DiscreteLaw::point_mass(1.0),
        };
        let q = SquareMat::from_rows(vec![
            vec![-1.5, 1.0, 0.5],
            vec![0.3, -0.9, 0.6],
            vec![0.2, 0.7, -0.9],
        ])
        .unwrap();
        let model = ModelSpec::without_transitional_jumps(vec![mk(), mk(), mk()], q).unwrap();
        let m0 = matrix_exponent(&model, 0.0).unwrap();
        let e = matrix_exp(&m0, 1.7).unwrap();
        for i in 0..3 {
            let row_sum: f64 = e.row(i).iter().sum();
            assert!((row_sum - 1.0).abs() < 1e-10, "row {i} sums to {row_sum}");
        }
    }

    #[test]
    fn report_serializes_with_expected_field_names() {
        let report =
            SpectralReport::compute(&binary_bbm(), 1.0, &SpectralOptions::default()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        for key in ["theta", "m_matrix", "lambda", "v_right", "y_left", "lambda_prime", "pi"] {
            assert!(json.get(key).is_some(), "missing field {key}");
        }
    }
}
