//! Model class for multitype branching Lévy processes.
//!
//! A model has `d` types. A particle of type `i` moves as a Lévy process
//! with Brownian part `sigma2[i]`, total drift `drift[i]` and a
//! finite-activity compound-Poisson part (`jump_rate[i]`, `jump_law[i]`);
//! it branches at rate `branch_rate[i]` into offspring drawn from
//! `offspring[i]` (all at the parent's location, same type); and it switches
//! type `i -> j` at rate `q[i][j]`, displacing by a draw from `u_laws[i][j]`.
//!
//! Restricting jumps to finitely many atoms keeps every Laplace transform
//! finite for all real arguments, so the per-type exponent
//!
//! ```text
//! phi_i(theta) = sigma2_i theta^2 / 2 - drift_i theta
//!              + jump_rate_i * sum_k p_k (exp(-theta x_k) - 1)
//! ```
//!
//! is a closed form. The drift here is the *total* drift: with a finite jump
//! measure the compensated-small-jump form reduces to this one via
//! `drift_compensated = drift_total + sum_{|x|<=1} x jump_measure(dx)`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{SquareMat, MAX_TYPES};
use crate::real::Real;

/// Absolute tolerance for probability normalization and intensity row sums.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("theta must be finite, got {0}")]
    NonFiniteTheta(f64),
    #[error("offspring atom {0} is not a non-negative integer")]
    NonIntegerAtom(f64),
    #[error("type index {0} out of range for {1} types")]
    TypeOutOfRange(usize, usize),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
}

/// Finitely supported law given by `(value, probability)` atoms.
///
/// Probabilities must be in `(0, 1]` and sum to 1 within [`PROB_TOL`];
/// values must be finite and pairwise distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw<F> {
    atoms: Vec<(F, F)>,
}

impl<F: Real> DiscreteLaw<F> {
    pub fn new(atoms: Vec<(F, F)>) -> Result<Self, ModelError> {
        let law = Self { atoms };
        let violations = law.violations("law");
        if violations.is_empty() {
            Ok(law)
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    /// Builds without validating; pair with [`DiscreteLaw::violations`].
    pub fn new_unchecked(atoms: Vec<(F, F)>) -> Self {
        Self { atoms }
    }

    pub fn point_mass(value: F) -> Self {
        Self { atoms: vec![(value, F::one())] }
    }

    pub fn atoms(&self) -> &[(F, F)] {
        &self.atoms
    }

    pub fn violations(&self, context: &str) -> Vec<String> {
        let mut out = Vec::new();
        if self.atoms.is_empty() {
            out.push(format!("DiscreteLaw not normalized: {context} has no atoms"));
            return out;
        }
        let mut sum = 0.0f64;
        for &(v, p) in &self.atoms {
            if !v.is_finite() {
                out.push(format!("{context}: atom value {v} not finite"));
            }
            let p = p.f64();
            if !(p > 0.0 && p <= 1.0 + PROB_TOL) {
                out.push(format!("{context}: probability {p} outside (0,1]"));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_TOL {
            out.push(format!("DiscreteLaw not normalized: {context} probabilities sum to {sum}"));
        }
        for (k, &(v, _)) in self.atoms.iter().enumerate() {
            if self.atoms[..k].iter().any(|&(w, _)| w == v) {
                out.push(format!("{context}: duplicate atom value {v}"));
            }
        }
        out
    }

    /// `E[exp(-theta X)]`, finite for every real `theta`.
    pub fn laplace(&self, theta: F) -> F {
        self.atoms.iter().map(|&(v, p)| p * (-theta * v).exp()).sum()
    }

    /// Derivative of [`DiscreteLaw::laplace`] in `theta`.
    pub fn laplace_prime(&self, theta: F) -> F {
        self.atoms.iter().map(|&(v, p)| -v * p * (-theta * v).exp()).sum()
    }

    pub fn mean(&self) -> F {
        self.atoms.iter().map(|&(v, p)| v * p).sum()
    }

    /// Mean of an offspring law; errors unless every atom is a non-negative
    /// integer.
    pub fn offspring_mean(&self) -> Result<F, ModelError> {
        for &(v, _) in &self.atoms {
            if v < F::zero() || v.fract() != F::zero() {
                return Err(ModelError::NonIntegerAtom(v.f64()));
            }
        }
        Ok(self.mean())
    }

    /// Dense probability-by-count coefficients `[p_0, p_1, ..., p_max]` of an
    /// integer law, for Horner evaluation of its generating function.
    pub fn integer_coefficients(&self) -> Result<Vec<F>, ModelError> {
        let mut max_k = 0usize;
        for &(v, _) in &self.atoms {
            if v < F::zero() || v.fract() != F::zero() {
                return Err(ModelError::NonIntegerAtom(v.f64()));
            }
            max_k = max_k.max(v.f64() as usize);
        }
        let mut coeffs = vec![F::zero(); max_k + 1];
        for &(v, p) in &self.atoms {
            coeffs[v.f64() as usize] = p;
        }
        Ok(coeffs)
    }

    pub fn is_point_mass_at_zero(&self) -> bool {
        self.atoms.len() == 1 && self.atoms[0].0 == F::zero()
    }
}

/// Generating function `sum_k p_k s^k` of dense integer-law coefficients.
#[inline]
pub fn generating_fn<F: Real>(coeffs: &[F], s: F) -> F {
    let mut acc = F::zero();
    for &c in coeffs.iter().rev() {
        acc = acc * s + c;
    }
    acc
}

/// Per-type spatial motion: Brownian part, total drift, and a
/// finite-activity jump part with a normalized atom law.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSpec<F> {
    pub sigma2: F,
    pub drift: F,
    pub jump_rate: F,
    pub jump_law: DiscreteLaw<F>,
}

impl<F: Real> MotionSpec<F> {
    /// Pure diffusion with drift, no jumps.
    pub fn brownian(sigma2: F, drift: F) -> Self {
        Self { sigma2, drift, jump_rate: F::zero(), jump_law: DiscreteLaw::point_mass(F::zero()) }
    }

    pub fn with_jumps(sigma2: F, drift: F, jump_rate: F, jump_law: DiscreteLaw<F>) -> Self {
        Self { sigma2, drift, jump_rate, jump_law }
    }

    /// Laplace exponent `phi(theta)` with `E[exp(-theta X_t)] = exp(t phi(theta))`.
    ///
    /// `phi(0) = 0` exactly.
    pub fn laplace_exponent(&self, theta: F) -> Result<F, ModelError> {
        if !theta.is_finite() {
            return Err(ModelError::NonFiniteTheta(theta.f64()));
        }
        let half = F::lit(0.5);
        let mut phi = half * self.sigma2 * theta * theta - self.drift * theta;
        if self.jump_rate > F::zero() {
            let centred: F =
                self.jump_law.atoms().iter().map(|&(x, p)| p * ((-theta * x).exp() - F::one())).sum();
            phi = phi + self.jump_rate * centred;
        }
        Ok(phi)
    }

    /// `d/dtheta` of [`MotionSpec::laplace_exponent`].
    pub fn laplace_exponent_prime(&self, theta: F) -> Result<F, ModelError> {
        if !theta.is_finite() {
            return Err(ModelError::NonFiniteTheta(theta.f64()));
        }
        let mut d = self.sigma2 * theta - self.drift;
        if self.jump_rate > F::zero() {
            d = d + self.jump_rate * self.jump_law.laplace_prime(theta);
        }
        Ok(d)
    }

    fn violations(&self, i: usize, out: &mut Vec<String>) {
        if !(self.sigma2 >= F::zero() && self.sigma2.is_finite()) {
            out.push(format!("type {i}: sigma2 must be finite and >= 0"));
        }
        if !self.drift.is_finite() {
            out.push(format!("type {i}: drift must be finite"));
        }
        if !(self.jump_rate >= F::zero() && self.jump_rate.is_finite()) {
            out.push(format!("type {i}: jump_rate must be finite and >= 0"));
        }
        if self.jump_rate > F::zero() {
            out.extend(self.jump_law.violations(&format!("type {i} jump_law")));
        }
    }
}

/// Motion, branching rate and offspring law of one type.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeSpec<F> {
    pub motion: MotionSpec<F>,
    pub branch_rate: F,
    pub offspring: DiscreteLaw<F>,
}

/// Full parameterization of a `d`-type branching MAP.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<F> {
    pub types: Vec<TypeSpec<F>>,
    /// Switching intensity matrix; rows sum to zero.
    pub q: SquareMat<F>,
    /// Transitional jump laws, one per ordered type pair; the diagonal is the
    /// point mass at 0, as is every entry with `q[i][j] == 0`.
    pub u_laws: Vec<Vec<DiscreteLaw<F>>>,
}

impl<F: Real> ModelSpec<F> {
    pub fn new(
        types: Vec<TypeSpec<F>>,
        q: SquareMat<F>,
        u_laws: Vec<Vec<DiscreteLaw<F>>>,
    ) -> Result<Self, ModelError> {
        let model = Self { types, q, u_laws };
        let violations = model.validate();
        if violations.is_empty() {
            Ok(model)
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    /// Single-type model; the degenerate chain `q = [0]` is accepted so the
    /// classical single-type processes are available as oracles.
    pub fn single_type(spec: TypeSpec<F>) -> Self {
        Self {
            types: vec![spec],
            q: SquareMat::zeros(1),
            u_laws: vec![vec![DiscreteLaw::point_mass(F::zero())]],
        }
    }

    /// Model with the given types and switching matrix, all transitional
    /// jumps zero.
    pub fn without_transitional_jumps(
        types: Vec<TypeSpec<F>>,
        q: SquareMat<F>,
    ) -> Result<Self, ModelError> {
        let d = types.len();
        let u_laws =
            (0..d).map(|_| (0..d).map(|_| DiscreteLaw::point_mass(F::zero())).collect()).collect();
        Self::new(types, q, u_laws)
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.types.len()
    }

    /// Every violated structural invariant, as human-readable messages.
    /// Empty means valid. Idempotent and side-effect free.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let d = self.d();
        if d == 0 {
            out.push("model must have at least one type".into());
            return out;
        }
        if d > MAX_TYPES {
            out.push(format!("model has {d} types, maximum supported is {MAX_TYPES}"));
        }
        if self.q.dim() != d {
            out.push(format!("q is {}x{} but model has {d} types", self.q.dim(), self.q.dim()));
            return out;
        }
        if self.u_laws.len() != d || self.u_laws.iter().any(|row| row.len() != d) {
            out.push(format!("u_laws must be a {d}x{d} array of laws"));
            return out;
        }

        for (i, spec) in self.types.iter().enumerate() {
            spec.motion.violations(i, &mut out);
            if !(spec.branch_rate >= F::zero() && spec.branch_rate.is_finite()) {
                out.push(format!("type {i}: branch_rate must be finite and >= 0"));
            }
            out.extend(spec.offspring.violations(&format!("type {i} offspring")));
            for &(v, _) in spec.offspring.atoms() {
                if v < F::zero() || v.fract() != F::zero() {
                    out.push(format!("type {i} offspring: atom {v} is not a non-negative integer"));
                }
            }
        }

        let trivial = self.types.iter().all(|t| {
            t.motion.sigma2 == F::zero()
                && t.motion.jump_rate == F::zero()
                && t.motion.drift == F::zero()
        });
        if trivial {
            out.push("all motions are trivial: need sigma2 > 0, jump_rate > 0 or drift != 0 somewhere".into());
        }

        for i in 0..d {
            let mut row_sum = 0.0f64;
            for j in 0..d {
                let qij = self.q[(i, j)].f64();
                row_sum += qij;
                if i != j && qij < 0.0 {
                    out.push(format!("q[{i}][{j}] = {qij} is negative"));
                }
            }
            if row_sum.abs() > PROB_TOL {
                out.push(format!("q row {i} sums to {row_sum}, expected 0"));
            }
        }
        if d >= 2 && !self.q.is_irreducible_support() {
            out.push("q not irreducible".into());
        }

        for i in 0..d {
            for j in 0..d {
                let law = &self.u_laws[i][j];
                if i == j || self.q[(i, j)] == F::zero() {
                    if !law.is_point_mass_at_zero() {
                        out.push(format!(
                            "u_laws[{i}][{j}] must be the point mass at 0 (q[{i}][{j}] = 0 or diagonal)"
                        ));
                    }
                } else {
                    out.extend(law.violations(&format!("u_laws[{i}][{j}]")));
                }
            }
        }
        out
    }

    pub fn type_spec(&self, i: usize) -> &TypeSpec<F> {
        &self.types[i]
    }

    /// Aggregate switch-away rate `q_i = -q[i][i]`.
    pub fn switch_rate(&self, i: usize) -> F {
        -self.q[(i, i)]
    }

    pub fn branch_rate(&self, i: usize) -> F {
        self.types[i].branch_rate
    }

    pub fn offspring_mean(&self, i: usize) -> Result<F, ModelError> {
        self.types[i].offspring.offspring_mean()
    }

    /// Entrywise Laplace transform `G(theta)` of the transitional jumps;
    /// the diagonal is exactly 1.
    pub fn switch_transform(&self, theta: F) -> Result<SquareMat<F>, ModelError> {
        if !theta.is_finite() {
            return Err(ModelError::NonFiniteTheta(theta.f64()));
        }
        let d = self.d();
        Ok(SquareMat::from_fn(d, |i, j| self.u_laws[i][j].laplace(theta)))
    }

    /// Entrywise derivative of [`ModelSpec::switch_transform`].
    pub fn switch_transform_prime(&self, theta: F) -> Result<SquareMat<F>, ModelError> {
        if !theta.is_finite() {
            return Err(ModelError::NonFiniteTheta(theta.f64()));
        }
        let d = self.d();
        Ok(SquareMat::from_fn(d, |i, j| self.u_laws[i][j].laplace_prime(theta)))
    }

    pub fn to_file(&self) -> ModelFile<F> {
        ModelFile {
            d: self.d(),
            types: self
                .types
                .iter()
                .map(|t| TypeFile {
                    sigma2: t.motion.sigma2,
                    drift: t.motion.drift,
                    jump_rate: t.motion.jump_rate,
                    jump_atoms: if t.motion.jump_law.is_point_mass_at_zero() {
                        Vec::new()
                    } else {
                        t.motion.jump_law.atoms().to_vec()
                    },
                    branch_rate: t.branch_rate,
                    offspring: t.offspring.atoms().to_vec(),
                })
                .collect(),
            q: self.q.rows(),
            u_laws: self
                .u_laws
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|law| {
                            if law.is_point_mass_at_zero() {
                                Vec::new()
                            } else {
                                law.atoms().to_vec()
                            }
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String
    where
        F: Serialize,
    {
        serde_json::to_string_pretty(&self.to_file()).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError>
    where
        F: DeserializeOwned,
    {
        let file: ModelFile<F> = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ModelError>
    where
        F: DeserializeOwned,
    {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk model document. Atom lists are `[[value, probability], ...]`;
/// an empty list stands for the point mass at 0. Unknown fields are
/// rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile<F> {
    pub d: usize,
    pub types: Vec<TypeFile<F>>,
    pub q: Vec<Vec<F>>,
    pub u_laws: Vec<Vec<Vec<(F, F)>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeFile<F> {
    pub sigma2: F,
    pub drift: F,
    pub jump_rate: F,
    pub jump_atoms: Vec<(F, F)>,
    pub branch_rate: F,
    pub offspring: Vec<(F, F)>,
}

impl<F: Real> ModelFile<F> {
    pub fn into_model(self) -> Result<ModelSpec<F>, ModelError> {
        let atoms_to_law = |atoms: Vec<(F, F)>| {
            if atoms.is_empty() {
                DiscreteLaw::point_mass(F::zero())
            } else {
                DiscreteLaw::new_unchecked(atoms)
            }
        };
        if self.d != self.types.len() {
            return Err(ModelError::Invalid(vec![format!(
                "d = {} but {} types given",
                self.d,
                self.types.len()
            )]));
        }
        let types = self
            .types
            .into_iter()
            .map(|t| TypeSpec {
                motion: MotionSpec {
                    sigma2: t.sigma2,
                    drift: t.drift,
                    jump_rate: t.jump_rate,
                    jump_law: atoms_to_law(t.jump_atoms),
                },
                branch_rate: t.branch_rate,
                offspring: atoms_to_law(t.offspring),
            })
            .collect();
        let q = SquareMat::from_rows(self.q)
            .map_err(|e| ModelError::Invalid(vec![format!("q: {e}")]))?;
        let u_laws = self
            .u_laws
            .into_iter()
            .map(|row| row.into_iter().map(atoms_to_law).collect())
            .collect();
        ModelSpec::new(types, q, u_laws)
    }
}
