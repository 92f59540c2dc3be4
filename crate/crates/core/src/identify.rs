//! Full-information topology identification.
//!
//! From a sampled trajectory we form the time-integrated state
//! `P = ∫₀^τ ρ_t dt` and `Q = iħ(ρ_τ − ρ₀)`, then look for the admissible
//! (Hermitian, zero-diagonal) `M` with `[M, P] = Q`. The commutator is
//! vectorized as `P̃ vec(M) = vec(Q)` with `P̃ = Pᵀ ⊗ I − I ⊗ P`.
//!
//! Hermitian symmetry is not complex-linear, so it cannot be imposed by
//! stacking extra rows under the complex system. Instead `M` is written in
//! terms of `d(d−1)` real parameters (real and imaginary parts of its strict
//! upper triangle) and the system is split into real and imaginary halves:
//!
//! ```text
//! A θ = b,   A = [Re(P̃ S); Im(P̃ S)],   b = [Re q; Im q].
//! ```
//!
//! The solution is unique exactly when `A` has full column rank, which is
//! the same as the zero matrix being the only admissible matrix commuting
//! with `P`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{trapezoid, DensityOperator, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{
    commutator, kron, numerical_rank, relative_asymmetry, spectral_norm, svd, vec, vec_index,
    Admissible, CMatrix, Hermitian, C64, DEFAULT_RTOL, I, ONE,
};

/// Relative residual above which full-rank data is reported inconsistent.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Denominator floor for the relative residual when `Q` vanishes.
pub const RESIDUAL_FLOOR: f64 = 1e-12;
/// Tolerance on `Q† = −Q`.
pub const SKEW_TOL: f64 = 1e-10;

/// Trapezoid approximation of `∫₀^τ ρ_t dt` on every `subsample`-th sample,
/// i.e. on `ñ_s = n_s / subsample` panels.
pub fn build_p_trapezoid(traj: &Trajectory, subsample: usize) -> Result<Hermitian> {
    let n = traj.steps();
    if subsample == 0 || !n.is_multiple_of(subsample) {
        return Err(Error::InvalidArgument(format!(
            "subsample divisor {subsample} does not divide n_s = {n}"
        )));
    }
    let step = traj.tau() / (n / subsample) as f64;
    Ok(Hermitian::symmetrized(trapezoid(traj.states(), subsample, step)))
}

/// `Q = iħ(ρ_τ − ρ₀)`, or `Q = iħ(ρ_τ − ρ₀) − [H₀, P]` when the local
/// Hamiltonian is known and only the interaction is sought.
pub fn build_q(
    rho0: &DensityOperator,
    rho_tau: &DensityOperator,
    hbar: f64,
    known_h0: Option<&Hermitian>,
    p: Option<&Hermitian>,
) -> Result<CMatrix> {
    if rho0.dim() != rho_tau.dim() {
        return Err(Error::DimensionMismatch("endpoint states differ in size".into()));
    }
    let mut q = (rho_tau.matrix() - rho0.matrix()) * C64::new(0.0, hbar);
    if let Some(h0) = known_h0 {
        let p = p.ok_or_else(|| {
            Error::InvalidArgument("P is required when a known H0 is supplied".into())
        })?;
        if h0.dim() != rho0.dim() || p.dim() != rho0.dim() {
            return Err(Error::DimensionMismatch("H0, P and states must share a size".into()));
        }
        q -= commutator(h0.matrix(), p.matrix());
    }
    Ok(q)
}

/// Real parametrization of the admissible set.
///
/// `θ` holds `(Re M_ij, Im M_ij)` for every `i < j`, pairs ordered row by
/// row; `M_ji = conj(M_ij)` and `M_ii = 0` hold for every `θ`.
#[derive(Clone, Debug)]
pub struct AdmissibleEmbedding {
    dim: usize,
    pairs: Vec<(usize, usize)>,
}

impl AdmissibleEmbedding {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "admissible embedding needs d >= 2, got {dim}"
            )));
        }
        let pairs = (0..dim)
            .flat_map(|i| ((i + 1)..dim).map(move |j| (i, j)))
            .collect();
        Ok(AdmissibleEmbedding { dim, pairs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `d(d−1)`.
    pub fn param_count(&self) -> usize {
        2 * self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn embed(&self, theta: &[f64]) -> Result<Admissible> {
        if theta.len() != self.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                theta.len()
            )));
        }
        let upper: Vec<C64> = theta.chunks(2).map(|xy| C64::new(xy[0], xy[1])).collect();
        Admissible::from_upper(self.dim, &upper)
    }

    /// Inverse of [`embed`](Self::embed).
    pub fn params(&self, m: &Admissible) -> Vec<f64> {
        self.pairs
            .iter()
            .flat_map(|&(i, j)| {
                let z = m.matrix()[(i, j)];
                [z.re, z.im]
            })
            .collect()
    }

    /// `S ∈ C^{d² × d(d−1)}` with `vec(M) = S θ`.
    pub fn matrix(&self) -> CMatrix {
        let d = self.dim;
        let mut s = CMatrix::zeros(d * d, self.param_count());
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            let ij = vec_index(i, j, d);
            let ji = vec_index(j, i, d);
            s[(ij, 2 * p)] = ONE;
            s[(ji, 2 * p)] = ONE;
            s[(ij, 2 * p + 1)] = I;
            s[(ji, 2 * p + 1)] = -I;
        }
        s
    }

    /// `F₁ ∈ R^{d×d²}` selecting the diagonal of `M` from `vec(M)`.
    pub fn diagonal_constraint(&self) -> DMatrix<f64> {
        let d = self.dim;
        let mut f = DMatrix::zeros(d, d * d);
        for k in 0..d {
            f[(k, vec_index(k, k, d))] = 1.0;
        }
        f
    }
}

/// `P̃ = Pᵀ ⊗ I − I ⊗ P`, so that `P̃ vec(M) = vec(MP − PM)`.
pub fn commutator_operator(p: &CMatrix) -> CMatrix {
    let d = p.nrows();
    let id = CMatrix::identity(d, d);
    kron(&p.transpose(), &id) - kron(&id, p)
}

/// The real `2d² × d(d−1)` matrix `A = [Re(P̃ S); Im(P̃ S)]`.
pub fn realified_system(p: &Hermitian, emb: &AdmissibleEmbedding) -> DMatrix<f64> {
    let d = p.dim();
    let n = d * d;
    let pt = commutator_operator(p.matrix());
    let mut a = DMatrix::zeros(2 * n, emb.param_count());
    for (k, &(i, j)) in emb.pairs().iter().enumerate() {
        let ij = vec_index(i, j, d);
        let ji = vec_index(j, i, d);
        for r in 0..n {
            let re_col = pt[(r, ij)] + pt[(r, ji)];
            let im_col = (pt[(r, ij)] - pt[(r, ji)]) * I;
            a[(r, 2 * k)] = re_col.re;
            a[(r + n, 2 * k)] = re_col.im;
            a[(r, 2 * k + 1)] = im_col.re;
            a[(r + n, 2 * k + 1)] = im_col.im;
        }
    }
    a
}

fn realified_rhs(q: &CMatrix) -> DVector<f64> {
    let v = vec(q);
    let n = v.len();
    DVector::from_fn(2 * n, |r, _| if r < n { v[r].re } else { v[r - n].im })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Unique,
    NonUnique,
    Inconsistent,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Unique => "unique",
            Outcome::NonUnique => "non_unique",
            Outcome::Inconsistent => "inconsistent",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Relative rank tolerance on the largest singular value of `A`.
    pub rtol: f64,
    /// Relative residual bound separating `unique` from `inconsistent`.
    /// `None` classifies by rank alone.
    pub residual_tol: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            rtol: DEFAULT_RTOL,
            residual_tol: Some(RESIDUAL_TOL),
        }
    }
}

impl SolveOptions {
    pub fn rank_only(rtol: f64) -> Self {
        SolveOptions {
            rtol,
            residual_tol: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IdentificationReport {
    pub outcome: Outcome,
    /// Least-squares estimate. Only trustworthy when `outcome` is `Unique`.
    pub estimate: Admissible,
    pub rank: usize,
    pub required_rank: usize,
    /// `‖[M̂, P] − Q‖₂ / max(‖Q‖₂, 1e-12)`.
    pub residual: f64,
    pub epsilon: Option<f64>,
    /// `M̂ ≠ 0` yet `[M̂, P] ≈ 0`: the estimate cannot be unique.
    pub commutes_with_gram: bool,
    pub sigma_max: f64,
    pub sigma_min_retained: Option<f64>,
    pub sigma_max_discarded: Option<f64>,
    pub rank_tol: f64,
    pub notes: Vec<String>,
}

impl IdentificationReport {
    /// Solvability label: 1 for a unique reconstruction, else 0.
    pub fn solvability(&self) -> u8 {
        u8::from(self.outcome == Outcome::Unique)
    }

    pub fn trusted(&self) -> bool {
        self.outcome == Outcome::Unique
    }
}

fn check_gram_pair(p: &Hermitian, q: &CMatrix) -> Result<()> {
    if q.nrows() != p.dim() || q.ncols() != p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "P is {}x{} but Q is {}x{}",
            p.dim(),
            p.dim(),
            q.nrows(),
            q.ncols()
        )));
    }
    if p.dim() < 2 {
        return Err(Error::InvalidArgument("identification needs d >= 2".into()));
    }
    Ok(())
}

/// Solves `[M, P] = Q` over admissible `M` and certifies uniqueness.
pub fn solve_commutator(p: &Hermitian, q: &CMatrix, opts: &SolveOptions) -> Result<IdentificationReport> {
    check_gram_pair(p, q)?;
    if !(opts.rtol > 0.0) {
        return Err(Error::InvalidArgument(format!("rtol must be positive, got {}", opts.rtol)));
    }
    let mut notes = Vec::new();
    let skew = (q + q.adjoint()).norm() / q.norm().max(1.0);
    if skew > SKEW_TOL {
        warn!("Q is not skew-Hermitian (deviation {skew:.3e})");
        notes.push(format!("Q is not skew-Hermitian (deviation {skew:.3e})"));
    }
    let emb = AdmissibleEmbedding::new(p.dim())?;
    let a = realified_system(p, &emb);
    let b = realified_rhs(q);
    let dec = svd(&a, opts.rtol);
    let theta = dec.solve(&b);
    let estimate = emb.embed(theta.as_slice())?;

    let q_norm = spectral_norm(q);
    let mismatch = commutator(estimate.matrix(), p.matrix()) - q;
    let residual = spectral_norm(&mismatch) / q_norm.max(RESIDUAL_FLOOR);

    let required_rank = emb.param_count();
    let outcome = if dec.rank < required_rank {
        Outcome::NonUnique
    } else if opts.residual_tol.is_some_and(|tol| residual > tol) {
        Outcome::Inconsistent
    } else {
        Outcome::Unique
    };

    let m_norm = spectral_norm(estimate.matrix());
    let commutes_with_gram = m_norm > 0.0
        && spectral_norm(&commutator(estimate.matrix(), p.matrix()))
            <= 1e-10 * m_norm * spectral_norm(p.matrix());
    if outcome == Outcome::Unique && m_norm == 0.0 {
        notes.push("no interaction detected".into());
    }
    if outcome == Outcome::NonUnique {
        notes.push(format!(
            "commutant has dimension {}; estimate is one least-squares solution",
            required_rank - dec.rank
        ));
    }

    Ok(IdentificationReport {
        outcome,
        estimate,
        rank: dec.rank,
        required_rank,
        residual,
        epsilon: None,
        commutes_with_gram,
        sigma_max: dec.sigma_max(),
        sigma_min_retained: dec.sigma_min_retained(),
        sigma_max_discarded: dec.sigma_max_discarded(),
        rank_tol: dec.tol,
        notes,
    })
}

/// Number of linearly independent admissible matrices commuting with `P`.
/// Zero exactly when `[M, P] = Q` has at most one admissible solution.
pub fn commutant_dimension(p: &Hermitian, rtol: f64) -> Result<usize> {
    let emb = AdmissibleEmbedding::new(p.dim())?;
    let a = realified_system(p, &emb);
    Ok(emb.param_count() - numerical_rank(&a, rtol))
}

/// Rank of the stacked complex system `[P̃; F₁; F₂]` acting on `vec(M)`,
/// where `F₂` imposes `M = Mᵀ`. This is the real-symmetric form of the
/// uniqueness test; for real `P` it agrees with the admissible test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StackedRank {
    pub rank: usize,
    pub required: usize,
}

impl StackedRank {
    pub fn full(&self) -> bool {
        self.rank == self.required
    }
}

pub fn stacked_rank_test(p: &Hermitian, rtol: f64) -> Result<StackedRank> {
    let d = p.dim();
    let emb = AdmissibleEmbedding::new(d)?;
    let n = d * d;
    let upper = emb.pairs().len();
    let mut stacked = CMatrix::zeros(n + d + upper, n);
    stacked.rows_mut(0, n).copy_from(&commutator_operator(p.matrix()));
    for k in 0..d {
        stacked[(n + k, vec_index(k, k, d))] = ONE;
    }
    for (r, &(l, i)) in emb.pairs().iter().enumerate() {
        stacked[(n + d + r, vec_index(i, l, d))] = ONE;
        stacked[(n + d + r, vec_index(l, i, d))] = -ONE;
    }
    Ok(StackedRank {
        rank: numerical_rank(&stacked, rtol),
        required: n,
    })
}

/// `‖M̂ − A‖₂ / ‖A‖₂`.
pub fn relative_error(estimate: &Admissible, truth: &Admissible) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::DimensionMismatch("estimate and truth differ in size".into()));
    }
    let denom = spectral_norm(truth.matrix());
    if denom == 0.0 {
        return Err(Error::ZeroGroundTruth);
    }
    Ok(spectral_norm(&(estimate.matrix() - truth.matrix())) / denom)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentifyConfig {
    /// Divisor of `n_s`; the trapezoid uses `n_s / subsample` panels.
    pub subsample: usize,
    pub hbar: f64,
    pub solve: SolveOptions,
}

impl Default for IdentifyConfig {
    /// Trapezoid data never satisfy `[H, P] = Q` exactly, so the pipeline
    /// labels solvability by the rank test alone.
    fn default() -> Self {
        IdentifyConfig {
            subsample: 1,
            hbar: 1.0,
            solve: SolveOptions::rank_only(DEFAULT_RTOL),
        }
    }
}

/// Trapezoid `P` → `Q` → constrained solve → relative error.
pub fn identify_topology(
    traj: &Trajectory,
    cfg: &IdentifyConfig,
    known_h0: Option<&Hermitian>,
    truth: Option<&Admissible>,
) -> Result<IdentificationReport> {
    let p = build_p_trapezoid(traj, cfg.subsample)?;
    let q = build_q(traj.initial(), traj.last(), cfg.hbar, known_h0, Some(&p))?;
    let mut report = solve_commutator(&p, &q, &cfg.solve)?;
    if let Some(truth) = truth {
        match relative_error(&report.estimate, truth) {
            Ok(eps) => report.epsilon = Some(eps),
            Err(Error::ZeroGroundTruth) => {
                report.notes.push("epsilon undefined: ground truth is zero".into())
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

/// Relative asymmetry check used when reading `Q` from outside.
pub fn skew_deviation(q: &CMatrix) -> f64 {
    relative_asymmetry(&(q * I))
}
