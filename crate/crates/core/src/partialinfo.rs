//! Partial-information identification from diagonal (population) outputs.
//!
//! The observed signal for initial state `λ₀` is `y(t) = C e^{Lt} λ₀`, with
//! `C` selecting the diagonal of `ρ_t`. Derivatives at `t = 0` give
//! `C L^k λ₀`; with `d²` independent initial states these fix `G_k = C L^k`,
//! and if `(C, L)` is observable the shifted system `O L = O'` pins `L`.
//!
//! A zero-diagonal Hamiltonian is never observable here: `vec(H)` lies in
//! the kernel of both `L` and `C`.

use log::warn;
use nalgebra::DMatrix;

use crate::dynamics::{liouvillian, DensityOperator, Liouvillian, Propagator};
use crate::error::{Error, Result};
use crate::linalg::{
    real_to_complex, spectral_norm, svd, unvec, vec, vec_index, Admissible, CMatrix,
    Hermitian, C64, DEFAULT_RTOL, I, ONE,
};
use crate::netmodel::basis_density;

/// Relative residual above which a matrix is not accepted as a Liouvillian.
pub const LIOUVILLIAN_RESIDUAL_TOL: f64 = 1e-6;
/// Estimated round-off level of a derivative estimate above which a
/// conditioning warning is raised.
pub const CONDITIONING_WARN: f64 = 1e-8;

/// `C ∈ R^{d×d²}` with `C vec(ρ) = diag(ρ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputSelector {
    dim: usize,
    matrix: DMatrix<f64>,
}

impl OutputSelector {
    pub fn diagonal(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("selector needs d >= 1".into()));
        }
        let mut matrix = DMatrix::zeros(dim, dim * dim);
        for k in 0..dim {
            matrix[(k, vec_index(k, k, dim))] = 1.0;
        }
        Ok(OutputSelector { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn complex(&self) -> CMatrix {
        real_to_complex(&self.matrix)
    }
}

/// `d²` initial states as the columns of `Λ₀ ∈ C^{d²×d²}`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialStateBatch {
    dim: usize,
    columns: CMatrix,
}

impl InitialStateBatch {
    /// `Λ₀ = I`, i.e. the (mostly non-physical) operators `|k⟩⟨j|`.
    pub fn identity(dim: usize) -> Self {
        let n = dim * dim;
        InitialStateBatch {
            dim,
            columns: CMatrix::identity(n, n),
        }
    }

    /// Preparable states: every `|k⟩⟨k|`, then `|+⟩⟨+|` and `|+_y⟩⟨+_y|`
    /// for each pair `k < j`. They span the full operator space.
    pub fn physical(dim: usize) -> Result<Self> {
        let states = physical_states(dim)?;
        Self::from_states(states.iter().map(|s| s.matrix().clone()).collect())
    }

    pub fn from_states(states: Vec<CMatrix>) -> Result<Self> {
        let n = states.len();
        let dim = (n as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != n {
            return Err(Error::InvalidArgument(format!(
                "a batch needs d^2 states, got {n}"
            )));
        }
        let mut columns = CMatrix::zeros(n, n);
        for (l, s) in states.iter().enumerate() {
            if s.nrows() != dim || s.ncols() != dim {
                return Err(Error::DimensionMismatch(format!("state {l} is not {dim}x{dim}")));
            }
            columns.set_column(l, &vec(s));
        }
        Self::from_matrix(columns)
    }

    pub fn from_matrix(columns: CMatrix) -> Result<Self> {
        let n = columns.nrows();
        let dim = (n as f64).sqrt().round() as usize;
        if dim * dim != n || columns.ncols() != n {
            return Err(Error::DimensionMismatch("Λ₀ must be d²×d²".into()));
        }
        let rank = svd(&columns, DEFAULT_RTOL).rank;
        if rank < n {
            return Err(Error::InvalidArgument(format!(
                "initial states are not linearly independent (rank {rank} < {n})"
            )));
        }
        Ok(InitialStateBatch { dim, columns })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.columns
    }

    pub fn state(&self, l: usize) -> CMatrix {
        unvec(&self.columns.column(l).into_owned(), self.dim, self.dim)
            .expect("column length is d²")
    }
}

fn physical_states(d: usize) -> Result<Vec<DensityOperator>> {
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        out.push(basis_density(d, k)?);
    }
    for k in 0..d {
        for j in (k + 1)..d {
            let [plus, plus_y] = superpositions(d, k, j);
            out.push(plus);
            out.push(plus_y);
        }
    }
    Ok(out)
}

fn superpositions(d: usize, k: usize, j: usize) -> [DensityOperator; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut plus = vec![C64::new(0.0, 0.0); d];
    plus[k] = C64::new(s, 0.0);
    plus[j] = C64::new(s, 0.0);
    let mut plus_y = plus.clone();
    plus_y[j] = C64::new(0.0, s);
    [
        DensityOperator::pure(&plus).expect("normalized"),
        DensityOperator::pure(&plus_y).expect("normalized"),
    ]
}

/// `Y_k = C L^k Λ₀` for `k = 0..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeStacks {
    stacks: Vec<CMatrix>,
}

impl DerivativeStacks {
    pub fn new(stacks: Vec<CMatrix>) -> Result<Self> {
        let first = stacks
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty derivative stack".into()))?;
        let shape = first.shape();
        if stacks.iter().any(|y| y.shape() != shape) {
            return Err(Error::DimensionMismatch("derivative stacks differ in shape".into()));
        }
        Ok(DerivativeStacks { stacks })
    }

    pub fn order(&self) -> usize {
        self.stacks.len() - 1
    }

    pub fn get(&self, k: usize) -> &CMatrix {
        &self.stacks[k]
    }

    pub fn stacks(&self) -> &[CMatrix] {
        &self.stacks
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct ObservabilityRank {
    pub rank: usize,
    pub required: usize,
}

impl ObservabilityRank {
    pub fn observable(&self) -> bool {
        self.rank == self.required
    }
}

/// Scales each block to unit spectral norm so that high powers of `L` do
/// not swamp the rank tolerance. Returns the scale factors.
fn block_scales(blocks: &[CMatrix]) -> Vec<f64> {
    blocks
        .iter()
        .map(|b| {
            let n = spectral_norm(b);
            if n > 0.0 {
                1.0 / n
            } else {
                1.0
            }
        })
        .collect()
}

fn stack_blocks(blocks: &[CMatrix], scales: &[f64]) -> CMatrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks[0].ncols();
    let mut out = CMatrix::zeros(rows, cols);
    let mut r = 0;
    for (b, &s) in blocks.iter().zip(scales) {
        out.rows_mut(r, b.nrows()).copy_from(&(b * C64::new(s, 0.0)));
        r += b.nrows();
    }
    out
}

/// Rank of `[C; CL; …; CL^{d²−1}]`, each block normalized.
pub fn observability_rank(c: &OutputSelector, l: &Liouvillian, rtol: f64) -> Result<ObservabilityRank> {
    let n = l.matrix().nrows();
    if c.matrix().ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "selector acts on {} entries, Liouvillian on {n}",
            c.matrix().ncols()
        )));
    }
    let mut blocks = Vec::with_capacity(n);
    let mut g = c.complex();
    for _ in 0..n {
        let next = &g * l.matrix();
        blocks.push(g);
        g = next;
    }
    let scales = block_scales(&blocks);
    let o = stack_blocks(&blocks, &scales);
    Ok(ObservabilityRank {
        rank: svd(&o, rtol).rank,
        required: n,
    })
}

/// Observability of the diagonal outputs under a Liouvillian built from
/// an estimated interaction (plus known local part), checked after the fact.
pub fn observability_of_estimate(
    estimate: &Admissible,
    known_h0: Option<&Hermitian>,
    hbar: f64,
    rtol: f64,
) -> Result<ObservabilityRank> {
    let h = match known_h0 {
        Some(h0) => h0 + estimate.as_hermitian(),
        None => estimate.as_hermitian().clone(),
    };
    let l = liouvillian(&h, hbar)?;
    observability_rank(&OutputSelector::diagonal(h.dim())?, &l, rtol)
}

/// Exact `Y_k = C L^k Λ₀` by repeated multiplication.
pub fn exact_derivative_stacks(
    c: &OutputSelector,
    l: &Liouvillian,
    batch: &InitialStateBatch,
    order: usize,
) -> Result<DerivativeStacks> {
    let n = l.matrix().nrows();
    if c.matrix().ncols() != n || batch.matrix().nrows() != n {
        return Err(Error::DimensionMismatch("selector, Liouvillian and batch disagree".into()));
    }
    let cc = c.complex();
    let mut x = batch.matrix().clone();
    let mut stacks = Vec::with_capacity(order + 1);
    for k in 0..=order {
        if k > 0 {
            x = l.matrix() * x;
        }
        stacks.push(&cc * &x);
    }
    DerivativeStacks::new(stacks)
}

/// Output samples `Y(t_i) = C e^{L t_i} Λ₀` with `t_i = (i − half)·step`,
/// `i = 0..=2·half`.
pub fn simulate_outputs(
    h: &Hermitian,
    batch: &InitialStateBatch,
    hbar: f64,
    step: f64,
    half: usize,
) -> Result<Vec<CMatrix>> {
    if h.dim() != batch.dim() {
        return Err(Error::DimensionMismatch("H and batch differ in size".into()));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let prop = Propagator::new(h, hbar)?;
    let c = OutputSelector::diagonal(h.dim())?.complex();
    Ok((0..=2 * half)
        .map(|i| {
            let t = (i as f64 - half as f64) * step;
            &c * prop.superoperator(t) * batch.matrix()
        })
        .collect())
}

/// Weights of the `k`-th derivative on nodes `x`, evaluated at 0
/// (Fornberg's recursion).
fn fornberg_weights(x: &[f64], k: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0; k + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..n {
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            for m in (0..=k.min(i)).rev() {
                let prev_i = if m > 0 { c[i - 1][m - 1] } else { 0.0 };
                if j == i - 1 {
                    c[i][m] = c1 * (m as f64 * prev_i - x[i - 1] * c[i - 1][m]) / c2;
                }
                let prev_j = if m > 0 { c[j][m - 1] } else { 0.0 };
                c[j][m] = (x[i] * c[j][m] - m as f64 * prev_j) / c3;
            }
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[k]).collect()
}

fn central_derivative(samples: &[CMatrix], center: usize, stride: usize, k: usize, step: f64) -> CMatrix {
    let m = k.div_ceil(2).max(1);
    let nodes: Vec<f64> = (-(m as i64)..=m as i64).map(|i| i as f64).collect();
    let w = fornberg_weights(&nodes, k);
    let h = step * stride as f64;
    let mut acc = CMatrix::zeros(samples[0].nrows(), samples[0].ncols());
    for (off, wi) in (-(m as i64)..=m as i64).zip(w) {
        let idx = (center as i64 + off * stride as i64) as usize;
        acc += &samples[idx] * C64::new(wi, 0.0);
    }
    acc / C64::new(h.powi(k as i32), 0.0)
}

#[derive(Clone, Debug)]
pub struct DerivativeEstimate {
    pub stacks: DerivativeStacks,
    /// `‖D_h − D_{2h}‖₂ / 3` per order: the Richardson correction size.
    pub error_estimates: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Central finite differences with one Richardson step, `(4 D_h − D_{2h})/3`.
///
/// `samples[i]` holds `Y(t)` at `t = (i − center)·step`. Order `k` needs
/// `2⌈k/2⌉` samples on each side of `center`. Round-off grows like
/// `ε_mach · step^{-k}`, so high orders are ill-conditioned.
pub fn estimate_derivative_stacks(
    samples: &[CMatrix],
    center: usize,
    step: f64,
    order: usize,
) -> Result<DerivativeEstimate> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if center >= samples.len() {
        return Err(Error::InsufficientSamples(format!(
            "center index {center} outside {} samples",
            samples.len()
        )));
    }
    let reach = 2 * order.div_ceil(2).max(1);
    let right = samples.len() - 1 - center;
    if order > 0 && (center < reach || right < reach) {
        return Err(Error::InsufficientSamples(format!(
            "order {order} needs {reach} samples each side of t = 0, have {center} and {right}"
        )));
    }
    let scale = samples.iter().map(spectral_norm).fold(0.0, f64::max);
    let mut stacks = vec![samples[center].clone()];
    let mut error_estimates = vec![0.0];
    let mut warnings = Vec::new();
    for k in 1..=order {
        let fine = central_derivative(samples, center, 1, k, step);
        let coarse = central_derivative(samples, center, 2, k, step);
        error_estimates.push(spectral_norm(&(&fine - &coarse)) / 3.0);
        stacks.push((fine * C64::new(4.0, 0.0) - coarse) / C64::new(3.0, 0.0));
        let roundoff = f64::EPSILON * step.powi(-(k as i32));
        if roundoff > CONDITIONING_WARN {
            let msg = format!(
                "order {k} derivative with step {step:e} is ill-conditioned (round-off ~ {:.1e})",
                roundoff * scale.max(1.0)
            );
            warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(DerivativeEstimate {
        stacks: DerivativeStacks::new(stacks)?,
        error_estimates,
        warnings,
    })
}

/// Recovers `L` from stacks of order at least `d²`.
pub fn reconstruct_liouvillian(
    stacks: &DerivativeStacks,
    batch: &InitialStateBatch,
    hbar: f64,
    rtol: f64,
) -> Result<Liouvillian> {
    let n = batch.matrix().nrows();
    if stacks.get(0).ncols() != n {
        return Err(Error::DimensionMismatch("stacks and batch disagree".into()));
    }
    if stacks.order() < n {
        return Err(Error::InsufficientSamples(format!(
            "need derivative order {n}, have {}",
            stacks.order()
        )));
    }
    let dec = svd(batch.matrix(), rtol);
    if dec.rank < n {
        return Err(Error::InvalidArgument("Λ₀ is not invertible".into()));
    }
    let inv = dec.pinv();
    let g: Vec<CMatrix> = stacks.stacks()[..=n].iter().map(|y| y * &inv).collect();
    let scales = block_scales(&g[..n]);
    let o = stack_blocks(&g[..n], &scales);
    let o_next = stack_blocks(&g[1..], &scales);
    let dec = svd(&o, rtol);
    if dec.rank < n {
        return Err(Error::NotObservable {
            rank: dec.rank,
            required: n,
        });
    }
    Liouvillian::from_matrix(dec.pinv() * o_next, hbar)
}

/// Traceless `H` with `−(i/ħ)(I⊗H − Hᵀ⊗I) = L`.
pub fn extract_hamiltonian(l: &Liouvillian) -> Result<Hermitian> {
    let d = l.state_dim();
    let hbar = l.hbar();
    let n = d * d;
    // Real basis of Hermitian matrices: diagonal units, then symmetric and
    // antisymmetric off-diagonal pairs.
    let mut basis = Vec::with_capacity(n);
    for k in 0..d {
        let mut b = CMatrix::zeros(d, d);
        b[(k, k)] = ONE;
        basis.push(b);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut re = CMatrix::zeros(d, d);
            re[(i, j)] = ONE;
            re[(j, i)] = ONE;
            let mut im = CMatrix::zeros(d, d);
            im[(i, j)] = I;
            im[(j, i)] = -I;
            basis.push(re);
            basis.push(im);
        }
    }
    let map = |h: &CMatrix| vec(&crate::dynamics::commutator_superoperator(h, hbar));
    let rows = n * n;
    let mut a = DMatrix::<f64>::zeros(2 * rows, n);
    for (c, b) in basis.iter().enumerate() {
        let col = map(b);
        for r in 0..rows {
            a[(r, c)] = col[r].re;
            a[(r + rows, c)] = col[r].im;
        }
    }
    let target = vec(l.matrix());
    let rhs = nalgebra::DVector::from_fn(2 * rows, |r, _| {
        if r < rows {
            target[r].re
        } else {
            target[r - rows].im
        }
    });
    let theta = svd(&a, DEFAULT_RTOL).solve(&rhs);
    let mut h = CMatrix::zeros(d, d);
    for (b, &t) in basis.iter().zip(theta.iter()) {
        h += b * C64::new(t, 0.0);
    }
    let h = Hermitian::new(h)?.traceless();
    let l_norm = spectral_norm(l.matrix());
    if l_norm > 0.0 {
        let fitted = crate::dynamics::commutator_superoperator(h.matrix(), hbar);
        let residual = spectral_norm(&(fitted - l.matrix())) / l_norm;
        if residual > LIOUVILLIAN_RESIDUAL_TOL {
            return Err(Error::NotLiouvillian { residual });
        }
    }
    Ok(h)
}

/// Writes `|k⟩⟨j|` as a complex combination of preparable states.
pub fn physical_decomposition(d: usize, k: usize, j: usize) -> Result<Vec<(DensityOperator, C64)>> {
    for idx in [k, j] {
        if idx >= d {
            return Err(Error::IndexOutOfRange { index: idx, dim: d });
        }
    }
    if k == j {
        return Ok(vec![(basis_density(d, k)?, ONE)]);
    }
    let [plus, plus_y] = superpositions(d, k, j);
    let corner = C64::new(-0.5, -0.5);
    Ok(vec![
        (plus, ONE),
        (plus_y, I),
        (basis_density(d, k)?, corner),
        (basis_density(d, j)?, corner),
    ])
}

/// `Σ coeff · state`.
pub fn recombine(terms: &[(DensityOperator, C64)]) -> Option<CMatrix> {
    let (first, _) = terms.first()?;
    let d = first.dim();
    Some(
        terms
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, (s, c)| acc + s.matrix() * *c),
    )
}
