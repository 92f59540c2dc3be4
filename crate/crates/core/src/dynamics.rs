//! Closed-system (Liouville–von Neumann) dynamics of density operators.
//!
//! Propagation diagonalizes the Hamiltonian once and evolves states in its
//! eigenbasis, which is exact for time-independent `H`.

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, kron, CMatrix, Hermitian, HermitianEigen, C64};

/// Hermiticity, trace and positivity tolerance for density operators.
pub const DENSITY_TOL: f64 = 1e-10;
/// Below this `|ω|·τ` the closed-form Gram integrand uses its linear limit.
pub const DEGENERATE_PHASE: f64 = 1e-8;

/// Hermitian, positive semi-definite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator(Hermitian);

impl DensityOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        let h = Hermitian::new(m).map_err(|e| match e {
            Error::NotHermitian { asymmetry } => {
                Error::NotDensityOperator(format!("not Hermitian (asymmetry {asymmetry:.3e})"))
            }
            other => other,
        })?;
        Self::from_hermitian(h)
    }

    pub fn from_hermitian(h: Hermitian) -> Result<Self> {
        let tr = h.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::NotDensityOperator(format!("trace {tr} != 1")));
        }
        let min_eig = eig_hermitian(&h).values[0];
        if min_eig < -DENSITY_TOL {
            return Err(Error::NotDensityOperator(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(DensityOperator(h))
    }

    /// For states produced by unitary conjugation of a valid state.
    pub(crate) fn from_evolved(m: CMatrix) -> Self {
        DensityOperator(Hermitian::symmetrized(m))
    }

    /// Pure state `|ψ⟩⟨ψ|` from a normalized ket.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let d = psi.len();
        let m = CMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj());
        Self::new(m)
    }

    /// Maximally mixed state `I/d`.
    pub fn maximally_mixed(dim: usize) -> Self {
        DensityOperator(Hermitian::identity(dim).scale(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.0.matrix()
    }

    pub fn as_hermitian(&self) -> &Hermitian {
        &self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eig_hermitian(&self.0).values[0]
    }
}

/// Superoperator `L = −(i/ħ)(I ⊗ H − Hᵀ ⊗ I)` acting on `vec(ρ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Liouvillian {
    matrix: CMatrix,
    hbar: f64,
}

impl Liouvillian {
    /// Wraps an arbitrary `d²×d²` matrix, e.g. one reconstructed from data.
    /// Skew-Hermiticity is not enforced; see [`Liouvillian::skew_deviation`].
    pub fn from_matrix(matrix: CMatrix, hbar: f64) -> Result<Self> {
        let n = matrix.nrows();
        let d = (n as f64).sqrt().round() as usize;
        if !matrix.is_square() || d * d != n || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "Liouvillian must be d²×d², got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Liouvillian { matrix, hbar })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Hilbert-space dimension `d` (the superoperator is `d²×d²`).
    pub fn state_dim(&self) -> usize {
        (self.matrix.nrows() as f64).sqrt().round() as usize
    }

    /// `‖L + L†‖_F`; zero for a closed-system generator.
    pub fn skew_deviation(&self) -> f64 {
        (&self.matrix + self.matrix.adjoint()).norm()
    }
}

fn check_hbar(hbar: f64) -> Result<()> {
    if hbar > 0.0 && hbar.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")))
    }
}

/// `−(i/ħ)(I ⊗ H − Hᵀ ⊗ I)`, i.e. the column-stacked form of `−(i/ħ)[H, ·]`.
pub fn commutator_superoperator(h: &CMatrix, hbar: f64) -> CMatrix {
    let d = h.nrows();
    let id = CMatrix::identity(d, d);
    (kron(&id, h) - kron(&h.transpose(), &id)) * C64::new(0.0, -1.0 / hbar)
}

pub fn liouvillian(h: &Hermitian, hbar: f64) -> Result<Liouvillian> {
    check_hbar(hbar)?;
    Ok(Liouvillian {
        matrix: commutator_superoperator(h.matrix(), hbar),
        hbar,
    })
}

/// Cached eigendecomposition of a Hamiltonian, reused for every time point.
#[derive(Clone, Debug)]
pub struct Propagator {
    eig: HermitianEigen,
    hbar: f64,
}

impl Propagator {
    pub fn new(h: &Hermitian, hbar: f64) -> Result<Self> {
        check_hbar(hbar)?;
        Ok(Propagator {
            eig: eig_hermitian(h),
            hbar,
        })
    }

    pub fn eigen(&self) -> &HermitianEigen {
        &self.eig
    }

    fn phase(&self, j: usize, k: usize, t: f64) -> C64 {
        let omega = (self.eig.values[j] - self.eig.values[k]) / self.hbar;
        C64::from_polar(1.0, -omega * t)
    }

    /// `U(t) = V e^{−iΛt/ħ} V†`.
    pub fn unitary(&self, t: f64) -> CMatrix {
        let v = &self.eig.vectors;
        let d = v.nrows();
        let mut scaled = v.clone();
        for k in 0..d {
            let ph = C64::from_polar(1.0, -self.eig.values[k] * t / self.hbar);
            for i in 0..d {
                scaled[(i, k)] *= ph;
            }
        }
        scaled * v.adjoint()
    }

    /// Moves a matrix into the eigenbasis of `H`.
    pub fn to_eigenbasis(&self, m: &CMatrix) -> CMatrix {
        self.eig.vectors.adjoint() * m * &self.eig.vectors
    }

    fn rotate_back_at(&self, m_eig: &CMatrix, t: f64) -> CMatrix {
        let d = m_eig.nrows();
        let rotated = CMatrix::from_fn(d, d, |j, k| m_eig[(j, k)] * self.phase(j, k, t));
        &self.eig.vectors * rotated * self.eig.vectors.adjoint()
    }

    /// `U(t) M U(t)†` for any matrix `M` (the evolution is linear), at any
    /// real `t` including negative times.
    pub fn evolve_matrix(&self, m: &CMatrix, t: f64) -> CMatrix {
        self.rotate_back_at(&self.to_eigenbasis(m), t)
    }

    pub fn evolve(&self, rho: &DensityOperator, t: f64) -> DensityOperator {
        DensityOperator::from_evolved(self.evolve_matrix(rho.matrix(), t))
    }

    /// `e^{Lt}` assembled from the eigenstructure of `H`: the vectors
    /// `vec(v_j v_k†) = conj(v_k) ⊗ v_j` diagonalize `L` with eigenvalues
    /// `−i(λ_j − λ_k)/ħ`.
    pub fn superoperator(&self, t: f64) -> CMatrix {
        let v = &self.eig.vectors;
        let d = v.nrows();
        let w = kron(&v.map(|z| z.conj()), v);
        let mut wd = w.clone();
        for k in 0..d {
            for j in 0..d {
                let col = k * d + j;
                let ph = self.phase(j, k, t);
                for i in 0..d * d {
                    wd[(i, col)] *= ph;
                }
            }
        }
        wd * w.adjoint()
    }
}

pub fn propagate(h: &Hermitian, rho0: &DensityOperator, t: f64, hbar: f64) -> Result<DensityOperator> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    check_dims(h, rho0)?;
    Ok(Propagator::new(h, hbar)?.evolve(rho0, t))
}

fn check_dims(h: &Hermitian, rho0: &DensityOperator) -> Result<()> {
    if h.dim() != rho0.dim() {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian is {}x{}, state is {}x{}",
            h.dim(),
            h.dim(),
            rho0.dim(),
            rho0.dim()
        )));
    }
    Ok(())
}

/// Number of steps `τ/δt`, provided it is a positive integer.
pub fn grid_steps(tau: f64, dt: f64) -> Result<usize> {
    if !(tau > 0.0 && dt > 0.0) || !tau.is_finite() || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "tau and dt must be positive, got tau={tau}, dt={dt}"
        )));
    }
    let n = (tau / dt).round();
    if n < 1.0 || (n * dt - tau).abs() > 1e-9 * tau {
        return Err(Error::InvalidArgument(format!(
            "tau={tau} is not an integer multiple of dt={dt}"
        )));
    }
    Ok(n as usize)
}

/// Uniformly sampled trajectory `ρ(t_k)`, `t_k = k·δt`, `k = 0..=n_s`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    tau: f64,
    dt: f64,
    states: Vec<DensityOperator>,
}

impl Trajectory {
    pub fn new(tau: f64, dt: f64, states: Vec<DensityOperator>) -> Result<Self> {
        let n = grid_steps(tau, dt)?;
        if states.len() != n + 1 {
            return Err(Error::DimensionMismatch(format!(
                "grid needs {} samples, got {}",
                n + 1,
                states.len()
            )));
        }
        let d = states[0].dim();
        if states.iter().any(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch("samples have mixed dimensions".into()));
        }
        Ok(Trajectory { tau, dt, states })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `n_s = τ/δt`.
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps() {
            self.tau
        } else {
            k as f64 * self.dt
        }
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn initial(&self) -> &DensityOperator {
        &self.states[0]
    }

    pub fn last(&self) -> &DensityOperator {
        &self.states[self.steps()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &DensityOperator)> {
        self.states.iter().enumerate().map(|(k, s)| (self.time(k), s))
    }
}

pub fn sample_trajectory(
    h: &Hermitian,
    rho0: &DensityOperator,
    tau: f64,
    dt: f64,
    hbar: f64,
) -> Result<Trajectory> {
    check_dims(h, rho0)?;
    let n = grid_steps(tau, dt)?;
    let prop = Propagator::new(h, hbar)?;
    let rho_eig = prop.to_eigenbasis(rho0.matrix());
    let states = (0..=n)
        .map(|k| {
            if k == 0 {
                rho0.clone()
            } else {
                let t = if k == n { tau } else { k as f64 * dt };
                DensityOperator::from_evolved(prop.rotate_back_at(&rho_eig, t))
            }
        })
        .collect();
    Trajectory::new(tau, dt, states)
}

/// `∫₀^τ ρ_t dt` in closed form.
///
/// In the eigenbasis of `H` the integrand entry `(j,k)` is
/// `ρ̃_jk e^{−iω_jk t}`, which integrates to `ρ̃_jk τ sinc(x/2) e^{−ix/2}`
/// with `x = ω_jk τ`; the sinc form has no cancellation for small `x`.
pub fn exact_gram(h: &Hermitian, rho0: &DensityOperator, tau: f64, hbar: f64) -> Result<Hermitian> {
    check_dims(h, rho0)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let prop = Propagator::new(h, hbar)?;
    let rho_eig = prop.to_eigenbasis(rho0.matrix());
    let lam = &prop.eig.values;
    let d = h.dim();
    let g = CMatrix::from_fn(d, d, |j, k| {
        let x = (lam[j] - lam[k]) / hbar * tau;
        let weight = if x.abs() < DEGENERATE_PHASE {
            C64::new(tau, 0.0)
        } else {
            let half = 0.5 * x;
            C64::from_polar(tau * half.sin() / half, -half)
        };
        rho_eig[(j, k)] * weight
    });
    let p = &prop.eig.vectors * g * prop.eig.vectors.adjoint();
    Ok(Hermitian::symmetrized(p))
}

/// Composite trapezoid rule over every `stride`-th sample.
pub(crate) fn trapezoid(states: &[DensityOperator], stride: usize, step: f64) -> CMatrix {
    let d = states[0].dim();
    let n = states.len() - 1;
    let mut acc = CMatrix::zeros(d, d);
    let mut k = stride;
    while k < n {
        acc += states[k].matrix();
        k += stride;
    }
    acc += (states[0].matrix() + states[n].matrix()) * C64::new(0.5, 0.0);
    acc * C64::new(step, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{spectral_norm, vec, ONE, ZERO};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn sigma_x() -> Hermitian {
        Hermitian::new(CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])).unwrap()
    }

    fn ground() -> DensityOperator {
        DensityOperator::new(Hermitian::diagonal(&[1.0, 0.0]).into_matrix()).unwrap()
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> Hermitian {
        let m = CMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        Hermitian::symmetrized(m)
    }

    fn random_state(rng: &mut ChaCha8Rng, d: usize) -> DensityOperator {
        let g = CMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityOperator::new(m / tr).unwrap()
    }

    #[test]
    fn density_operator_validation() {
        assert!(DensityOperator::new(Hermitian::diagonal(&[0.5, 0.6]).into_matrix()).is_err());
        assert!(DensityOperator::new(Hermitian::diagonal(&[1.5, -0.5]).into_matrix()).is_err());
        let nonherm = CMatrix::from_row_slice(2, 2, &[C64::new(0.5, 0.0), ONE, ZERO, C64::new(0.5, 0.0)]);
        assert!(matches!(DensityOperator::new(nonherm), Err(Error::NotDensityOperator(_))));
        assert!(DensityOperator::new(Hermitian::diagonal(&[1.0, 0.0]).into_matrix()).is_ok());
    }

    #[test]
    fn liouvillian_of_diagonal_h() {
        let l = liouvillian(&Hermitian::diagonal(&[1.0, -1.0]), 1.0).unwrap();
        let expected = CMatrix::from_fn(4, 4, |i, j| {
            if i != j {
                ZERO
            } else {
                [ZERO, C64::new(0.0, 2.0), C64::new(0.0, -2.0), ZERO][i]
            }
        });
        assert!((l.matrix() - expected).norm() < 1e-15);
        assert_eq!(liouvillian(&Hermitian::zeros(3), 1.0).unwrap().matrix(), &CMatrix::zeros(9, 9));
        assert!(liouvillian(&Hermitian::zeros(2), 0.0).is_err());
    }

    #[test]
    fn liouvillian_annihilates_h_and_is_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 2..5 {
            let h = random_hermitian(&mut rng, d);
            let l = liouvillian(&h, 0.7).unwrap();
            assert!((l.matrix() * vec(h.matrix())).norm() < 1e-13);
            assert!(l.skew_deviation() < 1e-12);
        }
    }

    #[test]
    fn propagate_zero_time_is_identity() {
        let rho = ground();
        let out = propagate(&sigma_x(), &rho, 0.0, 1.0).unwrap();
        assert!((out.matrix() - rho.matrix()).norm() < 1e-15);
        assert!(propagate(&sigma_x(), &rho, -1.0, 1.0).is_err());
    }

    #[test]
    fn propagate_two_level_flip() {
        let out = propagate(&sigma_x(), &ground(), FRAC_PI_2, 1.0).unwrap();
        let expected = Hermitian::diagonal(&[0.0, 1.0]).into_matrix();
        assert!((out.matrix() - expected).norm() < 1e-14);
    }

    #[test]
    fn propagate_stationary_state() {
        let h = Hermitian::diagonal(&[1.0, -1.0]);
        for t in [0.3, 1.0, 17.0] {
            let out = propagate(&h, &ground(), t, 1.0).unwrap();
            assert!((out.matrix() - ground().matrix()).norm() < 1e-14);
        }
    }

    #[test]
    fn propagation_preserves_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in 2..6 {
            let h = random_hermitian(&mut rng, d);
            let rho = random_state(&mut rng, d);
            let before = eig_hermitian(rho.as_hermitian()).values;
            let out = propagate(&h, &rho, 1.3, 1.0).unwrap();
            assert!((out.as_hermitian().trace() - 1.0).abs() <= 1e-12);
            let after = eig_hermitian(out.as_hermitian()).values;
            assert!((before - after).amax() <= 1e-10);
            assert_eq!(out.matrix(), &out.matrix().adjoint());
        }
    }

    #[test]
    fn vec_picture_matches_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in 1..=4 {
            let h = random_hermitian(&mut rng, d);
            let rho = random_state(&mut rng, d);
            let prop = Propagator::new(&h, 1.0).unwrap();
            let t = 0.9;
            let lhs = vec(propagate(&h, &rho, t, 1.0).unwrap().matrix());
            let rhs = prop.superoperator(t) * vec(rho.matrix());
            assert!((lhs - rhs).norm() <= 1e-9);
        }
    }

    #[test]
    fn superoperator_generator_is_liouvillian() {
        // d/dt e^{Lt} at t = 0 by central differences.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(&mut rng, 3);
        let prop = Propagator::new(&h, 1.0).unwrap();
        let eps = 1e-5;
        let deriv = (prop.superoperator(eps) - prop.superoperator(-eps)) / C64::new(2.0 * eps, 0.0);
        let l = liouvillian(&h, 1.0).unwrap();
        assert!((deriv - l.matrix()).norm() < 1e-8);
    }

    #[test]
    fn trajectory_grid() {
        let traj = sample_trajectory(&sigma_x(), &ground(), 1.0, 0.01, 1.0).unwrap();
        assert_eq!(traj.states().len(), 101);
        assert_eq!(traj.initial(), &ground());
        assert_eq!(traj.time(100), 1.0);
        for s in traj.states() {
            assert!((s.as_hermitian().trace() - 1.0).abs() <= 1e-10);
        }
        assert!(sample_trajectory(&sigma_x(), &ground(), 1.0, 0.3, 1.0).is_err());
    }

    #[test]
    fn zero_hamiltonian_trajectory_is_constant() {
        let rho = ground();
        let traj = sample_trajectory(&Hermitian::zeros(2), &rho, 2.0, 0.5, 1.0).unwrap();
        assert!(traj.states().iter().all(|s| s == &rho));
    }

    #[test]
    fn exact_gram_trivial_cases() {
        let rho = ground();
        let p = exact_gram(&Hermitian::zeros(2), &rho, 2.5, 1.0).unwrap();
        assert!((p.matrix() - rho.matrix() * C64::new(2.5, 0.0)).norm() < 1e-14);
        let p = exact_gram(&Hermitian::diagonal(&[1.0, -1.0]), &rho, 2.5, 1.0).unwrap();
        assert!((p.matrix() - rho.matrix() * C64::new(2.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn exact_gram_matches_fine_trapezoid() {
        let traj = sample_trajectory(&sigma_x(), &ground(), 1.0, 1e-4, 1.0).unwrap();
        let trap = trapezoid(traj.states(), 1, 1e-4);
        let p = exact_gram(&sigma_x(), &ground(), 1.0, 1.0).unwrap();
        assert!(spectral_norm(&(trap - p.matrix())) <= 1e-7);
    }

    #[test]
    fn exact_gram_is_psd_and_second_order_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for d in 2..5 {
            let h = random_hermitian(&mut rng, d);
            let rho = random_state(&mut rng, d);
            let p = exact_gram(&h, &rho, 1.0, 1.0).unwrap();
            assert!(eig_hermitian(&p).values[0] >= -1e-12);
            let err = |dt: f64| {
                let traj = sample_trajectory(&h, &rho, 1.0, dt, 1.0).unwrap();
                spectral_norm(&(trapezoid(traj.states(), 1, dt) - p.matrix()))
            };
            let ratio = err(0.02) / err(0.01);
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn exact_gram_degenerate_branch_is_continuous() {
        let rho = DensityOperator::pure(&[
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        let flat = exact_gram(&Hermitian::diagonal(&[0.5, 0.5]), &rho, 2.0, 1.0).unwrap();
        let split = exact_gram(&Hermitian::diagonal(&[0.5, 0.5 + 1e-9]), &rho, 2.0, 1.0).unwrap();
        let just_above = exact_gram(&Hermitian::diagonal(&[0.5, 0.5 + 1e-8]), &rho, 2.0, 1.0).unwrap();
        assert!((flat.matrix() - split.matrix()).norm() < 1e-8);
        assert!((flat.matrix() - just_above.matrix()).norm() < 1e-7);
    }
}
