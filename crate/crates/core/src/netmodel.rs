//! Benchmark networks: Erdős–Rényi quantum-walk graphs, basis initial states
//! and two-body many-body Hamiltonians.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::DensityOperator;
use crate::error::{Error, Result};
use crate::linalg::{kron, spectral_norm, Admissible, CMatrix, Hermitian, C64, ONE, ZERO};

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of a key tuple: `h₀ = 0`, `h ← splitmix64(h ⊕ splitmix64(kᵢ))`.
pub fn key_hash(key: &[u64]) -> u64 {
    key.iter().fold(0u64, |h, &k| splitmix64(h ^ splitmix64(k)))
}

/// Master seed plus a stream counter. Children are derived as
/// `seed ⊕ key_hash(key)`, so any cell of a sweep can be regenerated on its
/// own.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { seed, stream: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn derive(&self, key: &[u64]) -> SeededRng {
        SeededRng::new(self.seed ^ key_hash(key))
    }

    /// Next independent generator; advances the stream counter.
    pub fn next_rng(&mut self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        self.stream += 1;
        rng
    }
}

/// Symmetric binary adjacency matrix with zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    dim: usize,
    links: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn empty(dim: usize) -> Self {
        AdjacencyMatrix {
            dim,
            links: vec![false; dim * dim],
        }
    }

    pub fn from_edges(dim: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut a = Self::empty(dim);
        for &(i, j) in edges {
            if i >= dim || j >= dim {
                return Err(Error::IndexOutOfRange { index: i.max(j), dim });
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
            }
            a.set(i, j, true);
        }
        Ok(a)
    }

    /// Accepts a matrix whose entries are exactly 0 or 1, symmetric, with
    /// zero diagonal.
    pub fn from_matrix(m: &CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch("adjacency matrix must be square".into()));
        }
        let d = m.nrows();
        let mut a = Self::empty(d);
        for i in 0..d {
            for j in 0..d {
                let z = m[(i, j)];
                let bit = if z == ZERO {
                    false
                } else if z == ONE {
                    true
                } else {
                    return Err(Error::InvalidArgument(format!(
                        "adjacency entry ({i},{j}) = {z} is not 0 or 1"
                    )));
                };
                if bit && i == j {
                    return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
                }
                if bit != (m[(j, i)] == ONE) {
                    return Err(Error::InvalidArgument(format!(
                        "adjacency is not symmetric at ({i},{j})"
                    )));
                }
                a.links[i * d + j] = bit;
            }
        }
        Ok(a)
    }

    fn set(&mut self, i: usize, j: usize, on: bool) {
        self.links[i * self.dim + j] = on;
        self.links[j * self.dim + i] = on;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn linked(&self, i: usize, j: usize) -> bool {
        self.links[i * self.dim + j]
    }

    pub fn edge_count(&self) -> usize {
        self.links.iter().filter(|&&b| b).count() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.dim).filter(|&j| self.linked(i, j)).count()
    }

    pub fn is_connected(&self) -> bool {
        if self.dim == 0 {
            return true;
        }
        let mut seen = vec![false; self.dim];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..self.dim {
                if self.linked(i, j) && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.dim, self.dim, |i, j| if self.linked(i, j) { ONE } else { ZERO })
    }

    /// Quantum-walk Hamiltonian `H = A`.
    pub fn to_hamiltonian(&self) -> Hermitian {
        Hermitian::symmetrized(self.to_matrix())
    }

    pub fn to_admissible(&self) -> Admissible {
        Admissible::from_hermitian_unchecked(self.to_hamiltonian())
    }
}

/// Each of the `d(d−1)/2` undirected links is drawn independently with
/// probability `p_link`, visiting pairs `(i, j)`, `i < j`, row by row.
pub fn erdos_renyi<R: Rng + ?Sized>(d: usize, p_link: f64, rng: &mut R) -> Result<AdjacencyMatrix> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 nodes, got {d}")));
    }
    if !(0.0..=1.0).contains(&p_link) {
        return Err(Error::InvalidArgument(format!("p_link must lie in [0,1], got {p_link}")));
    }
    let mut a = AdjacencyMatrix::empty(d);
    for i in 0..d {
        for j in (i + 1)..d {
            if rng.random::<f64>() < p_link {
                a.set(i, j, true);
            }
        }
    }
    Ok(a)
}

/// `e_k e_kᵀ` (0-based `k`).
pub fn basis_density(d: usize, k: usize) -> Result<DensityOperator> {
    if k >= d {
        return Err(Error::IndexOutOfRange { index: k, dim: d });
    }
    Ok(DensityOperator::from_evolved(CMatrix::from_fn(d, d, |i, j| {
        if i == k && j == k {
            ONE
        } else {
            ZERO
        }
    })))
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    let i = C64::new(0.0, 1.0);
    CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` on `site` of `levels.len()` subsystems.
pub fn local_operator(op: &CMatrix, site: usize, levels: &[usize]) -> Result<CMatrix> {
    if site >= levels.len() {
        return Err(Error::IndexOutOfRange { index: site, dim: levels.len() });
    }
    if op.nrows() != levels[site] || op.ncols() != levels[site] {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{} but site {site} has {} levels",
            op.nrows(),
            op.ncols(),
            levels[site]
        )));
    }
    Ok(levels.iter().enumerate().fold(CMatrix::identity(1, 1), |acc, (s, &l)| {
        if s == site {
            kron(&acc, op)
        } else {
            kron(&acc, &CMatrix::identity(l, l))
        }
    }))
}

#[derive(Clone, Debug)]
pub struct NodeTerm {
    pub omega: f64,
    pub operator: Hermitian,
}

/// Two-body term `α_{k,j} A_k A_j`.
#[derive(Clone, Debug)]
pub struct Coupling {
    pub k: usize,
    pub j: usize,
    pub alpha: C64,
    pub a_k: Hermitian,
    pub a_j: Hermitian,
}

impl Coupling {
    pub fn term(&self) -> CMatrix {
        self.a_k.matrix() * self.a_j.matrix() * self.alpha
    }
}

#[derive(Clone, Debug)]
pub struct ManyBodySpec {
    pub dim: usize,
    pub nodes: Vec<NodeTerm>,
    pub couplings: Vec<Coupling>,
}

const ASSEMBLY_TOL: f64 = 1e-12;

fn hermitian_defect(m: &CMatrix) -> (f64, f64) {
    (spectral_norm(&(m - m.adjoint())), spectral_norm(m))
}

/// Returns `(H₀, H_int)` with `H₀ = Σ ω_k H_k` and `H_int = Σ α_{k,j} A_k A_j`.
///
/// Each `(k, j)` coupling must be accompanied by a `(j, k)` entry, and every
/// such pair must sum to a Hermitian operator; the first offending pair is
/// named in the error.
pub fn assemble_hamiltonian(spec: &ManyBodySpec) -> Result<(Hermitian, Hermitian)> {
    let d = spec.dim;
    let check_dim = |h: &Hermitian, what: String| -> Result<()> {
        if h.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "{what} is {}x{}, expected {d}x{d}",
                h.dim(),
                h.dim()
            )));
        }
        Ok(())
    };
    let mut h0 = CMatrix::zeros(d, d);
    for (n, node) in spec.nodes.iter().enumerate() {
        check_dim(&node.operator, format!("node operator {n}"))?;
        h0 += node.operator.matrix() * C64::new(node.omega, 0.0);
    }

    let mut pairs: BTreeMap<(usize, usize), CMatrix> = BTreeMap::new();
    for (n, c) in spec.couplings.iter().enumerate() {
        check_dim(&c.a_k, format!("coupling {n} operator A_{}", c.k))?;
        check_dim(&c.a_j, format!("coupling {n} operator A_{}", c.j))?;
        if c.k == c.j {
            return Err(Error::NonHermitianCoupling(format!(
                "coupling {n} links node {} to itself",
                c.k
            )));
        }
        if !spec.couplings.iter().any(|o| o.k == c.j && o.j == c.k) {
            return Err(Error::NonHermitianCoupling(format!(
                "pair ({},{}) has no matching ({},{}) entry",
                c.k, c.j, c.j, c.k
            )));
        }
        *pairs
            .entry((c.k.min(c.j), c.k.max(c.j)))
            .or_insert_with(|| CMatrix::zeros(d, d)) += c.term();
    }
    let mut h_int = CMatrix::zeros(d, d);
    for ((k, j), pair_sum) in &pairs {
        let (defect, scale) = hermitian_defect(pair_sum);
        if defect > ASSEMBLY_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NonHermitianCoupling(format!(
                "pair ({k},{j}) contributes a non-Hermitian term (‖S − S†‖ = {defect:.3e})"
            )));
        }
        h_int += pair_sum;
    }
    let (defect, scale) = hermitian_defect(&h_int);
    if defect > ASSEMBLY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NonHermitianCoupling(format!(
            "assembled interaction is non-Hermitian (‖H − H†‖ = {defect:.3e})"
        )));
    }
    let (defect, scale) = hermitian_defect(&h0);
    if defect > ASSEMBLY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NonHermitianCoupling(format!(
            "local Hamiltonian is non-Hermitian (‖H − H†‖ = {defect:.3e})"
        )));
    }
    Ok((Hermitian::symmetrized(h0), Hermitian::symmetrized(h_int)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_extreme_probabilities() {
        let mut rng = SeededRng::new(1).next_rng();
        let empty = erdos_renyi(6, 0.0, &mut rng).unwrap();
        assert_eq!(empty, AdjacencyMatrix::empty(6));
        let full = erdos_renyi(6, 1.0, &mut rng).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(full.linked(i, j), i != j);
            }
        }
        assert!(erdos_renyi(1, 0.5, &mut rng).is_err());
        assert!(erdos_renyi(4, 1.5, &mut rng).is_err());
    }

    #[test]
    fn er_edge_count_statistics() {
        // Binomial(435, 0.5): mean 217.5, sd of the mean over 1000 draws 0.33.
        let mut master = SeededRng::new(42);
        let draws = 1000;
        let total: usize = (0..draws)
            .map(|_| erdos_renyi(30, 0.5, &mut master.next_rng()).unwrap().edge_count())
            .sum();
        let mean = total as f64 / draws as f64;
        let sd = (435.0f64 * 0.25 / draws as f64).sqrt();
        assert!((mean - 217.5).abs() <= 3.0 * sd, "mean {mean}");
    }

    #[test]
    fn er_is_reproducible_and_admissible() {
        let seeds = SeededRng::new(9).derive(&[12, 3]);
        let a = erdos_renyi(12, 0.4, &mut seeds.clone().next_rng()).unwrap();
        let b = erdos_renyi(12, 0.4, &mut seeds.clone().next_rng()).unwrap();
        assert_eq!(a, b);
        let m = a.to_matrix();
        assert_eq!(AdjacencyMatrix::from_matrix(&m).unwrap(), a);
        let adm = a.to_admissible();
        assert!((0..12).all(|i| adm.matrix()[(i, i)] == ZERO));
    }

    #[test]
    fn derived_seeds_differ() {
        let root = SeededRng::new(5);
        assert_ne!(root.derive(&[2, 0]).seed(), root.derive(&[2, 1]).seed());
        assert_ne!(root.derive(&[2, 0]).seed(), root.derive(&[3, 0]).seed());
    }

    #[test]
    fn basis_density_examples() {
        let rho = basis_density(2, 0).unwrap();
        assert_eq!(rho.matrix(), &Hermitian::diagonal(&[1.0, 0.0]).into_matrix());
        let rho = basis_density(5, 2).unwrap();
        assert_eq!(rho.matrix()[(2, 2)], ONE);
        assert_eq!(rho.matrix().iter().filter(|z| **z != ZERO).count(), 1);
        assert!((rho.as_hermitian().trace() - 1.0).abs() < 1e-15);
        assert!(rho.min_eigenvalue() >= -1e-15);
        assert!(matches!(basis_density(3, 3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn from_matrix_rejects_bad_adjacency() {
        let mut m = pauli_x();
        m[(0, 0)] = ONE;
        assert!(AdjacencyMatrix::from_matrix(&m).is_err());
        let asym = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(AdjacencyMatrix::from_matrix(&asym).is_err());
    }

    #[test]
    fn empty_coupling_list() {
        let spec = ManyBodySpec {
            dim: 2,
            nodes: vec![NodeTerm {
                omega: 0.5,
                operator: Hermitian::new(pauli_z()).unwrap(),
            }],
            couplings: vec![],
        };
        let (h0, hint) = assemble_hamiltonian(&spec).unwrap();
        assert_eq!(hint, Hermitian::zeros(2));
        assert_eq!(h0.matrix(), &(pauli_z() * C64::new(0.5, 0.0)));
    }

    fn two_qubit_xx(alpha_kj: C64, alpha_jk: C64) -> ManyBodySpec {
        let levels = [2, 2];
        let a1 = Hermitian::new(local_operator(&pauli_x(), 0, &levels).unwrap()).unwrap();
        let a2 = Hermitian::new(local_operator(&pauli_x(), 1, &levels).unwrap()).unwrap();
        ManyBodySpec {
            dim: 4,
            nodes: vec![],
            couplings: vec![
                Coupling { k: 0, j: 1, alpha: alpha_kj, a_k: a1.clone(), a_j: a2.clone() },
                Coupling { k: 1, j: 0, alpha: alpha_jk, a_k: a2, a_j: a1 },
            ],
        }
    }

    #[test]
    fn two_qubit_xx_interaction() {
        let alpha = C64::new(0.3, 0.0);
        let (_, hint) = assemble_hamiltonian(&two_qubit_xx(alpha, alpha)).unwrap();
        let expected = kron(&pauli_x(), &pauli_x()) * (alpha * 2.0);
        assert!((hint.matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn commuting_terms_are_individually_hermitian() {
        let spec = two_qubit_xx(C64::new(0.7, 0.0), C64::new(0.7, 0.0));
        for c in &spec.couplings {
            let t = c.term();
            assert!((&t - t.adjoint()).norm() < 1e-15);
        }
    }

    #[test]
    fn non_hermitian_pair_is_named() {
        let spec = two_qubit_xx(C64::new(0.0, 1.0), C64::new(0.0, 1.0));
        match assemble_hamiltonian(&spec) {
            Err(Error::NonHermitianCoupling(msg)) => assert!(msg.contains("(0,1)"), "{msg}"),
            other => panic!("expected rejection, got {other:?}"),
        }
        let mut lonely = two_qubit_xx(ONE, ONE);
        lonely.couplings.pop();
        assert!(matches!(assemble_hamiltonian(&lonely), Err(Error::NonHermitianCoupling(_))));
    }

    #[test]
    fn non_commuting_pair_with_conjugate_weights_is_hermitian() {
        // α A_k A_j + conj(α) A_j A_k is Hermitian even when A_k, A_j do not commute.
        let x = Hermitian::new(pauli_x()).unwrap();
        let z = Hermitian::new(pauli_z()).unwrap();
        let alpha = C64::new(0.4, 0.9);
        let spec = ManyBodySpec {
            dim: 2,
            nodes: vec![],
            couplings: vec![
                Coupling { k: 0, j: 1, alpha, a_k: x.clone(), a_j: z.clone() },
                Coupling { k: 1, j: 0, alpha: alpha.conj(), a_k: z, a_j: x },
            ],
        };
        let (_, hint) = assemble_hamiltonian(&spec).unwrap();
        let m = hint.matrix();
        assert!(spectral_norm(&(m - m.adjoint())) <= 1e-12 * spectral_norm(m));
    }
}
