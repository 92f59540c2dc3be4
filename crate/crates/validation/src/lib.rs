//! Reference computations that check the library by routes it does not use.

use nalgebra::DMatrix;
use qnet_core::linalg::{eig_hermitian, CMatrix, Hermitian, C64};

/// Dimension of the admissible commutant of `p`, computed in the
/// eigenbasis of `p`.
///
/// Matrices commuting with `p` are block diagonal over its eigenspaces.
/// Eigenvalues closer than `cluster_tol · max|λ|` share a block. The
/// admissible ones are the block-diagonal Hermitian matrices whose
/// diagonal vanishes in the original basis.
pub fn admissible_commutant_dim(p: &Hermitian, cluster_tol: f64) -> usize {
    let d = p.dim();
    let eig = eig_hermitian(p);
    let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for a in 0..d {
        match groups.last_mut() {
            Some(g) if (eig.values[a] - eig.values[*g.last().unwrap()]).abs() <= cluster_tol * scale => g.push(a),
            _ => groups.push(vec![a]),
        }
    }
    let v = &eig.vectors;
    let mut basis: Vec<CMatrix> = Vec::new();
    for g in &groups {
        for (x, &a) in g.iter().enumerate() {
            let mut e = CMatrix::zeros(d, d);
            e[(a, a)] = C64::new(1.0, 0.0);
            basis.push(e);
            for &b in &g[x + 1..] {
                let mut re = CMatrix::zeros(d, d);
                re[(a, b)] = C64::new(1.0, 0.0);
                re[(b, a)] = C64::new(1.0, 0.0);
                let mut im = CMatrix::zeros(d, d);
                im[(a, b)] = C64::new(0.0, 1.0);
                im[(b, a)] = C64::new(0.0, -1.0);
                basis.push(re);
                basis.push(im);
            }
        }
    }
    let diag_map = DMatrix::<f64>::from_fn(d, basis.len(), |i, c| {
        let m = v * &basis[c] * v.adjoint();
        m[(i, i)].re
    });
    let sv = diag_map.singular_values();
    let smax = sv.iter().fold(0.0f64, |m, &s| m.max(s));
    let rank = sv.iter().filter(|&&s| s > 1e-9 * smax.max(1.0)).count();
    basis.len() - rank
}

/// Composite trapezoid rule written out directly from the sample list.
pub fn trapezoid_reference(samples: &[CMatrix], dt: f64) -> CMatrix {
    let n = samples.len();
    let mut acc = CMatrix::zeros(samples[0].nrows(), samples[0].ncols());
    for k in 1..n {
        acc += (&samples[k - 1] + &samples[k]) * C64::new(0.5 * dt, 0.0);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commutant_of_scalar_and_generic() {
        assert_eq!(admissible_commutant_dim(&Hermitian::identity(3), 1e-9), 6);
        assert_eq!(admissible_commutant_dim(&Hermitian::diagonal(&[1.0, 2.0, 3.0]), 1e-9), 0);
        assert_eq!(admissible_commutant_dim(&Hermitian::diagonal(&[1.0, 1.0, 3.0]), 1e-9), 2);
    }
}
