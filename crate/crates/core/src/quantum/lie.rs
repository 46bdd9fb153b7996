use nalgebra::DMatrix;
use num_complex::Complex64;

use super::operator::HermitianOperator;
use crate::{Error, Result};

pub const DEFAULT_CLOSURE_TOLERANCE: f64 = 1e-10;

/// Real dimension of the Lie algebra generated by `{iG_k}`.
///
/// Works with the Hermitian representatives: the bracket of `iA` and `iB`
/// corresponds to the Hermitian `i[A, B]`. Each candidate is traceless-
/// projected, orthogonalised against the current basis under the real
/// Hilbert–Schmidt product `Re tr(A†B)`, and kept only when its residual
/// norm exceeds `tolerance` times its original norm. Closure repeats until
/// a full pass over all basis pairs adds nothing.
pub fn lie_algebra_rank(generators: &[HermitianOperator], tolerance: f64) -> Result<usize> {
    let first = generators.first().ok_or(Error::Empty("generator list"))?;
    let d = first.dim();
    if let Some(g) = generators.iter().find(|g| g.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, actual: g.dim() });
    }
    let max_dim = d * d - 1;
    let mut basis: Vec<DMatrix<Complex64>> = Vec::new();
    for g in generators {
        try_extend(&mut basis, traceless(g.matrix()), tolerance);
    }
    let i = Complex64::new(0.0, 1.0);
    let mut checked = 0;
    // pairs (a, b) with b < len are visited exactly once across passes
    while checked < basis.len() && basis.len() < max_dim {
        let b = checked;
        for a in 0..b {
            let comm = (&basis[a] * &basis[b] - &basis[b] * &basis[a]) * i;
            try_extend(&mut basis, comm, tolerance);
            if basis.len() == max_dim {
                break;
            }
        }
        checked += 1;
    }
    Ok(basis.len())
}

fn traceless(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let d = m.nrows();
    let shift = m.trace() / Complex64::new(d as f64, 0.0);
    let mut out = m.clone();
    for k in 0..d {
        out[(k, k)] -= shift;
    }
    out
}

fn hs_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn try_extend(basis: &mut Vec<DMatrix<Complex64>>, candidate: DMatrix<Complex64>, tolerance: f64) -> bool {
    let norm0 = hs_inner(&candidate, &candidate).sqrt();
    if norm0 == 0.0 {
        return false;
    }
    let mut v = candidate;
    // two sweeps of modified Gram–Schmidt
    for _ in 0..2 {
        for e in basis.iter() {
            let c = hs_inner(e, &v);
            v -= e * Complex64::new(c, 0.0);
        }
    }
    let norm = hs_inner(&v, &v).sqrt();
    if norm < tolerance * norm0.max(1.0) {
        return false;
    }
    basis.push(v / Complex64::new(norm, 0.0));
    true
}
