//! Conversions between partial-fraction and state-space form, plus the
//! shared complex eigenvalue and transfer-function evaluation helpers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

use super::{PartialFractionTF, StateSpaceModel};

/// Unitary Schur pair `(Q, T)` with `A = Q T Q^H` and `T` upper triangular.
///
/// Hermitian inputs go through the tridiagonal eigensolver, whose shifted
/// QR iteration converges unconditionally; everything else uses the
/// bounded Schur iteration. The unbounded complex QR loop can cycle
/// forever on matrices with exactly repeated eigenvalue patterns (a
/// symmetric grid Laplacian, say), so on a failed bounded run the
/// diagonal is nudged by a tiny deterministic jitter to break the cycle
/// before trying again.
pub(crate) fn schur_triangular(a: &DMatrix<Complex64>) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let n = a.nrows();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let hermitian = (0..n).all(|i| {
        (i..n).all(|j| {
            let d = a[(i, j)] - a[(j, i)].conj();
            d.norm() <= 1e-12 * scale
        })
    });
    if hermitian {
        let eig = a.clone().symmetric_eigen();
        let t = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::new(e, 0.0)));
        return (eig.eigenvectors, t);
    }
    if let Some(s) = a.clone().try_schur(f64::EPSILON, 100_000) {
        return s.unpack();
    }
    for jitter in [1e-13, 1e-10] {
        let mut b = a.clone();
        for i in 0..n {
            let phase = (i as f64 + 1.0) / (n as f64 + 1.0);
            b[(i, i)] += Complex64::new(jitter * scale * phase, jitter * scale * (1.0 - phase));
        }
        if let Some(s) = b.try_schur(f64::EPSILON, 100_000) {
            return s.unpack();
        }
    }
    a.clone().schur().unpack()
}

/// Eigenvalues of a complex matrix via its Schur form.
pub(crate) fn eigenvalues(a: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    let (_, t) = schur_triangular(a);
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Eigenvalues and eigenvectors of a diagonalizable complex matrix.
///
/// Works on the Schur form: each eigenvector of the triangular factor is
/// found by back substitution and rotated back. A zero pivot with a
/// nonzero numerator means a Jordan block, which is reported as a
/// degenerate matrix.
fn complex_eigenpairs(a: &DMatrix<Complex64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let n = a.nrows();
    let (q, t) = schur_triangular(a);
    let scale = t.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut v = DMatrix::<Complex64>::zeros(n, n);
    let mut eigs = Vec::with_capacity(n);
    for i in 0..n {
        let lambda = t[(i, i)];
        eigs.push(lambda);
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        w[i] = Complex64::new(1.0, 0.0);
        for k in (0..i).rev() {
            let mut num = Complex64::new(0.0, 0.0);
            for (l, wl) in w.iter().enumerate().take(i + 1).skip(k + 1) {
                num += t[(k, l)] * wl;
            }
            let den = t[(k, k)] - lambda;
            if den.norm() <= 1e-12 * scale {
                if num.norm() <= 1e-10 * scale {
                    w[k] = Complex64::new(0.0, 0.0);
                } else {
                    return Err(Error::Degenerate(
                        "matrix is defective; no eigenvector basis exists".into(),
                    ));
                }
            } else {
                w[k] = -num / den;
            }
        }
        let mut col = &q * DMatrix::from_column_slice(n, 1, &w);
        let norm = col.norm();
        col /= Complex64::new(norm, 0.0);
        v.set_column(i, &col.column(0));
    }
    let lambda_mat = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eigs.clone()));
    let residual = (a * &v - &v * lambda_mat).norm();
    if residual > 1e-8 * (1.0 + a.norm()) {
        return Err(Error::Degenerate(format!(
            "eigendecomposition residual {residual:.3e} is too large; matrix is near defective"
        )));
    }
    Ok((eigs, v))
}

/// Builds a minimal-by-construction state-space realization of a
/// partial-fraction transfer function.
///
/// Every residue is rank-factorized through its singular value
/// decomposition (cutoff `1e-12` relative to the largest singular value);
/// each retained dyad contributes one state with the term's pole on the
/// diagonal of `A`. The realized dimension is the sum of residue ranks.
/// The noise covariance of the result defaults to the identity.
pub fn pf_to_ss(g: &PartialFractionTF) -> Result<StateSpaceModel> {
    g.validate()?;
    let (p, m) = g.dims;
    let mut diag = Vec::new();
    let mut b_rows: Vec<nalgebra::RowDVector<Complex64>> = Vec::new();
    let mut c_cols: Vec<nalgebra::DVector<Complex64>> = Vec::new();
    for term in &g.terms {
        let svd = term.residue.clone().svd(true, true);
        let u = svd.u.as_ref().expect("svd computed with u");
        let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
        let smax = svd.singular_values.max();
        if smax <= 0.0 {
            continue;
        }
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s < 1e-12 * smax {
                continue;
            }
            let root = Complex64::new(s.sqrt(), 0.0);
            diag.push(term.lambda);
            c_cols.push(u.column(i).into_owned() * root);
            b_rows.push(v_t.row(i).into_owned() * root);
        }
    }
    let dim = diag.len();
    let a = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            diag[i]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let mut b = DMatrix::zeros(dim, m);
    let mut c = DMatrix::zeros(p, dim);
    for (i, row) in b_rows.iter().enumerate() {
        b.row_mut(i).copy_from(row);
    }
    for (i, col) in c_cols.iter().enumerate() {
        c.column_mut(i).copy_from(col);
    }
    StateSpaceModel::new(a, b, c, DMatrix::identity(p, p))
}

/// Expands a diagonalizable state-space model into partial fractions.
///
/// Eigen-transforms `(A, B, C)`, reads one rank-one residue per state, and
/// merges residues whose eigenvalues agree within `1e-8`.
pub fn ss_to_pf(sys: &StateSpaceModel) -> Result<PartialFractionTF> {
    sys.validate()?;
    let n = sys.state_dim();
    if n == 0 {
        return Err(Error::Arity(
            "empty state space has no partial-fraction form".into(),
        ));
    }
    let (eigs, v) = complex_eigenpairs(&sys.a)?;
    let lu = v.clone().lu();
    let b_t = lu.solve(&sys.b).ok_or_else(|| {
        Error::Degenerate("eigenvector basis is numerically singular".into())
    })?;
    if (&v * &b_t - &sys.b).norm() > 1e-6 * (1.0 + sys.b.norm()) {
        return Err(Error::Degenerate(
            "eigenvector basis is too ill conditioned to transform the inputs".into(),
        ));
    }
    let c_t = &sys.c * &v;

    // Group eigenvalues into clusters no wider than the merge tolerance.
    let mut assigned = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if assigned[i] != usize::MAX {
            continue;
        }
        let gid = groups.len();
        let mut stack = vec![i];
        assigned[i] = gid;
        let mut members = Vec::new();
        while let Some(j) = stack.pop() {
            members.push(j);
            for k in 0..n {
                if assigned[k] == usize::MAX && (eigs[j] - eigs[k]).norm() <= 1e-8 {
                    assigned[k] = gid;
                    stack.push(k);
                }
            }
        }
        groups.push(members);
    }

    let (p, m) = (sys.output_dim(), sys.input_dim());
    let mut terms = Vec::with_capacity(groups.len());
    for members in &groups {
        let lambda = members.iter().map(|&i| eigs[i]).sum::<Complex64>()
            / Complex64::new(members.len() as f64, 0.0);
        let mut residue = DMatrix::<Complex64>::zeros(p, m);
        for &i in members {
            residue += c_t.column(i) * b_t.row(i);
        }
        terms.push((lambda, residue));
    }
    PartialFractionTF::new(terms)
}

/// Evaluates `C (zI - A)^{-1} B` on many points cheaply.
///
/// The state matrix is Schur-factorized once; each evaluation then costs a
/// single triangular solve.
pub(crate) struct TfEvaluator {
    cq: DMatrix<Complex64>,
    t: DMatrix<Complex64>,
    qhb: DMatrix<Complex64>,
    outputs: usize,
    inputs: usize,
}

impl TfEvaluator {
    pub(crate) fn new(sys: &StateSpaceModel) -> Self {
        let n = sys.state_dim();
        if n == 0 {
            return TfEvaluator {
                cq: sys.c.clone(),
                t: DMatrix::zeros(0, 0),
                qhb: sys.b.clone(),
                outputs: sys.output_dim(),
                inputs: sys.input_dim(),
            };
        }
        let (q, t) = schur_triangular(&sys.a);
        TfEvaluator {
            cq: &sys.c * &q,
            t,
            qhb: q.adjoint() * &sys.b,
            outputs: sys.output_dim(),
            inputs: sys.input_dim(),
        }
    }

    pub(crate) fn eval(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        if self.t.nrows() == 0 {
            return Ok(DMatrix::zeros(self.outputs, self.inputs));
        }
        let n = self.t.nrows();
        let mut shifted = -self.t.clone();
        for i in 0..n {
            shifted[(i, i)] += z;
        }
        let x = shifted.solve_upper_triangular(&self.qhb).ok_or_else(|| {
            Error::Singularity(format!("evaluation point {z} is an eigenvalue of the system"))
        })?;
        Ok(&self.cq * x)
    }
}
