//! Transfer-function algebra for strictly stable discrete-time systems.
//!
//! Systems live in partial-fraction form `G(z) = sum_j R_j / (z - lambda_j)`
//! with all poles inside the open unit disk, or as state-space quadruples
//! `(A, B, C, noise_cov)`. On top of these representations the module
//! provides the H2 inner-product geometry (Gram and cross-Gram matrices),
//! orthogonal projection onto a fixed pole basis together with its exact
//! bias, the closed-form scalar projection error, a priori bias bounds,
//! realization in both directions, closed-loop simulation, and input
//! spectral-density extremes.

mod gram;
mod realize;
mod sim;

pub use gram::{
    bias_upper_bound, gram_matrix, h2_norm, optimal_projection, projection_error,
    scalar_error_closed_form,
};
pub use realize::{pf_to_ss, ss_to_pf};
pub(crate) use realize::eigenvalues;
pub use sim::{
    closed_loop_matrix, psd_bounds, psd_bounds_on_grid, simulate_closed_loop, simulate_driven,
    InputModel,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum pairwise pole separation accepted in a partial-fraction form.
pub(crate) const POLE_SEPARATION: f64 = 1e-10;

/// One pole together with its matrix residue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfTerm {
    #[serde(with = "crate::serdes::complex_num")]
    pub lambda: Complex64,
    #[serde(with = "crate::serdes::complex_mat")]
    pub residue: DMatrix<Complex64>,
}

/// A strictly stable transfer function in partial-fraction form.
///
/// `dims` is `(p, m)`: every residue is a `p x m` complex matrix. Poles are
/// pairwise distinct; repeated poles have no representation here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialFractionTF {
    pub terms: Vec<PfTerm>,
    pub dims: (usize, usize),
}

impl PartialFractionTF {
    pub fn new(terms: Vec<(Complex64, DMatrix<Complex64>)>) -> Result<Self> {
        let first_dims = match terms.first() {
            Some((_, r)) => (r.nrows(), r.ncols()),
            None => return Err(Error::Arity("transfer function needs at least one term".into())),
        };
        let tf = PartialFractionTF {
            terms: terms
                .into_iter()
                .map(|(lambda, residue)| PfTerm { lambda, residue })
                .collect(),
            dims: first_dims,
        };
        tf.validate()?;
        Ok(tf)
    }

    /// Convenience constructor for single-input single-output systems.
    pub fn siso(terms: &[(Complex64, Complex64)]) -> Result<Self> {
        Self::new(
            terms
                .iter()
                .map(|&(l, r)| (l, DMatrix::from_element(1, 1, r)))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Arity("transfer function needs at least one term".into()));
        }
        let (p, m) = self.dims;
        for (j, term) in self.terms.iter().enumerate() {
            if term.residue.nrows() != p || term.residue.ncols() != m {
                return Err(Error::Dimension(format!(
                    "residue {j} is {}x{}, expected {p}x{m}",
                    term.residue.nrows(),
                    term.residue.ncols()
                )));
            }
            if term.lambda.norm() >= 1.0 {
                return Err(Error::Stability(format!(
                    "pole {} lies outside the open unit disk",
                    term.lambda
                )));
            }
        }
        for j in 0..self.terms.len() {
            for k in j + 1..self.terms.len() {
                let sep = (self.terms[j].lambda - self.terms[k].lambda).norm();
                if sep <= POLE_SEPARATION {
                    return Err(Error::Degenerate(format!(
                        "poles {j} and {k} are only {sep:.3e} apart"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.terms.len()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.terms.iter().map(|t| t.lambda).collect()
    }

    /// Largest pole modulus.
    pub fn rho(&self) -> f64 {
        self.terms.iter().map(|t| t.lambda.norm()).fold(0.0, f64::max)
    }

    /// Residues side by side as a `p x (n m)` block row.
    pub fn stacked_residues(&self) -> DMatrix<Complex64> {
        let (p, m) = self.dims;
        let mut out = DMatrix::zeros(p, self.terms.len() * m);
        for (j, term) in self.terms.iter().enumerate() {
            out.view_mut((0, j * m), (p, m)).copy_from(&term.residue);
        }
        out
    }

    /// Markov parameter `H_t = sum_j R_j lambda_j^(t-1)`; zero for `t = 0`.
    pub fn markov(&self, t: usize) -> DMatrix<Complex64> {
        let (p, m) = self.dims;
        let mut out = DMatrix::zeros(p, m);
        if t == 0 {
            return out;
        }
        for term in &self.terms {
            out += &term.residue * term.lambda.powu(t as u32 - 1);
        }
        out
    }

    /// Pointwise value `sum_j R_j / (z - lambda_j)`.
    pub fn evaluate(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        let (p, m) = self.dims;
        let mut out = DMatrix::zeros(p, m);
        for term in &self.terms {
            let d = z - term.lambda;
            if d.norm() < 1e-14 {
                return Err(Error::Singularity(format!(
                    "evaluation point {z} coincides with pole {}",
                    term.lambda
                )));
            }
            out += &term.residue * (Complex64::new(1.0, 0.0) / d);
        }
        Ok(out)
    }
}

/// A discrete-time state-space model `x+ = A x + B u`, `y = C x + v` with
/// measurement noise `v ~ N(0, noise_cov)`.
///
/// `A` must be strictly stable and `noise_cov` symmetric positive
/// semidefinite (the all-zero matrix models a noise-free plant; operations
/// that invert the covariance insist on strict definiteness themselves).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceModel {
    #[serde(with = "crate::serdes::complex_mat")]
    pub a: DMatrix<Complex64>,
    #[serde(with = "crate::serdes::complex_mat")]
    pub b: DMatrix<Complex64>,
    #[serde(with = "crate::serdes::complex_mat")]
    pub c: DMatrix<Complex64>,
    #[serde(with = "crate::serdes::real_mat")]
    pub noise_cov: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(
        a: DMatrix<Complex64>,
        b: DMatrix<Complex64>,
        c: DMatrix<Complex64>,
        noise_cov: DMatrix<f64>,
    ) -> Result<Self> {
        let sys = StateSpaceModel { a, b, c, noise_cov };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if self.a.ncols() != n {
            return Err(Error::Dimension(format!(
                "state matrix is {}x{}, expected square",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.b.nrows() != n {
            return Err(Error::Dimension(format!(
                "input matrix has {} rows, expected {n}",
                self.b.nrows()
            )));
        }
        if self.c.ncols() != n {
            return Err(Error::Dimension(format!(
                "output matrix has {} columns, expected {n}",
                self.c.ncols()
            )));
        }
        let p = self.c.nrows();
        if self.noise_cov.nrows() != p || self.noise_cov.ncols() != p {
            return Err(Error::Dimension(format!(
                "noise covariance is {}x{}, expected {p}x{p}",
                self.noise_cov.nrows(),
                self.noise_cov.ncols()
            )));
        }
        let scale = 1.0 + self.noise_cov.amax();
        if (&self.noise_cov - self.noise_cov.transpose()).amax() > 1e-10 * scale {
            return Err(Error::Domain("noise covariance is not symmetric".into()));
        }
        let eigs = self.noise_cov.clone().symmetric_eigen().eigenvalues;
        if eigs.iter().any(|&e| e < -1e-10 * scale) {
            return Err(Error::Domain(
                "noise covariance is not positive semidefinite".into(),
            ));
        }
        let rho = self.spectral_radius();
        if rho >= 1.0 {
            return Err(Error::Stability(format!(
                "state matrix has spectral radius {rho:.6}, expected < 1"
            )));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        realize::eigenvalues(&self.a)
            .iter()
            .map(|e| e.norm())
            .fold(0.0, f64::max)
    }

    /// Markov parameters `C A^(t-1) B` for `t = 1..=count`.
    pub fn markov_sequence(&self, count: usize) -> Vec<DMatrix<Complex64>> {
        let mut out = Vec::with_capacity(count);
        let mut akb = self.b.clone();
        for _ in 0..count {
            out.push(&self.c * &akb);
            akb = &self.a * akb;
        }
        out
    }

    /// Symmetric square root of the noise covariance, with tiny negative
    /// eigenvalues clamped to zero.
    pub(crate) fn noise_sqrt(&self) -> DMatrix<f64> {
        let eig = self.noise_cov.clone().symmetric_eigen();
        let vals = eig.eigenvalues.map(|e| e.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
    }
}

/// Feedback and probing filters that close the loop: `u = G_u y + H_u eps`.
///
/// Both filters are strictly proper state-space models, so the current input
/// depends on outputs and probing noise up to the previous step only; the
/// plant itself has no direct feedthrough either, which keeps the
/// interconnection well posed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub g_u: StateSpaceModel,
    pub h_u: StateSpaceModel,
}

impl Controller {
    pub fn new(g_u: StateSpaceModel, h_u: StateSpaceModel) -> Result<Self> {
        if g_u.output_dim() != h_u.output_dim() {
            return Err(Error::Dimension(format!(
                "feedback filter drives {} inputs but probing filter drives {}",
                g_u.output_dim(),
                h_u.output_dim()
            )));
        }
        Ok(Controller { g_u, h_u })
    }
}

/// H2 inner-product data for one pole set against the basis poles.
///
/// `xi_mumu` is the `q m x q m` basis Gram matrix with scalar blocks
/// `1 / (1 - mu_j conj(mu_k))`, `p_lambda_mu` stacks one `m x q m` cross
/// block row per system pole with entries `1 / (1 - lambda_j conj(mu_k))`,
/// and `phi_lambda` holds the squared norms `1 / (1 - |lambda_j|^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrices {
    pub xi_mumu: DMatrix<Complex64>,
    pub p_lambda_mu: DMatrix<Complex64>,
    pub phi_lambda: Vec<f64>,
}

impl GramMatrices {
    pub fn build(lambdas: &[Complex64], mus: &[Complex64], m: usize) -> Result<Self> {
        for l in lambdas {
            if l.norm() >= 1.0 {
                return Err(Error::Domain(format!("pole {l} outside the open unit disk")));
            }
        }
        let xi_mumu = gram_matrix(mus, m)?;
        let cross = gram::cross_gram(lambdas, mus);
        let p_lambda_mu = kron_identity(&cross, m);
        let phi_lambda = lambdas.iter().map(|l| 1.0 / (1.0 - l.norm_sqr())).collect();
        Ok(GramMatrices {
            xi_mumu,
            p_lambda_mu,
            phi_lambda,
        })
    }
}

/// Coarse size data entering the a priori bias bounds: total residue energy
/// `r_bar = sum_j ||R_j||_F`, pole radius `rho_lambda = max_j |lambda_j|`,
/// and the input spectral-density spread `psd_ratio = sup / inf >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    pub r_bar: f64,
    pub rho_lambda: f64,
    pub psd_ratio: f64,
}

impl EnergyBudget {
    pub fn new(r_bar: f64, rho_lambda: f64, psd_ratio: f64) -> Result<Self> {
        if !r_bar.is_finite() || r_bar < 0.0 {
            return Err(Error::Domain(format!("residue energy {r_bar} must be finite and >= 0")));
        }
        if !(0.0..1.0).contains(&rho_lambda) {
            return Err(Error::Domain(format!(
                "pole radius {rho_lambda} must lie in [0, 1)"
            )));
        }
        if !psd_ratio.is_finite() || psd_ratio < 1.0 {
            return Err(Error::Domain(format!(
                "spectral-density ratio {psd_ratio} must be finite and >= 1"
            )));
        }
        Ok(EnergyBudget {
            r_bar,
            rho_lambda,
            psd_ratio,
        })
    }

    /// Reads `r_bar` and `rho_lambda` off a transfer function.
    pub fn from_tf(tf: &PartialFractionTF, psd_ratio: f64) -> Result<Self> {
        let r_bar = tf.terms.iter().map(|t| t.residue.norm()).sum();
        Self::new(r_bar, tf.rho(), psd_ratio)
    }
}

/// Kronecker product of a small matrix with the `m x m` identity.
pub(crate) fn kron_identity(small: &DMatrix<Complex64>, m: usize) -> DMatrix<Complex64> {
    small.kronecker(&DMatrix::<Complex64>::identity(m, m))
}
