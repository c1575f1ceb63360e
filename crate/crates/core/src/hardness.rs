//! Information-theoretic limits of pole identification: surrogate systems
//! that are hard to tell apart from the truth, exact KL divergences between
//! the output distributions they induce, and the sample-size floors those
//! divergences imply.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hyperbolic::tau_analytic;
use crate::lti::{
    optimal_projection, pf_to_ss, simulate_closed_loop, EnergyBudget, InputModel,
    PartialFractionTF, StateSpaceModel,
};
use crate::pole_select::{minimax_poles, worst_case_rate, SelectOptions};
use crate::region::PoleRegion;

/// Dense convolution matrices are capped at this horizon.
const HORIZON_CAP: usize = 2000;

/// A two-point hypothesis: data generated either by `g_true` or by
/// `g_surrogate`, both observed through Gaussian noise with covariance
/// `noise_cov` over `n_samples` steps.
///
/// The surrogate keeps the true system's order, so the pair differs only
/// in where the poles sit and what the residues are.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisPair {
    pub g_true: PartialFractionTF,
    pub g_surrogate: PartialFractionTF,
    pub noise_cov: DMatrix<f64>,
    pub n_samples: usize,
}

impl HypothesisPair {
    pub fn new(
        g_true: PartialFractionTF,
        g_surrogate: PartialFractionTF,
        noise_cov: DMatrix<f64>,
        n_samples: usize,
    ) -> Result<Self> {
        let pair = HypothesisPair {
            g_true,
            g_surrogate,
            noise_cov,
            n_samples,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        self.g_true.validate()?;
        self.g_surrogate.validate()?;
        if self.g_true.dims != self.g_surrogate.dims {
            return Err(Error::Dimension(format!(
                "hypotheses have different shapes {:?} and {:?}",
                self.g_true.dims, self.g_surrogate.dims
            )));
        }
        if self.g_true.terms.len() != self.g_surrogate.terms.len() {
            return Err(Error::Dimension(format!(
                "surrogate order {} differs from the true order {}",
                self.g_surrogate.terms.len(),
                self.g_true.terms.len()
            )));
        }
        let p = self.g_true.dims.0;
        if self.noise_cov.nrows() != p || self.noise_cov.ncols() != p {
            return Err(Error::Dimension(format!(
                "noise covariance is {}x{}, expected {p}x{p}",
                self.noise_cov.nrows(),
                self.noise_cov.ncols()
            )));
        }
        let scale = self.noise_cov.norm().max(1.0);
        if (&self.noise_cov - self.noise_cov.transpose()).norm() > 1e-10 * scale {
            return Err(Error::Domain("noise covariance is not symmetric".into()));
        }
        if nalgebra::Cholesky::new(self.noise_cov.clone()).is_none() {
            return Err(Error::Domain(
                "noise covariance must be positive definite to have a density".into(),
            ));
        }
        Ok(())
    }
}

/// Input description for [`kl_exact`]: either a concrete realized sequence
/// `u_0..u_{N-1}` or the unit white-noise model, under which the exact
/// expectation has a closed trace form.
#[derive(Debug, Clone, Copy)]
pub enum KlInputs<'a> {
    Sequence(&'a [DVector<Complex64>]),
    WhiteNoise,
}

/// The hardest-to-distinguish rational neighbor of `g`: poles fixed at the
/// region's minimax configuration, residues chosen as the H2-optimal
/// projection of `g` onto that basis.
///
/// The true poles must all lie in the region. Regions whose minimax
/// configuration collapses poles together (a rotationally symmetric disk
/// at order two or more, for instance) give an ill-conditioned basis and
/// the projection step reports that; interval regions keep the
/// configuration spread out at any order.
pub fn build_surrogate(g: &PartialFractionTF, region: &PoleRegion) -> Result<PartialFractionTF> {
    g.validate()?;
    for pole in g.poles() {
        if !region.contains(pole, 1e-9) {
            return Err(Error::Domain(format!(
                "true pole {pole} lies outside the approximation region"
            )));
        }
    }
    let n = g.terms.len();
    let (mus, _) = minimax_poles(region, n, &SelectOptions::default())?;
    let (coeffs, _) = optimal_projection(g, &mus)?;
    PartialFractionTF::new(mus.poles.iter().copied().zip(coeffs).collect())
}

/// The block lower-triangular convolution matrix of the first `n` Markov
/// parameters: block `(i, j)` with `i >= j` holds `H_{i-j+1}`, so applying
/// the matrix to stacked inputs produces the stacked zero-noise outputs.
pub fn toeplitz_convolution_matrix(
    g: &PartialFractionTF,
    n: usize,
) -> Result<DMatrix<Complex64>> {
    g.validate()?;
    if n == 0 {
        return Err(Error::Arity("need at least one step".into()));
    }
    if n > HORIZON_CAP {
        return Err(Error::Size(format!(
            "horizon {n} exceeds the dense cap {HORIZON_CAP}"
        )));
    }
    let (p, m) = g.dims;
    let markov: Vec<DMatrix<Complex64>> = (1..=n).map(|t| g.markov(t)).collect();
    let mut toeplitz = DMatrix::<Complex64>::zeros(n * p, n * m);
    for i in 0..n {
        for j in 0..=i {
            toeplitz
                .view_mut((i * p, j * m), (p, m))
                .copy_from(&markov[i - j]);
        }
    }
    Ok(toeplitz)
}

fn markov_diffs(pair: &HypothesisPair, count: usize) -> Vec<DMatrix<Complex64>> {
    (1..=count)
        .map(|t| pair.g_true.markov(t) - pair.g_surrogate.markov(t))
        .collect()
}

fn noise_inverse(noise_cov: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
    let chol = nalgebra::Cholesky::new(noise_cov.clone())
        .ok_or_else(|| Error::Domain("noise covariance must be positive definite".into()))?;
    Ok(chol.inverse().map(|x| Complex64::new(x, 0.0)))
}

/// Largest eigenvalue of the inverse covariance.
fn noise_inverse_norm(noise_cov: &DMatrix<f64>) -> Result<f64> {
    let eigs = noise_cov.clone().symmetric_eigen().eigenvalues;
    let min = eigs.min();
    if min <= 0.0 {
        return Err(Error::Domain(
            "noise covariance must be positive definite".into(),
        ));
    }
    Ok(1.0 / min)
}

fn quadratic_form(
    diffs: &[DMatrix<Complex64>],
    u: &[DVector<Complex64>],
    rinv: &DMatrix<Complex64>,
) -> f64 {
    let p = diffs.first().map_or(0, |h| h.nrows());
    let mut total = 0.0;
    for i in 0..u.len() {
        let mut y = DVector::<Complex64>::zeros(p);
        for (j, u_j) in u.iter().enumerate().take(i + 1) {
            y += &diffs[i - j] * u_j;
        }
        total += (y.adjoint() * rinv * &y)[(0, 0)].re;
    }
    0.5 * total
}

/// KL divergence between the output distributions of the two hypotheses.
///
/// For a concrete input sequence this is the exact quadratic form in the
/// difference of the convolution maps; for the white-noise model it is the
/// exact expectation, a weighted trace over the Markov-parameter
/// differences. Either way the value is nonnegative and symmetric in the
/// two hypotheses because their output covariances agree.
pub fn kl_exact(pair: &HypothesisPair, inputs: &KlInputs) -> Result<f64> {
    pair.validate()?;
    let n = pair.n_samples;
    if n > HORIZON_CAP {
        return Err(Error::Size(format!(
            "horizon {n} exceeds the dense cap {HORIZON_CAP}"
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let diffs = markov_diffs(pair, n);
    match inputs {
        KlInputs::Sequence(u) => {
            if u.len() != n {
                return Err(Error::Dimension(format!(
                    "got {} inputs for a {n}-step horizon",
                    u.len()
                )));
            }
            let m = pair.g_true.dims.1;
            if u.iter().any(|v| v.len() != m) {
                return Err(Error::Dimension(format!("inputs must have length {m}")));
            }
            let rinv = noise_inverse(&pair.noise_cov)?;
            Ok(quadratic_form(&diffs, u, &rinv))
        }
        KlInputs::WhiteNoise => {
            let rinv = noise_inverse(&pair.noise_cov)?;
            let mut total = 0.0;
            for (k, dh) in diffs.iter().enumerate() {
                let weight = (n - k) as f64;
                total += weight * (&rinv * dh * dh.adjoint()).trace().re;
            }
            Ok(0.5 * total)
        }
    }
}

/// Monte Carlo estimate of the expected KL divergence when the input is a
/// stationary colored process: draws input sequences from the model,
/// averages the exact per-sequence divergence, and reports the mean with
/// its standard error. The white-noise model short-circuits to the closed
/// form with zero standard error.
pub fn kl_monte_carlo(
    pair: &HypothesisPair,
    model: &InputModel,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    pair.validate()?;
    if draws == 0 {
        return Err(Error::Arity("need at least one draw".into()));
    }
    match model {
        InputModel::White => Ok((kl_exact(pair, &KlInputs::WhiteNoise)?, 0.0)),
        InputModel::ClosedLoop { plant, controller } => {
            let n = pair.n_samples;
            if n > HORIZON_CAP {
                return Err(Error::Size(format!(
                    "horizon {n} exceeds the dense cap {HORIZON_CAP}"
                )));
            }
            if n == 0 {
                return Ok((0.0, 0.0));
            }
            if plant.input_dim() != pair.g_true.dims.1 {
                return Err(Error::Dimension(format!(
                    "input process produces {}-channel inputs, hypotheses expect {}",
                    plant.input_dim(),
                    pair.g_true.dims.1
                )));
            }
            let diffs = markov_diffs(pair, n);
            let rinv = noise_inverse(&pair.noise_cov)?;
            let mut values = Vec::with_capacity(draws);
            for k in 0..draws {
                let traj =
                    simulate_closed_loop(plant, Some(controller), n, seed.wrapping_add(k as u64))?;
                values.push(quadratic_form(&diffs, &traj.u, &rinv));
            }
            let mean = values.iter().sum::<f64>() / draws as f64;
            let se = if draws > 1 {
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (draws - 1) as f64;
                (var / draws as f64).sqrt()
            } else {
                0.0
            };
            Ok((mean, se))
        }
    }
}

/// Per-dimension minimax decay rate of the region at order `n`: the n-th
/// root of the best achievable boundary worst-case product. This is the
/// finite-order hyperbolic Chebyshev constant; the same number scales the
/// divergence bound and the sample-complexity floor.
pub fn chebyshev_rate(region: &PoleRegion, n: usize) -> Result<f64> {
    let (set, _) = minimax_poles(region, n, &SelectOptions::default())?;
    worst_case_rate(&set)
}

/// Upper bound on the expected KL divergence with the decay rate supplied
/// explicitly (useful when the same region and order are reused across
/// many pairs):
/// `Rbar^2 ||Rinv|| phi_sup / (2 (1 - rho^2)) * tau^(2n) * N`.
///
/// The input spectral density is normalized so its essential infimum is
/// one, which makes the budget's sup/inf ratio its essential supremum;
/// unit white noise gives exactly one.
pub fn kl_bound_with_tau(
    pair: &HypothesisPair,
    budget: &EnergyBudget,
    tau: f64,
) -> Result<f64> {
    pair.validate()?;
    let budget = EnergyBudget::new(budget.r_bar, budget.rho_lambda, budget.psd_ratio)?;
    if !tau.is_finite() || tau <= 0.0 || tau >= 1.0 {
        return Err(Error::Domain(format!(
            "decay rate {tau} must lie strictly between 0 and 1"
        )));
    }
    let n = pair.g_true.terms.len();
    let rinv_norm = noise_inverse_norm(&pair.noise_cov)?;
    let prefactor = budget.r_bar * budget.r_bar * rinv_norm * budget.psd_ratio
        / (2.0 * (1.0 - budget.rho_lambda * budget.rho_lambda));
    Ok(prefactor * tau.powi(2 * n as i32) * pair.n_samples as f64)
}

/// Upper bound on the expected KL divergence of the pair over `N` steps,
/// solving the region's minimax problem at the pair's order to obtain the
/// decay rate.
pub fn kl_bound(
    pair: &HypothesisPair,
    budget: &EnergyBudget,
    region: &PoleRegion,
) -> Result<f64> {
    let tau = chebyshev_rate(region, pair.g_true.terms.len())?;
    kl_bound_with_tau(pair, budget, tau)
}

/// Smallest sample size at which the divergence bound reaches `delta`,
/// together with the per-order growth factor of that floor.
///
/// Inverting the divergence bound under unit-covariance noise gives
/// `N >= 2 delta (1 - rho^2) / (Rbar^2 phi_sup) * tau_n^(-2n)` with the
/// order-n minimax rate. The growth factor describes how the floor scales
/// as the order rises, which is governed by the region's limiting
/// hyperbolic Chebyshev constant, so it is reported as `tau^-2` of the
/// closed-form constant (a disk's radius; the elliptic expression for an
/// interval) rather than the slowly converging finite-order rate.
pub fn sample_complexity_floor(
    delta: f64,
    budget: &EnergyBudget,
    region: &PoleRegion,
    n: usize,
) -> Result<(f64, f64)> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::Domain(format!(
            "divergence level {delta} must be positive"
        )));
    }
    let budget = EnergyBudget::new(budget.r_bar, budget.rho_lambda, budget.psd_ratio)?;
    if budget.r_bar == 0.0 {
        return Err(Error::Domain(
            "the floor needs a positive residue budget".into(),
        ));
    }
    let tau = chebyshev_rate(region, n)?;
    let growth = tau_analytic(region)?.powi(-2);
    let floor = 2.0 * delta * (1.0 - budget.rho_lambda * budget.rho_lambda)
        / (budget.r_bar * budget.r_bar * budget.psd_ratio)
        * tau.powi(-2 * n as i32);
    Ok((floor, growth))
}

/// Pads a realization of the transfer function with zero states up to
/// `n_target`, leaving every Markov parameter (and hence the input-output
/// behavior) unchanged. The padded states are unreachable and unobservable
/// and only add zero eigenvalues.
pub fn extend_realization(
    g_surrogate: &PartialFractionTF,
    n_target: usize,
) -> Result<StateSpaceModel> {
    let sys = pf_to_ss(g_surrogate)?;
    let dim = sys.state_dim();
    if dim > n_target {
        return Err(Error::Dimension(format!(
            "realization needs {dim} states, cannot fit in {n_target}"
        )));
    }
    if dim == n_target {
        return Ok(sys);
    }
    let (p, m) = (sys.output_dim(), sys.input_dim());
    let mut a = DMatrix::<Complex64>::zeros(n_target, n_target);
    a.view_mut((0, 0), (dim, dim)).copy_from(&sys.a);
    let mut b = DMatrix::<Complex64>::zeros(n_target, m);
    b.view_mut((0, 0), (dim, m)).copy_from(&sys.b);
    let mut c = DMatrix::<Complex64>::zeros(p, n_target);
    c.view_mut((0, 0), (p, dim)).copy_from(&sys.c);
    StateSpaceModel::new(a, b, c, sys.noise_cov.clone())
}
