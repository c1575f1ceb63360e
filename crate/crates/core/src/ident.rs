//! Least-squares identification on preselected pole bases, plus the
//! Ho-Kalman subspace baseline and convergence experiments.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lti::{
    h2_norm, optimal_projection, projection_error, simulate_closed_loop, ss_to_pf,
    PartialFractionTF, StateSpaceModel,
};
use crate::pole_select::PoleSet;

/// Condition ceiling for the regressor second-moment matrix.
const REGRESSOR_COND_LIMIT: f64 = 1e14;

/// One simulated input/output record.
///
/// `u` holds the inputs applied at times `0..N-1` and `y` the outputs
/// observed at times `1..N`, so the two sequences always have equal length.
/// The generating seed and a free-form tag travel with the data so runs can
/// be reproduced and labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub u: Vec<DVector<Complex64>>,
    pub y: Vec<DVector<Complex64>>,
    pub seed: u64,
    pub system_tag: String,
}

impl Trajectory {
    pub fn new(
        u: Vec<DVector<Complex64>>,
        y: Vec<DVector<Complex64>>,
        seed: u64,
        system_tag: impl Into<String>,
    ) -> Result<Self> {
        let traj = Trajectory {
            u,
            y,
            seed,
            system_tag: system_tag.into(),
        };
        traj.validate()?;
        Ok(traj)
    }

    /// Number of recorded steps `N`.
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.u.len() != self.y.len() {
            return Err(Error::Dimension(format!(
                "trajectory holds {} inputs but {} outputs",
                self.u.len(),
                self.y.len()
            )));
        }
        let m = self.u.first().map_or(0, |v| v.len());
        let p = self.y.first().map_or(0, |v| v.len());
        for (t, v) in self.u.iter().enumerate() {
            if v.len() != m {
                return Err(Error::Dimension(format!(
                    "input at step {t} has length {}, expected {m}",
                    v.len()
                )));
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numerical(format!("non-finite input at step {t}")));
            }
        }
        for (t, v) in self.y.iter().enumerate() {
            if v.len() != p {
                return Err(Error::Dimension(format!(
                    "output at step {} has length {}, expected {p}",
                    t + 1,
                    v.len()
                )));
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite output at step {}",
                    t + 1
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a least-squares fit on a fixed pole basis.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentResult {
    /// Fitted residue matrices, one `p x m` block per basis pole.
    pub coeffs: Vec<DMatrix<Complex64>>,
    pub mus: PoleSet,
    /// Relative H2 error against a supplied truth, when one was given.
    pub rel_h2_error: Option<f64>,
    /// Minimized empirical objective `(1/N) sum_t ||y_t - sum_k Rk xk_t||^2`.
    pub residual: f64,
}

impl IdentResult {
    /// The fitted model as a transfer function.
    pub fn fitted_tf(&self) -> Result<PartialFractionTF> {
        PartialFractionTF::new(
            self.mus
                .poles
                .iter()
                .copied()
                .zip(self.coeffs.iter().cloned())
                .collect(),
        )
    }

    /// Fills `rel_h2_error` by comparing the fit against a known system.
    pub fn with_truth(mut self, truth: &PartialFractionTF) -> Result<Self> {
        let err = projection_error(truth, &self.mus.poles, &self.coeffs)?;
        self.rel_h2_error = Some(err / h2_norm(truth)?);
        Ok(self)
    }
}

/// Regressor states driven by the input sequence: starting from zero,
/// `x_{t+1} = Atilde x_t + (1_q tensor u_t)` where `Atilde` is the diagonal
/// of the basis poles tensored with the input-channel identity. Returns the
/// states for times `1..=N`; block `k` of the state at time `t` equals the
/// convolution `sum_{l<t} mu_k^(t-1-l) u_l`.
pub fn regressor_states(mus: &PoleSet, u: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
    let q = mus.poles.len();
    let m = u.first().map_or(0, |v| v.len());
    let mut states = Vec::with_capacity(u.len());
    let mut x = DVector::<Complex64>::zeros(q * m);
    for u_t in u {
        let mut next = DVector::<Complex64>::zeros(q * m);
        for (k, mu) in mus.poles.iter().enumerate() {
            for i in 0..m {
                next[k * m + i] = mu * x[k * m + i] + u_t[i];
            }
        }
        states.push(next.clone());
        x = next;
    }
    states
}

/// Least-squares fit of the trajectory on the pole basis, discarding the
/// first `burn_in` samples from the objective.
pub fn least_squares_fit_with_burn_in(
    traj: &Trajectory,
    mus: &PoleSet,
    burn_in: usize,
) -> Result<IdentResult> {
    traj.validate()?;
    mus.validate()?;
    let n = traj.len();
    if burn_in >= n {
        return Err(Error::Arity(format!(
            "burn-in {burn_in} leaves no samples out of {n}"
        )));
    }
    let kept = n - burn_in;
    let q = mus.poles.len();
    let m = traj.u.first().map_or(0, |v| v.len());
    let p = traj.y.first().map_or(0, |v| v.len());
    let states = regressor_states(mus, &traj.u);

    let dim = q * m;
    let mut gram = DMatrix::<Complex64>::zeros(dim, dim);
    let mut rhs = DMatrix::<Complex64>::zeros(p, dim);
    let scale = Complex64::new(1.0 / kept as f64, 0.0);
    for t in burn_in..n {
        let x = &states[t];
        gram += (x * x.adjoint()) * scale;
        rhs += (&traj.y[t] * x.adjoint()) * scale;
    }

    let sv = gram.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > REGRESSOR_COND_LIMIT {
        return Err(Error::RankDeficient(format!(
            "regressor second-moment matrix has condition number {cond:.3e}; \
             the input does not excite every basis direction"
        )));
    }
    let coeff_st = match Cholesky::new(gram.clone()) {
        Some(chol) => chol.solve(&rhs.adjoint()).adjoint(),
        None => {
            let lu = gram.lu();
            lu.solve(&rhs.adjoint())
                .ok_or_else(|| {
                    Error::RankDeficient("regressor second-moment matrix is singular".into())
                })?
                .adjoint()
        }
    };

    let mut residual = 0.0;
    for t in burn_in..n {
        let fitted = &coeff_st * &states[t];
        residual += (&traj.y[t] - fitted).norm_squared();
    }
    residual /= kept as f64;

    let coeffs = (0..q)
        .map(|k| coeff_st.view((0, k * m), (p, m)).into_owned())
        .collect();
    Ok(IdentResult {
        coeffs,
        mus: mus.clone(),
        rel_h2_error: None,
        residual,
    })
}

/// Least-squares fit of the trajectory on the pole basis (no burn-in).
pub fn least_squares_fit(traj: &Trajectory, mus: &PoleSet) -> Result<IdentResult> {
    least_squares_fit_with_burn_in(traj, mus, 0)
}

/// One recorded convergence error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSample {
    pub n: usize,
    pub trial: usize,
    pub error: f64,
}

/// Per-sample-size summary of convergence errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Output of [`convergence_experiment`]: tidy samples, per-N summaries, and
/// the log-log slope of the mean error against the sample size (NaN when
/// fewer than two sample sizes were run).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub samples: Vec<ConvergenceSample>,
    pub rows: Vec<ConvergenceRow>,
    pub slope: f64,
}

/// Repeated simulate-and-fit runs against the asymptotic reference.
///
/// The plant runs open loop under unit white probing, so the asymptotic
/// coefficients are the plain H2 projection of the plant onto the basis.
/// Each (sample size, trial) pair simulates with its own seed drawn
/// deterministically from `seed`, fits, and records the H2 distance between
/// the fitted and asymptotic coefficients.
pub fn convergence_experiment(
    plant: &StateSpaceModel,
    mus: &PoleSet,
    n_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ConvergenceTable> {
    if n_list.is_empty() {
        return Err(Error::Arity("need at least one sample size".into()));
    }
    if trials == 0 {
        return Err(Error::Arity("need at least one trial".into()));
    }
    let g_true = ss_to_pf(plant)?;
    let (ref_coeffs, _) = optimal_projection(&g_true, mus)?;

    let mut seed_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_list.len() * trials);
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut errs = Vec::with_capacity(trials);
        for trial in 0..trials {
            let run_seed: u64 = seed_rng.random();
            let traj = simulate_closed_loop(plant, None, n, run_seed)?;
            let fit = least_squares_fit(&traj, mus)?;
            let diff_terms: Vec<(Complex64, DMatrix<Complex64>)> = mus
                .poles
                .iter()
                .copied()
                .zip(fit.coeffs.iter().zip(&ref_coeffs).map(|(a, b)| a - b))
                .collect();
            let error = h2_norm(&PartialFractionTF::new(diff_terms)?)?;
            samples.push(ConvergenceSample { n, trial, error });
            errs.push(error);
        }
        let mean = errs.iter().sum::<f64>() / trials as f64;
        let min = errs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = errs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        rows.push(ConvergenceRow { n, mean, min, max });
    }

    let slope = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.mean.max(1e-300).ln()).collect();
        let xm = xs.iter().sum::<f64>() / xs.len() as f64;
        let ym = ys.iter().sum::<f64>() / ys.len() as f64;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        num / den
    } else {
        f64::NAN
    };
    Ok(ConvergenceTable {
        samples,
        rows,
        slope,
    })
}

/// Markov-parameter estimates from trajectory data by least-squares
/// deconvolution of the first `lags` lags, with zero input pre-history.
pub fn markov_from_trajectory(
    traj: &Trajectory,
    lags: usize,
) -> Result<Vec<DMatrix<Complex64>>> {
    traj.validate()?;
    let n = traj.len();
    if lags == 0 || lags > n {
        return Err(Error::Arity(format!(
            "lag count {lags} must lie in 1..={n} for {n} samples"
        )));
    }
    let m = traj.u.first().map_or(0, |v| v.len());
    let p = traj.y.first().map_or(0, |v| v.len());
    let dim = lags * m;
    let mut gram = DMatrix::<Complex64>::zeros(dim, dim);
    let mut rhs = DMatrix::<Complex64>::zeros(p, dim);
    let scale = Complex64::new(1.0 / n as f64, 0.0);
    let mut phi = DVector::<Complex64>::zeros(dim);
    for t in 0..n {
        // Regressor for y_{t+1}: inputs u_t, u_{t-1}, ..., u_{t-lags+1}.
        for k in (1..lags).rev() {
            for i in 0..m {
                phi[k * m + i] = phi[(k - 1) * m + i];
            }
        }
        for i in 0..m {
            phi[i] = traj.u[t][i];
        }
        gram += (&phi * phi.adjoint()) * scale;
        rhs += (&traj.y[t] * phi.adjoint()) * scale;
    }
    let sv = gram.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > REGRESSOR_COND_LIMIT {
        return Err(Error::RankDeficient(format!(
            "deconvolution regressor has condition number {cond:.3e}"
        )));
    }
    let sol = gram
        .lu()
        .solve(&rhs.adjoint())
        .ok_or_else(|| Error::RankDeficient("deconvolution regressor is singular".into()))?
        .adjoint();
    Ok((0..lags)
        .map(|k| sol.view((0, k * m), (p, m)).into_owned())
        .collect())
}

/// Ho-Kalman realization from the first `t` Markov parameters.
///
/// Builds the block Hankel matrix, truncates its singular value
/// decomposition at rank `n`, splits the factors into observability and
/// controllability matrices, and reads `(A, B, C)` off them. The numerical
/// Hankel rank is measured at a relative tolerance of `1e-10`; asking for
/// more states than that rank is an error, as is an estimate whose state
/// matrix turns out unstable.
pub fn ho_kalman(
    markov: &[DMatrix<Complex64>],
    n: usize,
    t: usize,
) -> Result<StateSpaceModel> {
    if n == 0 {
        return Err(Error::Arity("need at least one state".into()));
    }
    if t < 3 {
        return Err(Error::Arity(format!(
            "need at least 3 Markov parameters, requested {t}"
        )));
    }
    if markov.len() < t {
        return Err(Error::Arity(format!(
            "need {t} Markov parameters, got {}",
            markov.len()
        )));
    }
    let p = markov[0].nrows();
    let m = markov[0].ncols();
    if markov.iter().any(|h| h.nrows() != p || h.ncols() != m) {
        return Err(Error::Dimension("Markov parameters differ in shape".into()));
    }
    let d1 = t.div_ceil(2);
    let d2 = t + 1 - d1;
    let mut hankel = DMatrix::<Complex64>::zeros(d1 * p, d2 * m);
    for i in 0..d1 {
        for j in 0..d2 {
            hankel
                .view_mut((i * p, j * m), (p, m))
                .copy_from(&markov[i + j]);
        }
    }
    let svd = hankel.svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let sv = &svd.singular_values;
    let smax = sv.max();
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap());
    let rank = order.iter().filter(|&&i| sv[i] > 1e-10 * smax).count();
    if rank < n {
        return Err(Error::Rank(format!(
            "Hankel numerical rank {rank} is below the requested order {n}"
        )));
    }

    let mut obs = DMatrix::<Complex64>::zeros(d1 * p, n);
    let mut ctr = DMatrix::<Complex64>::zeros(n, d2 * m);
    for (col, &i) in order.iter().take(n).enumerate() {
        let root = Complex64::new(sv[i].sqrt(), 0.0);
        obs.set_column(col, &(u.column(i) * root));
        ctr.set_row(col, &(v_t.row(i) * root));
    }
    let obs_up = obs.view((0, 0), ((d1 - 1) * p, n)).into_owned();
    let obs_down = obs.view((p, 0), ((d1 - 1) * p, n)).into_owned();
    let pinv = obs_up
        .pseudo_inverse(1e-12 * smax.sqrt())
        .map_err(|e| Error::Numerical(format!("observability pseudo-inverse failed: {e}")))?;
    let a = pinv * obs_down;
    let b = ctr.view((0, 0), (n, m)).into_owned();
    let c = obs.view((0, 0), (p, n)).into_owned();
    StateSpaceModel::new(a, b, c, DMatrix::identity(p, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{pf_to_ss, simulate_driven};
    use crate::pole_select::SelectMethod;
    use crate::region::PoleRegion;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn manual_set(poles: Vec<Complex64>) -> PoleSet {
        let radius = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
        PoleSet::new(
            poles,
            PoleRegion::disk((radius + 0.02).min(0.999)).unwrap(),
            SelectMethod::Manual,
            false,
        )
        .unwrap()
    }

    #[test]
    fn zero_input_gives_zero_states() {
        let mus = manual_set(vec![c(0.5, 0.0), c(-0.3, 0.2)]);
        let u = vec![DVector::zeros(2); 10];
        for x in regressor_states(&mus, &u) {
            assert_eq!(x.norm(), 0.0);
        }
    }

    #[test]
    fn single_pole_impulse_states_are_geometric() {
        let mu = c(0.6, 0.1);
        let mus = manual_set(vec![mu]);
        let mut u = vec![DVector::zeros(1); 8];
        u[0] = DVector::from_element(1, c(1.0, 0.0));
        let states = regressor_states(&mus, &u);
        for (t, x) in states.iter().enumerate() {
            assert!((x[0] - mu.powu(t as u32)).norm() < 1e-14);
        }
    }

    #[test]
    fn regressor_blocks_match_direct_convolution() {
        let mus = manual_set(vec![c(0.5, 0.0), c(-0.2, 0.4), c(0.1, -0.6)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<DVector<Complex64>> = (0..30)
            .map(|_| {
                DVector::from_fn(2, |_, _| {
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                })
            })
            .collect();
        let states = regressor_states(&mus, &u);
        for (t, x) in states.iter().enumerate() {
            for (k, mu) in mus.poles.iter().enumerate() {
                let mut expected = DVector::<Complex64>::zeros(2);
                for (l, u_l) in u.iter().enumerate().take(t + 1) {
                    expected += u_l * mu.powu((t - l) as u32);
                }
                assert!(
                    (x.rows(k * 2, 2) - expected).norm() < 1e-12,
                    "block {k} at time {} drifted",
                    t + 1
                );
            }
        }
    }

    #[test]
    fn exact_model_class_recovers_projection_coefficients() {
        let g = PartialFractionTF::siso(&[(c(0.5, 0.0), c(1.0, 0.0)), (c(-0.3, 0.0), c(0.7, 0.0))])
            .unwrap();
        let mut plant = pf_to_ss(&g).unwrap();
        plant.noise_cov = DMatrix::zeros(1, 1);
        let mus = manual_set(vec![c(0.5, 0.0), c(-0.3, 0.0)]);
        let traj = simulate_closed_loop(&plant, None, 200, 42).unwrap();
        let fit = least_squares_fit(&traj, &mus).unwrap();
        let (proj, _) = optimal_projection(&g, &mus).unwrap();
        for (a, b) in fit.coeffs.iter().zip(&proj) {
            assert!((a - b).norm() < 1e-8, "coefficients differ: {a} vs {b}");
        }
        let scale: f64 =
            traj.y.iter().map(|y| y.norm_squared()).sum::<f64>() / traj.len() as f64;
        assert!(fit.residual < 1e-16 * scale.max(1.0));
    }

    #[test]
    fn single_sample_is_rank_deficient() {
        let mus = manual_set(vec![c(0.5, 0.0), c(-0.3, 0.0)]);
        let traj = Trajectory::new(
            vec![DVector::from_element(1, c(1.0, 0.0))],
            vec![DVector::from_element(1, c(0.3, 0.0))],
            0,
            "tiny",
        )
        .unwrap();
        assert!(matches!(
            least_squares_fit(&traj, &mus),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn output_scaling_scales_coefficients_exactly() {
        let g = PartialFractionTF::siso(&[(c(0.6, 0.0), c(1.0, 0.0))]).unwrap();
        let plant = pf_to_ss(&g).unwrap();
        let mus = manual_set(vec![c(0.4, 0.0), c(-0.2, 0.0)]);
        let traj = simulate_closed_loop(&plant, None, 300, 5).unwrap();
        let scaled = Trajectory::new(
            traj.u.clone(),
            traj.y.iter().map(|y| y * c(2.0, 0.0)).collect(),
            traj.seed,
            traj.system_tag.clone(),
        )
        .unwrap();
        let fit = least_squares_fit(&traj, &mus).unwrap();
        let fit2 = least_squares_fit(&scaled, &mus).unwrap();
        for (a, b) in fit.coeffs.iter().zip(&fit2.coeffs) {
            assert_eq!(&(a * c(2.0, 0.0)), b);
        }
    }

    #[test]
    fn residual_is_minimal_against_random_perturbations() {
        let g = PartialFractionTF::siso(&[(c(0.55, 0.2), c(1.0, -0.3))]).unwrap();
        let plant = pf_to_ss(&g).unwrap();
        let mus = manual_set(vec![c(0.3, 0.0), c(-0.4, 0.1)]);
        let traj = simulate_closed_loop(&plant, None, 150, 11).unwrap();
        let fit = least_squares_fit(&traj, &mus).unwrap();
        let states = regressor_states(&mus, &traj.u);
        let objective = |coeffs: &[DMatrix<Complex64>]| -> f64 {
            let mut total = 0.0;
            for (t, x) in states.iter().enumerate() {
                let mut fitted = DVector::<Complex64>::zeros(1);
                for (k, co) in coeffs.iter().enumerate() {
                    fitted += co * x.rows(k, 1);
                }
                total += (&traj.y[t] - fitted).norm_squared();
            }
            total / traj.len() as f64
        };
        assert!((objective(&fit.coeffs) - fit.residual).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let perturbed: Vec<DMatrix<Complex64>> = fit
                .coeffs
                .iter()
                .map(|co| {
                    co + DMatrix::from_fn(1, 1, |_, _| {
                        c(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1))
                    })
                })
                .collect();
            assert!(objective(&perturbed) + 1e-14 >= fit.residual);
        }
    }

    #[test]
    fn white_noise_fit_approaches_projection_coefficients() {
        let g = PartialFractionTF::siso(&[(c(0.5, 0.0), c(1.0, 0.0)), (c(-0.3, 0.0), c(0.7, 0.0))])
            .unwrap();
        let mut plant = pf_to_ss(&g).unwrap();
        plant.noise_cov = DMatrix::from_element(1, 1, 0.25);
        let mus = manual_set(vec![c(0.4, 0.0), c(-0.2, 0.0)]);
        let (proj, _) = optimal_projection(&g, &mus).unwrap();
        let distance = |n: usize| -> f64 {
            let traj = simulate_closed_loop(&plant, None, n, 13).unwrap();
            let fit = least_squares_fit(&traj, &mus).unwrap();
            fit.coeffs
                .iter()
                .zip(&proj)
                .map(|(a, b)| (a - b).norm_squared())
                .sum::<f64>()
                .sqrt()
        };
        let d_small = distance(10_000);
        let d_large = distance(100_000);
        assert!(d_large < 5e-2, "distance at N=1e5 is {d_large}");
        assert!(d_large < d_small, "distance grew: {d_small} -> {d_large}");
    }

    #[test]
    fn fit_is_seed_deterministic() {
        let g = PartialFractionTF::siso(&[(c(0.5, 0.0), c(1.0, 0.0))]).unwrap();
        let plant = pf_to_ss(&g).unwrap();
        let mus = manual_set(vec![c(0.4, 0.0)]);
        let run = || {
            let traj = simulate_closed_loop(&plant, None, 500, 21).unwrap();
            least_squares_fit(&traj, &mus).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn noise_free_in_span_errors_sit_at_the_floor() {
        let g = PartialFractionTF::siso(&[(c(0.5, 0.0), c(1.0, 0.0)), (c(-0.3, 0.0), c(0.7, 0.0))])
            .unwrap();
        let mut plant = pf_to_ss(&g).unwrap();
        plant.noise_cov = DMatrix::zeros(1, 1);
        let mus = manual_set(vec![c(0.5, 0.0), c(-0.3, 0.0)]);
        let table = convergence_experiment(&plant, &mus, &[50, 100], 2, 9).unwrap();
        for s in &table.samples {
            assert!(s.error < 1e-10, "error {} at N={}", s.error, s.n);
        }
    }

    #[test]
    fn scalar_white_noise_slope_is_near_square_root() {
        let g = PartialFractionTF::siso(&[(c(0.5, 0.0), c(1.0, 0.0))]).unwrap();
        let mut plant = pf_to_ss(&g).unwrap();
        plant.noise_cov = DMatrix::from_element(1, 1, 1.0);
        let mus = manual_set(vec![c(0.5, 0.0)]);
        let table = convergence_experiment(
            &plant,
            &mus,
            &[100, 316, 1000, 3162, 10_000],
            100,
            2024,
        )
        .unwrap();
        assert!(
            (-0.65..=-0.35).contains(&table.slope),
            "slope {} out of band",
            table.slope
        );
        let means: Vec<f64> = table.rows.iter().map(|r| r.mean).collect();
        assert!(means.windows(2).all(|w| w[1] < w[0]), "means not decreasing: {means:?}");
    }

    #[test]
    fn quadrupling_trials_roughly_halves_the_mean_standard_error() {
        let g = PartialFractionTF::siso(&[(c(0.5, 0.0), c(1.0, 0.0))]).unwrap();
        let mut plant = pf_to_ss(&g).unwrap();
        plant.noise_cov = DMatrix::from_element(1, 1, 1.0);
        let mus = manual_set(vec![c(0.5, 0.0)]);
        let se = |trials: usize, seed: u64| -> f64 {
            let table = convergence_experiment(&plant, &mus, &[500], trials, seed).unwrap();
            let mean = table.rows[0].mean;
            let var = table
                .samples
                .iter()
                .map(|s| (s.error - mean) * (s.error - mean))
                .sum::<f64>()
                / (trials - 1) as f64;
            (var / trials as f64).sqrt()
        };
        let se_small = se(25, 4);
        let se_large = se(100, 4);
        let ratio = se_large / se_small;
        assert!(
            (0.25..0.95).contains(&ratio),
            "standard error ratio {ratio} not near one half"
        );
    }

    #[test]
    fn ho_kalman_recovers_a_single_pole_exactly() {
        let lambda = 0.7f64;
        let markov: Vec<DMatrix<Complex64>> = (0..12)
            .map(|k| DMatrix::from_element(1, 1, c(lambda.powi(k), 0.0)))
            .collect();
        let sys = ho_kalman(&markov, 1, 10).unwrap();
        assert_eq!(sys.state_dim(), 1);
        assert!((sys.a[(0, 0)] - c(lambda, 0.0)).norm() < 1e-10);
        let h1 = &sys.c * &sys.b;
        assert!((h1[(0, 0)] - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn ho_kalman_matches_three_state_markov_sequence() {
        let g = PartialFractionTF::siso(&[
            (c(0.6, 0.0), c(1.0, 0.0)),
            (c(0.2, 0.4), c(0.5, -0.1)),
            (c(-0.4, 0.0), c(0.8, 0.0)),
        ])
        .unwrap();
        let markov: Vec<DMatrix<Complex64>> = (1..=30).map(|t| g.markov(t)).collect();
        let sys = ho_kalman(&markov, 3, 30).unwrap();
        assert_eq!(sys.state_dim(), 3);
        let estimated = sys.markov_sequence(10);
        for (t, h) in estimated.iter().enumerate() {
            assert!(
                (h - g.markov(t + 1)).norm() < 1e-8,
                "Markov parameter {} drifted",
                t + 1
            );
        }
    }

    #[test]
    fn ho_kalman_rejects_orders_above_the_hankel_rank() {
        let markov: Vec<DMatrix<Complex64>> = (0..12)
            .map(|k| DMatrix::from_element(1, 1, c(0.5f64.powi(k), 0.0)))
            .collect();
        assert!(matches!(ho_kalman(&markov, 2, 10), Err(Error::Rank(_))));
    }

    #[test]
    fn deconvolved_markov_parameters_match_the_plant() {
        let g = PartialFractionTF::siso(&[(c(0.6, 0.0), c(1.0, 0.0)), (c(-0.3, 0.0), c(0.5, 0.0))])
            .unwrap();
        let mut plant = pf_to_ss(&g).unwrap();
        plant.noise_cov = DMatrix::zeros(1, 1);

        // An impulse makes the deconvolution exact: every lag is excited once
        // and the response leaves the window before wrapping.
        let mut eps = vec![DVector::<f64>::zeros(1); 30];
        eps[0] = DVector::from_element(1, 1.0);
        let noise = vec![DVector::<f64>::zeros(1); 31];
        let traj = simulate_driven(&plant, None, &eps, &noise, 0, "impulse").unwrap();
        let markov = markov_from_trajectory(&traj, 20).unwrap();
        for (k, h) in markov.iter().enumerate() {
            assert!(
                (h - g.markov(k + 1)).norm() < 1e-10,
                "impulse lag {} estimate drifted",
                k + 1
            );
        }

        // White probing carries a truncation tail of order |0.6|^20 that the
        // finite sample cannot fully decorrelate, so the tolerance is looser.
        let traj = simulate_closed_loop(&plant, None, 400, 31).unwrap();
        let markov = markov_from_trajectory(&traj, 20).unwrap();
        for (k, h) in markov.iter().enumerate() {
            assert!(
                (h - g.markov(k + 1)).norm() < 1e-4,
                "white-noise lag {} estimate drifted",
                k + 1
            );
        }
    }

    #[test]
    fn truth_comparison_fills_the_relative_error() {
        let g = PartialFractionTF::siso(&[(c(0.5, 0.0), c(1.0, 0.0)), (c(-0.3, 0.0), c(0.7, 0.0))])
            .unwrap();
        let mut plant = pf_to_ss(&g).unwrap();
        plant.noise_cov = DMatrix::zeros(1, 1);
        let mus = manual_set(vec![c(0.5, 0.0), c(-0.3, 0.0)]);
        let traj = simulate_closed_loop(&plant, None, 200, 8).unwrap();
        let fit = least_squares_fit(&traj, &mus)
            .unwrap()
            .with_truth(&g)
            .unwrap();
        let err = fit.rel_h2_error.expect("error filled in");
        assert!(err < 1e-7, "in-span noise-free fit has relative error {err}");
    }
}
