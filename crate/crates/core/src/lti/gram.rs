//! H2 inner products on pole bases: Gram matrices, orthogonal projection
//! with its exact bias, the closed-form scalar error, and a priori bounds.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hyperbolic::pseudo_metric;
use crate::pole_select::PoleSet;

use super::{kron_identity, EnergyBudget, PartialFractionTF, POLE_SEPARATION};

/// Condition-number ceiling for the basis Gram matrix.
const GRAM_COND_LIMIT: f64 = 1e14;

/// Gram matrix of the basis `{1 / (z - mu_k)}` with `m` input channels:
/// the `q x q` matrix of inner products `1 / (1 - mu_j conj(mu_k))`
/// tensored with the `m x m` identity.
pub fn gram_matrix(poles: &[Complex64], m: usize) -> Result<DMatrix<Complex64>> {
    if poles.is_empty() {
        return Err(Error::Arity("empty pole list".into()));
    }
    if m == 0 {
        return Err(Error::Arity("need at least one input channel".into()));
    }
    for mu in poles {
        if mu.norm() >= 1.0 {
            return Err(Error::Domain(format!("pole {mu} outside the open unit disk")));
        }
    }
    for j in 0..poles.len() {
        for k in j + 1..poles.len() {
            if (poles[j] - poles[k]).norm() < 1e-12 {
                return Err(Error::Singularity(format!(
                    "poles {j} and {k} coincide; the Gram matrix is singular"
                )));
            }
        }
    }
    let small = DMatrix::from_fn(poles.len(), poles.len(), |j, k| {
        Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - poles[j] * poles[k].conj())
    });
    Ok(kron_identity(&small, m))
}

/// Cross inner products `1 / (1 - lambda_j conj(mu_k))` as an
/// `n x q` matrix (no identity tensoring).
pub(crate) fn cross_gram(lambdas: &[Complex64], mus: &[Complex64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(lambdas.len(), mus.len(), |j, k| {
        Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - lambdas[j] * mus[k].conj())
    })
}

/// H2 norm of a partial-fraction transfer function.
///
/// With the residues stacked into `R` and `Xi` the Gram matrix of the
/// system's own poles, the squared norm is `tr(R Xi R^H)`; the Cholesky
/// factor of `Xi` turns that into a plain Frobenius norm.
pub fn h2_norm(tf: &PartialFractionTF) -> Result<f64> {
    tf.validate()?;
    let xi = gram_matrix(&tf.poles(), tf.dims.1)?;
    let chol = Cholesky::new(xi).ok_or_else(|| {
        Error::Numerical("pole Gram matrix is not positive definite (poles nearly coincide)".into())
    })?;
    Ok((tf.stacked_residues() * chol.l()).norm())
}

/// Orthogonal H2 projection of `g` onto the span of `{1 / (z - mu_k)}`.
///
/// Returns the optimal residue matrices together with the exact projection
/// bias `||g - g_hat||_2`. The coefficients solve the normal equations
/// against the basis Gram matrix; the bias comes from the Schur complement
/// of that Gram matrix in the joint one, so no near-equal norms are ever
/// subtracted. Basis poles may coincide with system poles (the projection
/// is exact in those directions), but not with each other.
pub fn optimal_projection(
    g: &PartialFractionTF,
    mus: &PoleSet,
) -> Result<(Vec<DMatrix<Complex64>>, f64)> {
    g.validate()?;
    mus.validate()?;
    let (p, m) = g.dims;
    let q = mus.poles.len();
    let xi = gram_matrix(&mus.poles, m)?;
    let sv = xi.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > GRAM_COND_LIMIT {
        return Err(Error::Singularity(format!(
            "basis Gram matrix has condition number {cond:.3e}"
        )));
    }
    let chol = Cholesky::new(xi).ok_or_else(|| {
        Error::Singularity("basis Gram matrix is not positive definite".into())
    })?;

    let lambdas = g.poles();
    let cross = kron_identity(&cross_gram(&lambdas, &mus.poles), m);
    let r_st = g.stacked_residues();
    let rhs = &r_st * &cross;
    let coeff_st = chol.solve(&rhs.adjoint()).adjoint();

    let xi_ll = gram_matrix(&lambdas, m)?;
    let schur = &xi_ll - &cross * chol.solve(&cross.adjoint());
    let bias_sq = (&r_st * schur * r_st.adjoint()).trace().re.max(0.0);

    let coeffs = (0..q)
        .map(|k| coeff_st.view((0, k * m), (p, m)).into_owned())
        .collect();
    Ok((coeffs, bias_sq.sqrt()))
}

/// H2 distance between `g` and an arbitrary combination
/// `sum_k coeffs_k / (z - mu_k)`.
///
/// Terms whose poles agree within the global separation tolerance are
/// merged before the norm is taken, so basis poles sitting on system poles
/// are handled exactly.
pub fn projection_error(
    g: &PartialFractionTF,
    mu_poles: &[Complex64],
    coeffs: &[DMatrix<Complex64>],
) -> Result<f64> {
    g.validate()?;
    if mu_poles.len() != coeffs.len() {
        return Err(Error::Arity(format!(
            "{} poles but {} coefficient matrices",
            mu_poles.len(),
            coeffs.len()
        )));
    }
    let (p, m) = g.dims;
    for c in coeffs {
        if c.nrows() != p || c.ncols() != m {
            return Err(Error::Dimension(format!(
                "coefficient is {}x{}, expected {p}x{m}",
                c.nrows(),
                c.ncols()
            )));
        }
    }
    let mut terms: Vec<(Complex64, DMatrix<Complex64>)> = g
        .terms
        .iter()
        .map(|t| (t.lambda, t.residue.clone()))
        .collect();
    for (mu, c) in mu_poles.iter().zip(coeffs) {
        match terms.iter_mut().find(|(l, _)| (*l - *mu).norm() <= POLE_SEPARATION) {
            Some((_, r)) => *r -= c,
            None => terms.push((*mu, -c)),
        }
    }
    h2_norm(&PartialFractionTF::new(terms)?)
}

/// Relative H2 error of projecting `1 / (z - lambda)` onto the span of
/// `{1 / (z - mu_k)}`: the product of pseudohyperbolic distances
/// `prod_k [lambda, mu_k]_h`.
pub fn scalar_error_closed_form(lambda: Complex64, mus: &[Complex64]) -> Result<f64> {
    if lambda.norm() >= 1.0 {
        return Err(Error::Domain(format!(
            "pole {lambda} outside the open unit disk"
        )));
    }
    let mut prod = 1.0;
    for &mu in mus {
        prod *= pseudo_metric(lambda, mu)?;
    }
    Ok(prod)
}

/// A priori bias bounds for projecting `g` onto the poles of `mus`.
///
/// `tight` keeps the per-pole sum
/// `(1 + psd_ratio) sum_j ||R_j||_F / sqrt(1 - |lambda_j|^2) prod_k [lambda_j, mu_k]_h`;
/// `loose` replaces the sum by the budget totals
/// `(1 + psd_ratio) r_bar / sqrt(1 - rho_lambda^2) max_j prod_k [...]`.
/// `tight <= loose` whenever the budget was read off `g` itself.
pub fn bias_upper_bound(
    g: &PartialFractionTF,
    mus: &PoleSet,
    budget: &EnergyBudget,
) -> Result<(f64, f64)> {
    g.validate()?;
    mus.validate()?;
    EnergyBudget::new(budget.r_bar, budget.rho_lambda, budget.psd_ratio)?;
    let prefactor = 1.0 + budget.psd_ratio;
    let mut tight = 0.0;
    let mut max_prod = 0.0f64;
    for term in &g.terms {
        let prod = scalar_error_closed_form(term.lambda, &mus.poles)?;
        max_prod = max_prod.max(prod);
        tight += term.residue.norm() / (1.0 - term.lambda.norm_sqr()).sqrt() * prod;
    }
    tight *= prefactor;
    let loose =
        prefactor * budget.r_bar / (1.0 - budget.rho_lambda * budget.rho_lambda).sqrt() * max_prod;
    Ok((tight, loose))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pole_select::SelectMethod;
    use crate::region::PoleRegion;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

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

    fn random_disk_point(rng: &mut ChaCha8Rng, radius: f64) -> Complex64 {
        loop {
            let z = c(
                rng.random_range(-radius..radius),
                rng.random_range(-radius..radius),
            );
            if z.norm() < radius {
                return z;
            }
        }
    }

    #[test]
    fn h2_single_pole_matches_closed_form() {
        let g = PartialFractionTF::siso(&[(c(0.5, 0.0), c(1.0, 0.0))]).unwrap();
        assert_relative_eq!(h2_norm(&g).unwrap(), (1.0f64 / 0.75).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn h2_pure_delay_is_one() {
        let g = PartialFractionTF::siso(&[(c(0.0, 0.0), c(1.0, 0.0))]).unwrap();
        assert_relative_eq!(h2_norm(&g).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn h2_matches_truncated_impulse_energy() {
        let g = PartialFractionTF::siso(&[
            (c(0.7, 0.0), c(1.0, -0.5)),
            (c(-0.4, 0.3), c(0.3, 0.8)),
            (c(0.0, 0.2), c(-1.1, 0.0)),
        ])
        .unwrap();
        let energy: f64 = (1..400).map(|t| g.markov(t).norm_squared()).sum();
        assert_relative_eq!(h2_norm(&g).unwrap(), energy.sqrt(), epsilon = 1e-8);

        let r1 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.2), c(0.0, -0.3), c(0.5, 0.0), c(0.2, 0.9)]);
        let r2 = DMatrix::from_row_slice(2, 2, &[c(-0.4, 0.0), c(1.3, 0.1), c(0.0, 0.0), c(0.7, -0.2)]);
        let g2 = PartialFractionTF::new(vec![(c(0.6, 0.25), r1), (c(-0.3, -0.5), r2)]).unwrap();
        let energy2: f64 = (1..400).map(|t| g2.markov(t).norm_squared()).sum();
        assert_relative_eq!(h2_norm(&g2).unwrap(), energy2.sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn gram_matches_two_pole_example() {
        let xi = gram_matrix(&[c(0.5, 0.0), c(-0.5, 0.0)], 1).unwrap();
        assert_relative_eq!(xi[(0, 0)].re, 4.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(xi[(0, 1)].re, 0.8, epsilon = 1e-12);
        assert_relative_eq!(xi[(1, 0)].re, 0.8, epsilon = 1e-12);
        assert_relative_eq!(xi[(1, 1)].re, 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_at_origin_is_identity() {
        let xi = gram_matrix(&[c(0.0, 0.0)], 2).unwrap();
        assert_eq!(xi.nrows(), 2);
        assert!((xi - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn gram_matches_series_and_is_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let poles: Vec<Complex64> = (0..4).map(|_| random_disk_point(&mut rng, 0.85)).collect();
        let xi = gram_matrix(&poles, 1).unwrap();
        assert!((&xi - xi.adjoint()).norm() < 1e-14, "Gram must be Hermitian");
        for j in 0..4 {
            for k in 0..4 {
                let mut series = c(0.0, 0.0);
                let mut term = c(1.0, 0.0);
                for _ in 1..400 {
                    series += term;
                    term *= poles[j] * poles[k].conj();
                }
                assert!((xi[(j, k)] - series).norm() < 1e-8);
            }
        }
        let min_sv = xi.svd(false, false).singular_values.min();
        assert!(min_sv > 0.0, "Gram must be positive definite");
    }

    #[test]
    fn gram_rejects_coincident_poles() {
        let err = gram_matrix(&[c(0.5, 0.0), c(0.5, 0.0)], 1).unwrap_err();
        assert!(matches!(err, Error::Singularity(_)));
    }

    #[test]
    fn projection_is_exact_on_own_pole() {
        let lambda = c(0.2, 0.3);
        let g = PartialFractionTF::siso(&[(lambda, c(1.0, 0.0))]).unwrap();
        let (coeffs, bias) = optimal_projection(&g, &manual_set(vec![lambda])).unwrap();
        assert!((coeffs[0][(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
        // The squared bias carries round-off at machine epsilon relative to
        // the norm scale, so the bias itself floors near sqrt(eps).
        assert!(bias < 1e-7);
    }

    #[test]
    fn projection_matches_reference_pair() {
        let g = PartialFractionTF::siso(&[(c(0.6, 0.0), c(1.0, 0.0))]).unwrap();
        let mus = manual_set(vec![c(0.2, 0.0), c(-0.4, 0.0)]);
        let (_, bias) = optimal_projection(&g, &mus).unwrap();
        let rel = bias / h2_norm(&g).unwrap();
        assert_relative_eq!(rel, 0.366569, epsilon = 1e-6);
        let closed = scalar_error_closed_form(c(0.6, 0.0), &mus.poles).unwrap();
        assert_relative_eq!(rel, closed, epsilon = 1e-12);
    }

    #[test]
    fn projection_matches_time_domain_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut rand_mat = |rows: usize, cols: usize| {
            DMatrix::from_fn(rows, cols, |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        };
        let g = PartialFractionTF::new(vec![
            (c(0.62, 0.11), rand_mat(2, 2)),
            (c(-0.35, 0.42), rand_mat(2, 2)),
            (c(0.15, -0.58), rand_mat(2, 2)),
        ])
        .unwrap();
        let mu_poles = vec![c(0.5, 0.0), c(-0.2, 0.3), c(0.1, -0.45), c(-0.6, -0.1)];
        let (_, bias) = optimal_projection(&g, &manual_set(mu_poles.clone())).unwrap();

        // Independent oracle: scalar least squares on 1e4 impulse-response
        // samples, one solve shared by all input/output entries.
        let horizon = 10_000;
        let q = mu_poles.len();
        let mut basis_gram = DMatrix::<Complex64>::zeros(q, q);
        let mut cross_rhs = vec![DMatrix::<Complex64>::zeros(2, 2); q];
        let mut powers = vec![c(1.0, 0.0); q];
        let mut impulses = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let h = g.markov(t);
            for k in 0..q {
                for l in 0..q {
                    basis_gram[(k, l)] += powers[k] * powers[l].conj();
                }
                cross_rhs[k] += &h * powers[k].conj();
            }
            impulses.push((h, powers.clone()));
            for (pw, mu) in powers.iter_mut().zip(&mu_poles) {
                *pw *= mu;
            }
        }
        let lu = basis_gram.clone().lu();
        let mut coeffs = vec![DMatrix::<Complex64>::zeros(2, 2); q];
        for i in 0..2 {
            for j in 0..2 {
                let rhs = DMatrix::from_fn(q, 1, |k, _| cross_rhs[k][(i, j)].conj());
                let sol = lu.solve(&rhs).unwrap();
                for k in 0..q {
                    coeffs[k][(i, j)] = sol[(k, 0)].conj();
                }
            }
        }
        let mut residual = 0.0;
        for (h, powers) in &impulses {
            let mut approx_h = DMatrix::<Complex64>::zeros(2, 2);
            for k in 0..q {
                approx_h += &coeffs[k] * powers[k];
            }
            residual += (h - approx_h).norm_squared();
        }
        assert_relative_eq!(bias, residual.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn closed_form_vanishes_on_matching_pole() {
        let v = scalar_error_closed_form(c(0.3, 0.1), &[c(0.3, 0.1), c(-0.2, 0.0)]).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_reference_value() {
        let v = scalar_error_closed_form(c(0.6, 0.0), &[c(0.2, 0.0), c(-0.4, 0.0)]).unwrap();
        assert_relative_eq!(v, 0.366569, epsilon = 1e-6);
    }

    #[test]
    fn closed_form_rejects_exterior_pole() {
        assert!(matches!(
            scalar_error_closed_form(c(1.2, 0.0), &[c(0.2, 0.0)]),
            Err(Error::Domain(_))
        ));
    }

    /// The closed-form product must agree with the Gram-based projection
    /// bias on random draws; this ties the two independent computations of
    /// the same quantity together at nearly full precision.
    #[test]
    fn closed_form_matches_gram_bias_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let lambda = random_disk_point(&mut rng, 0.9);
            let q = rng.random_range(1..=6);
            let mut mus: Vec<Complex64> = Vec::new();
            while mus.len() < q {
                let cand = random_disk_point(&mut rng, 0.9);
                if mus.iter().all(|m| (m - cand).norm() > 1e-3) {
                    mus.push(cand);
                }
            }
            let g = PartialFractionTF::siso(&[(lambda, c(1.0, 0.0))]).unwrap();
            let (_, bias) = optimal_projection(&g, &manual_set(mus.clone())).unwrap();
            let rel = bias / h2_norm(&g).unwrap();
            let closed = scalar_error_closed_form(lambda, &mus).unwrap();
            assert!(
                (rel - closed).abs() < 1e-9,
                "lambda {lambda}, mus {mus:?}: gram {rel} vs closed form {closed}"
            );
        }
    }

    #[test]
    fn bound_uses_factor_two_for_white_input() {
        let lambda = c(0.6, 0.0);
        let g = PartialFractionTF::siso(&[(lambda, c(2.0, 0.0))]).unwrap();
        let mus = manual_set(vec![c(0.2, 0.0), c(-0.4, 0.0)]);
        let budget = EnergyBudget::from_tf(&g, 1.0).unwrap();
        let (tight, loose) = bias_upper_bound(&g, &mus, &budget).unwrap();
        let prod = scalar_error_closed_form(lambda, &mus.poles).unwrap();
        let expected = 2.0 * 2.0 / (1.0f64 - 0.36).sqrt() * prod;
        assert_relative_eq!(tight, expected, epsilon = 1e-12);
        assert_relative_eq!(loose, expected, epsilon = 1e-12);
    }

    #[test]
    fn bounds_vanish_when_basis_holds_all_poles() {
        let g = PartialFractionTF::siso(&[
            (c(0.5, 0.2), c(1.0, 0.0)),
            (c(-0.3, 0.0), c(0.5, -0.5)),
        ])
        .unwrap();
        let mus = manual_set(vec![c(0.5, 0.2), c(-0.3, 0.0)]);
        let budget = EnergyBudget::from_tf(&g, 1.0).unwrap();
        let (tight, loose) = bias_upper_bound(&g, &mus, &budget).unwrap();
        assert!(tight < 1e-14);
        assert!(loose < 1e-14);
    }

    /// True bias <= tight bound <= loose bound on every draw.
    #[test]
    fn bounds_dominate_true_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let n = rng.random_range(1..=3);
            let p = rng.random_range(1..=2);
            let m = rng.random_range(1..=2);
            let mut terms = Vec::new();
            for _ in 0..n {
                loop {
                    let lambda = random_disk_point(&mut rng, 0.9);
                    if terms
                        .iter()
                        .all(|(l, _): &(Complex64, DMatrix<Complex64>)| (l - lambda).norm() > 1e-3)
                    {
                        let r = DMatrix::from_fn(p, m, |_, _| {
                            c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
                        });
                        terms.push((lambda, r));
                        break;
                    }
                }
            }
            let g = PartialFractionTF::new(terms).unwrap();
            let q = rng.random_range(1..=4);
            let mut mus: Vec<Complex64> = Vec::new();
            while mus.len() < q {
                let cand = random_disk_point(&mut rng, 0.9);
                if mus.iter().all(|m| (m - cand).norm() > 1e-3) {
                    mus.push(cand);
                }
            }
            let mus = manual_set(mus);
            let (_, bias) = optimal_projection(&g, &mus).unwrap();
            let budget = EnergyBudget::from_tf(&g, 1.0).unwrap();
            let (tight, loose) = bias_upper_bound(&g, &mus, &budget).unwrap();
            assert!(bias <= tight + 1e-12, "bias {bias} > tight {tight}");
            assert!(tight <= loose + 1e-12, "tight {tight} > loose {loose}");
        }
    }

    /// Perturbing the optimal coefficients can only increase the error.
    #[test]
    fn projection_is_first_order_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..1000 {
            let lambda = random_disk_point(&mut rng, 0.85);
            let g = PartialFractionTF::new(vec![(
                lambda,
                DMatrix::from_fn(1, 1, |_, _| {
                    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }),
            )])
            .unwrap();
            let q = rng.random_range(1..=3);
            let mut mus: Vec<Complex64> = Vec::new();
            while mus.len() < q {
                let cand = random_disk_point(&mut rng, 0.85);
                if mus.iter().all(|m| (m - cand).norm() > 1e-2)
                    && (cand - lambda).norm() > 1e-2
                {
                    mus.push(cand);
                }
            }
            let mus = manual_set(mus);
            let (coeffs, bias) = optimal_projection(&g, &mus).unwrap();
            let mut delta: Vec<DMatrix<Complex64>> = (0..q)
                .map(|_| {
                    DMatrix::from_fn(1, 1, |_, _| {
                        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    })
                })
                .collect();
            let scale = 1e-3 / delta.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt();
            for d in &mut delta {
                *d *= c(scale, 0.0);
            }
            let perturbed: Vec<DMatrix<Complex64>> = coeffs
                .iter()
                .zip(&delta)
                .map(|(co, d)| co + d)
                .collect();
            let err = projection_error(&g, &mus.poles, &perturbed).unwrap();
            assert!(
                err + 1e-12 >= bias,
                "perturbation decreased the error: {err} < {bias}"
            );
        }
    }

    #[test]
    fn projection_rejects_ill_conditioned_basis() {
        let g = PartialFractionTF::siso(&[(c(0.6, 0.0), c(1.0, 0.0))]).unwrap();
        let mus = manual_set(vec![c(0.5, 0.0), c(0.5 + 1.2e-8, 0.0)]);
        let err = optimal_projection(&g, &mus).unwrap_err();
        assert!(matches!(err, Error::Singularity(_)));
    }
}
