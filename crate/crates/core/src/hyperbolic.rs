//! Pseudohyperbolic geometry of the unit disk: the metric, Blaschke-type
//! products over pole sets, boundary maxima, and the asymptotic decay
//! constant of disk and interval regions.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optim::golden_max;
use crate::region::{PoleRegion, RegionShape};

/// Pseudohyperbolic distance `|(z - mu) / (1 - conj(mu) z)|`.
///
/// Invariant under disk automorphisms and bounded by 1 whenever both points
/// lie in the closed disk. `mu` must be interior so the denominator stays
/// away from zero.
pub fn pseudo_metric(z: Complex64, mu: Complex64) -> Result<f64> {
    check_interior(mu, "mu")?;
    check_closed(z, "z")?;
    Ok(((z - mu) / (Complex64::new(1.0, 0.0) - mu.conj() * z)).norm())
}

/// Product of pseudohyperbolic distances from `z` to every pole.
pub fn blaschke_product(z: Complex64, poles: &[Complex64]) -> Result<f64> {
    if poles.is_empty() {
        return Err(Error::Arity("empty pole list".into()));
    }
    let mut prod = 1.0;
    for &mu in poles {
        prod *= pseudo_metric(z, mu)?;
    }
    Ok(prod)
}

/// Pairwise product over a point configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairProduct {
    /// `prod_{j<k} [z_j, z_k]_h`
    pub raw: f64,
    /// `raw^(1 / C(q,2))`, the per-pair geometric mean.
    pub normalized: f64,
}

/// Product of pseudohyperbolic distances over all unordered pairs, raw and
/// normalized by the `C(q,2)`-th root.
pub fn pair_product(points: &[Complex64]) -> Result<PairProduct> {
    let q = points.len();
    if q < 2 {
        return Err(Error::Arity(format!("need at least 2 points, got {q}")));
    }
    let mut raw = 1.0;
    for j in 0..q {
        for k in (j + 1)..q {
            raw *= pseudo_metric(points[j], points[k])?;
        }
    }
    let pairs = (q * (q - 1) / 2) as f64;
    Ok(PairProduct {
        raw,
        normalized: raw.powf(1.0 / pairs),
    })
}

/// Maximum of the Blaschke-type product over the region boundary.
///
/// Scans `grid` equispaced boundary parameters (plus the vertices of a
/// sampled boundary), then sharpens the best bracket by golden section to
/// parameter tolerance 1e-10.
pub fn worst_case_product(
    region: &PoleRegion,
    poles: &[Complex64],
    grid: usize,
) -> Result<f64> {
    if poles.is_empty() {
        return Err(Error::Arity("empty pole list".into()));
    }
    for &mu in poles {
        check_interior(mu, "pole")?;
    }
    let n = grid.max(16);
    let eval = |t: f64| {
        let z = region.boundary_point(t);
        let mut prod = 1.0;
        for &mu in poles {
            prod *= ((z - mu) / (Complex64::new(1.0, 0.0) - mu.conj() * z)).norm();
        }
        prod
    };
    let mut best_t = 0.0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let t = i as f64 / n as f64;
        let v = eval(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    if let RegionShape::Boundary { points } = &region.shape {
        // vertices may sit between grid nodes; include their exact parameters
        let m = points.len();
        for i in 0..m {
            let t = i as f64 / m as f64;
            let v = eval(vertex_param(points, i));
            if v > best {
                best = v;
                best_t = t;
            }
        }
    }
    let h = 1.0 / n as f64;
    let (_, refined) = golden_max(eval, best_t - h, best_t + h, 1e-10, 200);
    Ok(refined.max(best))
}

fn vertex_param(points: &[Complex64], idx: usize) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    let mut upto = 0.0;
    for i in 0..n {
        let seg = (points[(i + 1) % n] - points[i]).norm();
        if i < idx {
            upto += seg;
        }
        total += seg;
    }
    if total > 0.0 {
        upto / total
    } else {
        0.0
    }
}

/// Complete elliptic integral of the first kind `K(k)` in the modulus
/// convention, by the arithmetic-geometric mean.
///
/// Stops when `|a_n - b_n| < 1e-15 * a_n`; the iteration is quadratically
/// convergent for every `k` in `[0, 1)`.
pub fn elliptic_k(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!("modulus {k} outside [0, 1)")));
    }
    agm_quarter_period((1.0 - k * k).sqrt())
}

/// Modulus `k` with its complement and both quarter periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticModulus {
    pub k: f64,
    pub k_prime: f64,
    /// `K(k)`
    pub big_k: f64,
    /// `K(k')`
    pub big_k_prime: f64,
}

impl EllipticModulus {
    pub fn new(k: f64) -> Result<Self> {
        Self::from_parts(k, (1.0 - k * k).sqrt())
    }

    /// Build from modulus and complement together.
    ///
    /// When `k` is close to 1 the complement often has a cancellation-free
    /// expression of its own; passing it here keeps `K(k)` accurate where
    /// `sqrt(1 - k^2)` would lose half the digits.
    pub fn from_parts(k: f64, k_prime: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&k) || !(k_prime > 0.0 && k_prime <= 1.0) {
            return Err(Error::Domain(format!(
                "modulus pair ({k}, {k_prime}) outside the unit quarter circle"
            )));
        }
        Ok(EllipticModulus {
            k,
            k_prime,
            big_k: agm_quarter_period(k_prime)?,
            big_k_prime: agm_quarter_period(k)?,
        })
    }
}

/// `pi / (2 agm(1, b0))`, which equals `K(k)` when `b0 = k'`.
fn agm_quarter_period(b0: f64) -> Result<f64> {
    let mut a = 1.0f64;
    let mut b = b0;
    for _ in 0..64 {
        if (a - b).abs() < 1e-15 * a {
            return Ok(std::f64::consts::PI / (2.0 * a));
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    Err(Error::Convergence(format!("AGM stalled for complement {b0}")))
}

/// Asymptotic per-pole decay constant of a region, in closed form.
///
/// Disk of radius `rho`: exactly `rho`. Interval `[a, b]`: with
/// `r = (b - a)/(1 - a b)` the value is `exp(-(pi/2) K(k') / K(r))`.
/// Sampled boundaries have no closed form.
pub fn tau_analytic(region: &PoleRegion) -> Result<f64> {
    match &region.shape {
        RegionShape::Disk { rho } => Ok(*rho),
        RegionShape::Interval { a, b } => {
            let denom = 1.0 - a * b;
            let r = (b - a) / denom;
            // complement in factored form: (b-a)^2 + (1-a^2)(1-b^2) = (1-ab)^2,
            // so this stays accurate even when r is within 1e-6 of 1
            let r_prime =
                ((1.0 - a) * (1.0 + a) * (1.0 - b) * (1.0 + b)).sqrt() / denom;
            let m = EllipticModulus::from_parts(r, r_prime)?;
            Ok((-(std::f64::consts::PI / 2.0) * m.big_k_prime / m.big_k).exp())
        }
        RegionShape::Boundary { .. } => Err(Error::UnsupportedRegion(
            "no closed form for sampled boundaries".into(),
        )),
    }
}

fn check_interior(z: Complex64, what: &str) -> Result<()> {
    let r = z.norm();
    if !r.is_finite() || r >= 1.0 {
        return Err(Error::Domain(format!("{what} = {z} not inside the open unit disk")));
    }
    Ok(())
}

fn check_closed(z: Complex64, what: &str) -> Result<()> {
    let r = z.norm();
    if !r.is_finite() || r > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("{what} = {z} outside the closed unit disk")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn metric_examples() {
        assert_relative_eq!(
            pseudo_metric(c(0.37, 0.0), c(0.0, 0.0)).unwrap(),
            0.37,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            pseudo_metric(c(0.5, 0.0), c(0.3, 0.0)).unwrap(),
            0.2 / 0.85,
            max_relative = 1e-15
        );
    }

    #[test]
    fn metric_rejects_bad_inputs() {
        assert!(pseudo_metric(c(0.5, 0.0), c(1.0, 0.0)).is_err());
        assert!(pseudo_metric(c(1.2, 0.0), c(0.3, 0.0)).is_err());
        assert!(pseudo_metric(c(f64::NAN, 0.0), c(0.3, 0.0)).is_err());
    }

    #[test]
    fn blaschke_example() {
        let v = blaschke_product(c(0.6, 0.0), &[c(0.2, 0.0), c(-0.4, 0.0)]).unwrap();
        assert_relative_eq!(v, (0.4 / 0.88) * (1.0 / 1.24), max_relative = 1e-15);
        assert!(blaschke_product(c(0.6, 0.0), &[]).is_err());
    }

    #[test]
    fn pair_product_examples() {
        let p = pair_product(&[c(0.5, 0.0), c(-0.5, 0.0)]).unwrap();
        assert_relative_eq!(p.raw, 0.8, max_relative = 1e-15);
        assert_relative_eq!(p.normalized, 0.8, max_relative = 1e-15);
        assert!(pair_product(&[c(0.1, 0.0)]).is_err());

        // three points equally spaced on the circle |z| = 0.5
        let rho = 0.5f64;
        let pts: Vec<_> = (0..3)
            .map(|k| Complex64::from_polar(rho, 2.0 * std::f64::consts::PI * k as f64 / 3.0))
            .collect();
        let p = pair_product(&pts).unwrap();
        let pair = pseudo_metric(pts[0], pts[1]).unwrap();
        assert_relative_eq!(p.raw, pair.powi(3), max_relative = 1e-12);
        assert_relative_eq!(p.normalized, pair, max_relative = 1e-12);
    }

    #[test]
    fn worst_case_matches_closed_forms() {
        let disk = PoleRegion::disk(0.8).unwrap();
        // poles {0.8, -0.8}: maximum sits at z = +-0.8i
        let v = worst_case_product(&disk, &[c(0.8, 0.0), c(-0.8, 0.0)], 512).unwrap();
        assert_relative_eq!(v, 1.28 / 1.4096, epsilon = 1e-9);

        // single pole at the center: max |z| over the circle = rho
        let v = worst_case_product(&disk, &[c(0.0, 0.0)], 64).unwrap();
        assert_relative_eq!(v, 0.8, epsilon = 1e-10);

        let iv = PoleRegion::interval(-0.9, 0.9).unwrap();
        // single pole at 0 over the interval: max at the endpoints
        let v = worst_case_product(&iv, &[c(0.0, 0.0)], 128).unwrap();
        assert_relative_eq!(v, 0.9, epsilon = 1e-10);
    }

    #[test]
    fn worst_case_on_sampled_boundary() {
        let square = PoleRegion::boundary(vec![
            c(0.4, 0.4),
            c(-0.4, 0.4),
            c(-0.4, -0.4),
            c(0.4, -0.4),
        ])
        .unwrap();
        let v = worst_case_product(&square, &[c(0.0, 0.0)], 64).unwrap();
        assert_relative_eq!(v, (2.0f64 * 0.16).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn elliptic_k_values() {
        assert_relative_eq!(elliptic_k(0.0).unwrap(), std::f64::consts::FRAC_PI_2);
        // independent quadrature oracle value for modulus 0.5
        assert_relative_eq!(elliptic_k(0.5).unwrap(), 1.685750354812596, epsilon = 1e-14);
        assert!(elliptic_k(0.999999).unwrap() > 7.0);
        assert!(elliptic_k(1.0).is_err());
        assert!(elliptic_k(-0.1).is_err());
    }

    /// Adaptive Simpson quadrature of the defining integral, kept deliberately
    /// separate from the AGM path.
    fn k_by_quadrature(k: f64) -> f64 {
        fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fb: f64, fm: f64, eps: f64, depth: usize) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() < 15.0 * eps {
                left + right + (left + right - whole) / 15.0
            } else {
                simpson(f, a, m, fa, fm, flm, eps / 2.0, depth - 1)
                    + simpson(f, m, b, fm, fb, frm, eps / 2.0, depth - 1)
            }
        }
        let f = |t: f64| 1.0 / (1.0 - k * k * t.sin().powi(2)).sqrt();
        let (a, b) = (0.0, std::f64::consts::FRAC_PI_2);
        simpson(&f, a, b, f(a), f(b), f(0.5 * (a + b)), 1e-13, 40)
    }

    #[test]
    fn agm_agrees_with_quadrature() {
        for &k in &[0.1, 0.3, 0.7, 0.95, 0.999] {
            assert_relative_eq!(elliptic_k(k).unwrap(), k_by_quadrature(k), max_relative = 1e-12);
        }
    }

    #[test]
    fn tau_closed_forms() {
        let disk = PoleRegion::disk(0.73).unwrap();
        assert_relative_eq!(tau_analytic(&disk).unwrap(), 0.73);

        // interval values pinned by independent quadrature of both K integrals
        let cases = [
            (-0.95, 0.95, 0.56759610281924723),
            (-0.999, 0.999, 0.74266630416727541),
            (-0.9, 0.9, 0.50747519878281611),
            (0.1, 0.6, 0.14413432959176445),
        ];
        for &(a, b, expect) in &cases {
            let iv = PoleRegion::interval(a, b).unwrap();
            assert_relative_eq!(tau_analytic(&iv).unwrap(), expect, epsilon = 1e-12);
        }
        // growth-rate identity used downstream
        let iv = PoleRegion::interval(-0.999, 0.999).unwrap();
        let t = tau_analytic(&iv).unwrap();
        assert!((t.powi(-2) - 1.81).abs() < 0.02);

        let bpts = PoleRegion::boundary(vec![c(0.1, 0.0)]).unwrap();
        assert!(matches!(tau_analytic(&bpts), Err(Error::UnsupportedRegion(_))));
    }

    #[test]
    fn elliptic_modulus_consistency() {
        let m = EllipticModulus::new(0.6).unwrap();
        assert_relative_eq!(m.k * m.k + m.k_prime * m.k_prime, 1.0, epsilon = 1e-15);
        assert!(m.big_k > 0.0 && m.big_k_prime > 0.0);
    }

    proptest! {
        #[test]
        fn metric_is_symmetric(zr in -0.95f64..0.95, zi in -0.95f64..0.95,
                               mr in -0.95f64..0.95, mi in -0.95f64..0.95) {
            let z = c(zr * 0.7, zi * 0.7);
            let mu = c(mr * 0.7, mi * 0.7);
            let a = pseudo_metric(z, mu).unwrap();
            let b = pseudo_metric(mu, z).unwrap();
            prop_assert!((a - b).abs() < 1e-13);
            prop_assert!((0.0..1.0).contains(&a));
        }

        #[test]
        fn metric_is_mobius_invariant(zr in -0.6f64..0.6, zi in -0.6f64..0.6,
                                      mr in -0.6f64..0.6, mi in -0.6f64..0.6,
                                      ar in -0.6f64..0.6, ai in -0.6f64..0.6) {
            let z = c(zr, zi);
            let mu = c(mr, mi);
            let a = c(ar, ai);
            let phi = |w: Complex64| (w - a) / (Complex64::new(1.0, 0.0) - a.conj() * w);
            let d0 = pseudo_metric(z, mu).unwrap();
            let d1 = pseudo_metric(phi(z), phi(mu)).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-12);
        }
    }
}
