//! Conformal equipment for interval pole regions: the Mobius normalization,
//! the elliptic-integral map from the slit disk to a rectangle, Jacobi sn,
//! and the annulus chart used to spread initial pole configurations.
//!
//! For a symmetric interval `[-rho, rho]` the composition
//! `z -> mobius -> sc_map -> exponential` carries the unit disk minus the
//! interval onto the annulus `tau < |w| < 1`, sending the interval to the
//! inner circle and the unit circle to itself. All maps here use the
//! convention that is symmetric under conjugation, so real inputs stay real
//! and the lower half-plane is the mirror of the upper.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hyperbolic::EllipticModulus;
use crate::region::{PoleRegion, RegionShape};

/// Precomputed constants of the interval-to-annulus chart for `[-rho, rho]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalMapParams {
    /// Interval half-width.
    pub rho: f64,
    /// Image of the right endpoint under the Mobius normalization,
    /// `2 rho / (1 + rho^2)`; also the modulus of the elliptic integrals.
    pub rho_tilde: f64,
    /// Quarter period `K(rho_tilde)`.
    pub k_k: f64,
    /// Complementary quarter period `K(sqrt(1 - rho_tilde^2))`.
    pub k_kp: f64,
    /// Inner radius of the annulus, `exp(-(pi/2) k_kp / k_k)`.
    pub tau: f64,
}

impl IntervalMapParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!(
                "interval half-width {rho} outside (0, 1)"
            )));
        }
        let rho_tilde = 2.0 * rho / (1.0 + rho * rho);
        // complement without cancellation: 1 - rho_tilde^2 = ((1-rho^2)/(1+rho^2))^2
        let complement = (1.0 - rho) * (1.0 + rho) / (1.0 + rho * rho);
        let m = EllipticModulus::from_parts(rho_tilde, complement)?;
        let tau = (-(PI / 2.0) * m.big_k_prime / m.big_k).exp();
        Ok(IntervalMapParams {
            rho,
            rho_tilde,
            k_k: m.big_k,
            k_kp: m.big_k_prime,
            tau,
        })
    }
}

/// Mobius normalization `(z + rho) / (1 + rho z)`.
///
/// Fixes the unit circle and carries `[-rho, rho]` onto `[0, rho_tilde]`.
/// The same function with `-rho` is its inverse.
pub fn mobius(z: Complex64, rho: f64) -> Result<Complex64> {
    if z.norm() > 1.0 + 1e-9 {
        return Err(Error::Domain(format!("{z} outside the closed unit disk")));
    }
    let den = Complex64::new(1.0, 0.0) + rho * z;
    if den.norm() < 1e-14 {
        return Err(Error::Domain(format!("{z} is the pole of the Mobius map")));
    }
    Ok((z + rho) / den)
}

// 15-point Kronrod rule with embedded 7-point Gauss rule on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_2,
    0.063_092_092_629_978_6,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let f0 = f(c);
    let mut k = WGK[7] * f0;
    let mut g = WG[3] * f0;
    for i in 0..7 {
        let f1 = f(c - h * XGK[i]);
        let f2 = f(c + h * XGK[i]);
        k += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            g += WG[(i - 1) / 2] * (f1 + f2);
        }
    }
    (k * h, (k - g).norm() * h.abs())
}

/// Worst-interval-first adaptive integration over the parameter range [0, 1].
fn integrate_unit<F: Fn(f64) -> Complex64>(f: &F, tol: f64, budget: usize) -> (Complex64, f64) {
    let (i0, e0) = gk15(f, 0.0, 1.0);
    let mut segs = vec![(0.0f64, 1.0f64, i0, e0)];
    loop {
        let total_err: f64 = segs.iter().map(|s| s.3).sum();
        let total_mag: f64 = segs.iter().map(|s| s.2.norm()).sum();
        if total_err < tol.max(1e-15 * total_mag) || segs.len() >= budget {
            let total: Complex64 = segs.iter().map(|s| s.2).sum();
            return (total, total_err);
        }
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (a, b, _, _) = segs.swap_remove(worst);
        let m = 0.5 * (a + b);
        let (i1, e1) = gk15(f, a, m);
        let (i2, e2) = gk15(f, m, b);
        segs.push((a, m, i1, e1));
        segs.push((m, b, i2, e2));
    }
}

/// Incomplete elliptic integral of the first kind at `sqrt(z / rho_tilde)`
/// with modulus `rho_tilde`, by adaptive complex-path quadrature.
///
/// This is the middle leg of the interval-to-annulus chain: it carries the
/// disk slit along `[0, rho_tilde]` onto a `K x K'` rectangle, real on
/// `[0, rho_tilde]` and conjugate-symmetric (`sc_map(conj z) = conj(sc_map
/// z)`). Inputs on the segment `(rho_tilde, 1]` sit against the integrand's
/// branch cut and are taken as limits from the upper half-plane; the
/// integration path detours through a rectangular dog-leg there, and the
/// final approach substitutes out the endpoint singularity whenever the
/// endpoint is within 1e-3 of a branch point.
pub fn sc_map(z: Complex64, params: &IntervalMapParams) -> Result<Complex64> {
    if z.im < 0.0 {
        return Ok(sc_map(z.conj(), params)?.conj());
    }
    if z.norm() > 1.0 + 1e-9 {
        if z.im == 0.0 && z.re > 0.0 {
            return Err(Error::Branch(format!(
                "integration path for z = {z} would cross the slit"
            )));
        }
        return Err(Error::Domain(format!("{z} outside the closed unit disk")));
    }
    let rt = params.rho_tilde;
    let v = (z / rt).sqrt();
    let integrand = |w: Complex64| {
        let den = (Complex64::new(1.0, 0.0) - w * w).sqrt()
            * (Complex64::new(1.0, 0.0) - (rt * w) * (rt * w)).sqrt();
        if den.norm_sqr() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            den.inv()
        }
    };
    let zero = Complex64::new(0.0, 0.0);
    let legs: Vec<(Complex64, Complex64)> = if v.im < 1e-6 && v.re > 1.0 - 1e-6 {
        // endpoint on or next to the slit: detour above it and come down
        let lift = Complex64::new(0.0, 0.5);
        vec![
            (zero, lift),
            (lift, Complex64::new(v.re, 0.0) + lift),
            (Complex64::new(v.re, 0.0) + lift, v),
        ]
    } else {
        vec![(zero, v)]
    };
    let branch_points = [1.0, 1.0 / rt];
    let mut total = zero;
    let mut err = 0.0;
    let n_legs = legs.len();
    for (idx, (p, q)) in legs.into_iter().enumerate() {
        let endpoint_dist = branch_points
            .iter()
            .map(|&b| (q - b).norm())
            .fold(f64::INFINITY, f64::min);
        let (i, e) = if idx == n_legs - 1 && endpoint_dist < 1e-3 {
            // quadratic reparameterization absorbs the 1/sqrt endpoint
            // behavior; written from the q end so w keeps full resolution
            // when (1 - u) is tiny
            let g = |u: f64| {
                let om = 1.0 - u;
                integrand(q + (p - q) * (om * om)) * (q - p) * 2.0 * om
            };
            integrate_unit(&g, 5e-13, 600)
        } else {
            let g = |t: f64| integrand(p + (q - p) * t) * (q - p);
            integrate_unit(&g, 5e-13, 600)
        };
        total += i;
        err += e;
    }
    if err > 1e-6 {
        return Err(Error::Convergence(format!(
            "path quadrature for z = {z} stalled with residual {err:.2e}"
        )));
    }
    Ok(total)
}

/// Jacobi elliptic sine `sn(u | m)` for complex argument, by the descending
/// Landen transformation.
///
/// Uses the parameter convention: `m` is the squared modulus, so
/// `sn(K(sqrt(m)), m) = 1`. The recursion shrinks the modulus quadratically;
/// once it drops below 1e-12 the base case is an ordinary sine.
pub fn jacobi_sn(u: Complex64, m: f64) -> Result<Complex64> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::Domain(format!("parameter {m} outside [0, 1)")));
    }
    if m == 0.0 {
        return Ok(u.sin());
    }
    let mut k = m.sqrt();
    let mut stages = Vec::new();
    let mut scale = 1.0f64;
    for _ in 0..64 {
        if k < 1e-12 {
            break;
        }
        let kp = (1.0 - k * k).sqrt();
        let k1 = (1.0 - kp) / (1.0 + kp);
        stages.push(k1);
        scale *= 1.0 + k1;
        k = k1;
    }
    if k >= 1e-12 {
        return Err(Error::Convergence(format!(
            "Landen recursion failed to contract for parameter {m}"
        )));
    }
    let mut s = (u / scale).sin();
    for &k1 in stages.iter().rev() {
        s = (1.0 + k1) * s / (Complex64::new(1.0, 0.0) + k1 * s * s);
    }
    Ok(s)
}

/// Inverse chart: carries the annulus `tau <= |w| <= 1` onto the unit disk
/// slit along `[-rho, rho]`.
///
/// The inner circle covers the interval twice, the outer circle maps to the
/// unit circle, and `w = 1` goes to `z = 1`.
pub fn annulus_to_region(w: Complex64, params: &IntervalMapParams) -> Result<Complex64> {
    let r = w.norm();
    if r < params.tau - 1e-12 || r > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "|w| = {r} outside the annulus [{}, 1]",
            params.tau
        )));
    }
    let m = params.rho_tilde * params.rho_tilde;
    let u = Complex64::new(0.0, params.k_k / PI) * w.ln()
        + Complex64::new(params.k_k, 0.5 * params.k_kp);
    let s = jacobi_sn(u, m)?;
    mobius(params.rho_tilde * s * s, -params.rho)
}

/// Forward chart: carries the slit disk onto the annulus `tau <= |w| <= 1`.
///
/// Inverse of [`annulus_to_region`]; points of `[-rho, rho]` land on the
/// inner circle (upper-limit convention on the slit itself).
pub fn region_to_annulus(z: Complex64, params: &IntervalMapParams) -> Result<Complex64> {
    if z.im < 0.0 {
        return Ok(region_to_annulus(z.conj(), params)?.conj());
    }
    let zm = mobius(z, params.rho)?;
    let s = sc_map(zm, params)?;
    Ok(-params.tau * (Complex64::new(0.0, -PI) * s / params.k_k).exp())
}

/// Center `c` and half-width `rho` of the Mobius change of variables that
/// carries `[a, b]` onto the symmetric interval `[-rho, rho]`.
///
/// `mobius(z, -c)` applies the reduction and `mobius(z, c)` undoes it.
pub fn symmetrize_interval(a: f64, b: f64) -> Result<(f64, f64)> {
    if !(a < b && a > -1.0 && b < 1.0) {
        return Err(Error::Domain(format!("[{a}, {b}] is not inside (-1, 1)")));
    }
    let c = if (a + b).abs() < 1e-15 {
        0.0
    } else {
        ((1.0 + a * b) - ((1.0 - a * a) * (1.0 - b * b)).sqrt()) / (a + b)
    };
    let rho = (b - c) / (1.0 - c * b);
    Ok((c, rho))
}

/// Initial pole configuration: images of the `q`-th roots of unity scaled
/// onto the inner boundary of the region's annulus chart.
///
/// For a disk these are equispaced points of the circle `|z| = rho`; for an
/// interval they are inner-circle images under [`annulus_to_region`], which
/// are real and double up pairwise because the inner circle covers the
/// interval twice.
pub fn tsuji_init(region: &PoleRegion, q: usize) -> Result<Vec<Complex64>> {
    if q == 0 {
        return Err(Error::Arity("need at least one point".into()));
    }
    match &region.shape {
        RegionShape::Disk { rho } => Ok((1..=q)
            .map(|k| Complex64::from_polar(*rho, 2.0 * PI * k as f64 / q as f64))
            .collect()),
        RegionShape::Interval { a, b } => {
            let (c, rho_s) = symmetrize_interval(*a, *b)?;
            let params = IntervalMapParams::new(rho_s)?;
            let mut pts = Vec::with_capacity(q);
            for k in 1..=q {
                let w = Complex64::from_polar(params.tau, 2.0 * PI * k as f64 / q as f64);
                let img = annulus_to_region(w, &params)?;
                // the inner circle maps onto the real slit; drop roundoff
                let x = img.re.clamp(-rho_s, rho_s);
                let back = mobius(Complex64::new(x, 0.0), c)?;
                pts.push(Complex64::new(back.re.clamp(*a, *b), 0.0));
            }
            Ok(pts)
        }
        RegionShape::Boundary { .. } => Err(Error::UnsupportedRegion(
            "no annulus chart for sampled boundaries".into(),
        )),
    }
}
