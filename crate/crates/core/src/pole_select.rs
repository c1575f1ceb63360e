//! Pole placement over a region: maximization of the pairwise hyperbolic
//! spread (Tsuji configurations) and the minimax worst-case baseline.
//!
//! Both optimizers work on boundary or region coordinates and hand back a
//! validated [`PoleSet`] together with a small report. Products are
//! maximized in the log domain so configurations with a hundred poles do
//! not underflow.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::conformal::{jacobi_sn, symmetrize_interval, tsuji_init, IntervalMapParams};
use crate::error::{Error, Result};
use crate::hyperbolic::{pair_product, worst_case_product};
use crate::optim::{golden_max, nelder_mead};
use crate::region::{PoleRegion, RegionShape};

/// How a pole configuration was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMethod {
    Tsuji,
    TsujiInitOnly,
    Minimax,
    Manual,
}

/// A pole configuration tied to the region it was selected for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSet {
    #[serde(with = "crate::serdes::complex_vec")]
    pub poles: Vec<Complex64>,
    pub region: PoleRegion,
    pub method: SelectMethod,
    pub conj_closed: bool,
}

impl PoleSet {
    pub fn new(
        poles: Vec<Complex64>,
        region: PoleRegion,
        method: SelectMethod,
        conj_closed: bool,
    ) -> Result<Self> {
        let set = PoleSet {
            poles,
            region,
            method,
            conj_closed,
        };
        set.validate()?;
        Ok(set)
    }

    /// Checks the structural invariants: poles strictly inside the unit
    /// disk and in the closed region, pairwise separated by more than 1e-8,
    /// and conjugate-closed when flagged.
    pub fn validate(&self) -> Result<()> {
        if self.poles.is_empty() {
            return Err(Error::Arity("empty pole set".into()));
        }
        for &mu in &self.poles {
            if mu.norm() >= 1.0 {
                return Err(Error::Domain(format!("pole {mu} not inside the unit disk")));
            }
            if !self.region.contains(mu, 1e-9) {
                return Err(Error::Domain(format!("pole {mu} outside the region")));
            }
        }
        for i in 0..self.poles.len() {
            for j in (i + 1)..self.poles.len() {
                if (self.poles[i] - self.poles[j]).norm() <= 1e-8 {
                    return Err(Error::Degenerate(format!(
                        "poles {} and {} coincide",
                        self.poles[i], self.poles[j]
                    )));
                }
            }
        }
        if self.conj_closed && !is_conj_closed(&self.poles, 1e-9) {
            return Err(Error::Domain(
                "pole set marked conjugate-closed but is not".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome summary attached to an optimized pole set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    /// Normalized pairwise product at the solution (zero when there are
    /// fewer than two poles).
    pub objective: f64,
    /// Boundary maximum of the Blaschke-type product at the solution.
    pub worst_case: f64,
    pub iterations: usize,
    pub restarts_used: usize,
}

/// Knobs shared by the two optimizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    /// Coordinate-ascent sweep cap before giving up.
    pub max_sweeps: usize,
    /// Independent simplex starts for the minimax search.
    pub restarts: usize,
    /// Boundary grid density for worst-case evaluations.
    pub grid_density: usize,
    /// Seed for the restart perturbations.
    pub seed: u64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            max_sweeps: 500,
            restarts: 8,
            grid_density: 512,
            seed: 0,
        }
    }
}

/// One-parameter boundary chart nu -> pole used by the coordinate ascent.
enum BoundaryChart {
    Disk {
        rho: f64,
    },
    /// Interval through its annulus chart: the inner circle maps onto the
    /// interval (twice), so the pole at parameter nu is real by
    /// construction.
    Interval {
        a: f64,
        b: f64,
        center: f64,
        rho_s: f64,
        rho_tilde: f64,
        big_k: f64,
    },
    Sampled {
        region: PoleRegion,
    },
}

impl BoundaryChart {
    fn new(region: &PoleRegion) -> Result<Self> {
        match &region.shape {
            RegionShape::Disk { rho } => Ok(BoundaryChart::Disk { rho: *rho }),
            RegionShape::Interval { a, b } => {
                let (center, rho_s) = symmetrize_interval(*a, *b)?;
                let params = IntervalMapParams::new(rho_s)?;
                Ok(BoundaryChart::Interval {
                    a: *a,
                    b: *b,
                    center,
                    rho_s,
                    rho_tilde: params.rho_tilde,
                    big_k: params.k_k,
                })
            }
            RegionShape::Boundary { .. } => Ok(BoundaryChart::Sampled {
                region: region.clone(),
            }),
        }
    }

    fn at(&self, nu: f64) -> Complex64 {
        match self {
            BoundaryChart::Disk { rho } => Complex64::from_polar(*rho, nu),
            BoundaryChart::Interval {
                a,
                b,
                center,
                rho_s,
                rho_tilde,
                big_k,
            } => {
                // on the inner circle the elliptic argument is real, so the
                // whole chain stays in real arithmetic
                let u = big_k * (1.0 - nu.rem_euclid(2.0 * PI) / PI);
                let s = jacobi_sn(Complex64::new(u, 0.0), rho_tilde * rho_tilde)
                    .expect("modulus was validated at chart construction")
                    .re;
                let z = rho_tilde * s * s;
                let x = (z - rho_s) / (1.0 - rho_s * z);
                let x = (x + center) / (1.0 + center * x);
                Complex64::new(x.clamp(*a, *b), 0.0)
            }
            BoundaryChart::Sampled { region } => region.boundary_point(nu / (2.0 * PI)),
        }
    }
}

fn log_metric(z: Complex64, w: Complex64) -> f64 {
    let d = ((z - w) / (Complex64::new(1.0, 0.0) - w.conj() * z)).norm();
    d.max(1e-300).ln()
}

fn log_pair_objective(poles: &[Complex64]) -> f64 {
    let mut s = 0.0;
    for i in 0..poles.len() {
        for j in (i + 1)..poles.len() {
            s += log_metric(poles[i], poles[j]);
        }
    }
    s
}

fn partial_objective(chart: &BoundaryChart, poles: &[Complex64], k: usize, nu: f64) -> f64 {
    let cand = chart.at(nu);
    let mut s = 0.0;
    for (l, &p) in poles.iter().enumerate() {
        if l != k {
            s += log_metric(cand, p);
        }
    }
    s
}

fn is_conj_closed(poles: &[Complex64], tol: f64) -> bool {
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        if poles[i].im.abs() <= tol {
            continue;
        }
        let partner = (0..poles.len())
            .filter(|&j| j != i && !used[j])
            .min_by(|&a, &b| {
                (poles[a] - poles[i].conj())
                    .norm()
                    .total_cmp(&(poles[b] - poles[i].conj()).norm())
            });
        match partner {
            Some(j) if (poles[j] - poles[i].conj()).norm() <= tol => used[j] = true,
            _ => return false,
        }
    }
    true
}

/// Pushes coincident poles apart (separation floor 1e-8) by stepping the
/// later pole of each close pair toward the region's inside.
fn enforce_distinct(poles: &mut [Complex64], region: &PoleRegion) {
    for pass in 1..=64 {
        let mut moved = false;
        for i in 0..poles.len() {
            for j in (i + 1)..poles.len() {
                if (poles[i] - poles[j]).norm() <= 1e-8 {
                    poles[j] = nudge_inward(poles[j], region, pass as f64 * (j + 1) as f64 * 1e-6);
                    moved = true;
                }
            }
        }
        if !moved {
            return;
        }
    }
}

fn nudge_inward(z: Complex64, region: &PoleRegion, amount: f64) -> Complex64 {
    match &region.shape {
        RegionShape::Disk { .. } => {
            let r = z.norm();
            if r > amount {
                z * (1.0 - amount / r)
            } else {
                z + Complex64::new(amount, 0.0)
            }
        }
        RegionShape::Interval { a, b } => {
            let mid = 0.5 * (a + b);
            let dir = if z.re == mid { 1.0 } else { (mid - z.re).signum() };
            Complex64::new((z.re + dir * amount).clamp(*a, *b), 0.0)
        }
        RegionShape::Boundary { .. } => {
            // no interior to aim for; slide along the sampled boundary
            region.project(z + Complex64::new(amount, amount))
        }
    }
}

/// Argument folded into [0, 2 pi), with roundoff just below a full turn
/// snapped back to zero so sorting is stable against sign noise.
fn arg_key(p: Complex64) -> f64 {
    let t = p.arg().rem_euclid(2.0 * PI);
    if t >= 2.0 * PI - 1e-9 {
        0.0
    } else {
        t
    }
}

/// Deterministic presentation: a global rotation (a symmetry of any disk
/// objective) placing the smallest pole argument in [0, 2 pi / q), then a
/// sort by argument and modulus.
fn canonicalize(poles: &mut [Complex64], region: &PoleRegion) {
    if let RegionShape::Disk { .. } = &region.shape {
        let theta = poles.iter().map(|&p| arg_key(p)).fold(f64::INFINITY, f64::min);
        if theta.is_finite() && theta > 0.0 {
            let spin = Complex64::from_polar(1.0, -theta);
            for p in poles.iter_mut() {
                *p *= spin;
            }
        }
    }
    poles.sort_by(|&x, &y| {
        (arg_key(x), x.norm())
            .partial_cmp(&(arg_key(y), y.norm()))
            .expect("pole coordinates are finite")
    });
}

/// Maximizes the pairwise hyperbolic spread of `q` poles over the region
/// boundary by coordinate ascent with golden-section line searches,
/// starting from the annulus-equispaced configuration.
///
/// Each coordinate move is accepted only if it improves, so the objective
/// is non-decreasing sweep over sweep; convergence is declared when a full
/// sweep improves the log objective by less than 1e-12.
pub fn tsuji_points(
    region: &PoleRegion,
    q: usize,
    opts: &SelectOptions,
) -> Result<(PoleSet, SelectReport)> {
    if q < 2 {
        return Err(Error::Arity(format!(
            "pairwise spread needs at least two poles, got {q}"
        )));
    }
    let chart = BoundaryChart::new(region)?;
    let mut nus: Vec<f64> = (1..=q).map(|k| 2.0 * PI * k as f64 / q as f64).collect();
    let mut poles: Vec<Complex64> = nus.iter().map(|&nu| chart.at(nu)).collect();
    let scan = (4 * q).max(24);
    let mut objective = log_pair_objective(&poles);
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        for k in 0..q {
            let mut best_nu = nus[k];
            let mut best_val = partial_objective(&chart, &poles, k, best_nu);
            for j in 0..scan {
                let nu = 2.0 * PI * j as f64 / scan as f64;
                let val = partial_objective(&chart, &poles, k, nu);
                if val > best_val {
                    best_val = val;
                    best_nu = nu;
                }
            }
            let half = 2.0 * PI / scan as f64;
            let (nu_fine, val_fine) = golden_max(
                |nu| partial_objective(&chart, &poles, k, nu),
                best_nu - half,
                best_nu + half,
                1e-12,
                200,
            );
            if val_fine > best_val {
                best_nu = nu_fine;
            }
            nus[k] = best_nu;
            poles[k] = chart.at(best_nu);
        }
        let next = log_pair_objective(&poles);
        let gain = next - objective;
        debug_assert!(gain > -1e-9, "objective regressed by {gain}");
        objective = next;
        if gain.abs() < 1e-12 {
            break;
        }
        if sweeps >= opts.max_sweeps {
            return Err(Error::Convergence(format!(
                "coordinate ascent still moving after {sweeps} sweeps"
            )));
        }
    }
    enforce_distinct(&mut poles, region);
    canonicalize(&mut poles, region);
    let conj_closed = is_conj_closed(&poles, 1e-9);
    let set = PoleSet::new(poles, region.clone(), SelectMethod::Tsuji, conj_closed)?;
    let report = SelectReport {
        objective: pair_product(&set.poles)?.normalized,
        worst_case: worst_case_product(region, &set.poles, opts.grid_density)?,
        iterations: sweeps,
        restarts_used: 0,
    };
    Ok((set, report))
}

/// Minimizes the boundary worst case over `q` free poles in the closed
/// region: multi-start Nelder-Mead outside, grid-plus-refinement boundary
/// maximization inside.
///
/// Restarts are seeded from the annulus-equispaced configuration plus
/// seeded Gaussian perturbations, and every candidate is projected back
/// into the region before evaluation.
pub fn minimax_poles(
    region: &PoleRegion,
    q: usize,
    opts: &SelectOptions,
) -> Result<(PoleSet, SelectReport)> {
    if q == 0 {
        return Err(Error::Arity("need at least one pole".into()));
    }
    if matches!(&region.shape, RegionShape::Boundary { .. }) {
        return Err(Error::UnsupportedRegion(
            "minimax search needs a solid region, not boundary samples".into(),
        ));
    }
    let real_only = matches!(&region.shape, RegionShape::Interval { .. });
    let dim = if real_only { q } else { 2 * q };
    let coords_to_poles = |x: &[f64]| -> Vec<Complex64> {
        (0..q)
            .map(|i| {
                let raw = if real_only {
                    Complex64::new(x[i], 0.0)
                } else {
                    Complex64::new(x[2 * i], x[2 * i + 1])
                };
                region.project(raw)
            })
            .collect()
    };
    let objective = |x: &[f64]| -> f64 {
        let poles = coords_to_poles(x);
        worst_case_product(region, &poles, opts.grid_density).unwrap_or(f64::INFINITY)
    };
    let seed_poles = tsuji_init(region, q)?;
    // one start comes from the fully optimized spread configuration, which
    // pins the result to at least that quality; the remaining starts sweep
    // the raw seed from the boundary toward the region center with noise
    let warm_poles = if q >= 2 {
        tsuji_points(region, q, opts).ok().map(|(set, _)| set.poles)
    } else {
        None
    };
    let center = match &region.shape {
        RegionShape::Interval { a, b } => Complex64::new(0.5 * (a + b), 0.0),
        _ => Complex64::new(0.0, 0.0),
    };
    let scale = region.max_abs().max(0.1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let normal = rand_distr::Normal::new(0.0, 0.05 * scale)
        .map_err(|e| Error::Numerical(format!("perturbation scale: {e}")))?;
    let restarts = opts.restarts.max(1);
    let mut best_x: Option<Vec<f64>> = None;
    let mut best_val = f64::INFINITY;
    let mut iterations = 0;
    for r in 0..restarts {
        let shrink = 1.0 - r as f64 / restarts as f64;
        let mut x0 = Vec::with_capacity(dim);
        let base: &[Complex64] = match (&warm_poles, r) {
            (Some(w), 0) => w,
            _ => &seed_poles,
        };
        for &p in base {
            let jitter = if r == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng))
            };
            let p = if r == 0 {
                region.project(p)
            } else {
                region.project(center + (p - center) * shrink + jitter)
            };
            if real_only {
                x0.push(p.re);
            } else {
                x0.push(p.re);
                x0.push(p.im);
            }
        }
        let (x, val, used) = nelder_mead(objective, &x0, 0.1 * scale, 1e-9, 400 * dim);
        iterations += used;
        if val < best_val {
            best_val = val;
            best_x = Some(x);
        }
    }
    let x = best_x.ok_or_else(|| Error::Convergence("no simplex start finished".into()))?;
    let mut poles = coords_to_poles(&x);
    enforce_distinct(&mut poles, region);
    canonicalize(&mut poles, region);
    let conj_closed = is_conj_closed(&poles, 1e-9);
    let set = PoleSet::new(poles, region.clone(), SelectMethod::Minimax, conj_closed)?;
    let objective_val = if q >= 2 {
        pair_product(&set.poles)?.normalized
    } else {
        0.0
    };
    let report = SelectReport {
        objective: objective_val,
        worst_case: worst_case_product(region, &set.poles, opts.grid_density)?,
        iterations,
        restarts_used: restarts,
    };
    Ok((set, report))
}

/// Per-pole decay factor of a configuration: the boundary worst case taken
/// to the power 1/q. Comparable across q and against the region's
/// hyperbolic Chebyshev constant.
pub fn worst_case_rate(poleset: &PoleSet) -> Result<f64> {
    let wc = worst_case_product(&poleset.region, &poleset.poles, 512)?;
    Ok(wc.powf(1.0 / poleset.poles.len() as f64))
}

/// Closes a pole set under conjugation so it can realize a real-rational
/// model: strictly complex poles are paired with their nearest existing
/// conjugate (snapped exact) or given a fresh conjugate partner; real poles
/// pass through untouched.
pub fn enforce_conjugate_closure(poleset: &PoleSet) -> PoleSet {
    let tol_real = 1e-8;
    let tol_match = 1e-6;
    let n = poleset.poles.len();
    let mut used = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if used[i] {
            continue;
        }
        used[i] = true;
        let p = poleset.poles[i];
        if p.im.abs() <= tol_real {
            out.push(p);
            continue;
        }
        let partner = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&a, &b| {
                (poleset.poles[a] - p.conj())
                    .norm()
                    .total_cmp(&(poleset.poles[b] - p.conj()).norm())
            })
            .filter(|&j| (poleset.poles[j] - p.conj()).norm() <= tol_match);
        let snapped = match partner {
            Some(j) => {
                used[j] = true;
                0.5 * (p + poleset.poles[j].conj())
            }
            None => p,
        };
        out.push(snapped);
        out.push(snapped.conj());
    }
    PoleSet {
        poles: out,
        region: poleset.region.clone(),
        method: poleset.method,
        conj_closed: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::tau_analytic;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn metric(a: Complex64, b: Complex64) -> f64 {
        ((a - b) / (c(1.0, 0.0) - b.conj() * a)).norm()
    }

    #[test]
    fn tsuji_disk_pair() {
        let disk = PoleRegion::disk(0.5).unwrap();
        let (set, report) = tsuji_points(&disk, 2, &SelectOptions::default()).unwrap();
        assert!((set.poles[0] - c(0.5, 0.0)).norm() < 1e-9);
        assert!((set.poles[1] - c(-0.5, 0.0)).norm() < 1e-9);
        assert_relative_eq!(report.objective, 0.8, epsilon = 1e-9);
        assert!(report.worst_case < 1.0 && report.worst_case > 0.0);

        // exhaustive 2-d scan over boundary angles stays below the optimum
        let mut grid_best = 0.0f64;
        let n = 600;
        for i in 0..n {
            for j in 0..n {
                let a = Complex64::from_polar(0.5, 2.0 * PI * i as f64 / n as f64);
                let b = Complex64::from_polar(0.5, 2.0 * PI * j as f64 / n as f64);
                grid_best = grid_best.max(metric(a, b));
            }
        }
        assert!(report.objective >= grid_best - 1e-12);
        assert!((report.objective - grid_best).abs() < 1e-4);
    }

    #[test]
    fn tsuji_disk_five_poles_equispaced() {
        let disk = PoleRegion::disk(0.5).unwrap();
        let (set, report) = tsuji_points(&disk, 5, &SelectOptions::default()).unwrap();
        let equi: Vec<Complex64> = (0..5)
            .map(|k| Complex64::from_polar(0.5, 2.0 * PI * k as f64 / 5.0))
            .collect();
        let reference = pair_product(&equi).unwrap().normalized;
        assert!(report.objective >= reference - 1e-12);
        assert!((report.objective - reference).abs() < 1e-6);
        assert_eq!(set.poles.len(), 5);
    }

    #[test]
    fn tsuji_interval_pair_takes_endpoints() {
        let iv = PoleRegion::interval(-0.95, 0.95).unwrap();
        let (set, report) = tsuji_points(&iv, 2, &SelectOptions::default()).unwrap();
        for p in &set.poles {
            assert!(p.im.abs() < 1e-8);
        }
        // symmetric pair, and a dense 2-d scan cannot beat it
        assert!((set.poles[0].re + set.poles[1].re).abs() < 1e-6);
        let mut grid_best = 0.0f64;
        let n = 600;
        for i in 0..=n {
            for j in 0..=n {
                let a = c(-0.95 + 1.9 * i as f64 / n as f64, 0.0);
                let b = c(-0.95 + 1.9 * j as f64 / n as f64, 0.0);
                grid_best = grid_best.max(metric(a, b));
            }
        }
        assert!(report.objective >= grid_best - 1e-12);
        assert!((report.objective - grid_best).abs() < 1e-4);
    }

    #[test]
    fn tsuji_interval_triple() {
        let iv = PoleRegion::interval(-0.9, 0.9).unwrap();
        let (set, report) = tsuji_points(&iv, 3, &SelectOptions::default()).unwrap();
        for p in &set.poles {
            assert!(p.im.abs() < 1e-8);
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert!((set.poles[i] - set.poles[j]).norm() > 1e-8);
            }
        }
        // coarse 3-d scan of the raw product as a floor
        let n = 60;
        let mut grid_best = f64::NEG_INFINITY;
        for i in 0..=n {
            for j in (i + 1)..=n {
                for k in (j + 1)..=n {
                    let pts = [
                        c(-0.9 + 1.8 * i as f64 / n as f64, 0.0),
                        c(-0.9 + 1.8 * j as f64 / n as f64, 0.0),
                        c(-0.9 + 1.8 * k as f64 / n as f64, 0.0),
                    ];
                    let v = metric(pts[0], pts[1]) * metric(pts[0], pts[2])
                        * metric(pts[1], pts[2]);
                    grid_best = grid_best.max(v);
                }
            }
        }
        let raw = pair_product(&set.poles).unwrap().raw;
        assert!(raw >= grid_best - 1e-10);
        assert!(report.iterations < 500);
    }

    #[test]
    fn tsuji_on_sampled_square() {
        let square = PoleRegion::boundary(vec![
            c(0.3, 0.0),
            c(0.0, 0.3),
            c(-0.3, 0.0),
            c(0.0, -0.3),
        ])
        .unwrap();
        let (set, _) = tsuji_points(&square, 2, &SelectOptions::default()).unwrap();
        let mut xs: Vec<f64> = set.poles.iter().map(|p| p.re).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 0.3).abs() < 1e-6 && (xs[1] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn tsuji_rejects_small_q() {
        let disk = PoleRegion::disk(0.5).unwrap();
        assert!(matches!(
            tsuji_points(&disk, 1, &SelectOptions::default()),
            Err(Error::Arity(_))
        ));
    }

    #[test]
    fn decay_rate_shrinks_with_q_and_respects_limit() {
        let disk = PoleRegion::disk(0.6).unwrap();
        let tau = tau_analytic(&disk).unwrap();
        let mut last = f64::INFINITY;
        for q in [4, 6, 8] {
            let (set, _) = tsuji_points(&disk, q, &SelectOptions::default()).unwrap();
            let rate = worst_case_rate(&set).unwrap();
            assert!(rate <= last + 1e-3, "rate grew: {last} -> {rate}");
            assert!(rate >= tau - 1e-6);
            last = rate;
        }
        let (set, _) = tsuji_points(&disk, 12, &SelectOptions::default()).unwrap();
        let rate = worst_case_rate(&set).unwrap();
        assert!(rate >= 0.6 && rate < 0.65);
    }

    #[test]
    fn center_poles_match_disk_rate() {
        let disk = PoleRegion::disk(0.6).unwrap();
        let poles: Vec<Complex64> = (0..4)
            .map(|k| c(1e-6 * (k as f64 + 1.0), 2e-6 * k as f64))
            .collect();
        let set = PoleSet::new(poles, disk, SelectMethod::Manual, false).unwrap();
        let rate = worst_case_rate(&set).unwrap();
        assert!((rate - 0.6).abs() < 1e-4);
    }

    #[test]
    fn tsuji_interval_rate_near_chebyshev_constant() {
        let iv = PoleRegion::interval(-0.999, 0.999).unwrap();
        let (set, _) = tsuji_points(&iv, 16, &SelectOptions::default()).unwrap();
        for p in &set.poles {
            assert!(p.im.abs() < 1e-8);
        }
        let rate = worst_case_rate(&set).unwrap();
        assert!((rate - 0.7427).abs() < 0.08, "rate {rate}");
    }

    #[test]
    fn minimax_disk_single_pole_centers() {
        let disk = PoleRegion::disk(0.7).unwrap();
        let (set, report) = minimax_poles(&disk, 1, &SelectOptions::default()).unwrap();
        assert!(set.poles[0].norm() < 1e-3, "pole {}", set.poles[0]);
        // radial grid oracle for the outer minimum
        let mut oracle = f64::INFINITY;
        for i in 0..=40 {
            for j in 0..16 {
                let mu = Complex64::from_polar(0.7 * i as f64 / 40.0, 2.0 * PI * j as f64 / 16.0);
                let wc = worst_case_product(&disk, &[mu], 256).unwrap();
                oracle = oracle.min(wc);
            }
        }
        assert!(report.worst_case <= oracle + 1e-6);
        assert!((report.worst_case - 0.7).abs() < 1e-4);
        assert_eq!(report.restarts_used, 8);
    }

    #[test]
    fn minimax_interval_single_pole_centers() {
        let iv = PoleRegion::interval(-0.8, 0.8).unwrap();
        let (set, report) = minimax_poles(&iv, 1, &SelectOptions::default()).unwrap();
        assert!(set.poles[0].norm() < 1e-3);
        let mut oracle = f64::INFINITY;
        for i in 0..=160 {
            let mu = c(-0.8 + 1.6 * i as f64 / 160.0, 0.0);
            oracle = oracle.min(worst_case_product(&iv, &[mu], 256).unwrap());
        }
        assert!(report.worst_case <= oracle + 1e-6);
        assert!((report.worst_case - 0.8).abs() < 1e-4);
    }

    #[test]
    fn minimax_tracks_tsuji_on_interval() {
        let iv = PoleRegion::interval(-0.95, 0.95).unwrap();
        let opts = SelectOptions::default();
        let mut gaps = Vec::new();
        for q in [4usize, 8] {
            let (_, tsuji_report) = tsuji_points(&iv, q, &opts).unwrap();
            let (set, minimax_report) = minimax_poles(&iv, q, &opts).unwrap();
            assert_eq!(set.poles.len(), q);
            // the dedicated minimax search never loses to the spread
            // configuration on its own objective
            assert!(minimax_report.worst_case <= tsuji_report.worst_case + 1e-9);
            gaps.push(
                (tsuji_report.worst_case - minimax_report.worst_case)
                    / tsuji_report.worst_case,
            );
        }
        // the two selections agree asymptotically; the gap narrows with q
        assert!(gaps[0] < 0.3, "gap at q=4: {}", gaps[0]);
        assert!(gaps[1] < gaps[0], "gaps {gaps:?}");
        assert!(gaps[1] < 0.05, "gap at q=8: {}", gaps[1]);
    }

    #[test]
    fn minimax_is_deterministic() {
        let disk = PoleRegion::disk(0.5).unwrap();
        let opts = SelectOptions {
            restarts: 3,
            ..SelectOptions::default()
        };
        let (a, _) = minimax_poles(&disk, 2, &opts).unwrap();
        let (b, _) = minimax_poles(&disk, 2, &opts).unwrap();
        assert_eq!(a.poles, b.poles);
    }

    #[test]
    fn minimax_rejections() {
        let disk = PoleRegion::disk(0.5).unwrap();
        assert!(matches!(
            minimax_poles(&disk, 0, &SelectOptions::default()),
            Err(Error::Arity(_))
        ));
        let bd = PoleRegion::boundary(vec![c(0.2, 0.1), c(-0.1, 0.2)]).unwrap();
        assert!(matches!(
            minimax_poles(&bd, 2, &SelectOptions::default()),
            Err(Error::UnsupportedRegion(_))
        ));
    }

    #[test]
    fn conjugate_closure_cases() {
        let disk = PoleRegion::disk(0.6).unwrap();
        // all-real sets pass through untouched
        let real = PoleSet::new(
            vec![c(-0.3, 0.0), c(0.5, 0.0)],
            disk.clone(),
            SelectMethod::Manual,
            false,
        )
        .unwrap();
        let closed = enforce_conjugate_closure(&real);
        assert_eq!(closed.poles, real.poles);
        assert!(closed.conj_closed);

        // a lone complex pole gets its partner
        let lone = PoleSet::new(
            vec![c(0.3, 0.2)],
            disk.clone(),
            SelectMethod::Manual,
            false,
        )
        .unwrap();
        let closed = enforce_conjugate_closure(&lone);
        assert_eq!(closed.poles.len(), 2);
        assert_eq!(closed.poles[1], closed.poles[0].conj());
        assert!((closed.poles[0] - c(0.3, 0.2)).norm() < 1e-12);

        // an almost-conjugate pair is snapped exact
        let near = PoleSet::new(
            vec![c(0.3, 0.2), c(0.3, -0.2 + 1e-12)],
            disk,
            SelectMethod::Manual,
            false,
        )
        .unwrap();
        let closed = enforce_conjugate_closure(&near);
        assert_eq!(closed.poles.len(), 2);
        assert_eq!(closed.poles[1], closed.poles[0].conj());
        assert!(closed.validate().is_ok());
    }

    #[test]
    fn pole_set_validation() {
        let disk = PoleRegion::disk(0.5).unwrap();
        assert!(matches!(
            PoleSet::new(vec![c(0.6, 0.0)], disk.clone(), SelectMethod::Manual, false),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            PoleSet::new(
                vec![c(0.2, 0.1), c(0.2, 0.1)],
                disk.clone(),
                SelectMethod::Manual,
                false
            ),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            PoleSet::new(vec![c(0.2, 0.1)], disk.clone(), SelectMethod::Manual, true),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            PoleSet::new(vec![], disk.clone(), SelectMethod::Manual, false),
            Err(Error::Arity(_))
        ));

        let ok = PoleSet::new(
            vec![c(0.2, 0.1), c(0.2, -0.1)],
            disk,
            SelectMethod::Manual,
            true,
        )
        .unwrap();
        let json = serde_json::to_string(&ok).unwrap();
        assert!(json.contains("\"method\":\"manual\""));
        let back: PoleSet = serde_json::from_str(&json).unwrap();
        assert_eq!(ok, back);
        assert!(back.validate().is_ok());
    }
}
