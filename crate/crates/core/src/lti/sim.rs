//! Closed-loop simulation and input spectral-density extremes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ident::Trajectory;

use super::realize::{eigenvalues, TfEvaluator};
use super::{Controller, StateSpaceModel};

/// How close to the unit circle the closed-loop spectrum may come.
const STABILITY_MARGIN: f64 = 1e-9;

/// Input description for spectral-density bounds.
#[derive(Debug, Clone, Copy)]
pub enum InputModel<'a> {
    /// Unit-covariance white noise driving the plant directly.
    White,
    /// Loop input `u = G_u y + H_u eps` with the given plant in the loop.
    ClosedLoop {
        plant: &'a StateSpaceModel,
        controller: &'a Controller,
    },
}

fn check_loop_dims(plant: &StateSpaceModel, controller: &Controller) -> Result<()> {
    let (p, m) = (plant.output_dim(), plant.input_dim());
    let g_u = &controller.g_u;
    let h_u = &controller.h_u;
    if g_u.input_dim() != p || g_u.output_dim() != m {
        return Err(Error::Dimension(format!(
            "feedback filter maps {} -> {}, plant needs {p} -> {m}",
            g_u.input_dim(),
            g_u.output_dim()
        )));
    }
    if h_u.input_dim() != m || h_u.output_dim() != m {
        return Err(Error::Dimension(format!(
            "probing filter maps {} -> {}, expected {m} -> {m}",
            h_u.input_dim(),
            h_u.output_dim()
        )));
    }
    Ok(())
}

/// State matrix of the interconnection of plant and controller, ordered as
/// plant states, feedback filter states, probing filter states. Without a
/// controller this is the plant state matrix itself.
pub fn closed_loop_matrix(
    plant: &StateSpaceModel,
    controller: Option<&Controller>,
) -> Result<DMatrix<Complex64>> {
    let ctrl = match controller {
        None => return Ok(plant.a.clone()),
        Some(ctrl) => ctrl,
    };
    check_loop_dims(plant, ctrl)?;
    let n = plant.state_dim();
    let ng = ctrl.g_u.state_dim();
    let nh = ctrl.h_u.state_dim();
    let mut aug = DMatrix::<Complex64>::zeros(n + ng + nh, n + ng + nh);
    aug.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    aug.view_mut((0, n), (n, ng))
        .copy_from(&(&plant.b * &ctrl.g_u.c));
    aug.view_mut((0, n + ng), (n, nh))
        .copy_from(&(&plant.b * &ctrl.h_u.c));
    aug.view_mut((n, 0), (ng, n))
        .copy_from(&(&ctrl.g_u.b * &plant.c));
    aug.view_mut((n, n), (ng, ng)).copy_from(&ctrl.g_u.a);
    aug.view_mut((n + ng, n + ng), (nh, nh)).copy_from(&ctrl.h_u.a);
    Ok(aug)
}

fn check_loop_stable(plant: &StateSpaceModel, controller: Option<&Controller>) -> Result<()> {
    let aug = closed_loop_matrix(plant, controller)?;
    let rho = eigenvalues(&aug).iter().map(|e| e.norm()).fold(0.0, f64::max);
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(Error::Instability(format!(
            "closed loop has spectral radius {rho:.9}"
        )));
    }
    Ok(())
}

fn to_complex_vec(v: &DVector<f64>) -> DVector<Complex64> {
    v.map(|x| Complex64::new(x, 0.0))
}

/// Runs the loop on caller-supplied disturbance sequences.
///
/// `eps` holds the probing noise for times `0..N-1` and `noise` the raw
/// measurement disturbances for times `0..=N` (shaped by the symmetric
/// square root of the plant's noise covariance). Without a controller the
/// input is the probing sequence itself; with one, `u_t` is produced by the
/// strictly proper filters from outputs and probing up to time `t - 1`.
pub fn simulate_driven(
    plant: &StateSpaceModel,
    controller: Option<&Controller>,
    eps: &[DVector<f64>],
    noise: &[DVector<f64>],
    seed: u64,
    system_tag: impl Into<String>,
) -> Result<Trajectory> {
    plant.validate()?;
    check_loop_stable(plant, controller)?;
    let (p, m) = (plant.output_dim(), plant.input_dim());
    let steps = eps.len();
    if noise.len() != steps + 1 {
        return Err(Error::Arity(format!(
            "need {} disturbance vectors for {steps} steps, got {}",
            steps + 1,
            noise.len()
        )));
    }
    if eps.iter().any(|v| v.len() != m) {
        return Err(Error::Dimension(format!("probing vectors must have length {m}")));
    }
    if noise.iter().any(|v| v.len() != p) {
        return Err(Error::Dimension(format!(
            "disturbance vectors must have length {p}"
        )));
    }

    let noise_shape = plant.noise_sqrt().map(|x| Complex64::new(x, 0.0));
    let mut x = DVector::<Complex64>::zeros(plant.state_dim());
    let (mut fg, mut fh) = match controller {
        Some(ctrl) => (
            DVector::<Complex64>::zeros(ctrl.g_u.state_dim()),
            DVector::<Complex64>::zeros(ctrl.h_u.state_dim()),
        ),
        None => (DVector::zeros(0), DVector::zeros(0)),
    };
    let mut y_prev = &noise_shape * to_complex_vec(&noise[0]);
    let mut us = Vec::with_capacity(steps);
    let mut ys = Vec::with_capacity(steps);
    for t in 0..steps {
        let eps_t = to_complex_vec(&eps[t]);
        let u = match controller {
            None => eps_t.clone(),
            Some(ctrl) => &ctrl.g_u.c * &fg + &ctrl.h_u.c * &fh,
        };
        if let Some(ctrl) = controller {
            fg = &ctrl.g_u.a * &fg + &ctrl.g_u.b * &y_prev;
            fh = &ctrl.h_u.a * &fh + &ctrl.h_u.b * &eps_t;
        }
        x = &plant.a * &x + &plant.b * &u;
        let y = &plant.c * &x + &noise_shape * to_complex_vec(&noise[t + 1]);
        us.push(u);
        y_prev = y.clone();
        ys.push(y);
    }
    Trajectory::new(us, ys, seed, system_tag)
}

/// Simulates the loop for `n` steps with fresh unit-covariance Gaussian
/// probing and measurement noise drawn from the seed.
///
/// Returns inputs for times `0..n-1` and outputs for times `1..n`, both
/// started from zero initial state with zero pre-history.
pub fn simulate_closed_loop(
    plant: &StateSpaceModel,
    controller: Option<&Controller>,
    n: usize,
    seed: u64,
) -> Result<Trajectory> {
    plant.validate()?;
    check_loop_stable(plant, controller)?;
    let (p, m) = (plant.output_dim(), plant.input_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize| {
        DVector::from_fn(len, |_, _| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x
        })
    };
    let mut noise = Vec::with_capacity(n + 1);
    let mut eps = Vec::with_capacity(n);
    noise.push(draw(p));
    for _ in 0..n {
        eps.push(draw(m));
        noise.push(draw(p));
    }
    let tag = if controller.is_some() {
        "closed_loop"
    } else {
        "open_loop"
    };
    simulate_driven(plant, controller, &eps, &noise, seed, tag)
}

fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Extremes of the input spectral density over a frequency grid.
///
/// For white input the spectrum is flat. In the loop, outputs obey
/// `y = G u + v`, so the input spectrum combines the probing path and the
/// fed-back measurement noise:
/// `Phi_u = S H_u H_u^H S^H + S G_u R G_u^H S^H` with
/// `S = (I - G_u G)^{-1}`. The returned pair is the largest and smallest
/// spectral norm of `Phi_u` over the grid.
pub fn psd_bounds_on_grid(model: &InputModel, grid: usize) -> Result<(f64, f64)> {
    if grid == 0 {
        return Err(Error::Arity("frequency grid must not be empty".into()));
    }
    let (plant, ctrl) = match model {
        InputModel::White => return Ok((1.0, 1.0)),
        InputModel::ClosedLoop { plant, controller } => (*plant, *controller),
    };
    check_loop_dims(plant, ctrl)?;
    check_loop_stable(plant, Some(ctrl))?;
    let m = plant.input_dim();
    let ev_plant = TfEvaluator::new(plant);
    let ev_gu = TfEvaluator::new(&ctrl.g_u);
    let ev_hu = TfEvaluator::new(&ctrl.h_u);
    let noise_cov = plant.noise_cov.map(|x| Complex64::new(x, 0.0));
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for k in 0..grid {
        let omega = 2.0 * std::f64::consts::PI * k as f64 / grid as f64;
        let z = Complex64::from_polar(1.0, omega);
        let g = ev_plant.eval(z)?;
        let gu = ev_gu.eval(z)?;
        let hu = ev_hu.eval(z)?;
        let sens = (DMatrix::<Complex64>::identity(m, m) - &gu * g)
            .try_inverse()
            .ok_or_else(|| {
                Error::Numerical(format!(
                    "loop return difference is singular at frequency {omega:.6}"
                ))
            })?;
        let probe_path = &sens * hu;
        let noise_path = &sens * gu;
        let phi = &probe_path * probe_path.adjoint() + &noise_path * &noise_cov * noise_path.adjoint();
        let norm = spectral_norm(&phi);
        sup = sup.max(norm);
        inf = inf.min(norm);
    }
    if inf <= sup * 1e-15 {
        return Err(Error::Numerical(
            "input spectral density vanishes at some frequency; its spread is unbounded".into(),
        ));
    }
    Ok((sup, inf))
}

/// Extremes of the input spectral density on the default 4096-point grid.
pub fn psd_bounds(model: &InputModel) -> Result<(f64, f64)> {
    psd_bounds_on_grid(model, 4096)
}
