//! Benchmark system generators: a heat-diffusion plant on a square room
//! with obstacles, and a four-pole rational family with randomly perturbed
//! poles.
//!
//! The diffusion plant discretizes `ds/dt = alpha(x,y) (d²s/dx² + d²s/dy²)`
//! with a five-point Laplacian on a uniform cell grid, zero Dirichlet data
//! on the outer walls and on every obstacle, and a forward-Euler time step.
//! A point source injects the input into one cell and a point sensor reads
//! another, giving a single-input single-output state-space model whose
//! order is the number of free cells.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{eigenvalues, PartialFractionTF, StateSpaceModel};

/// Numerator `NUM_Z * z + NUM_1` shared by every member of the four-pole
/// rational benchmark family.
const NUM_Z: f64 = 0.0247;
const NUM_1: f64 = 0.0355;

/// Pole means of the four-pole family; draws add `N(0, 0.02²)` noise.
const POLE_MEANS: [f64; 4] = [0.0, 0.0, 0.9048, 0.3679];
const POLE_STD: f64 = 0.02;
const POLE_CLAMP: f64 = 0.95;

/// A circular obstacle held at zero temperature. With `half` set, only the
/// lower half (cell centers with `y <= center.y`) blocks; the flat side
/// faces up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: (f64, f64),
    pub radius: f64,
    #[serde(default)]
    pub half: bool,
}

/// Geometry and discretization parameters of the diffusion plant.
///
/// The room is the square `[0, side]²` split into `grid x grid` cells of
/// width `h = side / grid`; cell `(i, j)` has center
/// `((i + 0.5) h, (j + 0.5) h)` and diffusivity `alpha[j * grid + i]`.
/// A cell is blocked when its center lies strictly inside an obstacle.
/// With `dt` unset the step is 90% of the forward-Euler stability limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub side: f64,
    pub grid: usize,
    pub alpha: Vec<f64>,
    pub obstacles: Vec<Obstacle>,
    pub source: (f64, f64),
    pub sensor: (f64, f64),
    pub dt: Option<f64>,
    pub perturb_sigma: f64,
}

impl Default for DiffusionConfig {
    /// A 3 m room on a 10x10 grid with uniform unit diffusivity, two small
    /// circular obstacles, one half-circle obstacle, a source high in the
    /// middle, and a sensor at the center.
    fn default() -> Self {
        DiffusionConfig {
            side: 3.0,
            grid: 10,
            alpha: vec![1.0; 100],
            obstacles: vec![
                Obstacle {
                    center: (0.75, 2.25),
                    radius: 0.1,
                    half: false,
                },
                Obstacle {
                    center: (2.25, 0.75),
                    radius: 0.1,
                    half: false,
                },
                Obstacle {
                    center: (1.5, 0.95),
                    radius: 0.55,
                    half: true,
                },
            ],
            source: (1.5, 2.25),
            sensor: (1.5, 1.5),
            dt: None,
            perturb_sigma: 1e-3,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(Error::Domain(format!(
                "room side is {}, expected a positive length",
                self.side
            )));
        }
        if self.grid < 2 {
            return Err(Error::Domain(format!(
                "grid is {} cells per axis, expected at least 2",
                self.grid
            )));
        }
        let cells = self.grid * self.grid;
        if self.alpha.len() != cells {
            return Err(Error::Dimension(format!(
                "diffusivity field has {} entries, expected {cells}",
                self.alpha.len()
            )));
        }
        if self.alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::Domain(
                "diffusivities must be finite and nonnegative".into(),
            ));
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            if !(o.radius.is_finite() && o.radius > 0.0) {
                return Err(Error::Domain(format!(
                    "obstacle {k} has radius {}, expected positive",
                    o.radius
                )));
            }
        }
        for (name, p) in [("source", self.source), ("sensor", self.sensor)] {
            if !(0.0..=self.side).contains(&p.0) || !(0.0..=self.side).contains(&p.1) {
                return Err(Error::Domain(format!(
                    "{name} ({}, {}) lies outside the room",
                    p.0, p.1
                )));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Domain(format!(
                    "time step is {dt}, expected positive"
                )));
            }
        }
        if !(self.perturb_sigma.is_finite() && self.perturb_sigma >= 0.0) {
            return Err(Error::Domain(format!(
                "perturbation deviation is {}, expected nonnegative",
                self.perturb_sigma
            )));
        }
        Ok(())
    }

    fn cell_width(&self) -> f64 {
        self.side / self.grid as f64
    }

    /// Grid cell containing a point; points on the far walls belong to the
    /// last cell.
    fn cell_of(&self, point: (f64, f64)) -> (usize, usize) {
        let h = self.cell_width();
        let clamp = |v: f64| ((v / h).floor() as isize).clamp(0, self.grid as isize - 1) as usize;
        (clamp(point.0), clamp(point.1))
    }

    /// Whether cell `(i, j)` is blocked by an obstacle, meaning its center
    /// lies strictly inside one.
    pub fn is_blocked(&self, i: usize, j: usize) -> bool {
        let h = self.cell_width();
        let x = (i as f64 + 0.5) * h;
        let y = (j as f64 + 0.5) * h;
        self.obstacles.iter().any(|o| {
            let dx = x - o.center.0;
            let dy = y - o.center.1;
            dx * dx + dy * dy < o.radius * o.radius && (!o.half || y <= o.center.1)
        })
    }

    /// Unblocked cells in index order, one state per entry.
    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.grid {
            for i in 0..self.grid {
                if !self.is_blocked(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Builds the diffusion plant `x+ = (I + dt diag(alpha) L) x + B u`,
/// `y = C x + v` from a config.
///
/// `L` is the five-point Laplacian over the free cells with zero Dirichlet
/// values on walls and obstacles (missing neighbors simply drop out while
/// the diagonal keeps its full `-4/h²` weight). `B` injects the input into
/// the cell holding the source point, `C` reads the cell holding the
/// sensor point, and the noise covariance defaults to the 1x1 identity.
pub fn build_diffusion_system(cfg: &DiffusionConfig) -> Result<StateSpaceModel> {
    cfg.validate()?;
    let g = cfg.grid;
    let h = cfg.cell_width();
    let free = cfg.free_cells();
    let n = free.len();
    if n == 0 {
        return Err(Error::Domain("every grid cell is blocked".into()));
    }
    let mut index = vec![None; g * g];
    for (r, &(i, j)) in free.iter().enumerate() {
        index[j * g + i] = Some(r);
    }

    let mut m = DMatrix::<Complex64>::zeros(n, n);
    let w = 1.0 / (h * h);
    for (r, &(i, j)) in free.iter().enumerate() {
        let a = cfg.alpha[j * g + i];
        m[(r, r)] = Complex64::new(-4.0 * a * w, 0.0);
        for (di, dj) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
            let ni = i as isize + di;
            let nj = j as isize + dj;
            if ni < 0 || nj < 0 || ni >= g as isize || nj >= g as isize {
                continue;
            }
            if let Some(s) = index[nj as usize * g + ni as usize] {
                m[(r, s)] = Complex64::new(a * w, 0.0);
            }
        }
    }

    let eigs = eigenvalues(&m);
    let lam_max = eigs.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let dt = match cfg.dt {
        Some(dt) => dt,
        None if lam_max < 1e-12 => 1.0,
        None => 0.9 * 2.0 / lam_max,
    };
    let rho = eigs
        .iter()
        .map(|e| (Complex64::new(1.0, 0.0) + dt * e).norm())
        .fold(0.0, f64::max);
    if rho >= 1.0 {
        return Err(Error::Stability(format!(
            "time step {dt:.3e} gives spectral radius {rho:.6}, expected < 1"
        )));
    }
    let a_mat = DMatrix::<Complex64>::identity(n, n) + m * Complex64::new(dt, 0.0);

    let cell_state = |name: &str, point: (f64, f64)| -> Result<usize> {
        let (i, j) = cfg.cell_of(point);
        index[j * g + i].ok_or_else(|| {
            Error::Domain(format!(
                "{name} ({}, {}) falls inside an obstacle",
                point.0, point.1
            ))
        })
    };
    let src = cell_state("source", cfg.source)?;
    let sen = cell_state("sensor", cfg.sensor)?;

    let mut b = DMatrix::<Complex64>::zeros(n, 1);
    b[(src, 0)] = Complex64::new(1.0, 0.0);
    let mut c = DMatrix::<Complex64>::zeros(1, n);
    c[(0, sen)] = Complex64::new(1.0, 0.0);
    StateSpaceModel::new(a_mat, b, c, DMatrix::identity(1, 1))
}

/// Adds an elementwise Gaussian perturbation `sigma E` to the state matrix,
/// redrawing up to five times if the result is unstable. `B`, `C`, and the
/// noise covariance are untouched.
pub fn perturb_diffusion(sys: &StateSpaceModel, sigma: f64, seed: u64) -> Result<StateSpaceModel> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "perturbation deviation is {sigma}, expected nonnegative"
        )));
    }
    sys.validate()?;
    if sigma == 0.0 {
        return Ok(sys.clone());
    }
    let n = sys.state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = String::new();
    for _ in 0..5 {
        let e = DMatrix::from_fn(n, n, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(sigma * v, 0.0)
        });
        match StateSpaceModel::new(
            &sys.a + e,
            sys.b.clone(),
            sys.c.clone(),
            sys.noise_cov.clone(),
        ) {
            Ok(perturbed) => return Ok(perturbed),
            Err(Error::Stability(msg)) => last = msg,
            Err(other) => return Err(other),
        }
    }
    Err(Error::Stability(format!(
        "five perturbation draws all destabilized the plant: {last}"
    )))
}

/// Partial fractions of `(NUM_Z z + NUM_1) / prod_j (z - lambda_j)` via
/// residue evaluation.
fn rational_to_pf(poles: &[f64]) -> Result<PartialFractionTF> {
    for (j, &a) in poles.iter().enumerate() {
        for &b in &poles[j + 1..] {
            if (a - b).abs() < 1e-8 {
                return Err(Error::Residue(format!(
                    "poles {a} and {b} are too close for residue evaluation"
                )));
            }
        }
    }
    let terms: Vec<(Complex64, Complex64)> = poles
        .iter()
        .enumerate()
        .map(|(j, &lam)| {
            let denom: f64 = poles
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, &other)| lam - other)
                .product();
            let residue = (NUM_Z * lam + NUM_1) / denom;
            (Complex64::new(lam, 0.0), Complex64::new(residue, 0.0))
        })
        .collect();
    PartialFractionTF::siso(&terms)
}

/// Draws the four-pole benchmark: each pole is its mean plus `N(0, 0.02²)`
/// noise, clamped to `[-0.95, 0.95]`. If two draws land within 1e-8 of
/// each other, all four are redrawn once before giving up.
pub fn benchmark_tf(seed: u64) -> Result<PartialFractionTF> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        POLE_MEANS
            .iter()
            .map(|&mean| {
                let v: f64 = StandardNormal.sample(rng);
                (mean + POLE_STD * v).clamp(-POLE_CLAMP, POLE_CLAMP)
            })
            .collect()
    };
    let first = rational_to_pf(&draw(&mut rng));
    match first {
        Err(Error::Residue(_)) => rational_to_pf(&draw(&mut rng)),
        other => other,
    }
}

/// The unperturbed member of the four-pole family. Its two zero-mean poles
/// would coincide at 0, where the partial-fraction form breaks down, so
/// they are offset to -1e-6 and 1e-6.
pub fn benchmark_tf_nominal() -> Result<PartialFractionTF> {
    rational_to_pf(&[-1e-6, 1e-6, 0.9048, 0.3679])
}
