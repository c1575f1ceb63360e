//! Candidate pole regions inside the open unit disk.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serdes::complex_vec;

/// Geometric shape of a pole region.
///
/// All shapes live strictly inside the unit disk; `margin` on [`PoleRegion`]
/// is the guaranteed gap `1 - max |z|` callers may rely on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegionShape {
    /// Closed disk `|z| <= rho` centered at the origin.
    Disk {
        #[serde(alias = "radius")]
        rho: f64,
    },
    /// Real segment `[a, b]` on the real axis.
    Interval { a: f64, b: f64 },
    /// Region known only through boundary samples (closed polyline).
    Boundary {
        #[serde(with = "complex_vec")]
        points: Vec<Complex64>,
    },
}

/// A validated pole region with its disk-boundary margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleRegion {
    #[serde(flatten)]
    pub shape: RegionShape,
    #[serde(default)]
    pub margin: f64,
}

impl PoleRegion {
    pub fn disk(rho: f64) -> Result<Self> {
        Self::new(RegionShape::Disk { rho }, 0.0)
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(RegionShape::Interval { a, b }, 0.0)
    }

    pub fn boundary(points: Vec<Complex64>) -> Result<Self> {
        Self::new(RegionShape::Boundary { points }, 0.0)
    }

    pub fn new(shape: RegionShape, margin: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&margin) {
            return Err(Error::Domain(format!("margin {margin} outside [0, 1)")));
        }
        let region = PoleRegion { shape, margin };
        region.validate()?;
        Ok(region)
    }

    fn validate(&self) -> Result<()> {
        let cap = 1.0 - self.margin;
        match &self.shape {
            RegionShape::Disk { rho } => {
                if !rho.is_finite() || *rho <= 0.0 || *rho > cap {
                    return Err(Error::Domain(format!(
                        "disk radius {rho} outside (0, {cap}]"
                    )));
                }
            }
            RegionShape::Interval { a, b } => {
                if !a.is_finite() || !b.is_finite() || a >= b {
                    return Err(Error::Domain(format!("interval [{a}, {b}] is empty")));
                }
                if a.abs() > cap || b.abs() > cap {
                    return Err(Error::Domain(format!(
                        "interval [{a}, {b}] leaves |z| <= {cap}"
                    )));
                }
            }
            RegionShape::Boundary { points } => {
                if points.is_empty() {
                    return Err(Error::Arity("boundary region needs at least one point".into()));
                }
                for p in points {
                    if !p.re.is_finite() || !p.im.is_finite() || p.norm() > cap {
                        return Err(Error::Domain(format!(
                            "boundary point {p} leaves |z| <= {cap}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest modulus attained over the region (the `rho_lambda` of a pole set
    /// drawn from it).
    pub fn max_abs(&self) -> f64 {
        match &self.shape {
            RegionShape::Disk { rho } => *rho,
            RegionShape::Interval { a, b } => a.abs().max(b.abs()),
            RegionShape::Boundary { points } => {
                points.iter().map(|p| p.norm()).fold(0.0, f64::max)
            }
        }
    }

    /// Boundary point at parameter `t` (wrapped into `[0, 1)`).
    ///
    /// Disk: the circle `rho e^{2 pi i t}`. Interval: the segment itself,
    /// traversed once (the slit is its own boundary; the product being
    /// maximized takes equal values on both sides). Boundary samples: the
    /// closed polyline through the points, parameterized by arclength.
    pub fn boundary_point(&self, t: f64) -> Complex64 {
        let t = t.rem_euclid(1.0);
        match &self.shape {
            RegionShape::Disk { rho } => {
                let ang = 2.0 * std::f64::consts::PI * t;
                Complex64::from_polar(*rho, ang)
            }
            RegionShape::Interval { a, b } => Complex64::new(a + t * (b - a), 0.0),
            RegionShape::Boundary { points } => {
                if points.len() == 1 {
                    return points[0];
                }
                let n = points.len();
                let mut cum = Vec::with_capacity(n + 1);
                let mut total = 0.0;
                cum.push(0.0);
                for i in 0..n {
                    total += (points[(i + 1) % n] - points[i]).norm();
                    cum.push(total);
                }
                if total == 0.0 {
                    return points[0];
                }
                let s = t * total;
                let seg = match cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
                    Ok(i) => i.min(n - 1),
                    Err(i) => i - 1,
                };
                let len = cum[seg + 1] - cum[seg];
                let frac = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
                points[seg] + (points[(seg + 1) % n] - points[seg]) * frac
            }
        }
    }

    /// Nearest point of the closed region (used to keep optimizer iterates
    /// feasible). Boundary-sample regions project onto the polyline.
    pub fn project(&self, z: Complex64) -> Complex64 {
        match &self.shape {
            RegionShape::Disk { rho } => {
                let r = z.norm();
                if r <= *rho || r == 0.0 {
                    z
                } else {
                    z * (*rho / r)
                }
            }
            RegionShape::Interval { a, b } => Complex64::new(z.re.clamp(*a, *b), 0.0),
            RegionShape::Boundary { points } => {
                let n = points.len();
                if n == 1 {
                    return points[0];
                }
                let mut best = points[0];
                let mut best_d = f64::INFINITY;
                for i in 0..n {
                    let p = points[i];
                    let q = points[(i + 1) % n];
                    let d = q - p;
                    let len2 = d.norm_sqr();
                    let s = if len2 > 0.0 {
                        (((z - p).re * d.re + (z - p).im * d.im) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let cand = p + d * s;
                    let dist = (z - cand).norm();
                    if dist < best_d {
                        best_d = dist;
                        best = cand;
                    }
                }
                best
            }
        }
    }

    /// True when `z` lies in the closed region (within `tol` for the
    /// lower-dimensional shapes).
    pub fn contains(&self, z: Complex64, tol: f64) -> bool {
        (z - self.project(z)).norm() <= tol
    }
}
