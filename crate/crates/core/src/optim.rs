//! Small derivative-free 1-D search used by boundary maximization and the
//! pole optimizers.

/// Golden-section maximization of `f` on `[a, b]`.
///
/// Returns `(x, f(x))` for the best point seen. Stops when the bracket is
/// shorter than `tol` or after `max_iter` shrink steps. `f` need only be
/// unimodal on the bracket for a guarantee; multimodal leftovers are handled
/// by the callers' grids and restarts.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if hi - lo < tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let xm = 0.5 * (lo + hi);
    let fm = f(xm);
    if fm >= f1 && fm >= f2 {
        (xm, fm)
    } else if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Nelder-Mead minimization of `f` from `x0`, with an initial simplex of
/// edge length `step` along each axis.
///
/// Returns `(x, f(x), iterations)` for the best vertex. Stops when the
/// value spread across the simplex drops below `tol` (relative to the best
/// value) or after `max_iter` reshaping steps. Plain textbook coefficients;
/// callers supply restarts for anything multimodal.
pub(crate) fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    step: f64,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64, usize) {
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = f(&x);
        simplex.push((x, v));
    }
    let mut iters = 0;
    while iters < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[dim].1 - simplex[0].1 < tol * (1.0 + simplex[0].1.abs()) {
            break;
        }
        iters += 1;
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let reflected: Vec<f64> = (0..dim)
            .map(|j| 2.0 * centroid[j] - worst.0[j])
            .collect();
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + 2.0 * (centroid[j] - worst.0[j]))
                .collect();
            let fe = f(&expanded);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let toward = if fr < worst.1 { &reflected } else { &worst.0 };
            let contracted: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + 0.5 * (toward[j] - centroid[j]))
                .collect();
            let fc = f(&contracted);
            if fc < worst.1.min(fr) {
                simplex[dim] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for vtx in simplex.iter_mut().skip(1) {
                    for j in 0..dim {
                        vtx.0[j] = best[j] + 0.5 * (vtx.0[j] - best[j]);
                    }
                    vtx.1 = f(&vtx.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, iters)
}
