//! Experiment orchestration behind each subcommand.
//!
//! Every stochastic command derives all of its sub-seeds from the master
//! seed in a fixed serial order before any work is fanned out, so results
//! are byte-identical regardless of the worker count. Workers share
//! nothing; the orchestrator assembles output in job order.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use obf_ident::benchmarks::{benchmark_tf, build_diffusion_system, perturb_diffusion};
use obf_ident::conformal::tsuji_init;
use obf_ident::error::{Error, Result};
use obf_ident::hardness::{chebyshev_rate, sample_complexity_floor};
use obf_ident::ident::{convergence_experiment, least_squares_fit};
use obf_ident::lti::{
    bias_upper_bound, optimal_projection, simulate_closed_loop, ss_to_pf, EnergyBudget,
    PartialFractionTF,
};
use obf_ident::pole_select::{
    minimax_poles, tsuji_points, worst_case_rate, PoleSet, SelectMethod, SelectOptions,
    SelectReport,
};
use obf_ident::{tau_analytic, PoleRegion, RegionShape};

use crate::inputs::{
    load_diffusion_config, load_system, parse_range, parse_region, resolve_orders, MethodArg,
};
use crate::table::{fmt_float, spec_hash, Table};

/// Worker count: `OBF_IDENT_THREADS` when set to a positive integer,
/// otherwise the machine's available parallelism.
fn worker_cap() -> usize {
    match std::env::var("OBF_IDENT_THREADS") {
        Ok(raw) => raw.parse::<usize>().ok().filter(|&n| n >= 1).unwrap_or(1),
        Err(_) => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    }
}

/// Applies `f` to every item, possibly across threads, returning results in
/// item order. `f` must be a pure function of its item for the output to be
/// deterministic.
fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = worker_cap().min(items.len());
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let done: Mutex<Vec<(usize, R)>> = Mutex::new(Vec::with_capacity(items.len()));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let result = f(&items[i]);
                done.lock().unwrap().push((i, result));
            });
        }
    });
    let mut tagged = done.into_inner().unwrap();
    tagged.sort_by_key(|(i, _)| *i);
    tagged.into_iter().map(|(_, r)| r).collect()
}

fn is_conj_closed(poles: &[Complex64]) -> bool {
    poles
        .iter()
        .all(|z| poles.iter().any(|w| (w - z.conj()).norm() <= 1e-9))
}

/// Draws `q` independent uniform poles from the region (area-uniform on a
/// disk, length-uniform on an interval, arclength-uniform on a boundary),
/// redrawing the whole configuration until all pairs are separated.
fn random_poles(region: &PoleRegion, q: usize, seed: u64) -> Result<PoleSet> {
    if q == 0 {
        return Err(Error::Arity("need at least one pole".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sep = 5e-3;
    for _ in 0..500 {
        let poles: Vec<Complex64> = (0..q)
            .map(|_| match &region.shape {
                RegionShape::Disk { rho } => {
                    let r = rho * rng.random::<f64>().sqrt();
                    let theta = std::f64::consts::TAU * rng.random::<f64>();
                    Complex64::from_polar(r, theta)
                }
                RegionShape::Interval { a, b } => {
                    Complex64::new(a + (b - a) * rng.random::<f64>(), 0.0)
                }
                RegionShape::Boundary { .. } => region.boundary_point(rng.random::<f64>()),
            })
            .collect();
        let separated = (0..q)
            .all(|i| (i + 1..q).all(|j| (poles[i] - poles[j]).norm() > sep));
        if !separated {
            continue;
        }
        let closed = is_conj_closed(&poles);
        if let Ok(set) = PoleSet::new(poles, region.clone(), SelectMethod::Manual, closed) {
            return Ok(set);
        }
    }
    Err(Error::Degenerate(format!(
        "could not draw {q} pairwise-separated poles from the region in 500 attempts"
    )))
}

/// Builds a pole configuration with the requested method. The optimizing
/// methods return their report; `seed` is consumed only by `random`.
pub fn select_poles(
    region: &PoleRegion,
    q: usize,
    method: MethodArg,
    seed: Option<u64>,
) -> Result<(PoleSet, Option<SelectReport>)> {
    match method {
        MethodArg::Tsuji => {
            tsuji_points(region, q, &SelectOptions::default()).map(|(s, r)| (s, Some(r)))
        }
        MethodArg::Minimax => {
            minimax_poles(region, q, &SelectOptions::default()).map(|(s, r)| (s, Some(r)))
        }
        MethodArg::TsujiInit => {
            let raw = tsuji_init(region, q)?;
            let mut distinct: Vec<Complex64> = Vec::new();
            for z in raw {
                if distinct.iter().all(|w| (w - z).norm() > 1e-7) {
                    distinct.push(z);
                }
            }
            let closed = is_conj_closed(&distinct);
            let set = PoleSet::new(distinct, region.clone(), SelectMethod::TsujiInitOnly, closed)?;
            Ok((set, None))
        }
        MethodArg::Random => {
            let seed = seed.ok_or_else(|| {
                Error::Arity("random pole selection needs --seed".into())
            })?;
            random_poles(region, q, seed).map(|s| (s, None))
        }
    }
}

/// Impulse-window length at which the tail of a system with spectral
/// radius `rho` is below machine precision relative to the head.
fn window_len(rho: f64) -> usize {
    let r = rho.clamp(0.1, 0.9999);
    let w = ((1e-16f64).ln() / (2.0 * r.ln())).ceil() as usize;
    w.clamp(500, 20_000)
}

fn tf_markov_window(tf: &PartialFractionTF, len: usize) -> Vec<DMatrix<Complex64>> {
    (1..=len).map(|t| tf.markov(t)).collect()
}

/// H2 norm through the impulse-response window (Parseval).
fn markov_energy(markov: &[DMatrix<Complex64>]) -> f64 {
    markov
        .iter()
        .map(|h| h.norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Relative H2 distance between an estimate and a reference impulse window.
fn markov_rel_error(est: &PartialFractionTF, truth: &[DMatrix<Complex64>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, h_true) in truth.iter().enumerate() {
        num += (est.markov(t + 1) - h_true).norm_squared();
        den += h_true.norm_squared();
    }
    (num / den).sqrt()
}

/// Sorted-order median, mean, and maximum of a non-empty sample.
fn summarize(mut values: Vec<f64>) -> (f64, f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    };
    let mean = values.iter().sum::<f64>() / n as f64;
    (median, mean, values[n - 1])
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| Error::Domain(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

pub fn run_tau(region_text: &str, q: Option<usize>) -> Result<()> {
    let region = parse_region(region_text)?;
    let analytic = tau_analytic(&region)?;
    match q {
        None => println!("{analytic}"),
        Some(q) => {
            let (set, _) = minimax_poles(&region, q, &SelectOptions::default())?;
            let numeric = worst_case_rate(&set)?;
            println!("analytic {analytic}");
            println!("numeric {numeric}");
        }
    }
    Ok(())
}

pub fn run_poles(
    region_text: &str,
    q: usize,
    method: MethodArg,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<()> {
    let region = parse_region(region_text)?;
    let spec = json!({
        "command": "poles",
        "region": region,
        "q": q,
        "method": method.label(),
        "seed": seed,
    });
    let (set, report) = select_poles(&region, q, method, seed)?;
    let rate = worst_case_rate(&set)?;
    let payload = json!({
        "spec_sha256": spec_hash(&spec),
        "version": env!("CARGO_PKG_VERSION"),
        "pole_set": set,
        "worst_case_rate": rate,
        "report": report,
    });
    let mut text = serde_json::to_string_pretty(&payload)
        .map_err(|e| Error::Numerical(format!("cannot encode pole set: {e}")))?;
    text.push('\n');
    emit(out, &text)
}

pub fn run_approx_bias(
    system: &str,
    region_text: &str,
    q: Option<usize>,
    q_range: Option<&str>,
    method: MethodArg,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<()> {
    let region = parse_region(region_text)?;
    let orders = resolve_orders(q, q_range)?;
    let tf = load_system(system)?.to_tf()?;
    let budget = EnergyBudget::from_tf(&tf, 1.0)?;
    let truth_window = tf_markov_window(&tf, window_len(tf.rho()));
    let norm = markov_energy(&truth_window);
    let spec = json!({
        "command": "approx-bias",
        "system": system,
        "region": region,
        "orders": orders,
        "method": method.label(),
        "seed": seed,
    });
    let mut table = Table::new(&[
        "q",
        "method",
        "h2_norm",
        "bias",
        "rel_bias",
        "tight_bound",
        "loose_bound",
    ]);
    for &q in &orders {
        let (set, _) = select_poles(&region, q, method, seed)?;
        let (_, bias) = optimal_projection(&tf, &set)?;
        let (tight, loose) = bias_upper_bound(&tf, &set, &budget)?;
        table.push(vec![
            q.to_string(),
            method.label().into(),
            fmt_float(norm),
            fmt_float(bias),
            fmt_float(bias / norm),
            fmt_float(tight),
            fmt_float(loose),
        ]);
    }
    emit(out, &table.render(&spec_hash(&spec)))
}

pub fn run_identify(
    system: &str,
    region_text: &str,
    q: usize,
    method: MethodArg,
    n_list: &[usize],
    trials: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    if trials == 0 {
        return Err(Error::Arity("need at least one trial".into()));
    }
    let region = parse_region(region_text)?;
    let plant = load_system(system)?.to_ss()?;
    let spec = json!({
        "command": "identify",
        "system": system,
        "region": region,
        "q": q,
        "method": method.label(),
        "n_list": n_list,
        "trials": trials,
        "seed": seed,
    });
    let mut root = ChaCha8Rng::seed_from_u64(seed);
    let basis_seed: u64 = root.random();
    let (set, _) = select_poles(&region, q, method, Some(basis_seed))?;
    let rho_basis = set.poles.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let truth_window = plant.markov_sequence(window_len(plant.spectral_radius().max(rho_basis)));

    struct Job {
        n: usize,
        trial: usize,
        run_seed: u64,
    }
    let mut jobs = Vec::with_capacity(n_list.len() * trials);
    for &n in n_list {
        for trial in 0..trials {
            jobs.push(Job {
                n,
                trial,
                run_seed: root.random(),
            });
        }
    }
    let results = parallel_map(&jobs, |job| -> Result<(f64, f64)> {
        let traj = simulate_closed_loop(&plant, None, job.n, job.run_seed)?;
        let fit = least_squares_fit(&traj, &set)?;
        let est = fit.fitted_tf()?;
        Ok((fit.residual, markov_rel_error(&est, &truth_window)))
    });
    let results = collect(results)?;

    let mut table = Table::new(&["n_samples", "trial", "q", "method", "residual", "rel_h2_error"]);
    for (job, (residual, rel)) in jobs.iter().zip(results) {
        table.push(vec![
            job.n.to_string(),
            job.trial.to_string(),
            q.to_string(),
            method.label().into(),
            fmt_float(residual),
            fmt_float(rel),
        ]);
    }
    emit(out, &table.render(&spec_hash(&spec)))
}

pub fn run_simulate(
    system: &str,
    n_list: &[usize],
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let plant = load_system(system)?.to_ss()?;
    if n_list.iter().any(|&n| n == 0) {
        return Err(Error::Arity("sample sizes must be at least 1".into()));
    }
    let spec = json!({
        "command": "simulate",
        "system": system,
        "n_list": n_list,
        "seed": seed,
    });
    let mut root = ChaCha8Rng::seed_from_u64(seed);
    let run_seeds: Vec<u64> = n_list.iter().map(|_| root.random()).collect();

    let (m, p) = (plant.input_dim(), plant.output_dim());
    let mut header: Vec<String> = vec!["n_samples".into(), "step".into()];
    for i in 0..m {
        header.push(format!("u{i}_re"));
        header.push(format!("u{i}_im"));
    }
    for j in 0..p {
        header.push(format!("y{j}_re"));
        header.push(format!("y{j}_im"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut table = Table::new(&header_refs);

    for (&n, &run_seed) in n_list.iter().zip(&run_seeds) {
        let traj = simulate_closed_loop(&plant, None, n, run_seed)?;
        for step in 0..n {
            let mut row = vec![n.to_string(), step.to_string()];
            for i in 0..m {
                row.push(fmt_float(traj.u[step][i].re));
                row.push(fmt_float(traj.u[step][i].im));
            }
            for j in 0..p {
                row.push(fmt_float(traj.y[step][j].re));
                row.push(fmt_float(traj.y[step][j].im));
            }
            table.push(row);
        }
    }
    emit(out, &table.render(&spec_hash(&spec)))
}

/// Median/mean/max relative projection bias per (order, method) over a set
/// of systems, with per-trial random bases where requested.
fn bias_sweep(
    region: &PoleRegion,
    orders: &[usize],
    methods: &[MethodArg],
    systems: &[(PartialFractionTF, f64)],
    random_seeds: &[Vec<u64>],
) -> Result<Vec<(usize, MethodArg, (f64, f64, f64))>> {
    let base_jobs: Vec<(usize, usize)> = orders
        .iter()
        .enumerate()
        .flat_map(|(qi, _)| {
            methods
                .iter()
                .enumerate()
                .filter(|(_, m)| **m != MethodArg::Random)
                .map(move |(mi, _)| (qi, mi))
        })
        .collect();
    let built = collect(parallel_map(&base_jobs, |&(qi, mi)| {
        select_poles(region, orders[qi], methods[mi], None).map(|(set, _)| set)
    }))?;
    let mut bases: Vec<Vec<Option<PoleSet>>> = vec![vec![None; methods.len()]; orders.len()];
    for (&(qi, mi), set) in base_jobs.iter().zip(built) {
        bases[qi][mi] = Some(set);
    }

    struct Job {
        qi: usize,
        mi: usize,
        trial: usize,
    }
    let mut jobs = Vec::with_capacity(orders.len() * methods.len() * systems.len());
    for qi in 0..orders.len() {
        for mi in 0..methods.len() {
            for trial in 0..systems.len() {
                jobs.push(Job { qi, mi, trial });
            }
        }
    }
    let rels = collect(parallel_map(&jobs, |job| -> Result<f64> {
        let (tf, norm) = &systems[job.trial];
        let bias = match methods[job.mi] {
            MethodArg::Random => {
                let mut draws =
                    ChaCha8Rng::seed_from_u64(random_seeds[job.qi][job.trial]);
                let mut found = None;
                for _ in 0..32 {
                    let basis = random_poles(region, orders[job.qi], draws.random())?;
                    match optimal_projection(tf, &basis) {
                        Ok((_, bias)) => {
                            found = Some(bias);
                            break;
                        }
                        Err(Error::Singularity(_)) => continue,
                        Err(err) => return Err(err),
                    }
                }
                found.ok_or_else(|| {
                    Error::Degenerate(
                        "random pole draws kept producing numerically singular bases"
                            .into(),
                    )
                })?
            }
            _ => {
                let basis = bases[job.qi][job.mi].as_ref().expect("basis precomputed");
                optimal_projection(tf, basis)?.1
            }
        };
        Ok(bias / norm)
    }))?;

    let mut out = Vec::with_capacity(orders.len() * methods.len());
    for qi in 0..orders.len() {
        for (mi, &method) in methods.iter().enumerate() {
            let group: Vec<f64> = jobs
                .iter()
                .zip(&rels)
                .filter(|(job, _)| job.qi == qi && job.mi == mi)
                .map(|(_, &rel)| rel)
                .collect();
            out.push((orders[qi], method, summarize(group)));
        }
    }
    Ok(out)
}

fn sweep_rows(table: &mut Table, rows: Vec<(usize, MethodArg, (f64, f64, f64))>, trials: usize) {
    for (q, method, (median, mean, max)) in rows {
        table.push(vec![
            q.to_string(),
            method.label().into(),
            trials.to_string(),
            fmt_float(median),
            fmt_float(mean),
            fmt_float(max),
        ]);
    }
}

const SWEEP_HEADER: [&str; 6] = [
    "q",
    "method",
    "trials",
    "median_rel_bias",
    "mean_rel_bias",
    "max_rel_bias",
];

pub fn run_sweep_q(
    region_text: Option<&str>,
    q_range: &str,
    trials: usize,
    seed: u64,
    method: Option<MethodArg>,
    out: Option<&Path>,
) -> Result<()> {
    if trials == 0 {
        return Err(Error::Arity("need at least one trial".into()));
    }
    let region = match region_text {
        Some(text) => parse_region(text)?,
        None => PoleRegion::interval(-0.95, 0.95)?,
    };
    let (lo, hi) = parse_range(q_range)?;
    let orders: Vec<usize> = (lo..=hi).collect();
    let methods: Vec<MethodArg> = match method {
        Some(m) => vec![m],
        None => MethodArg::ALL.to_vec(),
    };
    let spec = json!({
        "command": "sweep-q",
        "region": region,
        "orders": orders,
        "trials": trials,
        "seed": seed,
        "methods": methods.iter().map(|m| m.label()).collect::<Vec<_>>(),
    });
    let mut root = ChaCha8Rng::seed_from_u64(seed);
    let sys_seeds: Vec<u64> = (0..trials).map(|_| root.random()).collect();
    let random_seeds: Vec<Vec<u64>> = orders
        .iter()
        .map(|_| (0..trials).map(|_| root.random()).collect())
        .collect();

    let systems = collect(parallel_map(&sys_seeds, |&s| -> Result<(PartialFractionTF, f64)> {
        let tf = benchmark_tf(s)?;
        let norm = markov_energy(&tf_markov_window(&tf, window_len(tf.rho())));
        Ok((tf, norm))
    }))?;

    let rows = bias_sweep(&region, &orders, &methods, &systems, &random_seeds)?;
    let mut table = Table::new(&SWEEP_HEADER);
    sweep_rows(&mut table, rows, trials);
    emit(out, &table.render(&spec_hash(&spec)))
}

pub fn run_convergence(
    system: &str,
    region_text: &str,
    q: usize,
    method: MethodArg,
    n_list: &[usize],
    trials: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let region = parse_region(region_text)?;
    let plant = load_system(system)?.to_ss()?;
    let spec = json!({
        "command": "convergence",
        "system": system,
        "region": region,
        "q": q,
        "method": method.label(),
        "n_list": n_list,
        "trials": trials,
        "seed": seed,
    });
    let mut root = ChaCha8Rng::seed_from_u64(seed);
    let basis_seed: u64 = root.random();
    let experiment_seed: u64 = root.random();
    let (set, _) = select_poles(&region, q, method, Some(basis_seed))?;
    let result = convergence_experiment(&plant, &set, n_list, trials, experiment_seed)?;

    let mut table = Table::new(&["n_samples", "mean_error", "min_error", "max_error"]);
    table.meta("slope", fmt_float(result.slope));
    for row in &result.rows {
        table.push(vec![
            row.n.to_string(),
            fmt_float(row.mean),
            fmt_float(row.min),
            fmt_float(row.max),
        ]);
    }
    emit(out, &table.render(&spec_hash(&spec)))
}

pub fn run_diffusion(
    config: Option<&str>,
    region_text: Option<&str>,
    q_range: &str,
    trials: usize,
    seed: u64,
    method: Option<MethodArg>,
    out: Option<&Path>,
) -> Result<()> {
    if trials == 0 {
        return Err(Error::Arity("need at least one trial".into()));
    }
    let cfg = load_diffusion_config(config)?;
    let region = match region_text {
        Some(text) => parse_region(text)?,
        None => PoleRegion::interval(-0.99, 0.99)?,
    };
    let nominal = build_diffusion_system(&cfg)?;
    let (lo, hi) = parse_range(q_range)?;
    let orders: Vec<usize> = (lo..=hi).collect();
    let methods: Vec<MethodArg> = match method {
        Some(m) => vec![m],
        None => MethodArg::ALL.to_vec(),
    };
    let spec = json!({
        "command": "diffusion",
        "config": cfg,
        "region": region,
        "orders": orders,
        "trials": trials,
        "seed": seed,
        "methods": methods.iter().map(|m| m.label()).collect::<Vec<_>>(),
    });
    let mut root = ChaCha8Rng::seed_from_u64(seed);
    let instance_seeds: Vec<u64> = (0..trials).map(|_| root.random()).collect();
    let random_seeds: Vec<Vec<u64>> = orders
        .iter()
        .map(|_| (0..trials).map(|_| root.random()).collect())
        .collect();

    let systems = collect(parallel_map(
        &instance_seeds,
        |&s| -> Result<(PartialFractionTF, f64)> {
            let plant = perturb_diffusion(&nominal, cfg.perturb_sigma, s)?;
            let tf = ss_to_pf(&plant)?;
            let norm = markov_energy(&tf_markov_window(&tf, window_len(tf.rho())));
            Ok((tf, norm))
        },
    ))?;

    let rows = bias_sweep(&region, &orders, &methods, &systems, &random_seeds)?;
    let mut table = Table::new(&SWEEP_HEADER);
    table.meta("states", nominal.state_dim().to_string());
    sweep_rows(&mut table, rows, trials);
    emit(out, &table.render(&spec_hash(&spec)))
}

pub fn run_hardness(
    region_text: &str,
    q_range: &str,
    system: Option<&str>,
    out: Option<&Path>,
) -> Result<()> {
    let region = parse_region(region_text)?;
    let budget = match system {
        Some(tag) => EnergyBudget::from_tf(&load_system(tag)?.to_tf()?, 1.0)?,
        None => EnergyBudget::new(1.0, region.max_abs(), 1.0)?,
    };
    let (lo, hi) = parse_range(q_range)?;
    let orders: Vec<usize> = (lo..=hi).collect();
    let delta = 1.0;
    let spec = json!({
        "command": "hardness",
        "region": region,
        "orders": orders,
        "system": system,
        "delta": delta,
    });
    let per_order = collect(parallel_map(&orders, |&n| -> Result<(f64, f64, f64)> {
        let tau_n = chebyshev_rate(&region, n)?;
        let (floor, growth) = sample_complexity_floor(delta, &budget, &region, n)?;
        Ok((tau_n, floor, growth))
    }))?;

    let mut table = Table::new(&["n", "tau_n", "n_floor", "growth_factor"]);
    table.meta("delta", fmt_float(delta));
    for (&n, (tau_n, floor, growth)) in orders.iter().zip(per_order) {
        table.push(vec![
            n.to_string(),
            fmt_float(tau_n),
            fmt_float(floor),
            fmt_float(growth),
        ]);
    }
    emit(out, &table.render(&spec_hash(&spec)))
}
