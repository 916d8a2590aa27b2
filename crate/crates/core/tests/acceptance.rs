//! Acceptance criteria, one line each. Runs without the libtest harness so
//! every line is printed; exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use fluxlim_core::diagnostics::{collapse_metric, dissipation_bound_check};
use fluxlim_core::harness::comparison::run_comparison;
use fluxlim_core::harness::convergence::steady_residual_study;
use fluxlim_core::harness::single::{moment_inequality_check, moment_range_check, run_single};
use fluxlim_core::harness::sweep::mass_sweep;
use fluxlim_core::harness::{build_initial, ExperimentSpec, RunContext};
use fluxlim_core::integrator::Integrator;
use fluxlim_core::model::{
    accumulate_density, amplitude_a, critical_mass, density_from_u, lambda_from_level, w0,
    w_lambda, x_lambda, RadialProfile,
};
use fluxlim_core::operator::jacobian_p;
use fluxlim_core::{Grid, Outcome, State};

type Verdict = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Verdict);

fn config(name: &str) -> ExperimentSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ExperimentSpec::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn constants() -> Verdict {
    let mc = critical_mass(2).map_err(err)?;
    let a = amplitude_a(2).map_err(err)?;
    let rel = (mc - 8.0 * PI).abs() / (8.0 * PI);
    Ok((
        rel <= 2.0 * f64::EPSILON && a == 4.0,
        format!("m_c(2) = {mc} (rel. error {rel:e} against 8 pi), A(2) = {a}"),
    ))
}

// Five-point derivative of the library's own W_0, so the identity is checked
// independently of any closed form for W_0'.
fn steady_identity() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in [2u32, 3, 4] {
        let nf = f64::from(n);
        for k in 0..100 {
            let xi = 10f64.powf(-4.0 + 8.0 * f64::from(k) / 99.0);
            let h = 1e-3 * xi;
            let f = |x: f64| w0(x, n).unwrap();
            let d = (f(xi - 2.0 * h) - 8.0 * f(xi - h) + 8.0 * f(xi + h) - f(xi + 2.0 * h))
                / (12.0 * h);
            let w = f(xi);
            let nonlinear = (nf - 1.0) / (nf * nf) * w.powf(nf / (nf - 1.0));
            let residual = xi * d - w + nonlinear;
            let scale = (xi * d).abs().max(w.abs()).max(nonlinear.abs());
            worst = worst.max(residual.abs() / scale);
        }
    }
    Ok((
        worst <= 1e-8,
        format!("max relative ODE residual {worst:e} over N = 2, 3, 4"),
    ))
}

fn discrete_steady_residual() -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for file in ["converge_steady_n2.toml", "converge_steady_n3.toml"] {
        let spec = config(file);
        let n = spec.model.n_dim;
        let cells = &spec.convergence.as_ref().unwrap().cells;
        let params = spec.model.params().map_err(err)?;
        let lambda = lambda_from_level(params.level(), n).map_err(err)?;
        let op = spec.solver.operator().map_err(err)?;
        let study = steady_residual_study(cells, spec.grid.gamma, n, op.as_ref(), &|g: &Grid| {
            g.nodes()
                .iter()
                .map(|&x| w_lambda(x, lambda, n).unwrap())
                .collect()
        })
        .map_err(err)?;
        let orders: Vec<f64> = study.orders.iter().map(|o| o.unwrap_or(f64::NAN)).collect();
        ok &= orders.iter().all(|&p| p >= 1.5);
        detail.push(format!("N = {n}: orders {orders:.3?}"));
    }
    Ok((ok, detail.join("; ")))
}

fn blow_up_time(spec: &ExperimentSpec) -> Result<(Option<f64>, f64), String> {
    let run = run_single(spec).map_err(err)?;
    let t = match run.record.outcome {
        Outcome::BlewUp { t } => Some(t),
        _ => None,
    };
    Ok((t, run.params.blow_up_time_bound().map_err(err)?))
}

fn supercritical_blow_up() -> Verdict {
    let spec = config("supercritical_n2.toml");
    let (t1, t_star) = blow_up_time(&spec)?;
    let mut fine = spec.clone();
    fine.grid.cells *= 2;
    let (t2, _) = blow_up_time(&fine)?;
    let (t3, t_star3) = blow_up_time(&config("supercritical_n2_double.toml"))?;
    let (Some(t1), Some(t2), Some(t3)) = (t1, t2, t3) else {
        return Ok((false, format!("missing blow-up: {t1:?}, {t2:?}, {t3:?}")));
    };
    let drift = (t2 - t1).abs() / t1;
    Ok((
        t1 <= t_star && (t_star - 0.5).abs() < 1e-12 && drift <= 0.05 && t3 <= t_star3 && t_star3 <= 0.25 + 1e-12,
        format!(
            "m = 1.5 m_c: t_event {t1} (n = {}), {t2} (n = {}), change {:.2}%, T* = {t_star}; m = 2 m_c: t_event {t3}, T* = {t_star3}",
            spec.grid.cells,
            fine.grid.cells,
            100.0 * drift
        ),
    ))
}

fn moment_inequality() -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for file in ["supercritical_n2.toml", "supercritical_n2_double.toml"] {
        let run = run_single(&config(file)).map_err(err)?;
        let ineq = moment_inequality_check(&run.record.samples, &run.params);
        let range = moment_range_check(&run.record.samples, &run.params);
        ok &= ineq.passed && range.passed;
        detail.push(format!(
            "m/m_c = {}: {} samples, {}; {}",
            run.params.mass_ratio(),
            run.record.samples.len(),
            ineq.detail,
            range.detail
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn subcritical_convergence() -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for file in ["subcritical_n2.toml", "subcritical_n3.toml"] {
        let spec = config(file);
        let run = run_single(&spec).map_err(err)?;
        let n = run.params.n_dim();
        let lambda = lambda_from_level(run.params.level(), n).map_err(err)?;
        let dist = run
            .grid
            .nodes()
            .iter()
            .zip(&run.record.final_state.u)
            .map(|(&x, &u)| (u - w_lambda(x, lambda, n).unwrap()).abs())
            .fold(0.0, f64::max);
        let converged = matches!(run.record.outcome, Outcome::ConvergedToSteady { .. });
        let diss =
            dissipation_bound_check(&run.record.samples, &run.params, run.discretization_error)
                .map_err(err)?;
        ok &= converged && dist <= 1e-3 && diss.passed;
        detail.push(format!(
            "N = {n}: {}, sup|U - W| = {dist:e}, dissipation {} intervals, worst excess {:e} (tol {:e})",
            run.record.outcome,
            diss.intervals.len(),
            diss.worst_excess,
            diss.tolerance
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn comparison_principle() -> Verdict {
    let ctx = RunContext::default();
    let mut ok = true;
    let mut detail = Vec::new();
    for file in [
        "compare_scaled_steady.toml",
        "compare_constant_steady.toml",
        "compare_regularized.toml",
    ] {
        let run = run_comparison(&config(file), &ctx).map_err(err)?;
        let samples = run
            .lower
            .record
            .profiles
            .len()
            .min(run.upper.record.profiles.len());
        ok &= run.report.passed && samples > 2;
        detail.push(format!(
            "{file}: min gap {:e} over {samples} samples (tol {:e})",
            run.report.worst_gap, run.report.tolerance
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn mass_threshold() -> Verdict {
    let ctx = RunContext {
        out_dir: None,
        jobs: 4,
    };
    let mut ok = true;
    let mut detail = Vec::new();
    for file in ["sweep_n2.toml", "sweep_n3.toml"] {
        let spec = config(file);
        let r = mass_sweep(&spec, &ctx).map_err(err)?;
        let mc = critical_mass(spec.model.n_dim).map_err(err)?;
        let lo = r.points.iter().find(|p| p.mass == r.mass_lo).unwrap();
        let hi = r.points.iter().find(|p| p.mass == r.mass_hi).unwrap();
        let within = r.mass_lo >= 0.95 * mc && r.mass_hi <= 1.05 * mc;
        ok &= within
            && !lo.blew_up
            && hi.blew_up
            && spec.solver.t_end == 20.0
            && spec.grid.cells == 512;
        detail.push(format!(
            "N = {}: bracket [{:.4}, {:.4}] m_c ({} / {})",
            spec.model.n_dim,
            r.mass_lo / mc,
            r.mass_hi / mc,
            lo.outcome,
            hi.outcome
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn critical_mass_run() -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for file in ["critical_n2.toml", "critical_n3.toml"] {
        let mut spec = config(file);
        spec.solver.record_profiles = true;
        let run = run_single(&spec).map_err(err)?;
        let n = run.params.n_dim();
        let rec = &run.record;
        let mut sub = Vec::new();
        let no_blow_up = !rec.outcome.blew_up() && rec.final_state.t >= 100.0 - 1e-9;
        sub.push(format!("{} at t = {:.4}", rec.outcome, rec.final_state.t));
        let at = |t: f64| rec.profiles.iter().find(|s| (s.t - t).abs() < 1e-9);
        let checkpoints: Vec<Option<&State>> = [10.0, 50.0, 100.0].into_iter().map(at).collect();
        let trends = if checkpoints.iter().all(Option::is_some) {
            let metrics = checkpoints
                .iter()
                .map(|s| collapse_metric(s.unwrap(), &run.grid, &run.params, &[0.1]).map_err(err))
                .collect::<Result<Vec<_>, _>>()?;
            let l1: Vec<f64> = metrics.iter().map(|m| m.r_c_l1).collect();
            let probe: Vec<f64> = metrics.iter().map(|m| m.gaps[0]).collect();
            sub.push(format!("L1(R_c) {l1:?}, A - U(0.1) {probe:?}"));
            l1.windows(2).all(|w| w[1] < w[0]) && probe.windows(2).all(|w| w[1] < w[0])
        } else {
            sub.push("no samples at t = 10, 50, 100".into());
            false
        };
        let riccati = if n == 2 {
            let rep = dissipation_bound_check(&rec.samples, &run.params, run.discretization_error)
                .map_err(err)?;
            sub.push(format!(
                "Riccati bound on {} intervals, worst excess {:e}",
                rep.intervals.len(),
                rep.worst_excess
            ));
            rep.passed
        } else {
            true
        };
        ok &= no_blow_up && trends && riccati;
        detail.push(format!("N = {n}: {}", sub.join(", ")));
    }
    Ok((ok, detail.join("; ")))
}

fn round_trip_error(cells: usize) -> Result<f64, String> {
    let grid = Grid::new(cells, 2.0, 2).map_err(err)?;
    let exact = |r: f64| x_lambda(r, 1.0, 2).unwrap();
    let dense: Vec<f64> = (0..=20_000).map(|k| f64::from(k) / 20_000.0).collect();
    let profile = RadialProfile::from_fn(dense, exact).map_err(err)?;
    let u = accumulate_density(&profile, 2, &grid).map_err(err)?;
    let back = density_from_u(&u, &grid, 2).map_err(err)?;
    Ok(back
        .radii()
        .iter()
        .zip(back.values())
        .map(|(&r, &v)| (v - exact(r)).abs())
        .fold(0.0, f64::max))
}

fn jacobian_fd_error(n_dim: u32) -> Result<f64, String> {
    let grid = Grid::new(64, 2.0, n_dim).map_err(err)?;
    let level = 0.6 * amplitude_a(n_dim).map_err(err)?;
    let lambda = lambda_from_level(level, n_dim).map_err(err)?;
    let u: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| 0.5 * (w_lambda(x, lambda, n_dim).unwrap() + level * x))
        .collect();
    let jac = jacobian_p(&u, &grid);
    let f = |v: &[f64]| fluxlim_core::operator::apply_p_rhs(v, &grid);
    let m = grid.cells() - 1;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 1..=m {
        let h = 1e-6 * u[j].abs().max(1e-3);
        let (mut up, mut dn) = (u.clone(), u.clone());
        up[j] += h;
        dn[j] -= h;
        let (fu, fd) = (f(&up), f(&dn));
        let col = j - 1;
        for row in col.saturating_sub(1)..(col + 2).min(m) {
            let fd_entry = (fu[row] - fd[row]) / (2.0 * h);
            let analytic = match row as isize - col as isize {
                -1 => jac.upper[row],
                0 => jac.diag[row],
                _ => jac.lower[row],
            };
            worst = worst.max((fd_entry - analytic).abs());
            scale = scale.max(analytic.abs());
        }
    }
    Ok(worst / scale)
}

// V(xi, t) = U(xi / 2, 2^{-2/N} t) computed directly on a uniform grid with
// half the cells and the boundary data read off the first run.
fn scaling_error() -> Result<(f64, f64), String> {
    let n_dim = 2;
    let rho: f64 = 0.5;
    let time_factor = rho.powf(2.0 / f64::from(n_dim));
    let spec = config("subcritical_n2.toml");
    let params = spec.model.params().map_err(err)?;
    let run_a = |cells: usize| -> Result<(Grid, Vec<State>), String> {
        let grid = Grid::new(cells, 1.0, n_dim).map_err(err)?;
        let mut cfg = spec.solver.clone();
        cfg.t_end = 0.05;
        cfg.dt_init = 5e-4;
        cfg.dt_max = 5e-4;
        cfg.sample_every = 5e-4;
        cfg.record_profiles = true;
        cfg.stop_on_steady = false;
        let initial = build_initial(&spec.initial, &params, &grid).map_err(err)?;
        let rec = Integrator::new(&grid, &params, &cfg)
            .map_err(err)?
            .run(&initial)
            .map_err(err)?;
        Ok((grid, rec.profiles))
    };
    let (grid_a, traj_a) = run_a(512)?;
    let dt_a = 5e-4;
    let half = grid_a.cells() / 2;
    let boundary: Vec<f64> = traj_a.iter().map(|s| s.u[half]).collect();

    let grid_b = Grid::new(half, 1.0, n_dim).map_err(err)?;
    let mut cfg_b = spec.solver.clone();
    let dt_b = dt_a / time_factor;
    cfg_b.t_end = 0.05 / time_factor;
    cfg_b.dt_init = dt_b;
    cfg_b.dt_max = dt_b;
    cfg_b.sample_every = dt_b;
    cfg_b.record_profiles = true;
    cfg_b.stop_on_steady = false;
    let u0: Vec<f64> = traj_a[0].u[..=half].to_vec();
    let level_b = u0[half];
    let params_b = fluxlim_core::ModelParams::new(n_dim, level_b * params.omega()).map_err(err)?;
    let boundary_at = move |t: f64| {
        let x = t * time_factor / dt_a;
        let k = (x.floor() as usize).min(boundary.len() - 2);
        let w = x - k as f64;
        (1.0 - w) * boundary[k] + w * boundary[k + 1]
    };
    let traj_b = Integrator::new(&grid_b, &params_b, &cfg_b)
        .map_err(err)?
        .with_boundary(boundary_at)
        .run(&State::new(u0, 0.0))
        .map_err(err)?
        .profiles;
    let mismatch = traj_a
        .iter()
        .zip(&traj_b)
        .flat_map(|(a, b)| a.u[..=half].iter().zip(&b.u).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);

    // discretization error: the same run on half the cells, compared at the
    // shared nodes
    let (_, coarse) = run_a(half)?;
    let disc = traj_a
        .iter()
        .zip(&coarse)
        .flat_map(|(a, c)| {
            c.u.iter()
                .enumerate()
                .map(move |(i, y)| (a.u[2 * i] - y).abs())
        })
        .fold(0.0, f64::max);
    if traj_a.len() != traj_b.len() {
        return Err(format!(
            "sample counts differ: {} vs {}",
            traj_a.len(),
            traj_b.len()
        ));
    }
    Ok((mismatch, disc))
}

fn self_consistency() -> Verdict {
    let e1 = round_trip_error(256)?;
    let e2 = round_trip_error(512)?;
    let ratio = e1 / e2;
    let j2 = jacobian_fd_error(2)?;
    let j3 = jacobian_fd_error(3)?;
    let (mismatch, disc) = scaling_error()?;
    Ok((
        ratio >= 3.0 && j2 <= 1e-6 && j3 <= 1e-6 && mismatch <= 10.0 * disc,
        format!(
            "round trip {e1:e} -> {e2:e} (ratio {ratio:.2}); Jacobian rel. error {j2:e} (N = 2), {j3:e} (N = 3); scaling mismatch {mismatch:e} vs disc. error {disc:e}"
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("constants", constants),
        ("steady-state identity", steady_identity),
        ("discrete steady residual", discrete_steady_residual),
        ("supercritical blow-up vs T*", supercritical_blow_up),
        ("moment inequality", moment_inequality),
        ("subcritical convergence", subcritical_convergence),
        ("comparison principle", comparison_principle),
        ("mass-threshold sweep", mass_threshold),
        ("critical-mass run", critical_mass_run),
        ("numerical self-consistency", self_consistency),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let (passed, detail) = match check() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        let status = if passed { "PASS" } else { "FAIL" };
        println!("{status} criterion {:>2} ({name}): {detail}", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
