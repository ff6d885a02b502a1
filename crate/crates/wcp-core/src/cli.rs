//! Command-line surface: configuration parsing, pipeline orchestration,
//! and JSON report assembly.

use crate::bubble::{self, Bubble};
use crate::error::{Error, Result};
use crate::fd::{self, Field, Grid, SolverConfig};
use crate::heisenberg::{HPoint, QuadratureSpec};
use crate::interaction;
use crate::reduction::{self, ReducedProblem};
use crate::report::{Jv, config_hash, versions};
use crate::rng::Rng;
use crate::sphere::{self, Chart, ManifoldFn, SpherePoint};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    VerifyIntegrals,
    Bubbles,
    Degree,
    Reduce,
    Solve,
    Spectrum,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyIntegrals => "verify-integrals",
            Command::Bubbles => "bubbles",
            Command::Degree => "degree",
            Command::Reduce => "reduce",
            Command::Solve => "solve",
            Command::Spectrum => "spectrum",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub k_file: Option<PathBuf>,
    pub rel_tol: f64,
    pub tau: f64,
    pub grid: (usize, usize, usize),
    /// Half-extents of the solver box; `None` selects the
    /// dilation-matched box for the given grid.
    pub box_half: Option<(f64, f64, f64)>,
    pub schedule: Vec<f64>,
    pub out: Option<PathBuf>,
    pub snapshots: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            k_file: None,
            rel_tol: 1e-5,
            tau: 1e-2,
            grid: (33, 33, 33),
            box_half: None,
            schedule: vec![2.0, 2.5, 2.8, 2.9, 2.95, 2.975, 2.9875],
            out: None,
            snapshots: None,
            seed: 0,
        }
    }

    /// Canonical configuration string hashed into every report.
    pub fn canonical(&self) -> String {
        format!(
            "command={};k={};rel_tol={:e};tau={:e};grid={},{},{};box={:?};schedule={:?};seed={}",
            self.command.name(),
            self.k_file
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            self.rel_tol,
            self.tau,
            self.grid.0,
            self.grid.1,
            self.grid.2,
            self.box_half,
            self.schedule,
            self.seed,
        )
    }
}

pub const USAGE: &str = "usage: wcp <command> [flags]

commands:
  verify-integrals   reproduce the exact bubble integrals
  bubbles            bubble identity residuals and moment scaling
  degree             total degree report for a curvature polynomial
  reduce             reduced-energy solve over admissible subsets
  solve              subcritical continuation with blow-up diagnostics
  spectrum           first eigenpair and linearized spectral check

flags:
  --k <path>           curvature polynomial (monomial format: `c i j k l`)
  --rel-tol <r>        quadrature relative tolerance (default 1e-5)
  --tau <t>            subcritical defect for `reduce` (default 1e-2)
  --grid <nx,ny,nt>    solver grid (default 33,33,33)
  --box <X,Y,T>        solver box half-extents (default dilation-matched)
  --schedule <p,...>   continuation exponents (default 2.0..2.9875)
  --out <path>         write the JSON report here instead of stdout
  --snapshots <dir>    write binary field snapshots per continuation step
  --seed <n>           multistart seed (default 0)
";

/// Parse command-line arguments (without the program name).
pub fn parse_args(args: &[String]) -> Result<RunConfig> {
    let mut it = args.iter();
    let Some(cmd) = it.next() else {
        return Err(Error::InvalidArgument(USAGE.to_string()));
    };
    let command = match cmd.as_str() {
        "verify-integrals" => Command::VerifyIntegrals,
        "bubbles" => Command::Bubbles,
        "degree" => Command::Degree,
        "reduce" => Command::Reduce,
        "solve" => Command::Solve,
        "spectrum" => Command::Spectrum,
        other => {
            return Err(Error::InvalidArgument(format!("unknown command `{other}`\n{USAGE}")));
        }
    };
    let mut cfg = RunConfig::new(command);
    while let Some(flag) = it.next() {
        let mut value = || {
            it.next()
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("flag {flag} needs a value")))
        };
        match flag.as_str() {
            "--k" => cfg.k_file = Some(PathBuf::from(value()?)),
            "--rel-tol" => {
                cfg.rel_tol = value()?
                    .parse()
                    .map_err(|_| Error::InvalidArgument("bad --rel-tol".into()))?;
            }
            "--tau" => {
                cfg.tau = value()?
                    .parse()
                    .map_err(|_| Error::InvalidArgument("bad --tau".into()))?;
            }
            "--grid" => {
                let v = value()?;
                let parts: Vec<usize> = v
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::InvalidArgument("bad --grid".into()))?;
                if parts.len() != 3 {
                    return Err(Error::InvalidArgument("--grid wants nx,ny,nt".into()));
                }
                cfg.grid = (parts[0], parts[1], parts[2]);
            }
            "--box" => {
                let v = value()?;
                let parts: Vec<f64> = v
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::InvalidArgument("bad --box".into()))?;
                if parts.len() != 3 {
                    return Err(Error::InvalidArgument("--box wants X,Y,T".into()));
                }
                cfg.box_half = Some((parts[0], parts[1], parts[2]));
            }
            "--schedule" => {
                let v = value()?;
                cfg.schedule = v
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::InvalidArgument("bad --schedule".into()))?;
            }
            "--out" => cfg.out = Some(PathBuf::from(value()?)),
            "--snapshots" => cfg.snapshots = Some(PathBuf::from(value()?)),
            "--seed" => {
                cfg.seed = value()?
                    .parse()
                    .map_err(|_| Error::InvalidArgument("bad --seed".into()))?;
            }
            other => {
                return Err(Error::InvalidArgument(format!("unknown flag `{other}`\n{USAGE}")));
            }
        }
    }
    // Range checks.
    if cfg.rel_tol <= 0.0 || cfg.rel_tol > 0.1 {
        return Err(Error::InvalidArgument("--rel-tol out of range (0, 0.1]".into()));
    }
    if !(0.0 < cfg.tau && cfg.tau <= reduction::TAU_MAX) {
        return Err(Error::InvalidArgument(format!(
            "--tau out of range (0, {}]",
            reduction::TAU_MAX
        )));
    }
    for p in &cfg.schedule {
        if !(1.0..3.0).contains(p) {
            return Err(Error::InvalidArgument("--schedule exponents must lie in [1, 3)".into()));
        }
    }
    Ok(cfg)
}

/// Parse and validate a curvature polynomial file: exact decimal parse,
/// degree cap, and a positivity pre-check on a dense sample.
pub fn parse_k_spec(path: &std::path::Path) -> Result<ManifoldFn> {
    let src = std::fs::read_to_string(path)?;
    let k = sphere::parse_k_text(&src)?;
    let min = k.min_on_sample(10_000);
    if min <= 0.0 {
        return Err(Error::KNotPositive(min));
    }
    Ok(k)
}

fn require_k(cfg: &RunConfig) -> Result<ManifoldFn> {
    let Some(path) = &cfg.k_file else {
        return Err(Error::InvalidArgument(
            "this command needs a curvature polynomial: --k <path>".into(),
        ));
    };
    parse_k_spec(path)
}

fn report_header(cfg: &RunConfig) -> Jv {
    let mut o = Jv::obj();
    o.push("schema", Jv::Int(1));
    o.push("command", Jv::Str(cfg.command.name().to_string()));
    o.push("config_hash", Jv::Str(config_hash(&cfg.canonical())));
    o.push("versions", versions());
    o.push("seed", Jv::Int(cfg.seed as i64));
    o
}

/// Bubble-integral verification data.
pub struct IntegralsOutcome {
    pub i3: f64,
    pub i4: f64,
    pub iw: f64,
}

pub fn verify_integrals(rel_tol: f64) -> Result<IntegralsOutcome> {
    let spec = QuadratureSpec::new(60.0, rel_tol.min(1e-6), 7)?;
    let (i3, i4, iw) = bubble::bubble_integrals(&spec)?;
    Ok(IntegralsOutcome { i3, i4, iw })
}

fn run_verify_integrals(cfg: &RunConfig) -> Result<Jv> {
    let out = verify_integrals(cfg.rel_tol)?;
    let pi = std::f64::consts::PI;
    let mut o = report_header(cfg);
    let add = |o: &mut Jv, name: &str, value: f64, exact: f64| {
        let mut e = Jv::obj();
        e.push("value", Jv::Num(value));
        e.push("exact", Jv::Num(exact));
        e.push("rel_dev", Jv::Num((value - exact).abs() / exact));
        o.push(name, e);
    };
    add(&mut o, "int_u3", out.i3, 2.0 * pi);
    add(&mut o, "int_u4", out.i4, pi * pi / 4.0);
    add(&mut o, "int_w_u4", out.iw, pi * pi / 4.0);
    Ok(o)
}

fn run_bubbles(cfg: &RunConfig) -> Result<Jv> {
    let mut rng = Rng::new(cfg.seed);
    let sample: Vec<HPoint> = (0..100)
        .map(|_| HPoint::new(rng.range(-1.5, 1.5), rng.range(-1.5, 1.5), rng.range(-2.0, 2.0)))
        .collect();
    let b = Bubble::uncut(HPoint::origin(), 1.0, 1.0)?;
    let residual_unit = bubble::pde_residual(&b, &sample);
    let b2 = Bubble::uncut(HPoint::new(0.4, -0.7, 1.1), 7.3, 1.0)?;
    let residual_moved = bubble::pde_residual(&b2, &sample);
    let spec = QuadratureSpec::new(50.0, cfg.rel_tol.min(1e-7), 6)?;
    let lambdas = [1.0, 10.0, 100.0];
    let mut o = report_header(cfg);
    o.push("pde_residual_unit", Jv::Num(residual_unit));
    o.push("pde_residual_conjugated", Jv::Num(residual_moved));
    let mut moments = Jv::obj();
    for alpha in [0.5, 1.0, 2.0, 3.0] {
        let slope = bubble::moment_scaling(alpha, &lambdas, &spec)?;
        let mut m = Jv::obj();
        m.push("slope", Jv::Num(slope));
        m.push("expected", Jv::Num(-alpha));
        moments.push(&format!("alpha_{alpha}"), m);
    }
    o.push("moment_scaling", moments);
    Ok(o)
}

fn degree_report_json(report: &interaction::DegreeReport, cfg: &RunConfig) -> Jv {
    let mut o = report_header(cfg);
    let mut pts = Vec::new();
    for (i, c) in report.critical_points.iter().enumerate() {
        let mut p = Jv::obj();
        p.push("coordinates", Jv::nums(&c.location.c));
        p.push("k_value", Jv::Num(c.k_value));
        p.push("morse_index", Jv::Int(c.morse_index as i64));
        p.push("hessian_eigs", Jv::nums(&c.hessian_eigs));
        p.push("delta_b_k", Jv::Num(c.delta_b_k));
        p.push("mass_constant", Jv::Num(c.mass));
        p.push("grad_residual", Jv::Num(c.grad_residual));
        p.push("condition_one", Jv::Num(report.condition_one[i]));
        pts.push(p);
    }
    o.push("critical_points", Jv::Arr(pts));
    let mut subs = Vec::new();
    for s in &report.admissible {
        let mut e = Jv::obj();
        e.push("indices", Jv::ints(&s.indices.iter().map(|&i| i as i64).collect::<Vec<_>>()));
        e.push("mu", Jv::Num(s.mu));
        e.push("cluster_sign", Jv::Int(s.cluster_sign));
        subs.push(e);
    }
    o.push("admissible_subsets", Jv::Arr(subs));
    o.push("total_degree", Jv::Int(report.total_degree));
    o.push("existence", Jv::Bool(report.existence));
    o
}

fn run_degree(cfg: &RunConfig) -> Result<Jv> {
    let k = require_k(cfg)?;
    let report = interaction::total_degree_seeded(&k, cfg.seed)?;
    Ok(degree_report_json(&report, cfg))
}

fn run_reduce(cfg: &RunConfig) -> Result<Jv> {
    let k = require_k(cfg)?;
    let report = interaction::total_degree_seeded(&k, cfg.seed)?;
    let mut o = report_header(cfg);
    let taus = [cfg.tau, cfg.tau / 2.0, cfg.tau / 4.0];
    o.push("tau_schedule", Jv::nums(&taus));
    let mut subsets = Vec::new();
    for s in report.admissible.iter().filter(|s| s.mu > 0.0) {
        let matrix = interaction::build_matrix_indexed(&report.critical_points, &s.indices)?;
        let k_values: Vec<f64> = s
            .indices
            .iter()
            .map(|&i| report.critical_points[i].k_value)
            .collect();
        let mut runs = Vec::new();
        let mut scaled_prev: Option<Vec<f64>> = None;
        let mut drift: f64 = 0.0;
        for &tau in &taus {
            let prob = ReducedProblem::new(matrix.entries.clone(), k_values.clone(), tau)?;
            let sol = reduction::solve_reduced(&prob)?;
            let bands = reduction::amplitude_estimate(&prob);
            let mut r = Jv::obj();
            r.push("tau", Jv::Num(tau));
            r.push("lambdas", Jv::nums(&sol.lambdas));
            r.push("scaled_lambdas", Jv::nums(&sol.scaled_lambdas));
            r.push("hessian_min_eig", Jv::Num(sol.hessian_min_eig));
            r.push("amplitudes", Jv::nums(&sol.amplitudes));
            r.push("amplitude_band", Jv::Num(bands[0].1));
            runs.push(r);
            if let Some(prev) = &scaled_prev {
                for (a, b) in prev.iter().zip(sol.scaled_lambdas.iter()) {
                    drift = drift.max((a - b).abs() / a.abs().max(1e-300));
                }
            }
            scaled_prev = Some(sol.scaled_lambdas.clone());
        }
        let mut e = Jv::obj();
        e.push("indices", Jv::ints(&s.indices.iter().map(|&i| i as i64).collect::<Vec<_>>()));
        e.push("mu", Jv::Num(s.mu));
        e.push("runs", Jv::Arr(runs));
        e.push("scaled_lambda_drift", Jv::Num(drift));
        subsets.push(e);
    }
    o.push("subsets", Jv::Arr(subsets));
    Ok(o)
}

/// Structured outcome of the subcritical continuation used by both the
/// CLI and the acceptance suite.
pub struct ContinuationOutcome {
    pub grid: Grid,
    pub steps: Vec<ContinuationStep>,
    pub diagnostics: fd::BlowupDiagnostics,
}

pub struct ContinuationStep {
    pub p: f64,
    pub tau: f64,
    pub rel_residual: f64,
    pub peak_height: f64,
    /// Full peak table of this step.
    pub peaks: Vec<(HPoint, f64)>,
}

/// Coefficient of the boundary bubble scale `lambda = c tau^{-1/2}`,
/// chosen so the default schedule stays on the bubble branch with margin
/// (the discrete linearization changes inertia in a narrow window around
/// `lambda ~ 1.0-1.4` where Newton has no target).
pub const BOUNDARY_SCALE_COEFF: f64 = 0.63;

/// Run the continuation family `L u = K u^p` over the schedule with
/// boundary data tracing a bubble whose scale grows like `tau^{-1/2}`,
/// then compute the blow-up diagnostics of the family.
///
/// The grids zoom with the concentration scale: step `i` solves on the
/// base box shrunk by `lambda_0 / lambda_i` (quadratically in `t`, per
/// the parabolic dilations) with a mildly growing node count. Up to the
/// `O(tau)` drift of the effective curvature, every step is the dilation
/// image of the first, so the Newton solves stay uniformly conditioned
/// while the peaks grow and the blow-up scale is resolved progressively
/// better.
pub fn continuation(
    base_grid: &Grid,
    k_sphere: Option<&ManifoldFn>,
    schedule: &[f64],
    snapshots: Option<&std::path::Path>,
) -> Result<ContinuationOutcome> {
    let chart = Chart::new(SpherePoint::north());
    let k_at = |x: HPoint| -> f64 {
        match k_sphere {
            Some(k) => k.eval_sphere(&chart.from_heisenberg(x)),
            None => 1.0,
        }
    };
    let k_center = k_at(HPoint::origin());
    let amplitude = 1.0 / k_center.sqrt();
    let tau0 = 3.0 - schedule.first().copied().unwrap_or(2.875);
    let lambda0 = BOUNDARY_SCALE_COEFF / tau0.sqrt();
    let x_half0 = -base_grid.x0;
    let y_half0 = -base_grid.y0;
    let t_half0 = -base_grid.t0;

    let mut fields: Vec<(Field, Grid, f64, f64)> = Vec::new();
    let mut steps = Vec::new();
    for (i, &p) in schedule.iter().enumerate() {
        let tau = 3.0 - p;
        let lambda = BOUNDARY_SCALE_COEFF / tau.sqrt();
        let zoom = lambda0 / lambda;
        let grid = Grid::new(
            x_half0 * zoom,
            y_half0 * zoom,
            t_half0 * zoom * zoom,
            base_grid.nx + 4 * i,
            base_grid.ny + 4 * i,
            base_grid.nt + 4 * i,
        )?;
        let op = fd::discretize_sublaplacian(&grid);
        let k_field = Field::from_fn(&grid, k_at);
        let b = Bubble::uncut(HPoint::origin(), lambda, amplitude)?;
        let boundary = Field::from_fn(&grid, |x| bubble::eval_bubble(&b, x));
        let mut cfg = SolverConfig::new(p)?;
        cfg.newton_tol = 1e-10;
        // Each step starts from the bubble profile at its own scale: the
        // boundary field extended inward is already that profile.
        let start = boundary.clone();
        let u = fd::newton_solve(&op, &k_field, p, &boundary, &start, &cfg)?;
        let res = fd::residual(&op, &u, &k_field, p);
        let scale: f64 = op
            .restrict(&u)
            .iter()
            .zip(op.restrict(&k_field).iter())
            .map(|(uu, kk)| (kk * uu.abs().powf(p)).powi(2))
            .sum::<f64>()
            .sqrt();
        let rel = res.iter().map(|x| x * x).sum::<f64>().sqrt() / scale.max(1e-300);
        let peaks = fd::extract_peaks(&u, &grid);
        let peak_height = peaks.first().map(|p| p.1).unwrap_or(0.0);
        steps.push(ContinuationStep { p, tau, rel_residual: rel, peak_height, peaks });
        if let Some(dir) = snapshots {
            std::fs::create_dir_all(dir)?;
            fd::write_snapshot(&dir.join(format!("solve_step_{i:02}.fld")), &u, &grid, p)?;
        }
        fields.push((u, grid, tau, p));
    }
    let family: Vec<fd::FamilyMember> = fields
        .iter()
        .map(|(f, g, tau, p)| fd::FamilyMember {
            field: f,
            grid: g,
            tau: *tau,
            p: *p,
            analytic: None,
        })
        .collect();
    let diagnostics = fd::blowup_diagnostics(&family, &k_at)?;
    Ok(ContinuationOutcome { grid: base_grid.clone(), steps, diagnostics })
}

fn solve_grid(cfg: &RunConfig) -> Result<Grid> {
    let (nx, ny, nt) = cfg.grid;
    match cfg.box_half {
        Some((x, y, t)) => Grid::new(x, y, t, nx, ny, nt),
        // Continuation wants a box proportioned to the bubble support;
        // the spectral check wants the dilation-matched slab.
        None if cfg.command == Command::Solve => Grid::new(1.0, 1.0, 0.6, nx, ny, nt),
        None => Grid::dilation_matched(1.0, 1.0, nx, ny, nt),
    }
}

fn run_solve(cfg: &RunConfig) -> Result<Jv> {
    let k = match &cfg.k_file {
        Some(_) => Some(require_k(cfg)?),
        None => None,
    };
    let grid = solve_grid(cfg)?;
    let outcome = continuation(&grid, k.as_ref(), &cfg.schedule, cfg.snapshots.as_deref())?;
    let mut o = report_header(cfg);
    let mut steps = Vec::new();
    for s in &outcome.steps {
        let mut e = Jv::obj();
        e.push("p", Jv::Num(s.p));
        e.push("tau", Jv::Num(s.tau));
        e.push("rel_residual", Jv::Num(s.rel_residual));
        e.push("peak_height", Jv::Num(s.peak_height));
        let mut pk = Vec::new();
        for (loc, h) in &s.peaks {
            let mut pe = Jv::obj();
            pe.push("location", Jv::nums(&[loc.x, loc.y, loc.t]));
            pe.push("height", Jv::Num(*h));
            pk.push(pe);
        }
        e.push("peaks", Jv::Arr(pk));
        steps.push(e);
    }
    o.push("steps", Jv::Arr(steps));
    let d = &outcome.diagnostics;
    let mut diag = Jv::obj();
    let mut peaks = Vec::new();
    for (loc, h) in &d.peaks {
        let mut e = Jv::obj();
        e.push("location", Jv::nums(&[loc.x, loc.y, loc.t]));
        e.push("height", Jv::Num(*h));
        peaks.push(e);
    }
    diag.push("peaks", Jv::Arr(peaks));
    diag.push("heights", Jv::nums(&d.heights));
    diag.push("tau_m_sq", Jv::nums(&d.tau_m_sq));
    diag.push("profile_errors", Jv::nums(&d.profile_errors));
    diag.push("green_coeffs", Jv::nums(&d.green_coeffs));
    diag.push("growth_exponent", Jv::Num(d.growth_exponent));
    o.push("blowup_diagnostics", diag);
    Ok(o)
}

fn run_spectrum(cfg: &RunConfig) -> Result<Jv> {
    let grid = solve_grid(cfg)?;
    let check = fd::linearized_spectrum_check(&grid, 10)?;
    let mut o = report_header(cfg);
    o.push("lambda1", Jv::Num(check.lambda1));
    o.push("lowest_eigenvalues", Jv::nums(&check.lowest));
    o.push("negative_eigenvalue", Jv::Num(check.negative_eig));
    o.push("ground_state_overlap", Jv::Num(check.overlap));
    Ok(o)
}

/// Execute a configuration and return the JSON report.
pub fn run(cfg: &RunConfig) -> Result<Jv> {
    match cfg.command {
        Command::VerifyIntegrals => run_verify_integrals(cfg),
        Command::Bubbles => run_bubbles(cfg),
        Command::Degree => run_degree(cfg),
        Command::Reduce => run_reduce(cfg),
        Command::Solve => run_solve(cfg),
        Command::Spectrum => run_spectrum(cfg),
    }
}

/// Render a report and write it to the configured destination.
pub fn emit(cfg: &RunConfig, report: &Jv) -> Result<()> {
    let text = crate::report::to_string(report);
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn parses_flags() {
        let cfg = parse_args(&args(&[
            "degree", "--k", "k.poly", "--seed", "7", "--rel-tol", "1e-6",
        ]))
        .unwrap();
        assert_eq!(cfg.command, Command::Degree);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.k_file.as_ref().unwrap().to_str().unwrap(), "k.poly");

        let cfg = parse_args(&args(&[
            "solve",
            "--grid",
            "17,17,17",
            "--box",
            "0.8,0.8,0.4",
            "--schedule",
            "2.0,2.5",
        ]))
        .unwrap();
        assert_eq!(cfg.grid, (17, 17, 17));
        assert_eq!(cfg.box_half, Some((0.8, 0.8, 0.4)));
        assert_eq!(cfg.schedule, vec![2.0, 2.5]);

        assert!(parse_args(&args(&["frobnicate"])).is_err());
        assert!(parse_args(&args(&["solve", "--grid", "3"])).is_err());
        assert!(parse_args(&args(&["solve", "--schedule", "3.5"])).is_err());
        assert!(parse_args(&[]).is_err());
    }

    #[test]
    fn verify_integrals_report() {
        let cfg = parse_args(&args(&["verify-integrals", "--rel-tol", "1e-5"])).unwrap();
        let report = run(&cfg).unwrap();
        let text = crate::report::to_string(&report);
        assert!(text.contains("\"schema\": 1"));
        assert!(text.contains("int_u3"));
        // Determinism: byte-identical on rerun.
        let again = crate::report::to_string(&run(&cfg).unwrap());
        assert_eq!(text, again);
    }

    #[test]
    fn degree_needs_k() {
        let cfg = parse_args(&args(&["degree"])).unwrap();
        assert!(matches!(run(&cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn degree_on_height_function_end_to_end() {
        let dir = std::env::temp_dir().join("wcp_cli_k_test.poly");
        std::fs::write(&dir, "2 0 0 0 0\n1 0 0 0 1\n").unwrap();
        let mut cfg = RunConfig::new(Command::Degree);
        cfg.k_file = Some(dir.clone());
        let report = run(&cfg).unwrap();
        let text = crate::report::to_string(&report);
        assert!(text.contains("\"total_degree\": 0"));
        assert!(text.contains("\"existence\": false"));
        let _ = std::fs::remove_file(dir);
    }

    #[test]
    fn constant_k_maps_to_hypothesis_failure() {
        let dir = std::env::temp_dir().join("wcp_cli_const_k.poly");
        std::fs::write(&dir, "1 0 0 0 0\n").unwrap();
        let mut cfg = RunConfig::new(Command::Degree);
        cfg.k_file = Some(dir.clone());
        let err = run(&cfg).unwrap_err();
        assert!(err.is_hypothesis_failure());
        let _ = std::fs::remove_file(dir);
    }

    #[test]
    fn spectrum_small_grid_runs() {
        let mut cfg = RunConfig::new(Command::Spectrum);
        cfg.grid = (9, 9, 9);
        cfg.box_half = Some((1.0, 1.0, 0.5));
        let report = run(&cfg).unwrap();
        let text = crate::report::to_string(&report);
        assert!(text.contains("negative_eigenvalue"));
    }
}
