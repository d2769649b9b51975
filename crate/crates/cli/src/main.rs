//! Command-line driver: configuration parsing, subcommand dispatch,
//! deterministic seeding, and CSV/JSON report emission.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod config;

use bosegas::cellbound::small_cell_certificate;
use bosegas::configspace::{build_neighbors, Box3, McBudget, ParticleConfig, Thresholds};
use bosegas::doubling::{verify_merge_bound, verify_randomized_floor, DoublingSchedule};
use bosegas::oracle::{ground_state, Bc, FewBody, RelativePair, SolverBudget};
use bosegas::rng::{substream, Stream};
use bosegas::scales::{error_budget, headline_bound, scan, ScaleSet};
use bosegas::twobody::{
    check_profile_bounds, solve_neumann_mode, solve_zero_energy, NeumannTable, ProfileKind,
};
use clap::{Parser, Subcommand};
use config::RunConfig;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bosegas", version, about = "dilute Bose gas lower-bound toolkit")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, default_value = "bosegas.toml")]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the configured density.
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Override the configured Monte Carlo sample budget.
    #[arg(long, global = true)]
    budget: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Zero-energy scattering profile and scattering length.
    Scattering,
    /// Lowest Neumann mode on a ball: eigenvalue, profile, bounds.
    Neumann,
    /// Length-scale ledger, error budget, and headline bound.
    Scales,
    /// Temple certificate for one cell of a sampled configuration.
    CellCertificate,
    /// Merge-bound sweep, randomized-floor check, and knee-gap report.
    DoublingVerify,
    /// Few-body ground state by the finite-difference solver.
    Oracle,
    /// Run the full acceptance suite and write the report.
    ReportAll,
}

enum AppError {
    Config(String),
    Numerical(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "configuration error: {m}"),
            AppError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Config(e.to_string())
}

fn num_err<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Numerical(e.to_string())
}

struct Ctx {
    cfg: RunConfig,
    out_dir: PathBuf,
    config_hash: String,
    extras: Vec<(String, String)>,
}

impl Ctx {
    fn load(cli: &Cli) -> Result<Self, AppError> {
        let raw = std::fs::read_to_string(&cli.config)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", cli.config.display())))?;
        let mut cfg: RunConfig = toml::from_str(&raw).map_err(config_err)?;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(rho) = cli.rho {
            cfg.scales.rho = rho;
        }
        if let Some(budget) = cli.budget {
            cfg.mc.samples = budget;
        }
        let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| AppError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(raw.as_bytes());
        let config_hash = format!("{:x}", hasher.finalize());
        Ok(Ctx { cfg, out_dir, config_hash, extras: Vec::new() })
    }

    fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.extras.push((key.to_string(), value.to_string()));
    }

    fn write_file(&self, name: &str, contents: &str) -> Result<(), AppError> {
        std::fs::write(self.out_dir.join(name), contents)
            .map_err(|e| AppError::Numerical(format!("cannot write {name}: {e}")))
    }

    fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<(), AppError> {
        let s = serde_json::to_string_pretty(value).map_err(num_err)?;
        self.write_file(name, &s)
    }

    fn write_manifest(&self, command: &str) -> Result<(), AppError> {
        let mut m = String::new();
        let _ = writeln!(m, "command = {command}");
        let _ = writeln!(m, "config_hash = sha256:{}", self.config_hash);
        let _ = writeln!(m, "seed = {}", self.cfg.seed);
        let _ = writeln!(m, "version = bosegas {}", env!("CARGO_PKG_VERSION"));
        let ts = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let _ = writeln!(m, "timestamp_unix = {ts}");
        for (k, v) in &self.extras {
            let _ = writeln!(m, "{k} = {v}");
        }
        self.write_file("manifest.txt", &m)
    }

    fn scale_set(&self) -> Result<ScaleSet, AppError> {
        let mut s = ScaleSet::new(
            self.cfg.scales.rho,
            self.cfg.scales.eta,
            self.cfg.scales.prefactors.to_prefactors(),
            self.cfg.scales.r0,
        )
        .map_err(config_err)?;
        s.hprime = self.cfg.scales.hprime;
        Ok(s)
    }
}

fn scattering_length(ctx: &Ctx) -> Result<f64, AppError> {
    match solve_zero_energy(&ctx.cfg.potential, &ctx.cfg.grid.to_spec())
        .map_err(num_err)?
        .kind
    {
        ProfileKind::ZeroEnergy { a } => Ok(a),
        _ => unreachable!(),
    }
}

fn cmd_scattering(ctx: &mut Ctx) -> Result<(), AppError> {
    let sol = solve_zero_energy(&ctx.cfg.potential, &ctx.cfg.grid.to_spec()).map_err(num_err)?;
    let a = match sol.kind {
        ProfileKind::ZeroEnergy { a } => a,
        _ => unreachable!(),
    };
    ctx.write_file("scattering_profile.csv", &sol.to_csv(&ctx.cfg.potential))?;
    #[derive(serde::Serialize)]
    struct Summary<'a> {
        potential: &'a bosegas::twobody::PotentialSpec,
        scattering_length: f64,
        grid_points: usize,
    }
    ctx.write_json(
        "scattering.json",
        &Summary {
            potential: &ctx.cfg.potential,
            scattering_length: a,
            grid_points: ctx.cfg.grid.points,
        },
    )?;
    ctx.note("a", format!("{a:.12}"));
    println!("scattering length a = {a:.9}");
    Ok(())
}

fn cmd_neumann(ctx: &mut Ctx) -> Result<(), AppError> {
    let kappa = ctx.cfg.neumann.kappa;
    let sol =
        solve_neumann_mode(&ctx.cfg.potential, kappa, &ctx.cfg.grid.to_spec()).map_err(num_err)?;
    let e0 = match sol.kind {
        ProfileKind::NeumannMode { e0, .. } => e0,
        _ => unreachable!(),
    };
    let bounds = check_profile_bounds(&sol).map_err(num_err)?;
    let a = scattering_length(ctx)?;
    let lower = 3.0 * a / kappa.powi(3);
    ctx.write_file("neumann_profile.csv", &sol.to_csv(&ctx.cfg.potential))?;
    #[derive(serde::Serialize)]
    struct Summary<'a> {
        potential: &'a bosegas::twobody::PotentialSpec,
        kappa: f64,
        e0: f64,
        lower_bound_3a_over_k3: f64,
        realized_upper_constant: f64,
        profile: bosegas::twobody::ProfileBounds,
    }
    ctx.write_json(
        "neumann.json",
        &Summary {
            potential: &ctx.cfg.potential,
            kappa,
            e0,
            lower_bound_3a_over_k3: lower,
            realized_upper_constant: (e0 / lower - 1.0) * kappa,
            profile: bounds,
        },
    )?;
    ctx.note("e0", format!("{e0:.12e}"));
    println!("e0({kappa}) = {e0:.9e}, 3a/k^3 = {lower:.9e}");
    Ok(())
}

fn cmd_scales(ctx: &mut Ctx) -> Result<(), AppError> {
    let s = ctx.scale_set()?;
    let h = s.hierarchy();
    let budget = error_budget(&s, None);
    let a = scattering_length(ctx)?;
    let hb = headline_bound(&s, a, ctx.cfg.scales.c0);
    println!("scale ledger at rho = {:.3e} (eta = {}):", s.rho, s.eta);
    println!("  l_minus1 = {:>12.5}   (ratio to R0      {:>9.3})", s.l_minus1, h.r0_to_lm1);
    println!("  l0       = {:>12.5}   (ratio to l_minus1 {:>8.3})", s.l0, h.lm1_to_l0);
    println!("  l1       = {:>12.5}   (ratio to l0      {:>9.3})", s.l1, h.l0_to_l1);
    println!("  l2       = {:>12.5}   (ratio to l1      {:>9.3}, h = {})", s.l2, h.l1_to_l2, s.h);
    println!("  epsilon  = {:>12.5}   hierarchy ok: {}", s.epsilon, h.ok);
    println!("  error terms at n = rho l1^3:");
    for (name, t) in budget.terms() {
        println!("    {name:<22} = {t:.6e}  (/epsilon {:.4})", t / s.epsilon);
    }
    println!(
        "  headline bound per particle = {:.6e} ({}; leading 4 pi a rho = {:.6e})",
        hb.bound_per_particle,
        if hb.vacuous { "vacuous" } else { "nontrivial" },
        hb.leading_order
    );
    let rows = scan(6..=30, ctx.cfg.scales.eta, ctx.cfg.scales.prefactors.to_prefactors(), ctx.cfg.scales.r0, a);
    let mut csv = String::from(
        "rho,epsilon,n_lm1cu_over_l1cu,n_l1sq_over_l0cu,n_l0sq_over_l1cu,nsq_logrho_over_l1,hierarchy_ok,temple_margin\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.rho, r.epsilon, r.terms[0], r.terms[1], r.terms[2], r.terms[3], r.hierarchy_ok, r.temple_margin
        );
    }
    ctx.write_file("scales_scan.csv", &csv)?;
    #[derive(serde::Serialize)]
    struct Summary {
        scales: ScaleSet,
        hierarchy: bosegas::scales::HierarchyReport,
        budget: bosegas::scales::ErrorBudget,
        headline: bosegas::scales::HeadlineBound,
        scattering_length: f64,
        previous_rate_crossover_rho: f64,
    }
    let crossover = bosegas::scales::previous_best_crossover();
    println!("  error-factor crossover with the rho^(1/17) rate at rho = {crossover:.3e}");
    ctx.write_json(
        "scales.json",
        &Summary {
            scales: s,
            hierarchy: h,
            budget,
            headline: hb,
            scattering_length: a,
            previous_rate_crossover_rho: crossover,
        },
    )?;
    Ok(())
}

fn cmd_cell_certificate(ctx: &mut Ctx) -> Result<(), AppError> {
    let s = ctx.scale_set()?;
    s.validate_cell_hierarchy().map_err(num_err)?;
    let thresholds = Thresholds::from_scales(&s).map_err(num_err)?;
    let side = 4.0 * s.l1;
    let cfg_particles = match &ctx.cfg.certificate.config_csv {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| AppError::Config(format!("cannot read {path}: {e}")))?;
            ParticleConfig::from_csv(&text).map_err(config_err)?
        }
        None => {
            let mut rng = substream(ctx.cfg.seed, Stream::Cli, 1);
            let n_env = ((side.powi(3) - s.l1.powi(3)) * s.rho).round() as usize;
            let mut cfg = ParticleConfig::random(side, n_env, &mut rng);
            // plant the requested number inside the cell at the origin
            let mut rng2 = substream(ctx.cfg.seed, Stream::Cli, 2);
            let inside = ParticleConfig::random(s.l1, ctx.cfg.certificate.n_particles, &mut rng2);
            cfg.positions.extend(inside.positions);
            cfg
        }
    };
    let nbrs = build_neighbors(&cfg_particles, thresholds);
    let table = NeumannTable::new(ctx.cfg.potential, ctx.cfg.grid.to_spec(), s.l_minus1);
    let bx = Box3::cube([0.0; 3], s.l1).map_err(num_err)?;
    let mc = McBudget {
        samples: ctx.cfg.mc.samples,
        seed: ctx.cfg.seed,
        strata_per_axis: ctx.cfg.mc.strata_per_axis,
    };
    let report = small_cell_certificate(
        &cfg_particles,
        &bx,
        &s,
        &nbrs,
        &table,
        &mc,
        ctx.cfg.certificate.c_apriori,
    )
    .map_err(num_err)?;
    println!(
        "cell certificate: regime {:?}, n = {}, coefficient = {:.4}, marginal = {}",
        report.regime, report.n, report.coefficient, report.marginal
    );
    ctx.write_json("cell_certificate.json", &report)?;
    ctx.write_file("cell_config.csv", &cfg_particles.to_csv())?;
    Ok(())
}

fn cmd_doubling_verify(ctx: &mut Ctx) -> Result<(), AppError> {
    let s = ctx.scale_set()?;
    let sched = DoublingSchedule::new(s.rho, s.eta, s.l1, ctx.cfg.doubling.h).map_err(num_err)?;
    sched.validate().map_err(num_err)?;
    let gaps = sched.gap_report();
    let mut margins_csv = String::from("s,n,margin\n");
    let mut merge_reports = Vec::new();
    let mut floor_reports = Vec::new();
    for step in 1..=sched.s_max() {
        let n_hi = (ctx.cfg.doubling.sweep_factor * sched.knee(step + 1)).floor() as u64;
        let rep = verify_merge_bound(&sched, step, n_hi);
        let fs = sched.profile(step);
        let fs1 = sched.profile(step + 1);
        for n in rep.n_lo..=rep.n_hi {
            let mut worst = f64::INFINITY;
            for m in 0..=n / 2 {
                worst = worst.min(fs.eval(m as f64) + fs.eval((n - m) as f64));
            }
            let _ = writeln!(margins_csv, "{step},{n},{}", worst - 0.5 * fs1.eval(n as f64));
        }
        merge_reports.push(rep);
        floor_reports.push(verify_randomized_floor(&sched, step).map_err(num_err)?);
    }
    let merge_violations: usize = merge_reports.iter().map(|r| r.violations.len()).sum();
    let floor_violations: usize = floor_reports.iter().map(|r| r.violations.len()).sum();
    println!(
        "doubling verify: {} merge counterexamples, {} floor counterexamples over s = 1..={}",
        merge_violations,
        floor_violations,
        sched.s_max()
    );
    ctx.write_file("doubling_margins.csv", &margins_csv)?;
    #[derive(serde::Serialize)]
    struct Summary {
        schedule: DoublingSchedule,
        knee_gaps: Vec<bosegas::doubling::GapRow>,
        merge: Vec<bosegas::doubling::MergeReport>,
        floor: Vec<bosegas::doubling::FloorReport>,
    }
    ctx.write_json(
        "doubling.json",
        &Summary { schedule: sched, knee_gaps: gaps, merge: merge_reports, floor: floor_reports },
    )?;
    Ok(())
}

fn cmd_oracle(ctx: &mut Ctx) -> Result<(), AppError> {
    let o = &ctx.cfg.oracle;
    let bc = match o.bc.as_str() {
        "periodic" => Bc::Periodic,
        "neumann" => Bc::Neumann,
        "dirichlet" => Bc::Dirichlet,
        other => return Err(AppError::Config(format!("unknown bc `{other}`"))),
    };
    let budget = SolverBudget::default();
    let gs = match o.reduction.as_str() {
        "relative-pair" => {
            let op = RelativePair::new(&ctx.cfg.potential, o.box_side, o.grid, bc)
                .map_err(num_err)?;
            ground_state(&op, &budget, true, ctx.cfg.seed).map_err(num_err)?
        }
        "full" => {
            let op = FewBody::new(&ctx.cfg.potential, o.n, o.box_side, o.grid, bc)
                .map_err(num_err)?;
            ground_state(&op, &budget, true, ctx.cfg.seed).map_err(num_err)?
        }
        other => return Err(AppError::Config(format!("unknown reduction `{other}`"))),
    };
    let mut csv = String::from("index,value\n");
    let _ = writeln!(csv, "0,{}", gs.e0);
    if let Some(e1) = gs.e1 {
        let _ = writeln!(csv, "1,{e1}");
    }
    ctx.write_file("oracle_eigen.csv", &csv)?;
    #[derive(serde::Serialize)]
    struct Meta<'a> {
        potential: &'a bosegas::twobody::PotentialSpec,
        reduction: &'a str,
        n: usize,
        grid: usize,
        bc: Bc,
        box_side: f64,
        e0: f64,
        e1: Option<f64>,
        residual: f64,
        e1_residual: f64,
        iterations: usize,
    }
    ctx.write_json(
        "oracle.json",
        &Meta {
            potential: &ctx.cfg.potential,
            reduction: &o.reduction,
            n: o.n,
            grid: o.grid,
            bc,
            box_side: o.box_side,
            e0: gs.e0,
            e1: gs.e1,
            residual: gs.residual,
            e1_residual: gs.e1_residual,
            iterations: gs.iterations,
        },
    )?;
    println!("oracle E0 = {:.9e} (residual {:.2e})", gs.e0, gs.residual);
    Ok(())
}

fn cmd_report_all(ctx: &mut Ctx) -> Result<bool, AppError> {
    let results = bosegas::acceptance::run_all(ctx.cfg.seed);
    for r in &results {
        println!("{}", r.line());
    }
    let all_passed = results.iter().all(|r| r.passed);
    ctx.write_json("acceptance.json", &results)?;
    ctx.note("criteria_passed", results.iter().filter(|r| r.passed).count());
    ctx.note("criteria_total", results.len());
    Ok(all_passed)
}

fn run() -> Result<bool, AppError> {
    let cli = Cli::parse();
    let mut ctx = Ctx::load(&cli)?;
    let (name, ok) = match cli.command {
        Command::Scattering => {
            cmd_scattering(&mut ctx)?;
            ("scattering", true)
        }
        Command::Neumann => {
            cmd_neumann(&mut ctx)?;
            ("neumann", true)
        }
        Command::Scales => {
            cmd_scales(&mut ctx)?;
            ("scales", true)
        }
        Command::CellCertificate => {
            cmd_cell_certificate(&mut ctx)?;
            ("cell-certificate", true)
        }
        Command::DoublingVerify => {
            cmd_doubling_verify(&mut ctx)?;
            ("doubling-verify", true)
        }
        Command::Oracle => {
            cmd_oracle(&mut ctx)?;
            ("oracle", true)
        }
        Command::ReportAll => {
            let ok = cmd_report_all(&mut ctx)?;
            ("report-all", ok)
        }
    };
    ctx.write_manifest(name)?;
    Ok(ok)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e @ AppError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e @ AppError::Numerical(_)) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}
