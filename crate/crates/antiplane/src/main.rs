//! Command-line driver: model verification, seeding, branch runs, the
//! transversal limit problem, snapshot diagnostics, and the reduced ODE.
//!
//! Exit codes: 0 success, 2 validation failure, 3 solver non-convergence,
//! 4 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use antiplane::continuation::run_branch;
use antiplane::diagnostics::compute_diagnostics;
use antiplane::error::Error;
use antiplane::io::{
    read_solution, write_branch, write_branch_point, write_solution, RunMetadata,
};
use antiplane::newton::newton_fixed_lambda;
use antiplane::reduced_ode::{closed_form_orbit, integrate_planar, planar_energy};
use antiplane::transversal::{compare_center_profile, front_identity, limiting_profile};
use antiplane::{parse_config, RunConfig};

#[derive(Parser)]
#[command(
    name = "antiplane",
    about = "Continuation of anti-plane shear equilibria on a truncated strip",
    version
)]
struct Cli {
    /// Run configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configured one)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Per-step progress on stderr
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural hypotheses of the configured model and load
    VerifyModel,
    /// Build the asymptotic seed, correct it at fixed lambda, and snapshot it
    Seed,
    /// Trace the branch; writes branch.csv and final.json
    Run,
    /// Solve the x-independent transversal problem at a given loading
    LimitProfile {
        #[arg(long)]
        lambda: f64,
        /// Initial guess for the centerline value U(0)
        #[arg(long, default_value_t = 1.0)]
        mu_init: f64,
    },
    /// Recompute diagnostics for a stored solution snapshot
    Diagnose { solution: PathBuf },
    /// Integrate the reduced planar system from its closed-form orbit
    ReduceOde {
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        x_start: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_class(&e))
        }
    }
}

fn exit_class(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Format { .. } => 4,
        Error::NonConvergence { .. }
        | Error::StepTooLarge { .. }
        | Error::SingularSystem { .. }
        | Error::EllipticityExceeded { .. }
        | Error::Divergence { .. }
        | Error::NoTransversalState { .. } => 3,
        _ => 2,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let path = cli.config.as_deref().ok_or_else(|| {
        Error::ConfigValidation(vec!["--config <path> is required for this command".into()])
    })?;
    let mut cfg = parse_config(path)?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.continuation.verbose = cli.verbose;
    cfg.continuation.newton.verbose = false;
    Ok(cfg)
}

fn ensure_out_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn metadata(cfg: &RunConfig, termination: Option<String>) -> RunMetadata {
    RunMetadata {
        seed_epsilon: cfg.seed.epsilon,
        seed_alpha: cfg.seed.alpha,
        local_theory_amplitude: cfg.seed.alpha / 2.0_f64.sqrt(),
        termination,
    }
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::VerifyModel => {
            // parse_config already runs the sweep and rejects violations
            let cfg = load_config(cli)?;
            let report = &cfg.hypothesis_report;
            println!("hypotheses: passed");
            if let Some(xi1) = report.xi1 {
                println!("xi1 (sampled margin floor) = {xi1:.12}");
            }
            if let Some(q1) = report.q1 {
                println!("q1 (ellipticity-loss shear) = {q1:.12}");
            }
            Ok(())
        }
        Command::Seed => {
            let cfg = load_config(cli)?;
            ensure_out_dir(&cfg.out_dir)?;
            let seed_field = antiplane::homoclinic_seed(&cfg.seed, &cfg.grid);
            let (field, report) =
                newton_fixed_lambda(&seed_field, &cfg.model, &cfg.force, &cfg.continuation.newton)?;
            let diag = compute_diagnostics(
                &field,
                &cfg.model,
                &cfg.force,
                cfg.continuation.sigma,
                Some(report.residual),
            )?;
            let path = cfg.out_dir.join("seed.json");
            write_solution(&field, &diag, &metadata(&cfg, None), &path)?;
            println!(
                "seed converged in {} iterations: lambda = {:.6}, amplitude = {:.6}, width = {:.3}",
                report.iterations, field.lambda, diag.amplitude, diag.width_half
            );
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Run => {
            let cfg = load_config(cli)?;
            ensure_out_dir(&cfg.out_dir)?;
            let branch = run_branch(&cfg.continuation, &cfg.model, &cfg.force, &cfg.grid, &cfg.seed)?;

            // front oracle at the final loading for broadening runs
            let mut last = branch.points.last().cloned().expect("nonempty branch");
            if cfg.continuation.width_stop.is_some() {
                let profile = limiting_profile(
                    &cfg.model,
                    &cfg.force,
                    last.field.lambda,
                    last.diagnostics.amplitude.max(1e-3),
                    last.field.grid.ny,
                );
                if let Ok(profile) = profile {
                    last.diagnostics.front_gap =
                        compare_center_profile(&last.field, &profile).ok();
                }
            }

            let csv = cfg.out_dir.join("branch.csv");
            write_branch(&branch, &csv)?;
            let json = cfg.out_dir.join("final.json");
            let meta = metadata(&cfg, Some(branch.termination.as_str().to_string()));
            write_branch_point(&last, &meta, &json)?;
            println!(
                "branch: {} points, termination = {}, {} extensions, {} nodal rejections",
                branch.points.len(),
                branch.termination.as_str(),
                branch.extensions,
                branch.nodal_rejections.len()
            );
            let d = &last.diagnostics;
            println!(
                "final point: lambda = {:.6}, amplitude = {:.6}, width = {:.3}, e_min = {:.6}{}",
                last.field.lambda,
                d.amplitude,
                d.width_half,
                d.e_min,
                d.front_gap
                    .map(|g| format!(", front gap = {g:.4}"))
                    .unwrap_or_default()
            );
            println!("wrote {} and {}", csv.display(), json.display());
            Ok(())
        }
        Command::LimitProfile { lambda, mu_init } => {
            let cfg = load_config(cli)?;
            ensure_out_dir(&cfg.out_dir)?;
            let profile =
                limiting_profile(&cfg.model, &cfg.force, *lambda, *mu_init, cfg.grid.ny)?;
            let energy = front_identity(&profile, &cfg.model, &cfg.force);
            println!(
                "transversal state at lambda = {lambda}: mu = {:.8}, front energy = {:.6e}{}",
                profile.mu,
                energy,
                if profile.trivial { " (trivial)" } else { "" }
            );
            let path = cfg.out_dir.join("profile.json");
            let doc = serde_json::json!({
                "profile": &profile,
                "front_identity": energy,
            });
            std::fs::write(&path, format!("{:#}\n", doc)).map_err(|e| Error::io(&path, e))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Diagnose { solution } => {
            let cfg = load_config(cli)?;
            let doc = read_solution(solution)?;
            let field = doc.field();
            field.validate()?;
            let diag = compute_diagnostics(
                &field,
                &cfg.model,
                &cfg.force,
                cfg.continuation.sigma,
                None,
            )?;
            let text = serde_json::to_string_pretty(&diag).map_err(|e| Error::Format {
                path: solution.clone(),
                message: e.to_string(),
            })?;
            println!("{text}");
            Ok(())
        }
        Command::ReduceOde {
            k,
            x_start,
            x_end,
            h,
        } => {
            let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            ensure_out_dir(&out_dir)?;
            let start = closed_form_orbit(*x_start, *k);
            let trajectory = integrate_planar(&start, *k, *x_end, *h)?;
            let end = trajectory.last().unwrap();
            let target = closed_form_orbit(*x_end, *k);
            let err = ((end.v - target.v).powi(2) + (end.w - target.w).powi(2)).sqrt();
            let drift = trajectory
                .iter()
                .map(|s| (planar_energy(s, *k) - planar_energy(&start, *k)).abs())
                .fold(0.0_f64, f64::max);
            let path = out_dir.join("planar.csv");
            let mut text = String::from("X,V,W,E\n");
            for s in &trajectory {
                text.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    s.x,
                    s.v,
                    s.w,
                    planar_energy(s, *k)
                ));
            }
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            println!(
                "integrated {} steps: endpoint error vs closed form = {err:.3e}, energy drift = {drift:.3e}",
                trajectory.len() - 1
            );
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}
