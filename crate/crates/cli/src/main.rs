use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use supermap::experiments::{sweep, SweepSpec};
use supermap::io::{
    read_json, state_from_json, write_json, BuildJson, ChannelJson, MatrixJson, SolverJson, SuperchannelJson,
};
use supermap::retrodiction::{naive_v_counterexample, petz, verify_properties};
use supermap::supermaps::s4;
use supermap::vsolver::{solve_with, SolverConfig, StepRule};
use supermap::{Family, Result, RetrodictionBuild};

#[derive(Parser)]
#[command(name = "supermap", version, about = "Retrodiction of quantum channels and superchannels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a channel file holds a CPTP map. Exits 1 if it does not.
    ValidateChannel {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Check that a supermap file holds a superchannel. Exits 1 if it does not.
    ValidateSupermap {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Write the prior channel of a family.
    Prior {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Petz recovery map of a channel for a prior state.
    Petz {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form retrodiction builds for the partial trace.
    #[command(subcommand)]
    Retro(RetroCommand),
    /// Show that V = 1 fails for the identity family at p = 1/2.
    #[command(name = "appendix-a")]
    NaiveCounterexample {
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Search numerically for the co-isometry V of a prior.
    SolveV(SolveArgs),
    /// Average recovery fidelities over a grid of prior and true noise.
    Sweep {
        #[arg(long)]
        prior_family: Family,
        #[arg(long)]
        true_family: Family,
        /// Points per axis, evenly spaced in [0.05, 1].
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum RetroCommand {
    /// Write the closed-form build of a family at noise p.
    Build {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report the retrodiction properties of a build. Exits 1 if one fails.
    Verify {
        #[arg(long)]
        build: PathBuf,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    prior: PathBuf,
    /// Output system to trace out; defaults to the last one.
    #[arg(long)]
    traced: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 400)]
    max_iters: usize,
    /// Use backtracking gradient descent instead of Levenberg-Marquardt.
    #[arg(long)]
    gradient_descent: bool,
    #[arg(long)]
    out: PathBuf,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn verdict(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::ValidateChannel { input } => {
            let ch = read_json::<ChannelJson>(&input)?.to_channel_unchecked()?;
            let report = ch.validate();
            print_json(&report)?;
            Ok(verdict(report.valid))
        }
        Command::ValidateSupermap { input } => {
            let s = read_json::<SuperchannelJson>(&input)?.to_superchannel_unchecked()?;
            let report = s.validate();
            print_json(&report)?;
            Ok(verdict(report.valid))
        }
        Command::Prior { family, p, out } => {
            write_json(&out, &ChannelJson::from_channel(&family.prior(p)?))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Petz { channel, prior, out } => {
            let e = read_json::<ChannelJson>(&channel)?.to_channel()?;
            let gamma = state_from_json(&read_json::<MatrixJson>(&prior)?)?;
            let r = petz(&e, &gamma)?;
            write_json(&out, &ChannelJson::from_channel(&r))?;
            print_json(&r.validate())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Retro(RetroCommand::Build { family, p, out }) => {
            let (_, build) = RetrodictionBuild::for_family(family, p)?;
            write_json(&out, &BuildJson::from_build(&build)?)?;
            print_json(&build.validity)?;
            Ok(verdict(build.validity.valid))
        }
        Command::Retro(RetroCommand::Verify { build }) => {
            let (r, build) = read_json::<BuildJson>(&build)?.to_build()?;
            let out = build.prior.out_dims();
            let s = s4(build.prior.in_dims(), &out.without(&build.traced)?, &out.select(&build.traced)?)?;
            let report = verify_properties(&r, &s, &build.prior)?;
            print_json(&report)?;
            Ok(verdict(report.property1 && report.property2 && report.property3 != Some(false)))
        }
        Command::NaiveCounterexample { json } => {
            let a = naive_v_counterexample()?;
            if json {
                #[derive(Serialize)]
                struct Out<'a> {
                    basis: [&'a str; 3],
                    marginal: Vec<Vec<[f64; 2]>>,
                    report: &'a supermap::supermaps::SuperchannelReport,
                    valid: bool,
                }
                let m = &a.marginal;
                let marginal = (0..m.nrows()).map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect()).collect();
                print_json(&Out { basis: ["Xr", "X", "Z"], marginal, report: &a.report, valid: a.report.valid })?;
            } else {
                println!("Tr_(Zr Ar) of the supermap Choi operator, basis (Xr, X, Z):");
                for i in 0..a.marginal.nrows() {
                    let row: Vec<String> = a
                        .marginal
                        .row(i)
                        .iter()
                        .map(|z| if z.re.abs() < 5e-7 { format!("{:>9.6}", 0.0) } else { format!("{:>9.6}", z.re) })
                        .collect();
                    println!("  {}", row.join(" "));
                }
                println!("condition 1 residual: {:.6e}", a.report.condition1_residual);
                println!("condition 2 residual: {:.6e}", a.report.condition2_residual);
                println!("min eigenvalue:       {:.6e}", a.report.min_eigenvalue);
                println!("verdict: {}", if a.report.valid { "superchannel" } else { "rejected, not a superchannel" });
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SolveV(args) => {
            let prior = read_json::<ChannelJson>(&args.prior)?.to_channel()?;
            let traced = match args.traced {
                Some(t) => t,
                None => prior
                    .out_dims()
                    .labels()
                    .last()
                    .cloned()
                    .ok_or_else(|| supermap::Error::MissingInput("prior has no output".into()))?,
            };
            let r_dim = prior.out_dims().dim_of(&traced)?;
            let cfg = SolverConfig {
                seed: args.seed,
                max_iters: args.max_iters,
                tol: args.tol,
                restarts: args.restarts,
                step_rule: if args.gradient_descent {
                    StepRule::GradientDescent { initial_step: 0.1 }
                } else {
                    StepRule::LevenbergMarquardt
                },
            };
            let res = solve_with(&prior, &[&traced], r_dim, &cfg)?;
            let json = SolverJson::new(&prior, &[&traced], &cfg, &res)?;
            write_json(&args.out, &json)?;
            println!(
                "converged: {}, residual: {:e}, restart: {}, iterations: {}",
                res.converged, res.residual, res.restart, res.iterations
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { prior_family, true_family, grid, out } => {
            let result = sweep(&SweepSpec::square(prior_family, true_family, grid))?;
            result.write_csv(&out)?;
            println!("wrote {} rows to {}", result.rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
