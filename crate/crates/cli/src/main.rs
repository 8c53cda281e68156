use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use seqrpf::rpf::{solve_rpf, RpfOptions};
use seqrpf::transfer_op::io::write_csv;
use seqrpf::transfer_op::GridFunction;
use seqrpf_cli::cache::Cache;
use seqrpf_cli::pipeline::write_stage_files;
use seqrpf_cli::report::{json_text, num, Overall, StageReport, SCHEMA_VERSION};
use seqrpf_cli::stages::{self, StageOutput};
use seqrpf_cli::{run_pipeline, CliError, CliResult, RunConfig, Stage};

#[derive(Parser)]
#[command(name = "seqrpf", version, about = "Sequential RPF triplets, cone checks and limit-law tests")]
struct Cli {
    /// TOML run configuration; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid size N (overrides `grid.n`).
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Ignore cached results.
    #[arg(long, global = true)]
    force: bool,
    /// Print JSON instead of key=value lines.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample inverse-branch contraction ratios of every distinct map.
    VerifyPairing {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Compute the contraction parameter s; exits 2 if s ≥ 1.
    CheckS,
    /// Triplet solver.
    Rpf {
        #[command(subcommand)]
        action: RpfAction,
    },
    /// Cone hypotheses.
    Cones {
        #[command(subcommand)]
        action: ConesAction,
    },
    /// Pressure, covariance, norm decay and stability scans.
    Spectral {
        #[command(subcommand)]
        action: SpectralAction,
    },
    /// Simulate Birkhoff sums and write them per replica.
    Simulate,
    /// Berry–Esseen, LIL, condition (H) and MDP checks on simulated sums.
    LimitTests,
    /// Run several stages with caching and a summary report.
    Pipeline {
        /// Comma-separated stages; all of them when omitted.
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<String>>,
        /// Validate the configuration and write an empty summary.
        #[arg(long)]
        validate_only: bool,
    },
    /// Print the effective configuration as TOML.
    ShowConfig,
}

#[derive(Subcommand)]
enum RpfAction {
    /// Solve one triplet and write h.csv, nu.csv and lambda.json.
    Solve {
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        fiber: i64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        z_re: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        z_im: f64,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Residual, conformality, convergence and correlation checks.
    Check,
}

#[derive(Subcommand)]
enum ConesAction {
    Verify {
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        triples: Option<usize>,
    },
}

#[derive(Subcommand)]
enum SpectralAction {
    Pressure,
    Variance,
    NormDecay,
    Stability,
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.grid {
        cfg.grid.n = n;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    Ok(cfg)
}

fn print_report(report: &StageReport, json: bool) {
    if json {
        print!("{}", json_text(report));
        return;
    }
    for c in &report.checks {
        let opt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "-".into());
        println!(
            "{}.{}={} value={} bound={}",
            report.stage,
            c.name,
            if c.passed { "pass" } else { "fail" },
            opt(c.value),
            opt(c.bound)
        );
    }
    println!("{}.overall={}", report.stage, if report.passed() { "pass" } else { "fail" });
}

/// Validate, write the stage's files, print it and map pass/fail to 0/2.
fn finish(cfg: &RunConfig, out: StageOutput, json: bool) -> CliResult<i32> {
    write_stage_files(&cfg.output.dir, &out)?;
    print_report(&out.report, json);
    Ok(if out.report.passed() { 0 } else { 2 })
}

fn solve(cfg: &RunConfig, fiber: i64, z: Complex64, json: bool) -> CliResult<i32> {
    let tr = cfg.transfer().map_err(|e| CliError::from_core(stages::RPF, e))?;
    let z = vec![z; tr.dim()];
    let t = solve_rpf(&tr, fiber, &z, &RpfOptions::default().with_depth(cfg.grid.depth))
        .map_err(|e| CliError::from_core(stages::RPF, e))?;
    let csv = |g: &GridFunction| -> CliResult<String> {
        let mut buf = Vec::new();
        write_csv(&mut buf, std::slice::from_ref(g), tr.alpha()).map_err(|e| CliError::from_core(stages::RPF, e))?;
        let text = String::from_utf8(buf).expect("csv is utf-8");
        Ok(format!("# schema={SCHEMA_VERSION}{}", text.trim_start_matches('#')))
    };
    let nu = GridFunction::new(fiber, tr.grid(), t.nu.clone()).map_err(|e| CliError::from_core(stages::RPF, e))?;
    #[derive(serde::Serialize)]
    struct Lambda {
        fiber: i64,
        z: Vec<Complex64>,
        lambda_re: f64,
        lambda_im: f64,
        residuals: seqrpf::rpf::Residuals,
    }
    let doc = json_text(&Lambda {
        fiber,
        z: t.z.clone(),
        lambda_re: t.lambda.re,
        lambda_im: t.lambda.im,
        residuals: t.residuals,
    });
    let mut out = StageOutput::default();
    out.report.stage = "rpf_solve".into();
    out.files = vec![("h.csv".into(), csv(&t.h)?), ("nu.csv".into(), csv(&nu)?), ("lambda.json".into(), doc.clone())];
    write_stage_files(&cfg.output.dir, &out)?;
    if json {
        print!("{doc}");
    } else {
        println!(
            "fiber={fiber}\nlambda_re={}\nlambda_im={}\nresidual={}",
            num(t.lambda.re),
            num(t.lambda.im),
            num(t.residuals.max())
        );
    }
    Ok(0)
}

fn run(cli: Cli) -> CliResult<i32> {
    let mut cfg = load_config(&cli)?;
    let json = cli.json;
    let cache = Cache::new(&cfg.output.dir, cli.force);
    match cli.command {
        Command::ShowConfig => {
            cfg.validate()?;
            print!("{}", cfg.to_toml()?);
            Ok(0)
        }
        Command::VerifyPairing { samples } => {
            if let Some(s) = samples {
                cfg.pairing.samples = s;
            }
            cfg.validate()?;
            finish(&cfg, stages::pairing(&cfg)?, json)
        }
        Command::CheckS => {
            cfg.validate()?;
            finish(&cfg, stages::s_check(&cfg)?, json)
        }
        Command::Rpf { action: RpfAction::Solve { fiber, z_re, z_im, depth } } => {
            if let Some(d) = depth {
                cfg.grid.depth = d;
            }
            cfg.validate()?;
            solve(&cfg, fiber, Complex64::new(z_re, z_im), json)
        }
        Command::Rpf { action: RpfAction::Check } => {
            cfg.validate()?;
            let g = stages::gibbs(&cfg, &cache)?;
            finish(&cfg, stages::rpf(&cfg, &g)?, json)
        }
        Command::Cones { action: ConesAction::Verify { kappa, samples, triples } } => {
            cfg.cones.kappa = kappa.or(cfg.cones.kappa);
            if let Some(s) = samples {
                cfg.cones.samples = s;
            }
            if let Some(t) = triples {
                cfg.cones.triples = t;
            }
            cfg.validate()?;
            let g = stages::gibbs(&cfg, &cache)?;
            let out = stages::cones(&cfg, &g)?;
            if json {
                write_stage_files(&cfg.output.dir, &out)?;
                let doc = out.files.iter().find(|(n, _)| n == "cones.json").map(|(_, t)| t.as_str()).unwrap_or("");
                print!("{doc}");
                Ok(if out.report.passed() { 0 } else { 2 })
            } else {
                finish(&cfg, out, false)
            }
        }
        Command::Spectral { action } => {
            cfg.validate()?;
            let g = stages::gibbs(&cfg, &cache)?;
            let mut out = StageOutput::default();
            out.report.stage = stages::SPECTRAL.into();
            match action {
                SpectralAction::Pressure => stages::pressure(&cfg, &g, &mut out)?,
                SpectralAction::Variance => stages::variance(&cfg, &g, &mut out)?,
                SpectralAction::NormDecay => stages::norm_decay(&cfg, &g, &mut out)?,
                SpectralAction::Stability => {
                    if cfg.spectral.beta_sweep.is_empty() {
                        return Err(CliError::Usage("spectral.beta_sweep is empty".into()));
                    }
                    stages::stability(&cfg, &g, &cache, &mut out)?
                }
            }
            out.report.artifacts = out.files.iter().map(|(n, _)| n.clone()).collect();
            finish(&cfg, out, json)
        }
        Command::Simulate => {
            cfg.validate()?;
            let g = stages::gibbs(&cfg, &cache)?;
            let (sums, _) = stages::simulate_sums(&cfg, &g)?;
            let mut out = StageOutput::default();
            out.report.stage = stages::SIMULATE.into();
            out.files.push(("sums.csv".into(), stages::sums_csv(&sums, &cfg.direction())));
            write_stage_files(&cfg.output.dir, &out)?;
            println!("replicas={}\nrungs={}", sums.replicas, sums.ladder.len());
            Ok(0)
        }
        Command::LimitTests => {
            cfg.validate()?;
            let g = stages::gibbs(&cfg, &cache)?;
            finish(&cfg, stages::limit_tests(&cfg, &g)?, json)
        }
        Command::Pipeline { stages, validate_only } => {
            let list: Vec<Stage> = if validate_only {
                Vec::new()
            } else {
                match stages {
                    Some(names) => names.iter().map(|s| s.parse()).collect::<CliResult<_>>()?,
                    None => Stage::ALL.to_vec(),
                }
            };
            let outcome = run_pipeline(&cfg, &list, cli.force)?;
            if json {
                print!("{}", std::fs::read_to_string(cfg.output.dir.join(seqrpf_cli::report::SUMMARY_FILE))?);
            } else {
                for s in &outcome.summary.stages {
                    print_report(s, false);
                }
                let overall = if outcome.summary.overall == Overall::Pass { "pass" } else { "fail" };
                println!(
                    "overall={overall}\nchecks={}\nfailed={}",
                    outcome.summary.checks_total, outcome.summary.checks_failed
                );
            }
            Ok(outcome.exit_code)
        }
    }
}

fn main() -> ExitCode {
    // clap would exit with 2 on bad flags; that code means a failed check here.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
