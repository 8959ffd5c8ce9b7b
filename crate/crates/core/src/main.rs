use std::path::PathBuf;
use std::process::ExitCode;

use asclt_lab::harness::{
    conjecture_probe, emit_reports, evaluate, identity_verdict, moment_table, oracle_verdict, run_experiment,
    ExperimentConfig,
};
use asclt_lab::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asclt-lab", version, about = "Almost-sure CLT moment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment, write its reports and check the applicable criteria.
    Simulate(RunArgs),
    /// Exact identity and dense-oracle suites on small instances.
    Verify {
        #[arg(long, env = "ASCLT_LAB_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the pooled moment convergence table.
    AscltReport(RunArgs),
    /// Run the heterogeneous-growth probe; reports statistics only.
    ProbeConjecture(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, env = "ASCLT_LAB_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replications: Option<u32>,
    #[arg(long)]
    steps: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        if let Some(r) = self.replications {
            cfg.replications = r;
        }
        if let Some(n) = self.steps {
            cfg.n_steps = n;
            if cfg.checkpoints.as_ref().is_some_and(|c| c.last().is_some_and(|&l| l > n)) {
                cfg.checkpoints = None;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> Option<PathBuf> {
        self.out.clone().or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::Unstable { .. } | Error::UnsupportedDimension(_)
    )
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.load()?;
            let report = run_experiment(&cfg)?;
            let verdicts = evaluate(&report);
            for v in &verdicts {
                println!("{}", v.line());
            }
            for r in report.failed() {
                eprintln!("replication {} failed: {}", r.replication, r.error.as_deref().unwrap_or(""));
            }
            if let Some(dir) = args.out_dir(&cfg) {
                emit_reports(&report, &verdicts, &dir)?;
                println!("reports written to {}", dir.display());
            }
            Ok(verdicts.iter().all(|v| v.passed) && report.failed().next().is_none())
        }
        Command::Verify { seed, out } => {
            let (v1, s1) = identity_verdict(seed)?;
            let (v2, s2) = oracle_verdict(seed)?;
            for s in s1.iter().chain(&s2) {
                println!("{} d={} steps={} worst {:.3e}", s.name, s.d, s.steps, s.worst());
            }
            println!("{}\n{}", v1.line(), v2.line());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let body = serde_json::json!({ "verdicts": [&v1, &v2], "suites": s1.iter().chain(&s2).collect::<Vec<_>>() });
                std::fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&body)?)?;
            }
            Ok(v1.passed && v2.passed)
        }
        Command::AscltReport(args) => {
            let cfg = args.load()?;
            let report = run_experiment(&cfg)?;
            print!("{}", moment_table(&report));
            let verdicts = evaluate(&report);
            if let Some(dir) = args.out_dir(&cfg) {
                emit_reports(&report, &verdicts, &dir)?;
            }
            Ok(verdicts.iter().all(|v| v.passed))
        }
        Command::ProbeConjecture(args) => {
            let cfg = args.load()?;
            let probe = conjecture_probe(&cfg)?;
            println!("replication,n,p,avg_fV,avg_ap,max_avg_fV,max_avg_ap");
            for r in &probe.rows {
                println!(
                    "{},{},{},{},{},{},{}",
                    r.replication, r.n, r.p, r.avg_fv, r.avg_ap, r.max_avg_fv, r.max_avg_ap
                );
            }
            if let Some(dir) = args.out_dir(&cfg) {
                emit_reports(&probe.run, &[], &dir)?;
            }
            Ok(probe.all_finite)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
