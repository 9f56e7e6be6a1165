use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wmst::harness::{run_estimation_study, run_sweep, run_test_study, THREADS_ENV};
use wmst::io::{self as wio, RunManifest, StudyKind};
use wmst::report::{self, bcos_tests, BCOS_TAU1_RULE};
use wmst::{EstimationMethod, Imputation, Observation, Tau1Policy, Tau1Rule, TestSpec, WmstError};

#[derive(Parser)]
#[command(name = "wmst", version, about = "Window mean survival time for interval-censored two-arm data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-arm WMST estimates from a dataset CSV (`arm,left,right`).
    Estimate(EstimateArgs),
    /// Two-sample tests on a dataset CSV.
    Test(TestArgs),
    /// Run a simulation study described by a JSON config.
    Simulate(SimulateArgs),
    /// Analyse the bundled breast cosmesis data.
    Bcos(BcosArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    LastObserved,
    LastEvent,
}

impl From<RuleArg> for Tau1Rule {
    fn from(r: RuleArg) -> Tau1Rule {
        match r {
            RuleArg::LastObserved => Tau1Rule::LastObserved,
            RuleArg::LastEvent => Tau1Rule::LastEvent,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ImputeArg {
    Midpoint,
    RightPoint,
}

impl From<ImputeArg> for Imputation {
    fn from(i: ImputeArg) -> Imputation {
        match i {
            ImputeArg::Midpoint => Imputation::Midpoint,
            ImputeArg::RightPoint => Imputation::RightPoint,
        }
    }
}

#[derive(Clone, Copy)]
enum Tau1Arg {
    Auto,
    At(f64),
}

fn parse_tau1(s: &str) -> Result<Tau1Arg, String> {
    if s == "auto" {
        return Ok(Tau1Arg::Auto);
    }
    match s.parse::<f64>() {
        Ok(t) if t.is_finite() && t > 0.0 => Ok(Tau1Arg::At(t)),
        _ => Err(format!("expected a positive number or `auto`, got `{s}`")),
    }
}

#[derive(Args)]
struct WindowArgs {
    /// Window starts, comma separated.
    #[arg(long, value_delimiter = ',')]
    tau0: Vec<f64>,
    /// Window end, or `auto` for the smaller of the two arms' largest times.
    #[arg(long, default_value = "auto", value_parser = parse_tau1)]
    tau1: Tau1Arg,
    /// Which times `--tau1 auto` looks at.
    #[arg(long, value_enum)]
    tau1_rule: Option<RuleArg>,
}

impl WindowArgs {
    fn policy(&self, default_rule: Tau1Rule) -> Tau1Policy {
        match self.tau1 {
            Tau1Arg::At(value) => Tau1Policy::Fixed { value },
            Tau1Arg::Auto => Tau1Policy::Data { rule: self.tau1_rule.map_or(default_rule, Into::into), cap: None },
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    data: PathBuf,
    #[arg(long, default_value = "midpoint-km")]
    method: EstimationMethod,
    #[command(flatten)]
    window: WindowArgs,
    /// Write estimates.csv and one curve CSV per arm here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestOpts {
    /// rmst, wmst, wmst:<tau0>, logrank, fh:<p>:<q>; bare `wmst` expands over --tau0.
    #[arg(long, value_delimiter = ',')]
    tests: Vec<String>,
    #[arg(long, value_enum, default_value = "midpoint")]
    imputation: ImputeArg,
    #[command(flatten)]
    window: WindowArgs,
    /// Write tests.csv here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    data: PathBuf,
    #[command(flatten)]
    opts: TestOpts,
}

#[derive(Args)]
struct BcosArgs {
    #[command(flatten)]
    opts: TestOpts,
    /// Also write the dataset itself as CSV.
    #[arg(long)]
    dump_data: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker cap; overrides the environment.
    #[arg(long)]
    threads: Option<usize>,
    /// Write results.csv and manifest.json here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn expand_tests(raw: &[String], tau0s: &[f64]) -> wmst::Result<Vec<TestSpec>> {
    let mut out = Vec::new();
    for t in raw {
        if t.trim() == "wmst" {
            if tau0s.is_empty() {
                return Err(WmstError::Parse("bare `wmst` needs --tau0".into()));
            }
            out.extend(tau0s.iter().map(|&tau0| TestSpec::Wmst { tau0 }));
        } else {
            out.push(t.parse()?);
        }
    }
    Ok(out)
}

fn create(dir: &Path, name: &str) -> wmst::Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).map_err(|e| WmstError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| WmstError::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn emit(out: Option<&Path>, name: &str, write: impl FnOnce(&mut dyn Write) -> wmst::Result<()>) -> wmst::Result<()> {
    match out {
        Some(dir) => {
            let mut w = create(dir, name)?;
            write(&mut w)?;
            w.flush()?;
        }
        None => write(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> wmst::Result<()> {
    let data = wio::read_dataset(&args.data)?;
    let tau0s = if args.window.tau0.is_empty() { vec![0.0] } else { args.window.tau0.clone() };
    let rows = report::estimate_arms(&data, args.method, &tau0s, args.window.policy(Tau1Rule::LastObserved))?;
    emit(args.out.as_deref(), "estimates.csv", |w| report::write_csv(w, &rows))?;
    if let Some(dir) = &args.out {
        for arm in [wmst::Arm::Control, wmst::Arm::Treatment] {
            let d: Vec<Observation> = data.iter().filter(|o| o.arm == arm).copied().collect();
            if d.is_empty() {
                continue;
            }
            let fit = wmst::harness::fit_method(&d, args.method)?;
            let mut w = create(dir, &format!("curve-arm{}.csv", arm.index()))?;
            wio::write_curve(&mut w, &fit.curve)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn run_tests(data: &[Observation], opts: &TestOpts, defaults: &[TestSpec], rule: Tau1Rule) -> wmst::Result<()> {
    let tests = if opts.tests.is_empty() {
        defaults.to_vec()
    } else {
        expand_tests(&opts.tests, &opts.window.tau0)?
    };
    let analysis = report::analyze(data, opts.imputation.into(), &tests, opts.window.policy(rule))?;
    eprintln!("tau1 = {}", analysis.tau1);
    emit(opts.out.as_deref(), "tests.csv", |w| report::write_csv(w, &analysis.rows))
}

fn default_battery(tau0s: &[f64]) -> Vec<TestSpec> {
    let mut t = vec![TestSpec::Rmst];
    t.extend(tau0s.iter().map(|&tau0| TestSpec::Wmst { tau0 }));
    t.extend([TestSpec::Logrank, TestSpec::Fh { p: 0.0, q: 1.0 }]);
    t
}

fn test(args: TestArgs) -> wmst::Result<()> {
    let data = wio::read_dataset(&args.data)?;
    let defaults = default_battery(&args.opts.window.tau0);
    run_tests(&data, &args.opts, &defaults, Tau1Rule::LastObserved)
}

fn bcos(args: BcosArgs) -> wmst::Result<()> {
    let data = wio::load_bcos();
    if let Some(path) = &args.dump_data {
        let f = File::create(path).map_err(|e| WmstError::Io(format!("{}: {e}", path.display())))?;
        wio::write_dataset(BufWriter::new(f), &data)?;
    }
    let defaults = if args.opts.window.tau0.is_empty() {
        bcos_tests()
    } else {
        default_battery(&args.opts.window.tau0)
    };
    run_tests(&data, &args.opts, &defaults, BCOS_TAU1_RULE)
}

fn simulate(args: SimulateArgs) -> wmst::Result<()> {
    let mut file = wio::read_config(&args.config)?;
    if let Some(r) = args.replications {
        file.replications = r;
    }
    if let Some(s) = args.seed {
        file.seed = s;
    }
    let mut config = file.study_config()?;
    config.threads = args.threads;
    let threads = args
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(rayon_threads);

    let start = Instant::now();
    let mut buf = Vec::new();
    let failures = match file.kind {
        StudyKind::Estimation => {
            let s = run_estimation_study(&config, &file.methods, &file.tau0)?;
            wio::write_estimation_csv(&mut buf, &s.rows)?;
            s.failures()
        }
        StudyKind::Test => {
            let s = run_test_study(&config, &file.tests)?;
            wio::write_power_csv(&mut buf, &s.rows)?;
            s.degenerate()
        }
        StudyKind::Sweep => {
            let family = file.family.expect("checked at parse time");
            let rows = run_sweep(family, &file.x, &file.tau0, &file.delta, &config)?;
            wio::write_sweep_csv(&mut buf, &rows)?;
            rows.iter().map(|r| r.degenerate).sum()
        }
    };
    let wall = start.elapsed().as_secs_f64();
    emit(args.out.as_deref(), "results.csv", |w| Ok(w.write_all(&buf)?))?;
    if let Some(dir) = &args.out {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: file.seed,
            replications: file.replications,
            config: file,
            failures,
            threads,
            wall_time_secs: wall,
            results: "results.csv".into(),
        };
        wio::write_manifest(&dir.join("manifest.json"), &manifest)?;
    }
    if failures > 0 {
        eprintln!("{failures} replication(s) failed numerically and were left out");
    }
    Ok(())
}

fn rayon_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Test(a) => test(a),
        Command::Simulate(a) => simulate(a),
        Command::Bcos(a) => bcos(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
