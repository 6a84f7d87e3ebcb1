use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use outposts_core::engine::{Engine, QuadMode};
use outposts_core::experiment::{run_convergence, validate_potential, CaseKind, ExperimentConfig};
use outposts_core::heine::HeineParams;
use outposts_core::Error;

/// Counting statistics near outposts of radial Coulomb gas droplets.
#[derive(Parser, Debug)]
#[command(name = "outposts", version)]
struct Cli {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_parser = parse_mode)]
    quad_mode: Option<QuadMode>,
    #[command(subcommand)]
    command: Command,
}

fn parse_mode(s: &str) -> std::result::Result<QuadMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pmf table, moments and samples of a multi-dimensional Heine law.
    Heine(HeineArgs),
    /// Compare exact finite-n count laws with the limit laws over an n schedule.
    Converge(ConfigArgs),
    /// Build the configured potential and run every validator check.
    ValidatePotential(ConfigArgs),
    /// Draw the n moduli once.
    Sample(SampleArgs),
}

#[derive(Args, Debug)]
struct HeineArgs {
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true, allow_negative_numbers = true)]
    theta: Vec<f64>,
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true, allow_negative_numbers = true)]
    q: Vec<f64>,
    /// Print the pmf table.
    #[arg(long)]
    pmf: bool,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Number of samples to draw.
    #[arg(long)]
    sample: Option<usize>,
}

/// Config overrides; any flag given replaces the config value.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    #[arg(long, value_parser = parse_case)]
    case: Option<CaseKind>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    w: Option<Vec<f64>>,
    /// `a0,b0,a1,b1`.
    #[arg(long, num_args = 4, value_delimiter = ',')]
    components: Option<Vec<f64>>,
    #[arg(long = "m0")]
    m0: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true)]
    s_grid: Option<Vec<f64>>,
    #[arg(long = "c")]
    c: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tail_tol: Option<f64>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Size to sample at (default: first entry of the schedule).
    #[arg(long = "size")]
    size: Option<usize>,
}

fn parse_case(s: &str) -> std::result::Result<CaseKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown case `{s}` (expected ginibre, case1 or case2)"))
}

fn load_config(cli: &Cli, args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut value = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str::<serde_json::Value>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => serde_json::json!({}),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    let mut set = |key: &str, v: serde_json::Value| {
        obj.insert(key.to_string(), v);
    };
    if let Some(c) = args.case {
        set("case", serde_json::to_value(c)?);
    }
    if let Some(t) = &args.t {
        set("t", serde_json::to_value(t)?);
    }
    if let Some(w) = &args.w {
        set("w", serde_json::to_value(w)?);
    }
    if let Some(c) = &args.components {
        set("components", serde_json::json!([[c[0], c[1]], [c[2], c[3]]]));
    }
    if let Some(v) = args.m0 {
        set("M0", v.into());
    }
    if let Some(v) = args.margin {
        set("margin", v.into());
    }
    if let Some(v) = &args.n {
        set("n", serde_json::to_value(v)?);
    }
    if let Some(v) = &args.s_grid {
        set("s_grid", serde_json::to_value(v)?);
    }
    if let Some(v) = args.c {
        set("C", v.into());
    }
    if let Some(v) = args.rel_tol {
        set("rel_tol", v.into());
    }
    if let Some(v) = args.epsilon {
        set("epsilon", v.into());
    }
    if let Some(v) = args.tail_tol {
        set("tail_tol", v.into());
    }
    if let Some(v) = cli.seed {
        set("seed", v.into());
    }
    if let Some(m) = cli.quad_mode {
        set("mode", serde_json::to_value(m)?);
    }
    if !obj.contains_key("case") {
        return Err(Error::Config("no case given (use --config or --case)".into()).into());
    }
    Ok(ExperimentConfig::from_json_str(&value.to_string())?)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> Option<PathBuf> {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.as_ref().map(PathBuf::from)))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_heine(cli: &Cli, args: &HeineArgs) -> Result<()> {
    let params = HeineParams::new(args.theta.clone(), args.q.clone())?;
    let mut report = serde_json::Map::new();
    let mut out = String::new();
    if args.pmf {
        let law = params.pmf_table(args.tol)?;
        writeln!(out, "alpha\tp")?;
        for (alpha, p) in law.entries() {
            let a: Vec<String> = alpha.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}\t{p:.15e}", a.join(","))?;
        }
        writeln!(out, "mass_deficit\t{:.6e}", law.mass_deficit())?;
        report.insert("pmf".into(), law.to_json());
    }
    let mean = params.mean_vector();
    let var = params.variance_vector();
    let cov = params.covariance_matrix();
    writeln!(out, "mean\t{}", join(&mean))?;
    writeln!(out, "variance\t{}", join(&var))?;
    for (k, row) in cov.iter().enumerate() {
        writeln!(out, "covariance[{k}]\t{}", join(row))?;
    }
    report.insert("params".into(), serde_json::to_value(&params)?);
    report.insert("mean".into(), serde_json::to_value(&mean)?);
    report.insert("variance".into(), serde_json::to_value(&var)?);
    report.insert("covariance".into(), serde_json::to_value(&cov)?);
    if let Some(count) = args.sample {
        let seed = cli.seed.unwrap_or(0);
        let samples = params.sample(count, seed, args.tol)?;
        writeln!(out, "samples (seed {seed}, tv bound {:.3e})", samples.tv_bound)?;
        for s in &samples.samples {
            let a: Vec<String> = s.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}", a.join(","))?;
        }
        report.insert("samples".into(), serde_json::to_value(&samples)?);
    }
    emit(&out)?;
    if let Some(dir) = out_dir(cli, None) {
        write(&dir, "heine.json", &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

/// Writes to stdout; a closed pipe downstream is not an error.
fn emit(text: &str) -> Result<()> {
    let mut stdout = io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.12e}"))
        .collect::<Vec<_>>()
        .join("\t")
}

fn cmd_converge(cli: &Cli, args: &ConfigArgs) -> Result<()> {
    let cfg = load_config(cli, args)?;
    let report = run_convergence(&cfg)?;
    let csv = report.to_csv();
    emit(&csv)?;
    if let Some(dir) = out_dir(cli, Some(&cfg)) {
        write(&dir, "convergence.csv", &csv)?;
        write(&dir, "convergence.json", &serde_json::to_string_pretty(&report)?)?;
        for row in &report.rows {
            write(&dir, &format!("pmf_n{}.csv", row.n), &row.pmf_csv())?;
        }
    }
    Ok(())
}

fn cmd_validate(cli: &Cli, args: &ConfigArgs) -> Result<()> {
    let cfg = load_config(cli, args)?;
    let report = validate_potential(&cfg)?;
    let mut out = String::new();
    for c in &report.checks {
        writeln!(out, "{}\t{}\t{}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    if let Some(d) = &report.droplet {
        writeln!(out, "case: {}", d.case_tag)?;
        writeln!(out, "components: {:?}", d.components)?;
        writeln!(out, "outposts: {:?}", d.outposts)?;
        writeln!(out, "masses: {:?}", d.masses)?;
    }
    emit(&out)?;
    if let Some(dir) = out_dir(cli, Some(&cfg)) {
        write(&dir, "validation.json", &serde_json::to_string_pretty(&report)?)?;
    }
    if let Some(c) = report.checks.iter().find(|c| !c.passed) {
        return Err(Error::ValidationFailed {
            check: c.name.clone(),
            detail: c.detail.clone(),
        }
        .into());
    }
    Ok(())
}

fn cmd_sample(cli: &Cli, args: &SampleArgs) -> Result<()> {
    let cfg = load_config(cli, &args.config)?;
    let n = args.size.unwrap_or(cfg.n[0]);
    if n == 0 {
        bail!(Error::InvalidParameter("size must be at least 1".into()));
    }
    let pot = cfg.build_potential()?;
    let sample = Engine::new(&pot, n, cfg.quadrature())?
        .sampler()?
        .sample(cfg.seed);
    let csv = sample.to_csv();
    match out_dir(cli, Some(&cfg)) {
        Some(dir) => write(&dir, &format!("moduli_n{n}_seed{}.csv", cfg.seed), &csv)?,
        None => emit(&csv)?,
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    match &cli.command {
        Command::Heine(a) => cmd_heine(cli, a),
        Command::Converge(a) => cmd_converge(cli, a),
        Command::ValidatePotential(a) => cmd_validate(cli, a),
        Command::Sample(a) => cmd_sample(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = e
                .downcast_ref::<Error>()
                .map_or(false, Error::is_invalid_input);
            ExitCode::from(if invalid { 2 } else { 1 })
        }
    }
}
