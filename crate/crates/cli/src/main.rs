mod presets;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use weaklab::config::{parse_config, ConfigErrors};
use weaklab::constants::{bbm_constant, first_coord_moment};
use weaklab::directional::{bbm_mollifier_functional, directional_profile, QuadConfig};
use weaklab::energies::{general_f_limit, jump_energy, sobolev_energy, total_variation, EnergyConfig};
use weaklab::fields::{FSpec, FieldSpec};
use weaklab::plateau::GridConfig;
use weaklab::tail::{tail_measure_exact_grid, tail_measure_profile, SamplerConfig};
use weaklab::verifier::{run_suite, ExperimentReport, Profile, Verdict};
use weaklab::{Domain, Field};

const EXIT_FAIL: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_CONFIG: u8 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("invalid configuration:\n{0}")]
    Suite(#[from] ConfigErrors),
    #[error(transparent)]
    Engine(#[from] weaklab::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Suite(_) | CliError::Engine(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_FAIL,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "weaklab",
    version,
    about = "Weak-type difference-quotient estimators and theorem checks"
)]
struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print I_q(N) and K_{q,N}.
    Constants {
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long)]
        q: Option<f64>,
    },
    /// Monte Carlo tail profile s ↦ μ(s) as CSV.
    Tail(TailArgs),
    /// Directional profile ε ↦ D_{ε,r} as CSV.
    Directional(DirectionalArgs),
    /// Annulus-mollifier functional at one ε.
    Bbm(BbmArgs),
    /// Classical energies as JSON.
    Energy(EnergyArgs),
    /// Run an experiment file: JSON report, per-profile CSV and SVG plots.
    Verify(VerifyArgs),
    /// Exact tail profile of a grid field as CSV.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct Target {
    /// Catalog name or JSON field spec.
    #[arg(long)]
    field: String,
    /// Catalog name or JSON domain spec.
    #[arg(long, default_value = "unit")]
    domain: String,
    /// Dimension used by catalog names.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Target {
    fn build(&self) -> Result<(Field, Domain), CliError> {
        let f = Field::build(&presets::field(&self.field, self.dim)?)?;
        let d = Domain::from_spec(&presets::domain(&self.domain, f.dim())?)?;
        Ok((f, d))
    }
}

#[derive(Args)]
struct TailArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Defaults to q.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    s_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    s_max: f64,
    #[arg(long, default_value_t = 4)]
    per_decade: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pairs: u64,
    /// Use F(a) = min(|a|^q, cap) instead of |du|^q / t^r.
    #[arg(long)]
    cap: Option<f64>,
}

#[derive(Args)]
struct DirectionalArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    eps_max: f64,
    #[arg(long, default_value_t = 0.001)]
    eps_min: f64,
    #[arg(long, default_value_t = 4)]
    per_decade: usize,
    #[arg(long, default_value_t = 200_000)]
    spatial: u64,
    #[arg(long, default_value_t = 256)]
    sphere_resolution: usize,
}

#[derive(Args)]
struct BbmArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long)]
    eps: f64,
    /// Defaults to ε/8.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    spatial: u64,
    #[arg(long, default_value_t = 256)]
    sphere_resolution: usize,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum EnergyChoice {
    Sobolev,
    Tv,
    Jump,
    GeneralF,
}

#[derive(Args)]
struct EnergyArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, value_enum, default_value = "sobolev")]
    kind: EnergyChoice,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    spatial: u64,
}

#[derive(Args)]
struct VerifyArgs {
    config: PathBuf,
    /// Overrides the config's output_dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    target: Target,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long)]
    r: Option<f64>,
    /// Nodes per axis when a non-grid field is sampled onto the domain's box.
    #[arg(long, default_value_t = 512)]
    nodes: usize,
    #[arg(long, default_value_t = 10.0)]
    s_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    s_max: f64,
    #[arg(long, default_value_t = 4)]
    per_decade: usize,
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.clone(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn constants(n: Option<usize>, q: Option<f64>) -> Result<u8, CliError> {
    let dims: Vec<usize> = n.map_or(vec![1, 2, 3], |n| vec![n]);
    let qs: Vec<f64> = q.map_or(vec![1.0, 2.0, 3.0], |q| vec![q]);
    println!("N,q,I_q,K_qN");
    for &d in &dims {
        for &q in &qs {
            let i = first_coord_moment(q, d)?.value;
            let k = bbm_constant(q, d).map(|k| k.to_string()).unwrap_or_default();
            println!("{d},{q},{i},{k}");
        }
    }
    Ok(0)
}

fn tail(a: &TailArgs) -> Result<u8, CliError> {
    let (f, d) = a.target.build()?;
    let s = GridConfig::new(a.s_min, a.s_max, a.per_decade).points()?;
    let cfg = SamplerConfig::new(a.pairs, a.target.seed);
    let p = match a.cap {
        Some(cap) => weaklab::tail::f_tail_profile(&f, &d, FSpec::capped(a.q, cap), &s, &cfg)?,
        None => tail_measure_profile(&f, &d, a.q, a.r.unwrap_or(a.q), &s, &cfg)?,
    };
    write_out(&a.target.out, &p.to_csv())?;
    Ok(0)
}

fn directional(a: &DirectionalArgs) -> Result<u8, CliError> {
    let (f, d) = a.target.build()?;
    let eps = GridConfig::new(a.eps_max, a.eps_min, a.per_decade).points()?;
    let mut cfg = QuadConfig::new(a.spatial, a.target.seed);
    cfg.sphere_resolution = a.sphere_resolution;
    let p = directional_profile(&f, &d, a.q, a.r.unwrap_or(a.q), &eps, &cfg)?;
    write_out(&a.target.out, &p.to_csv())?;
    Ok(0)
}

fn bbm(a: &BbmArgs) -> Result<u8, CliError> {
    let (f, d) = a.target.build()?;
    let mut cfg = QuadConfig::new(a.spatial, a.target.seed);
    cfg.sphere_resolution = a.sphere_resolution;
    let e = bbm_mollifier_functional(&f, &d, a.q, a.eps, a.sigma.unwrap_or(a.eps / 8.0), &cfg)?;
    write_out(
        &a.target.out,
        &format!(
            "eps,value,ci_halfwidth\n{:.16e},{:.16e},{:.16e}\n",
            a.eps, e.value, e.ci_halfwidth
        ),
    )?;
    Ok(0)
}

fn energy(a: &EnergyArgs) -> Result<u8, CliError> {
    let (f, d) = a.target.build()?;
    let cfg = EnergyConfig {
        spatial_budget: a.spatial,
        seed: a.target.seed,
        fd_step: a.fd_step,
        ..EnergyConfig::default()
    };
    let e = match a.kind {
        EnergyChoice::Sobolev => sobolev_energy(&f, &d, a.q, &cfg)?,
        EnergyChoice::Tv => total_variation(&f, &d, &cfg)?,
        EnergyChoice::Jump => jump_energy(&f, &d, a.q)?,
        EnergyChoice::GeneralF => {
            let spec = match a.cap {
                Some(c) => FSpec::capped(a.q, c),
                None => FSpec::power(a.q),
            };
            general_f_limit(&f, &d, spec, &cfg)?
        }
    };
    let text = serde_json::to_string_pretty(&e).expect("energy values serialize");
    write_out(&a.target.out, &format!("{text}\n"))?;
    Ok(0)
}

fn oracle(a: &OracleArgs) -> Result<u8, CliError> {
    let spec = presets::field(&a.target.field, a.target.dim)?;
    let spec = match spec {
        g @ FieldSpec::Grid { .. } => g,
        other => {
            let dim = Field::build(&other)?.dim();
            let dom = Domain::from_spec(&presets::domain(&a.target.domain, dim)?)?;
            let (lo, hi) = dom.bounding_box();
            FieldSpec::Grid {
                lo,
                hi,
                nodes: vec![a.nodes; dim],
                values: None,
                sample: Some(Box::new(other)),
            }
        }
    };
    let f = Field::build(&spec)?;
    let s = GridConfig::new(a.s_min, a.s_max, a.per_decade).points()?;
    let p = tail_measure_exact_grid(&f, a.q, a.r.unwrap_or(a.q), &s)?;
    write_out(&a.target.out, &p.to_csv())?;
    Ok(0)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_report(report: &ExperimentReport, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let json = serde_json::to_string_pretty(report).expect("reports serialize");
    write_file(&dir.join("report.json"), &format!("{json}\n"))?;
    for rec in &report.checks {
        let stem = file_stem(&rec.name);
        for (kind, profile) in &rec.profiles {
            let base = dir.join(format!("{stem}-{kind}"));
            let (csv, plot) = match profile {
                Profile::Tail(p) => (
                    p.to_csv(),
                    svg::loglog(&format!("{}: s·μ(s)", rec.name), "s", "s·μ(s)", &p.s_grid, &p.s_mu),
                ),
                Profile::Directional(p) => (
                    p.to_csv(),
                    svg::loglog(&format!("{}: D_ε", rec.name), "ε", "D_ε", &p.eps_grid, &p.values),
                ),
            };
            write_file(&base.with_extension("csv"), &csv)?;
            write_file(&base.with_extension("svg"), &plot)?;
        }
    }
    Ok(())
}

fn verify(a: &VerifyArgs) -> Result<u8, CliError> {
    let mut cfg = parse_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let report = run_suite(&cfg)?;
    let dir = a
        .out_dir
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("weaklab-out"));
    write_report(&report, &dir)?;
    for rec in &report.checks {
        let worst = rec.margins.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let margin = if worst.is_finite() {
            format!("{worst:+.3}")
        } else {
            "-".to_string()
        };
        println!("{:<13} {:<46} min margin {margin}", rec.verdict.as_str(), rec.name);
        for note in &rec.notes {
            println!("              note: {note}");
        }
    }
    let overall = report.overall();
    println!(
        "overall: {}  ({:.1} s, report in {})",
        overall.as_str(),
        report.meta.runtime_s,
        dir.display()
    );
    Ok(match overall {
        Verdict::Pass => 0,
        Verdict::Fail => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

fn run(cli: Cli) -> Result<u8, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Constants { n, q } => constants(*n, *q),
        Command::Tail(a) => tail(a),
        Command::Directional(a) => directional(a),
        Command::Bbm(a) => bbm(a),
        Command::Energy(a) => energy(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
