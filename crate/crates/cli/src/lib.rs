//! Command-line front end for `ilim`.
//!
//! Every command runs exactly one library operation and emits a report in
//! one of three formats: a versioned JSON document, a plot-ready CSV table,
//! or a short plain-text summary.

use std::fmt::Write as _;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ilim::bowen::{
    entropy_bowen_on, sample_points_with, separated_count, CloudConfig, BOWEN_CLOUD,
    BOWEN_CLOUD_INVERSE, DEFAULT_EPS,
};
use ilim::chains::{build_chain_with, refines_within, verify_plevel_alignment};
use ilim::inverse_limit::{folding_pattern_prefix, salient_positions, Level};
use ilim::lap_entropy::{
    estimate_from_table, lap_table, tent_slope_of_quadratic_with, EntropyMethod,
    QUADRATIC_LAP_DEPTH,
};
use ilim::maps::{QuadraticMap, TentMap};
use ilim::renorm::{
    block_model_entropy, detect_renormalization_report, entropy_spectrum, spectrum_membership,
    BlockModel, RenormTower, ZERO_ENTROPY_CUTOFF,
};
use ilim::{IlimError, DEFAULT_NODE_CAP, DEFAULT_TOL};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const SCHEMA: &str = "ilim/1";

/// Environment variable overriding the node/point budget of enumerations.
pub const MAX_NODES_ENV: &str = "ILIM_MAX_NODES";

pub const COMMANDS: [&str; 13] = [
    "entropy-lap",
    "entropy-bowen",
    "slope-of-quadratic",
    "folding-pattern",
    "salient",
    "chain-build",
    "chain-verify",
    "plevel-align",
    "separated",
    "renorm-detect",
    "spectrum",
    "spectrum-member",
    "block-entropy",
];

pub mod exit {
    pub const OK: i32 = 0;
    pub const UNKNOWN_COMMAND: i32 = 1;
    pub const PRECONDITION: i32 = 2;
    pub const RESOURCE_CAP: i32 = 3;
}

#[derive(Debug, Parser)]
#[command(name = "ilim", version, about = "Entropy of tent maps, their inverse limits and renormalization towers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[arg(long, value_enum, default_value_t = Format::Plain, global = true)]
    pub format: Format,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Slope,
    Ratio,
    HalfWindow,
}

impl From<Method> for EntropyMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Slope => EntropyMethod::Slope,
            Method::Ratio => EntropyMethod::Ratio,
            Method::HalfWindow => EntropyMethod::HalfWindow,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropy from lap growth of a tent or quadratic map.
    EntropyLap {
        #[arg(long, conflicts_with = "parameter", required_unless_present = "parameter")]
        slope: Option<f64>,
        /// Parameter `a` of `q_a(x) = 1 - a x^2`.
        #[arg(long)]
        parameter: Option<f64>,
        #[arg(long, default_value_t = 24)]
        n_max: usize,
        #[arg(long, value_enum, default_value_t = Method::Ratio)]
        method: Method,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Bowen entropy of `σ^R` on the inverse limit.
    EntropyBowen {
        #[command(flatten)]
        cloud: CloudArgs,
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
    },
    /// Slope of the tent map semiconjugate to `q_a`.
    SlopeOfQuadratic {
        #[arg(long)]
        parameter: f64,
        #[arg(long, default_value_t = QUADRATIC_LAP_DEPTH)]
        n_max: usize,
        /// Entropy estimates below this are zero entropy.
        #[arg(long, default_value_t = ZERO_ENTROPY_CUTOFF)]
        tol: f64,
    },
    /// Prefix of the folding pattern of the arc-component of the fixed endpoint.
    FoldingPattern {
        #[arg(long)]
        slope: f64,
        #[arg(long, default_value_t = 7)]
        count: usize,
    },
    /// Arc positions of the salient points.
    Salient {
        #[arg(long)]
        slope: f64,
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Chain cover of `K_s` at index `p`.
    ChainBuild {
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Chain axioms for every index up to `p`, and refinement between them.
    ChainVerify {
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Alignment of `q`-levels with `p`-levels under `σ^R`.
    PlevelAlign {
        #[arg(long)]
        slope: f64,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
    /// Greedy `(n, eps)`-separated set size for `σ^R`.
    Separated {
        #[command(flatten)]
        cloud: CloudArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps: f64,
    },
    /// Renormalization tower of `q_a`.
    RenormDetect {
        #[arg(long)]
        parameter: f64,
        #[arg(long, default_value_t = 32)]
        max_period: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Admissible entropies of self-homeomorphisms up to `h_max`.
    Spectrum {
        #[command(flatten)]
        tower: TowerArgs,
        #[arg(long)]
        h_max: f64,
        /// Input rounding used to merge indistinguishable values; defaults
        /// to half a unit in the last decimal given, 0 keeps every value.
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Whether a value is an admissible entropy.
    SpectrumMember {
        #[command(flatten)]
        tower: TowerArgs,
        #[arg(long)]
        value: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Entropy of a block model homeomorphism.
    BlockEntropy {
        #[command(flatten)]
        tower: TowerArgs,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        rotation: u64,
        /// Shift powers per layer: layers separated by ';', entries by ','.
        #[arg(long, value_parser = parse_layers, default_value = "")]
        layers: Layers,
    },
}

#[derive(Debug, Args)]
pub struct CloudArgs {
    #[arg(long)]
    pub slope: f64,
    /// Shift power; negative values give the inverse shift.
    #[arg(long, allow_hyphen_values = true)]
    pub r: i64,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub per_branch_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long)]
    pub slope: f64,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct TowerArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub periods: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_decimal)]
    pub entropies: Vec<Decimal>,
}

impl TowerArgs {
    fn tower(&self) -> Result<RenormTower, Failure> {
        Ok(RenormTower::new(
            self.periods.clone(),
            self.entropies.iter().map(|d| d.value).collect(),
        )?)
    }

    /// Half a unit in the last decimal place of the least precise entropy.
    fn resolution(&self) -> f64 {
        self.entropies
            .iter()
            .map(|d| d.decimals.map_or(0.0, |k| 0.5 * 10f64.powi(-(k as i32))))
            .fold(0.0, f64::max)
    }
}

/// A number as typed, remembering how many decimals it was given to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decimal {
    pub value: f64,
    /// `None` for exponent notation, which is taken as exact.
    pub decimals: Option<u32>,
}

fn parse_decimal(text: &str) -> Result<Decimal, String> {
    let text = text.trim();
    let value: f64 = text.parse().map_err(|e| format!("bad number {text:?}: {e}"))?;
    let decimals = if text.contains(['e', 'E']) {
        None
    } else {
        Some(text.split_once('.').map_or(0, |(_, frac)| frac.len() as u32))
    };
    Ok(Decimal { value, decimals })
}

/// Merges sorted spectrum values that agree within the error carried over
/// from rounded entropies. `N (p_j/p_i) h_i` is off by at most
/// `N (p_j/p_i) resolution = value · resolution / h_i`; the generating pair
/// with the largest `h_i` gives the bound.
pub fn merge_within_resolution(tower: &RenormTower, values: &[f64], resolution: f64) -> Vec<f64> {
    let err = |v: f64| {
        let mut h_best = 0.0f64;
        for j in 0..tower.len() {
            for i in j..tower.len() {
                let Some(n0) = tower.n_min(j, i) else { continue };
                let unit = tower.unit(j, i);
                let n = (v / unit).round();
                if n >= n0 as f64 && (n * unit - v).abs() <= ilim::renorm::SPECTRUM_DEDUP {
                    h_best = h_best.max(tower.entropies[i]);
                }
            }
        }
        if h_best > 0.0 { v * resolution / h_best } else { 0.0 }
    };
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        match out.last() {
            Some(&u) if v - u <= err(u) + err(v) => {}
            _ => out.push(v),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layers(pub Vec<Vec<u64>>);

fn parse_layers(text: &str) -> Result<Layers, String> {
    if text.trim().is_empty() {
        return Ok(Layers(Vec::new()));
    }
    text.split(';')
        .map(|layer| {
            layer
                .split(',')
                .map(|n| n.trim().parse::<u64>().map_err(|e| format!("bad power {n:?}: {e}")))
                .collect()
        })
        .collect::<Result<_, _>>()
        .map(Layers)
}

/// The versioned report every command emits as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub inputs: Value,
    pub outputs: Value,
    pub tolerances: Value,
    pub wall_clock_ms: f64,
}

impl Report {
    pub fn validate(&self) -> Result<(), String> {
        if self.schema != SCHEMA {
            return Err(format!("schema {:?}, expected {SCHEMA:?}", self.schema));
        }
        if !COMMANDS.contains(&self.command.as_str()) {
            return Err(format!("unknown command {:?}", self.command));
        }
        for (name, v) in [("inputs", &self.inputs), ("outputs", &self.outputs), ("tolerances", &self.tolerances)] {
            if !v.is_object() {
                return Err(format!("{name} must be an object"));
            }
        }
        if !(self.wall_clock_ms.is_finite() && self.wall_clock_ms >= 0.0) {
            return Err("wall_clock_ms must be a non-negative number".into());
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum Failure {
    Library(IlimError),
    Usage(String),
    Io(std::io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Library(IlimError::ResourceCap { .. }) => exit::RESOURCE_CAP,
            _ => exit::PRECONDITION,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Library(e) => write!(f, "{e}"),
            Failure::Usage(m) => f.write_str(m),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<IlimError> for Failure {
    fn from(e: IlimError) -> Self {
        Failure::Library(e)
    }
}

/// Result of one command before formatting.
struct Outcome {
    inputs: Value,
    outputs: Value,
    tolerances: Value,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    plain: String,
}

fn node_cap() -> Result<usize, Failure> {
    match std::env::var(MAX_NODES_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{MAX_NODES_ENV}={v:?} is not a non-negative integer"))),
        Err(_) => Ok(DEFAULT_NODE_CAP),
    }
}

fn cell(x: impl std::fmt::Display) -> String {
    x.to_string()
}

fn level_cell(l: Level) -> String {
    match l {
        Level::Finite(n) => n.to_string(),
        Level::Infinite => "inf".into(),
    }
}

fn cloud_config(args: &CloudArgs, cap: usize) -> CloudConfig {
    let mut config = if args.r < 0 { BOWEN_CLOUD_INVERSE } else { BOWEN_CLOUD };
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(b) = args.per_branch_cap {
        config.per_branch_cap = b;
    }
    config.cloud_cap = cap;
    config
}

fn cloud_inputs(args: &CloudArgs, config: &CloudConfig) -> Value {
    json!({
        "slope": args.slope,
        "r": args.r,
        "depth": args.depth,
        "seeds": config.seeds,
        "per_branch_cap": config.per_branch_cap,
    })
}

/// Parses the command line and runs it, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::error::ErrorKind;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
                ErrorKind::InvalidSubcommand
                | ErrorKind::MissingSubcommand
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => exit::UNKNOWN_COMMAND,
                _ => exit::PRECONDITION,
            };
            let _ = e.print();
            return code;
        }
    };
    match render(&cli) {
        Ok(text) => {
            let written = match &cli.output {
                Some(path) => std::fs::write(path, text.as_bytes()),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            match written {
                Ok(()) => exit::OK,
                Err(e) => {
                    eprintln!("error: {}", Failure::Io(e));
                    exit::PRECONDITION
                }
            }
        }
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

/// Runs the command and formats its report.
pub fn render(cli: &Cli) -> Result<String, Failure> {
    let start = Instant::now();
    let outcome = run(&cli.command)?;
    let wall_clock_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(match cli.format {
        Format::Json => {
            let report = Report {
                schema: SCHEMA.into(),
                command: command_name(&cli.command).into(),
                inputs: outcome.inputs,
                outputs: outcome.outputs,
                tolerances: outcome.tolerances,
                wall_clock_ms,
            };
            let mut text = serde_json::to_string_pretty(&report).expect("reports serialize");
            text.push('\n');
            text
        }
        Format::Csv => {
            let mut text = outcome.header.join(",");
            text.push('\n');
            for row in &outcome.rows {
                text.push_str(&row.join(","));
                text.push('\n');
            }
            text
        }
        Format::Plain => {
            let mut text = outcome.plain;
            if !text.ends_with('\n') {
                text.push('\n');
            }
            text
        }
    })
}

pub fn command_name(command: &Command) -> &'static str {
    match command {
        Command::EntropyLap { .. } => "entropy-lap",
        Command::EntropyBowen { .. } => "entropy-bowen",
        Command::SlopeOfQuadratic { .. } => "slope-of-quadratic",
        Command::FoldingPattern { .. } => "folding-pattern",
        Command::Salient { .. } => "salient",
        Command::ChainBuild { .. } => "chain-build",
        Command::ChainVerify { .. } => "chain-verify",
        Command::PlevelAlign { .. } => "plevel-align",
        Command::Separated { .. } => "separated",
        Command::RenormDetect { .. } => "renorm-detect",
        Command::Spectrum { .. } => "spectrum",
        Command::SpectrumMember { .. } => "spectrum-member",
        Command::BlockEntropy { .. } => "block-entropy",
    }
}

fn run(command: &Command) -> Result<Outcome, Failure> {
    let cap = node_cap()?;
    match command {
        &Command::EntropyLap {
            slope,
            parameter,
            n_max,
            method,
            tol,
        } => {
            let table = match (slope, parameter) {
                (Some(s), _) => lap_table(&TentMap::new(s)?, n_max, tol, cap)?,
                (None, Some(a)) => lap_table(&QuadraticMap::new(a)?, n_max, tol, cap)?,
                (None, None) => return Err(Failure::Usage("--slope or --parameter is required".into())),
            };
            let est = estimate_from_table(&table, method.into())?;
            Ok(Outcome {
                inputs: json!({ "slope": slope, "parameter": parameter, "n_max": n_max, "method": EntropyMethod::from(method) }),
                outputs: json!({ "value": est.value, "n_used": est.n_used, "residual": est.residual, "laps": table.counts }),
                tolerances: json!({ "tol": tol, "node_cap": cap }),
                header: vec!["n", "lap", "log_lap"],
                rows: (1..=table.n_max())
                    .map(|n| vec![cell(n), cell(table.lap(n)), cell((table.lap(n) as f64).ln())])
                    .collect(),
                plain: format!("{}", est.value),
            })
        }
        Command::EntropyBowen { cloud, n_max, eps } => {
            let config = cloud_config(cloud, cap);
            let points = sample_points_with(cloud.slope, cloud.depth, config)?;
            let eps_list = if eps.is_empty() { DEFAULT_EPS.to_vec() } else { eps.clone() };
            let est = entropy_bowen_on(&points, cloud.r, &eps_list, *n_max)?;
            let mut inputs = cloud_inputs(cloud, &config);
            inputs["n_max"] = json!(n_max);
            inputs["eps"] = json!(eps_list);
            let mut plain = format!("{}", est.value);
            for w in &est.warnings {
                let _ = write!(plain, "\nwarning: {w}");
            }
            Ok(Outcome {
                inputs,
                tolerances: json!({ "cloud_cap": cap, "linear_residual": ilim::bowen::LINEAR_RESIDUAL }),
                header: vec!["eps", "n", "count", "log_count"],
                rows: est
                    .curves
                    .iter()
                    .flat_map(|c| c.csv_rows())
                    .map(|(e, n, k, l)| vec![cell(e), cell(n), cell(k), cell(l)])
                    .collect(),
                outputs: serde_json::to_value(&est).expect("estimates serialize"),
                plain,
            })
        }
        &Command::SlopeOfQuadratic { parameter, n_max, tol } => {
            let est = tent_slope_of_quadratic_with(parameter, tol, n_max, cap)?;
            Ok(Outcome {
                inputs: json!({ "parameter": parameter, "n_max": n_max }),
                outputs: serde_json::to_value(est).expect("estimates serialize"),
                tolerances: json!({ "zero_entropy_cutoff": tol, "node_cap": cap }),
                header: vec!["parameter", "slope", "entropy", "zero_entropy"],
                rows: vec![vec![cell(parameter), cell(est.slope), cell(est.entropy.value), cell(est.zero_entropy)]],
                plain: format!("{}", est.slope),
            })
        }
        &Command::FoldingPattern { slope, count } => {
            let fp = folding_pattern_prefix(slope, count)?;
            let text: Vec<String> = fp.0.iter().map(|&l| level_cell(l)).collect();
            Ok(Outcome {
                inputs: json!({ "slope": slope, "count": count }),
                outputs: json!({ "levels": fp.0, "pattern": text.join(" ") }),
                tolerances: json!({ "tol": DEFAULT_TOL }),
                header: vec!["index", "level"],
                rows: text.iter().enumerate().map(|(i, l)| vec![cell(i), l.clone()]).collect(),
                plain: fp.to_string(),
            })
        }
        &Command::Salient { slope, n } => {
            let positions = salient_positions(slope, n)?;
            Ok(Outcome {
                inputs: json!({ "slope": slope, "n": n }),
                outputs: json!({ "positions": positions }),
                tolerances: json!({ "tol": DEFAULT_TOL }),
                header: vec!["i", "position"],
                rows: positions
                    .iter()
                    .enumerate()
                    .map(|(i, x)| vec![cell(i + 1), cell(x)])
                    .collect(),
                plain: positions
                    .iter()
                    .enumerate()
                    .map(|(i, x)| format!("s_{} {x}", i + 1))
                    .collect::<Vec<_>>()
                    .join("\n"),
            })
        }
        Command::ChainBuild { chain: a } => {
            let chain = build_chain_with(a.slope, a.p, a.eps, a.tol, cap)?;
            let links: Vec<_> = chain.links().collect();
            Ok(Outcome {
                inputs: json!({ "slope": a.slope, "p": a.p, "eps": a.eps }),
                outputs: json!({
                    "chain": chain,
                    "link_count": chain.link_count(),
                    "inverse_limit_mesh_bound": chain.inverse_limit_mesh_bound(),
                }),
                tolerances: json!({ "tol": a.tol, "node_cap": cap }),
                header: vec!["link", "lo", "hi"],
                rows: links
                    .iter()
                    .enumerate()
                    .map(|(j, l)| vec![cell(j), cell(l.lo), cell(l.hi)])
                    .collect(),
                plain: format!(
                    "{} links, mesh {}, mesh in K_s <= {}",
                    chain.link_count(),
                    chain.mesh,
                    chain.inverse_limit_mesh_bound()
                ),
            })
        }
        Command::ChainVerify { chain: a } => {
            let mut levels = Vec::new();
            let mut rows = Vec::new();
            let mut previous = None;
            let mut passed = true;
            for p in 0..=a.p {
                let eps = a.eps * 0.5f64.powi(p as i32);
                let chain = build_chain_with(a.slope, p, eps, a.tol, cap)?;
                let is_chain = chain.is_chain();
                let mandatory = chain.has_mandatory_breakpoints(a.tol)?;
                let refines = match &previous {
                    Some(coarse) => Some(refines_within(&chain, coarse, a.tol)?),
                    None => None,
                };
                passed &= is_chain && mandatory && refines.unwrap_or(true);
                rows.push(vec![
                    cell(p),
                    cell(chain.link_count()),
                    cell(is_chain),
                    cell(mandatory),
                    refines.map_or_else(String::new, cell),
                ]);
                levels.push(json!({
                    "p": p,
                    "eps": eps,
                    "links": chain.link_count(),
                    "is_chain": is_chain,
                    "mandatory_breakpoints": mandatory,
                    "refines_previous": refines,
                }));
                previous = Some(chain);
            }
            Ok(Outcome {
                inputs: json!({ "slope": a.slope, "p": a.p, "eps": a.eps }),
                outputs: json!({ "passed": passed, "levels": levels }),
                tolerances: json!({ "tol": a.tol, "node_cap": cap }),
                header: vec!["p", "links", "is_chain", "mandatory_breakpoints", "refines_previous"],
                rows,
                plain: if passed { "all chain axioms hold".into() } else { "chain axioms violated".into() },
            })
        }
        &Command::PlevelAlign { slope, q, p, r, n } => {
            let report = verify_plevel_alignment(slope, q, p, r, n)?;
            Ok(Outcome {
                inputs: json!({ "slope": slope, "q": q, "p": p, "r": r, "n": n }),
                tolerances: json!({ "tol": 1e-9 }),
                header: vec!["slope", "q", "p", "r", "n", "m", "checked", "level_passed", "link_passed"],
                rows: vec![vec![
                    cell(slope),
                    cell(q),
                    cell(p),
                    cell(r),
                    cell(n),
                    cell(report.m),
                    cell(report.checked),
                    cell(report.level_passed),
                    cell(report.link_passed),
                ]],
                plain: format!(
                    "M = {}: {}/{} levels and {}/{} links aligned",
                    report.m, report.level_passed, report.checked, report.link_passed, report.checked
                ),
                outputs: serde_json::to_value(&report).expect("reports serialize"),
            })
        }
        Command::Separated { cloud, n, eps } => {
            let config = cloud_config(cloud, cap);
            let points = sample_points_with(cloud.slope, cloud.depth, config)?;
            let count = separated_count(&points, cloud.r, *n, *eps)?;
            let mut inputs = cloud_inputs(cloud, &config);
            inputs["n"] = json!(n);
            inputs["eps"] = json!(eps);
            Ok(Outcome {
                inputs,
                outputs: json!({ "count": count, "cloud_size": points.len() }),
                tolerances: json!({ "cloud_cap": cap }),
                header: vec!["eps", "n", "count", "cloud_size"],
                rows: vec![vec![cell(eps), cell(n), cell(count), cell(points.len())]],
                plain: count.to_string(),
            })
        }
        &Command::RenormDetect { parameter, max_period, tol } => {
            let report = detect_renormalization_report(parameter, max_period, tol)?;
            let t = &report.tower;
            Ok(Outcome {
                inputs: json!({ "parameter": parameter, "max_period": max_period }),
                tolerances: json!({ "tol": tol, "zero_entropy_cutoff": ZERO_ENTROPY_CUTOFF }),
                header: vec!["level", "period", "entropy"],
                rows: t
                    .periods
                    .iter()
                    .zip(&t.entropies)
                    .enumerate()
                    .map(|(i, (p, h))| vec![cell(i), cell(p), cell(h)])
                    .collect(),
                plain: format!(
                    "periods {:?}\nentropies {:?}{}",
                    t.periods,
                    t.entropies,
                    if report.ambiguous.is_empty() {
                        String::new()
                    } else {
                        format!("\nambiguous {:?}", report.ambiguous)
                    }
                ),
                outputs: serde_json::to_value(&report).expect("reports serialize"),
            })
        }
        Command::Spectrum {
            tower,
            h_max,
            resolution,
        } => {
            let t = tower.tower()?;
            let resolution = resolution.unwrap_or_else(|| tower.resolution());
            if !(resolution >= 0.0) {
                return Err(Failure::Usage("resolution must be non-negative".into()));
            }
            let values = merge_within_resolution(&t, &entropy_spectrum(&t, *h_max)?, resolution);
            Ok(Outcome {
                inputs: json!({ "periods": t.periods, "entropies": t.entropies, "h_max": h_max }),
                outputs: json!({ "periods": t.periods, "entropies": t.entropies, "spectrum": values, "h_max": h_max }),
                tolerances: json!({ "dedup": ilim::renorm::SPECTRUM_DEDUP, "input_resolution": resolution }),
                header: vec!["k", "value"],
                rows: values.iter().enumerate().map(|(k, v)| vec![cell(k), cell(v)]).collect(),
                plain: values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
            })
        }
        Command::SpectrumMember { tower, value, tol } => {
            let t = tower.tower()?;
            let m = spectrum_membership(&t, *value, *tol)?;
            let w = m.witness;
            Ok(Outcome {
                inputs: json!({ "periods": t.periods, "entropies": t.entropies, "value": value }),
                outputs: serde_json::to_value(m).expect("memberships serialize"),
                tolerances: json!({ "tol": tol }),
                header: vec!["value", "member", "j", "i", "n"],
                rows: vec![vec![
                    cell(value),
                    cell(m.member),
                    w.map_or_else(String::new, |w| cell(w.j)),
                    w.map_or_else(String::new, |w| cell(w.i)),
                    w.map_or_else(String::new, |w| cell(w.n)),
                ]],
                plain: match w {
                    Some(w) => format!("member: N = {} at (j, i) = ({}, {})", w.n, w.j, w.i),
                    None if m.member => "member: zero entropy".into(),
                    None => "not a member".into(),
                },
            })
        }
        Command::BlockEntropy {
            tower,
            level,
            rotation,
            layers,
        } => {
            let t = tower.tower()?;
            let model = BlockModel::new(&t, *level, *rotation, layers.0.clone())?;
            let h = block_model_entropy(&t, &model)?;
            let member = spectrum_membership(&t, h, 1e-9)?;
            Ok(Outcome {
                inputs: json!({
                    "periods": t.periods,
                    "entropies": t.entropies,
                    "level": level,
                    "rotation": rotation,
                    "layers": layers.0,
                }),
                outputs: json!({ "entropy": h, "orbits": model.orbits, "in_spectrum": member.member }),
                tolerances: json!({ "membership_tol": 1e-9 }),
                header: vec!["entropy", "in_spectrum"],
                rows: vec![vec![cell(h), cell(member.member)]],
                plain: h.to_string(),
            })
        }
    }
}
