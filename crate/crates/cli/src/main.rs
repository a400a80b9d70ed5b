//! `lightspan` command-line tool.
//!
//! Exit codes: 0 success, 1 verification failure, 2 bad input.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lightspan::experiment::{rows_to_csv, CSV_HEADER};
use lightspan::multilevel::{EpsSpannerOracle, ExactOracle};
use lightspan::{
    eps_spanner, four_approx_baseline, four_eps_spanner, generate, load_graph, run_experiment, solve_multilevel,
    verify_spanner, wmax_spanner, AdditiveCondition, EdgeId, EllSetting, EpsilonSplit, Exact, ExperimentConfig,
    GeneratorKind, GeneratorSpec, Graph, Instance, MultiLevelInstance, SampleConfig, Spanner, VerificationReport,
    Weight,
};

#[derive(Parser)]
#[command(name = "lightspan", version, about = "Lightweight subsetwise additive spanners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Generate(GenerateArgs),
    /// Build a one-level spanner for an instance.
    Spanner(SpannerArgs),
    /// Build a multi-level spanner for an instance with levels.
    Multilevel(MultilevelArgs),
    /// Check an edge set against an instance.
    Verify(VerifyArgs),
    /// Run an experiment config and print the results table.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BetaModeArg {
    Relative,
    Wmax,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Eps,
    FourEps,
    Wmax,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MultiAlgo {
    /// Randomized rounding to powers of `p`.
    E,
    /// Rounding to powers of 2 with `q = 1`.
    Four,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleArg {
    Eps,
    Exact,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "0.5")]
    epsilon: String,
    #[arg(long, value_enum)]
    beta_mode: Option<BetaModeArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Use exact rational arithmetic instead of f64.
    #[arg(long)]
    exact_arithmetic: bool,
}

#[derive(Args)]
struct InputArgs {
    /// JSON instance, or an edge list (`u v w` per line).
    input: PathBuf,
    /// Comma-separated terminal ids; overrides the instance's terminals.
    #[arg(long, value_delimiter = ',')]
    terminals: Option<Vec<usize>>,
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON generator spec; flags below are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind, default_value = "erdos-renyi")]
    kind: GeneratorKind,
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 0.25)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    weight_min: f64,
    #[arg(long, default_value_t = 10.0)]
    weight_max: f64,
    #[arg(long, default_value_t = 0.25)]
    terminal_fraction: f64,
    #[arg(long)]
    terminals: Option<usize>,
    /// Draw levels in 1..=k for the terminals.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    subdivided: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `json` writes an instance document, `csv` an edge list `u,v,w`.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct SpannerArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "eps")]
    algo: Algo,
    /// Oversampling constant of the sampled construction.
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    /// Threshold of the sampled construction: `auto` or a positive value.
    #[arg(long, default_value = "auto")]
    ell: String,
}

#[derive(Args)]
struct MultilevelArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "e")]
    algo: MultiAlgo,
    /// Rounding base (ignored by `four`).
    #[arg(long, default_value_t = std::f64::consts::E)]
    p: f64,
    #[arg(long, value_enum, default_value = "eps")]
    oracle: OracleArg,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: Common,
    /// Edge ids, as a JSON array or whitespace/comma separated.
    #[arg(long)]
    edges: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Overrides the config's `exact_arithmetic`.
    #[arg(long)]
    exact_arithmetic: bool,
}

/// Bad input (exit 2) as opposed to a failed check (exit 1).
#[derive(Debug)]
struct Failed(String);

fn parse_kind(s: &str) -> Result<GeneratorKind, String> {
    serde_json::from_value(Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => match e.downcast::<Failed>() {
            Ok(Failed(doc)) => {
                println!("{doc}");
                eprintln!("verification failed");
                ExitCode::from(1)
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed")
    }
}

impl std::error::Error for Failed {}

fn run(cmd: Command) -> anyhow::Result<String> {
    match cmd {
        Command::Generate(a) => cmd_generate(a),
        Command::Spanner(a) if a.common.exact_arithmetic => cmd_spanner::<Exact>(a),
        Command::Spanner(a) => cmd_spanner::<f64>(a),
        Command::Multilevel(a) if a.common.exact_arithmetic => cmd_multilevel::<Exact>(a),
        Command::Multilevel(a) => cmd_multilevel::<f64>(a),
        Command::Verify(a) if a.common.exact_arithmetic => cmd_verify::<Exact>(a),
        Command::Verify(a) => cmd_verify::<f64>(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_input<W: Weight>(args: &InputArgs) -> anyhow::Result<Instance<W>> {
    let text = read(&args.input)?;
    let mut inst = if text.trim_start().starts_with('{') {
        Instance::from_json_str(&text)?
    } else {
        let graph: Graph<W> = load_graph(&text)?;
        graph.ensure_connected()?;
        Instance {
            graph,
            terminals: Vec::new(),
            levels: None,
        }
    };
    if let Some(ts) = &args.terminals {
        for &t in ts {
            inst.graph.check_vertex(t)?;
        }
        inst.terminals = ts.clone();
    }
    Ok(inst)
}

fn cmd_generate(a: GenerateArgs) -> anyhow::Result<String> {
    let spec = match &a.spec {
        Some(path) => serde_json::from_str(&read(path)?).context("invalid generator spec")?,
        None => {
            let mut spec = GeneratorSpec::new(a.kind, a.n, a.seed);
            spec.p = a.p;
            spec.radius = a.radius;
            spec.weight_min = a.weight_min;
            spec.weight_max = a.weight_max;
            spec.terminal_fraction = a.terminal_fraction;
            spec.terminals = a.terminals;
            spec.levels = a.levels;
            spec.delta = a.delta;
            spec.subdivided = a.subdivided;
            spec
        }
    };
    let inst = generate::<f64>(&spec)?.into_instance();
    Ok(match a.format {
        Format::Json => inst.to_json().to_string(),
        Format::Csv => {
            let mut out = String::from("u,v,w");
            for e in inst.graph.edges() {
                out.push_str(&format!("\n{},{},{}", e.u, e.v, e.w));
            }
            out
        }
    })
}

fn condition<W: Weight>(common: &Common, default: BetaModeArg) -> anyhow::Result<AdditiveCondition<W>> {
    let beta = W::parse_decimal(&common.epsilon)?;
    Ok(match common.beta_mode.unwrap_or(default) {
        BetaModeArg::Relative => AdditiveCondition::relative(beta),
        BetaModeArg::Wmax => AdditiveCondition::absolute(beta),
    })
}

fn report_json<W: Weight>(report: &VerificationReport<W>) -> Value {
    report.to_json()
}

fn spanner_json<W: Weight>(algo: &str, sp: &Spanner<W>) -> Value {
    let st = &sp.stats;
    json!({
        "algo": algo,
        "terminals": sp.terminals,
        "edges": sp.edges,
        "weight": sp.weight.to_f64(),
        "lightness": sp.lightness.ratio.to_f64(),
        "steiner_weight": sp.lightness.steiner_weight.to_f64(),
        "lower_bound": sp.lightness.mode.as_str(),
        "ok": sp.report.ok,
        "report": report_json(&sp.report),
        "stats": {
            "h_vertices": st.h_vertices,
            "s_prime": st.s_prime,
            "unsatisfied_pairs": st.unsatisfied_pairs,
            "subdivision_vertices": st.subdivision_vertices,
            "heavy_removed": st.heavy_removed,
            "initial_edges": st.initial_edges,
            "insertions": st.insertions,
            "budget": st.budget,
            "ell": st.ell,
            "ell_fallback": st.ell_fallback,
            "sample_size": st.sample_size,
            "sampled_h_vertices": st.sampled_h_vertices,
            "repairs": st.repairs,
        },
    })
}

fn csv_line(fields: &[String]) -> String {
    fields
        .iter()
        .map(|f| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn cmd_spanner<W: Weight>(a: SpannerArgs) -> anyhow::Result<String> {
    let inst: Instance<W> = load_input(&a.input)?;
    let expected = if a.algo == Algo::Wmax { BetaModeArg::Wmax } else { BetaModeArg::Relative };
    if a.common.beta_mode.is_some_and(|m| m != expected) {
        bail!("--beta-mode does not match --algo");
    }
    let eps = W::parse_decimal(&a.common.epsilon)?;
    let split = EpsilonSplit::from_eps(eps)?;
    let (name, sp) = match a.algo {
        Algo::Eps => ("eps", eps_spanner(&inst.graph, &inst.terminals, &split)?),
        Algo::FourEps => ("four-eps", four_eps_spanner(&inst.graph, &inst.terminals, &split)?),
        Algo::Wmax => {
            let mut cfg = SampleConfig::new(split, a.common.seed);
            cfg.c = a.c;
            cfg.ell = match a.ell.as_str() {
                "auto" => EllSetting::Auto,
                v => EllSetting::Fixed(v.parse().with_context(|| format!("invalid --ell `{v}`"))?),
            };
            ("wmax", wmax_spanner(&inst.graph, &inst.terminals, &cfg)?)
        }
    };
    let out = match a.common.format {
        Format::Json => spanner_json(name, &sp).to_string(),
        Format::Csv => {
            let mut out = String::from("edge,u,v,w");
            for &e in &sp.edges {
                let edge = inst.graph.edge(e);
                out.push_str(&format!("\n{e},{},{},{}", edge.u, edge.v, edge.w));
            }
            out
        }
    };
    if !sp.report.ok {
        return Err(Failed(spanner_json(name, &sp).to_string()).into());
    }
    Ok(out)
}

fn cmd_multilevel<W: Weight>(a: MultilevelArgs) -> anyhow::Result<String> {
    let inst: Instance<W> = load_input(&a.input)?;
    if inst.levels.is_none() && inst.terminals.is_empty() {
        bail!("instance has neither levels nor terminals");
    }
    let cond = condition(&a.common, BetaModeArg::Relative)?;
    let ml = MultiLevelInstance::from_instance(&inst, cond.clone())?;
    let oracle: &dyn lightspan::OneLevelOracle<W> = match a.oracle {
        OracleArg::Eps => &EpsSpannerOracle,
        OracleArg::Exact => &ExactOracle,
    };
    let sol = match a.algo {
        MultiAlgo::E => solve_multilevel(&ml, oracle, a.p, a.common.seed)?,
        MultiAlgo::Four => four_approx_baseline(&ml, oracle)?,
    };
    let mut ok = sol.edge_sets.windows(2).all(|w| w[1].is_subset(&w[0]));
    let mut levels = Vec::new();
    for (i, set) in sol.edge_sets.iter().enumerate() {
        let s = ml.terminals_at(i + 1);
        let level_ok = s.len() < 2 || verify_spanner(&ml.g, &s, set, &cond)?.ok;
        ok &= level_ok;
        levels.push(json!({
            "level": i + 1,
            "terminals": s,
            "edges": set,
            "weight": ml.g.weight_of(set).to_f64(),
            "ok": level_ok,
        }));
    }
    let doc = json!({
        "cost": sol.cost.to_f64(),
        "p": sol.p,
        "q": sol.q_used,
        "rounded_levels": sol.rounded_levels,
        "ok": ok,
        "levels": levels,
    });
    if !ok {
        return Err(Failed(doc.to_string()).into());
    }
    Ok(match a.common.format {
        Format::Json => doc.to_string(),
        Format::Csv => {
            let mut out = String::from("level,edges,weight,ok");
            for l in &levels {
                out.push_str(&format!(
                    "\n{},{},{},{}",
                    l["level"],
                    l["edges"].as_array().map_or(0, Vec::len),
                    l["weight"],
                    l["ok"]
                ));
            }
            out
        }
    })
}

fn parse_edge_ids(text: &str) -> anyhow::Result<BTreeSet<EdgeId>> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).context("invalid edge id array");
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().with_context(|| format!("invalid edge id `{t}`")))
        .collect()
}

fn cmd_verify<W: Weight>(a: VerifyArgs) -> anyhow::Result<String> {
    let inst: Instance<W> = load_input(&a.input)?;
    let edges = parse_edge_ids(&read(&a.edges)?)?;
    let cond = condition(&a.common, BetaModeArg::Relative)?;
    let report = verify_spanner(&inst.graph, &inst.terminals, &edges, &cond)?;
    let doc = report_json(&report);
    if !report.ok {
        return Err(Failed(doc.to_string()).into());
    }
    Ok(match a.common.format {
        Format::Json => doc.to_string(),
        Format::Csv => format!(
            "ok,pairs,violations,max_excess\n{}",
            csv_line(&[
                report.ok.to_string(),
                report.pairs.len().to_string(),
                report.violations.len().to_string(),
                report.max_excess.map_or("inf".to_owned(), |x| x.to_f64().to_string()),
            ])
        ),
    })
}

fn cmd_bench(a: BenchArgs) -> anyhow::Result<String> {
    let mut cfg = ExperimentConfig::from_json_str(&read(&a.config)?)?;
    cfg.exact_arithmetic |= a.exact_arithmetic;
    let rows = run_experiment(&cfg)?;
    let all_ok = rows.iter().all(|r| r.ok);
    let out = match a.format {
        Format::Csv => rows_to_csv(&rows)?.trim_end().to_owned(),
        Format::Json => json!({ "columns": CSV_HEADER.split(',').collect::<Vec<_>>(), "rows": rows }).to_string(),
    };
    if !all_ok {
        return Err(Failed(out).into());
    }
    Ok(out)
}
