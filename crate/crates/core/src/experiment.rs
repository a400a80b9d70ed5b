//! Experiment runner: a JSON config in, one CSV row per
//! (instance, algorithm, seed) cell out.
//!
//! Columns: `instance,algo,seed,n,S,edges,weight,lightness,ok,runtime_ms,extra_json`.
//! `weight` is the spanner weight (the level-summed cost for multilevel
//! rows), `lightness` is the subset-lightness (for multilevel rows, the cost
//! over the summed per-level Steiner weights), and `extra_json` carries
//! algorithm-specific data such as `q` or the repair count.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::condition::AdditiveCondition;
use crate::error::{Error, Result};
use crate::generate::{generate, GeneratorSpec};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::multilevel::{four_approx_baseline, solve_multilevel, EpsSpannerOracle, MultiLevelInstance};
use crate::oracle::verify_spanner;
use crate::spanner_additive::{eps_spanner, four_eps_spanner, EpsilonSplit, Spanner};
use crate::spanner_sampled::{wmax_spanner, EllSetting, SampleConfig};
use crate::steiner::{approx_steiner, exact_steiner, EXACT_STEINER_LIMIT};
use crate::weight::{Exact, Weight};

pub const CSV_HEADER: &str = "instance,algo,seed,n,S,edges,weight,lightness,ok,runtime_ms,extra_json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "eps")]
    Eps,
    #[serde(rename = "four-eps")]
    FourEps,
    #[serde(rename = "wmax")]
    Wmax,
    #[serde(rename = "multilevel-e")]
    MultilevelE,
    #[serde(rename = "multilevel-4")]
    Multilevel4,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Eps => "eps",
            Algorithm::FourEps => "four-eps",
            Algorithm::Wmax => "wmax",
            Algorithm::MultilevelE => "multilevel-e",
            Algorithm::Multilevel4 => "multilevel-4",
        }
    }
}

fn default_epsilon() -> f64 {
    0.5
}
fn default_c() -> f64 {
    2.0
}
fn default_p() -> f64 {
    std::f64::consts::E
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instances: Vec<GeneratorSpec>,
    #[serde(default)]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Each seed regenerates every instance with that seed and drives the
    /// randomized algorithms. Empty means each spec's own seed.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_c")]
    pub c: f64,
    /// Base of the multilevel rounding grid.
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub exact_arithmetic: bool,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub algo: String,
    pub seed: u64,
    pub n: usize,
    #[serde(rename = "S")]
    pub s: usize,
    pub edges: usize,
    pub weight: f64,
    pub lightness: f64,
    pub ok: bool,
    pub runtime_ms: f64,
    pub extra_json: String,
}

struct Cell {
    index: usize,
    spec: GeneratorSpec,
    algo: Algorithm,
    seed: u64,
}

/// Run every cell, in parallel, and return rows in cell order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    if !(config.epsilon > 0.0) || !(config.c > 0.0) || !(config.p > 1.0) {
        return Err(Error::Config("epsilon and c must be positive and p must exceed 1".into()));
    }
    let mut cells = Vec::new();
    for (index, spec) in config.instances.iter().enumerate() {
        let seeds = if config.seeds.is_empty() {
            vec![spec.seed]
        } else {
            config.seeds.clone()
        };
        for &seed in &seeds {
            for &algo in &config.algorithms {
                let mut spec = spec.clone();
                spec.seed = seed;
                cells.push(Cell { index, spec, algo, seed });
            }
        }
    }
    cells
        .par_iter()
        .map(|cell| {
            if config.exact_arithmetic {
                run_cell::<Exact>(config, cell)
            } else {
                run_cell::<f64>(config, cell)
            }
        })
        .collect()
}

fn instance_name(cell: &Cell) -> String {
    let kind = serde_json::to_value(cell.spec.kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    format!("{}:{}:n{}", cell.index, kind, cell.spec.n)
}

fn spanner_row<W: Weight>(sp: &Spanner<W>, extra: serde_json::Value) -> (usize, f64, f64, bool, serde_json::Value) {
    (sp.edges.len(), sp.weight.to_f64(), sp.lightness.ratio.to_f64(), sp.report.ok, extra)
}

fn run_cell<W: Weight>(config: &ExperimentConfig, cell: &Cell) -> Result<ResultRow> {
    let generated = generate::<W>(&cell.spec)?;
    let g = &generated.graph;
    let s = &generated.terminals;
    let eps = W::parse_decimal(&config.epsilon.to_string())?;
    let split = EpsilonSplit::from_eps(eps.clone())?;
    let start = Instant::now();
    let (edges, weight, lightness, ok, extra) = match cell.algo {
        Algorithm::Eps => {
            let sp = eps_spanner(g, s, &split)?;
            spanner_row(&sp, json!({"lower_bound": sp.lightness.mode.as_str(), "insertions": sp.stats.insertions}))
        }
        Algorithm::FourEps => {
            let sp = four_eps_spanner(g, s, &split)?;
            spanner_row(
                &sp,
                json!({"lower_bound": sp.lightness.mode.as_str(), "insertions": sp.stats.insertions, "d": sp.stats.budget}),
            )
        }
        Algorithm::Wmax => {
            let cfg = SampleConfig {
                c: config.c,
                seed: cell.seed,
                split: split.clone(),
                ell: EllSetting::Auto,
                instrument: false,
            };
            let sp = wmax_spanner(g, s, &cfg)?;
            let extra = json!({
                "lower_bound": sp.lightness.mode.as_str(),
                "ell": sp.stats.ell,
                "fallback": sp.stats.ell_fallback,
                "sample": sp.stats.sample_size,
                "v_h": sp.stats.h_vertices,
                "v_h_sampled": sp.stats.sampled_h_vertices,
                "repairs": sp.stats.repairs,
            });
            spanner_row(&sp, extra)
        }
        Algorithm::MultilevelE | Algorithm::Multilevel4 => {
            let levels = generated
                .levels
                .clone()
                .unwrap_or_else(|| s.iter().map(|&t| (t, 1)).collect());
            let inst = MultiLevelInstance::new(g.clone(), levels, AdditiveCondition::relative(eps))?;
            let sol = if cell.algo == Algorithm::MultilevelE {
                solve_multilevel(&inst, &EpsSpannerOracle, config.p, cell.seed)?
            } else {
                four_approx_baseline(&inst, &EpsSpannerOracle)?
            };
            let mut ok = true;
            for (i, set) in sol.edge_sets.iter().enumerate() {
                ok &= levels_ok(g, &inst.terminals_at(i + 1), set, &inst.condition)?;
            }
            ok &= sol.edge_sets.windows(2).all(|w| w[1].is_subset(&w[0]));
            let lower = W::sum_iter(
                (1..=inst.k)
                    .map(|i| steiner_weight(g, &inst.terminals_at(i)))
                    .collect::<Result<Vec<W>>>()?,
            );
            let cost = sol.cost.to_f64();
            let edges = sol.edge_sets.first().map_or(0, BTreeSet::len);
            let extra = json!({"q": sol.q_used, "p": sol.p, "k": inst.k, "rounded_levels": sol.rounded_levels});
            (edges, cost, if lower.is_positive() { cost / lower.to_f64() } else { 1.0 }, ok, extra)
        }
    };
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(ResultRow {
        instance: instance_name(cell),
        algo: cell.algo.name().to_owned(),
        seed: cell.seed,
        n: g.n(),
        s: s.len(),
        edges,
        weight,
        lightness,
        ok,
        runtime_ms,
        extra_json: extra.to_string(),
    })
}

fn levels_ok<W: Weight>(
    g: &Graph<W>,
    s: &[VertexId],
    set: &BTreeSet<EdgeId>,
    condition: &AdditiveCondition<W>,
) -> Result<bool> {
    if s.len() < 2 {
        return Ok(true);
    }
    Ok(verify_spanner(g, s, set, condition)?.ok)
}

fn steiner_weight<W: Weight>(g: &Graph<W>, s: &[VertexId]) -> Result<W> {
    if s.len() <= EXACT_STEINER_LIMIT {
        Ok(exact_steiner(g, s)?.weight)
    } else {
        Ok(approx_steiner(g, s)?.weight)
    }
}

/// CSV text with the fixed header, rows in order.
pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::Config(e.to_string()))?)
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(format!("{CSV_HEADER}\n{body}"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected header `{}`", header.join(","))));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

/// Mean lightness at one terminal count.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendPoint {
    pub family: String,
    pub s: usize,
    pub eps_lightness: f64,
    pub four_eps_lightness: f64,
    /// `eps_lightness / |S|`.
    pub eps_per_terminal: f64,
    pub four_eps_per_terminal: f64,
}

/// Lightness-vs-`|S|` curve of one generator family, averaged over seeds.
pub fn scaling_trend(base: &GeneratorSpec, sizes: &[usize], seeds: &[u64], epsilon: f64) -> Result<Vec<TrendPoint>> {
    let split = EpsilonSplit::from_eps(epsilon)?;
    let family = serde_json::to_value(base.kind)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    sizes
        .iter()
        .map(|&size| {
            let runs: Vec<(f64, f64)> = seeds
                .par_iter()
                .map(|&seed| {
                    let mut spec = base.clone();
                    spec.seed = seed;
                    spec.terminals = Some(size);
                    let inst = generate::<f64>(&spec)?;
                    let a = eps_spanner(&inst.graph, &inst.terminals, &split)?;
                    let b = four_eps_spanner(&inst.graph, &inst.terminals, &split)?;
                    Ok((a.lightness.ratio, b.lightness.ratio))
                })
                .collect::<Result<_>>()?;
            let k = runs.len().max(1) as f64;
            let eps_l = runs.iter().map(|r| r.0).sum::<f64>() / k;
            let four_l = runs.iter().map(|r| r.1).sum::<f64>() / k;
            Ok(TrendPoint {
                family: family.clone(),
                s: size,
                eps_lightness: eps_l,
                four_eps_lightness: four_l,
                eps_per_terminal: eps_l / size as f64,
                four_eps_per_terminal: four_l / size as f64,
            })
        })
        .collect()
}
