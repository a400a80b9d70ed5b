//! Seeded instance generators.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::instance::Instance;
use crate::weight::Weight;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    ErdosRenyi,
    Geometric,
    Grid,
    UnitClique,
    PartitionGadget,
}

fn default_p() -> f64 {
    0.1
}
fn default_radius() -> f64 {
    0.25
}
fn default_wmin() -> f64 {
    1.0
}
fn default_wmax() -> f64 {
    10.0
}
fn default_fraction() -> f64 {
    0.25
}
fn default_delta() -> f64 {
    0.1
}
fn default_retries() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    /// Vertex count; for the gadget, the size of each side.
    pub n: usize,
    /// Edge probability (erdos-renyi).
    #[serde(default = "default_p")]
    pub p: f64,
    /// Connection radius in the unit square (geometric).
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_wmin")]
    pub weight_min: f64,
    #[serde(default = "default_wmax")]
    pub weight_max: f64,
    /// Weights are drawn on a grid of `10^-weight_decimals`.
    #[serde(default)]
    pub weight_decimals: u32,
    #[serde(default = "default_fraction")]
    pub terminal_fraction: f64,
    /// Explicit terminal count, overriding the fraction.
    #[serde(default)]
    pub terminals: Option<usize>,
    /// Assign random levels `1..=k` to the terminals.
    #[serde(default)]
    pub levels: Option<usize>,
    /// Gadget: within-side edges weigh `2 + delta`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Gadget: split every edge once into two equal halves.
    #[serde(default)]
    pub subdivided: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, seed: u64) -> Self {
        GeneratorSpec {
            kind,
            n,
            p: default_p(),
            radius: default_radius(),
            weight_min: default_wmin(),
            weight_max: default_wmax(),
            weight_decimals: 0,
            terminal_fraction: default_fraction(),
            terminals: None,
            levels: None,
            delta: default_delta(),
            subdivided: false,
            seed,
            max_retries: default_retries(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.weight_min > 0.0 && self.weight_min <= self.weight_max) {
            return bad(format!("need 0 < weight_min <= weight_max, got [{}, {}]", self.weight_min, self.weight_max));
        }
        if !(0.0..=1.0).contains(&self.p) || !(self.radius > 0.0) {
            return bad("p must lie in [0, 1] and radius must be positive".into());
        }
        if !(self.terminal_fraction > 0.0 && self.terminal_fraction <= 1.0) {
            return bad(format!("terminal_fraction must lie in (0, 1], got {}", self.terminal_fraction));
        }
        if self.weight_decimals > 6 {
            return bad("weight_decimals is limited to 6".into());
        }
        if self.levels == Some(0) {
            return bad("levels must be at least 1".into());
        }
        if !(self.delta > 0.0) {
            return bad("delta must be positive".into());
        }
        Ok(())
    }
}

/// Weight uniform on the `10^-decimals` grid of `[min, max]`.
fn draw_weight<W: Weight>(rng: &mut ChaCha8Rng, spec: &GeneratorSpec) -> W {
    let scale = 10i64.pow(spec.weight_decimals);
    let lo = (spec.weight_min * scale as f64).ceil() as i64;
    let hi = ((spec.weight_max * scale as f64).floor() as i64).max(lo);
    W::from_ratio(rng.gen_range(lo..=hi), scale)
}

fn decimal<W: Weight>(x: f64) -> W {
    W::parse_decimal(&format!("{x}")).unwrap_or_else(|_| W::from_f64_approx(x))
}

type EdgeList<W> = Vec<(VertexId, VertexId, W)>;

fn draw_edges<W: Weight>(rng: &mut ChaCha8Rng, spec: &GeneratorSpec) -> (usize, EdgeList<W>) {
    let n = spec.n;
    let mut edges = Vec::new();
    match spec.kind {
        GeneratorKind::ErdosRenyi => {
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(spec.p) {
                        edges.push((u, v, draw_weight(rng, spec)));
                    }
                }
            }
            (n, edges)
        }
        GeneratorKind::Geometric => {
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
            let r2 = spec.radius * spec.radius;
            for u in 0..n {
                for v in u + 1..n {
                    let (dx, dy) = (pts[u].0 - pts[v].0, pts[u].1 - pts[v].1);
                    if dx * dx + dy * dy <= r2 {
                        edges.push((u, v, draw_weight(rng, spec)));
                    }
                }
            }
            (n, edges)
        }
        GeneratorKind::Grid => {
            let rows = ((n as f64).sqrt().floor() as usize).max(1);
            let cols = (n / rows).max(1);
            let id = |r: usize, c: usize| r * cols + c;
            for r in 0..rows {
                for c in 0..cols {
                    if c + 1 < cols {
                        edges.push((id(r, c), id(r, c + 1), draw_weight(rng, spec)));
                    }
                    if r + 1 < rows {
                        edges.push((id(r, c), id(r + 1, c), draw_weight(rng, spec)));
                    }
                }
            }
            (rows * cols, edges)
        }
        GeneratorKind::UnitClique => {
            for u in 0..n {
                for v in u + 1..n {
                    edges.push((u, v, W::one()));
                }
            }
            (n, edges)
        }
        GeneratorKind::PartitionGadget => {
            let total = 2 * n;
            let cross: W = W::from_usize(2);
            let within: W = W::from_usize(2) + decimal(spec.delta);
            let mut next = total;
            for u in 0..total {
                for v in u + 1..total {
                    let w = if (u < n) != (v < n) { cross.clone() } else { within.clone() };
                    if spec.subdivided {
                        let half = w / W::from_usize(2);
                        edges.push((u, next, half.clone()));
                        edges.push((next, v, half));
                        next += 1;
                    } else {
                        edges.push((u, v, w));
                    }
                }
            }
            (next, edges)
        }
    }
}

/// A generated instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated<W> {
    pub graph: Graph<W>,
    pub terminals: Vec<VertexId>,
    pub levels: Option<BTreeMap<VertexId, usize>>,
}

impl<W: Weight> Generated<W> {
    pub fn into_instance(self) -> Instance<W> {
        Instance {
            graph: self.graph,
            terminals: self.terminals,
            levels: self.levels,
        }
    }
}

/// Draw an instance; disconnected draws are retried up to `max_retries` times.
pub fn generate<W: Weight>(spec: &GeneratorSpec) -> Result<Generated<W>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut attempts = 0;
    let (n, graph) = loop {
        attempts += 1;
        let (n, edges) = draw_edges::<W>(&mut rng, spec);
        let g = Graph::new(n, edges)?;
        if g.is_connected() {
            break (n, g);
        }
        if attempts > spec.max_retries {
            return Err(Error::RetriesExhausted { attempts });
        }
    };
    let terminals: Vec<VertexId> = match spec.kind {
        GeneratorKind::UnitClique => (0..n).collect(),
        GeneratorKind::PartitionGadget => (0..2 * spec.n).collect(),
        _ => {
            let count = spec
                .terminals
                .unwrap_or_else(|| ((n as f64) * spec.terminal_fraction).round() as usize)
                .clamp(1, n);
            let mut t: Vec<VertexId> = sample(&mut rng, n, count).into_vec();
            t.sort_unstable();
            t
        }
    };
    let levels = spec.levels.map(|k| {
        let mut map: BTreeMap<VertexId, usize> = terminals.iter().map(|&t| (t, rng.gen_range(1..=k))).collect();
        // keep the top level nonempty
        if let Some(first) = terminals.first() {
            map.insert(*first, k);
        }
        map
    });
    Ok(Generated {
        graph,
        terminals,
        levels,
    })
}
