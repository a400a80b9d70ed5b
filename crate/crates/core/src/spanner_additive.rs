//! The deterministic `+εW(·,·)` and `+(4+ε)W(·,·)` constructions.
//!
//! Both run in the spliced universe of [`crate::transform`]: start from an
//! initial subgraph `H_1` (a light neighborhood around the terminals plus the
//! subdivided backbone), then walk the terminal pairs in increasing order of
//! `W` and add the missing edges of every fixed path whose pair still breaks
//! the condition.

use std::collections::{BTreeMap, BTreeSet};

use crate::condition::AdditiveCondition;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::oracle::{subset_lightness, verify_with_paths, Lightness, VerificationReport};
use crate::paths::{build_path_table, normalize_terminals, search_all, search_masked, FixedPath, PathTable, SearchTree};
use crate::steiner::{build_backbone, Backbone};
use crate::transform::{build_universe, map_back, ScaledInstance};
use crate::weight::Weight;

/// `ε = 2ε₁ + ε₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonSplit<W> {
    pub eps: W,
    pub eps1: W,
    pub eps2: W,
}

impl<W: Weight> EpsilonSplit<W> {
    pub fn new(eps: W, eps1: W, eps2: W) -> Result<Self> {
        if !eps1.is_positive() || !eps2.is_positive() {
            return Err(Error::InvalidParameter("eps1 and eps2 must be positive".into()));
        }
        let total = eps1.clone() + eps1.clone() + eps2.clone();
        let close = if W::EXACT {
            total == eps
        } else {
            total.le_tol(&eps) && eps.le_tol(&total)
        };
        if !close {
            return Err(Error::InvalidParameter(format!(
                "2*eps1 + eps2 = {total} does not equal eps = {eps}"
            )));
        }
        Ok(EpsilonSplit { eps, eps1, eps2 })
    }

    /// `ε₁ = ε/4`, `ε₂ = ε/2`.
    pub fn from_eps(eps: W) -> Result<Self> {
        if !eps.is_positive() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
        }
        let eps1 = eps.clone() / W::from_usize(4);
        let eps2 = eps.clone() / W::from_usize(2);
        Self::new(eps, eps1, eps2)
    }
}

/// Counters collected while a spanner is built.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpannerStats {
    pub h_vertices: usize,
    pub s_prime: usize,
    pub unsatisfied_pairs: usize,
    pub subdivision_vertices: usize,
    pub heavy_removed: usize,
    pub initial_edges: usize,
    pub pairs_examined: usize,
    pub insertions: usize,
    /// Budget `d` of the `+(4+ε)W` construction.
    pub budget: Option<f64>,
    /// Threshold and sample data of the sampled construction.
    pub ell: Option<f64>,
    pub ell_fallback: bool,
    pub sample_size: usize,
    pub sampled_h_vertices: usize,
    pub prefix_suffix_pairs: usize,
    pub repairs: usize,
    pub chain_checks: usize,
    pub chain_violations: usize,
    pub improvement: Option<ImprovementCounters>,
}

/// A certified spanner of the input graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Spanner<W> {
    pub terminals: Vec<VertexId>,
    pub condition: AdditiveCondition<W>,
    pub edges: BTreeSet<EdgeId>,
    pub weight: W,
    pub report: VerificationReport<W>,
    pub lightness: Lightness<W>,
    pub stats: SpannerStats,
}

impl<W: Weight> Spanner<W> {
    pub fn subset_lightness(&self) -> &W {
        &self.lightness.ratio
    }
}

/// Verify `edges` against the backbone's condition and measure lightness.
pub fn certify<W: Weight>(
    g: &Graph<W>,
    backbone: &Backbone<W>,
    edges: BTreeSet<EdgeId>,
    stats: SpannerStats,
) -> Result<Spanner<W>> {
    let report = verify_with_paths(g, &backbone.paths, &edges, &backbone.condition)?;
    let weight = g.weight_of(&edges);
    let lightness = subset_lightness(g, backbone, &weight);
    Ok(Spanner {
        terminals: backbone.terminals.clone(),
        condition: backbone.condition.clone(),
        edges,
        weight,
        report,
        lightness,
        stats,
    })
}

/// Set-off and improvement counts gathered by the optional instrumentation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImprovementCounters {
    /// Witness checks of the `2ε₁W` bound after an insertion.
    pub near_checks: usize,
    pub near_failures: usize,
    /// Insertions that broke the `εW_{G'_s}` condition, and witnesses of
    /// such insertions where neither endpoint improved by more than `ε₂W/2`.
    pub strict_triggers: usize,
    pub improvement_failures: usize,
    pub set_offs: usize,
    pub improvements: usize,
    /// Largest improvement count of a single (endpoint, witness) pair.
    pub max_improvements_per_pair: usize,
    /// `⌈4ε₁/ε₂⌉ + 1`, the reported budget.
    pub improvement_budget: usize,
}

#[derive(Clone, Debug)]
struct ImprovementTracker<W> {
    split: EpsilonSplit<W>,
    counters: ImprovementCounters,
    set_off: BTreeMap<(VertexId, VertexId), usize>,
    full_trees: BTreeMap<VertexId, SearchTree<W>>,
}

/// Witnesses examined per insertion.
const IMPROVEMENT_WITNESSES: usize = 8;

impl<W: Weight> ImprovementTracker<W> {
    fn new(split: EpsilonSplit<W>) -> Self {
        let ratio = (split.eps1.to_f64() * 4.0 / split.eps2.to_f64()).ceil() as usize;
        ImprovementTracker {
            split,
            counters: ImprovementCounters {
                improvement_budget: ratio + 1,
                ..Default::default()
            },
            set_off: BTreeMap::new(),
            full_trees: BTreeMap::new(),
        }
    }

    fn record(&mut self, gp: &Graph<W>, path: &FixedPath<W>, before: &[bool], after: &[bool], d_before: Option<&W>) {
        let w = path.max_edge.clone();
        let (u, v) = path.endpoints;
        let p = path.vertices[path.vertices.len() / 2];
        let radius = self.split.eps1.clone() * w.clone();
        let from_p = search_masked(gp, p, before, None);
        let mut witnesses: Vec<(W, VertexId)> = (0..gp.n())
            .filter_map(|q| from_p.dist(q).filter(|d| d.le_tol(&radius)).map(|d| (d.clone(), q)))
            .collect();
        witnesses.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        witnesses.truncate(IMPROVEMENT_WITNESSES);
        let two_eps1_w = self.split.eps1.clone() * W::from_usize(2) * w.clone();
        let half_eps2_w = self.split.eps2.clone() * w.clone() / W::from_usize(2);
        let strict = match d_before {
            None => true,
            Some(d) => *d > path.dist.clone() + self.split.eps.clone() * w.clone(),
        };
        if strict {
            self.counters.strict_triggers += 1;
        }
        let mut trees = Vec::new();
        for x in [u, v] {
            let full = self.full_trees.entry(x).or_insert_with(|| search_all(gp, x)).clone();
            trees.push((x, search_masked(gp, x, before, None), search_masked(gp, x, after, None), full));
        }
        for &(_, q) in &witnesses {
            let mut improved_here = false;
            for (x, t_before, t_after, full) in &trees {
                let base = full.dist(q).cloned().expect("witness is connected in the universe");
                let after_d = t_after.dist(q).cloned();
                let near = after_d
                    .as_ref()
                    .is_some_and(|d| d.le_tol(&(base.clone() + two_eps1_w.clone())));
                self.counters.near_checks += 1;
                if !near {
                    self.counters.near_failures += 1;
                }
                let gain = match (t_before.dist(q), &after_d) {
                    (None, Some(_)) => true,
                    (Some(b), Some(a)) => b.clone() - a.clone() > half_eps2_w,
                    _ => false,
                };
                improved_here |= gain;
                let key = (*x, q);
                match self.set_off.get_mut(&key) {
                    None if near => {
                        self.set_off.insert(key, 0);
                        self.counters.set_offs += 1;
                    }
                    Some(count) if gain => {
                        *count += 1;
                        self.counters.improvements += 1;
                        self.counters.max_improvements_per_pair =
                            self.counters.max_improvements_per_pair.max(*count);
                    }
                    _ => {}
                }
            }
            if strict && !improved_here {
                self.counters.improvement_failures += 1;
            }
        }
    }
}

/// The growing subgraph `H_i` of the spliced universe.
#[derive(Clone, Debug)]
pub struct GreedyState<W> {
    pub current: BTreeSet<EdgeId>,
    pub mask: Vec<bool>,
    pub pairs_examined: usize,
    pub insertions: usize,
    /// Every pair satisfied the condition in the final re-check.
    pub all_satisfied: bool,
    pub improvement: Option<ImprovementCounters>,
    tracker: Option<ImprovementTracker<W>>,
}

impl<W: Weight> GreedyState<W> {
    pub fn new(g: &Graph<W>, initial: &BTreeSet<EdgeId>) -> Self {
        GreedyState {
            current: initial.clone(),
            mask: g.mask(initial),
            pairs_examined: 0,
            insertions: 0,
            all_satisfied: false,
            improvement: None,
            tracker: None,
        }
    }

    /// Add edges, reporting whether any was new.
    pub fn insert(&mut self, edges: impl IntoIterator<Item = EdgeId>) -> bool {
        let mut changed = false;
        for e in edges {
            if self.current.insert(e) {
                self.mask[e] = true;
                changed = true;
            }
        }
        changed
    }

    /// Distance between `u` and `v` in the current subgraph.
    pub fn distance(&self, g: &Graph<W>, u: VertexId, v: VertexId) -> Option<W> {
        search_masked(g, u, &self.mask, Some(v)).dist(v).cloned()
    }
}

/// Pair order of the greedy loop: `W` in the universe, then distance, then ids.
pub fn pair_order<W: Weight>(paths: &PathTable<W>) -> Vec<(VertexId, VertexId)> {
    let mut keys: Vec<(VertexId, VertexId)> = paths.pairs.keys().copied().collect();
    keys.sort_by(|a, b| {
        let (pa, pb) = (&paths.pairs[a], &paths.pairs[b]);
        pa.max_edge
            .total_cmp(&pb.max_edge)
            .then(pa.dist.total_cmp(&pb.dist))
            .then(a.cmp(b))
    });
    keys
}

/// Fixed paths of the terminals inside the spliced universe.
pub fn universe_paths<W: Weight>(inst: &ScaledInstance<W>, s: &[VertexId]) -> Result<PathTable<W>> {
    build_path_table(inst.spliced(), s)
}

/// The greedy completion loop.
///
/// Pairs are visited once in [`pair_order`]; a pair whose distance in the
/// current subgraph exceeds its universe distance plus `slack` gets every
/// missing edge of its fixed path. All pairs are re-checked at the end.
pub fn greedy_complete<W, F>(
    inst: &ScaledInstance<W>,
    initial: &BTreeSet<EdgeId>,
    paths: &PathTable<W>,
    slack: F,
    instrument: Option<&EpsilonSplit<W>>,
) -> GreedyState<W>
where
    W: Weight,
    F: Fn(&FixedPath<W>) -> W,
{
    let gp = inst.spliced();
    let mut state = GreedyState::new(gp, initial);
    state.tracker = instrument.map(|split| ImprovementTracker::new(split.clone()));
    for key in pair_order(paths) {
        let path = &paths.pairs[&key];
        state.pairs_examined += 1;
        let sl = slack(path);
        let d = state.distance(gp, key.0, key.1);
        if d.as_ref().is_some_and(|d| d.le_tol(&(path.dist.clone() + sl.clone()))) {
            continue;
        }
        let before = state.tracker.as_ref().map(|_| state.mask.clone());
        if state.insert(path.edges.iter().copied()) {
            state.insertions += 1;
        }
        if let (Some(tracker), Some(before)) = (state.tracker.as_mut(), before) {
            tracker.record(gp, path, &before, &state.mask, d.as_ref());
        }
    }
    state.all_satisfied = paths.pairs.values().all(|p| {
        let d = state.distance(gp, p.endpoints.0, p.endpoints.1);
        d.is_some_and(|d| d.le_tol(&(p.dist.clone() + slack(p))))
    });
    state.improvement = state.tracker.take().map(|t| t.counters);
    state
}

/// For each `v` in `S'`, its lightest incident edge if that weight is below one.
pub fn build_h0_eps<W: Weight>(inst: &ScaledInstance<W>, s_prime: &BTreeSet<VertexId>) -> BTreeSet<EdgeId> {
    let mut out = BTreeSet::new();
    for &v in s_prime {
        let lightest = inst
            .g_s
            .neighbors(v)
            .iter()
            .map(|&(_, e)| e)
            .filter(|&e| inst.keeps(e))
            .min_by(|&a, &b| inst.g_s.edge(a).w.total_cmp(&inst.g_s.edge(b).w).then(a.cmp(&b)));
        if let Some(e) = lightest {
            if inst.g_s.edge(e).w < W::one() {
                out.extend(inst.forward[e].iter().copied());
            }
        }
    }
    out
}

/// For each `u` in `S`, its incident edges in ascending weight order while
/// the running total stays within `d`.
pub fn build_h0_budget<W: Weight>(inst: &ScaledInstance<W>, s: &[VertexId], d: &W) -> BTreeSet<EdgeId> {
    let mut out = BTreeSet::new();
    for &u in s {
        let mut incident: Vec<EdgeId> = inst
            .g_s
            .neighbors(u)
            .iter()
            .map(|&(_, e)| e)
            .filter(|&e| inst.keeps(e))
            .collect();
        incident.sort_by(|&a, &b| inst.g_s.edge(a).w.total_cmp(&inst.g_s.edge(b).w).then(a.cmp(&b)));
        let mut total = W::zero();
        for e in incident {
            let next = total.clone() + inst.g_s.edge(e).w.clone();
            if !next.le_tol(d) {
                break;
            }
            total = next;
            out.extend(inst.forward[e].iter().copied());
        }
    }
    out
}

/// `d = max(1, |V_H|^{4/3} / |S|^{2/3})`, capped by the largest incident
/// weight sum of a terminal. Exact mode rounds to a `1e-6` grid.
pub fn budget_d<W: Weight>(inst: &ScaledInstance<W>, s: &[VertexId]) -> W {
    let raw = ((inst.vh * inst.vh) as f64 / s.len().max(1) as f64).cbrt().powi(2);
    let cap = s
        .iter()
        .map(|&u| {
            W::sum_iter(
                inst.g_s
                    .neighbors(u)
                    .iter()
                    .filter(|&&(_, e)| inst.keeps(e))
                    .map(|&(_, e)| inst.g_s.edge(e).w.clone()),
            )
        })
        .fold(W::zero(), W::max_of);
    let d = W::from_f64_approx(raw);
    let d = if cap < d { cap } else { d };
    W::max_of(W::one(), d)
}

/// Which `H_0` rule starts the greedy loop.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialRule<W> {
    /// Lightest sub-unit edge around each vertex of `S'`.
    Eps,
    /// Incident prefix of total weight at most `d` around each terminal.
    Budget(W),
    /// `d` from [`budget_d`].
    DefaultBudget,
}

/// Options shared by the two deterministic builders.
#[derive(Clone, Debug)]
pub struct BuildOptions<W> {
    /// Collect set-off and improvement counters.
    pub instrument: Option<EpsilonSplit<W>>,
}

impl<W> Default for BuildOptions<W> {
    fn default() -> Self {
        BuildOptions { instrument: None }
    }
}

pub(crate) fn checked_input<W: Weight>(g: &Graph<W>, s: &[VertexId]) -> Result<Vec<VertexId>> {
    let terms = normalize_terminals(s);
    if terms.is_empty() {
        return Err(Error::EmptyTerminals);
    }
    for &t in &terms {
        g.check_vertex(t)?;
    }
    g.ensure_connected()?;
    Ok(terms)
}

/// Base statistics of a pipeline run.
pub(crate) fn universe_stats<W: Weight>(backbone: &Backbone<W>, inst: &ScaledInstance<W>) -> SpannerStats {
    SpannerStats {
        h_vertices: inst.vh,
        s_prime: backbone.s_prime.len(),
        unsatisfied_pairs: backbone.unsatisfied_pairs.len(),
        subdivision_vertices: inst.h_prime.as_ref().map_or(0, |h| h.subdivision_vertices),
        heavy_removed: inst.heavy.len(),
        ..Default::default()
    }
}

/// `H_1` for a rule: the chosen `H_0` plus the subdivided backbone.
pub fn initial_subgraph<W: Weight>(
    inst: &ScaledInstance<W>,
    backbone: &Backbone<W>,
    rule: &InitialRule<W>,
) -> (BTreeSet<EdgeId>, Option<W>) {
    let (mut h0, d) = match rule {
        InitialRule::Eps => (build_h0_eps(inst, &backbone.s_prime), None),
        InitialRule::Budget(d) => (build_h0_budget(inst, &backbone.terminals, d), Some(d.clone())),
        InitialRule::DefaultBudget => {
            let d = budget_d(inst, &backbone.terminals);
            (build_h0_budget(inst, &backbone.terminals, &d), Some(d))
        }
    };
    h0.extend(inst.h_prime_edges.iter().copied());
    (h0, d)
}

/// Relative-mode pipeline shared by [`eps_spanner`] and [`four_eps_spanner`].
pub fn relative_pipeline<W: Weight>(
    g: &Graph<W>,
    s: &[VertexId],
    beta: W,
    rule: InitialRule<W>,
    options: &BuildOptions<W>,
) -> Result<Spanner<W>> {
    let terms = checked_input(g, s)?;
    let backbone = build_backbone(g, &terms, AdditiveCondition::relative(beta.clone()))?;
    let inst = build_universe(g, &backbone)?;
    let paths = universe_paths(&inst, &terms)?;
    let (initial, d) = initial_subgraph(&inst, &backbone, &rule);
    let sigma = inst.sigma.clone();
    // the smaller of the universe W and the rescaled input W keeps the
    // result certified in the input graph even if the fixed paths differ
    let slack = |p: &FixedPath<W>| {
        let (u, v) = p.endpoints;
        let w_g = backbone.paths.max_edge(u, v).cloned().unwrap_or_else(W::zero) * sigma.clone();
        beta.clone() * W::min_of(p.max_edge.clone(), w_g)
    };
    let state = greedy_complete(&inst, &initial, &paths, slack, options.instrument.as_ref());
    let mut edges = map_back(&inst, &state.current)?;
    edges.extend(backbone.h.edges.iter().copied());
    let mut stats = universe_stats(&backbone, &inst);
    stats.initial_edges = initial.len();
    stats.pairs_examined = state.pairs_examined;
    stats.insertions = state.insertions;
    stats.budget = d.map(|d| d.to_f64());
    stats.improvement = state.improvement;
    certify(g, &backbone, edges, stats)
}

/// `+εW(·,·)` subsetwise spanner.
pub fn eps_spanner<W: Weight>(g: &Graph<W>, s: &[VertexId], split: &EpsilonSplit<W>) -> Result<Spanner<W>> {
    relative_pipeline(g, s, split.eps.clone(), InitialRule::Eps, &BuildOptions::default())
}

/// `+(4+ε)W(·,·)` subsetwise spanner.
pub fn four_eps_spanner<W: Weight>(g: &Graph<W>, s: &[VertexId], split: &EpsilonSplit<W>) -> Result<Spanner<W>> {
    let beta = W::from_usize(4) + split.eps.clone();
    relative_pipeline(g, s, beta, InitialRule::DefaultBudget, &BuildOptions::default())
}
