//! Ground truth: spanner verification, subset-lightness, and exhaustive
//! optima for tiny instances.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::condition::AdditiveCondition;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::multilevel::MultiLevelInstance;
use crate::paths::{build_path_table, normalize_terminals, search_masked, PathTable};
use crate::steiner::{exact_steiner, Backbone, EXACT_STEINER_LIMIT};
use crate::weight::Weight;

/// Edge limit of [`exact_one_level`].
pub const EXACT_ONE_LEVEL_EDGES: usize = 20;
/// Edge limit of [`exact_multilevel`].
pub const EXACT_MULTILEVEL_EDGES: usize = 12;
/// Level limit of [`exact_multilevel`].
pub const EXACT_MULTILEVEL_LEVELS: usize = 3;

/// Outcome of checking one terminal pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCheck<W> {
    pub pair: (VertexId, VertexId),
    pub d_g: W,
    /// `None` when the pair is disconnected in the candidate.
    pub d_h: Option<W>,
    /// `W(u, v)` along the fixed path in the input graph.
    pub w: W,
    pub slack: W,
}

impl<W: Weight> PairCheck<W> {
    /// `d_h - d_g - slack`; `None` stands for infinity.
    pub fn excess(&self) -> Option<W> {
        self.d_h
            .as_ref()
            .map(|d| d.clone() - self.d_g.clone() - self.slack.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport<W> {
    pub ok: bool,
    pub pairs: Vec<PairCheck<W>>,
    pub violations: Vec<PairCheck<W>>,
    /// Worst excess over all violations, zero when `ok`, `None` if infinite.
    pub max_excess: Option<W>,
}

fn opt_json<W: Weight>(w: &Option<W>) -> Value {
    match w {
        Some(x) => json!(x.to_f64()),
        None => Value::Null,
    }
}

impl<W: Weight> VerificationReport<W> {
    /// JSON form; infinite distances and excesses are `null`.
    pub fn to_json(&self) -> Value {
        let violations: Vec<Value> = self
            .violations
            .iter()
            .map(|p| {
                json!({
                    "pair": [p.pair.0, p.pair.1],
                    "d_g": p.d_g.to_f64(),
                    "d_h": opt_json(&p.d_h),
                    "slack": p.slack.to_f64(),
                    "excess": opt_json(&p.excess()),
                })
            })
            .collect();
        json!({
            "ok": self.ok,
            "pairs_checked": self.pairs.len(),
            "violations": violations,
            "max_excess": opt_json(&self.max_excess),
        })
    }
}

/// Check every terminal pair against a precomputed path table of `g`.
pub fn verify_with_paths<W: Weight>(
    g: &Graph<W>,
    paths: &PathTable<W>,
    edges: &BTreeSet<EdgeId>,
    condition: &AdditiveCondition<W>,
) -> Result<VerificationReport<W>> {
    g.check_edges(edges)?;
    let mask = g.mask(edges);
    let w_max = g.max_edge_weight();
    let mut pairs = Vec::with_capacity(paths.len());
    let mut source = None;
    let mut tree = None;
    for (&(u, v), path) in &paths.pairs {
        if source != Some(u) {
            tree = Some(search_masked(g, u, &mask, None));
            source = Some(u);
        }
        let d_h = tree.as_ref().and_then(|t| t.dist(v).cloned());
        pairs.push(PairCheck {
            pair: (u, v),
            d_g: path.dist.clone(),
            d_h,
            w: path.max_edge.clone(),
            slack: condition.slack(&path.max_edge, &w_max),
        });
    }
    let violations: Vec<PairCheck<W>> = pairs
        .iter()
        .filter(|p| !condition.holds(p.d_h.as_ref(), &p.d_g, &p.slack))
        .cloned()
        .collect();
    let mut max_excess = Some(W::zero());
    for p in &violations {
        max_excess = match (max_excess, p.excess()) {
            (Some(a), Some(b)) => Some(W::max_of(a, b)),
            _ => None,
        };
    }
    Ok(VerificationReport {
        ok: violations.is_empty(),
        pairs,
        violations,
        max_excess,
    })
}

/// Check `d_H(u,v) <= d_G(u,v) + slack(u,v)` for every pair of terminals.
pub fn verify_spanner<W: Weight>(
    g: &Graph<W>,
    s: &[VertexId],
    edges: &BTreeSet<EdgeId>,
    condition: &AdditiveCondition<W>,
) -> Result<VerificationReport<W>> {
    let paths = build_path_table(g, s)?;
    verify_with_paths(g, &paths, edges, condition)
}

/// Which Steiner tree the lightness denominator came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LowerBoundMode {
    /// Optimal tree over `S'`.
    Exact,
    /// The backbone's approximate tree `T`.
    Approximate,
}

impl LowerBoundMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LowerBoundMode::Exact => "exact",
            LowerBoundMode::Approximate => "approx",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lightness<W> {
    pub ratio: W,
    pub steiner_weight: W,
    pub mode: LowerBoundMode,
}

/// `spanner_weight / weight(T)` with `T` a Steiner tree over `S ∪ S*`.
///
/// A zero denominator only arises for a single terminal; the ratio is then
/// one for an empty spanner and the spanner weight itself otherwise.
pub fn subset_lightness<W: Weight>(g: &Graph<W>, backbone: &Backbone<W>, spanner_weight: &W) -> Lightness<W> {
    let terminals: Vec<VertexId> = backbone.s_prime.iter().copied().collect();
    let (steiner_weight, mode) = if terminals.len() <= EXACT_STEINER_LIMIT {
        match exact_steiner(g, &terminals) {
            Ok(t) => (t.weight, LowerBoundMode::Exact),
            Err(_) => (backbone.t.weight.clone(), LowerBoundMode::Approximate),
        }
    } else {
        (backbone.t.weight.clone(), LowerBoundMode::Approximate)
    };
    let ratio = if steiner_weight.is_positive() {
        spanner_weight.clone() / steiner_weight.clone()
    } else if spanner_weight.is_positive() {
        spanner_weight.clone()
    } else {
        W::one()
    };
    Lightness {
        ratio,
        steiner_weight,
        mode,
    }
}

/// Minimum-weight edge set of a tiny graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimum<W> {
    pub edges: BTreeSet<EdgeId>,
    pub weight: W,
}

/// Early-exit feasibility check against a fixed path table.
fn feasible<W: Weight>(
    g: &Graph<W>,
    paths: &PathTable<W>,
    mask: &[bool],
    condition: &AdditiveCondition<W>,
    w_max: &W,
) -> bool {
    let mut source = None;
    let mut tree = None;
    for (&(u, v), path) in &paths.pairs {
        if source != Some(u) {
            tree = Some(search_masked(g, u, mask, None));
            source = Some(u);
        }
        let d_h = tree.as_ref().and_then(|t| t.dist(v));
        let slack = condition.slack(&path.max_edge, w_max);
        if !condition.holds(d_h, &path.dist, &slack) {
            return false;
        }
    }
    true
}

fn require_exact<W: Weight>(what: &'static str) -> Result<()> {
    if W::EXACT {
        Ok(())
    } else {
        Err(Error::InexactArithmetic(what))
    }
}

/// Pair table for a terminal set, empty when fewer than two terminals.
fn pair_table<W: Weight>(g: &Graph<W>, s: &[VertexId]) -> Result<PathTable<W>> {
    let terms = normalize_terminals(s);
    if terms.len() < 2 {
        for &t in &terms {
            g.check_vertex(t)?;
        }
        return Ok(PathTable {
            pairs: Default::default(),
        });
    }
    build_path_table(g, &terms)
}

struct OneLevelSearch<'a, W: Weight> {
    g: &'a Graph<W>,
    paths: &'a PathTable<W>,
    condition: &'a AdditiveCondition<W>,
    w_max: W,
    /// Edge ids by decreasing weight, then id.
    order: Vec<EdgeId>,
    mask: Vec<bool>,
    best: Option<(W, Vec<bool>)>,
}

impl<W: Weight> OneLevelSearch<'_, W> {
    /// `mask` holds the kept edges plus every undecided edge from `depth` on.
    fn run(&mut self, depth: usize, kept: W, removed: W, total: &W) {
        if self.best.as_ref().is_some_and(|(best, _)| kept >= *best) {
            return;
        }
        if !feasible(self.g, self.paths, &self.mask, self.condition, &self.w_max) {
            return;
        }
        // the mask itself is feasible
        let weight = total.clone() - removed.clone();
        if self.best.as_ref().is_none_or(|(best, _)| weight < *best) {
            self.best = Some((weight, self.mask.clone()));
        }
        if depth == self.order.len() {
            return;
        }
        let e = self.order[depth];
        let w = self.g.edge(e).w.clone();
        // dropping the edge first finds light incumbents early
        self.mask[e] = false;
        self.run(depth + 1, kept.clone(), removed.clone() + w.clone(), total);
        self.mask[e] = true;
        self.run(depth + 1, kept + w, removed, total);
    }
}

/// Minimum-weight subset of `g` satisfying the condition for all pairs of `s`.
///
/// Depth-first search over edges from heaviest to lightest. A branch is cut
/// when the weight already committed reaches the incumbent, or when keeping
/// every undecided edge still fails the condition.
pub fn exact_one_level<W: Weight>(
    g: &Graph<W>,
    s: &[VertexId],
    condition: &AdditiveCondition<W>,
) -> Result<Optimum<W>> {
    require_exact::<W>("exact_one_level")?;
    if g.edge_count() > EXACT_ONE_LEVEL_EDGES {
        return Err(Error::InstanceTooLarge {
            what: "edges",
            got: g.edge_count(),
            limit: EXACT_ONE_LEVEL_EDGES,
        });
    }
    let paths = pair_table(g, s)?;
    let mut order: Vec<EdgeId> = (0..g.edge_count()).collect();
    order.sort_by(|&a, &b| g.edge(b).w.total_cmp(&g.edge(a).w).then(a.cmp(&b)));
    let total = g.total_weight();
    let mut search = OneLevelSearch {
        g,
        paths: &paths,
        condition,
        w_max: g.max_edge_weight(),
        order,
        mask: g.full_mask(),
        best: None,
    };
    search.run(0, W::zero(), W::zero(), &total);
    let (weight, mask) = search.best.expect("the full edge set is always feasible");
    Ok(Optimum {
        edges: (0..g.edge_count()).filter(|&e| mask[e]).collect(),
        weight,
    })
}

/// Plain enumeration of all subsets; the cross-check for [`exact_one_level`].
pub fn exact_one_level_enumerate<W: Weight>(
    g: &Graph<W>,
    s: &[VertexId],
    condition: &AdditiveCondition<W>,
) -> Result<Optimum<W>> {
    require_exact::<W>("exact_one_level_enumerate")?;
    if g.edge_count() > EXACT_MULTILEVEL_EDGES {
        return Err(Error::InstanceTooLarge {
            what: "edges",
            got: g.edge_count(),
            limit: EXACT_MULTILEVEL_EDGES,
        });
    }
    let paths = pair_table(g, s)?;
    let table = validity_table(g, &paths, condition);
    let m = g.edge_count();
    let mut best: Option<(W, u32)> = None;
    for bits in 0..(1u32 << m) {
        if !table[bits as usize] {
            continue;
        }
        let w = mask_weight(g, bits);
        if best.as_ref().is_none_or(|(b, _)| w < *b) {
            best = Some((w, bits));
        }
    }
    let (weight, bits) = best.expect("the full edge set is always feasible");
    Ok(Optimum {
        edges: bits_to_set(bits, m),
        weight,
    })
}

fn mask_weight<W: Weight>(g: &Graph<W>, bits: u32) -> W {
    W::sum_iter(
        (0..g.edge_count())
            .filter(|&e| bits >> e & 1 == 1)
            .map(|e| g.edge(e).w.clone()),
    )
}

fn bits_to_set(bits: u32, m: usize) -> BTreeSet<EdgeId> {
    (0..m).filter(|&e| bits >> e & 1 == 1).collect()
}

fn validity_table<W: Weight>(g: &Graph<W>, paths: &PathTable<W>, condition: &AdditiveCondition<W>) -> Vec<bool> {
    let m = g.edge_count();
    let w_max = g.max_edge_weight();
    (0..(1u32 << m))
        .map(|bits| {
            let mask: Vec<bool> = (0..m).map(|e| bits >> e & 1 == 1).collect();
            feasible(g, paths, &mask, condition, &w_max)
        })
        .collect()
}

/// Optimal nested edge sets of a tiny multi-level instance.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiLevelOptimum<W> {
    /// `edge_sets[i]` is `E_{i+1}`.
    pub edge_sets: Vec<BTreeSet<EdgeId>>,
    pub cost: W,
}

/// Minimize `Σ_i weight(E_i)` over nested valid families.
///
/// Validity of every edge mask is tabulated per level, then a
/// dynamic program over levels picks `E_i` and the best valid subset of it
/// for level `i + 1` through a subset-minimum transform.
pub fn exact_multilevel<W: Weight>(inst: &MultiLevelInstance<W>) -> Result<MultiLevelOptimum<W>> {
    require_exact::<W>("exact_multilevel")?;
    let g = &inst.g;
    let m = g.edge_count();
    if m > EXACT_MULTILEVEL_EDGES {
        return Err(Error::InstanceTooLarge {
            what: "edges",
            got: m,
            limit: EXACT_MULTILEVEL_EDGES,
        });
    }
    if inst.k > EXACT_MULTILEVEL_LEVELS {
        return Err(Error::InstanceTooLarge {
            what: "levels",
            got: inst.k,
            limit: EXACT_MULTILEVEL_LEVELS,
        });
    }
    let size = 1usize << m;
    let weights: Vec<W> = (0..size as u32).map(|b| mask_weight(g, b)).collect();
    let valid: Vec<Vec<bool>> = (1..=inst.k)
        .map(|i| {
            let paths = pair_table(g, &inst.terminals_at(i))?;
            Ok(validity_table(g, &paths, &inst.condition))
        })
        .collect::<Result<_>>()?;
    // f[i][M]: cost of levels i+1..k when E_{i+1} = M; choice[i][M]: the E_{i+2} achieving it
    let k = inst.k;
    let mut f: Vec<Vec<Option<W>>> = vec![vec![None; size]; k];
    let mut choice: Vec<Vec<u32>> = vec![vec![0; size]; k];
    for bits in 0..size {
        if valid[k - 1][bits] {
            f[k - 1][bits] = Some(weights[bits].clone());
        }
    }
    for i in (0..k - 1).rev() {
        // subset minimum of f[i + 1]
        let mut sub: Vec<Option<(W, u32)>> = (0..size)
            .map(|b| f[i + 1][b].clone().map(|w| (w, b as u32)))
            .collect();
        for bit in 0..m {
            for b in 0..size {
                if b >> bit & 1 == 1 {
                    let from = sub[b ^ (1 << bit)].clone();
                    if let Some((w, arg)) = from {
                        if sub[b].as_ref().is_none_or(|(cur, _)| w < *cur) {
                            sub[b] = Some((w, arg));
                        }
                    }
                }
            }
        }
        for b in 0..size {
            if !valid[i][b] {
                continue;
            }
            if let Some((w, arg)) = &sub[b] {
                f[i][b] = Some(weights[b].clone() + w.clone());
                choice[i][b] = *arg;
            }
        }
    }
    let mut best: Option<(W, u32)> = None;
    for b in 0..size {
        if let Some(w) = &f[0][b] {
            if best.as_ref().is_none_or(|(cur, _)| w < cur) {
                best = Some((w.clone(), b as u32));
            }
        }
    }
    let (cost, mut bits) = best.expect("the full edge set is valid at every level");
    let mut edge_sets = Vec::with_capacity(k);
    for i in 0..k {
        edge_sets.push(bits_to_set(bits, m));
        if i + 1 < k {
            bits = choice[i][bits as usize];
        }
    }
    Ok(MultiLevelOptimum { edge_sets, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steiner::build_backbone;
    use crate::weight::Exact;

    fn ex(n: i128) -> Exact {
        Exact::new(n, 1)
    }

    fn unit_clique(n: usize) -> Graph<Exact> {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v, ex(1)));
            }
        }
        Graph::new(n, edges).unwrap()
    }

    #[test]
    fn full_graph_always_verifies() {
        let g = unit_clique(5);
        let all: BTreeSet<EdgeId> = (0..g.edge_count()).collect();
        let r = verify_spanner(&g, &[0, 1, 2, 3, 4], &all, &AdditiveCondition::relative(Exact::zero())).unwrap();
        assert!(r.ok);
        assert_eq!(r.max_excess, Some(Exact::zero()));
        assert_eq!(r.pairs.len(), 10);
    }

    #[test]
    fn empty_candidate_reports_infinite_excess() {
        let g = unit_clique(3);
        let r = verify_spanner(&g, &[0, 1], &BTreeSet::new(), &AdditiveCondition::relative(ex(1))).unwrap();
        assert!(!r.ok);
        assert_eq!(r.violations[0].d_h, None);
        assert_eq!(r.max_excess, None);
        assert_eq!(r.to_json()["max_excess"], Value::Null);
    }

    #[test]
    fn star_on_k4_has_three_half_unit_violations() {
        let g = unit_clique(4);
        let star: BTreeSet<EdgeId> = [0, 1, 2].into_iter().collect(); // 0-1, 0-2, 0-3
        let r = verify_spanner(&g, &[0, 1, 2, 3], &star, &AdditiveCondition::relative(Exact::new(1, 2))).unwrap();
        assert_eq!(r.violations.len(), 3);
        for v in &r.violations {
            assert_eq!(v.d_h, Some(ex(2)));
            assert_eq!(v.excess(), Some(Exact::new(1, 2)));
        }
    }

    #[test]
    fn unknown_edge_is_an_error() {
        let g = unit_clique(3);
        let bad: BTreeSet<EdgeId> = [7].into_iter().collect();
        assert_eq!(
            verify_spanner(&g, &[0, 1], &bad, &AdditiveCondition::relative(ex(1))).unwrap_err(),
            Error::UnknownEdge(7)
        );
    }

    #[test]
    fn lightness_ratio_examples() {
        let g = unit_clique(4);
        let bb = build_backbone(&g, &[0, 1, 2, 3], AdditiveCondition::relative(Exact::new(1, 2))).unwrap();
        let l = subset_lightness(&g, &bb, &ex(6));
        assert_eq!(l.ratio, ex(2));
        assert_eq!(l.mode, LowerBoundMode::Exact);
        let l = subset_lightness(&g, &bb, &bb.t.weight);
        assert_eq!(l.ratio, ex(1));
        // 50 against a Steiner weight of 60
        let p: Graph<Exact> = Graph::new(2, [(0, 1, ex(60))]).unwrap();
        let bb = build_backbone(&p, &[0, 1], AdditiveCondition::relative(ex(1))).unwrap();
        assert_eq!(subset_lightness(&p, &bb, &ex(50)).ratio, Exact::new(5, 6));
    }

    #[test]
    fn exact_one_level_on_tree_is_minimal_subtree() {
        let g: Graph<Exact> = Graph::new(4, [(0, 1, ex(1)), (1, 2, ex(2)), (1, 3, ex(3))]).unwrap();
        let opt = exact_one_level(&g, &[0, 2], &AdditiveCondition::relative(ex(1))).unwrap();
        assert_eq!(opt.edges, [0, 1].into_iter().collect());
        assert_eq!(opt.weight, ex(3));
    }

    #[test]
    fn huge_beta_reduces_to_steiner() {
        let g = unit_clique(4);
        let opt = exact_one_level(&g, &[0, 1, 2], &AdditiveCondition::relative(ex(1000))).unwrap();
        assert_eq!(opt.weight, exact_steiner(&g, &[0, 1, 2]).unwrap().weight);
    }

    #[test]
    fn branch_and_bound_matches_enumeration() {
        let g: Graph<Exact> = Graph::new(
            5,
            [(0, 1, ex(2)), (1, 2, ex(2)), (2, 3, ex(1)), (3, 4, ex(3)), (0, 4, ex(4)), (0, 2, ex(3)), (1, 3, ex(2))],
        )
        .unwrap();
        for beta in [Exact::zero(), Exact::new(1, 2), ex(1), ex(5)] {
            let c = AdditiveCondition::relative(beta);
            let a = exact_one_level(&g, &[0, 2, 4], &c).unwrap();
            let b = exact_one_level_enumerate(&g, &[0, 2, 4], &c).unwrap();
            assert_eq!(a.weight, b.weight);
        }
    }

    #[test]
    fn exact_oracles_reject_binary64_and_large_inputs() {
        let g: Graph<f64> = Graph::new(2, [(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            exact_one_level(&g, &[0, 1], &AdditiveCondition::relative(1.0)),
            Err(Error::InexactArithmetic(_))
        ));
        let big = unit_clique(7); // 21 edges
        assert!(matches!(
            exact_one_level(&big, &[0, 1], &AdditiveCondition::relative(ex(1))),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn multilevel_optimum_simple_cases() {
        let g: Graph<Exact> = Graph::new(
            4,
            [(0, 1, ex(1)), (1, 2, ex(1)), (2, 3, ex(1)), (0, 3, ex(2)), (0, 2, ex(2))],
        )
        .unwrap();
        let c = AdditiveCondition::relative(Exact::new(1, 2));
        let one = MultiLevelInstance::new(g.clone(), [(0, 1), (2, 1), (3, 1)].into_iter().collect(), c.clone()).unwrap();
        let opt = exact_multilevel(&one).unwrap();
        assert_eq!(opt.cost, exact_one_level(&g, &[0, 2, 3], &c).unwrap().weight);
        // every terminal on level 2: cost doubles
        let two = MultiLevelInstance::new(g.clone(), [(0, 2), (2, 2), (3, 2)].into_iter().collect(), c.clone()).unwrap();
        let opt2 = exact_multilevel(&two).unwrap();
        assert_eq!(opt2.cost, opt.cost * ex(2));
        assert_eq!(opt2.edge_sets[0], opt2.edge_sets[1]);
        // nested levels
        let mixed = MultiLevelInstance::new(g, [(0, 2), (2, 2), (3, 1)].into_iter().collect(), c).unwrap();
        let opt3 = exact_multilevel(&mixed).unwrap();
        assert!(opt3.edge_sets[1].is_subset(&opt3.edge_sets[0]));
    }
}
