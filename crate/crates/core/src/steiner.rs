//! Steiner trees: the distance-network 2-approximation, an exact
//! Dreyfus-Wagner solver for small terminal sets, and the backbone tree
//! every spanner construction starts from.

use std::collections::{BTreeMap, BTreeSet};

use crate::condition::AdditiveCondition;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::paths::{
    build_path_table, masked_distance, normalize_terminals, search_all, PathTable, SearchTree,
};
use crate::weight::Weight;

/// Largest terminal set accepted by [`exact_steiner`].
pub const EXACT_STEINER_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct SteinerTree<W> {
    pub terminals: Vec<VertexId>,
    pub edges: BTreeSet<EdgeId>,
    pub weight: W,
}

impl<W: Weight> SteinerTree<W> {
    fn from_edges(g: &Graph<W>, terminals: Vec<VertexId>, edges: BTreeSet<EdgeId>) -> Self {
        let weight = g.weight_of(&edges);
        SteinerTree {
            terminals,
            edges,
            weight,
        }
    }

    /// Vertices of the tree. A tree without edges consists of its terminals.
    pub fn vertices(&self, g: &Graph<W>) -> BTreeSet<VertexId> {
        if self.edges.is_empty() {
            self.terminals.iter().copied().collect()
        } else {
            g.vertices_of(&self.edges)
        }
    }
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Minimum spanning forest of an edge subset, ties broken by edge id.
/// Equivalent to repeatedly deleting the heaviest edge of a cycle.
pub fn spanning_forest<W: Weight>(g: &Graph<W>, edges: &BTreeSet<EdgeId>) -> BTreeSet<EdgeId> {
    let mut order: Vec<EdgeId> = edges.iter().copied().collect();
    order.sort_by(|&a, &b| g.edge(a).w.total_cmp(&g.edge(b).w).then(a.cmp(&b)));
    let mut dsu = Dsu::new(g.n());
    order
        .into_iter()
        .filter(|&e| dsu.union(g.edge(e).u, g.edge(e).v))
        .collect()
}

/// Repeatedly remove leaves that are not terminals.
pub fn prune_leaves<W: Weight>(
    g: &Graph<W>,
    edges: &BTreeSet<EdgeId>,
    terminals: &BTreeSet<VertexId>,
) -> BTreeSet<EdgeId> {
    let mut kept = edges.clone();
    let mut degree: BTreeMap<VertexId, usize> = BTreeMap::new();
    for &e in &kept {
        *degree.entry(g.edge(e).u).or_default() += 1;
        *degree.entry(g.edge(e).v).or_default() += 1;
    }
    let mut stack: Vec<VertexId> = degree
        .iter()
        .filter(|&(v, &d)| d == 1 && !terminals.contains(v))
        .map(|(&v, _)| v)
        .collect();
    while let Some(leaf) = stack.pop() {
        if degree.get(&leaf) != Some(&1) {
            continue;
        }
        let e = *kept
            .iter()
            .find(|&&e| g.edge(e).u == leaf || g.edge(e).v == leaf)
            .expect("leaf has an incident edge");
        kept.remove(&e);
        degree.insert(leaf, 0);
        let other = g.edge(e).other(leaf);
        let d = degree.get_mut(&other).expect("endpoint tracked");
        *d -= 1;
        if *d == 1 && !terminals.contains(&other) {
            stack.push(other);
        }
    }
    kept
}

/// Spanning forest of `edges` with non-terminal leaves removed.
pub fn prune_to_tree<W: Weight>(
    g: &Graph<W>,
    edges: &BTreeSet<EdgeId>,
    terminals: &BTreeSet<VertexId>,
) -> BTreeSet<EdgeId> {
    prune_leaves(g, &spanning_forest(g, edges), terminals)
}

fn checked_terminals<W: Weight>(g: &Graph<W>, terminals: &[VertexId]) -> Result<Vec<VertexId>> {
    let t = normalize_terminals(terminals);
    if t.is_empty() {
        return Err(Error::EmptyTerminals);
    }
    for &v in &t {
        g.check_vertex(v)?;
    }
    Ok(t)
}

/// Distance-network heuristic: MST of the terminals' metric closure, each
/// closure edge expanded to its fixed path, then MST of the union and leaf
/// pruning. Weight is at most twice the optimum.
pub fn approx_steiner<W: Weight>(g: &Graph<W>, terminals: &[VertexId]) -> Result<SteinerTree<W>> {
    let terms = checked_terminals(g, terminals)?;
    if terms.len() == 1 {
        return Ok(SteinerTree::from_edges(g, terms, BTreeSet::new()));
    }
    let trees: Vec<SearchTree<W>> = terms.iter().map(|&t| search_all(g, t)).collect();
    let mut closure = Vec::new();
    for i in 0..terms.len() {
        for j in i + 1..terms.len() {
            let d = trees[i]
                .dist(terms[j])
                .ok_or(Error::Disconnected { components: 2 })?
                .clone();
            closure.push((d, i, j));
        }
    }
    closure.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut dsu = Dsu::new(terms.len());
    let mut union = BTreeSet::new();
    for (_, i, j) in closure {
        if dsu.union(i, j) {
            union.extend(trees[i].path_edges(terms[j]).expect("reachable"));
        }
    }
    let term_set: BTreeSet<VertexId> = terms.iter().copied().collect();
    let edges = prune_to_tree(g, &union, &term_set);
    Ok(SteinerTree::from_edges(g, terms, edges))
}

/// Cost arithmetic for the exact dynamic program.
trait DpCost: Copy + PartialOrd + std::ops::Add<Output = Self> {
    const ZERO: Self;
    const INF: Self;
}

impl DpCost for i128 {
    const ZERO: Self = 0;
    const INF: Self = i128::MAX / 4;
}

impl DpCost for f64 {
    const ZERO: Self = 0.0;
    const INF: Self = f64::INFINITY;
}

/// Integer edge costs on a common denominator, when every weight is exact
/// and the scale fits.
fn integer_costs<W: Weight>(g: &Graph<W>) -> Option<Vec<i128>> {
    let parts: Vec<(i128, i128)> = g.edges().iter().map(|e| e.w.exact_parts()).collect::<Option<_>>()?;
    let mut lcm: i128 = 1;
    for &(_, d) in &parts {
        let gcd = num_integer::gcd(lcm, d);
        lcm = (lcm / gcd).checked_mul(d)?;
    }
    // headroom for sums over a whole tree
    let limit = i128::MAX / (8 * (g.edge_count() as i128 + 1));
    parts
        .iter()
        .map(|&(nu, d)| nu.checked_mul(lcm / d).filter(|&c| c < limit))
        .collect()
}

/// DP tables: `join_sub[mask][u]` is the best split of `mask` at `u`, and
/// `move_from[mask][v]` the vertex where that joined tree attaches to `v`.
struct DwTables {
    join_sub: Vec<Vec<usize>>,
    move_from: Vec<Vec<VertexId>>,
}

fn dreyfus_wagner<C: DpCost>(n: usize, dist: &[Vec<C>], terms: &[VertexId]) -> DwTables {
    let m = terms.len() - 1;
    let full = 1usize << m;
    let mut dp = vec![vec![C::INF; n]; full];
    let mut join_sub = vec![Vec::new(); full];
    let mut move_from = vec![Vec::new(); full];
    for (i, &t) in terms[..m].iter().enumerate() {
        dp[1 << i].clone_from(&dist[t]);
    }
    let mut joined = vec![C::INF; n];
    for mask in 1..full {
        if mask.count_ones() < 2 {
            continue;
        }
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        joined.fill(C::INF);
        let mut best_sub = vec![0usize; n];
        // splits whose first part holds the lowest bit, so each is seen once
        let mut s = rest;
        loop {
            let sub = s | low;
            if sub != mask {
                let other = mask ^ sub;
                for v in 0..n {
                    let c = dp[sub][v] + dp[other][v];
                    if c < joined[v] {
                        joined[v] = c;
                        best_sub[v] = sub;
                    }
                }
            }
            if s == 0 {
                break;
            }
            s = (s - 1) & rest;
        }
        let mut from = vec![0usize; n];
        for v in 0..n {
            let mut best = C::INF;
            for u in 0..n {
                let c = joined[u] + dist[u][v];
                if c < best {
                    best = c;
                    from[v] = u;
                }
            }
            dp[mask][v] = best;
        }
        join_sub[mask] = best_sub;
        move_from[mask] = from;
    }
    DwTables { join_sub, move_from }
}

/// Endpoint pairs whose fixed paths make up the optimal tree.
fn reconstruct(tables: &DwTables, terms: &[VertexId]) -> Vec<(VertexId, VertexId)> {
    let m = terms.len() - 1;
    let mut out = Vec::new();
    let mut stack = vec![((1usize << m) - 1, terms[m])];
    while let Some((mask, v)) = stack.pop() {
        if mask.count_ones() == 1 {
            let t = terms[mask.trailing_zeros() as usize];
            if t != v {
                out.push((t, v));
            }
            continue;
        }
        let u = tables.move_from[mask][v];
        if u != v {
            out.push((u, v));
        }
        let sub = tables.join_sub[mask][u];
        stack.push((sub, u));
        stack.push((mask ^ sub, u));
    }
    out
}

/// All-pairs costs along the fixed paths.
fn pair_costs<W: Weight, C: DpCost>(
    g: &Graph<W>,
    trees: &[SearchTree<W>],
    cost: impl Fn(EdgeId) -> C,
) -> Vec<Vec<C>> {
    let n = g.n();
    let mut dist = vec![vec![C::INF; n]; n];
    for a in 0..n {
        dist[a][a] = C::ZERO;
        for b in a + 1..n {
            if let Some(path) = trees[a].path_edges(b) {
                let c = path.into_iter().fold(C::ZERO, |acc, e| acc + cost(e));
                dist[a][b] = c;
                dist[b][a] = c;
            }
        }
    }
    dist
}

/// Minimum-weight Steiner tree by dynamic programming over terminal subsets.
pub fn exact_steiner<W: Weight>(g: &Graph<W>, terminals: &[VertexId]) -> Result<SteinerTree<W>> {
    let terms = checked_terminals(g, terminals)?;
    if terms.len() > EXACT_STEINER_LIMIT {
        return Err(Error::TooManyTerminals {
            got: terms.len(),
            limit: EXACT_STEINER_LIMIT,
        });
    }
    if terms.len() == 1 {
        return Ok(SteinerTree::from_edges(g, terms, BTreeSet::new()));
    }
    let n = g.n();
    let trees: Vec<SearchTree<W>> = (0..n).map(|v| search_all(g, v)).collect();
    for &t in &terms {
        if terms.iter().any(|&o| !trees[t].reached(o)) {
            return Err(Error::Disconnected { components: 2 });
        }
    }
    let tables = match integer_costs(g) {
        Some(costs) => dreyfus_wagner(n, &pair_costs(g, &trees, |e| costs[e]), &terms),
        None => dreyfus_wagner(n, &pair_costs(g, &trees, |e| g.edge(e).w.to_f64()), &terms),
    };
    let pairs = reconstruct(&tables, &terms);
    let mut union = BTreeSet::new();
    for (a, b) in pairs {
        let (lo, hi) = (a.min(b), a.max(b));
        union.extend(trees[lo].path_edges(hi).expect("reachable"));
    }
    let term_set: BTreeSet<VertexId> = terms.iter().copied().collect();
    let edges = prune_to_tree(g, &union, &term_set);
    Ok(SteinerTree::from_edges(g, terms, edges))
}


/// The common starting point of every spanner construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Backbone<W> {
    pub terminals: Vec<VertexId>,
    pub condition: AdditiveCondition<W>,
    /// Approximate Steiner tree over the terminals.
    pub r: SteinerTree<W>,
    /// Terminal pairs whose distance inside `r` breaks the condition.
    pub unsatisfied_pairs: Vec<(VertexId, VertexId)>,
    /// Terminals plus every vertex on the fixed path of an unsatisfied pair.
    pub s_prime: BTreeSet<VertexId>,
    /// Approximate Steiner tree over `s_prime`.
    pub t: SteinerTree<W>,
    /// `r` united with `t`, reduced to a tree with leaves in `s_prime`.
    pub h: SteinerTree<W>,
    /// Fixed paths in the input graph for all terminal pairs.
    pub paths: PathTable<W>,
    pub w_max: W,
}

impl<W: Weight> Backbone<W> {
    pub fn h_vertices(&self, g: &Graph<W>) -> BTreeSet<VertexId> {
        self.h.vertices(g)
    }

    /// `|V_H|`.
    pub fn h_vertex_count(&self, g: &Graph<W>) -> usize {
        self.h_vertices(g).len()
    }

    /// Slack granted to a terminal pair in the input graph.
    pub fn slack(&self, u: VertexId, v: VertexId) -> W {
        let pair_max = self.paths.max_edge(u, v).cloned().unwrap_or_else(W::zero);
        self.condition.slack(&pair_max, &self.w_max)
    }
}

/// Build `R`, the unsatisfied pairs `P`, `S'`, `T` and `H` for one condition.
pub fn build_backbone<W: Weight>(
    g: &Graph<W>,
    s: &[VertexId],
    condition: AdditiveCondition<W>,
) -> Result<Backbone<W>> {
    let terminals = checked_terminals(g, s)?;
    let paths = build_path_table(g, &terminals)?;
    let w_max = g.max_edge_weight();
    let r = approx_steiner(g, &terminals)?;
    let r_mask = g.mask(&r.edges);
    let mut unsatisfied_pairs = Vec::new();
    let mut s_prime: BTreeSet<VertexId> = terminals.iter().copied().collect();
    for (&(u, v), path) in &paths.pairs {
        let slack = condition.slack(&path.max_edge, &w_max);
        let d_r = masked_distance(g, u, v, &r_mask);
        if !condition.holds(d_r.as_ref(), &path.dist, &slack) {
            unsatisfied_pairs.push((u, v));
            s_prime.extend(path.vertices.iter().copied());
        }
    }
    let t = if s_prime.len() == terminals.len() {
        r.clone()
    } else {
        approx_steiner(g, &s_prime.iter().copied().collect::<Vec<_>>())?
    };
    let union: BTreeSet<EdgeId> = r.edges.union(&t.edges).copied().collect();
    let h_edges = prune_to_tree(g, &union, &s_prime);
    let h = SteinerTree::from_edges(g, s_prime.iter().copied().collect(), h_edges);
    Ok(Backbone {
        terminals,
        condition,
        r,
        unsatisfied_pairs,
        s_prime,
        t,
        h,
        paths,
        w_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
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
    fn all_terminals_gives_mst_weight() {
        let g: Graph<Exact> = Graph::new(
            4,
            [(0, 1, ex(1)), (1, 2, ex(2)), (2, 3, ex(1)), (0, 3, ex(5)), (0, 2, ex(2))],
        )
        .unwrap();
        let t = approx_steiner(&g, &[0, 1, 2, 3]).unwrap();
        assert_eq!(t.weight, ex(4));
        assert_eq!(t.edges.len(), 3);
    }

    #[test]
    fn single_terminal_is_empty() {
        let g = unit_clique(4);
        let t = approx_steiner(&g, &[2]).unwrap();
        assert!(t.edges.is_empty());
        assert_eq!(t.weight, ex(0));
        assert_eq!(exact_steiner(&g, &[2]).unwrap().weight, ex(0));
        assert!(matches!(approx_steiner(&g, &[]), Err(Error::EmptyTerminals)));
    }

    #[test]
    fn exact_two_terminals_is_distance() {
        let g: Graph<Exact> = Graph::new(3, [(0, 1, ex(3)), (1, 2, ex(4)), (0, 2, ex(9))]).unwrap();
        assert_eq!(exact_steiner(&g, &[0, 2]).unwrap().weight, ex(7));
    }

    #[test]
    fn exact_four_cycle_three_terminals() {
        // 4-edge cycle, unit weights: any two adjacent edges connect three terminals
        let g: Graph<Exact> =
            Graph::new(4, [(0, 1, ex(1)), (1, 2, ex(1)), (2, 3, ex(1)), (3, 0, ex(1))]).unwrap();
        let t = exact_steiner(&g, &[0, 1, 2]).unwrap();
        assert_eq!(t.weight, ex(2));
    }

    #[test]
    fn exact_uses_steiner_point() {
        // star center 3 is cheaper than connecting leaves directly
        let g: Graph<Exact> = Graph::new(
            4,
            [(0, 3, ex(1)), (1, 3, ex(1)), (2, 3, ex(1)), (0, 1, ex(3)), (1, 2, ex(3))],
        )
        .unwrap();
        let t = exact_steiner(&g, &[0, 1, 2]).unwrap();
        assert_eq!(t.weight, ex(3));
        assert!(t.vertices(&g).contains(&3));
    }

    #[test]
    fn exact_rejects_large_terminal_sets() {
        let g = unit_clique(14);
        let all: Vec<_> = (0..13).collect();
        assert!(matches!(
            exact_steiner(&g, &all),
            Err(Error::TooManyTerminals { got: 13, limit: 12 })
        ));
    }

    #[test]
    fn pruning_removes_non_terminal_leaves() {
        let g: Graph<Exact> = Graph::new(4, [(0, 1, ex(1)), (1, 2, ex(1)), (2, 3, ex(1))]).unwrap();
        let all: BTreeSet<_> = (0..3).collect();
        let terms: BTreeSet<_> = [0, 1].into_iter().collect();
        let once = prune_to_tree(&g, &all, &terms);
        assert_eq!(once, [0].into_iter().collect());
        assert_eq!(prune_to_tree(&g, &once, &terms), once);
    }

    #[test]
    fn tree_backbone_has_no_unsatisfied_pairs() {
        let g: Graph<Exact> =
            Graph::new(5, [(0, 1, ex(2)), (1, 2, ex(3)), (1, 3, ex(1)), (3, 4, ex(7))]).unwrap();
        let bb = build_backbone(&g, &[0, 2, 4], AdditiveCondition::relative(Exact::new(1, 2))).unwrap();
        assert!(bb.unsatisfied_pairs.is_empty());
        assert_eq!(bb.s_prime, [0, 2, 4].into_iter().collect());
        assert_eq!(bb.h.edges, bb.r.edges);
    }

    #[test]
    fn clique_backbone_is_a_star_with_violations() {
        let g = unit_clique(4);
        let bb = build_backbone(&g, &[0, 1, 2, 3], AdditiveCondition::relative(Exact::new(1, 2))).unwrap();
        assert_eq!(bb.r.weight, ex(3));
        // star around vertex 0: the three non-center pairs sit at distance 2 > 1.5
        assert_eq!(bb.unsatisfied_pairs, vec![(1, 2), (1, 3), (2, 3)]);
        assert_eq!(bb.s_prime.len(), 4);
        assert!(bb.h.weight <= ex(2) * bb.t.weight);
    }
}
