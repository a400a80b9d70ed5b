//! Multi-level spanners by randomized rounding of terminal levels.
//!
//! Levels are rounded up to the grid `p^{q+i}`, each distinct rounded level
//! gets an independent one-level spanner, and the solutions are merged from
//! the top down so that the edge sets nest.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::condition::AdditiveCondition;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::instance::Instance;
use crate::oracle::exact_one_level;
use crate::spanner_additive::{relative_pipeline, BuildOptions, InitialRule};
use crate::weight::Weight;

/// Relative tolerance for comparing a level with a grid value.
pub const GRID_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MultiLevelInstance<W> {
    pub g: Graph<W>,
    /// Vertex -> level in `1..=k`; absent vertices are not terminals.
    pub levels: BTreeMap<VertexId, usize>,
    pub k: usize,
    pub condition: AdditiveCondition<W>,
}

impl<W: Weight> MultiLevelInstance<W> {
    pub fn new(g: Graph<W>, levels: BTreeMap<VertexId, usize>, condition: AdditiveCondition<W>) -> Result<Self> {
        let levels: BTreeMap<VertexId, usize> = levels.into_iter().filter(|&(_, l)| l > 0).collect();
        for &v in levels.keys() {
            g.check_vertex(v)?;
        }
        let k = levels.values().copied().max().ok_or(Error::EmptyTerminals)?;
        g.ensure_connected()?;
        Ok(MultiLevelInstance {
            g,
            levels,
            k,
            condition,
        })
    }

    /// Levels from a JSON instance's `levels` field, or every listed
    /// terminal on level one when it is absent.
    pub fn from_instance(inst: &Instance<W>, condition: AdditiveCondition<W>) -> Result<Self> {
        let levels = match &inst.levels {
            Some(l) => l.clone(),
            None => inst.terminals.iter().map(|&t| (t, 1)).collect(),
        };
        Self::new(inst.graph.clone(), levels, condition)
    }

    /// `S_i = {v : level(v) >= i}`.
    pub fn terminals_at(&self, i: usize) -> Vec<VertexId> {
        self.levels
            .iter()
            .filter(|&(_, &l)| l >= i)
            .map(|(&v, _)| v)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiLevelSolution<W> {
    /// `edge_sets[i - 1]` is `E_i`; each contains the next.
    pub edge_sets: Vec<BTreeSet<EdgeId>>,
    /// `Σ_i weight(E_i)`.
    pub cost: W,
    pub p: f64,
    pub q_used: f64,
    /// Distinct rounded levels, ascending.
    pub rounded_levels: Vec<f64>,
    /// Oracle output per rounded level, before merging.
    pub independent: Vec<BTreeSet<EdgeId>>,
}

/// `p^{q+i}`.
pub fn grid_value(p: f64, q: f64, i: usize) -> f64 {
    p.powf(q + i as f64)
}

/// Smallest `i >= 0` with `p^{q+i} >= level`, and that grid value.
pub fn round_up_to_grid(level: f64, p: f64, q: f64) -> (usize, f64) {
    let mut i = 0;
    loop {
        let v = grid_value(p, q, i);
        if v * (1.0 + GRID_TOL) >= level {
            return (i, v);
        }
        i += 1;
    }
}

/// One distinct rounded level and the terminals rounded to it or above.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundedGroup {
    pub index: usize,
    pub value: f64,
    pub terminals: Vec<VertexId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rounding {
    /// Vertex -> rounded grid value.
    pub rounded: BTreeMap<VertexId, f64>,
    /// Ascending by value; terminal sets shrink as the value grows.
    pub groups: Vec<RoundedGroup>,
}

pub fn round_levels(levels: &BTreeMap<VertexId, usize>, p: f64, q: f64) -> Result<Rounding> {
    if !(p > 1.0) || !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("need p > 1 and 0 < q <= 1, got p = {p}, q = {q}")));
    }
    let mut index_of = BTreeMap::new();
    let mut rounded = BTreeMap::new();
    for (&v, &l) in levels {
        if l == 0 {
            continue;
        }
        let (i, value) = round_up_to_grid(l as f64, p, q);
        index_of.insert(v, i);
        rounded.insert(v, value);
    }
    let indices: BTreeSet<usize> = index_of.values().copied().collect();
    let groups = indices
        .into_iter()
        .map(|i| RoundedGroup {
            index: i,
            value: grid_value(p, q, i),
            terminals: index_of.iter().filter(|&(_, &j)| j >= i).map(|(&v, _)| v).collect(),
        })
        .collect();
    Ok(Rounding { rounded, groups })
}

/// Builds a one-level subsetwise spanner for a terminal set.
pub trait OneLevelOracle<W: Weight>: Sync {
    fn solve(&self, g: &Graph<W>, s: &[VertexId], condition: &AdditiveCondition<W>) -> Result<BTreeSet<EdgeId>>;
}

/// The `+εW` construction with `ε` set to the condition's `β`. Its output
/// also satisfies the `βW_max` form since `W(u,v) <= W_max`.
#[derive(Clone, Debug, Default)]
pub struct EpsSpannerOracle;

impl<W: Weight> OneLevelOracle<W> for EpsSpannerOracle {
    fn solve(&self, g: &Graph<W>, s: &[VertexId], condition: &AdditiveCondition<W>) -> Result<BTreeSet<EdgeId>> {
        if s.len() < 2 {
            return Ok(BTreeSet::new());
        }
        let sp = relative_pipeline(g, s, condition.beta.clone(), InitialRule::Eps, &BuildOptions::default())?;
        Ok(sp.edges)
    }
}

/// Exhaustive optimum, for tiny graphs only.
#[derive(Clone, Debug, Default)]
pub struct ExactOracle;

impl<W: Weight> OneLevelOracle<W> for ExactOracle {
    fn solve(&self, g: &Graph<W>, s: &[VertexId], condition: &AdditiveCondition<W>) -> Result<BTreeSet<EdgeId>> {
        Ok(exact_one_level(g, s, condition)?.edges)
    }
}

/// Memoizes another oracle by terminal set. Rounded groups are always some
/// `S_i`, so repeated draws of `q` reuse at most `k` results.
pub struct CachedOracle<'a, W: Weight> {
    inner: &'a dyn OneLevelOracle<W>,
    cache: Mutex<BTreeMap<Vec<VertexId>, BTreeSet<EdgeId>>>,
}

impl<'a, W: Weight> CachedOracle<'a, W> {
    pub fn new(inner: &'a dyn OneLevelOracle<W>) -> Self {
        CachedOracle {
            inner,
            cache: Mutex::new(BTreeMap::new()),
        }
    }
}

impl<W: Weight> OneLevelOracle<W> for CachedOracle<'_, W> {
    fn solve(&self, g: &Graph<W>, s: &[VertexId], condition: &AdditiveCondition<W>) -> Result<BTreeSet<EdgeId>> {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(s) {
            return Ok(hit.clone());
        }
        let out = self.inner.solve(g, s, condition)?;
        self.cache.lock().expect("cache lock").insert(s.to_vec(), out.clone());
        Ok(out)
    }
}

/// Round with a given `q`, solve each group, merge top-down, expand to levels.
pub fn solve_with_q<W: Weight>(
    inst: &MultiLevelInstance<W>,
    oracle: &dyn OneLevelOracle<W>,
    p: f64,
    q: f64,
) -> Result<MultiLevelSolution<W>> {
    let rounding = round_levels(&inst.levels, p, q)?;
    let independent: Vec<BTreeSet<EdgeId>> = rounding
        .groups
        .iter()
        .map(|grp| oracle.solve(&inst.g, &grp.terminals, &inst.condition))
        .collect::<Result<_>>()?;
    let mut merged = independent.clone();
    for j in (0..merged.len().saturating_sub(1)).rev() {
        let upper = merged[j + 1].clone();
        merged[j].extend(upper);
    }
    let mut edge_sets = Vec::with_capacity(inst.k);
    for level in 1..=inst.k {
        let j = rounding
            .groups
            .iter()
            .position(|grp| grp.value * (1.0 + GRID_TOL) >= level as f64)
            .expect("the top group covers level k");
        edge_sets.push(merged[j].clone());
    }
    let cost = W::sum_iter(edge_sets.iter().map(|e| inst.g.weight_of(e)));
    Ok(MultiLevelSolution {
        edge_sets,
        cost,
        p,
        q_used: q,
        rounded_levels: rounding.groups.iter().map(|grp| grp.value).collect(),
        independent,
    })
}

/// Uniform draw from `(0, 1)`, rejecting zero.
pub fn sample_q<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = rng.gen();
        if x > 0.0 {
            return x;
        }
    }
}

/// Randomized rounding with base `p`; `p = e` gives the best expected ratio.
pub fn solve_multilevel<W: Weight>(
    inst: &MultiLevelInstance<W>,
    oracle: &dyn OneLevelOracle<W>,
    p: f64,
    seed: u64,
) -> Result<MultiLevelSolution<W>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = sample_q(&mut rng);
    solve_with_q(inst, oracle, p, q)
}

/// Deterministic rounding to powers of two.
pub fn four_approx_baseline<W: Weight>(
    inst: &MultiLevelInstance<W>,
    oracle: &dyn OneLevelOracle<W>,
) -> Result<MultiLevelSolution<W>> {
    solve_with_q(inst, oracle, 2.0, 1.0)
}

/// Monte-Carlo estimate of the expected rounding blow-up.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundingEstimate {
    pub mean: f64,
    pub std_err: f64,
    /// `(p - 1) / ln p`.
    pub analytic: f64,
    pub trials: usize,
}

pub fn analytic_rounding_ratio(p: f64) -> f64 {
    (p - 1.0) / p.ln()
}

/// Average of `rounded(λ) / λ` over fresh draws of `q` and of a level `λ`
/// uniform on `[1, 100]`. The expectation does not depend on `λ`.
pub fn rounding_cost_ratio(p: f64, trials: usize, seed: u64) -> Result<RoundingEstimate> {
    if !(p > 1.0) || trials < 2 {
        return Err(Error::InvalidParameter(format!("need p > 1 and at least two trials, got p = {p}, {trials}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let q = sample_q(&mut rng);
        let level = rng.gen_range(1.0..100.0);
        let (_, value) = round_up_to_grid(level, p, q);
        let r = value / level;
        sum += r;
        sum_sq += r * r;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    Ok(RoundingEstimate {
        mean,
        std_err: (var.max(0.0) / n).sqrt(),
        analytic: analytic_rounding_ratio(p),
        trials,
    })
}

/// The merge bound on a rounded instance.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeCheck {
    /// `Σ_j (v_j - v_{j-1}) weight(M_j)` for the merged sets `M_j`.
    pub merged_cost: f64,
    /// `Σ_j v_j weight(A_j)` for the independent solutions `A_j`.
    pub independent_cost: f64,
    /// `Σ_s OPT_s` along the rounded level axis: `Σ_j (v_j - v_{j-1}) OPT_j`.
    pub opt_sum: f64,
    /// `p / (p - 1)`.
    pub factor: f64,
    pub ok: bool,
}

/// Check `merged <= independent <= p/(p-1) Σ_s OPT_s` on a solution built
/// with an optimal oracle. `opt` gives the one-level optimum per group.
pub fn merge_check<W: Weight>(inst: &MultiLevelInstance<W>, sol: &MultiLevelSolution<W>, opt: &[W]) -> MergeCheck {
    let v = &sol.rounded_levels;
    let mut merged_sets = sol.independent.clone();
    for j in (0..merged_sets.len().saturating_sub(1)).rev() {
        let upper = merged_sets[j + 1].clone();
        merged_sets[j].extend(upper);
    }
    let mut merged_cost = 0.0;
    let mut independent_cost = 0.0;
    let mut opt_sum = 0.0;
    for j in 0..v.len() {
        let step = v[j] - if j == 0 { 0.0 } else { v[j - 1] };
        merged_cost += step * inst.g.weight_of(&merged_sets[j]).to_f64();
        independent_cost += v[j] * inst.g.weight_of(&sol.independent[j]).to_f64();
        opt_sum += step * opt[j].to_f64();
    }
    let factor = sol.p / (sol.p - 1.0);
    let tol = 1.0 + GRID_TOL;
    let ok = merged_cost <= independent_cost * tol && independent_cost <= factor * opt_sum * tol;
    MergeCheck {
        merged_cost,
        independent_cost,
        opt_sum,
        factor,
        ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_multilevel;
    use crate::weight::Exact;

    fn ex(n: i128) -> Exact {
        Exact::new(n, 1)
    }

    fn small() -> Graph<Exact> {
        Graph::new(
            5,
            [(0, 1, ex(1)), (1, 2, ex(2)), (2, 3, ex(1)), (3, 4, ex(2)), (0, 4, ex(3)), (1, 3, ex(2))],
        )
        .unwrap()
    }

    fn levels(pairs: &[(VertexId, usize)]) -> BTreeMap<VertexId, usize> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn rounding_examples() {
        let r = round_levels(&levels(&[(0, 1), (1, 2), (2, 3)]), 2.0, 1.0).unwrap();
        assert_eq!(r.rounded.values().copied().collect::<Vec<_>>(), vec![2.0, 2.0, 4.0]);
        let (_, v) = round_up_to_grid(3.0, std::f64::consts::E, 0.5);
        assert!((v - 4.4817).abs() < 1e-4);
        let (_, v) = round_up_to_grid(4.0, 2.0, 1.0);
        assert_eq!(v, 4.0);
        let r = round_levels(&levels(&[(0, 1), (1, 3), (2, 4)]), 2.0, 1.0).unwrap();
        assert_eq!(r.groups.iter().map(|g| g.value).collect::<Vec<_>>(), vec![2.0, 4.0]);
        assert_eq!(r.groups[0].terminals, vec![0, 1, 2]);
        assert_eq!(r.groups[1].terminals, vec![1, 2]);
        assert!(round_levels(&levels(&[(0, 1)]), 1.0, 0.5).is_err());
        assert!(round_levels(&levels(&[(0, 1)]), 2.0, 0.0).is_err());
    }

    #[test]
    fn single_level_is_one_oracle_call() {
        let inst = MultiLevelInstance::new(small(), levels(&[(0, 1), (2, 1), (4, 1)]), AdditiveCondition::relative(ex(1))).unwrap();
        let sol = solve_multilevel(&inst, &ExactOracle, std::f64::consts::E, 7).unwrap();
        assert_eq!(sol.independent.len(), 1);
        let base = four_approx_baseline(&inst, &ExactOracle).unwrap();
        assert_eq!(sol.edge_sets, base.edge_sets);
        assert_eq!(sol.cost, exact_one_level(&inst.g, &[0, 2, 4], &inst.condition).unwrap().weight);
    }

    #[test]
    fn top_level_terminals_share_one_group() {
        let inst = MultiLevelInstance::new(small(), levels(&[(0, 3), (2, 3), (4, 3)]), AdditiveCondition::relative(ex(1))).unwrap();
        for seed in 0..5 {
            let sol = solve_multilevel(&inst, &EpsSpannerOracle, std::f64::consts::E, seed).unwrap();
            assert_eq!(sol.rounded_levels.len(), 1);
            assert!(sol.edge_sets.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn nesting_and_cost_model() {
        let inst = MultiLevelInstance::new(
            small(),
            levels(&[(0, 1), (1, 2), (2, 3), (3, 1)]),
            AdditiveCondition::relative(Exact::new(1, 2)),
        )
        .unwrap();
        let sol = solve_multilevel(&inst, &EpsSpannerOracle, std::f64::consts::E, 3).unwrap();
        for w in sol.edge_sets.windows(2) {
            assert!(w[1].is_subset(&w[0]));
        }
        let by_top: Exact = (0..inst.g.edge_count())
            .map(|e| {
                let top = sol.edge_sets.iter().filter(|s| s.contains(&e)).count();
                inst.g.edge(e).w * ex(top as i128)
            })
            .sum();
        assert_eq!(sol.cost, by_top);
        for (i, set) in sol.edge_sets.iter().enumerate() {
            let r = crate::oracle::verify_spanner(&inst.g, &inst.terminals_at(i + 1), set, &inst.condition).unwrap();
            assert!(r.ok);
        }
    }

    #[test]
    fn analytic_anchors() {
        assert!((analytic_rounding_ratio(2.0) - std::f64::consts::LOG2_E).abs() < 1e-12);
        assert!((analytic_rounding_ratio(std::f64::consts::E) - 1.7183).abs() < 1e-4);
        let e = std::f64::consts::E;
        assert!((e / e.ln() - e).abs() < 1e-12);
        // p / ln p is smallest at e
        for p in [2.0f64, 2.5, 3.0, 4.0] {
            assert!(p / p.ln() > e);
        }
    }

    #[test]
    fn rounding_estimate_is_seeded() {
        let a = rounding_cost_ratio(2.0, 2000, 1).unwrap();
        let b = rounding_cost_ratio(2.0, 2000, 1).unwrap();
        assert_eq!(a, b);
        assert!((a.mean - a.analytic).abs() < 4.0 * a.std_err);
    }

    #[test]
    fn baseline_within_four_of_optimum() {
        let inst = MultiLevelInstance::new(
            small(),
            levels(&[(0, 1), (1, 2), (2, 3), (3, 1)]),
            AdditiveCondition::relative(ex(1)),
        )
        .unwrap();
        let opt = exact_multilevel(&inst).unwrap();
        let base = four_approx_baseline(&inst, &ExactOracle).unwrap();
        assert!(base.cost <= opt.cost * ex(4));
        let opts: Vec<Exact> = round_levels(&inst.levels, 2.0, 1.0)
            .unwrap()
            .groups
            .iter()
            .map(|grp| exact_one_level(&inst.g, &grp.terminals, &inst.condition).unwrap().weight)
            .collect();
        assert!(merge_check(&inst, &base, &opts).ok);
    }
}
