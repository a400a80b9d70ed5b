//! Property tests. Every expected value comes from a brute-force oracle in
//! this file, not from the library.

#![allow(clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use lightspan::multilevel::{round_up_to_grid, solve_with_q, ExactOracle, EpsSpannerOracle};
use lightspan::oracle::exact_one_level_enumerate;
use lightspan::{
    approx_steiner, build_backbone, build_universe, eps_spanner, exact_multilevel, exact_one_level, exact_steiner,
    fixed_shortest_path, four_eps_spanner, map_back, masked_distance, verify_spanner, wmax_spanner,
    AdditiveCondition, EdgeId, EpsilonSplit, Exact, Graph, MultiLevelInstance, SampleConfig, VertexId, Weight,
};

/// Connected graph: a random tree plus extra edges, weights in halves.
fn graph_strategy(max_n: usize, max_extra: usize) -> impl Strategy<Value = Graph<Exact>> {
    (2..=max_n).prop_flat_map(move |n| {
        let parents: Vec<BoxedStrategy<usize>> = (1..n).map(|v| (0..v).boxed()).collect();
        let extra = prop::collection::vec((0..n, 0..n), 0..=max_extra);
        let weights = prop::collection::vec(1i128..=12, n - 1 + max_extra);
        (Just(n), parents, extra, weights).prop_map(|(n, parents, extra, weights)| {
            let mut seen = BTreeSet::new();
            let mut edges = Vec::new();
            let mut w = weights.into_iter();
            let pairs = parents.into_iter().enumerate().map(|(i, p)| (p, i + 1)).chain(extra);
            for (a, b) in pairs {
                let key = (a.min(b), a.max(b));
                if a != b && seen.insert(key) {
                    edges.push((key.0, key.1, Exact::new(w.next().unwrap_or(2), 2)));
                }
            }
            Graph::new(n, edges).unwrap()
        })
    })
}

fn with_terminals(max_n: usize, max_extra: usize, max_s: usize) -> impl Strategy<Value = (Graph<Exact>, Vec<VertexId>)> {
    graph_strategy(max_n, max_extra).prop_flat_map(move |g| {
        let n = g.n();
        let s = prop::sample::subsequence((0..n).collect::<Vec<_>>(), 2.min(n)..=max_s.min(n));
        (Just(g), s)
    })
}

fn floyd_warshall(g: &Graph<Exact>) -> Vec<Vec<Option<Exact>>> {
    let n = g.n();
    let mut d = vec![vec![None; n]; n];
    for (v, row) in d.iter_mut().enumerate() {
        row[v] = Some(Exact::zero());
    }
    for e in g.edges() {
        for (a, b) in [(e.u, e.v), (e.v, e.u)] {
            if d[a][b].as_ref().is_none_or(|x| e.w < *x) {
                d[a][b] = Some(e.w);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    let via = a + b;
                    if d[i][j].as_ref().is_none_or(|x| via < *x) {
                        d[i][j] = Some(via);
                    }
                }
            }
        }
    }
    d
}

fn connects(g: &Graph<Exact>, edges: &BTreeSet<EdgeId>, s: &[VertexId]) -> bool {
    let mask = g.mask(edges);
    s.iter().all(|&t| masked_distance(g, s[0], t, &mask).is_some())
}

/// Minimum-weight edge subset connecting `s`, by enumeration.
fn brute_steiner(g: &Graph<Exact>, s: &[VertexId]) -> Exact {
    let m = g.edge_count();
    let mut best: Option<Exact> = None;
    for bits in 0u32..(1 << m) {
        let set: BTreeSet<EdgeId> = (0..m).filter(|&e| bits >> e & 1 == 1).collect();
        let w = g.weight_of(&set);
        if best.as_ref().is_some_and(|b| w >= *b) {
            continue;
        }
        if connects(g, &set, s) {
            best = Some(w);
        }
    }
    best.expect("graph is connected")
}

/// The spanner condition evaluated directly from Floyd-Warshall distances.
fn brute_valid(g: &Graph<Exact>, s: &[VertexId], edges: &BTreeSet<EdgeId>, beta: &Exact) -> bool {
    let mask = g.mask(edges);
    let full = floyd_warshall(g);
    let mut sub_edges = Vec::new();
    for (id, e) in g.edges().iter().enumerate() {
        if mask[id] {
            sub_edges.push((e.u, e.v, e.w));
        }
    }
    let sub = floyd_warshall(&Graph::new(g.n(), sub_edges).unwrap());
    s.iter().all(|&u| {
        s.iter().filter(|&&v| v > u).all(|&v| {
            let p = fixed_shortest_path(g, u, v).unwrap();
            let bound = full[u][v].unwrap() + *beta * p.max_edge;
            sub[u][v].as_ref().is_some_and(|d| *d <= bound)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn fixed_paths_match_floyd_warshall(g in graph_strategy(9, 10)) {
        let d = floyd_warshall(&g);
        for u in 0..g.n() {
            for v in 0..g.n() {
                let p = fixed_shortest_path(&g, u, v).unwrap();
                prop_assert_eq!(Some(p.dist), d[u][v]);
                // the path is a walk of matching length and maximum
                prop_assert_eq!(p.vertices.first().copied(), Some(u));
                prop_assert_eq!(p.vertices.last().copied(), Some(v));
                let mut len = Exact::zero();
                let mut max = Exact::zero();
                for (i, &e) in p.edges.iter().enumerate() {
                    let edge = g.edge(e);
                    prop_assert!(edge.key() == (p.vertices[i].min(p.vertices[i + 1]), p.vertices[i].max(p.vertices[i + 1])));
                    len = len + edge.w;
                    if edge.w > max { max = edge.w; }
                }
                prop_assert_eq!(len, p.dist);
                prop_assert_eq!(max, p.max_edge);
                // both orientations pick the same edges
                let q = fixed_shortest_path(&g, v, u).unwrap();
                let mut rev = q.edges.clone();
                rev.reverse();
                prop_assert_eq!(rev, p.edges);
            }
        }
    }

    #[test]
    fn distances_obey_triangle_inequality(g in graph_strategy(8, 8)) {
        let n = g.n();
        let d: Vec<Vec<Exact>> = (0..n)
            .map(|u| (0..n).map(|v| fixed_shortest_path(&g, u, v).unwrap().dist).collect())
            .collect();
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(&d[a][b], &d[b][a]);
                for c in 0..n {
                    prop_assert!(d[a][c] <= d[a][b] + d[b][c]);
                }
            }
        }
    }

    #[test]
    fn steiner_solvers_bracket_the_optimum((g, s) in with_terminals(7, 5, 5)) {
        let best = brute_steiner(&g, &s);
        let exact = exact_steiner(&g, &s).unwrap();
        let approx = approx_steiner(&g, &s).unwrap();
        prop_assert_eq!(&exact.weight, &best);
        prop_assert!(connects(&g, &exact.edges, &s));
        prop_assert!(connects(&g, &approx.edges, &s));
        prop_assert!(approx.weight >= best);
        prop_assert!(approx.weight <= best * Exact::new(2, 1));
    }

    #[test]
    fn backbone_structure((g, s) in with_terminals(10, 10, 6), b in 1i128..=8) {
        let beta = Exact::new(b, 4);
        let bb = build_backbone(&g, &s, AdditiveCondition::relative(beta)).unwrap();
        let rm = g.mask(&bb.r.edges);
        for (u, v) in s.iter().flat_map(|&u| s.iter().filter(move |&&v| v > u).map(move |&v| (u, v))) {
            let p = fixed_shortest_path(&g, u, v).unwrap();
            let ok = masked_distance(&g, u, v, &rm)
                .is_some_and(|d| d <= p.dist + beta * p.max_edge);
            prop_assert_eq!(!ok, bb.unsatisfied_pairs.contains(&(u, v)));
            if !ok {
                prop_assert!(p.vertices.iter().all(|x| bb.s_prime.contains(x)));
            }
        }
        prop_assert!(s.iter().all(|t| bb.s_prime.contains(t)));
        let everything: Vec<VertexId> = bb.s_prime.iter().copied().collect();
        prop_assert!(connects(&g, &bb.h.edges, &everything));
        // r <= 2 OPT(S) <= 2 OPT(S') <= 2 t, so h <= r + t <= 3 t
        prop_assert!(bb.h.weight <= bb.r.weight + bb.t.weight);
        prop_assert!(bb.r.weight <= bb.t.weight * Exact::new(2, 1));
        // H is a tree
        prop_assert_eq!(bb.h.edges.len() + 1, bb.h.vertices(&g).len().max(1));
    }

    #[test]
    fn constructions_are_valid_and_no_lighter_than_optimum((g, s) in with_terminals(7, 6, 5), k in 0usize..3) {
        let eps = [Exact::new(1, 4), Exact::new(1, 2), Exact::one()][k];
        prop_assume!(g.edge_count() <= 12);
        let split = EpsilonSplit::from_eps(eps).unwrap();
        let a = eps_spanner(&g, &s, &split).unwrap();
        prop_assert!(brute_valid(&g, &s, &a.edges, &eps));
        let opt = exact_one_level(&g, &s, &AdditiveCondition::relative(eps)).unwrap();
        prop_assert!(brute_valid(&g, &s, &opt.edges, &eps));
        prop_assert!(opt.weight <= a.weight);
        let four = eps + Exact::new(4, 1);
        let b = four_eps_spanner(&g, &s, &split).unwrap();
        prop_assert!(brute_valid(&g, &s, &b.edges, &four));
        let opt4 = exact_one_level(&g, &s, &AdditiveCondition::relative(four)).unwrap();
        prop_assert!(opt4.weight <= b.weight);
    }

    #[test]
    fn branch_and_bound_matches_enumeration((g, s) in with_terminals(6, 6, 4), b in 0i128..=8) {
        prop_assume!(g.edge_count() <= 12);
        let cond = AdditiveCondition::relative(Exact::new(b, 4));
        let bb = exact_one_level(&g, &s, &cond).unwrap();
        let en = exact_one_level_enumerate(&g, &s, &cond).unwrap();
        prop_assert_eq!(bb.weight, en.weight);
    }

    #[test]
    fn verification_is_monotone((g, s) in with_terminals(9, 9, 5), keep in prop::collection::vec(any::<bool>(), 20), add in prop::collection::vec(any::<bool>(), 20)) {
        let cond = AdditiveCondition::relative(Exact::new(1, 2));
        let m = g.edge_count();
        let small: BTreeSet<EdgeId> = (0..m).filter(|&e| keep[e % 20]).collect();
        let big: BTreeSet<EdgeId> = (0..m).filter(|&e| keep[e % 20] || add[e % 20]).collect();
        let rs = verify_spanner(&g, &s, &small, &cond).unwrap();
        let rb = verify_spanner(&g, &s, &big, &cond).unwrap();
        prop_assert_eq!(rs.ok, brute_valid(&g, &s, &small, &Exact::new(1, 2)));
        prop_assert!(!rs.ok || rb.ok);
        prop_assert!(rb.violations.len() <= rs.violations.len());
    }

    #[test]
    fn universe_maps_back_to_kept_edges((g, s) in with_terminals(10, 10, 5)) {
        let bb = build_backbone(&g, &s, AdditiveCondition::relative(Exact::new(1, 2))).unwrap();
        let inst = build_universe(&g, &bb).unwrap();
        let gp = inst.spliced();
        let all: BTreeSet<EdgeId> = (0..gp.edge_count()).collect();
        let back = map_back(&inst, &all).unwrap();
        let kept: BTreeSet<EdgeId> = (0..g.edge_count()).filter(|&e| inst.keeps(e)).collect();
        prop_assert_eq!(&back, &kept);
        // rescaled backbone pieces restore the original tree weight
        let tree_back = map_back(&inst, &inst.h_prime_edges).unwrap();
        prop_assert_eq!(tree_back, bb.h.edges.clone());
        prop_assert_eq!(gp.weight_of(&inst.h_prime_edges), Exact::from_usize(inst.vh));
    }

    #[test]
    fn sampled_spanner_always_valid((g, s) in with_terminals(12, 12, 6), seed in 0u64..1000) {
        let split = EpsilonSplit::from_eps(Exact::new(1, 2)).unwrap();
        let sp = wmax_spanner(&g, &s, &SampleConfig::new(split, seed)).unwrap();
        let cond = AdditiveCondition::absolute(Exact::new(9, 2));
        prop_assert!(verify_spanner(&g, &s, &sp.edges, &cond).unwrap().ok);
    }

    #[test]
    fn rounding_goes_to_the_first_grid_point_above(level in 1usize..200, p in 1.1f64..6.0, q in 0.001f64..1.0) {
        let (i, value) = round_up_to_grid(level as f64, p, q);
        prop_assert!(value >= level as f64 * (1.0 - 1e-12));
        prop_assert!((value - p.powf(q + i as f64)).abs() <= 1e-9 * value);
        if i > 0 {
            prop_assert!(p.powf(q + i as f64 - 1.0) < level as f64);
        }
    }
}

fn tiny_levels() -> impl Strategy<Value = MultiLevelInstance<Exact>> {
    graph_strategy(6, 5)
        .prop_filter("at most 10 edges", |g| g.edge_count() <= 10)
        .prop_flat_map(|g| {
            let n = g.n();
            (Just(g), prop::collection::vec(0usize..=3, n))
        })
        .prop_filter_map("needs a top-level terminal", |(g, raw)| {
            let levels: BTreeMap<VertexId, usize> =
                raw.iter().enumerate().filter(|(_, &l)| l > 0).map(|(v, &l)| (v, l)).collect();
            MultiLevelInstance::new(g, levels, AdditiveCondition::relative(Exact::new(1, 2))).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn multilevel_solutions_are_nested_and_valid(inst in tiny_levels(), q in 0.01f64..1.0) {
        let opt = exact_multilevel(&inst).unwrap();
        for oracle in [&ExactOracle as &dyn lightspan::OneLevelOracle<Exact>, &EpsSpannerOracle] {
            let sol = solve_with_q(&inst, oracle, std::f64::consts::E, q).unwrap();
            prop_assert_eq!(sol.edge_sets.len(), inst.k);
            let mut cost = Exact::zero();
            for (i, set) in sol.edge_sets.iter().enumerate() {
                if i > 0 {
                    prop_assert!(set.is_subset(&sol.edge_sets[i - 1]));
                }
                let s = inst.terminals_at(i + 1);
                if s.len() >= 2 {
                    prop_assert!(brute_valid(&inst.g, &s, set, &Exact::new(1, 2)));
                }
                cost = cost + inst.g.weight_of(set);
            }
            prop_assert_eq!(&cost, &sol.cost);
            prop_assert!(opt.cost <= sol.cost);
        }
        // the optimum itself is nested and valid
        for (i, set) in opt.edge_sets.iter().enumerate() {
            if i > 0 {
                prop_assert!(set.is_subset(&opt.edge_sets[i - 1]));
            }
            let s = inst.terminals_at(i + 1);
            if s.len() >= 2 {
                prop_assert!(brute_valid(&inst.g, &s, set, &Exact::new(1, 2)));
            }
        }
    }
}
