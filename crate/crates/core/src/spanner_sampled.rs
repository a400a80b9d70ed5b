//! The sampling-based `+(4+ε)W_max` construction.
//!
//! Pairs whose fixed path misses little weight get the whole path. The rest
//! get only a prefix and a suffix of missing weight `ℓ` each, and a random
//! sample of backbone vertices, connected by a `+εW` spanner, is expected to
//! bridge the middle. A final repair pass inserts the fixed path of any pair
//! that is still violated, so the output is always valid.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::condition::AdditiveCondition;
use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::oracle::verify_with_paths;
use crate::paths::{search_masked, FixedPath};
use crate::spanner_additive::{
    certify, checked_input, eps_spanner, initial_subgraph, pair_order, universe_paths, universe_stats, EpsilonSplit,
    GreedyState, InitialRule, Spanner,
};
use crate::steiner::build_backbone;
use crate::transform::{build_universe, map_back};
use crate::weight::Weight;

/// Threshold source.
#[derive(Clone, Debug, PartialEq)]
pub enum EllSetting {
    /// Fixed-point search.
    Auto,
    /// A given value in the scaled universe, `0 < ell <= |V_H|`.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleConfig<W> {
    /// Oversampling constant.
    pub c: f64,
    pub seed: u64,
    pub split: EpsilonSplit<W>,
    pub ell: EllSetting,
    /// Check the bridging distance chain of every prefix/suffix pair.
    pub instrument: bool,
}

impl<W: Weight> SampleConfig<W> {
    pub fn new(split: EpsilonSplit<W>, seed: u64) -> Self {
        SampleConfig {
            c: 2.0,
            seed,
            split,
            ell: EllSetting::Auto,
            instrument: false,
        }
    }
}

/// Edge positions along a fixed path; `prefix` is `0..prefix_len` and
/// `suffix` is `suffix_start..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefixSuffix {
    pub prefix_len: usize,
    pub suffix_start: usize,
    pub path_len: usize,
    pub overlapped: bool,
}

impl PrefixSuffix {
    pub fn prefix(&self) -> std::ops::Range<usize> {
        0..self.prefix_len
    }

    pub fn suffix(&self) -> std::ops::Range<usize> {
        self.suffix_start..self.path_len
    }
}

/// Shortest initial and final subpaths whose missing weight reaches `ell`.
/// Without enough missing weight a side extends to the farthest missing edge.
pub fn prefix_suffix<W: Weight>(g: &Graph<W>, path: &FixedPath<W>, mask: &[bool], ell: &W) -> PrefixSuffix {
    let len = path.edges.len();
    let missing: Vec<Option<W>> = path
        .edges
        .iter()
        .map(|&e| (!mask[e]).then(|| g.edge(e).w.clone()))
        .collect();
    if missing.iter().all(Option::is_none) {
        return PrefixSuffix {
            prefix_len: 0,
            suffix_start: len,
            path_len: len,
            overlapped: false,
        };
    }
    let reach = |order: &mut dyn Iterator<Item = usize>| {
        let mut acc = W::zero();
        let mut last = None;
        for i in order {
            if let Some(w) = &missing[i] {
                acc = acc + w.clone();
                last = Some(i);
                if acc >= *ell {
                    break;
                }
            }
        }
        last.expect("at least one missing edge")
    };
    let prefix_end = reach(&mut (0..len));
    let suffix_start = reach(&mut (0..len).rev());
    PrefixSuffix {
        prefix_len: prefix_end + 1,
        suffix_start,
        path_len: len,
        overlapped: prefix_end >= suffix_start,
    }
}

/// Result of the threshold search.
#[derive(Clone, Debug, PartialEq)]
pub enum EllChoice {
    Threshold { ell: f64, evaluations: usize },
    /// No usable threshold; the caller builds a `+εW` spanner instead.
    Fallback { ell: f64 },
}

/// Maximum bisection steps of [`choose_ell_with`].
pub const ELL_MAX_HALVINGS: usize = 40;
/// Relative change at which the search stops.
pub const ELL_REL_STOP: f64 = 0.01;

/// Approximate the fixed point `ℓ = sqrt(c ln n |V_H| V'(ℓ)) / |S|` on `(0, |V_H|]`.
///
/// One closed-form step is tried first (exact when `V'` does not depend on
/// `ℓ`); otherwise the crossing is bracketed by bisection. A result below
/// `min_weight` signals fallback.
pub fn choose_ell_with(
    vh: usize,
    s: usize,
    n: usize,
    c: f64,
    min_weight: f64,
    mut vprime: impl FnMut(f64) -> usize,
) -> EllChoice {
    let vh_f = vh as f64;
    let scale = c * (n.max(2) as f64).ln() * vh_f;
    let mut evaluations = 0;
    let mut f = |ell: f64| {
        evaluations += 1;
        ((scale * vprime(ell) as f64).sqrt() / s.max(1) as f64).min(vh_f)
    };
    let first = f(vh_f);
    let ell = if first > 0.0 && ((f(first) - first).abs() < ELL_REL_STOP * first) {
        first
    } else {
        let (mut lo, mut hi) = (0.0, vh_f);
        for _ in 0..ELL_MAX_HALVINGS {
            let mid = 0.5 * (lo + hi);
            if f(mid) > mid {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < ELL_REL_STOP * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    if !(ell > 0.0) || ell < min_weight {
        EllChoice::Fallback { ell }
    } else {
        EllChoice::Threshold { ell, evaluations }
    }
}

/// `ceil(c ln n |V_H| / ell)`, capped at `|V_H|`.
pub fn sample_size(c: f64, n: usize, vh: usize, ell: f64) -> usize {
    let raw = (c * (n.max(2) as f64).ln() * vh as f64 / ell).ceil();
    if raw.is_finite() {
        (raw.max(1.0) as usize).min(vh)
    } else {
        vh
    }
}

/// Sample `size` vertices without replacement from `pool`.
pub fn sample_vertices(pool: &[VertexId], size: usize, seed: u64, stream: u64) -> Vec<VertexId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out: Vec<VertexId> = sample(&mut rng, pool.len(), size.min(pool.len()))
        .into_iter()
        .map(|i| pool[i])
        .collect();
    out.sort_unstable();
    out
}

/// The pair phase: full paths when the missing weight is below `ell`,
/// otherwise prefix and suffix. Returns the pairs that got only the ends.
pub fn pair_phase<W: Weight>(
    gp: &Graph<W>,
    state: &mut GreedyState<W>,
    paths: &crate::paths::PathTable<W>,
    slack: &W,
    ell: &W,
) -> Vec<((VertexId, VertexId), PrefixSuffix)> {
    let mut partial = Vec::new();
    for key in pair_order(paths) {
        let path = &paths.pairs[&key];
        state.pairs_examined += 1;
        let d = state.distance(gp, key.0, key.1);
        if d.is_some_and(|d| d.le_tol(&(path.dist.clone() + slack.clone()))) {
            continue;
        }
        let missing = W::sum_iter(
            path.edges
                .iter()
                .filter(|&&e| !state.mask[e])
                .map(|&e| gp.edge(e).w.clone()),
        );
        let ps = prefix_suffix(gp, path, &state.mask, ell);
        let chosen: Vec<EdgeId> = if missing < *ell || ps.overlapped {
            path.edges.clone()
        } else {
            ps.prefix().chain(ps.suffix()).map(|i| path.edges[i]).collect()
        };
        if state.insert(chosen) {
            state.insertions += 1;
        }
        if !(missing < *ell || ps.overlapped) {
            partial.push((key, ps));
        }
    }
    partial
}

/// Count chain checks and violations for the prefix/suffix pairs: for a
/// prefix vertex `p` and suffix vertex `q` with sampled vertices `r`, `s`
/// within `W_max` in the candidate, the walk `u-p-r-s-q-v` must stay within
/// `d_G(u,v) + (4+ε)W_max`.
#[allow(clippy::too_many_arguments)]
fn chain_checks<W: Weight>(
    g: &Graph<W>,
    candidate: &BTreeSet<EdgeId>,
    sampled: &[VertexId],
    universe_paths: &crate::paths::PathTable<W>,
    partial: &[((VertexId, VertexId), PrefixSuffix)],
    condition: &AdditiveCondition<W>,
    w_max: &W,
    d_g: impl Fn(VertexId, VertexId) -> W,
) -> (usize, usize) {
    let mask = g.mask(candidate);
    let trees: Vec<_> = sampled.iter().map(|&z| search_masked(g, z, &mask, None)).collect();
    let nearest = |x: VertexId| {
        trees
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.dist(x).filter(|d| d.le_tol(w_max)).map(|d| (d.clone(), i)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
    };
    let mut checks = 0;
    let mut violations = 0;
    for ((u, v), ps) in partial {
        let path = &universe_paths.pairs[&(*u, *v)];
        let original = |i: usize| path.vertices[i] < g.n();
        let p = (0..=ps.prefix_len).rev().filter(|&i| original(i)).find_map(|i| {
            let x = path.vertices[i];
            nearest(x).map(|hit| (x, hit))
        });
        let q = (ps.suffix_start..=ps.path_len).filter(|&i| original(i)).find_map(|i| {
            let x = path.vertices[i];
            nearest(x).map(|hit| (x, hit))
        });
        let (Some((p, (d_pr, r))), Some((q, (d_qs, s)))) = (p, q) else {
            continue;
        };
        checks += 1;
        let d_h = |a: VertexId, b: VertexId| search_masked(g, a, &mask, Some(b)).dist(b).cloned();
        let legs = [d_h(*u, p), Some(d_pr), trees[r].dist(sampled[s]).cloned(), Some(d_qs), d_h(q, *v)];
        let chain = legs.into_iter().try_fold(W::zero(), |acc, d| d.map(|d| acc + d));
        let bound = d_g(*u, *v) + condition.slack(w_max, w_max);
        if !chain.is_some_and(|c| c.le_tol(&bound)) {
            violations += 1;
        }
    }
    (checks, violations)
}

/// Pick `ℓ` for an instance by running the search with sampled backbones.
pub fn choose_ell<W: Weight>(g: &Graph<W>, s: &[VertexId], cfg: &SampleConfig<W>) -> Result<EllChoice> {
    let terms = checked_input(g, s)?;
    let beta = W::from_usize(4) + cfg.split.eps.clone();
    let backbone = build_backbone(g, &terms, AdditiveCondition::absolute(beta))?;
    let inst = build_universe(g, &backbone)?;
    Ok(search_ell(g, &terms, &inst, cfg))
}

fn search_ell<W: Weight>(
    g: &Graph<W>,
    terms: &[VertexId],
    inst: &crate::transform::ScaledInstance<W>,
    cfg: &SampleConfig<W>,
) -> EllChoice {
    let pool: Vec<VertexId> = inst.h_vertices.iter().copied().collect();
    let min_weight = inst
        .spliced()
        .edges()
        .iter()
        .map(|e| e.w.to_f64())
        .fold(f64::INFINITY, f64::min);
    choose_ell_with(inst.vh, terms.len(), g.n(), cfg.c, min_weight, |ell| {
        let z = sample_vertices(&pool, sample_size(cfg.c, g.n(), inst.vh, ell), cfg.seed, 1);
        sampled_backbone_size(g, &z, &cfg.split)
    })
}

/// `|V'_H|`: vertex count of the backbone a `+εW` run on `z` would use.
fn sampled_backbone_size<W: Weight>(g: &Graph<W>, z: &[VertexId], split: &EpsilonSplit<W>) -> usize {
    if z.len() < 2 {
        return z.len();
    }
    build_backbone(g, z, AdditiveCondition::relative(split.eps.clone()))
        .map(|bb| bb.h_vertex_count(g))
        .unwrap_or(z.len())
}

/// `+(4+ε)W_max` subsetwise spanner.
pub fn wmax_spanner<W: Weight>(g: &Graph<W>, s: &[VertexId], cfg: &SampleConfig<W>) -> Result<Spanner<W>> {
    if !(cfg.c > 0.0) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {}", cfg.c)));
    }
    let terms = checked_input(g, s)?;
    if terms.len() < 2 {
        return Err(Error::InvalidParameter("the sampled construction needs at least two terminals".into()));
    }
    let beta = W::from_usize(4) + cfg.split.eps.clone();
    let condition = AdditiveCondition::absolute(beta.clone());
    let backbone = build_backbone(g, &terms, condition.clone())?;
    let inst = build_universe(g, &backbone)?;
    let mut stats = universe_stats(&backbone, &inst);
    let choice = match cfg.ell {
        EllSetting::Auto => search_ell(g, &terms, &inst, cfg),
        EllSetting::Fixed(ell) => {
            if !(ell > 0.0 && ell <= inst.vh as f64) {
                return Err(Error::InvalidParameter(format!("ell must lie in (0, {}], got {ell}", inst.vh)));
            }
            EllChoice::Threshold { ell, evaluations: 0 }
        }
    };
    let ell = match choice {
        EllChoice::Threshold { ell, .. } => ell,
        EllChoice::Fallback { ell } => {
            stats.ell = Some(ell);
            stats.ell_fallback = true;
            let sp = eps_spanner(g, &terms, &cfg.split)?;
            return certify(g, &backbone, sp.edges, stats);
        }
    };
    stats.ell = Some(ell);
    let gp = inst.spliced();
    let paths = universe_paths(&inst, &terms)?;
    let (initial, _) = initial_subgraph(&inst, &backbone, &InitialRule::Eps);
    stats.initial_edges = initial.len();
    let mut state = GreedyState::new(gp, &initial);
    let slack = beta * inst.sigma.clone() * backbone.w_max.clone();
    let ell_w = W::from_f64_approx(ell);
    let partial = pair_phase(gp, &mut state, &paths, &slack, &ell_w);
    stats.pairs_examined = state.pairs_examined;
    stats.insertions = state.insertions;
    stats.prefix_suffix_pairs = partial.len();

    let pool: Vec<VertexId> = inst.h_vertices.iter().copied().collect();
    let z = sample_vertices(&pool, sample_size(cfg.c, g.n(), inst.vh, ell), cfg.seed, 0);
    stats.sample_size = z.len();
    let mut candidate = map_back(&inst, &state.current)?;
    candidate.extend(backbone.h.edges.iter().copied());
    if z.len() >= 2 {
        let zs = eps_spanner(g, &z, &cfg.split)?;
        stats.sampled_h_vertices = zs.stats.h_vertices;
        candidate.extend(zs.edges);
    } else {
        stats.sampled_h_vertices = z.len();
    }

    if cfg.instrument {
        let (checks, violations) = chain_checks(
            g,
            &candidate,
            &z,
            &paths,
            &partial,
            &condition,
            &backbone.w_max,
            |u, v| backbone.paths.dist(u, v).cloned().expect("terminal pair"),
        );
        stats.chain_checks = checks;
        stats.chain_violations = violations;
    }

    let report = verify_with_paths(g, &backbone.paths, &candidate, &condition)?;
    stats.repairs = report.violations.len();
    for v in &report.violations {
        let path = backbone.paths.get(v.pair.0, v.pair.1).expect("terminal pair");
        candidate.extend(path.edges.iter().copied());
    }
    certify(g, &backbone, candidate, stats)
}
