//! The scaled and subdivided universe the greedy constructions run in.
//!
//! Weights are multiplied by `sigma = |V_H| / weight(H)`, heavy non-tree
//! edges (scaled weight above `|V_H|`) are dropped, every backbone edge is
//! split into unit-or-lighter pieces, and the pieces are spliced back into
//! the graph. `provenance` maps every edge of the result to its source edge.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::steiner::Backbone;
use crate::weight::Weight;

/// One backbone edge after subdivision.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain<W> {
    pub original: EdgeId,
    /// Vertex sequence including both endpoints.
    pub vertices: Vec<VertexId>,
    pub piece_weight: W,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubdividedTree<W> {
    pub chains: Vec<Chain<W>>,
    pub subdivision_vertices: usize,
    /// `|V_{H'}|`: backbone vertices plus subdivision vertices.
    pub vertex_count: usize,
}

impl<W: Weight> SubdividedTree<W> {
    pub fn total_weight(&self) -> W {
        W::sum_iter(self.chains.iter().map(|c| {
            c.piece_weight.clone() * W::from_usize(c.vertices.len() - 1)
        }))
    }
}

#[derive(Clone, Debug)]
pub struct ScaledInstance<W> {
    pub sigma: W,
    /// `|V_H|`.
    pub vh: usize,
    pub h_vertices: BTreeSet<VertexId>,
    /// Input graph with scaled weights; edge ids match the input.
    pub g_s: Graph<W>,
    /// Backbone edges (input ids).
    pub h_s: BTreeSet<EdgeId>,
    /// Non-tree edges dropped for exceeding `|V_H|` (input ids).
    pub heavy: BTreeSet<EdgeId>,
    pub h_prime: Option<SubdividedTree<W>>,
    pub g_prime_s: Option<Graph<W>>,
    /// Edge of `g_prime_s` -> input edge.
    pub provenance: Vec<EdgeId>,
    /// Input edge -> edges of `g_prime_s` (empty for dropped edges).
    pub forward: Vec<Vec<EdgeId>>,
    /// Edges of `g_prime_s` that belong to the subdivided backbone.
    pub h_prime_edges: BTreeSet<EdgeId>,
}

impl<W: Weight> ScaledInstance<W> {
    /// The spliced graph; panics if [`splice`] has not run.
    pub fn spliced(&self) -> &Graph<W> {
        self.g_prime_s.as_ref().expect("splice has not run")
    }

    /// Whether input edge `e` survives heavy-edge removal.
    pub fn keeps(&self, e: EdgeId) -> bool {
        !self.heavy.contains(&e)
    }
}

/// Multiply all weights by `|V_H| / weight(H)`.
pub fn scale_instance<W: Weight>(g: &Graph<W>, backbone: &Backbone<W>) -> ScaledInstance<W> {
    let h_vertices = backbone.h_vertices(g);
    let vh = h_vertices.len();
    let sigma = if backbone.h.weight.is_positive() {
        W::from_usize(vh) / backbone.h.weight.clone()
    } else {
        W::one()
    };
    ScaledInstance {
        g_s: g.scaled(&sigma),
        sigma,
        vh,
        h_vertices,
        h_s: backbone.h.edges.clone(),
        heavy: BTreeSet::new(),
        h_prime: None,
        g_prime_s: None,
        provenance: Vec::new(),
        forward: Vec::new(),
        h_prime_edges: BTreeSet::new(),
    }
}

/// Mark non-tree edges heavier than `|V_H|` for removal.
pub fn drop_heavy_edges<W: Weight>(mut inst: ScaledInstance<W>) -> ScaledInstance<W> {
    let limit = W::from_usize(inst.vh);
    inst.heavy = inst
        .g_s
        .edges()
        .iter()
        .enumerate()
        .filter(|(id, e)| !inst.h_s.contains(id) && e.w > limit)
        .map(|(id, _)| id)
        .collect();
    inst
}

/// Split each backbone edge of scaled weight `w` into `ceil(w)` equal pieces.
pub fn subdivide_tree<W: Weight>(mut inst: ScaledInstance<W>) -> ScaledInstance<W> {
    let mut next = inst.g_s.n();
    let mut chains = Vec::with_capacity(inst.h_s.len());
    for &e in &inst.h_s {
        let edge = inst.g_s.edge(e);
        let pieces = edge.w.ceil_to_usize().max(1);
        let mut vertices = Vec::with_capacity(pieces + 1);
        vertices.push(edge.u);
        for _ in 1..pieces {
            vertices.push(next);
            next += 1;
        }
        vertices.push(edge.v);
        chains.push(Chain {
            original: e,
            vertices,
            piece_weight: edge.w.clone() / W::from_usize(pieces),
        });
    }
    let subdivision_vertices = next - inst.g_s.n();
    inst.h_prime = Some(SubdividedTree {
        chains,
        subdivision_vertices,
        vertex_count: inst.vh + subdivision_vertices,
    });
    inst
}

/// Replace backbone edges of `g_s` by their chains and drop heavy edges.
pub fn splice<W: Weight>(mut inst: ScaledInstance<W>) -> Result<ScaledInstance<W>> {
    let h_prime = inst
        .h_prime
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("splice requires a subdivided tree".into()))?;
    let n = inst.g_s.n() + h_prime.subdivision_vertices;
    let mut edges = Vec::new();
    let mut provenance = Vec::new();
    let mut forward = vec![Vec::new(); inst.g_s.edge_count()];
    let mut h_prime_edges = BTreeSet::new();
    let mut chain_of = vec![None; inst.g_s.edge_count()];
    for (i, c) in h_prime.chains.iter().enumerate() {
        chain_of[c.original] = Some(i);
    }
    for (id, e) in inst.g_s.edges().iter().enumerate() {
        if let Some(ci) = chain_of[id] {
            let c = &h_prime.chains[ci];
            for pair in c.vertices.windows(2) {
                let new_id = edges.len();
                edges.push((pair[0], pair[1], c.piece_weight.clone()));
                provenance.push(id);
                forward[id].push(new_id);
                h_prime_edges.insert(new_id);
            }
        } else if !inst.heavy.contains(&id) {
            let new_id = edges.len();
            edges.push((e.u, e.v, e.w.clone()));
            provenance.push(id);
            forward[id].push(new_id);
        }
    }
    inst.g_prime_s = Some(Graph::new(n, edges)?);
    inst.provenance = provenance;
    inst.forward = forward;
    inst.h_prime_edges = h_prime_edges;
    Ok(inst)
}

/// All four stages in order.
pub fn build_universe<W: Weight>(g: &Graph<W>, backbone: &Backbone<W>) -> Result<ScaledInstance<W>> {
    splice(subdivide_tree(drop_heavy_edges(scale_instance(g, backbone))))
}

/// Input edges behind a set of spliced edges. A subdivided edge is restored
/// whole when any of its pieces is selected.
pub fn map_back<W: Weight>(inst: &ScaledInstance<W>, edges: &BTreeSet<EdgeId>) -> Result<BTreeSet<EdgeId>> {
    edges
        .iter()
        .map(|&e| inst.provenance.get(e).copied().ok_or(Error::UnknownEdge(e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condition::AdditiveCondition;
    use crate::paths::{build_path_table, search_all};
    use crate::steiner::build_backbone;
    use crate::weight::Exact;

    fn ex(n: i128) -> Exact {
        Exact::new(n, 1)
    }

    fn path5() -> Graph<Exact> {
        // a path backbone plus a long chord
        Graph::new(
            5,
            [(0, 1, ex(1)), (1, 2, ex(2)), (2, 3, ex(3)), (3, 4, ex(4)), (0, 4, ex(40))],
        )
        .unwrap()
    }

    #[test]
    fn sigma_and_scaled_weights() {
        let g = path5();
        let bb = build_backbone(&g, &[0, 4], AdditiveCondition::relative(ex(1))).unwrap();
        // backbone is the path 0..4: 5 vertices, weight 10
        assert_eq!(bb.h.weight, ex(10));
        let inst = scale_instance(&g, &bb);
        assert_eq!(inst.vh, 5);
        assert_eq!(inst.sigma, Exact::new(1, 2));
        assert_eq!(inst.g_s.edge(3).w, ex(2));
        assert_eq!(g.weight_of(&inst.h_s) * inst.sigma, ex(5));
    }

    #[test]
    fn unit_sigma_leaves_graph_unchanged() {
        // 2 vertices, weight 2
        let g: Graph<Exact> = Graph::new(2, [(0, 1, ex(2))]).unwrap();
        let bb = build_backbone(&g, &[0, 1], AdditiveCondition::relative(ex(1))).unwrap();
        let inst = scale_instance(&g, &bb);
        assert_eq!(inst.sigma, ex(1));
        assert_eq!(inst.g_s, g);
    }

    #[test]
    fn heavy_chord_is_dropped_without_changing_terminal_distances() {
        let g = path5();
        let bb = build_backbone(&g, &[0, 4], AdditiveCondition::relative(ex(1))).unwrap();
        let inst = drop_heavy_edges(scale_instance(&g, &bb));
        // chord scales to 20 > |V_H| = 5
        assert_eq!(inst.heavy, [4].into_iter().collect());
        let inst = splice(subdivide_tree(inst)).unwrap();
        let gp = inst.spliced();
        assert_eq!(search_all(gp, 0).dist(4), search_all(&inst.g_s, 0).dist(4));
    }

    #[test]
    fn light_instance_has_nothing_heavy() {
        let g: Graph<Exact> = Graph::new(3, [(0, 1, ex(1)), (1, 2, ex(1)), (0, 2, ex(2))]).unwrap();
        let bb = build_backbone(&g, &[0, 1, 2], AdditiveCondition::relative(ex(1))).unwrap();
        let inst = drop_heavy_edges(scale_instance(&g, &bb));
        assert!(inst.heavy.is_empty());
    }

    #[test]
    fn fractional_edge_subdivision() {
        // single backbone edge scaled to 7/2 -> 4 pieces of 7/8 and 3 new vertices
        let g: Graph<Exact> = Graph::new(2, [(0, 1, ex(7))]).unwrap();
        let bb = build_backbone(&g, &[0, 1], AdditiveCondition::relative(ex(1))).unwrap();
        let mut inst = scale_instance(&g, &bb);
        inst.sigma = Exact::new(1, 2);
        inst.g_s = g.scaled(&inst.sigma);
        let inst = subdivide_tree(inst);
        let hp = inst.h_prime.as_ref().unwrap();
        assert_eq!(hp.subdivision_vertices, 3);
        assert_eq!(hp.chains[0].vertices.len(), 5);
        assert_eq!(hp.chains[0].piece_weight, Exact::new(7, 8));
    }

    #[test]
    fn scaled_edges_split_into_ceil_pieces() {
        let g: Graph<Exact> = Graph::new(3, [(0, 1, ex(1)), (1, 2, ex(1))]).unwrap();
        let bb = build_backbone(&g, &[0, 2], AdditiveCondition::relative(ex(1))).unwrap();
        let inst = build_universe(&g, &bb).unwrap();
        // |V_H| = 3, weight 2 -> pieces of 3/2 get split in two
        assert_eq!(inst.h_prime.as_ref().unwrap().subdivision_vertices, 2);
        let g1: Graph<Exact> = Graph::new(2, [(0, 1, ex(2))]).unwrap();
        let bb1 = build_backbone(&g1, &[0, 1], AdditiveCondition::relative(ex(1))).unwrap();
        let inst1 = build_universe(&g1, &bb1).unwrap();
        assert_eq!(inst1.h_prime.as_ref().unwrap().subdivision_vertices, 1);
    }

    #[test]
    fn already_light_backbone_splices_to_g_s() {
        let g: Graph<Exact> = Graph::new(3, [(0, 1, Exact::new(1, 2)), (1, 2, Exact::new(1, 3))]).unwrap();
        let bb = build_backbone(&g, &[0, 1, 2], AdditiveCondition::relative(ex(1))).unwrap();
        // force sigma = 1 so every backbone edge is already at most 1
        let mut inst = scale_instance(&g, &bb);
        inst.sigma = ex(1);
        inst.g_s = g.clone();
        let inst = splice(subdivide_tree(drop_heavy_edges(inst))).unwrap();
        assert_eq!(inst.h_prime.as_ref().unwrap().subdivision_vertices, 0);
        assert_eq!(inst.spliced(), &g);
    }

    #[test]
    fn provenance_round_trip() {
        let g = path5();
        let bb = build_backbone(&g, &[0, 4], AdditiveCondition::relative(ex(1))).unwrap();
        let inst = build_universe(&g, &bb).unwrap();
        let back = map_back(&inst, &inst.h_prime_edges).unwrap();
        assert_eq!(back, bb.h.edges);
        assert!(map_back(&inst, &BTreeSet::new()).unwrap().is_empty());
        assert!(matches!(
            map_back(&inst, &[9999].into_iter().collect()),
            Err(Error::UnknownEdge(9999))
        ));
        // every piece of one chain maps to the same input edge
        let chain = &inst.forward[3];
        assert!(chain.len() > 1);
        let set: BTreeSet<_> = chain.iter().copied().collect();
        assert_eq!(map_back(&inst, &set).unwrap(), [3].into_iter().collect());
    }

    #[test]
    fn subdivision_counts_respect_bounds() {
        let g = path5();
        let bb = build_backbone(&g, &[0, 2, 4], AdditiveCondition::relative(ex(1))).unwrap();
        let inst = build_universe(&g, &bb).unwrap();
        let hp = inst.h_prime.as_ref().unwrap();
        let h_s_weight = inst.g_s.weight_of(&inst.h_s);
        assert_eq!(hp.total_weight(), h_s_weight);
        assert!(Exact::from_usize(hp.subdivision_vertices) <= h_s_weight);
        assert!(hp.vertex_count <= 2 * inst.vh);
        let t = build_path_table(inst.spliced(), &[0, 2, 4]).unwrap();
        let t0 = build_path_table(&inst.g_s, &[0, 2, 4]).unwrap();
        for (k, p) in &t.pairs {
            assert_eq!(p.dist, t0.pairs[k].dist);
        }
    }
}
