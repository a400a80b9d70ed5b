//! Deterministic shortest paths and the per-pair `W(u, v)` table.
//!
//! Labels are ordered by `(distance, hop count, parent id)`; a vertex keeps
//! the lexicographically smallest label it is offered, so the tree of fixed
//! paths is unique for a given graph.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, VertexId};
use crate::weight::Weight;

#[derive(Clone, Debug, PartialEq)]
pub struct Label<W> {
    pub dist: W,
    pub hops: usize,
    pub parent: Option<(VertexId, EdgeId)>,
}

/// Single-source search result.
#[derive(Clone, Debug)]
pub struct SearchTree<W> {
    pub source: VertexId,
    labels: Vec<Option<Label<W>>>,
}

struct HeapItem<W> {
    dist: W,
    hops: usize,
    vertex: VertexId,
}

impl<W: Weight> PartialEq for HeapItem<W> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<W: Weight> Eq for HeapItem<W> {}
impl<W: Weight> PartialOrd for HeapItem<W> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<W: Weight> Ord for HeapItem<W> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.hops.cmp(&self.hops))
            .then(other.vertex.cmp(&self.vertex))
    }
}

fn label_less<W: Weight>(d: &W, h: usize, p: VertexId, cur: &Label<W>) -> bool {
    match d.total_cmp(&cur.dist) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => match h.cmp(&cur.hops) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => cur.parent.is_some_and(|(q, _)| p < q),
        },
    }
}

/// Label-setting search from `source` over the edges accepted by `allowed`.
/// Stops early once `target` is settled.
pub fn search<W, F>(g: &Graph<W>, source: VertexId, allowed: F, target: Option<VertexId>) -> SearchTree<W>
where
    W: Weight,
    F: Fn(EdgeId) -> bool,
{
    let mut labels: Vec<Option<Label<W>>> = vec![None; g.n()];
    let mut settled = vec![false; g.n()];
    let mut heap = BinaryHeap::new();
    labels[source] = Some(Label {
        dist: W::zero(),
        hops: 0,
        parent: None,
    });
    heap.push(HeapItem {
        dist: W::zero(),
        hops: 0,
        vertex: source,
    });
    while let Some(HeapItem { vertex: x, dist, hops }) = heap.pop() {
        if settled[x] {
            continue;
        }
        {
            let cur = labels[x].as_ref().expect("queued vertex has a label");
            if cur.dist != dist || cur.hops != hops {
                continue;
            }
        }
        settled[x] = true;
        if Some(x) == target {
            break;
        }
        for &(y, e) in g.neighbors(x) {
            if settled[y] || !allowed(e) {
                continue;
            }
            let nd = dist.clone() + g.edge(e).w.clone();
            let nh = hops + 1;
            let better = match &labels[y] {
                None => true,
                Some(cur) => label_less(&nd, nh, x, cur),
            };
            if better {
                let push = labels[y]
                    .as_ref()
                    .is_none_or(|cur| nd.total_cmp(&cur.dist) != Ordering::Equal || nh != cur.hops);
                labels[y] = Some(Label {
                    dist: nd.clone(),
                    hops: nh,
                    parent: Some((x, e)),
                });
                if push {
                    heap.push(HeapItem {
                        dist: nd,
                        hops: nh,
                        vertex: y,
                    });
                }
            }
        }
    }
    // drop tentative labels that were never settled when stopping early
    if target.is_some() {
        for (v, l) in labels.iter_mut().enumerate() {
            if !settled[v] {
                *l = None;
            }
        }
    }
    SearchTree { source, labels }
}

/// Search over the full graph.
pub fn search_all<W: Weight>(g: &Graph<W>, source: VertexId) -> SearchTree<W> {
    search(g, source, |_| true, None)
}

/// Search restricted to an edge mask.
pub fn search_masked<W: Weight>(g: &Graph<W>, source: VertexId, mask: &[bool], target: Option<VertexId>) -> SearchTree<W> {
    search(g, source, |e| mask[e], target)
}

/// Distance between two vertices using only edges in `mask`; `None` if unreachable.
pub fn masked_distance<W: Weight>(g: &Graph<W>, u: VertexId, v: VertexId, mask: &[bool]) -> Option<W> {
    search_masked(g, u, mask, Some(v)).dist(v).cloned()
}

impl<W: Weight> SearchTree<W> {
    pub fn dist(&self, v: VertexId) -> Option<&W> {
        self.labels[v].as_ref().map(|l| &l.dist)
    }

    pub fn label(&self, v: VertexId) -> Option<&Label<W>> {
        self.labels[v].as_ref()
    }

    pub fn reached(&self, v: VertexId) -> bool {
        self.labels[v].is_some()
    }

    /// Edge ids from the source to `v`, in path order.
    pub fn path_edges(&self, v: VertexId) -> Option<Vec<EdgeId>> {
        let mut out = Vec::new();
        let mut x = v;
        loop {
            let l = self.labels[x].as_ref()?;
            match l.parent {
                None => break,
                Some((p, e)) => {
                    out.push(e);
                    x = p;
                }
            }
        }
        out.reverse();
        Some(out)
    }

    /// Vertex sequence from the source to `v`.
    pub fn path_vertices(&self, v: VertexId) -> Option<Vec<VertexId>> {
        let mut out = vec![v];
        let mut x = v;
        loop {
            let l = self.labels[x].as_ref()?;
            match l.parent {
                None => break,
                Some((p, _)) => {
                    out.push(p);
                    x = p;
                }
            }
        }
        out.reverse();
        Some(out)
    }
}

/// The fixed shortest path between two vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPath<W> {
    pub endpoints: (VertexId, VertexId),
    pub dist: W,
    /// Vertex sequence from `endpoints.0` to `endpoints.1`.
    pub vertices: Vec<VertexId>,
    /// Edge ids in the same order as `vertices`.
    pub edges: Vec<EdgeId>,
    pub max_edge: W,
}

impl<W: Weight> FixedPath<W> {
    fn from_tree(g: &Graph<W>, tree: &SearchTree<W>, u: VertexId, v: VertexId) -> Option<Self> {
        // the tree is rooted at min(u, v); orient the result u -> v
        let mut vertices = tree.path_vertices(if tree.source == u { v } else { u })?;
        let mut edges = tree.path_edges(if tree.source == u { v } else { u })?;
        if tree.source != u {
            vertices.reverse();
            edges.reverse();
        }
        let dist = tree.dist(if tree.source == u { v } else { u })?.clone();
        let max_edge = edges
            .iter()
            .map(|&e| g.edge(e).w.clone())
            .fold(W::zero(), W::max_of);
        Some(FixedPath {
            endpoints: (u, v),
            dist,
            vertices,
            edges,
            max_edge,
        })
    }
}

/// The fixed path between `u` and `v`. The search always starts from the
/// smaller id so that `(u, v)` and `(v, u)` select the same edges.
pub fn fixed_shortest_path<W: Weight>(g: &Graph<W>, u: VertexId, v: VertexId) -> Result<FixedPath<W>> {
    g.check_vertex(u)?;
    g.check_vertex(v)?;
    if u == v {
        return Ok(FixedPath {
            endpoints: (u, v),
            dist: W::zero(),
            vertices: vec![u],
            edges: Vec::new(),
            max_edge: W::zero(),
        });
    }
    let tree = search(g, u.min(v), |_| true, Some(u.max(v)));
    FixedPath::from_tree(g, &tree, u, v).ok_or(Error::Disconnected { components: 2 })
}

/// Fixed paths for all unordered terminal pairs, keyed `(smaller, larger)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathTable<W> {
    pub pairs: BTreeMap<(VertexId, VertexId), FixedPath<W>>,
}

impl<W: Weight> PathTable<W> {
    pub fn get(&self, u: VertexId, v: VertexId) -> Option<&FixedPath<W>> {
        self.pairs.get(&(u.min(v), u.max(v)))
    }

    /// `W(u, v)` along the fixed path.
    pub fn max_edge(&self, u: VertexId, v: VertexId) -> Option<&W> {
        self.get(u, v).map(|p| &p.max_edge)
    }

    pub fn dist(&self, u: VertexId, v: VertexId) -> Option<&W> {
        self.get(u, v).map(|p| &p.dist)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Sorted, deduplicated copy of a terminal list.
pub fn normalize_terminals(s: &[VertexId]) -> Vec<VertexId> {
    let mut t = s.to_vec();
    t.sort_unstable();
    t.dedup();
    t
}

pub fn build_path_table<W: Weight>(g: &Graph<W>, s: &[VertexId]) -> Result<PathTable<W>> {
    let terms = normalize_terminals(s);
    if terms.is_empty() {
        return Err(Error::EmptyTerminals);
    }
    for &t in &terms {
        g.check_vertex(t)?;
    }
    let mut pairs = BTreeMap::new();
    for (i, &a) in terms.iter().enumerate() {
        if i + 1 == terms.len() {
            break;
        }
        let tree = search_all(g, a);
        for &b in &terms[i + 1..] {
            let path = FixedPath::from_tree(g, &tree, a, b).ok_or(Error::Disconnected { components: 2 })?;
            pairs.insert((a, b), path);
        }
    }
    Ok(PathTable { pairs })
}
