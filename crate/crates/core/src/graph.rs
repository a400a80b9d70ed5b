//! Undirected, positively weighted simple graphs.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::weight::Weight;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Edge<W> {
    pub u: VertexId,
    pub v: VertexId,
    pub w: W,
}

impl<W> Edge<W> {
    pub fn other(&self, x: VertexId) -> VertexId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }

    /// Endpoints with the smaller id first.
    pub fn key(&self) -> (VertexId, VertexId) {
        (self.u.min(self.v), self.u.max(self.v))
    }
}

/// Simple undirected graph on vertices `0..n`.
///
/// Construction rejects self-loops, parallel edges and nonpositive weights.
/// Connectivity is not required here (derived graphs may drop pendant
/// vertices); [`Graph::ensure_connected`] enforces it for input instances.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph<W> {
    n: usize,
    edges: Vec<Edge<W>>,
    adj: Vec<Vec<(VertexId, EdgeId)>>,
    index: BTreeMap<(VertexId, VertexId), EdgeId>,
}

impl<W: Weight> Graph<W> {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (VertexId, VertexId, W)>) -> Result<Self> {
        let mut g = Graph {
            n,
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
            index: BTreeMap::new(),
        };
        for (line, (u, v, w)) in edges.into_iter().enumerate() {
            g.push_edge(line + 1, u, v, w)?;
        }
        for list in &mut g.adj {
            list.sort_unstable();
        }
        Ok(g)
    }

    fn push_edge(&mut self, line: usize, u: VertexId, v: VertexId, w: W) -> Result<EdgeId> {
        for x in [u, v] {
            if x >= self.n {
                return Err(Error::InvalidVertex { vertex: x, n: self.n });
            }
        }
        if u == v {
            return Err(Error::SelfLoop { line, vertex: u });
        }
        if !w.is_positive() {
            return Err(Error::NonPositiveWeight {
                line,
                u,
                v,
                weight: w.to_string(),
            });
        }
        let key = (u.min(v), u.max(v));
        if self.index.contains_key(&key) {
            return Err(Error::DuplicateEdge { line, u, v });
        }
        let id = self.edges.len();
        self.edges.push(Edge { u, v, w });
        self.adj[u].push((v, id));
        self.adj[v].push((u, id));
        self.index.insert(key, id);
        Ok(id)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge<W>] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge<W> {
        &self.edges[id]
    }

    /// `(neighbor, edge id)` pairs sorted by neighbor id.
    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.adj[v]
    }

    pub fn find_edge(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        self.index.get(&(u.min(v), u.max(v))).copied()
    }

    pub fn total_weight(&self) -> W {
        W::sum_iter(self.edges.iter().map(|e| e.w.clone()))
    }

    pub fn max_edge_weight(&self) -> W {
        self.edges
            .iter()
            .map(|e| e.w.clone())
            .fold(W::zero(), W::max_of)
    }

    pub fn weight_of<'a>(&self, edges: impl IntoIterator<Item = &'a EdgeId>) -> W {
        W::sum_iter(edges.into_iter().map(|&e| self.edges[e].w.clone()))
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v < self.n {
            Ok(())
        } else {
            Err(Error::InvalidVertex { vertex: v, n: self.n })
        }
    }

    pub fn check_edges<'a>(&self, edges: impl IntoIterator<Item = &'a EdgeId>) -> Result<()> {
        match edges.into_iter().find(|&&e| e >= self.edges.len()) {
            Some(&e) => Err(Error::UnknownEdge(e)),
            None => Ok(()),
        }
    }

    /// Number of connected components (isolated vertices count).
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(x) = stack.pop() {
                for &(y, _) in &self.adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    pub fn ensure_connected(&self) -> Result<()> {
        match self.component_count() {
            0 | 1 => Ok(()),
            components => Err(Error::Disconnected { components }),
        }
    }

    /// Same topology with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: &W) -> Graph<W> {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.w = e.w.clone() * factor.clone();
        }
        g
    }

    /// Vertices touched by an edge subset.
    pub fn vertices_of<'a>(&self, edges: impl IntoIterator<Item = &'a EdgeId>) -> BTreeSet<VertexId> {
        let mut out = BTreeSet::new();
        for &e in edges {
            out.insert(self.edges[e].u);
            out.insert(self.edges[e].v);
        }
        out
    }

    /// Mask over edge ids for fast membership tests.
    pub fn mask<'a>(&self, edges: impl IntoIterator<Item = &'a EdgeId>) -> Vec<bool> {
        let mut m = vec![false; self.edges.len()];
        for &e in edges {
            m[e] = true;
        }
        m
    }

    pub fn full_mask(&self) -> Vec<bool> {
        vec![true; self.edges.len()]
    }
}

/// Parse the edge-list text format: one `u v w` per line, `#` comments,
/// blank lines ignored. The vertex count is one more than the largest id.
/// The result must be connected.
pub fn load_graph<W: Weight>(text: &str) -> Result<Graph<W>> {
    let mut raw = Vec::new();
    let mut max_id = None::<VertexId>;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "line {}: expected `u v w`, got {} fields",
                lineno + 1,
                fields.len()
            )));
        }
        let id = |s: &str| {
            s.parse::<VertexId>()
                .map_err(|_| Error::Parse(format!("line {}: invalid vertex id `{s}`", lineno + 1)))
        };
        let (u, v) = (id(fields[0])?, id(fields[1])?);
        let w = W::parse_decimal(fields[2])
            .map_err(|_| Error::Parse(format!("line {}: invalid weight `{}`", lineno + 1, fields[2])))?;
        max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
        raw.push((lineno + 1, u, v, w));
    }
    let n = max_id.map_or(0, |m| m + 1);
    let mut g = Graph {
        n,
        edges: Vec::new(),
        adj: vec![Vec::new(); n],
        index: BTreeMap::new(),
    };
    for (line, u, v, w) in raw {
        g.push_edge(line, u, v, w)?;
    }
    for list in &mut g.adj {
        list.sort_unstable();
    }
    g.ensure_connected()?;
    Ok(g)
}
