//! JSON instance documents:
//! `{"n": 4, "edges": [[0,1,2.5], ...], "terminals": [0,3], "levels": {"0": 2, "3": 1}}`.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::weight::Weight;

#[derive(Clone, Debug, PartialEq)]
pub struct Instance<W> {
    pub graph: Graph<W>,
    pub terminals: Vec<VertexId>,
    /// Vertex -> level (>= 1). Absent vertices are non-terminals.
    pub levels: Option<BTreeMap<VertexId, usize>>,
}

fn field<'a>(doc: &'a Value, name: &str) -> Result<&'a Value> {
    doc.get(name)
        .ok_or_else(|| Error::Parse(format!("missing field `{name}`")))
}

fn as_id(v: &Value, what: &str) -> Result<VertexId> {
    v.as_u64()
        .map(|x| x as VertexId)
        .ok_or_else(|| Error::Parse(format!("{what}: expected a nonnegative integer, got {v}")))
}

impl<W: Weight> Instance<W> {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(&doc)
    }

    pub fn from_json(doc: &Value) -> Result<Self> {
        let n = as_id(field(doc, "n")?, "n")?;
        let raw_edges = field(doc, "edges")?
            .as_array()
            .ok_or_else(|| Error::Parse("`edges` must be an array".into()))?;
        let mut edges = Vec::with_capacity(raw_edges.len());
        for (i, e) in raw_edges.iter().enumerate() {
            let triple = e
                .as_array()
                .filter(|a| a.len() == 3)
                .ok_or_else(|| Error::Parse(format!("edge {i}: expected [u, v, w]")))?;
            let u = as_id(&triple[0], "edge endpoint")?;
            let v = as_id(&triple[1], "edge endpoint")?;
            // keep the literal so exact mode sees the decimal as written
            let w = match &triple[2] {
                Value::Number(num) => W::parse_decimal(&num.to_string())?,
                Value::String(s) => W::parse_decimal(s)?,
                other => return Err(Error::Parse(format!("edge {i}: invalid weight {other}"))),
            };
            edges.push((u, v, w));
        }
        let graph = Graph::new(n, edges)?;
        graph.ensure_connected()?;
        let terminals = match doc.get("terminals") {
            Some(Value::Array(ts)) => ts
                .iter()
                .map(|t| as_id(t, "terminal"))
                .collect::<Result<Vec<_>>>()?,
            Some(_) => return Err(Error::Parse("`terminals` must be an array".into())),
            None => Vec::new(),
        };
        for &t in &terminals {
            graph.check_vertex(t)?;
        }
        let levels = match doc.get("levels") {
            None | Some(Value::Null) => None,
            Some(Value::Object(map)) => {
                let mut out = BTreeMap::new();
                for (k, v) in map {
                    let vertex: VertexId = k
                        .parse()
                        .map_err(|_| Error::Parse(format!("levels: invalid vertex key `{k}`")))?;
                    graph.check_vertex(vertex)?;
                    let level = as_id(v, "level")?;
                    if level > 0 {
                        out.insert(vertex, level);
                    }
                }
                Some(out)
            }
            Some(_) => return Err(Error::Parse("`levels` must be an object".into())),
        };
        Ok(Instance {
            graph,
            terminals,
            levels,
        })
    }

    pub fn to_json(&self) -> Value {
        let edges: Vec<Value> = self
            .graph
            .edges()
            .iter()
            .map(|e| json!([e.u, e.v, e.w.to_f64()]))
            .collect();
        let mut doc = json!({
            "n": self.graph.n(),
            "edges": edges,
            "terminals": self.terminals,
        });
        if let Some(levels) = &self.levels {
            let map: serde_json::Map<String, Value> =
                levels.iter().map(|(v, l)| (v.to_string(), json!(l))).collect();
            doc["levels"] = Value::Object(map);
        }
        doc
    }

    /// Edge-list text (`u v w` per line).
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in self.graph.edges() {
            out.push_str(&format!("{} {} {}\n", e.u, e.v, e.w));
        }
        out
    }
}
