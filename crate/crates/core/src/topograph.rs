//! The map as a graph: one node per cluster, edges between nearby
//! centroids. The complete centroid graph is pruned to the edges no longer
//! than the longest edge of its minimum spanning tree, which keeps the tree
//! (so the graph stays connected) plus the short cross links.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub size: usize,
    pub kill_strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Always `a < b`.
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoGraph {
    pub nodes: Vec<Node>,
    /// Sorted by `(a, b)`.
    pub edges: Vec<Edge>,
    /// The spanning tree the pruning was based on, in Kruskal order.
    pub mst: Vec<Edge>,
    pub pruned: bool,
}

impl TopoGraph {
    pub fn max_mst_weight(&self) -> Option<f64> {
        self.mst.iter().map(|e| e.weight).reduce(f64::max)
    }
}

/// Builds the pruned graph of a fitted clustering. Node sizes count the
/// rows the model was fitted on; `strengths` (cluster, ρ_a) pairs fill in
/// kill strengths, which default to 0.
pub fn build_topograph(model: &ClusterModel, strengths: &[(usize, f64)]) -> Result<TopoGraph> {
    build_from_centroids(&model.centroids, &model.sizes(), strengths)
}

pub fn build_from_centroids(
    centroids: &Array2<f64>,
    sizes: &[usize],
    strengths: &[(usize, f64)],
) -> Result<TopoGraph> {
    let k = centroids.nrows();
    if k == 0 {
        return Err(Error::InvalidInput("a map needs at least one cluster".into()));
    }
    if sizes.len() != k {
        return Err(Error::RowCountMismatch {
            what: "cluster sizes".into(),
            expected: k,
            found: sizes.len(),
        });
    }
    let mut kill = vec![0.0; k];
    for &(c, s) in strengths {
        if c >= k || !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidInput(format!(
                "kill strength {s} for cluster {c} out of range"
            )));
        }
        kill[c] = s;
    }
    let nodes = (0..k)
        .map(|id| Node {
            id,
            size: sizes[id],
            kill_strength: kill[id],
        })
        .collect();

    let mut all = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let weight = centroids
                .row(a)
                .iter()
                .zip(centroids.row(b))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            all.push(Edge { a, b, weight });
        }
    }
    let mst = kruskal(k, &all);
    let edges = match mst.iter().map(|e| e.weight).reduce(f64::max) {
        Some(max) => all.into_iter().filter(|e| e.weight <= max).collect(),
        None => Vec::new(),
    };
    Ok(TopoGraph {
        nodes,
        edges,
        mst,
        pruned: true,
    })
}

/// Kruskal's algorithm; equal weights are taken in `(a, b)` order.
fn kruskal(k: usize, edges: &[Edge]) -> Vec<Edge> {
    let mut order: Vec<&Edge> = edges.iter().collect();
    order.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    let mut parent: Vec<usize> = (0..k).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut tree = Vec::with_capacity(k.saturating_sub(1));
    for e in order {
        let (ra, rb) = (root(&mut parent, e.a), root(&mut parent, e.b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
            tree.push(*e);
            if tree.len() + 1 == k {
                break;
            }
        }
    }
    tree
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Gexf,
    Dot,
}

impl std::str::FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gexf" => Ok(GraphFormat::Gexf),
            "dot" => Ok(GraphFormat::Dot),
            other => Err(Error::InvalidInput(format!("unknown graph format {other:?}"))),
        }
    }
}

pub fn to_gexf(g: &TopoGraph) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<gexf xmlns=\"http://gexf.net/1.3\" version=\"1.3\">\n");
    s.push_str("  <graph mode=\"static\" defaultedgetype=\"undirected\">\n");
    s.push_str("    <attributes class=\"node\">\n");
    s.push_str("      <attribute id=\"size\" title=\"size\" type=\"integer\"/>\n");
    s.push_str("      <attribute id=\"kill_strength\" title=\"kill_strength\" type=\"double\"/>\n");
    s.push_str("    </attributes>\n");
    s.push_str("    <nodes>\n");
    for n in &g.nodes {
        let _ = writeln!(
            s,
            "      <node id=\"{id}\" label=\"{id}\"><attvalues>\
             <attvalue for=\"size\" value=\"{}\"/>\
             <attvalue for=\"kill_strength\" value=\"{:?}\"/>\
             </attvalues></node>",
            n.size,
            n.kill_strength,
            id = n.id
        );
    }
    s.push_str("    </nodes>\n");
    s.push_str("    <edges>\n");
    for (i, e) in g.edges.iter().enumerate() {
        let _ = writeln!(
            s,
            "      <edge id=\"{i}\" source=\"{}\" target=\"{}\" weight=\"{:?}\"/>",
            e.a, e.b, e.weight
        );
    }
    s.push_str("    </edges>\n");
    s.push_str("  </graph>\n");
    s.push_str("</gexf>\n");
    s
}

pub fn to_dot(g: &TopoGraph) -> String {
    let mut s = String::from("graph topomap {\n");
    for n in &g.nodes {
        let _ = writeln!(
            s,
            "  {} [size={}, kill_strength={:?}];",
            n.id, n.size, n.kill_strength
        );
    }
    for e in &g.edges {
        let _ = writeln!(s, "  {} -- {} [weight={:?}];", e.a, e.b, e.weight);
    }
    s.push_str("}\n");
    s
}

pub fn export_graph(g: &TopoGraph, format: GraphFormat, path: &Path) -> Result<()> {
    let text = match format {
        GraphFormat::Gexf => to_gexf(g),
        GraphFormat::Dot => to_dot(g),
    };
    io::write_atomic(path, text.as_bytes())
}
