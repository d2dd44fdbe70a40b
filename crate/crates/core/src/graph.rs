//! Weekly transaction graphs: the weighted digraph, its undirected projection,
//! and the top-fraction edge filter used before the motif census.
//!
//! Wallet identifiers are interned to dense integer ids, assigned in sorted
//! name order so the numbering does not depend on record order. The name map
//! is kept on the graph and can be persisted next to edge-list dumps.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use crate::error::Result;
use crate::ingest::{TransactionRecord, WeekWindow};
use crate::quantile::top_fraction_threshold;

/// Weighted digraph over interned vertex ids. At most one arc per ordered pair;
/// parallel transfers aggregate by summing amounts.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    /// Interned id -> wallet name, sorted ascending by name.
    pub names: Vec<String>,
    /// (src, dst, weight), sorted by (src, dst); weights > 0.
    pub arcs: Vec<(u32, u32, f64)>,
}

/// Undirected projection: one edge per unordered pair, weight = sum of both
/// arc directions.
#[derive(Debug, Clone, PartialEq)]
pub struct UndirectedGraph {
    pub names: Vec<String>,
    /// (u, v, weight) with u < v, sorted.
    pub edges: Vec<(u32, u32, f64)>,
}

impl DirectedGraph {
    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn arc_weight(&self, src: u32, dst: u32) -> Option<f64> {
        self.arcs
            .binary_search_by_key(&(src, dst), |a| (a.0, a.1))
            .ok()
            .map(|i| self.arcs[i].2)
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| i as u32)
    }

    /// Arc weights keyed by wallet names, for order-insensitive comparisons.
    pub fn arcs_by_name(&self) -> BTreeMap<(String, String), f64> {
        self.arcs
            .iter()
            .map(|&(u, v, w)| {
                (
                    (self.names[u as usize].clone(), self.names[v as usize].clone()),
                    w,
                )
            })
            .collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.arcs.iter().map(|a| a.2).sum()
    }
}

impl UndirectedGraph {
    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    /// Edge weights as a plain multiset (the default decile source).
    pub fn weight_multiset(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.2).collect()
    }
}

/// Builds the weekly digraph: vertices are wallets that sent or received at
/// least one transaction, arc weights sum all same-direction transfers.
pub fn build_digraph(window: &WeekWindow) -> DirectedGraph {
    build_digraph_from_records(&window.records)
}

pub fn build_digraph_from_records(records: &[TransactionRecord]) -> DirectedGraph {
    let mut names: Vec<&str> = Vec::with_capacity(records.len() * 2);
    for r in records {
        names.push(r.sender.as_str());
        names.push(r.receiver.as_str());
    }
    names.sort_unstable();
    names.dedup();
    let index: HashMap<&str, u32> = names
        .iter()
        .enumerate()
        .map(|(i, &n)| (n, i as u32))
        .collect();

    let mut weights: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for r in records {
        let u = index[r.sender.as_str()];
        let v = index[r.receiver.as_str()];
        *weights.entry((u, v)).or_insert(0.0) += r.amount;
    }

    DirectedGraph {
        names: names.into_iter().map(String::from).collect(),
        arcs: weights.into_iter().map(|((u, v), w)| (u, v, w)).collect(),
    }
}

/// Undirected projection with `W(u,v) + W(v,u)` edge weights; a missing
/// direction contributes 0.
pub fn to_undirected(graph: &DirectedGraph) -> UndirectedGraph {
    let mut weights: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for &(u, v, w) in &graph.arcs {
        let key = if u < v { (u, v) } else { (v, u) };
        *weights.entry(key).or_insert(0.0) += w;
    }
    UndirectedGraph {
        names: graph.names.clone(),
        edges: weights.into_iter().map(|((u, v), w)| (u, v, w)).collect(),
    }
}

/// Keeps arcs in the top `q` fraction by aggregated weight (ties at the
/// threshold retained) and restricts vertices to retained-arc endpoints.
pub fn filter_top_edges(graph: &DirectedGraph, q: f64) -> DirectedGraph {
    assert!(q > 0.0 && q <= 1.0, "fraction must be in (0, 1]");
    if graph.arcs.is_empty() {
        return DirectedGraph {
            names: Vec::new(),
            arcs: Vec::new(),
        };
    }
    let weights: Vec<f64> = graph.arcs.iter().map(|a| a.2).collect();
    let threshold = top_fraction_threshold(&weights, q);
    let keep: Vec<(u32, u32, f64)> = graph
        .arcs
        .iter()
        .filter(|a| a.2 >= threshold)
        .copied()
        .collect();
    reintern(graph, keep)
}

/// Paper-literal variant: the threshold comes from raw per-transaction amounts
/// and an arc survives if any single constituent transfer reaches it.
pub fn filter_top_edges_raw(graph: &DirectedGraph, window: &WeekWindow, q: f64) -> DirectedGraph {
    assert!(q > 0.0 && q <= 1.0, "fraction must be in (0, 1]");
    if window.records.is_empty() || graph.arcs.is_empty() {
        return DirectedGraph {
            names: Vec::new(),
            arcs: Vec::new(),
        };
    }
    let amounts: Vec<f64> = window.records.iter().map(|r| r.amount).collect();
    let threshold = top_fraction_threshold(&amounts, q);
    let mut max_single: HashMap<(u32, u32), f64> = HashMap::new();
    for r in &window.records {
        let (Some(u), Some(v)) = (graph.id_of(&r.sender), graph.id_of(&r.receiver)) else {
            continue;
        };
        let entry = max_single.entry((u, v)).or_insert(0.0);
        if r.amount > *entry {
            *entry = r.amount;
        }
    }
    let keep: Vec<(u32, u32, f64)> = graph
        .arcs
        .iter()
        .filter(|&&(u, v, _)| max_single.get(&(u, v)).is_some_and(|&m| m >= threshold))
        .copied()
        .collect();
    reintern(graph, keep)
}

fn reintern(graph: &DirectedGraph, kept: Vec<(u32, u32, f64)>) -> DirectedGraph {
    let mut used: Vec<u32> = kept.iter().flat_map(|&(u, v, _)| [u, v]).collect();
    used.sort_unstable();
    used.dedup();
    let remap: HashMap<u32, u32> = used
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new as u32))
        .collect();
    let names = used
        .iter()
        .map(|&old| graph.names[old as usize].clone())
        .collect();
    let mut arcs: Vec<(u32, u32, f64)> = kept
        .into_iter()
        .map(|(u, v, w)| (remap[&u], remap[&v], w))
        .collect();
    arcs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    DirectedGraph { names, arcs }
}

/// Writes the `u v w` edge list (interned ids) used for oracle cross-checks.
pub fn write_edge_list<W: Write>(graph: &DirectedGraph, mut writer: W) -> Result<()> {
    for &(u, v, w) in &graph.arcs {
        writeln!(writer, "{u} {v} {w}")?;
    }
    Ok(())
}

/// Writes the id -> wallet-name map accompanying an edge-list dump.
pub fn write_id_map<W: Write>(graph: &DirectedGraph, mut writer: W) -> Result<()> {
    for (id, name) in graph.names.iter().enumerate() {
        writeln!(writer, "{id} {name}")?;
    }
    Ok(())
}
