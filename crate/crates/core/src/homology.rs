//! Decile sublevel filtration of the weekly undirected graph and Betti numbers
//! of its flag complex, truncated at dimension 2.
//!
//! The filtration admits edges with weight at most epsilon; a vertex appears
//! only once an incident edge qualifies, so the empty level has no vertices.
//! Betti numbers are ranks over the two-element field: `b0` from union-find
//! component counts, `b1` from `|E| - rank d1 - rank d2` with the triangle
//! boundary rank computed by sparse GF(2) reduction.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::sparse_rank;
use crate::graph::UndirectedGraph;
use crate::quantile::nearest_rank_smallest;
use crate::unionfind::UnionFind;

/// The decile grid used throughout: k = 10, 20, ..., 100.
pub const DECILE_LEVELS: [u32; 10] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

/// One filtration scale: decile index k and its threshold value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiltrationScale {
    pub k: u32,
    pub epsilon: f64,
}

/// Sublevel subgraph at a single scale. Vertices carry the parent graph's ids.
#[derive(Debug, Clone)]
pub struct ThresholdSubgraph {
    pub epsilon: f64,
    /// Vertices incident to at least one qualifying edge, sorted.
    pub vertices: Vec<u32>,
    /// Qualifying edges (u, v) with u < v, sorted.
    pub edges: Vec<(u32, u32)>,
}

/// Betti numbers across the ten decile scales for one week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettiSequence {
    pub p: u8,
    pub week: usize,
    pub values: Vec<u32>,
}

/// Which weight multiset the decile thresholds are computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecileMode {
    /// Aggregated undirected edge weights; guarantees the top scale admits
    /// every edge.
    #[default]
    Undirected,
    /// Raw per-transaction amounts.
    Raw,
}

/// Nearest-rank deciles of a weight multiset. Errors on an empty multiset
/// (a degenerate week).
pub fn compute_thresholds(weights: &[f64], week: usize) -> Result<Vec<FiltrationScale>> {
    if weights.is_empty() {
        return Err(Error::DegenerateWeek {
            week,
            reason: "empty weight multiset for decile thresholds".into(),
        });
    }
    let mut sorted = weights.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(DECILE_LEVELS
        .iter()
        .map(|&k| FiltrationScale {
            k,
            epsilon: nearest_rank_smallest(&sorted, k as f64 / 100.0),
        })
        .collect())
}

/// Edges with weight <= epsilon and their endpoints.
pub fn threshold_subgraph(graph: &UndirectedGraph, epsilon: f64) -> ThresholdSubgraph {
    let edges: Vec<(u32, u32)> = graph
        .edges
        .iter()
        .filter(|e| e.2 <= epsilon)
        .map(|e| (e.0, e.1))
        .collect();
    let mut vertices: Vec<u32> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    vertices.sort_unstable();
    vertices.dedup();
    ThresholdSubgraph {
        epsilon,
        vertices,
        edges,
    }
}

/// Number of connected components (rank of H0 of the flag complex).
pub fn betti0(subgraph: &ThresholdSubgraph) -> u32 {
    if subgraph.vertices.is_empty() {
        return 0;
    }
    let local = local_ids(&subgraph.vertices);
    let mut uf = UnionFind::new(subgraph.vertices.len());
    for &(u, v) in &subgraph.edges {
        uf.union(local[&u], local[&v]);
    }
    uf.component_count() as u32
}

/// Rank of H1 of the flag complex with simplices up to triangles.
pub fn betti1(subgraph: &ThresholdSubgraph) -> u32 {
    betti1_detail(subgraph).betti1
}

/// Intermediate ranks exposed for consistency checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Betti1Detail {
    pub betti0: u32,
    pub betti1: u32,
    pub edge_count: usize,
    pub triangle_count: usize,
    pub rank_d2: usize,
}

pub fn betti1_detail(subgraph: &ThresholdSubgraph) -> Betti1Detail {
    let b0 = betti0(subgraph);
    let n_vertices = subgraph.vertices.len();
    let n_edges = subgraph.edges.len();
    // rank d1 = |V| - b0; cycle space dimension = |E| - rank d1.
    let rank_d1 = n_vertices as i64 - b0 as i64;
    let cycles = n_edges as i64 - rank_d1;

    let triangles = enumerate_triangles(subgraph);
    let edge_index: HashMap<(u32, u32), usize> = subgraph
        .edges
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i))
        .collect();
    let columns: Vec<Vec<usize>> = triangles
        .iter()
        .map(|&(a, b, c)| {
            vec![
                edge_index[&(a, b)],
                edge_index[&(a, c)],
                edge_index[&(b, c)],
            ]
        })
        .collect();
    let rank_d2 = sparse_rank(&columns);

    Betti1Detail {
        betti0: b0,
        betti1: (cycles - rank_d2 as i64).max(0) as u32,
        edge_count: n_edges,
        triangle_count: triangles.len(),
        rank_d2,
    }
}

/// 3-cliques (a, b, c) with a < b < c, each listed once, found by intersecting
/// sorted adjacency lists along every edge.
fn enumerate_triangles(subgraph: &ThresholdSubgraph) -> Vec<(u32, u32, u32)> {
    let local = local_ids(&subgraph.vertices);
    let n = subgraph.vertices.len();
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(u, v) in &subgraph.edges {
        let (lu, lv) = (local[&u], local[&v]);
        adjacency[lu as usize].push(v);
        adjacency[lv as usize].push(u);
    }
    for list in adjacency.iter_mut() {
        list.sort_unstable();
    }

    let mut triangles = Vec::new();
    for &(u, v) in &subgraph.edges {
        debug_assert!(u < v);
        let a = &adjacency[local[&u] as usize];
        let b = &adjacency[local[&v] as usize];
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    // Common neighbor above v counts the triangle exactly once.
                    if a[i] > v {
                        triangles.push((u, v, a[i]));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    triangles
}

fn local_ids(vertices: &[u32]) -> HashMap<u32, u32> {
    vertices
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i as u32))
        .collect()
}

/// Betti numbers of dimension `p` at every decile scale, ascending in k.
pub fn betti_sequence(
    graph: &UndirectedGraph,
    scales: &[FiltrationScale],
    p: u8,
    week: usize,
) -> Result<BettiSequence> {
    if p > 1 {
        return Err(Error::InvalidArgument(format!(
            "homology dimension {p} not supported (p in {{0, 1}})"
        )));
    }
    if scales.len() != DECILE_LEVELS.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} scales, got {}",
            DECILE_LEVELS.len(),
            scales.len()
        )));
    }
    let values = scales
        .iter()
        .map(|scale| {
            let sub = threshold_subgraph(graph, scale.epsilon);
            if p == 0 {
                betti0(&sub)
            } else {
                betti1(&sub)
            }
        })
        .collect();
    Ok(BettiSequence { p, week, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(u32, u32, f64)]) -> UndirectedGraph {
        let max = edges.iter().map(|e| e.0.max(e.1)).max().unwrap_or(0);
        UndirectedGraph {
            names: (0..=max).map(|i| format!("v{i}")).collect(),
            edges: edges.to_vec(),
        }
    }

    #[test]
    fn deciles_of_ten_distinct_values() {
        let weights: Vec<f64> = (1..=10).map(f64::from).collect();
        let scales = compute_thresholds(&weights, 0).unwrap();
        for (i, scale) in scales.iter().enumerate() {
            assert_eq!(scale.k, 10 * (i as u32 + 1));
            assert_eq!(scale.epsilon, (i + 1) as f64);
        }
    }

    #[test]
    fn deciles_of_constant_multiset_are_constant() {
        let scales = compute_thresholds(&[5.0; 7], 0).unwrap();
        assert!(scales.iter().all(|s| s.epsilon == 5.0));
    }

    #[test]
    fn deciles_of_two_values_split_at_the_middle() {
        let scales = compute_thresholds(&[1.0, 100.0], 0).unwrap();
        for scale in &scales {
            let expected = if scale.k <= 50 { 1.0 } else { 100.0 };
            assert_eq!(scale.epsilon, expected, "at k={}", scale.k);
        }
    }

    #[test]
    fn empty_multiset_is_a_degenerate_week() {
        assert!(matches!(
            compute_thresholds(&[], 3),
            Err(Error::DegenerateWeek { week: 3, .. })
        ));
    }

    #[test]
    fn threshold_subgraph_filters_edges_and_isolated_vertices() {
        let g = graph(&[(0, 1, 1.0), (1, 2, 5.0)]);
        let sub = threshold_subgraph(&g, 2.0);
        assert_eq!(sub.edges, vec![(0, 1)]);
        assert_eq!(sub.vertices, vec![0, 1]);

        let empty = threshold_subgraph(&g, 0.5);
        assert!(empty.edges.is_empty());
        assert!(empty.vertices.is_empty());

        let full = threshold_subgraph(&g, 5.0);
        assert_eq!(full.edges.len(), 2);
        assert_eq!(full.vertices, vec![0, 1, 2]);
    }

    #[test]
    fn betti0_counts_components() {
        let two = threshold_subgraph(&graph(&[(0, 1, 1.0), (2, 3, 1.0)]), 2.0);
        assert_eq!(betti0(&two), 2);
        let path = threshold_subgraph(&graph(&[(0, 1, 1.0), (1, 2, 1.0)]), 2.0);
        assert_eq!(betti0(&path), 1);
        let empty = threshold_subgraph(&graph(&[(0, 1, 1.0)]), 0.1);
        assert_eq!(betti0(&empty), 0);
    }

    #[test]
    fn betti1_of_a_square_is_one() {
        let g = graph(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)]);
        assert_eq!(betti1(&threshold_subgraph(&g, 1.0)), 1);
    }

    #[test]
    fn betti1_of_a_filled_triangle_is_zero() {
        let g = graph(&[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let detail = betti1_detail(&threshold_subgraph(&g, 1.0));
        assert_eq!(detail.betti1, 0);
        assert_eq!(detail.triangle_count, 1);
        assert_eq!(detail.rank_d2, 1);
    }

    #[test]
    fn betti1_of_a_theta_graph_is_two() {
        // u = 0, v = 1, three internally disjoint 2-edge paths through 2, 3, 4.
        let g = graph(&[
            (0, 2, 1.0),
            (1, 2, 1.0),
            (0, 3, 1.0),
            (1, 3, 1.0),
            (0, 4, 1.0),
            (1, 4, 1.0),
        ]);
        assert_eq!(betti1(&threshold_subgraph(&g, 1.0)), 2);
    }

    #[test]
    fn euler_identity_holds_per_level() {
        let g = graph(&[
            (0, 1, 1.0),
            (1, 2, 2.0),
            (0, 2, 3.0),
            (2, 3, 4.0),
            (3, 4, 5.0),
            (2, 4, 6.0),
        ]);
        for eps in [0.5, 1.0, 2.0, 3.0, 4.5, 6.0] {
            let sub = threshold_subgraph(&g, eps);
            let d = betti1_detail(&sub);
            let b2_prime = d.triangle_count as i64 - d.rank_d2 as i64;
            let euler = sub.vertices.len() as i64 - d.edge_count as i64 + d.triangle_count as i64;
            assert_eq!(
                euler,
                d.betti0 as i64 - d.betti1 as i64 + b2_prime,
                "at eps={eps}"
            );
        }
    }

    #[test]
    fn sequence_of_single_edge_is_all_ones() {
        let g = graph(&[(0, 1, 1.0)]);
        let scales = compute_thresholds(&g.weight_multiset(), 0).unwrap();
        let seq = betti_sequence(&g, &scales, 0, 0).unwrap();
        assert_eq!(seq.values, vec![1; 10]);
    }

    #[test]
    fn components_merge_when_the_bridge_enters() {
        // Two 3-vertex paths joined by a bridge at the 5th decile; heavier
        // chords keep the weight multiset at ten distinct values without
        // introducing vertices after the merge.
        let g = graph(&[
            (0, 1, 1.0),
            (1, 2, 2.0),
            (3, 4, 3.0),
            (4, 5, 4.0),
            (2, 3, 5.0), // bridge
            (0, 2, 6.0),
            (3, 5, 7.0),
            (0, 3, 8.0),
            (1, 4, 9.0),
            (2, 5, 10.0),
        ]);
        let scales = compute_thresholds(&g.weight_multiset(), 0).unwrap();
        let seq = betti_sequence(&g, &scales, 0, 0).unwrap();
        assert_eq!(seq.values, vec![1, 1, 2, 2, 1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn chord_kills_the_square_loop_at_the_sixth_decile() {
        // Square enters at the first decile, its chord at the sixth; the two
        // flag triangles fill the loop. Path fillers pad the multiset.
        let g = graph(&[
            (0, 1, 1.0),
            (1, 2, 1.0),
            (2, 3, 1.0),
            (0, 3, 1.0),
            (0, 2, 5.0), // chord
            (4, 5, 3.0),
            (5, 6, 7.0),
            (6, 7, 8.0),
            (7, 8, 9.0),
            (8, 9, 10.0),
        ]);
        let scales = compute_thresholds(&g.weight_multiset(), 0).unwrap();
        let seq = betti_sequence(&g, &scales, 1, 0).unwrap();
        assert_eq!(seq.values, vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn rejects_higher_dimensions() {
        let g = graph(&[(0, 1, 1.0)]);
        let scales = compute_thresholds(&g.weight_multiset(), 0).unwrap();
        assert!(betti_sequence(&g, &scales, 2, 0).is_err());
    }

    #[test]
    fn filtration_levels_are_nested() {
        let g = graph(&[
            (0, 1, 3.0),
            (1, 2, 1.0),
            (2, 3, 7.0),
            (0, 3, 2.0),
            (1, 3, 9.0),
        ]);
        let scales = compute_thresholds(&g.weight_multiset(), 0).unwrap();
        let mut prev = threshold_subgraph(&g, scales[0].epsilon);
        for scale in &scales[1..] {
            let next = threshold_subgraph(&g, scale.epsilon);
            assert!(prev.edges.iter().all(|e| next.edges.contains(e)));
            assert!(prev.vertices.iter().all(|v| next.vertices.contains(v)));
            prev = next;
        }
        // The top scale admits every edge under the default multiset.
        assert_eq!(prev.edges.len(), g.edges.len());
    }

    #[test]
    fn top_scale_betti0_counts_full_graph_components() {
        // Two components with assorted weights.
        let g = graph(&[
            (0, 1, 4.0),
            (1, 2, 11.0),
            (0, 2, 0.5),
            (3, 4, 7.0),
            (4, 5, 2.5),
        ]);
        let scales = compute_thresholds(&g.weight_multiset(), 0).unwrap();
        let top = threshold_subgraph(&g, scales[9].epsilon);
        let everything = threshold_subgraph(&g, f64::INFINITY);
        assert_eq!(betti0(&top), betti0(&everything));
        assert_eq!(betti0(&top), 2);
    }
}
