//! Census of the three directed 3-node motifs on the top-fraction-filtered
//! weekly digraph, and weekly count increments.
//!
//! Motif 1: two mutual dyads sharing a center, outer pair non-adjacent.
//! Motif 2: one mutual dyad plus a directed 2-edge path closing from one dyad
//! endpoint to the other through the third vertex.
//! Motif 3: the complete bidirectional triangle.
//!
//! Counting is induced over unordered triples, so the classes are disjoint.
//! Triples are classified through a precomputed table over the 64 possible
//! 3-node arc patterns, canonicalized under vertex permutation. Rather than
//! scanning all triples, the census enumerates undirected triangles by
//! adjacency intersection and gets motif 1 from per-center mutual-degree
//! counts with a per-triangle correction for adjacent outer pairs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

pub const MOTIF_IDS: [u8; 3] = [1, 2, 3];

/// Induced motif counts for one week (computed on the filtered digraph).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifCensus {
    pub week: usize,
    /// counts[i] is the count of motif i+1.
    pub counts: [u64; 3],
}

/// Week-over-week count differences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifIncrement {
    pub week: usize,
    pub deltas: [i64; 3],
}

/// Whether a triple must match a motif exactly (induced) or merely contain
/// its arcs (partial).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    #[default]
    Induced,
    Partial,
}

// Arc-pattern codes over vertices (0, 1, 2); bit b set means the ordered pair
// PAIR_BITS[b] is an arc.
const PAIR_BITS: [(usize, usize); 6] = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)];

fn motif_reference_code(motif: u8) -> u8 {
    // Vertex 1 is the motif-1 center and the motif-2 dyad endpoint that feeds
    // the path; codes follow PAIR_BITS order.
    let arcs: &[(usize, usize)] = match motif {
        1 => &[(0, 1), (1, 0), (1, 2), (2, 1)],
        2 => &[(0, 1), (1, 0), (1, 2), (2, 0)],
        3 => &[(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)],
        _ => unreachable!(),
    };
    let mut code = 0u8;
    for arc in arcs {
        let bit = PAIR_BITS.iter().position(|p| p == arc).unwrap();
        code |= 1 << bit;
    }
    code
}

fn permute_code(code: u8, perm: &[usize; 3]) -> u8 {
    let mut out = 0u8;
    for (bit, &(u, v)) in PAIR_BITS.iter().enumerate() {
        if code & (1 << bit) != 0 {
            let mapped = (perm[u], perm[v]);
            let new_bit = PAIR_BITS.iter().position(|p| *p == mapped).unwrap();
            out |= 1 << new_bit;
        }
    }
    out
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// class_of[code] = motif id (1..=3) or 0, for induced matching.
fn build_induced_table() -> [u8; 64] {
    let mut table = [0u8; 64];
    for motif in MOTIF_IDS {
        let reference = motif_reference_code(motif);
        for perm in &PERMUTATIONS {
            table[permute_code(reference, perm) as usize] = motif;
        }
    }
    table
}

/// contains[motif-1][code] = true when some relabeling of the motif's arcs is
/// a subset of `code`, for partial matching.
fn build_partial_table() -> [[bool; 64]; 3] {
    let mut table = [[false; 64]; 3];
    for motif in MOTIF_IDS {
        let mut variants = HashSet::new();
        let reference = motif_reference_code(motif);
        for perm in &PERMUTATIONS {
            variants.insert(permute_code(reference, perm));
        }
        for code in 0u8..64 {
            table[(motif - 1) as usize][code as usize] =
                variants.iter().any(|&v| code & v == v);
        }
    }
    table
}

struct Adjacency {
    /// Undirected neighbor lists, sorted.
    und: Vec<Vec<u32>>,
    /// Mutual (bidirectional) neighbor lists, sorted.
    mutual: Vec<Vec<u32>>,
    arcs: HashSet<(u32, u32)>,
}

fn adjacency(graph: &DirectedGraph) -> Adjacency {
    let n = graph.vertex_count();
    let mut und: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut mutual: Vec<Vec<u32>> = vec![Vec::new(); n];
    let arcs: HashSet<(u32, u32)> = graph.arcs.iter().map(|&(u, v, _)| (u, v)).collect();
    let mut seen_pairs = HashSet::new();
    for &(u, v, _) in &graph.arcs {
        let key = (u.min(v), u.max(v));
        if seen_pairs.insert(key) {
            und[u as usize].push(v);
            und[v as usize].push(u);
            if arcs.contains(&(v, u)) {
                mutual[u as usize].push(v);
                mutual[v as usize].push(u);
            }
        }
    }
    for list in und.iter_mut().chain(mutual.iter_mut()) {
        list.sort_unstable();
    }
    Adjacency { und, mutual, arcs }
}

fn triple_code(arcs: &HashSet<(u32, u32)>, triple: [u32; 3]) -> u8 {
    let mut code = 0u8;
    for (bit, &(u, v)) in PAIR_BITS.iter().enumerate() {
        if arcs.contains(&(triple[u], triple[v])) {
            code |= 1 << bit;
        }
    }
    code
}

/// Counts induced (default) or partial occurrences of the three motifs among
/// unordered vertex triples. Graphs with fewer than 3 vertices yield zeros.
pub fn census_triads(graph: &DirectedGraph, mode: MatchMode) -> MotifCensus {
    census_triads_for_week(graph, mode, 0)
}

pub fn census_triads_for_week(graph: &DirectedGraph, mode: MatchMode, week: usize) -> MotifCensus {
    let mut counts = [0u64; 3];
    if graph.vertex_count() >= 3 {
        let adj = adjacency(graph);

        // Motif 1 without triangle enumeration: unordered pairs of mutual
        // neighbors around each center...
        for lists in &adj.mutual {
            let d = lists.len() as u64;
            counts[0] += d * d.saturating_sub(1) / 2;
        }

        // ...then walk undirected triangles once for the adjacent-pair
        // corrections and the all-pairs-adjacent motif classes.
        let induced = build_induced_table();
        let partial = build_partial_table();
        for u in 0..adj.und.len() as u32 {
            for &v in &adj.und[u as usize] {
                if v <= u {
                    continue;
                }
                let a = &adj.und[u as usize];
                let b = &adj.und[v as usize];
                let (mut i, mut j) = (0, 0);
                while i < a.len() && j < b.len() {
                    match a[i].cmp(&b[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            let w = a[i];
                            if w > v {
                                let code = triple_code(&adj.arcs, [u, v, w]);
                                // Centers with two mutual dyads were counted
                                // above but the outer pair is adjacent here.
                                for (center, others) in
                                    [(u, (v, w)), (v, (u, w)), (w, (u, v))]
                                {
                                    let m = &adj.mutual[center as usize];
                                    if m.binary_search(&others.0).is_ok()
                                        && m.binary_search(&others.1).is_ok()
                                    {
                                        counts[0] -= 1;
                                    }
                                }
                                match mode {
                                    MatchMode::Induced => {
                                        let class = induced[code as usize];
                                        if class == 2 || class == 3 {
                                            counts[(class - 1) as usize] += 1;
                                        }
                                    }
                                    MatchMode::Partial => {
                                        for motif in [2u8, 3] {
                                            if partial[(motif - 1) as usize][code as usize] {
                                                counts[(motif - 1) as usize] += 1;
                                            }
                                        }
                                    }
                                }
                            }
                            i += 1;
                            j += 1;
                        }
                    }
                }
            }
        }
        if mode == MatchMode::Partial {
            // Partial motif 1 keeps every mutual-pair-at-center triple, so the
            // triangle correction does not apply; recompute it plainly.
            counts[0] = adj
                .mutual
                .iter()
                .map(|lists| {
                    let d = lists.len() as u64;
                    d * d.saturating_sub(1) / 2
                })
                .sum();
        }
    }
    MotifCensus { week, counts }
}

/// Componentwise difference of two consecutive weekly censuses.
pub fn motif_increment(census_t: &MotifCensus, census_prev: &MotifCensus) -> Result<MotifIncrement> {
    if census_t.week == 0 || census_prev.week + 1 != census_t.week {
        return Err(Error::InvalidArgument(format!(
            "weeks {} and {} are not consecutive",
            census_prev.week, census_t.week
        )));
    }
    let mut deltas = [0i64; 3];
    for (d, (&a, &b)) in deltas
        .iter_mut()
        .zip(census_t.counts.iter().zip(&census_prev.counts))
    {
        *d = a as i64 - b as i64;
    }
    Ok(MotifIncrement {
        week: census_t.week,
        deltas,
    })
}
