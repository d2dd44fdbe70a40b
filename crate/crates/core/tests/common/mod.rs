//! Independent oracles for the integration suites: full dense boundary-matrix
//! simplicial homology and brute-force triad isomorphism counting. These share
//! no code with the library kernels they check.

// Not every test target uses every oracle.
#![allow(dead_code)]

use std::collections::HashSet;

/// Dense GF(2) row reduction rank.
pub fn dense_rank(mut m: Vec<Vec<bool>>) -> usize {
    if m.is_empty() || m[0].is_empty() {
        return 0;
    }
    let rows = m.len();
    let cols = m[0].len();
    let mut rank = 0;
    let mut pivot_row = 0;
    for col in 0..cols {
        let Some(r) = (pivot_row..rows).find(|&r| m[r][col]) else {
            continue;
        };
        m.swap(pivot_row, r);
        for r2 in 0..rows {
            if r2 != pivot_row && m[r2][col] {
                for c2 in col..cols {
                    let v = m[pivot_row][c2];
                    m[r2][c2] ^= v;
                }
            }
        }
        pivot_row += 1;
        rank += 1;
        if pivot_row == rows {
            break;
        }
    }
    rank
}

/// Betti numbers of the flag complex (dimensions 0 and 1) of an undirected
/// graph given as (u, v) edges with u < v, via full boundary matrices:
/// beta0 = |V| - rank d1, beta1 = (|E| - rank d1) - rank d2. Vertices are the
/// edge endpoints (isolated vertices are not part of the complex).
pub fn simplicial_betti(edges: &[(u32, u32)]) -> (u32, u32) {
    let mut vertices: Vec<u32> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    vertices.sort_unstable();
    vertices.dedup();
    if vertices.is_empty() {
        return (0, 0);
    }
    let vertex_index = |v: u32| vertices.binary_search(&v).unwrap();
    let edge_set: HashSet<(u32, u32)> = edges.iter().copied().collect();

    // All 3-cliques over every vertex triple.
    let mut triangles: Vec<(u32, u32, u32)> = Vec::new();
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            for k in j + 1..vertices.len() {
                let (a, b, c) = (vertices[i], vertices[j], vertices[k]);
                if edge_set.contains(&(a, b))
                    && edge_set.contains(&(a, c))
                    && edge_set.contains(&(b, c))
                {
                    triangles.push((a, b, c));
                }
            }
        }
    }

    // d1: |V| x |E|.
    let d1: Vec<Vec<bool>> = (0..vertices.len())
        .map(|row| {
            edges
                .iter()
                .map(|&(u, v)| vertex_index(u) == row || vertex_index(v) == row)
                .collect()
        })
        .collect();
    // d2: |E| x |T|.
    let edge_index = |u: u32, v: u32| edges.iter().position(|&e| e == (u, v)).unwrap();
    let d2: Vec<Vec<bool>> = (0..edges.len())
        .map(|row| {
            triangles
                .iter()
                .map(|&(a, b, c)| {
                    edge_index(a, b) == row || edge_index(a, c) == row || edge_index(b, c) == row
                })
                .collect()
        })
        .collect();

    let rank_d1 = dense_rank(d1);
    let rank_d2 = if triangles.is_empty() { 0 } else { dense_rank(d2) };
    let beta0 = vertices.len() - rank_d1;
    let beta1 = edges.len() - rank_d1 - rank_d2;
    (beta0 as u32, beta1 as u32)
}

/// The three reference motifs as explicit arc sets over vertices (0, 1, 2).
fn motif_arcs(motif: u8) -> Vec<(usize, usize)> {
    match motif {
        1 => vec![(0, 1), (1, 0), (1, 2), (2, 1)],
        2 => vec![(0, 1), (1, 0), (1, 2), (2, 0)],
        3 => vec![(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)],
        _ => unreachable!(),
    }
}

const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Brute-force induced triad census over all vertex triples, testing exact
/// arc-set equality against each motif under all six relabelings. Also checks
/// the classes are disjoint on every triple.
pub fn brute_force_census(n: usize, arcs: &HashSet<(u32, u32)>) -> [u64; 3] {
    let mut counts = [0u64; 3];
    for a in 0..n as u32 {
        for b in a + 1..n as u32 {
            for c in b + 1..n as u32 {
                let triple = [a, b, c];
                let induced: HashSet<(usize, usize)> = PERMS[0]
                    .iter()
                    .flat_map(|&i| PERMS[0].iter().map(move |&j| (i, j)))
                    .filter(|&(i, j)| i != j && arcs.contains(&(triple[i], triple[j])))
                    .collect();
                let mut matches = Vec::new();
                for motif in [1u8, 2, 3] {
                    let reference = motif_arcs(motif);
                    let hit = PERMS.iter().any(|perm| {
                        let mapped: HashSet<(usize, usize)> = reference
                            .iter()
                            .map(|&(u, v)| (perm[u], perm[v]))
                            .collect();
                        mapped == induced
                    });
                    if hit {
                        matches.push(motif);
                    }
                }
                assert!(
                    matches.len() <= 1,
                    "triple matched multiple motif classes: {matches:?}"
                );
                if let Some(&motif) = matches.first() {
                    counts[(motif - 1) as usize] += 1;
                }
            }
        }
    }
    counts
}
