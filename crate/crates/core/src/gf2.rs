//! Rank of a sparse matrix over the two-element field, by column reduction.
//!
//! Columns are kept as sorted index lists; reduction pairs each surviving
//! column with its largest nonzero row ("low") and cancels collisions by
//! symmetric difference, the standard scheme for boundary-matrix ranks.

use std::collections::HashMap;

/// Rank over GF(2). `columns` holds the nonzero row indices of each column;
/// duplicate indices within a column cancel.
pub fn sparse_rank(columns: &[Vec<usize>]) -> usize {
    let mut pivots: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut rank = 0;
    for column in columns {
        let mut col = normalize(column);
        while let Some(&low) = col.last() {
            match pivots.get(&low) {
                Some(pivot_col) => col = symmetric_difference(&col, pivot_col),
                None => break,
            }
        }
        if !col.is_empty() {
            let low = *col.last().unwrap();
            pivots.insert(low, col);
            rank += 1;
        }
    }
    rank
}

fn normalize(column: &[usize]) -> Vec<usize> {
    let mut sorted = column.to_vec();
    sorted.sort_unstable();
    // Entries appearing an even number of times vanish over GF(2).
    let mut out = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            out.push(sorted[i]);
        }
        i = j;
    }
    out
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
