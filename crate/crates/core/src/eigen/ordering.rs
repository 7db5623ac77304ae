//! Approximate minimum degree ordering on a quotient graph.
//!
//! Eliminated variables become elements; a variable's neighbourhood is its
//! remaining variable neighbours plus the variables of its adjacent
//! elements. Degrees are the usual approximate upper bounds computed with
//! the `|Le \ Lp|` trick. No supervariable detection is done, which costs
//! some speed on large meshes but not quality.

use std::collections::BTreeSet;

use crate::fem::SparseSym;

/// Returns `perm` with `perm[k]` the original index eliminated `k`-th.
pub fn approximate_minimum_degree(a: &SparseSym) -> Vec<usize> {
    let n = a.dim();
    let mut adj_vars: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let mut adj_elems: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut elem_vars: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut eliminated = vec![false; n];
    let mut degree: Vec<usize> = adj_vars.iter().map(Vec::len).collect();
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (degree[i], i)).collect();

    let mut mark = vec![usize::MAX; n];
    let mut elem_alive = vec![false; n];
    let mut w = vec![0isize; n];
    let mut w_stamp = vec![usize::MAX; n];
    let mut perm = Vec::with_capacity(n);

    while let Some((_, p)) = queue.pop_first() {
        perm.push(p);
        eliminated[p] = true;
        let stamp = p;

        // Lp = adjacent variables plus variables of adjacent elements
        let mut lp = Vec::new();
        mark[p] = stamp;
        for &v in &adj_vars[p] {
            if !eliminated[v] && mark[v] != stamp {
                mark[v] = stamp;
                lp.push(v);
            }
        }
        let absorbed = std::mem::take(&mut adj_elems[p]);
        for &e in &absorbed {
            for &v in &elem_vars[e] {
                if !eliminated[v] && mark[v] != stamp {
                    mark[v] = stamp;
                    lp.push(v);
                }
            }
            elem_alive[e] = false;
            elem_vars[e] = Vec::new();
        }
        adj_vars[p] = Vec::new();
        elem_alive[p] = true;

        // update neighbour lists
        for &i in &lp {
            adj_elems[i].retain(|&e| elem_alive[e]);
            adj_elems[i].push(p);
            adj_vars[i].retain(|&v| !eliminated[v] && mark[v] != stamp);
        }

        // |Le \ Lp| for elements touching Lp
        for &i in &lp {
            for &e in &adj_elems[i] {
                if e == p {
                    continue;
                }
                if w_stamp[e] != stamp {
                    w_stamp[e] = stamp;
                    w[e] = elem_vars[e].len() as isize;
                }
                w[e] -= 1;
            }
        }
        let lp_len = lp.len();
        for &i in &lp {
            let mut d = adj_vars[i].len() + lp_len - 1;
            for &e in &adj_elems[i] {
                if e != p {
                    d += w[e].max(0) as usize;
                }
            }
            let remaining = n - perm.len() - 1;
            let d = d.min(remaining).min(degree[i] + lp_len);
            queue.remove(&(degree[i], i));
            degree[i] = d;
            queue.insert((d, i));
        }
        elem_vars[p] = lp;
    }
    perm
}

/// Inverse of a permutation.
pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &i) in perm.iter().enumerate() {
        inv[i] = k;
    }
    inv
}
