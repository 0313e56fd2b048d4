//! Independent reference decoders used as correctness oracles and baselines.
//!
//! `naive_reference_decode` re-implements the level recursion directly on
//! materialized per-test block lists: no compact-design tricks, no shared
//! clearing logic, BTree sets instead of packed integers. It consumes only
//! the design's defining primitive (the slot assignment) and re-derives
//! everything else itself. `comp_decode` is the elimination baseline over
//! expanded vertex tests.

use std::collections::BTreeSet;

use crate::design::Design;
use crate::error::Result;
use crate::outcomes::Outcomes;

/// Materialized tests for one level: `tests[iteration][slot]` is the sorted
/// list of member blocks.
fn materialize_level(design: &Design, level: u32) -> Result<Vec<Vec<Vec<u32>>>> {
    let layout = design.level_layout(level)?;
    let mut iterations = Vec::with_capacity(layout.iters as usize);
    for iter in 0..layout.iters {
        let mut slots: Vec<Vec<u32>> = vec![Vec::new(); design.t() as usize];
        for block in 1..=layout.g {
            slots[design.assignment(level, iter, block) as usize].push(block);
        }
        iterations.push(slots);
    }
    Ok(iterations)
}

/// Quadratic re-implementation of the coarse-to-fine recursion. Must produce
/// exactly the same edge set as the production decoder; intended for small
/// instances (n <= 1024 advised).
pub fn naive_reference_decode(design: &Design, outcomes: &Outcomes) -> Result<Vec<(u32, u32)>> {
    let l_min = design.l_min();
    let g_min = 1u32 << l_min;
    let mut pd: BTreeSet<(u32, u32)> = BTreeSet::new();
    for u in 1..=g_min {
        for v in (u + 1)..=g_min {
            pd.insert((u, v));
        }
    }

    for level in l_min..design.log2_n() {
        let tests = materialize_level(design, level)?;
        let base = design.level_layout(level)?.base;
        let mut next: BTreeSet<(u32, u32)> = BTreeSet::new();
        for &(u, v) in &pd {
            let mut cleared = false;
            'scan: for (iter, slots) in tests.iter().enumerate() {
                for (slot, members) in slots.iter().enumerate() {
                    let id = base + iter as u64 * design.t() as u64 + slot as u64;
                    if outcomes.get(id) {
                        continue;
                    }
                    if members.contains(&u) && members.contains(&v) {
                        cleared = true;
                        break 'scan;
                    }
                }
            }
            if !cleared {
                for (a, b) in child_pairs(u, v) {
                    next.insert((a, b));
                }
            }
        }
        pd = next;
    }

    let final_level = design.log2_n();
    let tests = materialize_level(design, final_level)?;
    let base = design.level_layout(final_level)?.base;
    let mut edges = Vec::new();
    for &(u, v) in &pd {
        let mut cleared = false;
        'scan: for (iter, slots) in tests.iter().enumerate() {
            for (slot, members) in slots.iter().enumerate() {
                let id = base + iter as u64 * design.t() as u64 + slot as u64;
                if outcomes.get(id) {
                    continue;
                }
                if members.contains(&u) && members.contains(&v) {
                    cleared = true;
                    break 'scan;
                }
            }
        }
        if !cleared {
            edges.push((u, v));
        }
    }
    Ok(edges)
}

/// The six children of a parent pair, written out longhand.
fn child_pairs(u: u32, v: u32) -> Vec<(u32, u32)> {
    let (ul, ur) = (2 * u - 1, 2 * u);
    let (vl, vr) = (2 * v - 1, 2 * v);
    vec![(ul, vl), (ul, vr), (ur, vl), (ur, vr), (ul, ur), (vl, vr)]
}

/// COMP elimination over expanded vertex tests: declare `(u, v)` an edge iff
/// no negative test contains both endpoints. Output is always a superset of
/// the true edge set.
pub fn comp_decode(n: u32, tests: &[Vec<u32>], outcomes: &[bool]) -> Vec<(u32, u32)> {
    let idx = |u: u32, v: u32| -> usize {
        let (a, b) = (u.min(v) as usize, u.max(v) as usize);
        (b - 1) * (b - 2) / 2 + (a - 1)
    };
    let n_pairs = n as usize * (n as usize - 1) / 2;
    let mut cleared = vec![false; n_pairs];
    for (test, &positive) in tests.iter().zip(outcomes) {
        if positive {
            continue;
        }
        for (i, &u) in test.iter().enumerate() {
            for &v in &test[i + 1..] {
                cleared[idx(u, v)] = true;
            }
        }
    }
    let mut edges = Vec::new();
    for v in 2..=n {
        for u in 1..v {
            if !cleared[idx(u, v)] {
                edges.push((u, v));
            }
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::decode_basic;
    use crate::design::{Design, DesignParams, Mode};
    use crate::graph::{sample_er_graph, Graph};
    use crate::outcomes::simulate_outcomes;

    fn params(seed: u64) -> DesignParams {
        DesignParams {
            c1: 2.0,
            c2: 4.0,
            cprime: 1.0,
            c3: 9.0,
            n_perms: 3,
            n_reps: 2,
            gamma: 0.3,
            seed,
            mode: Mode::Calibrated,
        }
    }

    #[test]
    fn all_positive_outcomes_keep_every_pair() {
        let d = Design::build(16, 4.0, &params(3)).unwrap();
        let o = crate::outcomes::Outcomes::new(d.total_tests());
        for id in 0..d.total_tests() {
            o.set(id);
        }
        let edges = naive_reference_decode(&d, &o).unwrap();
        assert_eq!(edges.len(), 16 * 15 / 2);
    }

    #[test]
    fn single_edge_always_present_in_output() {
        for seed in 0..10 {
            let g = Graph::new(16, vec![(2, 11)]).unwrap();
            let d = Design::build(16, 2.0, &params(seed)).unwrap();
            let o = simulate_outcomes(&d, &g).unwrap();
            let edges = naive_reference_decode(&d, &o).unwrap();
            assert!(edges.contains(&(2, 11)), "seed {seed}");
        }
    }

    #[test]
    fn reference_equals_production_decoder_on_seeds() {
        for seed in 0..30 {
            for n in [16u32, 32, 64] {
                let kbar = (n as f64).sqrt() * 2.0;
                let q = kbar / (n as f64 * (n as f64 - 1.0) / 2.0);
                let g = sample_er_graph(n, q, 9000 + seed).unwrap();
                let d = Design::build(n, kbar, &params(seed)).unwrap();
                let o = simulate_outcomes(&d, &g).unwrap();
                let reference = naive_reference_decode(&d, &o).unwrap();
                let fast = decode_basic(&d, &o).unwrap();
                assert_eq!(reference, fast.edges, "n = {n}, seed = {seed}");
            }
        }
    }

    #[test]
    fn comp_pair_with_no_cotest_is_a_false_positive() {
        // vertices 3 and 4 never share a test
        let tests = vec![vec![1, 2, 3], vec![1, 2, 4]];
        let outcomes = vec![false, false];
        let edges = comp_decode(4, &tests, &outcomes);
        assert_eq!(edges, vec![(3, 4)]);
    }

    #[test]
    fn comp_all_negative_with_full_pair_coverage_returns_empty() {
        let n = 6u32;
        let mut tests = Vec::new();
        for u in 1..=n {
            for v in (u + 1)..=n {
                tests.push(vec![u, v]);
            }
        }
        let outcomes = vec![false; tests.len()];
        assert!(comp_decode(n, &tests, &outcomes).is_empty());
    }

    #[test]
    fn comp_output_is_superset_of_truth_on_expanded_designs() {
        for seed in 0..25 {
            let n = 32u32;
            let q = 6.0 / (32.0 * 31.0 / 2.0);
            let g = sample_er_graph(n, q, 300 + seed).unwrap();
            let d = Design::build(n, 6.0, &params(seed)).unwrap();
            let o = simulate_outcomes(&d, &g).unwrap();
            let tests: Vec<Vec<u32>> = (0..d.total_tests())
                .map(|id| d.vertices_in_test(id).unwrap())
                .collect();
            let bits: Vec<bool> = (0..d.total_tests()).map(|id| o.get(id)).collect();
            let est = comp_decode(n, &tests, &bits);
            for &e in g.edges() {
                assert!(est.contains(&e), "seed {seed} missing {e:?}");
            }
        }
    }
}
