//! Test outcome bitsets and the edge-detecting query simulator.
//!
//! A test is positive iff the union of its member blocks' vertex sets
//! contains both endpoints of some edge. The fast simulator works per
//! (level, iteration): it hashes every block's slot once, then walks the
//! level's defective blocks and distinct cross block pairs, which is
//! equivalent to (and verified against) the naive per-test vertex scan.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::graph::{block_of_unchecked, Graph};

/// One bit per global test id. Writes are set-only and idempotent, so
/// outcome filling may be split across workers.
pub struct Outcomes {
    words: Vec<AtomicU64>,
    total: u64,
}

impl Outcomes {
    pub fn new(total: u64) -> Outcomes {
        let n_words = ((total + 63) / 64) as usize;
        let mut words = Vec::with_capacity(n_words);
        words.resize_with(n_words, || AtomicU64::new(0));
        Outcomes { words, total }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    #[inline(always)]
    pub fn set(&self, idx: u64) {
        debug_assert!(idx < self.total);
        self.words[(idx >> 6) as usize].fetch_or(1u64 << (idx & 63), Ordering::Relaxed);
    }

    #[inline(always)]
    pub fn get(&self, idx: u64) -> bool {
        debug_assert!(idx < self.total);
        (self.words[(idx >> 6) as usize].load(Ordering::Relaxed) >> (idx & 63)) & 1 == 1
    }

    pub fn count_positive(&self) -> u64 {
        self.words
            .iter()
            .map(|w| w.load(Ordering::Relaxed).count_ones() as u64)
            .sum()
    }

    /// Little-endian byte image (bit `i` of byte `j` is test `8j + i`),
    /// trailing padding bits zero.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.words.len() * 8);
        for w in &self.words {
            bytes.extend_from_slice(&w.load(Ordering::Relaxed).to_le_bytes());
        }
        bytes.truncate(((self.total + 7) / 8) as usize);
        bytes
    }

    pub fn from_bytes(total: u64, bytes: &[u8]) -> Result<Outcomes> {
        if bytes.len() as u64 != (total + 7) / 8 {
            return Err(Error::Parse(format!(
                "outcome payload has {} bytes, expected {}",
                bytes.len(),
                (total + 7) / 8
            )));
        }
        let out = Outcomes::new(total);
        for (j, &b) in bytes.iter().enumerate() {
            out.words[j >> 3].fetch_or((b as u64) << ((j & 7) * 8), Ordering::Relaxed);
        }
        // reject set bits beyond `total`
        if total % 64 != 0 {
            let last = out.words.last().unwrap().load(Ordering::Relaxed);
            if last >> (total % 64) != 0 {
                return Err(Error::Parse("outcome payload has bits beyond total".into()));
            }
        }
        Ok(out)
    }

    pub fn eq_bits(&self, other: &Outcomes) -> bool {
        self.total == other.total
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a.load(Ordering::Relaxed) == b.load(Ordering::Relaxed))
    }
}

impl Clone for Outcomes {
    fn clone(&self) -> Outcomes {
        let words = self
            .words
            .iter()
            .map(|w| AtomicU64::new(w.load(Ordering::Relaxed)))
            .collect();
        Outcomes {
            words,
            total: self.total,
        }
    }
}

/// Per-level edge structure: which blocks have an internal edge and which
/// distinct block pairs carry a cross edge.
pub(crate) struct LevelEdges {
    pub defective: Vec<u32>,
    pub cross: Vec<(u32, u32)>,
}

pub(crate) fn level_edges(edges: &[(u32, u32)], level: u32, n: u32) -> LevelEdges {
    let mut defective = Vec::new();
    let mut cross = Vec::new();
    for &(u, v) in edges {
        let bu = block_of_unchecked(u, level, n);
        let bv = block_of_unchecked(v, level, n);
        if bu == bv {
            defective.push(bu);
        } else {
            cross.push((bu.min(bv), bu.max(bv)));
        }
    }
    defective.sort_unstable();
    defective.dedup();
    cross.sort_unstable();
    cross.dedup();
    LevelEdges { defective, cross }
}

/// Simulates all outcomes of `design` against `graph` with the per-edge
/// fast path. Iterations are distributed across workers; bit writes are
/// idempotent so the result is identical for any worker count.
pub fn simulate_outcomes(design: &Design, graph: &Graph) -> Result<Outcomes> {
    if graph.n() != design.n() {
        return Err(Error::Parameter(format!(
            "graph has n = {}, design has n = {}",
            graph.n(),
            design.n()
        )));
    }
    let outcomes = Outcomes::new(design.total_tests());
    for layout in design.levels() {
        let le = level_edges(graph.edges(), layout.level, design.n());
        if le.defective.is_empty() && le.cross.is_empty() {
            continue;
        }
        let level = layout.level;
        let base = layout.base;
        let g = layout.g;
        (0..layout.iters).into_par_iter().for_each_init(
            || vec![0u32; g as usize + 1],
            |harr, it| {
                for b in 1..=g {
                    harr[b as usize] = design.assignment(level, it, b);
                }
                for &b in &le.defective {
                    outcomes.set(design.test_id(base, it, harr[b as usize]));
                }
                for &(a, b) in &le.cross {
                    let ha = harr[a as usize];
                    if ha == harr[b as usize] {
                        outcomes.set(design.test_id(base, it, ha));
                    }
                }
            },
        );
    }
    Ok(outcomes)
}

/// Naive reference simulator: expands every test's vertex set and scans all
/// vertex pairs for an edge. Quadratic; test-harness oracle for the fast path.
pub fn simulate_outcomes_naive(design: &Design, graph: &Graph) -> Result<Outcomes> {
    if graph.n() != design.n() {
        return Err(Error::Parameter("graph/design size mismatch".into()));
    }
    let outcomes = Outcomes::new(design.total_tests());
    for id in 0..design.total_tests() {
        let vs = design.vertices_in_test(id)?;
        'scan: for (i, &a) in vs.iter().enumerate() {
            for &b in &vs[i + 1..] {
                if graph.contains_edge(a, b) {
                    outcomes.set(id);
                    break 'scan;
                }
            }
        }
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{DesignParams, Mode};
    use crate::graph::sample_er_graph;

    fn params(seed: u64) -> DesignParams {
        DesignParams {
            c1: 2.0,
            c2: 4.0,
            cprime: 1.0,
            c3: 9.0,
            n_perms: 3,
            n_reps: 3,
            gamma: 0.3,
            seed,
            mode: Mode::Calibrated,
        }
    }

    #[test]
    fn bitset_round_trips_through_bytes() {
        let o = Outcomes::new(131);
        for idx in [0u64, 1, 63, 64, 65, 130] {
            o.set(idx);
        }
        let bytes = o.to_bytes();
        let back = Outcomes::from_bytes(131, &bytes).unwrap();
        assert!(o.eq_bits(&back));
        assert_eq!(back.count_positive(), 6);
        assert!(Outcomes::from_bytes(130, &bytes).is_err());
    }

    #[test]
    fn empty_graph_gives_all_negative() {
        let g = crate::graph::Graph::new(16, vec![]).unwrap();
        let d = Design::build(16, 4.0, &params(3)).unwrap();
        let o = simulate_outcomes(&d, &g).unwrap();
        assert_eq!(o.count_positive(), 0);
    }

    #[test]
    fn internal_edge_makes_every_test_of_its_block_positive() {
        // single edge inside block 1 at every level
        let g = crate::graph::Graph::new(16, vec![(1, 2)]).unwrap();
        let d = Design::build(16, 4.0, &params(5)).unwrap();
        let o = simulate_outcomes(&d, &g).unwrap();
        for layout in d.levels() {
            if layout.level == d.log2_n() {
                continue; // singletons: the edge is no longer internal
            }
            let block = crate::graph::block_of(1, layout.level, 16).unwrap();
            assert_eq!(block, crate::graph::block_of(2, layout.level, 16).unwrap());
            for id in d.tests_of_block(layout.level, block).unwrap() {
                assert!(o.get(id), "test {id} at level {} not positive", layout.level);
            }
        }
    }

    #[test]
    fn size_mismatch_is_a_parameter_error() {
        let g = crate::graph::Graph::new(32, vec![]).unwrap();
        let d = Design::build(16, 4.0, &params(0)).unwrap();
        assert!(simulate_outcomes(&d, &g).is_err());
    }

    #[test]
    fn fast_path_matches_naive_scan_bit_for_bit() {
        // seeded instance required by the examples: n = 64, kbar = 8
        let q = 8.0 / (64.0 * 63.0 / 2.0);
        let g = sample_er_graph(64, q, 42).unwrap();
        let d = Design::build(64, 8.0, &params(42)).unwrap();
        let fast = simulate_outcomes(&d, &g).unwrap();
        let naive = simulate_outcomes_naive(&d, &g).unwrap();
        assert!(fast.eq_bits(&naive));
    }

    #[test]
    fn monotonicity_adding_an_edge_never_clears_a_bit() {
        let q = 6.0 / (32.0 * 31.0 / 2.0);
        for seed in 0..10 {
            let g = sample_er_graph(32, q, seed).unwrap();
            let d = Design::build(32, 6.0, &params(seed)).unwrap();
            let before = simulate_outcomes(&d, &g).unwrap();
            // add the first missing edge
            let mut edges = g.edges().to_vec();
            'outer: for u in 1..=32u32 {
                for v in (u + 1)..=32 {
                    if !g.contains_edge(u, v) {
                        edges.push((u, v));
                        break 'outer;
                    }
                }
            }
            let g2 = crate::graph::Graph::new(32, edges).unwrap();
            let after = simulate_outcomes(&d, &g2).unwrap();
            for id in 0..d.total_tests() {
                if before.get(id) {
                    assert!(after.get(id), "bit {id} flipped 1 -> 0");
                }
            }
        }
    }
}
