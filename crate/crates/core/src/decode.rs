//! Coarse-to-fine decoders over the possibly-defective pair sets.
//!
//! The basic decoder seeds the candidate set with every block pair at the
//! coarsest level, discards any pair some negative test contains, and splits
//! the survivors into the six child pairs until the singleton level, where
//! pairs surviving every negative test become the edge estimate. The
//! estimate is a deterministic superset of the true edge set: a test
//! containing a defective pair is always positive, so defective pairs are
//! never discarded.
//!
//! `outcome_checks` counts decoding work the way the analysis does: one
//! check per (pair, iteration) inspected during clearing scans, one per
//! listed test id consulted when index tables are used, and one per
//! (block, iteration) read by the base screen. Scans stop early once a pair
//! is cleared, so the counter reflects work actually done.

use rayon::prelude::*;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::graph::{pack_pair, pair_rank, unpack_pair};
use crate::outcomes::Outcomes;
use crate::partition::{PartitionedDesign, Segment};

/// A per-level set of possibly-defective unordered block pairs, kept sorted
/// and deduplicated.
#[derive(Clone, Debug, Default)]
pub struct PdSet {
    pub level: u32,
    pairs: Vec<u64>,
}

impl PdSet {
    /// All `C(g, 2)` pairs over `[1, g]` at `level`.
    pub fn full(level: u32, g: u32) -> PdSet {
        let mut pairs = Vec::with_capacity((g as usize * (g as usize - 1)) / 2);
        for u in 1..=g {
            for v in (u + 1)..=g {
                pairs.push(pack_pair(u, v));
            }
        }
        PdSet { level, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.pairs.iter().map(|&p| unpack_pair(p))
    }

    /// Splits every pair into its six children at the next level,
    /// deduplicating shared siblings.
    pub fn split(&self) -> PdSet {
        let mut out = Vec::with_capacity(self.pairs.len() * 6);
        for &p in &self.pairs {
            let (u, v) = unpack_pair(p);
            for (a, b) in split_pair(u, v) {
                out.push(pack_pair(a, b));
            }
        }
        out.sort_unstable();
        out.dedup();
        PdSet {
            level: self.level + 1,
            pairs: out,
        }
    }
}

/// The six child pairs of `(u, v)` (`u < v`): four cross pairs between the
/// two blocks' children plus the two sibling pairs, all canonical. Children
/// of block `i` are `2i - 1` and `2i`.
pub fn split_pair(u: u32, v: u32) -> [(u32, u32); 6] {
    debug_assert!(u < v);
    [
        (2 * u - 1, 2 * v - 1),
        (2 * u - 1, 2 * v),
        (2 * u, 2 * v - 1),
        (2 * u, 2 * v),
        (2 * u - 1, 2 * u),
        (2 * v - 1, 2 * v),
    ]
}

/// Decoder termination state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeStatus {
    Completed,
    /// Some part pair exhausted all repetitions with a PD-size overflow.
    OverflowTerminated { pairs: Vec<(u32, u32)> },
    /// Some part pair had no permutation pass the base screen.
    ScreenFailed { pairs: Vec<(u32, u32)> },
}

impl DecodeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecodeStatus::Completed => "completed",
            DecodeStatus::OverflowTerminated { .. } => "overflow-terminated",
            DecodeStatus::ScreenFailed { .. } => "screen-failed",
        }
    }
}

/// Decoder output: the edge estimate plus instrumentation.
#[derive(Clone, Debug)]
pub struct DecodeResult {
    pub edges: Vec<(u32, u32)>,
    /// `(level, |PD|)` on entry to each level. For the partitioned decoder
    /// this is the maximum over part pairs and repetitions.
    pub pd_sizes: Vec<(u32, u64)>,
    pub outcome_checks: u64,
    pub status: DecodeStatus,
}

impl DecodeResult {
    pub fn max_pd(&self) -> u64 {
        self.pd_sizes.iter().map(|&(_, s)| s).max().unwrap_or(0)
    }
}

/// Returns true iff some negative test contains both blocks `u` and `v` at
/// `level` (the pair can be discarded). Scans the level's iterations in
/// order, counting one check per iteration inspected, and stops at the
/// first clearing test.
pub fn pair_cleared(
    design: &Design,
    outcomes: &Outcomes,
    level: u32,
    u: u32,
    v: u32,
    checks: &mut u64,
) -> Result<bool> {
    let layout = design.level_layout(level)?;
    if u == v || u < 1 || v < 1 || u > layout.g || v > layout.g {
        return Err(Error::Parameter(format!(
            "bad block pair ({u}, {v}) at level {level}"
        )));
    }
    for iter in 0..layout.iters {
        *checks += 1;
        let hu = design.assignment(level, iter, u);
        if hu == design.assignment(level, iter, v)
            && !outcomes.get(design.test_id(layout.base, iter, hu))
        {
            return Ok(true);
        }
    }
    Ok(false)
}

/// One level of clearing: walks the iterations, hashing every block's slot
/// once per iteration, and drops cleared pairs from `pd` in place.
fn scan_level(
    pd: &mut Vec<u64>,
    g: u32,
    iters: u64,
    slot_of: impl Fn(u64, u32) -> u32,
    test_id: impl Fn(u64, u32) -> u64,
    outcomes: &Outcomes,
    checks: &mut u64,
    harr: &mut Vec<u32>,
) {
    harr.resize(g as usize + 1, 0);
    let mut n_checks = 0u64;
    for iter in 0..iters {
        if pd.is_empty() {
            break;
        }
        for b in 1..=g {
            harr[b as usize] = slot_of(iter, b);
        }
        pd.retain(|&p| {
            n_checks += 1;
            let (u, v) = unpack_pair(p);
            let hu = harr[u as usize];
            hu != harr[v as usize] || outcomes.get(test_id(iter, hu))
        });
    }
    *checks += n_checks;
}

/// Binary-splitting decode: full candidate set at the coarsest level, clear and
/// split level by level, then keep the singleton pairs not contained in any
/// negative final-level test.
pub fn decode_basic(design: &Design, outcomes: &Outcomes) -> Result<DecodeResult> {
    if outcomes.total() != design.total_tests() {
        return Err(Error::Parameter(format!(
            "outcomes carry {} tests but the design has {}",
            outcomes.total(),
            design.total_tests()
        )));
    }
    let mut checks = 0u64;
    let mut harr = Vec::new();
    let mut pd = PdSet::full(design.l_min(), 1 << design.l_min());
    let mut pd_sizes = vec![(design.l_min(), pd.len() as u64)];

    for level in design.l_min()..design.log2_n() {
        let layout = design.level_layout(level)?.clone();
        scan_level(
            &mut pd.pairs,
            layout.g,
            layout.iters,
            |iter, b| design.assignment(level, iter, b),
            |iter, slot| design.test_id(layout.base, iter, slot),
            outcomes,
            &mut checks,
            &mut harr,
        );
        pd = pd.split();
        pd_sizes.push((pd.level, pd.len() as u64));
    }

    let final_level = design.log2_n();
    let layout = design.level_layout(final_level)?.clone();
    scan_level(
        &mut pd.pairs,
        layout.g,
        layout.iters,
        |iter, b| design.assignment(final_level, iter, b),
        |iter, slot| design.test_id(layout.base, iter, slot),
        outcomes,
        &mut checks,
        &mut harr,
    );

    let edges = pd.pairs().collect();
    Ok(DecodeResult {
        edges,
        pd_sizes,
        outcome_checks: checks,
        status: DecodeStatus::Completed,
    })
}

/// Pre-processed per-pair test index lists, CSR per level.
#[derive(Clone, Debug)]
pub struct IndexTables {
    n: u32,
    seed: u64,
    kbar_bits: u64,
    total: u64,
    levels: Vec<LevelTable>,
}

#[derive(Clone, Debug)]
struct LevelTable {
    level: u32,
    offsets: Vec<u32>,
    ids: Vec<u64>,
}

impl IndexTables {
    fn table(&self, level: u32) -> &LevelTable {
        self.levels
            .iter()
            .find(|t| t.level == level)
            .expect("tables cover every design level")
    }

    /// Test ids containing both `u` and `v` at `level`, in iteration order.
    pub fn ind(&self, level: u32, u: u32, v: u32) -> &[u64] {
        let t = self.table(level);
        let rank = pair_rank(u.min(v), u.max(v)) as usize;
        &t.ids[t.offsets[rank] as usize..t.offsets[rank + 1] as usize]
    }

    /// Size of the largest IND list across pairs, per level; the final level
    /// reports per round (each round is an independent repetition block).
    pub fn max_list_len(&self) -> usize {
        self.levels
            .iter()
            .flat_map(|t| t.offsets.windows(2).map(|w| (w[1] - w[0]) as usize))
            .max()
            .unwrap_or(0)
    }
}

/// Builds the full IND tables: for every level and every block pair, the
/// list of test ids containing both blocks. Cost is within
/// O(pairs * iterations) per level; intended for moderate `n`.
pub fn precompute_index_tables(design: &Design) -> Result<IndexTables> {
    let mut levels = Vec::new();
    for layout in design.levels() {
        let g = layout.g;
        let n_pairs = g as usize * (g as usize - 1) / 2;
        let mut lists: Vec<Vec<u64>> = vec![Vec::new(); n_pairs];
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); design.t() as usize];
        for iter in 0..layout.iters {
            for bucket in buckets.iter_mut() {
                bucket.clear();
            }
            for b in 1..=g {
                buckets[design.assignment(layout.level, iter, b) as usize].push(b);
            }
            for (slot, bucket) in buckets.iter().enumerate() {
                if bucket.len() < 2 {
                    continue;
                }
                let id = design.test_id(layout.base, iter, slot as u32);
                for (i, &u) in bucket.iter().enumerate() {
                    for &v in &bucket[i + 1..] {
                        lists[pair_rank(u, v) as usize].push(id);
                    }
                }
            }
        }
        let mut offsets = Vec::with_capacity(n_pairs + 1);
        let mut ids = Vec::new();
        offsets.push(0u32);
        for list in &lists {
            ids.extend_from_slice(list);
            offsets.push(ids.len() as u32);
        }
        levels.push(LevelTable {
            level: layout.level,
            offsets,
            ids,
        });
    }
    Ok(IndexTables {
        n: design.n(),
        seed: design.params().seed,
        kbar_bits: design.kbar().to_bits(),
        total: design.total_tests(),
        levels,
    })
}

/// Largest co-occurrence count over all pairs and levels, with the final
/// level counted per round. Equals `max |IND|` without materializing the
/// table; used to check the `3 ln n` pre-processing bound empirically.
pub fn max_ind_size(design: &Design) -> Result<u32> {
    let mut global_max = 0u32;
    for layout in design.levels() {
        let g = layout.g;
        if g > 8192 {
            return Err(Error::Refusal(format!(
                "per-pair counting over C({g}, 2) pairs is too large"
            )));
        }
        let n_pairs = g as usize * (g as usize - 1) / 2;
        let mut counts = vec![0u16; n_pairs];
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); design.t() as usize];
        let is_final = layout.level == design.log2_n();
        let block_iters = if is_final { design.r() } else { layout.iters };
        let rounds = layout.iters / block_iters;
        for round in 0..rounds {
            counts.iter_mut().for_each(|c| *c = 0);
            for it in 0..block_iters {
                let iter = round * block_iters + it;
                for bucket in buckets.iter_mut() {
                    bucket.clear();
                }
                for b in 1..=g {
                    buckets[design.assignment(layout.level, iter, b) as usize].push(b);
                }
                for bucket in &buckets {
                    if bucket.len() < 2 {
                        continue;
                    }
                    for (i, &u) in bucket.iter().enumerate() {
                        for &v in &bucket[i + 1..] {
                            let c = &mut counts[pair_rank(u, v) as usize];
                            *c += 1;
                            global_max = global_max.max(*c as u32);
                        }
                    }
                }
            }
        }
    }
    Ok(global_max)
}

/// Same recursion as [`decode_basic`] but pairs are cleared by reading only
/// their pre-listed test ids. Returns an identical edge set.
pub fn decode_with_tables(
    design: &Design,
    outcomes: &Outcomes,
    tables: &IndexTables,
) -> Result<DecodeResult> {
    if tables.n != design.n()
        || tables.seed != design.params().seed
        || tables.kbar_bits != design.kbar().to_bits()
        || tables.total != design.total_tests()
    {
        return Err(Error::Parameter(
            "index tables were built for a different design".into(),
        ));
    }
    if outcomes.total() != design.total_tests() {
        return Err(Error::Parameter("outcomes/design size mismatch".into()));
    }
    let mut checks = 0u64;
    let mut pd = PdSet::full(design.l_min(), 1 << design.l_min());
    let mut pd_sizes = vec![(design.l_min(), pd.len() as u64)];

    let mut clear = |pd: &mut Vec<u64>, level: u32| {
        pd.retain(|&p| {
            let (u, v) = unpack_pair(p);
            for &id in tables.ind(level, u, v) {
                checks += 1;
                if !outcomes.get(id) {
                    return false;
                }
            }
            true
        });
    };

    for level in design.l_min()..design.log2_n() {
        clear(&mut pd.pairs, level);
        pd = pd.split();
        pd_sizes.push((pd.level, pd.len() as u64));
    }
    clear(&mut pd.pairs, design.log2_n());

    Ok(DecodeResult {
        edges: pd.pairs().collect(),
        pd_sizes,
        outcome_checks: checks,
        status: DecodeStatus::Completed,
    })
}

/// Base screen for one `(i, j, t, r)` segment: every base-level
/// block must appear in at least one negative screen test. Returns true iff
/// all blocks pass, i.e. the screened block graph is declared free of
/// defective blocks. One-sided: a block with an internal edge sits only in
/// positive tests, so it can never pass.
pub fn screen_permutation(
    pdesign: &PartitionedDesign,
    outcomes: &Outcomes,
    i: u32,
    j: u32,
    t: u32,
    r: u32,
    checks: &mut u64,
) -> Result<bool> {
    let seg = pdesign.segment(i, j, t, r)?;
    Ok(screen_segment(pdesign, outcomes, &seg, checks))
}

fn screen_segment(
    pd: &PartitionedDesign,
    outcomes: &Outcomes,
    seg: &Segment,
    checks: &mut u64,
) -> bool {
    let layout = pd.layout();
    for block in 1..=pd.g0() {
        let mut negative_seen = false;
        for iter in 0..layout.screen_iters {
            *checks += 1;
            let slot = pd.screen_assignment(seg, iter, block);
            if !outcomes.get(pd.screen_test_id(seg, iter, slot)) {
                negative_seen = true;
                break;
            }
        }
        if !negative_seen {
            return false;
        }
    }
    true
}

/// Per-part-pair decode outcome, merged by [`decode_partitioned`].
struct PairDecode {
    edges: Vec<u64>,
    pd_sizes: Vec<u64>,
    checks: u64,
    screen_failed: bool,
    overflowed: bool,
}

/// Decodes a partitioned design: per part pair, pick the
/// first permutation whose first-repetition screen passes, then run the
/// level recursion repetition by repetition with the PD-size cap, keeping
/// the first repetition that completes. Recovered pairs are mapped back to
/// global vertices and unioned.
pub fn decode_partitioned(
    pdesign: &PartitionedDesign,
    outcomes: &Outcomes,
) -> Result<DecodeResult> {
    if outcomes.total() != pdesign.total_tests() {
        return Err(Error::Parameter(format!(
            "outcomes carry {} tests but the design has {}",
            outcomes.total(),
            pdesign.total_tests()
        )));
    }
    // |PD| cap ceil(7 kbar^(4 gamma)), floored at g0^2 so the initial set
    // never trips it.
    let cap = ((7.0 * pdesign.kbar().powf(4.0 * pdesign.params().gamma)).ceil() as u64)
        .max(pdesign.g0() as u64 * pdesign.g0() as u64);

    let pairs = pdesign.pairs();
    let results: Vec<Result<PairDecode>> = pairs
        .par_iter()
        .map(|&(i, j)| decode_pair(pdesign, outcomes, i, j, cap))
        .collect();

    let n_levels = (pdesign.log2_nij() - pdesign.l0() + 1) as usize;
    let mut edges: Vec<u64> = Vec::new();
    let mut pd_max = vec![0u64; n_levels];
    let mut checks = 0u64;
    let mut screen_failed_pairs = Vec::new();
    let mut overflow_pairs = Vec::new();
    for (idx, res) in results.into_iter().enumerate() {
        let pairdec = res?;
        let (i, j) = pairs[idx];
        checks += pairdec.checks;
        if pairdec.screen_failed {
            screen_failed_pairs.push((i, j));
            continue;
        }
        if pairdec.overflowed {
            overflow_pairs.push((i, j));
        }
        edges.extend_from_slice(&pairdec.edges);
        for (lvl, &s) in pairdec.pd_sizes.iter().enumerate() {
            pd_max[lvl] = pd_max[lvl].max(s);
        }
    }
    edges.sort_unstable();
    edges.dedup();

    let status = if !screen_failed_pairs.is_empty() {
        DecodeStatus::ScreenFailed {
            pairs: screen_failed_pairs,
        }
    } else if !overflow_pairs.is_empty() {
        DecodeStatus::OverflowTerminated {
            pairs: overflow_pairs,
        }
    } else {
        DecodeStatus::Completed
    };
    Ok(DecodeResult {
        edges: edges.into_iter().map(unpack_pair).collect(),
        pd_sizes: pd_max
            .into_iter()
            .enumerate()
            .map(|(idx, s)| (pdesign.l0() + idx as u32, s))
            .collect(),
        outcome_checks: checks,
        status,
    })
}

fn decode_pair(
    pd: &PartitionedDesign,
    outcomes: &Outcomes,
    i: u32,
    j: u32,
    cap: u64,
) -> Result<PairDecode> {
    let mut checks = 0u64;
    let mut pd_sizes = vec![0u64; (pd.log2_nij() - pd.l0() + 1) as usize];

    // Permutation selection: first t whose repetition-1 screen passes.
    let mut tstar = None;
    for t in 1..=pd.params().n_perms {
        let seg = pd.segment(i, j, t, 1)?;
        if screen_segment(pd, outcomes, &seg, &mut checks) {
            tstar = Some(t);
            break;
        }
    }
    let Some(t) = tstar else {
        return Ok(PairDecode {
            edges: Vec::new(),
            pd_sizes,
            checks,
            screen_failed: true,
            overflowed: false,
        });
    };

    let lm = pd.label_map(i, j)?;
    let mut harr = Vec::new();
    for r in 1..=pd.params().n_reps {
        let seg = pd.segment(i, j, t, r)?;
        let mut set = PdSet::full(pd.l0(), pd.g0());
        pd_sizes[0] = pd_sizes[0].max(set.len() as u64);
        let mut overflowed = false;
        for level in pd.l0()..pd.log2_nij() {
            scan_level(
                &mut set.pairs,
                1 << level,
                pd.sub_iterations(level),
                |iter, b| pd.sub_assignment(&seg, level, iter, b),
                |iter, slot| pd.sub_test_id(&seg, level, iter, slot),
                outcomes,
                &mut checks,
                &mut harr,
            );
            set = set.split();
            let idx = (set.level - pd.l0()) as usize;
            pd_sizes[idx] = pd_sizes[idx].max(set.len() as u64);
            if set.len() as u64 > cap {
                overflowed = true;
                break;
            }
        }
        if overflowed {
            continue;
        }
        let final_level = pd.log2_nij();
        scan_level(
            &mut set.pairs,
            1 << final_level,
            pd.sub_iterations(final_level),
            |iter, b| pd.sub_assignment(&seg, final_level, iter, b),
            |iter, slot| pd.sub_test_id(&seg, final_level, iter, slot),
            outcomes,
            &mut checks,
            &mut harr,
        );
        // Map surviving singleton pairs back to global vertex ids.
        let mut edges = Vec::with_capacity(set.len());
        for (x, y) in set.pairs() {
            let gu = pd.vertex_at_position(&lm, t, x)?;
            let gv = pd.vertex_at_position(&lm, t, y)?;
            edges.push(pack_pair(gu.min(gv), gu.max(gv)));
        }
        return Ok(PairDecode {
            edges,
            pd_sizes,
            checks,
            screen_failed: false,
            overflowed: false,
        });
    }
    // every repetition overflowed; this pair contributes nothing
    Ok(PairDecode {
        edges: Vec::new(),
        pd_sizes,
        checks,
        screen_failed: false,
        overflowed: true,
    })
}
