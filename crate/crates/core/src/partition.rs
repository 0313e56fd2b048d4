//! Partitioned design: the vertex set is cut into `m_parts` equal parts,
//! and an independent sub-design is laid out for every part pair `(i, j)`,
//! every shared permutation `t`, and every repetition `r`.
//!
//! Each `(i, j, t, r)` segment starts with a base screen (`ceil(5 ln n)`
//! iterations of `ceil(C3 kbar_ij)` tests over the `g0` base-level blocks)
//! followed by the standard level design on the relabeled, permuted
//! subgraph from level `l0` up to `log2 n_ij`. One tuple of affine
//! permutations is drawn up front and reused for all pairs via the
//! labeling maps.

use rayon::prelude::*;

use crate::design::DesignParams;
use crate::error::{Error, Result};
use crate::field::{sample_perm_from, AffinePermutation, FieldSpec, LabelMap};
use crate::graph::{log2n, Graph};
use crate::outcomes::{level_edges, Outcomes};
use crate::rng::{domain, pack_liw, Stream};

/// Relative layout of one `(i, j, t, r)` segment.
#[derive(Clone, Debug)]
pub struct SegmentLayout {
    /// Iterations in the base screen.
    pub screen_iters: u64,
    /// Tests per screen iteration.
    pub screen_tests: u32,
    /// Iterations per non-final sub-design level.
    pub r: u64,
    /// Tests per sub-design iteration.
    pub t: u32,
    /// Rounds at the sub-design's final level.
    pub final_rounds: u64,
    /// Relative base offset of each level `l0 + idx`; the screen sits at 0.
    level_bases: Vec<u64>,
    /// Total tests in the segment.
    pub size: u64,
}

impl SegmentLayout {
    pub fn level_base(&self, l0: u32, level: u32) -> u64 {
        self.level_bases[(level - l0) as usize]
    }
}

/// The full non-adaptive partitioned design. Like [`crate::design::Design`]
/// this is a compact value; assignments are recomputed on demand.
#[derive(Clone, Debug)]
pub struct PartitionedDesign {
    n: u32,
    kbar: f64,
    q: f64,
    params: DesignParams,
    m_parts: u32,
    n_ij: u32,
    kbar_ij: f64,
    l0: u32,
    g0: u32,
    log2_nij: u32,
    field: FieldSpec,
    perms: Vec<AffinePermutation>,
    layout: SegmentLayout,
    per_pair: u64,
    total: u64,
    base_stream: Stream,
}

/// Handle for one `(i, j, t, r)` segment: global base plus derived streams.
#[derive(Clone, Copy, Debug)]
pub struct Segment {
    pub i: u32,
    pub j: u32,
    pub t: u32,
    pub r: u32,
    pub base: u64,
    screen_stream: Stream,
    assign_stream: Stream,
}

pub fn build_partitioned_design(
    n: u32,
    kbar: f64,
    params: &DesignParams,
) -> Result<PartitionedDesign> {
    PartitionedDesign::build(n, kbar, params)
}

impl PartitionedDesign {
    pub fn build(n: u32, kbar: f64, params: &DesignParams) -> Result<PartitionedDesign> {
        let lg = log2n(n)?;
        if n < 4 {
            return Err(Error::Config("partitioned design needs n >= 4".into()));
        }
        if !(kbar >= 1.0) {
            return Err(Error::Parameter(format!("need kbar >= 1, got {kbar}")));
        }
        params.validate()?;
        let gamma = params.gamma;
        // Equivalent sparsity exponent from kbar = n^(2 theta); gamma must
        // lie in (0, min(1, (1 - theta) / (3 theta))).
        let theta = kbar.ln() / (2.0 * (n as f64).ln());
        let gamma_cap = if theta > 0.0 {
            (1.0f64).min((1.0 - theta) / (3.0 * theta))
        } else {
            1.0
        };
        if !(gamma > 0.0 && gamma < gamma_cap) {
            return Err(Error::Config(format!(
                "gamma = {gamma} outside (0, {gamma_cap:.4}) for n = {n}, kbar = {kbar:.1} (theta ~ {theta:.3})"
            )));
        }
        if params.mode == crate::design::Mode::Theory {
            if params.n_perms as f64 <= 1.0 / gamma {
                return Err(Error::Config(format!(
                    "theory mode needs c > 1/gamma = {:.2}, got {}",
                    1.0 / gamma,
                    params.n_perms
                )));
            }
            if params.n_reps as f64 <= 2.0 / gamma {
                return Err(Error::Config(format!(
                    "theory mode needs c' > 2/gamma = {:.2}, got {}",
                    2.0 / gamma,
                    params.n_reps
                )));
            }
        }

        // Nearest power of two to kbar^((1 - gamma) / 2) that divides n,
        // clamped to [2, n/2]; ties resolve to the smaller power.
        let target = kbar.powf((1.0 - gamma) / 2.0);
        let lo = 1u32 << (target.log2().floor().max(0.0) as u32).min(lg - 1);
        let hi = (lo << 1).min(1 << (lg - 1));
        let m_parts = if (target - lo as f64).abs() <= (hi as f64 - target).abs() {
            lo
        } else {
            hi
        }
        .clamp(2, n / 2);

        let n_ij = 2 * n / m_parts;
        let log2_nij = log2n(n_ij)?;
        let pairs_n = n as f64 * (n as f64 - 1.0) / 2.0;
        let q = kbar / pairs_n;
        let kbar_ij = (q * n_ij as f64 * (n_ij as f64 - 1.0) / 2.0).max(1.0);

        let l0_raw = (kbar.powf(2.0 * gamma)).log2().ceil() as i64;
        if l0_raw > log2_nij as i64 {
            return Err(Error::Config(format!(
                "base level ceil(log2 kbar^(2 gamma)) = {l0_raw} exceeds log2 n_ij = {log2_nij}; \
                 gamma = {gamma} is too large for n = {n}, kbar = {kbar:.1}"
            )));
        }
        let l0 = l0_raw.max(1) as u32;
        let g0 = 1u32 << l0;

        let field = FieldSpec::new(log2_nij)?;
        let perm_stream = Stream::new(params.seed, domain::PERMUTATION);
        let perms: Vec<AffinePermutation> = (1..=params.n_perms as u64)
            .map(|t| sample_perm_from(field, &perm_stream.derive(t)))
            .collect();

        let screen_iters = (5.0 * (n as f64).ln()).ceil() as u64;
        let screen_tests = (params.c3 * kbar_ij).ceil() as u32;
        let sqrt_kij = kbar_ij.sqrt();
        let r = (params.c2 * sqrt_kij).ceil() as u64;
        let t = (params.c1 * sqrt_kij).ceil() as u32;
        let final_rounds = (params.cprime * (n_ij as f64).ln()).ceil().max(1.0) as u64;

        let mut level_bases = Vec::new();
        let mut off = screen_iters * screen_tests as u64;
        for level in l0..=log2_nij {
            level_bases.push(off);
            let iters = if level == log2_nij { final_rounds * r } else { r };
            off += iters * t as u64;
        }
        let layout = SegmentLayout {
            screen_iters,
            screen_tests,
            r,
            t,
            final_rounds,
            level_bases,
            size: off,
        };

        let n_pairs = m_parts as u64 * (m_parts as u64 - 1) / 2;
        let per_tr = layout.size;
        let per_pair = params.n_perms as u64 * params.n_reps as u64 * per_tr;
        let total = n_pairs * per_pair;

        Ok(PartitionedDesign {
            n,
            kbar,
            q,
            params: *params,
            m_parts,
            n_ij,
            kbar_ij,
            l0,
            g0,
            log2_nij,
            field,
            perms,
            layout,
            per_pair,
            total,
            base_stream: Stream::new(params.seed, domain::PARTITION),
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn kbar(&self) -> f64 {
        self.kbar
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    pub fn m_parts(&self) -> u32 {
        self.m_parts
    }

    pub fn n_ij(&self) -> u32 {
        self.n_ij
    }

    pub fn kbar_ij(&self) -> f64 {
        self.kbar_ij
    }

    pub fn l0(&self) -> u32 {
        self.l0
    }

    pub fn g0(&self) -> u32 {
        self.g0
    }

    pub fn log2_nij(&self) -> u32 {
        self.log2_nij
    }

    pub fn layout(&self) -> &SegmentLayout {
        &self.layout
    }

    pub fn perms(&self) -> &[AffinePermutation] {
        &self.perms
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn total_tests(&self) -> u64 {
        self.total
    }

    /// Vertices per part.
    pub fn part_size(&self) -> u32 {
        self.n / self.m_parts
    }

    /// Part (1-based) containing a global vertex.
    pub fn part_of(&self, vertex: u32) -> u32 {
        (vertex - 1) / self.part_size() + 1
    }

    pub fn label_map(&self, i: u32, j: u32) -> Result<LabelMap> {
        LabelMap::new(i, j, self.n, self.m_parts)
    }

    /// All part pairs `(i, j)` with `i < j` in lexicographic order.
    pub fn pairs(&self) -> Vec<(u32, u32)> {
        let m = self.m_parts;
        let mut v = Vec::with_capacity((m as usize * (m as usize - 1)) / 2);
        for i in 1..=m {
            for j in (i + 1)..=m {
                v.push((i, j));
            }
        }
        v
    }

    pub fn pair_index(&self, i: u32, j: u32) -> u64 {
        debug_assert!(1 <= i && i < j && j <= self.m_parts);
        let m = self.m_parts as u64;
        let i = i as u64;
        let j = j as u64;
        (i - 1) * m - i * (i - 1) / 2 + (j - i - 1)
    }

    /// Segment handle for `(i, j, t, r)`; `t` in `[1, n_perms]`, `r` in
    /// `[1, n_reps]`.
    pub fn segment(&self, i: u32, j: u32, t: u32, r: u32) -> Result<Segment> {
        if !(1 <= i && i < j && j <= self.m_parts) {
            return Err(Error::Range(format!("bad part pair ({i}, {j})")));
        }
        if t < 1 || t > self.params.n_perms || r < 1 || r > self.params.n_reps {
            return Err(Error::Range(format!("bad (t, r) = ({t}, {r})")));
        }
        let pair_idx = self.pair_index(i, j);
        let tr_idx = (t as u64 - 1) * self.params.n_reps as u64 + (r as u64 - 1);
        let base = pair_idx * self.per_pair + tr_idx * self.layout.size;
        let sub = self
            .base_stream
            .derive(((i as u64) << 32) | j as u64)
            .derive(((t as u64) << 32) | r as u64);
        Ok(Segment {
            i,
            j,
            t,
            r,
            base,
            screen_stream: sub.derive(0),
            assign_stream: sub.derive(1),
        })
    }

    /// Slot of `block` (1-based, over the `g0` base blocks) in screen
    /// iteration `iter`.
    #[inline(always)]
    pub fn screen_assignment(&self, seg: &Segment, iter: u64, block: u32) -> u32 {
        seg.screen_stream
            .uniform(pack_liw(0, iter, block - 1), self.layout.screen_tests)
    }

    #[inline(always)]
    pub fn screen_test_id(&self, seg: &Segment, iter: u64, slot: u32) -> u64 {
        seg.base + iter * self.layout.screen_tests as u64 + slot as u64
    }

    /// Slot of `block` at sub-design `level` in iteration `iter`.
    #[inline(always)]
    pub fn sub_assignment(&self, seg: &Segment, level: u32, iter: u64, block: u32) -> u32 {
        seg.assign_stream
            .uniform(pack_liw(level, iter, block - 1), self.layout.t)
    }

    #[inline(always)]
    pub fn sub_test_id(&self, seg: &Segment, level: u32, iter: u64, slot: u32) -> u64 {
        seg.base
            + self.layout.level_base(self.l0, level)
            + iter * self.layout.t as u64
            + slot as u64
    }

    /// Iterations at a sub-design level (rounds flattened at the final one).
    pub fn sub_iterations(&self, level: u32) -> u64 {
        if level == self.log2_nij {
            self.layout.final_rounds * self.layout.r
        } else {
            self.layout.r
        }
    }

    /// Position (local, unpermuted block coordinate in `[1, n_ij]`) of a
    /// global vertex under permutation `t` for pair `(i, j)`: the vertex
    /// sits in permuted block `U` iff its position lies in `U`.
    pub fn position_of(&self, lm: &LabelMap, t: u32, vertex: u32) -> Result<u32> {
        let local = lm.eval(vertex)? as u64;
        Ok(self.perm(t)?.eval_inverse(local)? as u32)
    }

    /// Global vertex occupying `position` under permutation `t` for `(i, j)`.
    pub fn vertex_at_position(&self, lm: &LabelMap, t: u32, position: u32) -> Result<u32> {
        let local = self.perm(t)?.eval(position as u64)?;
        lm.inverse(local as u32)
    }

    fn perm(&self, t: u32) -> Result<&AffinePermutation> {
        self.perms
            .get((t as usize).wrapping_sub(1))
            .ok_or_else(|| Error::Range(format!("permutation index {t} out of range")))
    }

    /// Expands a global test id into its vertex set.
    pub fn vertices_in_test(&self, test_id: u64) -> Result<Vec<u32>> {
        if test_id >= self.total {
            return Err(Error::Range(format!(
                "test id {test_id} outside [0, {})",
                self.total
            )));
        }
        let pair_idx = test_id / self.per_pair;
        let (mut i, mut j) = (0u32, 0u32);
        let mut acc = 0u64;
        'find: for a in 1..=self.m_parts {
            for b in (a + 1)..=self.m_parts {
                if acc == pair_idx {
                    i = a;
                    j = b;
                    break 'find;
                }
                acc += 1;
            }
        }
        let within_pair = test_id % self.per_pair;
        let tr_idx = within_pair / self.layout.size;
        let t = (tr_idx / self.params.n_reps as u64) as u32 + 1;
        let r = (tr_idx % self.params.n_reps as u64) as u32 + 1;
        let seg = self.segment(i, j, t, r)?;
        let off = within_pair % self.layout.size;
        let lm = self.label_map(i, j)?;

        let screen_size = self.layout.screen_iters * self.layout.screen_tests as u64;
        let (level, iter, slot, g) = if off < screen_size {
            let iter = off / self.layout.screen_tests as u64;
            let slot = (off % self.layout.screen_tests as u64) as u32;
            (self.l0, iter, slot, self.g0)
        } else {
            let mut level = self.log2_nij;
            for lv in (self.l0..=self.log2_nij).rev() {
                if self.layout.level_base(self.l0, lv) <= off {
                    level = lv;
                    break;
                }
            }
            let rel = off - self.layout.level_base(self.l0, level);
            let iter = rel / self.layout.t as u64;
            let slot = (rel % self.layout.t as u64) as u32;
            (level, iter, slot, 1u32 << level)
        };

        let block_size = self.n_ij / g;
        let in_screen = off < screen_size;
        let mut vertices = Vec::new();
        for block in 1..=g {
            let assigned = if in_screen {
                self.screen_assignment(&seg, iter, block)
            } else {
                self.sub_assignment(&seg, level, iter, block)
            };
            if assigned == slot {
                for pos in ((block - 1) * block_size + 1)..=(block * block_size) {
                    vertices.push(self.vertex_at_position(&lm, t, pos)?);
                }
            }
        }
        vertices.sort_unstable();
        Ok(vertices)
    }

    /// Per-(i, j, t) edge positions: each edge of the induced subgraph
    /// mapped to its unpermuted block coordinates.
    pub fn edge_positions(
        &self,
        graph: &Graph,
        i: u32,
        j: u32,
        t: u32,
    ) -> Result<Vec<(u32, u32)>> {
        let lm = self.label_map(i, j)?;
        let mut out = Vec::new();
        for &(u, v) in graph.edges() {
            let pu = self.part_of(u);
            let pv = self.part_of(v);
            let inside = (pu == i || pu == j) && (pv == i || pv == j);
            if inside {
                let a = self.position_of(&lm, t, u)?;
                let b = self.position_of(&lm, t, v)?;
                out.push((a.min(b), a.max(b)));
            }
        }
        Ok(out)
    }
}

/// Simulates all outcomes of a partitioned design. Part pairs are processed
/// in parallel; every pair touches a disjoint test id range.
pub fn simulate_partitioned(pdesign: &PartitionedDesign, graph: &Graph) -> Result<Outcomes> {
    if graph.n() != pdesign.n {
        return Err(Error::Parameter(format!(
            "graph has n = {}, design has n = {}",
            graph.n(),
            pdesign.n
        )));
    }
    let outcomes = Outcomes::new(pdesign.total);
    let pairs = pdesign.pairs();
    let results: Vec<Result<()>> = pairs
        .par_iter()
        .map(|&(i, j)| simulate_pair(pdesign, graph, i, j, &outcomes))
        .collect();
    for r in results {
        r?;
    }
    Ok(outcomes)
}

fn simulate_pair(
    pd: &PartitionedDesign,
    graph: &Graph,
    i: u32,
    j: u32,
    outcomes: &Outcomes,
) -> Result<()> {
    let n_ij = pd.n_ij;
    for t in 1..=pd.params.n_perms {
        let positions = pd.edge_positions(graph, i, j, t)?;
        if positions.is_empty() {
            continue;
        }
        // block structure per level, shared across repetitions; the screen
        // works over the level-l0 blocks (index 0)
        let level_structs: Vec<_> = (pd.l0..=pd.log2_nij)
            .map(|lv| level_edges_from_positions(&positions, lv, n_ij))
            .collect();
        let screen_le = &level_structs[0];
        for r in 1..=pd.params.n_reps {
            let seg = pd.segment(i, j, t, r)?;
            for iter in 0..pd.layout.screen_iters {
                for &b in &screen_le.defective {
                    let slot = pd.screen_assignment(&seg, iter, b);
                    outcomes.set(pd.screen_test_id(&seg, iter, slot));
                }
                for &(a, b) in &screen_le.cross {
                    let ha = pd.screen_assignment(&seg, iter, a);
                    if ha == pd.screen_assignment(&seg, iter, b) {
                        outcomes.set(pd.screen_test_id(&seg, iter, ha));
                    }
                }
            }
            for (idx, lv) in (pd.l0..=pd.log2_nij).enumerate() {
                let le = &level_structs[idx];
                if le.defective.is_empty() && le.cross.is_empty() {
                    continue;
                }
                for iter in 0..pd.sub_iterations(lv) {
                    for &b in &le.defective {
                        let slot = pd.sub_assignment(&seg, lv, iter, b);
                        outcomes.set(pd.sub_test_id(&seg, lv, iter, slot));
                    }
                    for &(a, b) in &le.cross {
                        let ha = pd.sub_assignment(&seg, lv, iter, a);
                        if ha == pd.sub_assignment(&seg, lv, iter, b) {
                            outcomes.set(pd.sub_test_id(&seg, lv, iter, ha));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn level_edges_from_positions(
    positions: &[(u32, u32)],
    level: u32,
    n_ij: u32,
) -> crate::outcomes::LevelEdges {
    level_edges(positions, level, n_ij)
}
