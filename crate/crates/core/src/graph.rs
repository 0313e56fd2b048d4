//! Erdős–Rényi graph sampling, the level/block hierarchy, block-graph
//! statistics, and the typicality checker.
//!
//! Vertices are 1-based ids in `[1, n]`. At level `l` the vertex set is cut
//! into `g = 2^l` contiguous blocks of `n / g` vertices each; block `i` at
//! level `l` splits into blocks `2i-1` and `2i` at level `l+1`. A block is
//! *defective* when it contains an edge; a block pair is *defective* when
//! the union of the two blocks contains an edge.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::rng::{domain, Coin, Stream};

/// Packs an ordered pair `(u, v)` with `u < v` into one u64.
#[inline(always)]
pub(crate) fn pack_pair(u: u32, v: u32) -> u64 {
    debug_assert!(u < v);
    ((u as u64) << 32) | v as u64
}

#[inline(always)]
pub(crate) fn unpack_pair(p: u64) -> (u32, u32) {
    ((p >> 32) as u32, p as u32)
}

/// Rank of the unordered pair `(u, v)`, `1 <= u < v`, in the enumeration
/// `(1,2), (1,3), (2,3), (1,4), ...` (pairs grouped by their larger
/// endpoint). Edge draws are indexed by this rank, so replaying any single
/// pair never requires generating the others.
#[inline(always)]
pub fn pair_rank(u: u32, v: u32) -> u64 {
    debug_assert!(0 < u && u < v);
    let v = v as u64;
    let u = u as u64;
    (v - 1) * (v - 2) / 2 + (u - 1)
}

/// An undirected graph on `[1, n]` with a canonical sorted edge list and a
/// hash-set view for O(1) membership.
#[derive(Clone, Debug)]
pub struct Graph {
    n: u32,
    edges: Vec<(u32, u32)>,
    edge_set: HashSet<u64>,
}

impl Graph {
    /// Builds a graph, canonicalizing edge endpoint order and sorting the
    /// edge list. Rejects self-loops, duplicates, and out-of-range ids.
    pub fn new(n: u32, edges: Vec<(u32, u32)>) -> Result<Graph> {
        if n < 1 {
            return Err(Error::Parameter("graph needs at least one vertex".into()));
        }
        let mut canon: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(Error::Parameter(format!("self-loop at vertex {a}")));
            }
            if a < 1 || b < 1 || a > n || b > n {
                return Err(Error::Parameter(format!(
                    "edge ({a}, {b}) outside [1, {n}]"
                )));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        let mut edge_set = HashSet::with_capacity(canon.len());
        for &(u, v) in &canon {
            if !edge_set.insert(pack_pair(u, v)) {
                return Err(Error::Parameter(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Graph {
            n,
            edges: canon,
            edge_set,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Edge count `k`.
    pub fn k(&self) -> usize {
        self.edges.len()
    }

    /// Sorted canonical edge list.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn contains_edge(&self, u: u32, v: u32) -> bool {
        if u == v {
            return false;
        }
        self.edge_set.contains(&pack_pair(u.min(v), u.max(v)))
    }

    /// Per-vertex degrees, indexed 1..=n (slot 0 unused).
    pub fn degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.n as usize + 1];
        for &(u, v) in &self.edges {
            d[u as usize] += 1;
            d[v as usize] += 1;
        }
        d
    }
}

/// Samples `ER(n, q)`: every pair `(u, v)` with `u < v` is included by an
/// independent Bernoulli(q) draw from the seeded stream, indexed by
/// [`pair_rank`]. Identical `(n, q, seed)` always yields the same graph.
pub fn sample_er_graph(n: u32, q: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::Parameter(format!("need n >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Parameter(format!("need q in [0, 1], got {q}")));
    }
    let stream = Stream::new(seed, domain::GRAPH_EDGES);
    let coin = Coin::new(q);
    let mut edges = Vec::new();
    let mut rank: u64 = 0;
    for v in 2..=n {
        for u in 1..v {
            if coin.flip(&stream, rank) {
                edges.push((u, v));
            }
            rank += 1;
        }
    }
    Graph::new(n, edges)
}

/// Pads the vertex set with isolated dummy vertices up to the next power of
/// two. No-op when `n` is already a power of two.
pub fn pad_to_power_of_two(graph: &Graph) -> Graph {
    let n = graph.n.next_power_of_two();
    Graph {
        n,
        edges: graph.edges.clone(),
        edge_set: graph.edge_set.clone(),
    }
}

/// log2 of a power-of-two vertex count.
pub fn log2n(n: u32) -> Result<u32> {
    if !n.is_power_of_two() {
        return Err(Error::Parameter(format!("n = {n} is not a power of two")));
    }
    Ok(n.trailing_zeros())
}

/// Block id (1-based, in `[1, 2^level]`) containing `vertex` when `[1, n]`
/// is split into `2^level` contiguous equal blocks: `ceil(vertex * g / n)`.
#[inline(always)]
pub fn block_of(vertex: u32, level: u32, n: u32) -> Result<u32> {
    let lg = log2n(n)?;
    if level > lg {
        return Err(Error::Range(format!("level {level} > log2 n = {lg}")));
    }
    if vertex < 1 || vertex > n {
        return Err(Error::Range(format!("vertex {vertex} outside [1, {n}]")));
    }
    Ok(block_of_unchecked(vertex, level, n))
}

#[inline(always)]
pub(crate) fn block_of_unchecked(vertex: u32, level: u32, n: u32) -> u32 {
    let g = 1u64 << level;
    ((vertex as u64 * g + n as u64 - 1) / n as u64) as u32
}

/// Per-level block statistics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelStats {
    pub level: u32,
    /// Number of blocks `g = 2^level`.
    pub g: u32,
    /// Number of defective blocks (blocks with an internal edge).
    pub nu_g: u32,
    /// Block-graph edge count: pairs `(i, j)` whose union contains an edge.
    pub eg_count: u64,
    /// Maximum block-graph degree over the non-defective blocks.
    pub dmax_nondef: u32,
}

/// Computes the level-`level` block statistics of `graph`.
///
/// A pair `(i, j)` is a block-graph edge iff the union of blocks `i` and `j`
/// contains an edge, so a defective block is adjacent to every other block.
pub fn level_stats(graph: &Graph, level: u32) -> Result<LevelStats> {
    let n = graph.n;
    let lg = log2n(n)?;
    if level > lg {
        return Err(Error::Range(format!("level {level} > log2 n = {lg}")));
    }
    let g = 1u32 << level;

    let mut defective = vec![false; g as usize + 1];
    let mut cross: HashSet<u64> = HashSet::new();
    for &(u, v) in &graph.edges {
        let bu = block_of_unchecked(u, level, n);
        let bv = block_of_unchecked(v, level, n);
        if bu == bv {
            defective[bu as usize] = true;
        } else {
            cross.insert(pack_pair(bu.min(bv), bu.max(bv)));
        }
    }
    let nu = defective.iter().filter(|&&d| d).count() as u32;

    // Pairs with a defective endpoint are all block-graph edges; the rest
    // are exactly the cross pairs between two non-defective blocks.
    let mut nondef_deg = vec![0u32; g as usize + 1];
    let mut cross_nondef: u64 = 0;
    for &p in &cross {
        let (a, b) = unpack_pair(p);
        if !defective[a as usize] && !defective[b as usize] {
            cross_nondef += 1;
            nondef_deg[a as usize] += 1;
            nondef_deg[b as usize] += 1;
        }
    }
    let nu64 = nu as u64;
    let g64 = g as u64;
    let eg_count = nu64 * nu64.saturating_sub(1) / 2 + nu64 * (g64 - nu64) + cross_nondef;

    let mut dmax = 0u32;
    for b in 1..=g {
        if !defective[b as usize] {
            dmax = dmax.max(nu + nondef_deg[b as usize]);
        }
    }

    Ok(LevelStats {
        level,
        g,
        nu_g: nu,
        eg_count,
        dmax_nondef: dmax,
    })
}

/// Sparsity parameterization: `q = kbar / C(n, 2)` with `kbar = n^(2 theta)`
/// when derived from `theta`.
#[derive(Clone, Copy, Debug)]
pub struct SparsityParams {
    pub theta: f64,
    pub n: u32,
    pub q: f64,
    /// Expected edge count `q * n (n-1) / 2`.
    pub kbar: f64,
}

impl SparsityParams {
    /// From a sparsity exponent: `kbar = n^(2 theta)`, `q = min(1, kbar / C(n,2))`.
    pub fn from_theta(n: u32, theta: f64) -> Result<SparsityParams> {
        if n < 2 {
            return Err(Error::Parameter(format!("need n >= 2, got {n}")));
        }
        if !(0.0 < theta && theta < 1.0) {
            return Err(Error::Parameter(format!(
                "need theta in (0, 1), got {theta}"
            )));
        }
        let pairs = n as f64 * (n as f64 - 1.0) / 2.0;
        let target = (n as f64).powf(2.0 * theta);
        let q = (target / pairs).min(1.0);
        Ok(SparsityParams {
            theta,
            n,
            q,
            kbar: q * pairs,
        })
    }

    /// From an explicit edge probability; the equivalent `theta` is derived
    /// from `kbar = n^(2 theta)` for bound-branch selection.
    pub fn from_q(n: u32, q: f64) -> Result<SparsityParams> {
        if n < 2 {
            return Err(Error::Parameter(format!("need n >= 2, got {n}")));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Parameter(format!("need q in [0, 1], got {q}")));
        }
        let pairs = n as f64 * (n as f64 - 1.0) / 2.0;
        let kbar = q * pairs;
        let theta = if kbar > 0.0 {
            (kbar.ln() / (2.0 * (n as f64).ln())).clamp(0.0, 1.0)
        } else {
            0.0
        };
        Ok(SparsityParams { theta, n, q, kbar })
    }
}

/// Smallest level index `l >= 0` such that `2^l >= sqrt(kbar)`,
/// i.e. `ceil(log2 sqrt(kbar))`.
pub fn ceil_log2_sqrt(kbar: f64) -> u32 {
    let mut l = 0u32;
    while 4f64.powi(l as i32) < kbar {
        l += 1;
    }
    l
}

/// One level's typicality verdict.
#[derive(Clone, Debug)]
pub struct LevelCheck {
    pub level: u32,
    pub eg: u64,
    pub eg_bound: f64,
    pub nu: u32,
    pub nu_bound: f64,
    pub dmax: u32,
    pub d_bound: f64,
    pub pass: bool,
}

/// Result of the typicality check: the global edge-count condition plus the
/// per-level bounds on `|E_g|`, `nu_g`, and `d(G_g)`.
#[derive(Clone, Debug)]
pub struct TypicalityReport {
    pub eps: f64,
    pub k: usize,
    pub kbar: f64,
    pub cond_edge_count: bool,
    pub levels: Vec<LevelCheck>,
    /// Set when `kbar < 1` or the level range is empty; the per-level
    /// conditions are then vacuous rather than failing.
    pub degenerate: bool,
    pub overall: bool,
}

/// Checks graph typicality at tolerance `eps`.
///
/// The edge count must satisfy `(1 - eps) kbar <= k <= (1 + eps) kbar`, and
/// for every level `l` in `ceil(log2 sqrt(kbar)) ..= log2 n` the block
/// statistics must respect the sparsity-regime bounds (`theta > 1/2` vs
/// `theta <= 1/2` branch). Logs in the bound formulas are natural logs.
pub fn typicality_check(graph: &Graph, params: &SparsityParams, eps: f64) -> Result<TypicalityReport> {
    let lg = log2n(graph.n)?;
    if params.n != graph.n {
        return Err(Error::Parameter(format!(
            "params.n = {} but graph.n = {}",
            params.n, graph.n
        )));
    }
    let kbar = params.kbar;
    let k = graph.k();
    let cond_edge_count = (1.0 - eps) * kbar <= k as f64 && (k as f64) <= (1.0 + eps) * kbar;

    let l_min = ceil_log2_sqrt(kbar);
    let degenerate = kbar < 1.0 || l_min > lg;
    let dense = params.theta > 0.5;

    let mut levels = Vec::new();
    if !degenerate {
        for level in l_min..=lg {
            let g = 2f64.powi(level as i32);
            let stats = level_stats(graph, level)?;
            let eg_bound = if dense {
                4.0 * kbar
            } else {
                2.0 * kbar * kbar.ln().powi(2)
            };
            let nu_bound = if dense { 2.0 * kbar / g } else { 2.0 * kbar.sqrt() };
            let d_bound = if dense { 10.0 * kbar / g } else { 8.0 * kbar.sqrt() };
            let pass = (stats.eg_count as f64) <= eg_bound
                && (stats.nu_g as f64) <= nu_bound
                && (stats.dmax_nondef as f64) <= d_bound;
            levels.push(LevelCheck {
                level,
                eg: stats.eg_count,
                eg_bound,
                nu: stats.nu_g,
                nu_bound,
                dmax: stats.dmax_nondef,
                d_bound,
                pass,
            });
        }
    }
    let overall = cond_edge_count && levels.iter().all(|l| l.pass);
    Ok(TypicalityReport {
        eps,
        k,
        kbar,
        cond_edge_count,
        levels,
        degenerate,
        overall,
    })
}
