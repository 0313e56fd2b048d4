//! Non-adaptive test design over the block hierarchy.
//!
//! A design is a compact value: parameters plus a seed. Slot assignments are
//! recomputed on demand from the counter-based stream, so a design with
//! millions of tests costs a few dozen bytes and any `(level, iteration,
//! block)` lookup is O(1).
//!
//! Levels run from `l_min = clamp(ceil(log2 sqrt(kbar)), 1, log2 n)` to
//! `log2 n`. Every non-final level has `R = ceil(C2 sqrt(kbar))` iterations
//! of `T = ceil(C1 sqrt(kbar))` tests, with each block assigned uniformly to
//! one test slot per iteration. The final level (singleton blocks) repeats
//! the iteration structure for `ceil(Cprime ln n)` rounds.

use crate::error::{Error, Result};
use crate::graph::{ceil_log2_sqrt, log2n};
use crate::rng::{domain, pack_liw, Stream};

/// Constant mode: `Theory` enforces the inequalities the analysis needs;
/// `Calibrated` permits the small constants used for desk-scale runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Theory,
    Calibrated,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Theory => "theory",
            Mode::Calibrated => "calibrated",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "theory" => Ok(Mode::Theory),
            "calibrated" => Ok(Mode::Calibrated),
            other => Err(Error::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

/// All design constants plus the seed.
///
/// `c1`, `c2`, `cprime` drive the per-level structure; `c3` sizes the
/// partitioned base screen; `n_perms` and `n_reps` count the shared
/// permutations and independent design repetitions; `gamma` is the
/// partition exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignParams {
    pub c1: f64,
    pub c2: f64,
    pub cprime: f64,
    pub c3: f64,
    pub n_perms: u32,
    pub n_reps: u32,
    pub gamma: f64,
    pub seed: u64,
    pub mode: Mode,
}

impl DesignParams {
    /// Desk-scale defaults; the committed calibration may override these.
    pub fn calibrated(seed: u64) -> DesignParams {
        DesignParams {
            c1: 3.0,
            c2: 9.0,
            cprime: 2.0,
            c3: 9.0,
            n_perms: 3,
            n_reps: 3,
            gamma: 0.3,
            seed,
            mode: Mode::Calibrated,
        }
    }

    /// Smallest constants satisfying the theory-mode inequalities
    /// (C1 > 27, C2 = C1^2, C' > 3, C3 >= 3e), with `n_perms`/`n_reps`
    /// sized for the given gamma.
    pub fn theory(gamma: f64, seed: u64) -> DesignParams {
        DesignParams {
            c1: 28.0,
            c2: 28.0 * 28.0,
            cprime: 4.0,
            c3: 3.0 * std::f64::consts::E,
            n_perms: (1.0 / gamma).floor() as u32 + 1,
            n_reps: (2.0 / gamma).floor() as u32 + 1,
            gamma,
            seed,
            mode: Mode::Theory,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> DesignParams {
        self.seed = seed;
        self
    }

    /// Validates the mode-independent sanity constraints and, in theory
    /// mode, the inequalities on C1, C2, C', C3. The gamma-dependent
    /// constraints on `n_perms`/`n_reps` are checked when a partitioned
    /// design is built (gamma is unused otherwise).
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 >= 1.0) {
            return Err(Error::Config(format!("need C1 >= 1, got {}", self.c1)));
        }
        if !(self.c2 >= 1.0) || !(self.cprime > 0.0) || !(self.c3 >= 1.0) {
            return Err(Error::Config("C2, C', C3 must be positive".into()));
        }
        if self.n_perms < 1 || self.n_reps < 1 {
            return Err(Error::Config("need at least one permutation and one repetition".into()));
        }
        if self.mode == Mode::Theory {
            if !(self.c1 > 27.0) {
                return Err(Error::Config(format!(
                    "theory mode needs C1 > 27, got {}",
                    self.c1
                )));
            }
            if (self.c2 - self.c1 * self.c1).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "theory mode needs C2 = C1^2, got C2 = {}",
                    self.c2
                )));
            }
            if !(self.cprime > 3.0) {
                return Err(Error::Config(format!(
                    "theory mode needs C' > 3, got {}",
                    self.cprime
                )));
            }
            if !(self.c3 >= 3.0 * std::f64::consts::E) {
                return Err(Error::Config(format!(
                    "theory mode needs C3 >= 3e, got {}",
                    self.c3
                )));
            }
        }
        Ok(())
    }
}

/// Closed-form test counts per level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestCount {
    pub l_min: u32,
    /// Iterations per non-final level.
    pub r: u64,
    /// Tests per iteration.
    pub t: u32,
    /// Rounds at the final level.
    pub final_rounds: u64,
    /// `(level, tests)` for every level from `l_min` to `log2 n`.
    pub per_level: Vec<(u32, u64)>,
    pub total: u64,
}

/// Evaluates the closed form: `R * T` tests at each level `l_min .. log2 n - 1`
/// and `ceil(Cprime ln n)` rounds of `R * T` at the final level. Round counts
/// use the natural logarithm, rounded up; all arithmetic is exact once `R`,
/// `T`, and the round count are fixed.
pub fn count_tests(n: u32, kbar: f64, params: &DesignParams) -> Result<TestCount> {
    let lg = log2n(n)?;
    if !(kbar >= 1.0) {
        return Err(Error::Parameter(format!("need kbar >= 1, got {kbar}")));
    }
    params.validate()?;
    let sqrt_kbar = kbar.sqrt();
    let r = (params.c2 * sqrt_kbar).ceil() as u64;
    let t = (params.c1 * sqrt_kbar).ceil() as u32;
    let l_min = ceil_log2_sqrt(kbar).clamp(1, lg);
    let final_rounds = (params.cprime * (n as f64).ln()).ceil().max(1.0) as u64;
    let mut per_level = Vec::new();
    let mut total = 0u64;
    for level in l_min..lg {
        let tests = r * t as u64;
        per_level.push((level, tests));
        total += tests;
    }
    let final_tests = final_rounds * r * t as u64;
    per_level.push((lg, final_tests));
    total += final_tests;
    Ok(TestCount {
        l_min,
        r,
        t,
        final_rounds,
        per_level,
        total,
    })
}

/// Per-level layout inside the global test index space.
#[derive(Clone, Debug)]
pub struct LevelLayout {
    pub level: u32,
    /// Number of blocks `2^level`.
    pub g: u32,
    /// Iterations at this level (includes all rounds at the final level).
    pub iters: u64,
    /// First global test id of this level.
    pub base: u64,
}

/// A built design: parameters, seed, and the level layout. Assignments are
/// recomputed on demand; identical inputs give identical designs.
#[derive(Clone, Debug)]
pub struct Design {
    n: u32,
    kbar: f64,
    params: DesignParams,
    l_min: u32,
    log2_n: u32,
    r: u64,
    t: u32,
    final_rounds: u64,
    levels: Vec<LevelLayout>,
    total: u64,
    stream: Stream,
}

/// Builds the design for `n` vertices and expected edge count `kbar`.
pub fn build_design(n: u32, kbar: f64, params: &DesignParams) -> Result<Design> {
    Design::build(n, kbar, params)
}

impl Design {
    pub fn build(n: u32, kbar: f64, params: &DesignParams) -> Result<Design> {
        let counts = count_tests(n, kbar, params)?;
        let lg = log2n(n)?;
        let mut levels = Vec::new();
        let mut base = 0u64;
        for level in counts.l_min..=lg {
            let iters = if level == lg {
                counts.final_rounds * counts.r
            } else {
                counts.r
            };
            levels.push(LevelLayout {
                level,
                g: 1u32 << level,
                iters,
                base,
            });
            base += iters * counts.t as u64;
        }
        debug_assert_eq!(base, counts.total);
        Ok(Design {
            n,
            kbar,
            params: *params,
            l_min: counts.l_min,
            log2_n: lg,
            r: counts.r,
            t: counts.t,
            final_rounds: counts.final_rounds,
            levels,
            total: counts.total,
            stream: Stream::new(params.seed, domain::DESIGN_ASSIGN),
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn kbar(&self) -> f64 {
        self.kbar
    }

    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    pub fn l_min(&self) -> u32 {
        self.l_min
    }

    pub fn log2_n(&self) -> u32 {
        self.log2_n
    }

    /// Iterations per non-final level.
    pub fn r(&self) -> u64 {
        self.r
    }

    /// Tests per iteration.
    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn final_rounds(&self) -> u64 {
        self.final_rounds
    }

    pub fn total_tests(&self) -> u64 {
        self.total
    }

    pub fn levels(&self) -> &[LevelLayout] {
        &self.levels
    }

    pub fn level_layout(&self, level: u32) -> Result<&LevelLayout> {
        self.levels
            .iter()
            .find(|l| l.level == level)
            .ok_or_else(|| Error::Range(format!("level {level} not in design")))
    }

    /// Iterations at `level` (all rounds flattened at the final level).
    pub fn iterations_at(&self, level: u32) -> Result<u64> {
        Ok(self.level_layout(level)?.iters)
    }

    /// Slot (0-based, `< t()`) that `block` occupies at `(level, iteration)`.
    #[inline(always)]
    pub fn assignment(&self, level: u32, iteration: u64, block: u32) -> u32 {
        self.stream
            .uniform(pack_liw(level, iteration, block - 1), self.t)
    }

    /// Global test id for `(level, iteration, slot)`.
    #[inline(always)]
    pub fn test_id(&self, base: u64, iteration: u64, slot: u32) -> u64 {
        base + iteration * self.t as u64 + slot as u64
    }

    /// The global test ids containing `block` at `level`, one per iteration.
    pub fn tests_of_block(&self, level: u32, block: u32) -> Result<Vec<u64>> {
        let layout = self.level_layout(level)?;
        if block < 1 || block > layout.g {
            return Err(Error::Range(format!(
                "block {block} outside [1, {}]",
                layout.g
            )));
        }
        Ok((0..layout.iters)
            .map(|it| self.test_id(layout.base, it, self.assignment(level, it, block)))
            .collect())
    }

    /// Expands a global test id into its vertex set (union of member blocks).
    pub fn vertices_in_test(&self, test_id: u64) -> Result<Vec<u32>> {
        if test_id >= self.total {
            return Err(Error::Range(format!(
                "test id {test_id} outside [0, {})",
                self.total
            )));
        }
        let layout = self
            .levels
            .iter()
            .rev()
            .find(|l| l.base <= test_id)
            .expect("level bases start at 0");
        let offset = test_id - layout.base;
        let iteration = offset / self.t as u64;
        let slot = (offset % self.t as u64) as u32;
        let block_size = self.n / layout.g;
        let mut vertices = Vec::new();
        for block in 1..=layout.g {
            if self.assignment(layout.level, iteration, block) == slot {
                let start = (block - 1) * block_size + 1;
                vertices.extend(start..start + block_size);
            }
        }
        Ok(vertices)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c1: f64, c2: f64, cprime: f64, seed: u64) -> DesignParams {
        DesignParams {
            c1,
            c2,
            cprime,
            c3: 9.0,
            n_perms: 3,
            n_reps: 3,
            gamma: 0.3,
            seed,
            mode: Mode::Calibrated,
        }
    }

    #[test]
    fn closed_form_matches_hand_computation() {
        // n = 16, kbar = 4, C1 = 2, C2 = 4, C' = 1:
        // l_min = 1, R = 8, T = 4; levels 1..3 give 3 * 32 = 96;
        // final level: ceil(ln 16) = 3 rounds of 32 = 96; total 192.
        let c = count_tests(16, 4.0, &params(2.0, 4.0, 1.0, 0)).unwrap();
        assert_eq!(c.l_min, 1);
        assert_eq!(c.r, 8);
        assert_eq!(c.t, 4);
        assert_eq!(c.final_rounds, 3);
        assert_eq!(c.per_level, vec![(1, 32), (2, 32), (3, 32), (4, 96)]);
        assert_eq!(c.total, 192);
    }

    #[test]
    fn kbar_one_gives_t_c1_and_r_c2() {
        let c = count_tests(16, 1.0, &params(5.0, 7.0, 1.0, 0)).unwrap();
        assert_eq!(c.t, 5);
        assert_eq!(c.r, 7);
        assert_eq!(c.l_min, 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(count_tests(12, 4.0, &params(2.0, 4.0, 1.0, 0)).is_err());
        assert!(count_tests(16, 0.5, &params(2.0, 4.0, 1.0, 0)).is_err());
        let mut bad = params(0.5, 4.0, 1.0, 0);
        bad.c1 = 0.5;
        assert!(count_tests(16, 4.0, &bad).is_err());
    }

    #[test]
    fn theory_mode_enforces_constant_inequalities() {
        let mut p = DesignParams::theory(0.3, 1);
        assert!(p.validate().is_ok());
        p.c1 = 27.0;
        assert!(p.validate().is_err());
        let mut p = DesignParams::theory(0.3, 1);
        p.c2 = 700.0;
        assert!(p.validate().is_err());
        let mut p = DesignParams::theory(0.3, 1);
        p.cprime = 3.0;
        assert!(p.validate().is_err());
        let mut p = DesignParams::theory(0.3, 1);
        p.c3 = 8.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn design_total_matches_count_tests_and_level_bases_are_contiguous() {
        for (n, kbar) in [(16u32, 4.0f64), (64, 8.0), (256, 33.7), (1024, 1024.0)] {
            let p = params(3.0, 9.0, 2.0, 7);
            let d = Design::build(n, kbar, &p).unwrap();
            let c = count_tests(n, kbar, &p).unwrap();
            assert_eq!(d.total_tests(), c.total);
            let mut base = 0u64;
            for layout in d.levels() {
                assert_eq!(layout.base, base);
                base += layout.iters * d.t() as u64;
            }
            assert_eq!(base, d.total_tests());
        }
    }

    #[test]
    fn every_block_gets_exactly_one_slot_per_iteration() {
        let d = Design::build(64, 8.0, &params(3.0, 9.0, 2.0, 3)).unwrap();
        for layout in d.levels() {
            for it in [0, layout.iters / 2, layout.iters - 1] {
                for block in 1..=layout.g {
                    let slot = d.assignment(layout.level, it, block);
                    assert!(slot < d.t());
                }
            }
        }
    }

    #[test]
    fn same_seed_gives_identical_assignments() {
        let p = params(3.0, 9.0, 2.0, 99);
        let a = Design::build(64, 8.0, &p).unwrap();
        let b = Design::build(64, 8.0, &p).unwrap();
        for layout in a.levels() {
            for it in 0..layout.iters.min(8) {
                for block in 1..=layout.g {
                    assert_eq!(
                        a.assignment(layout.level, it, block),
                        b.assignment(layout.level, it, block)
                    );
                }
            }
        }
    }

    #[test]
    fn slot_histogram_is_uniform_chi_square() {
        // One block's slot across 10^4 iterations at a fixed level, tested
        // against the uniform distribution over T slots at the 99% level.
        // Wilson-Hilferty approximation of the chi-square quantile.
        // kbar = 1 with C2 = 10^4 gives a level with exactly 10^4 iterations.
        let p = params(9.0, 10_000.0, 1.0, 123);
        let d = Design::build(16, 1.0, &p).unwrap();
        let t = d.t() as usize;
        assert_eq!(t, 9);
        let iters = d.iterations_at(d.l_min()).unwrap();
        assert_eq!(iters, 10_000);
        let mut counts = vec![0u64; t];
        for it in 0..iters {
            counts[d.assignment(d.l_min(), it, 1) as usize] += 1;
        }
        let expected = iters as f64 / t as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let diff = c as f64 - expected;
                diff * diff / expected
            })
            .sum();
        let dof = (t - 1) as f64;
        let z99 = 2.326_347_874_040_841;
        let crit = dof * (1.0 - 2.0 / (9.0 * dof) + z99 * (2.0 / (9.0 * dof)).sqrt()).powi(3);
        assert!(chi2 < crit, "chi2 = {chi2}, crit = {crit}");
    }

    #[test]
    fn tests_of_block_has_r_entries_and_round_trips_through_expansion() {
        let d = Design::build(32, 6.0, &params(2.0, 4.0, 1.0, 5)).unwrap();
        for layout in d.levels() {
            let ids = d.tests_of_block(layout.level, 1).unwrap();
            assert_eq!(ids.len() as u64, layout.iters);
            let block_size = d.n() / layout.g;
            for &id in ids.iter().take(4) {
                let vs = d.vertices_in_test(id).unwrap();
                // block 1 = vertices 1..=block_size must all be present
                for v in 1..=block_size {
                    assert!(vs.contains(&v), "test {id} missing vertex {v}");
                }
            }
        }
    }

    #[test]
    fn final_level_tests_contain_only_singletons() {
        let d = Design::build(16, 4.0, &params(2.0, 4.0, 1.0, 11)).unwrap();
        let final_layout = d.levels().last().unwrap().clone();
        assert_eq!(final_layout.g, 16);
        for id in final_layout.base..d.total_tests() {
            let vs = d.vertices_in_test(id).unwrap();
            // each member block is one vertex; expansion is just the members
            let mut sorted = vs.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), vs.len());
        }
    }

    #[test]
    fn vertices_in_test_rejects_out_of_range_ids() {
        let d = Design::build(16, 4.0, &params(2.0, 4.0, 1.0, 0)).unwrap();
        assert!(d.vertices_in_test(d.total_tests()).is_err());
    }

    #[test]
    fn ratio_total_over_kbar_log2n_is_bounded_across_sweep() {
        // 50 (n, theta) combos: total / (kbar * log2 n) stays under one
        // constant for fixed design constants.
        let p = params(3.0, 9.0, 2.0, 0);
        let mut max_ratio = 0f64;
        let mut combos = 0;
        for log_n in [6u32, 7, 8, 9, 10, 11, 12, 13, 14, 15] {
            let n = 1u32 << log_n;
            for theta in [0.3, 0.4, 0.5, 0.6, 0.7] {
                let kbar = (n as f64).powf(2.0 * theta).max(1.0);
                let c = count_tests(n, kbar, &p).unwrap();
                let ratio = c.total as f64 / (kbar * log_n as f64);
                max_ratio = max_ratio.max(ratio);
                combos += 1;
            }
        }
        assert_eq!(combos, 50);
        // R*T <= C1 C2 (sqrt(kbar)+1)^2 per level; the constant below is a
        // comfortable desk-scale envelope for C1 C2 = 27 with ln-based rounds.
        assert!(
            max_ratio < 220.0,
            "total/(kbar log2 n) reached {max_ratio}"
        );
    }
}
