//! Non-adaptive edge-detecting test designs and sublinear-time decoders for
//! learning sparse Erdős–Rényi graphs.
//!
//! The pipeline: sample a hidden graph, lay out a seeded non-adaptive test
//! design over a binary hierarchy of vertex blocks, simulate the
//! edge-detecting outcomes (a test is positive iff it contains both
//! endpoints of some edge), and decode coarse-to-fine by discarding block
//! pairs that appear together in a negative test. A partitioned variant
//! cuts the vertex set into parts and runs the same machinery per part pair
//! under a shared tuple of affine permutations over GF(2^m), which keeps
//! per-pair candidate sets small and the decoding cost close to linear in
//! the expected edge count.
//!
//! Everything is deterministic given seeds: graphs, designs, outcomes,
//! decodes, and Monte-Carlo trial records.

pub mod decode;
pub mod design;
pub mod error;
pub mod field;
pub mod graph;
pub mod harness;
pub mod io;
pub mod oracle;
pub mod outcomes;
pub mod partition;
pub mod rng;

pub use decode::{
    decode_basic, decode_partitioned, decode_with_tables, max_ind_size, pair_cleared,
    precompute_index_tables, screen_permutation, split_pair, DecodeResult, DecodeStatus,
    IndexTables, PdSet,
};
pub use design::{build_design, count_tests, Design, DesignParams, Mode, TestCount};
pub use error::{Error, Result};
pub use field::{
    independence_census, perm_from_string, perm_to_string, sample_perm, AffinePermutation,
    CensusTable, FieldSpec, LabelMap,
};
pub use graph::{
    block_of, level_stats, pad_to_power_of_two, sample_er_graph, typicality_check, Graph,
    LevelStats, SparsityParams, TypicalityReport,
};
pub use harness::{
    calibrate, fit_scaling, run_trial, sweep, write_csv, Algorithm, CalibrationOutcome,
    FitResult, SweepRow, TrialConfig, TrialRecord, CSV_HEADER,
};
pub use oracle::{comp_decode, naive_reference_decode};
pub use outcomes::{simulate_outcomes, simulate_outcomes_naive, Outcomes};
pub use partition::{build_partitioned_design, simulate_partitioned, PartitionedDesign};
