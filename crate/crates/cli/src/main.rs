//! Command-line front end: graph generation, design construction, outcome
//! simulation, decoding, Monte-Carlo trials, sweeps with scaling fits,
//! constant calibration, permutation censuses, and design expansion.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use edgeprobe::harness::fit_rows;
use edgeprobe::io::{self, AnyDesign};
use edgeprobe::{
    calibrate, count_tests, decode_basic, decode_partitioned, decode_with_tables,
    independence_census, precompute_index_tables, simulate_outcomes, simulate_partitioned, sweep,
    write_csv, Algorithm, Design, DesignParams, Mode, PartitionedDesign, SparsityParams,
    TrialConfig,
};

#[derive(Parser)]
#[command(name = "edgeprobe", version, about = "Edge-detecting group testing on random graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Design constants; unset flags fall back to the config file (if given)
/// and then to the calibrated defaults.
#[derive(Args, Clone)]
struct ParamArgs {
    /// Key-value parameter file (as written by `calibrate`)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    /// The per-round constant C'
    #[arg(long)]
    cp: Option<f64>,
    #[arg(long)]
    c3: Option<f64>,
    /// Number of shared permutations (partitioned designs)
    #[arg(long)]
    c: Option<u32>,
    /// Number of independent design repetitions (partitioned designs)
    #[arg(long = "cp-reps")]
    cp_reps: Option<u32>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Constant mode: calibrated or theory
    #[arg(long, default_value = "calibrated")]
    mode: String,
}

impl ParamArgs {
    fn resolve(&self, seed: u64) -> Result<DesignParams, edgeprobe::Error> {
        let mut p = match &self.config {
            Some(path) => io::read_params_config(&fs::read_to_string(path)?)?,
            None => DesignParams::calibrated(seed),
        };
        if let Some(v) = self.c1 {
            p.c1 = v;
        }
        if let Some(v) = self.c2 {
            p.c2 = v;
        }
        if let Some(v) = self.cp {
            p.cprime = v;
        }
        if let Some(v) = self.c3 {
            p.c3 = v;
        }
        if let Some(v) = self.c {
            p.n_perms = v;
        }
        if let Some(v) = self.cp_reps {
            p.n_reps = v;
        }
        if let Some(v) = self.gamma {
            p.gamma = v;
        }
        p.mode = Mode::parse(&self.mode)?;
        p.seed = seed;
        Ok(p)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample an Erdős–Rényi graph
    Gen {
        #[arg(long)]
        n: u32,
        #[arg(long, conflicts_with = "q")]
        theta: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pad the vertex count to the next power of two
        #[arg(long)]
        pad: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a non-adaptive design and write its header
    Design {
        #[arg(long)]
        n: u32,
        #[arg(long, conflicts_with = "theta")]
        kbar: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Build the partitioned (per part pair) design
        #[arg(long)]
        partitioned: bool,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate edge-detecting outcomes of a design against a graph
    Simulate {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode outcomes back to an edge estimate
    Decode {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        /// basic or tables (basic designs only; partitioned designs pick
        /// their own decoder)
        #[arg(long, default_value = "basic")]
        algo: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Metrics sidecar path
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run seeded Monte-Carlo trials for one configuration
    Trial {
        #[arg(long)]
        n: u32,
        #[arg(long, conflicts_with = "q")]
        theta: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, default_value = "basic")]
        algo: String,
        #[arg(long, default_value_t = 10)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed0: u64,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Include wall-clock nanoseconds in the CSV (breaks byte-for-byte
        /// reproducibility across runs)
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a sweep over comma-separated n and theta lists
    Sweep {
        /// Comma-separated vertex counts, e.g. 1024,4096
        #[arg(long, value_delimiter = ',')]
        n: Vec<u32>,
        /// Comma-separated sparsity exponents, e.g. 0.4,0.5,0.6
        #[arg(long, value_delimiter = ',')]
        theta: Vec<f64>,
        #[arg(long, default_value = "basic")]
        algo: String,
        #[arg(long, default_value_t = 3)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed0: u64,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        timing: bool,
        /// Fit the outcome-check scaling exponent after the sweep
        #[arg(long)]
        fit: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid-search constants for a target success rate
    Calibrate {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value = "basic")]
        algo: String,
        #[arg(long, default_value_t = 0.95)]
        target: f64,
        #[arg(long, default_value_t = 40)]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed0: u64,
        #[arg(long, default_value_t = 0.3)]
        gamma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive pairwise-independence census of the permutation family
    PermCensus {
        #[arg(long)]
        m: u32,
    },
    /// Expand a design into explicit per-test vertex lists
    Export {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<PathBuf>, text: String) -> Result<(), edgeprobe::Error> {
    match out {
        Some(path) => {
            fs::write(path, text)?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sparsity(n: u32, theta: Option<f64>, q: Option<f64>) -> Result<SparsityParams, edgeprobe::Error> {
    match (theta, q) {
        (Some(t), None) => SparsityParams::from_theta(n, t),
        (None, Some(q)) => SparsityParams::from_q(n, q),
        (None, None) => Err(edgeprobe::Error::Parameter(
            "need --theta or --q".into(),
        )),
        _ => Err(edgeprobe::Error::Parameter(
            "give only one of --theta / --q".into(),
        )),
    }
}

fn run(cli: Cli) -> Result<(), edgeprobe::Error> {
    match cli.command {
        Command::Gen {
            n,
            theta,
            q,
            seed,
            pad,
            out,
        } => {
            let sp = sparsity(n, theta, q)?;
            let mut graph = edgeprobe::sample_er_graph(n, sp.q, seed)?;
            if pad {
                graph = edgeprobe::pad_to_power_of_two(&graph);
            }
            emit(out, io::write_graph(&graph))
        }
        Command::Design {
            n,
            kbar,
            theta,
            seed,
            partitioned,
            params,
            out,
        } => {
            let kbar = match (kbar, theta) {
                (Some(k), None) => k,
                (None, Some(t)) => SparsityParams::from_theta(n, t)?.kbar.max(1.0),
                _ => {
                    return Err(edgeprobe::Error::Parameter(
                        "give exactly one of --kbar / --theta".into(),
                    ))
                }
            };
            let p = params.resolve(seed)?;
            if partitioned {
                let d = PartitionedDesign::build(n, kbar, &p)?;
                eprintln!(
                    "partitioned design: m_parts={} n_ij={} l0={} tests={}",
                    d.m_parts(),
                    d.n_ij(),
                    d.l0(),
                    d.total_tests()
                );
                emit(out, io::partitioned_header_of(&d)?)
            } else {
                let d = Design::build(n, kbar, &p)?;
                let counts = count_tests(n, kbar, &p)?;
                eprintln!(
                    "design: l_min={} R={} T={} tests={}",
                    counts.l_min, counts.r, counts.t, counts.total
                );
                emit(out, io::design_header_of(&d)?)
            }
        }
        Command::Simulate {
            design,
            graph,
            out,
        } => {
            let graph = io::read_graph(&fs::read_to_string(graph)?)?;
            let outcomes = match io::read_design(&fs::read_to_string(design)?)? {
                AnyDesign::Basic(d) => simulate_outcomes(&d, &graph)?,
                AnyDesign::Partitioned(d) => simulate_partitioned(&d, &graph)?,
            };
            emit(out, io::write_outcomes(&outcomes))
        }
        Command::Decode {
            design,
            outcomes,
            algo,
            out,
            metrics,
        } => {
            let outcomes = io::read_outcomes(&fs::read_to_string(outcomes)?)?;
            let (n, result) = match io::read_design(&fs::read_to_string(design)?)? {
                AnyDesign::Basic(d) => {
                    let res = match algo.as_str() {
                        "basic" => decode_basic(&d, &outcomes)?,
                        "tables" => {
                            let tables = precompute_index_tables(&d)?;
                            decode_with_tables(&d, &outcomes, &tables)?
                        }
                        other => {
                            return Err(edgeprobe::Error::Parameter(format!(
                                "unknown decoder `{other}` for a basic design"
                            )))
                        }
                    };
                    (d.n(), res)
                }
                AnyDesign::Partitioned(d) => (d.n(), decode_partitioned(&d, &outcomes)?),
            };
            if let Some(path) = metrics {
                fs::write(path, io::write_metrics(&result))?;
            }
            // same format as graph files, so estimates re-import directly
            let estimate = edgeprobe::Graph::new(n, result.edges.clone())?;
            emit(out, io::write_graph(&estimate))
        }
        Command::Trial {
            n,
            theta,
            q,
            algo,
            trials,
            seed0,
            params,
            workers,
            timing,
            out,
        } => {
            let config = TrialConfig {
                n,
                theta,
                q,
                params: params.resolve(seed0)?,
                algorithm: Algorithm::parse(&algo)?,
                trials,
                seed0,
            };
            let rows = sweep(&[config], workers, timing)?;
            let successes = rows.iter().filter(|r| r.success).count();
            eprintln!("success {successes}/{}", rows.len());
            emit(out, write_csv(&rows))
        }
        Command::Sweep {
            n,
            theta,
            algo,
            trials,
            seed0,
            params,
            workers,
            timing,
            fit,
            out,
        } => {
            let algorithm = Algorithm::parse(&algo)?;
            let mut configs = Vec::new();
            for &nn in &n {
                for &th in &theta {
                    configs.push(TrialConfig {
                        n: nn,
                        theta: Some(th),
                        q: None,
                        params: params.resolve(seed0)?,
                        algorithm,
                        trials,
                        seed0,
                    });
                }
            }
            let rows = sweep(&configs, workers, timing)?;
            if fit {
                let f = fit_rows(&rows)?;
                eprintln!(
                    "fit: slope={:.4} intercept={:.4} points={}",
                    f.slope,
                    f.intercept,
                    f.residuals.len()
                );
            }
            emit(out, write_csv(&rows))
        }
        Command::Calibrate {
            n,
            theta,
            algo,
            target,
            trials,
            seed0,
            gamma,
            out,
        } => {
            let algorithm = Algorithm::parse(&algo)?;
            let grid = edgeprobe::harness::default_grid(algorithm, gamma, seed0);
            let outcome = calibrate(n, theta, algorithm, target, trials, seed0, &grid)?;
            for e in &outcome.evaluations {
                eprintln!(
                    "tried C1={} Cp={} c={} cp={}: {}/{} (tests {})",
                    e.params.c1,
                    e.params.cprime,
                    e.params.n_perms,
                    e.params.n_reps,
                    e.successes,
                    e.trials,
                    e.tests
                );
            }
            emit(out, io::write_params_config(&outcome.chosen))
        }
        Command::PermCensus { m } => {
            let census = independence_census(m)?;
            println!(
                "m={} members={} cells={} min={} max={} pairwise_independent={}",
                m,
                census.pairs,
                census.counts.len(),
                census.min(),
                census.max(),
                census.all_ones()
            );
            Ok(())
        }
        Command::Export { design, out } => {
            let mut text = String::new();
            match io::read_design(&fs::read_to_string(design)?)? {
                AnyDesign::Basic(d) => {
                    for id in 0..d.total_tests() {
                        let vs = d.vertices_in_test(id)?;
                        let list: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                        text.push_str(&format!("{id}: {}\n", list.join(" ")));
                    }
                }
                AnyDesign::Partitioned(d) => {
                    for id in 0..d.total_tests() {
                        let vs = d.vertices_in_test(id)?;
                        let list: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                        text.push_str(&format!("{id}: {}\n", list.join(" ")));
                    }
                }
            }
            emit(out, text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
