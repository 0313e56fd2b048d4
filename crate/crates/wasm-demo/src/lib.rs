//! Browser bindings for the interactive demo page.
//!
//! Three operations, each returning a JSON string for the page to render:
//! a full sample-design-simulate-decode run with the PD trajectory and the
//! recovered edge set, the per-level typicality statistics against their
//! bounds, and an affine-permutation explorer with the exact
//! pairwise-independence census for small fields.
//!
//! Inputs and outputs are plain numbers and strings so the same functions
//! compile and test natively.

use wasm_bindgen::prelude::wasm_bindgen;

use edgeprobe::{
    decode_basic, decode_partitioned, independence_census, sample_er_graph, sample_perm,
    simulate_outcomes, simulate_partitioned, typicality_check, Design, DesignParams, FieldSpec,
    PartitionedDesign, SparsityParams,
};

const DEMO_MAX_N: u32 = 1024;

fn err_json(msg: &str) -> String {
    format!("{{\"error\":\"{}\"}}", msg.replace('"', "'"))
}

fn edges_json(edges: &[(u32, u32)], cap: usize) -> String {
    let mut s = String::from("[");
    for (i, &(u, v)) in edges.iter().take(cap).enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&format!("[{u},{v}]"));
    }
    s.push(']');
    s
}

/// Runs one seeded end-to-end experiment and reports everything the page
/// draws: design shape, PD trajectory, checks, and the edge comparison.
#[wasm_bindgen]
pub fn decode_demo_json(
    n: u32,
    theta: f64,
    seed: u64,
    algo: &str,
    n_perms: u32,
    gamma: f64,
) -> String {
    match decode_demo_inner(n, theta, seed, algo, n_perms, gamma) {
        Ok(json) => json,
        Err(e) => err_json(&e.to_string()),
    }
}

fn decode_demo_inner(
    n: u32,
    theta: f64,
    seed: u64,
    algo: &str,
    n_perms: u32,
    gamma: f64,
) -> edgeprobe::Result<String> {
    if n > DEMO_MAX_N {
        return Err(edgeprobe::Error::Parameter(format!(
            "demo caps n at {DEMO_MAX_N}"
        )));
    }
    let sp = SparsityParams::from_theta(n, theta)?;
    let graph = sample_er_graph(n, sp.q, seed)?;
    let mut params = DesignParams::calibrated(seed);
    params.n_perms = n_perms.clamp(1, 32);
    params.gamma = gamma;
    let kbar = sp.kbar.max(1.0);

    let (tests, result) = match algo {
        "partitioned" => {
            let design = PartitionedDesign::build(n, kbar, &params)?;
            let outcomes = simulate_partitioned(&design, &graph)?;
            (design.total_tests(), decode_partitioned(&design, &outcomes)?)
        }
        _ => {
            let design = Design::build(n, kbar, &params)?;
            let outcomes = simulate_outcomes(&design, &graph)?;
            (design.total_tests(), decode_basic(&design, &outcomes)?)
        }
    };

    let truth = graph.edges();
    let recovered = &result.edges;
    let missed: Vec<(u32, u32)> = truth
        .iter()
        .filter(|e| !recovered.contains(e))
        .copied()
        .collect();
    let extra: Vec<(u32, u32)> = recovered
        .iter()
        .filter(|e| !truth.contains(e))
        .copied()
        .collect();

    let mut pd = String::from("[");
    for (i, &(level, size)) in result.pd_sizes.iter().enumerate() {
        if i > 0 {
            pd.push(',');
        }
        pd.push_str(&format!("[{level},{size}]"));
    }
    pd.push(']');

    Ok(format!(
        "{{\"n\":{},\"kbar\":{:.3},\"k\":{},\"tests\":{},\"checks\":{},\"success\":{},\"status\":\"{}\",\"pd\":{},\"true_edges\":{},\"missed\":{},\"extra\":{}}}",
        n,
        sp.kbar,
        graph.k(),
        tests,
        result.outcome_checks,
        (missed.is_empty() && extra.is_empty()),
        result.status.as_str(),
        pd,
        edges_json(truth, 4096),
        edges_json(&missed, 4096),
        edges_json(&extra, 4096),
    ))
}

/// Per-level block statistics of a seeded graph against the typicality
/// bounds for its sparsity regime.
#[wasm_bindgen]
pub fn level_stats_json(n: u32, theta: f64, seed: u64, eps: f64) -> String {
    match level_stats_inner(n, theta, seed, eps) {
        Ok(json) => json,
        Err(e) => err_json(&e.to_string()),
    }
}

fn level_stats_inner(n: u32, theta: f64, seed: u64, eps: f64) -> edgeprobe::Result<String> {
    if n > DEMO_MAX_N {
        return Err(edgeprobe::Error::Parameter(format!(
            "demo caps n at {DEMO_MAX_N}"
        )));
    }
    let sp = SparsityParams::from_theta(n, theta)?;
    let graph = sample_er_graph(n, sp.q, seed)?;
    let report = typicality_check(&graph, &sp, eps)?;
    let mut levels = String::from("[");
    for (i, l) in report.levels.iter().enumerate() {
        if i > 0 {
            levels.push(',');
        }
        levels.push_str(&format!(
            "{{\"level\":{},\"eg\":{},\"eg_bound\":{:.2},\"nu\":{},\"nu_bound\":{:.2},\"dmax\":{},\"d_bound\":{:.2},\"pass\":{}}}",
            l.level, l.eg, l.eg_bound, l.nu, l.nu_bound, l.dmax, l.d_bound, l.pass
        ));
    }
    levels.push(']');
    Ok(format!(
        "{{\"n\":{},\"kbar\":{:.3},\"k\":{},\"eps\":{},\"cond_edge_count\":{},\"degenerate\":{},\"overall\":{},\"levels\":{}}}",
        n, report.kbar, report.k, report.eps, report.cond_edge_count, report.degenerate, report.overall, levels
    ))
}

/// A sampled affine permutation over GF(2^m) as an explicit mapping, plus
/// the exhaustive pairwise-independence census verdict for m <= 5.
#[wasm_bindgen]
pub fn perm_demo_json(m: u32, seed: u64) -> String {
    match perm_demo_inner(m, seed) {
        Ok(json) => json,
        Err(e) => err_json(&e.to_string()),
    }
}

fn perm_demo_inner(m: u32, seed: u64) -> edgeprobe::Result<String> {
    if !(1..=10).contains(&m) {
        return Err(edgeprobe::Error::Parameter(
            "demo supports m in [1, 10]".into(),
        ));
    }
    let spec = FieldSpec::new(m)?;
    let perm = sample_perm(spec, seed);
    let n = spec.order();
    let mut map = String::from("[");
    for x in 1..=n {
        if x > 1 {
            map.push(',');
        }
        map.push_str(&perm.eval(x)?.to_string());
    }
    map.push(']');
    let census = if m <= 5 {
        let c = independence_census(m)?;
        format!(
            "{{\"members\":{},\"min\":{},\"max\":{},\"all_ones\":{}}}",
            n * (n - 1),
            c.min(),
            c.max(),
            c.all_ones()
        )
    } else {
        "null".to_string()
    };
    Ok(format!(
        "{{\"m\":{},\"poly\":{},\"a\":{},\"b\":{},\"map\":{},\"census\":{}}}",
        m,
        spec.poly(),
        perm.a(),
        perm.b(),
        map,
        census
    ))
}
