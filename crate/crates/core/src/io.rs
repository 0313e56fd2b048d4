//! Text file formats: graphs, design headers, outcomes, decode metrics, and
//! key-value parameter configs. Every format round-trips byte-exactly.

use std::collections::BTreeMap;

use crate::decode::DecodeResult;
use crate::design::{Design, DesignParams, Mode};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::outcomes::Outcomes;
use crate::partition::PartitionedDesign;

/// Graph text format: header line `n=<N>`, then one edge per line `u v`
/// (1-based), in canonical sorted order.
pub fn write_graph(graph: &Graph) -> String {
    let mut out = String::with_capacity(16 + graph.k() * 8);
    out.push_str(&format!("n={}\n", graph.n()));
    for &(u, v) in graph.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

pub fn read_graph(text: &str) -> Result<Graph> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty graph file".into()))?;
    let n: u32 = header
        .trim()
        .strip_prefix("n=")
        .ok_or_else(|| Error::Parse(format!("expected `n=<N>`, got `{header}`")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad vertex count in `{header}`")))?;
    let mut edges = Vec::new();
    for line in lines {
        let mut it = line.split_whitespace();
        let u: u32 = it
            .next()
            .ok_or_else(|| Error::Parse(format!("bad edge line `{line}`")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad edge line `{line}`")))?;
        let v: u32 = it
            .next()
            .ok_or_else(|| Error::Parse(format!("bad edge line `{line}`")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad edge line `{line}`")))?;
        if it.next().is_some() {
            return Err(Error::Parse(format!("trailing tokens in `{line}`")));
        }
        edges.push((u, v));
    }
    Graph::new(n, edges)
}

/// Exact rational form of a non-negative f64 with denominator a power of
/// two. Both parts stay below 2^53 for the magnitudes used here, so the
/// fraction reproduces the float bit-for-bit.
pub fn f64_to_fraction(x: f64) -> Result<(u64, u64)> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::Parameter(format!("cannot encode {x} as a fraction")));
    }
    let mut num = x;
    let mut den = 1u64;
    while num.fract() != 0.0 {
        if den >= 1 << 52 || num >= 9e15 {
            return Err(Error::Parameter(format!("{x} needs too deep a fraction")));
        }
        num *= 2.0;
        den *= 2;
    }
    Ok((num as u64, den))
}

pub fn fraction_to_f64(num: u64, den: u64) -> Result<f64> {
    if den == 0 || !den.is_power_of_two() {
        return Err(Error::Parse(format!("bad denominator {den}")));
    }
    Ok(num as f64 / den as f64)
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got `{line}`")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn kv_get<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(|s| s.as_str())
        .ok_or_else(|| Error::Parse(format!("missing key `{key}`")))
}

fn kv_parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    kv_get(map, key)?
        .parse()
        .map_err(|_| Error::Parse(format!("bad value for `{key}`")))
}

fn params_block(p: &DesignParams) -> String {
    format!(
        "C1={}\nC2={}\nCp={}\nC3={}\nc={}\ncp={}\ngamma={}\nseed={}\nmode={}\n",
        p.c1,
        p.c2,
        p.cprime,
        p.c3,
        p.n_perms,
        p.n_reps,
        p.gamma,
        p.seed,
        p.mode.as_str()
    )
}

fn params_from_kv(map: &BTreeMap<String, String>) -> Result<DesignParams> {
    Ok(DesignParams {
        c1: kv_parse(map, "C1")?,
        c2: kv_parse(map, "C2")?,
        cprime: kv_parse(map, "Cp")?,
        c3: kv_parse(map, "C3")?,
        n_perms: kv_parse(map, "c")?,
        n_reps: kv_parse(map, "cp")?,
        gamma: kv_parse(map, "gamma")?,
        seed: kv_parse(map, "seed")?,
        mode: Mode::parse(kv_get(map, "mode")?)?,
    })
}

/// Design header: everything needed to reconstruct the design. `kind` is
/// `basic` or `partitioned`; `kbar` is stored as an exact fraction.
pub fn write_design_header(kind: &str, n: u32, kbar: f64, params: &DesignParams) -> Result<String> {
    let (num, den) = f64_to_fraction(kbar)?;
    Ok(format!(
        "kind={kind}\nn={n}\nkbar_num={num}\nkbar_den={den}\n{}",
        params_block(params)
    ))
}

pub enum AnyDesign {
    Basic(Design),
    Partitioned(PartitionedDesign),
}

/// Reconstructs a design from its header.
pub fn read_design(text: &str) -> Result<AnyDesign> {
    let map = parse_kv(text)?;
    let kind = kv_get(&map, "kind")?;
    let n: u32 = kv_parse(&map, "n")?;
    let kbar = fraction_to_f64(kv_parse(&map, "kbar_num")?, kv_parse(&map, "kbar_den")?)?;
    let params = params_from_kv(&map)?;
    match kind {
        "basic" => Ok(AnyDesign::Basic(Design::build(n, kbar, &params)?)),
        "partitioned" => Ok(AnyDesign::Partitioned(PartitionedDesign::build(
            n, kbar, &params,
        )?)),
        other => Err(Error::Parse(format!("unknown design kind `{other}`"))),
    }
}

pub fn design_header_of(design: &Design) -> Result<String> {
    write_design_header("basic", design.n(), design.kbar(), design.params())
}

pub fn partitioned_header_of(pdesign: &PartitionedDesign) -> Result<String> {
    write_design_header(
        "partitioned",
        pdesign.n(),
        pdesign.kbar(),
        pdesign.params(),
    )
}

/// Outcomes: header `total=<T>` then the little-endian hex bitstring (bit
/// `i` of byte `j` is test `8j + i`).
pub fn write_outcomes(outcomes: &Outcomes) -> String {
    let bytes = outcomes.to_bytes();
    let mut out = String::with_capacity(bytes.len() * 2 + 24);
    out.push_str(&format!("total={}\n", outcomes.total()));
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out.push('\n');
    out
}

pub fn read_outcomes(text: &str) -> Result<Outcomes> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty outcomes file".into()))?;
    let total: u64 = header
        .trim()
        .strip_prefix("total=")
        .ok_or_else(|| Error::Parse(format!("expected `total=<T>`, got `{header}`")))?
        .parse()
        .map_err(|_| Error::Parse("bad total".into()))?;
    let hex: String = lines.collect::<Vec<_>>().join("");
    let hex = hex.trim();
    if hex.len() % 2 != 0 {
        return Err(Error::Parse("odd hex payload length".into()));
    }
    let mut bytes = Vec::with_capacity(hex.len() / 2);
    for i in (0..hex.len()).step_by(2) {
        let b = u8::from_str_radix(&hex[i..i + 2], 16)
            .map_err(|_| Error::Parse(format!("bad hex at offset {i}")))?;
        bytes.push(b);
    }
    Outcomes::from_bytes(total, &bytes)
}

/// Decode metrics sidecar: status, outcome checks, and the per-level PD
/// trajectory in key-value text.
pub fn write_metrics(result: &DecodeResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("status={}\n", result.status.as_str()));
    out.push_str(&format!("outcome_checks={}\n", result.outcome_checks));
    out.push_str(&format!("edges={}\n", result.edges.len()));
    for &(level, size) in &result.pd_sizes {
        out.push_str(&format!("pd.{level}={size}\n"));
    }
    out
}

/// Parameter config file (committed calibration output).
pub fn write_params_config(params: &DesignParams) -> String {
    params_block(params)
}

pub fn read_params_config(text: &str) -> Result<DesignParams> {
    params_from_kv(&parse_kv(text)?)
}
