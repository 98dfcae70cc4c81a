//! Parsers for the textual flag values. Every entry point takes untrusted
//! text and must return an error rather than panic.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, ensure, Context, Result};

/// Smallest mesh the scheme accepts.
pub const MIN_NODES: usize = 3;
/// Upper bound on any node count given on the command line.
pub const MAX_NODES: usize = 1 << 24;
/// Upper bound on a halving level in `--m-range`.
pub const MAX_LEVEL: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemName {
    Radial,
    Oscillating,
    PureCsf,
}

impl FromStr for ProblemName {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "radial" => Ok(Self::Radial),
            "oscillating" => Ok(Self::Oscillating),
            "pure-csf" => Ok(Self::PureCsf),
            other => bail!("unknown problem `{other}` (expected radial, oscillating or pure-csf)"),
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Radial => "radial",
            Self::Oscillating => "oscillating",
            Self::PureCsf => "pure-csf",
        })
    }
}

/// Time step: a fixed value or `h2`, meaning `δ = h² = 1/N²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    Fixed(f64),
    H2,
}

impl DtRule {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            DtRule::Fixed(dt) => dt,
            DtRule::H2 => {
                let h = 1.0 / n as f64;
                h * h
            }
        }
    }
}

impl FromStr for DtRule {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "h2" {
            return Ok(DtRule::H2);
        }
        let dt = parse_positive_f64(s).with_context(|| format!("invalid time step `{s}` (a positive number or h2)"))?;
        Ok(DtRule::Fixed(dt))
    }
}

/// A finite, strictly positive float.
pub fn parse_positive_f64(s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| anyhow!("`{s}` is not a number"))?;
    ensure!(v.is_finite() && v > 0.0, "`{s}` must be finite and positive");
    Ok(v)
}

pub fn parse_nodes(s: &str) -> Result<usize> {
    let s = s.trim();
    let n: usize = s.parse().map_err(|_| anyhow!("`{s}` is not a node count"))?;
    ensure!(
        (MIN_NODES..=MAX_NODES).contains(&n),
        "node count {n} outside {MIN_NODES}..={MAX_NODES}"
    );
    Ok(n)
}

/// Comma-separated, strictly increasing node counts, e.g. `21,61,121,241`.
pub fn parse_node_list(s: &str) -> Result<Vec<usize>> {
    ensure!(!s.trim().is_empty(), "empty node list");
    let nodes = s.split(',').map(parse_nodes).collect::<Result<Vec<_>>>()?;
    ensure!(
        nodes.windows(2).all(|w| w[0] < w[1]),
        "node counts must be strictly increasing, got `{}`",
        s.trim()
    );
    Ok(nodes)
}

/// Inclusive level range `a..b` (or a single level `a`).
pub fn parse_m_range(s: &str) -> Result<Vec<u32>> {
    let s = s.trim();
    let level = |t: &str| -> Result<u32> {
        let m: u32 = t.trim().parse().map_err(|_| anyhow!("`{t}` is not a level"))?;
        ensure!(m <= MAX_LEVEL, "level {m} exceeds {MAX_LEVEL}");
        Ok(m)
    };
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (level(a)?, level(b)?),
        None => {
            let m = level(s)?;
            (m, m)
        }
    };
    ensure!(lo <= hi, "empty level range `{s}`");
    Ok((lo..=hi).collect())
}
