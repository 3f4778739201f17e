//! Witness construction and statistics.
//!
//! A witness for a vertex `x` newly infected at round `i+1` of a relaxed
//! process is a chain of sphere subsets `W_1, ..., W_i` with
//! `W_j ⊆ S_0(x, j)` and `W_{j+1} ⊆ N(W_j)`, built from the recently
//! infected typical vertices of each round. Its weight counts the edges
//! from the last layer into the next typical sphere, and the cherry count
//! drives the deviation bookkeeping.

use crate::engine::{ClosureTrace, InfectionState, Rule};
use crate::error::{Error, Result};
use crate::graph::{GraphHandle, Vertex};
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};

#[derive(Clone, Debug)]
pub struct Witness {
    pub root: Vertex,
    /// `x` entered the set at round `depth + 1`
    pub depth: u32,
    /// `W_1, ..., W_depth`
    pub layers: Vec<Vec<Vertex>>,
}

/// How to resolve the prescribed layer sizes `ceil((gamma - 7K)^j / j!)` at
/// scales where they come out non-positive or exceed what is available.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizePolicy {
    /// Fail (return no witness) when a prescribed size is below 1 or
    /// unavailable.
    Strict,
    /// Clamp each prescribed size into `[1, available]`.
    Clamped,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessStats {
    /// `s = |W_i|`
    pub s: u64,
    /// edges from `W_i` into `S_0(x, i+1)`
    pub zeta: u64,
    /// edges from `W_i` into `S_0(x, i+1) ∩ A_0`
    pub z: u64,
    /// cherries with centre in `S_0(x, i+1)` and endpoints in `W_i`
    pub cherries: u64,
    /// `alpha = cherries / (s d(x))`
    pub alpha: f64,
    /// diagnostic only: entry `j-1` counts the vertices of `S_0(x, i+1)`
    /// with exactly `j` neighbours in `W_i`
    pub xj_histogram: Vec<u64>,
}

fn validate_layer(g: &GraphHandle, x: Vertex, j: u32, layer: &[Vertex]) -> Result<()> {
    for &v in layer {
        if g.distance(x, v)? != j || !g.is_typical(x, v)? {
            return Err(Error::WitnessLayerInvalid(format!(
                "{} is not in the typical sphere at distance {j}",
                g.format_vertex(v)
            )));
        }
    }
    Ok(())
}

/// Exact number of paths `u - v - w` with `{u, w} ⊆ layer` and centre
/// `v ∈ S_0(x, i+1)`.
pub fn count_cherries(g: &GraphHandle, x: Vertex, i: u32, layer: &[Vertex]) -> Result<u64> {
    validate_layer(g, x, i, layer)?;
    let mut centre_hits: HashMap<Vertex, u64> = HashMap::new();
    for &w in layer {
        for v in g.neighbors(w)? {
            if g.distance(x, v)? == i + 1 && g.is_typical(x, v)? {
                *centre_hits.entry(v).or_insert(0) += 1;
            }
        }
    }
    Ok(centre_hits.values().map(|&c| c * (c.saturating_sub(1)) / 2).sum())
}

/// Edge count from a sphere layer into the next typical sphere,
/// `e(W, S_0(x, i+1))`, for any `W ⊆ S_0(x, i)`.
pub fn layer_weight(g: &GraphHandle, x: Vertex, i: u32, layer: &[Vertex]) -> Result<u64> {
    validate_layer(g, x, i, layer)?;
    let mut zeta = 0u64;
    for &w in layer {
        for v in g.neighbors(w)? {
            if g.distance(x, v)? == i + 1 && g.is_typical(x, v)? {
                zeta += 1;
            }
        }
    }
    Ok(zeta)
}

/// Follow the inductive construction: `W_1` from recently infected typical
/// neighbours of `x`, each further layer from the recently infected typical
/// neighbours of the previous one. Returns `None` when `x` was not newly
/// infected at round `i+1` or a layer comes out empty (or, under the
/// strict policy, smaller than prescribed).
pub fn build_witness(
    g: &GraphHandle,
    trace: &ClosureTrace,
    x: Vertex,
    i: u32,
    k_constant: u32,
    policy: SizePolicy,
) -> Result<Option<Witness>> {
    let Rule::Boot { k, .. } = trace.rule else {
        return Err(Error::TraceMismatch(format!(
            "witnesses are defined for relaxed-threshold traces, got {}",
            trace.rule
        )));
    };
    if !(1..=3).contains(&i) {
        return Err(Error::DomainError(format!("witness depth must be 1..=3, got {i}")));
    }
    if i > k {
        return Err(Error::TraceMismatch(format!(
            "depth {i} exceeds the relaxed rounds k = {k}"
        )));
    }
    let domain = trace.final_state.domain().clone();
    let x_idx = domain.index_of(x).ok_or(Error::DomainMismatch)?;

    // x must lie in A_{i+1} \ A_i
    if trace.final_state.infection_round(x_idx) != Some(i + 1) {
        return Ok(None);
    }

    let gamma = trace.rule.gamma(g.degree(x)?);
    let base = gamma - 7.0 * k_constant as f64;
    let target = |j: u32| -> Option<usize> {
        let factorial: f64 = (1..=j).map(|t| t as f64).product();
        let raw = (base.powi(j as i32) / factorial).ceil();
        match policy {
            SizePolicy::Strict => (raw >= 1.0).then_some(raw as usize),
            SizePolicy::Clamped => Some(raw.max(1.0) as usize),
        }
    };

    // round of infection per vertex, looked up through the trace
    let round_of = |v: Vertex| -> Option<u32> {
        domain
            .index_of(v)
            .and_then(|idx| trace.final_state.infection_round(idx))
    };

    let mut layers: Vec<Vec<Vertex>> = Vec::with_capacity(i as usize);
    // W_1: neighbours of x newly infected at round i, typical
    let mut current: BTreeSet<Vertex> = BTreeSet::new();
    for v in g.neighbors(x)? {
        if round_of(v) == Some(i) && g.is_typical(x, v)? {
            current.insert(v);
        }
    }
    for j in 1..=i {
        let Some(want) = target(j) else { return Ok(None) };
        if current.is_empty() {
            return Ok(None);
        }
        if policy == SizePolicy::Strict && current.len() < want {
            return Ok(None);
        }
        let chosen: Vec<Vertex> = current.iter().copied().take(want.min(current.len())).collect();
        layers.push(chosen.clone());
        if j == i {
            break;
        }
        // W_{j+1}: recently infected typical forward neighbours of W_j,
        // deduplicated across the layer
        let wanted_round = i - j; // members of A_{i-j} \ A_{i-j-1}
        let mut next: BTreeSet<Vertex> = BTreeSet::new();
        for &w in &chosen {
            for v in g.neighbors(w)? {
                if round_of(v) == Some(wanted_round)
                    && g.distance(x, v)? == j + 1
                    && g.is_typical(x, v)?
                {
                    next.insert(v);
                }
            }
        }
        current = next;
    }
    Ok(Some(Witness { root: x, depth: i, layers }))
}

/// Exact edge counts of a witness: the weight into the next typical sphere,
/// its initially-infected part, and the cherry statistics.
pub fn witness_stats(
    g: &GraphHandle,
    x: Vertex,
    witness: &Witness,
    a0: &InfectionState,
) -> Result<WitnessStats> {
    if witness.layers.len() != witness.depth as usize || witness.depth == 0 {
        return Err(Error::WitnessLayerInvalid("layer count differs from depth".into()));
    }
    for (idx, layer) in witness.layers.iter().enumerate() {
        validate_layer(g, x, idx as u32 + 1, layer)?;
        if idx > 0 {
            let prev = &witness.layers[idx - 1];
            for &v in layer {
                let attached = g.neighbors(v)?.iter().any(|w| prev.contains(w));
                if !attached {
                    return Err(Error::WitnessLayerInvalid(format!(
                        "{} has no neighbour in the previous layer",
                        g.format_vertex(v)
                    )));
                }
            }
        }
    }
    let i = witness.depth;
    let last = witness.layers.last().unwrap();
    let domain = a0.domain();
    let mut z = 0u64;
    let mut centre_hits: HashMap<Vertex, u64> = HashMap::new();
    for &w in last {
        for v in g.neighbors(w)? {
            if g.distance(x, v)? == i + 1 && g.is_typical(x, v)? {
                *centre_hits.entry(v).or_insert(0) += 1;
                let idx = domain.index_of(v).ok_or(Error::DomainMismatch)?;
                if a0.is_infected(idx) {
                    z += 1;
                }
            }
        }
    }
    let zeta: u64 = centre_hits.values().sum();
    let cherries: u64 = centre_hits.values().map(|&c| c * (c - 1) / 2).sum();
    let mut xj_histogram = Vec::new();
    for &c in centre_hits.values() {
        let slot = c as usize - 1;
        if xj_histogram.len() <= slot {
            xj_histogram.resize(slot + 1, 0);
        }
        xj_histogram[slot] += 1;
    }
    let s = last.len() as u64;
    let d = g.degree(x)? as u64;
    Ok(WitnessStats {
        s,
        zeta,
        z,
        cherries,
        alpha: cherries as f64 / (s * d) as f64,
        xj_histogram,
    })
}

/// The deviation inequality of the witness argument, evaluated (not
/// asserted): does `Z` exceed its mean by the prescribed margin?
#[derive(Clone, Debug, Serialize)]
pub struct DeviationReport {
    pub stats: WitnessStats,
    pub expected_z: f64,
    pub margin: f64,
    pub deviation: f64,
    pub satisfied: bool,
}

pub fn deviation_report(
    g: &GraphHandle,
    x: Vertex,
    witness: &Witness,
    a0: &InfectionState,
    p: f64,
    lambda: f64,
    k_constant: u32,
    rule: &Rule,
) -> Result<DeviationReport> {
    let stats = witness_stats(g, x, witness, a0)?;
    let d = g.degree(x)? as f64;
    let gamma = rule.gamma(g.degree(x)?);
    let i = witness.depth as f64;
    let ln_d = d.ln();
    let margin = stats.s as f64
        * (0.5 * (d * ln_d).sqrt() - lambda * ln_d.ln() * (d / ln_d).sqrt()
            - 3.0 * gamma
            - 9.0 * i * k_constant as f64);
    let expected_z = stats.zeta as f64 * p;
    let deviation = stats.z as f64 - expected_z;
    Ok(DeviationReport {
        satisfied: deviation >= margin,
        expected_z,
        margin,
        deviation,
        stats,
    })
}
