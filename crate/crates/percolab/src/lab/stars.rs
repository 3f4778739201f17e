//! Layer decomposition of the Cartesian product of stars.
//!
//! Layer `L_i` holds the vertices with exactly `i` coordinates at the star
//! centre. Every `v` in `L_i` has `n - i` neighbours one layer up and `i q`
//! one layer down, so `d(v) = i q + (n - i)`; downward neighbours outnumber
//! upward ones precisely above `i_1 = floor(n / (q+1))`, which is what makes
//! the bottom layers a deterministic percolating set under the majority
//! rule.

use crate::engine::{closure, Domain, InfectionState, Rule};
use crate::error::{Error, Result};
use crate::graph::{make_graph, GraphHandle, GraphSpec};
use serde::Serialize;
use std::sync::Arc;

#[derive(Clone, Debug, Serialize)]
pub struct LayerRow {
    pub i: u32,
    /// `|L_i| = C(n, i) q^(n-i)`
    pub size: u128,
    /// neighbours one layer up: `n - i`
    pub n_plus: u32,
    /// neighbours one layer down: `i q`
    pub n_minus: u32,
    pub degree: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeterministicRun {
    /// the initial set was the union of layers `0..=i_1`
    pub seeded_layers: u32,
    pub initial_size: u64,
    pub percolated: bool,
    pub rounds: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct StarLayerReport {
    pub n: u32,
    pub q: u32,
    pub i0: u32,
    pub i1: u32,
    pub total_vertices: u128,
    pub layers: Vec<LayerRow>,
    pub deterministic: Option<DeterministicRun>,
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `ceil(n^(5/6))` with a guard against floating-point spill on exact powers.
fn i0_index(n: u32) -> u32 {
    let raw = (n as f64).powf(5.0 / 6.0);
    if (raw - raw.round()).abs() < 1e-9 {
        raw.round() as u32
    } else {
        raw.ceil() as u32
    }
}

/// Tabulate the layer structure of `StarProduct(n, q)`; optionally seed
/// `L_0..=L_{i_1}` and confirm that the majority closure reaches everything.
pub fn star_layer_report(n: u32, q: u32, run_deterministic: bool) -> Result<StarLayerReport> {
    let handle = make_graph(GraphSpec::StarProduct { n, q })?;
    let i1 = n / (q + 1);
    let mut layers = Vec::with_capacity(n as usize + 1);
    let mut total: u128 = 0;
    for i in 0..=n {
        let size = binomial(n as u64, i as u64)
            * (0..n - i).fold(1u128, |acc, _| acc.saturating_mul(q as u128));
        total += size;
        layers.push(LayerRow {
            i,
            size,
            n_plus: n - i,
            n_minus: i * q,
            degree: i * q + (n - i),
        });
    }
    debug_assert_eq!(total, handle.vertex_count());

    let deterministic = if run_deterministic {
        Some(run_layer_percolation(&handle, i1)?)
    } else {
        None
    };

    Ok(StarLayerReport {
        n,
        q,
        i0: i0_index(n),
        i1,
        total_vertices: total,
        layers,
        deterministic,
    })
}

fn run_layer_percolation(handle: &GraphHandle, i1: u32) -> Result<DeterministicRun> {
    let domain = Domain::build(handle)?;
    let members: Vec<_> = domain
        .vertices()
        .iter()
        .copied()
        .filter(|&v| handle.layer_index(v).expect("star product") <= i1)
        .collect();
    let s0 = InfectionState::from_members(&domain, &members)?;
    let initial_size = s0.infected_count();
    let trace = closure(&s0, &Rule::Majority, domain.len() as u32 + 1)?;
    Ok(DeterministicRun {
        seeded_layers: i1,
        initial_size,
        percolated: trace.percolated,
        rounds: trace.rounds_to_stabilise,
    })
}

/// Exhaustively verify the layer degree law `|N(v) ∩ L_{i+1}| = n - i` and
/// `|N(v) ∩ L_{i-1}| = i q` over the whole graph. Returns the first
/// offending vertex, if any.
pub fn verify_layer_degrees(domain: &Arc<Domain>) -> Result<Option<String>> {
    let handle = domain.handle();
    let GraphSpec::StarProduct { n, q } = *handle.spec() else {
        return Err(Error::UnsupportedFamily(
            "layer degrees are defined for star products".into(),
        ));
    };
    let layer: Vec<u32> = domain
        .vertices()
        .iter()
        .map(|&v| handle.layer_index(v).expect("star product"))
        .collect();
    for (vi, &v) in domain.vertices().iter().enumerate() {
        let i = layer[vi];
        let mut up = 0;
        let mut down = 0;
        for &w in domain.neighbors_of(vi as u32) {
            let j = layer[w as usize];
            if j == i + 1 {
                up += 1;
            } else if j + 1 == i {
                down += 1;
            } else {
                return Ok(Some(format!(
                    "edge between layers {i} and {j} at vertex {}",
                    handle.format_vertex(v)
                )));
            }
        }
        if up != n - i || down != i * q {
            return Ok(Some(format!(
                "vertex {} in layer {i}: up {up} (want {}), down {down} (want {})",
                handle.format_vertex(v),
                n - i,
                i * q
            )));
        }
    }
    Ok(None)
}
