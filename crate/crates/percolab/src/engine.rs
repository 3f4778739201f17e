//! Exact round-by-round bootstrap percolation over an explicit vertex domain.
//!
//! The update is fully synchronous: round `l+1` evaluates every uninfected
//! vertex against the round-`l` set. Infection is monotone, so a round that
//! adds nothing is a fixed point (thresholds never loosen as rounds pass).

use crate::error::{Error, Result};
use crate::graph::{GraphHandle, Vertex};
use crate::rng;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;

/// Infection threshold function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Rule {
    /// Infect once at least `r` neighbours are infected.
    RNeighbour { r: u32 },
    /// Infect once `2 |N(v) ∩ A| >= d(v)`, in exact integer arithmetic, so
    /// even-degree ties infect.
    Majority,
    /// Majority with the threshold relaxed by `max(0, k - l) * gamma(v)` in
    /// round `l+1`, where `gamma(v) = gamma_scale * sqrt(d / ln d)`.
    Boot { k: u32, gamma_scale: f64 },
}

impl Rule {
    /// Parse the CLI syntax: `majority`, `rneib:r=3`, `boot:k=3,gscale=1.0`.
    pub fn parse(text: &str) -> Result<Rule> {
        let bad = |msg: &str| Error::InvalidSpec(format!("{msg} in rule `{text}`"));
        if text == "majority" {
            return Ok(Rule::Majority);
        }
        let (name, rest) = text.split_once(':').ok_or_else(|| bad("unknown rule"))?;
        let mut pairs = HashMap::new();
        for item in rest.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            pairs.insert(k, v);
        }
        match name {
            "rneib" => {
                let r = pairs
                    .get("r")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad("rneib needs r=<nat>"))?;
                Ok(Rule::RNeighbour { r })
            }
            "boot" => {
                let k = pairs.get("k").and_then(|v| v.parse().ok()).unwrap_or(3);
                let gamma_scale = pairs
                    .get("gscale")
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(1.0);
                if !(0.0..=f64::MAX).contains(&gamma_scale) {
                    return Err(bad("gscale must be non-negative"));
                }
                Ok(Rule::Boot { k, gamma_scale })
            }
            _ => Err(bad("unknown rule")),
        }
    }

    /// `gamma(v)` for a vertex of degree `d`. Defined as 0 for `d <= 1`
    /// (degenerate graphs must not divide by `ln 1 = 0`).
    pub fn gamma(&self, degree: u32) -> f64 {
        match self {
            Rule::Boot { gamma_scale, .. } if degree >= 2 => {
                gamma_scale * (degree as f64 / (degree as f64).ln()).sqrt()
            }
            _ => 0.0,
        }
    }

    /// Does an uninfected vertex of degree `d` with `infected` infected
    /// neighbours enter the set in round `round + 1`?
    #[inline]
    pub fn meets(&self, degree: u32, infected: u32, round: u32) -> bool {
        match *self {
            Rule::RNeighbour { r } => infected >= r,
            Rule::Majority => 2 * infected >= degree,
            Rule::Boot { k, .. } => {
                let slack = k.saturating_sub(round) as f64 * self.gamma(degree);
                // 2|N ∩ A| >= d - 2 * slack, evaluated without rounding
                2.0 * infected as f64 >= degree as f64 - 2.0 * slack
            }
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rule::RNeighbour { r } => write!(f, "rneib:r={r}"),
            Rule::Majority => write!(f, "majority"),
            Rule::Boot { k, gamma_scale } => write!(f, "boot:k={k},gscale={gamma_scale}"),
        }
    }
}

/// Explicit enumeration of a graph with CSR adjacency, shared read-only by
/// all trials.
#[derive(Debug)]
pub struct Domain {
    handle: GraphHandle,
    verts: Vec<Vertex>,
    index: HashMap<Vertex, u32>,
    adj_offsets: Vec<u32>,
    adj: Vec<u32>,
    degree: Vec<u32>,
}

impl Domain {
    /// Enumerate and index the graph. Refuses above the explicit-scale cap.
    pub fn build(handle: &GraphHandle) -> Result<Arc<Domain>> {
        let verts = handle.enumerate()?;
        let index: HashMap<Vertex, u32> = verts
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as u32))
            .collect();
        let mut adj_offsets = Vec::with_capacity(verts.len() + 1);
        let mut adj = Vec::new();
        let mut degree = Vec::with_capacity(verts.len());
        adj_offsets.push(0);
        for &v in &verts {
            let nbrs = handle.neighbors(v)?;
            degree.push(nbrs.len() as u32);
            for w in nbrs {
                adj.push(index[&w]);
            }
            adj_offsets.push(adj.len() as u32);
        }
        Ok(Arc::new(Domain {
            handle: handle.clone(),
            verts,
            index,
            adj_offsets,
            adj,
            degree,
        }))
    }

    pub fn handle(&self) -> &GraphHandle {
        &self.handle
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.verts
    }

    pub fn vertex(&self, i: u32) -> Vertex {
        self.verts[i as usize]
    }

    pub fn index_of(&self, v: Vertex) -> Option<u32> {
        self.index.get(&v).copied()
    }

    pub fn degree_of(&self, i: u32) -> u32 {
        self.degree[i as usize]
    }

    pub fn neighbors_of(&self, i: u32) -> &[u32] {
        let lo = self.adj_offsets[i as usize] as usize;
        let hi = self.adj_offsets[i as usize + 1] as usize;
        &self.adj[lo..hi]
    }
}

const NEVER: u32 = u32::MAX;

/// The evolving infected set over an explicit domain.
#[derive(Clone, Debug)]
pub struct InfectionState {
    domain: Arc<Domain>,
    words: Vec<u64>,
    /// round at which each vertex became infected; `u32::MAX` = never,
    /// initially infected vertices carry round 0
    infected_at: Vec<u32>,
    round: u32,
    infected_count: u64,
    newly_per_round: Vec<u64>,
}

impl InfectionState {
    pub fn empty(domain: &Arc<Domain>) -> InfectionState {
        InfectionState {
            domain: domain.clone(),
            words: vec![0; domain.len().div_ceil(64)],
            infected_at: vec![NEVER; domain.len()],
            round: 0,
            infected_count: 0,
            newly_per_round: Vec::new(),
        }
    }

    pub fn full(domain: &Arc<Domain>) -> InfectionState {
        let mut s = Self::empty(domain);
        for i in 0..domain.len() as u32 {
            s.infect(i, 0);
        }
        s
    }

    /// Initial state from explicit members.
    pub fn from_members(domain: &Arc<Domain>, members: &[Vertex]) -> Result<InfectionState> {
        let mut s = Self::empty(domain);
        for &v in members {
            let i = domain.index_of(v).ok_or(Error::DomainMismatch)?;
            if !s.is_infected(i) {
                s.infect(i, 0);
            }
        }
        Ok(s)
    }

    fn infect(&mut self, i: u32, round: u32) {
        self.words[(i / 64) as usize] |= 1u64 << (i % 64);
        self.infected_at[i as usize] = round;
        self.infected_count += 1;
    }

    #[inline]
    pub fn is_infected(&self, i: u32) -> bool {
        (self.words[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn infected_count(&self) -> u64 {
        self.infected_count
    }

    /// The round at which vertex `i` entered the set (0 for the initial
    /// set), or `None` if it never did.
    pub fn infection_round(&self, i: u32) -> Option<u32> {
        let r = self.infected_at[i as usize];
        (r != NEVER).then_some(r)
    }

    pub fn newly_per_round(&self) -> &[u64] {
        &self.newly_per_round
    }

    pub fn is_full(&self) -> bool {
        self.infected_count == self.domain.len() as u64
    }

    pub fn is_subset_of(&self, other: &InfectionState) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn same_set(&self, other: &InfectionState) -> bool {
        self.words == other.words
    }

    pub fn infected_vertices(&self) -> Vec<Vertex> {
        (0..self.domain.len() as u32)
            .filter(|&i| self.is_infected(i))
            .map(|i| self.domain.vertex(i))
            .collect()
    }
}

/// Each vertex infected independently with probability `p`, driven by a
/// counter-based generator keyed on `(seed, vertex code)`: the draw for a
/// vertex does not depend on the enumeration order, and sharing a seed
/// across different `p` yields the standard monotone coupling.
pub fn sample_initial(domain: &Arc<Domain>, p: f64, seed: u64) -> InfectionState {
    let mut s = InfectionState::empty(domain);
    for (i, &v) in domain.vertices().iter().enumerate() {
        if rng::vertex_uniform(seed, v.0) < p {
            s.infect(i as u32, 0);
        }
    }
    s
}

/// One synchronous round: adds exactly the vertices meeting the threshold
/// against the current set, and advances the round counter.
pub fn step(state: &InfectionState, rule: &Rule) -> InfectionState {
    let domain = state.domain.clone();
    let mut next = state.clone();
    let round = state.round;
    for i in 0..domain.len() as u32 {
        if state.is_infected(i) {
            continue;
        }
        let infected_nbrs = domain
            .neighbors_of(i)
            .iter()
            .filter(|&&j| state.is_infected(j))
            .count() as u32;
        if rule.meets(domain.degree_of(i), infected_nbrs, round) {
            next.infect(i, round + 1);
        }
    }
    next.round = round + 1;
    next.newly_per_round
        .push(next.infected_count - state.infected_count);
    next
}

/// Result of iterating [`step`] to a fixed point.
#[derive(Clone, Debug)]
pub struct ClosureTrace {
    pub final_state: InfectionState,
    pub rule: Rule,
    /// Number of rounds after which nothing changes any more.
    pub rounds_to_stabilise: u32,
    pub percolated: bool,
    /// `|A_l|` for `l = 0, 1, ...` up to stabilisation.
    pub per_round_sizes: Vec<u64>,
    /// Vertices added in each round `1, 2, ...`.
    pub newly_per_round: Vec<u64>,
}

/// Iterate until a fixed point, using incremental infected-neighbour counts.
/// Produces exactly the same per-round sets as repeated [`step`] calls.
pub fn closure(state: &InfectionState, rule: &Rule, max_rounds: u32) -> Result<ClosureTrace> {
    let domain = state.domain.clone();
    let n = domain.len() as u32;
    let mut current = state.clone();
    let mut counts = vec![0u32; n as usize];
    let mut frontier: Vec<u32> = (0..n).filter(|&i| current.is_infected(i)).collect();
    for &i in &frontier {
        for &j in domain.neighbors_of(i) {
            counts[j as usize] += 1;
        }
    }
    let mut per_round_sizes = vec![current.infected_count];
    let mut rounds = 0u32;
    loop {
        if current.is_full() {
            break;
        }
        // while the rule still has a round-dependent threshold, every
        // uninfected vertex must be re-evaluated; afterwards only vertices
        // whose counts changed can newly qualify
        let threshold_settled = match rule {
            Rule::Boot { k, .. } => current.round >= *k,
            _ => true,
        };
        let mut newly: Vec<u32> = Vec::new();
        if threshold_settled && rounds > 0 {
            let mut candidates: Vec<u32> = frontier
                .iter()
                .flat_map(|&i| domain.neighbors_of(i).iter().copied())
                .filter(|&j| !current.is_infected(j))
                .collect();
            candidates.sort_unstable();
            candidates.dedup();
            for j in candidates {
                if rule.meets(domain.degree_of(j), counts[j as usize], current.round) {
                    newly.push(j);
                }
            }
        } else {
            for j in 0..n {
                if !current.is_infected(j)
                    && rule.meets(domain.degree_of(j), counts[j as usize], current.round)
                {
                    newly.push(j);
                }
            }
        }
        if newly.is_empty() {
            break;
        }
        if rounds == max_rounds {
            return Err(Error::RoundBudgetExceeded(max_rounds));
        }
        let round = current.round + 1;
        for &j in &newly {
            current.infect(j, round);
            for &k in domain.neighbors_of(j) {
                counts[k as usize] += 1;
            }
        }
        current.round = round;
        current.newly_per_round.push(newly.len() as u64);
        per_round_sizes.push(current.infected_count);
        frontier = newly;
        rounds += 1;
    }
    let percolated = current.is_full();
    Ok(ClosureTrace {
        newly_per_round: current.newly_per_round.clone(),
        rounds_to_stabilise: rounds,
        percolated,
        per_round_sizes,
        rule: *rule,
        final_state: current,
    })
}

/// Does the initial set infect the whole graph?
pub fn percolates(state: &InfectionState, rule: &Rule) -> bool {
    let budget = state.domain.len() as u32 + 1;
    closure(state, rule, budget)
        .expect("|V|+1 rounds always reach a fixed point")
        .percolated
}
