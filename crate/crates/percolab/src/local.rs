//! Exact-locality Monte Carlo estimation of `Pr[x in A_t]`.
//!
//! The state of `x` after `t` rounds depends only on the initial infections
//! inside `B(x, t)`, so the ball is sampled and evolved with a shrinking
//! horizon: round `j` re-evaluates only `B(x, t-j)`, whose members have their
//! full neighbourhood inside the already-correct region. The indicator of
//! `x in A_t` is then distributed exactly as in the full graph.

use crate::engine::Rule;
use crate::error::{Error, Result};
use crate::graph::{GraphHandle, Vertex};
use crate::rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

#[derive(Clone, Debug, Serialize)]
pub struct LocalEstimate {
    pub vertex: String,
    pub t: u32,
    pub p: f64,
    pub trials: u64,
    pub hits: u64,
    pub estimate: f64,
    pub ci_halfwidth_95: f64,
}

struct BallGraph {
    /// vertex codes of the ball members
    codes: Vec<u128>,
    /// distance from the centre per member
    dist: Vec<u32>,
    /// true degree in the host graph per member
    degree: Vec<u32>,
    /// CSR adjacency, filled only for members that ever get re-evaluated
    adj_offsets: Vec<u32>,
    adj: Vec<u32>,
    /// members grouped by distance
    by_dist: Vec<Vec<u32>>,
    center: u32,
}

fn build_ball_graph(g: &GraphHandle, x: Vertex, t: u32) -> Result<BallGraph> {
    let ball = g.ball(x, t)?;
    let mut members: Vec<(Vertex, u32)> = ball.members().collect();
    members.sort_unstable();
    let index: HashMap<Vertex, u32> = members
        .iter()
        .enumerate()
        .map(|(i, &(v, _))| (v, i as u32))
        .collect();
    let mut codes = Vec::with_capacity(members.len());
    let mut dist = Vec::with_capacity(members.len());
    let mut degree = Vec::with_capacity(members.len());
    let mut adj_offsets = vec![0u32];
    let mut adj = Vec::new();
    let mut by_dist = vec![Vec::new(); t as usize + 1];
    for (i, &(v, d)) in members.iter().enumerate() {
        codes.push(v.0);
        dist.push(d);
        degree.push(g.degree(v)?);
        by_dist[d as usize].push(i as u32);
        // vertices at distance < t are the only ones ever re-evaluated;
        // all their neighbours lie inside the ball
        if d < t {
            for w in g.neighbors(v)? {
                adj.push(index[&w]);
            }
        }
        adj_offsets.push(adj.len() as u32);
    }
    let center = index[&x];
    Ok(BallGraph { codes, dist, degree, adj_offsets, adj, by_dist, center })
}

/// Estimate `Pr[x in A_t]` from independent trials over `B(x, t)` only.
///
/// `t = 0` degenerates to estimating `p` itself.
pub fn local_round_prob(
    g: &GraphHandle,
    x: Vertex,
    t: u32,
    p: f64,
    rule: &Rule,
    trials: u64,
    seed: u64,
) -> Result<LocalEstimate> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::DomainError(format!("p = {p} is not a probability")));
    }
    if trials == 0 {
        return Err(Error::DomainError("trials must be >= 1".into()));
    }
    let ball = build_ball_graph(g, x, t)?;
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| run_trial(&ball, t, p, rule, rng::derive(seed, trial)) as u64)
        .sum();
    let estimate = hits as f64 / trials as f64;
    Ok(LocalEstimate {
        vertex: g.format_vertex(x),
        t,
        p,
        trials,
        hits,
        estimate,
        ci_halfwidth_95: 1.96 * (estimate * (1.0 - estimate) / trials as f64).sqrt(),
    })
}

fn run_trial(ball: &BallGraph, t: u32, p: f64, rule: &Rule, trial_seed: u64) -> bool {
    let mut infected: Vec<bool> = ball
        .codes
        .iter()
        .map(|&code| rng::vertex_uniform(trial_seed, code) < p)
        .collect();
    evolve_ball(ball, t, rule, &mut infected)
}

/// Shrinking-horizon evolution over a sampled ball: round `j` re-evaluates
/// only the members at distance at most `t - j`, whose neighbourhoods are
/// complete inside the ball. Returns whether the centre is infected after
/// round `t`.
fn evolve_ball(ball: &BallGraph, t: u32, rule: &Rule, infected: &mut [bool]) -> bool {
    let mut newly: Vec<u32> = Vec::new();
    for j in 1..=t {
        let horizon = t - j;
        newly.clear();
        for d in 0..=horizon {
            for &i in &ball.by_dist[d as usize] {
                if infected[i as usize] {
                    continue;
                }
                debug_assert!(ball.dist[i as usize] <= horizon);
                let lo = ball.adj_offsets[i as usize] as usize;
                let hi = ball.adj_offsets[i as usize + 1] as usize;
                let count = ball.adj[lo..hi]
                    .iter()
                    .filter(|&&w| infected[w as usize])
                    .count() as u32;
                if rule.meets(ball.degree[i as usize], count, j - 1) {
                    newly.push(i);
                }
            }
        }
        for &i in &newly {
            infected[i as usize] = true;
        }
    }
    infected[ball.center as usize]
}
