//! Percolation-probability estimation and threshold location.

pub mod formulas;
pub mod stars;

pub use formulas::{binomial_tail_at_least, critical_formula, tail_bound, TailBound};
pub use stars::{star_layer_report, verify_layer_degrees, LayerRow, StarLayerReport};

use crate::engine::{closure, percolates, sample_initial, Domain, InfectionState, Rule};
use crate::error::{Error, Result};
use crate::graph::GraphHandle;
use crate::rng;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;

/// Monte Carlo estimate of `Phi(p, G)`.
#[derive(Clone, Debug, Serialize)]
pub struct PhiEstimate {
    pub graph: String,
    pub rule: String,
    pub p: f64,
    pub trials: u64,
    pub percolated: u64,
    pub phi_hat: f64,
    pub ci_halfwidth_95: f64,
    pub seed: u64,
}

/// Independent trials of sample-then-percolate. Per-trial seeds are derived
/// from `(seed, trial index)`, so the result does not depend on the worker
/// count, and sharing `seed` across different `p` gives the monotone
/// coupling (each trial's initial set grows with `p`).
pub fn estimate_phi(
    domain: &Arc<Domain>,
    p: f64,
    rule: &Rule,
    trials: u64,
    seed: u64,
) -> Result<PhiEstimate> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::DomainError(format!("p = {p} is not a probability")));
    }
    if trials == 0 {
        return Err(Error::DomainError("trials must be >= 1".into()));
    }
    let percolated: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let s0 = sample_initial(domain, p, rng::derive(seed, trial));
            percolates(&s0, rule) as u64
        })
        .sum();
    let phi_hat = percolated as f64 / trials as f64;
    Ok(PhiEstimate {
        graph: domain.handle().spec_string(),
        rule: rule.to_string(),
        p,
        trials,
        percolated,
        phi_hat,
        ci_halfwidth_95: 1.96 * (phi_hat * (1.0 - phi_hat) / trials as f64).sqrt(),
        seed,
    })
}

/// Count of percolating initial sets by size, over all `2^|V|` subsets.
/// The evolution here is an independent bitmask implementation used as the
/// exhaustive oracle for the Monte Carlo path.
pub fn exact_percolation_table(g: &GraphHandle, rule: &Rule) -> Result<Vec<u64>> {
    let verts = g.enumerate()?;
    let nv = verts.len();
    if nv > 20 {
        return Err(Error::ExplicitScaleExceeded { needed: nv as u128, cap: 20 });
    }
    let mut adj = vec![0u32; nv];
    let mut deg = vec![0u32; nv];
    for (i, &v) in verts.iter().enumerate() {
        for w in g.neighbors(v)? {
            let j = verts.binary_search(&w).expect("neighbour must be a vertex");
            adj[i] |= 1 << j;
        }
        deg[i] = adj[i].count_ones();
    }
    let full: u32 = (1 << nv) - 1;
    let mut by_size = vec![0u64; nv + 1];
    for start in 0..=full {
        let mut mask = start;
        let mut round = 0;
        loop {
            let mut next = mask;
            for v in 0..nv {
                if mask & (1 << v) == 0 {
                    let cnt = (adj[v] & mask).count_ones();
                    if rule.meets(deg[v], cnt, round) {
                        next |= 1 << v;
                    }
                }
            }
            if next == mask {
                break;
            }
            mask = next;
            round += 1;
        }
        if mask == full {
            by_size[start.count_ones() as usize] += 1;
        }
    }
    Ok(by_size)
}

/// Exact `Phi(p, G)` by summation over every initial set, for graphs of at
/// most 20 vertices.
pub fn exact_phi_small(g: &GraphHandle, p: f64, rule: &Rule) -> Result<f64> {
    let table = exact_percolation_table(g, rule)?;
    Ok(phi_from_table(&table, p))
}

/// `Phi(p)` from a percolating-set-count table: `sum_k N_k p^k (1-p)^(V-k)`.
pub fn phi_from_table(by_size: &[u64], p: f64) -> f64 {
    let nv = by_size.len() - 1;
    let mut phi = 0.0;
    for (k, &count) in by_size.iter().enumerate() {
        if count > 0 {
            phi += count as f64 * p.powi(k as i32) * (1.0 - p).powi((nv - k) as i32);
        }
    }
    phi
}

/// Bisection bracket for the critical probability.
#[derive(Clone, Debug, Serialize)]
pub struct PcEstimate {
    pub graph: String,
    pub rule: String,
    pub p_lo: f64,
    pub p_hi: f64,
    pub trials_per_probe: u64,
    pub tolerance: f64,
    pub seed: u64,
    pub probes: Vec<PhiEstimate>,
}

/// Locate `p_c` by bisection on the coupled empirical curve. All probes
/// share one seed, so the probed curve is pathwise monotone in `p` and the
/// bracket `Phi(p_lo) < 1/2 <= Phi(p_hi)` is meaningful.
pub fn find_pc(
    domain: &Arc<Domain>,
    rule: &Rule,
    trials: u64,
    tol: f64,
    seed: u64,
) -> Result<PcEstimate> {
    if tol <= 0.0 || tol >= 1.0 {
        return Err(Error::DomainError(format!("tolerance {tol} out of range")));
    }
    let mut probes = Vec::new();
    let probe = |p: f64, probes: &mut Vec<PhiEstimate>| -> Result<f64> {
        let est = estimate_phi(domain, p, rule, trials, seed)?;
        let phi = est.phi_hat;
        probes.push(est);
        Ok(phi)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    if probe(hi, &mut probes)? < 0.5 {
        return Err(Error::NoCrossing);
    }
    if probe(lo, &mut probes)? >= 0.5 {
        // the bracket degenerates: phi crosses below every positive p
        return Ok(PcEstimate {
            graph: domain.handle().spec_string(),
            rule: rule.to_string(),
            p_lo: 0.0,
            p_hi: 0.0,
            trials_per_probe: trials,
            tolerance: tol,
            seed,
            probes,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut probes)? < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PcEstimate {
        graph: domain.handle().spec_string(),
        rule: rule.to_string(),
        p_lo: lo,
        p_hi: hi,
        trials_per_probe: trials,
        tolerance: tol,
        seed,
        probes,
    })
}

/// One coupled `PhiEstimate` per grid point, non-decreasing in `p` within a
/// single seed.
pub fn sweep(
    domain: &Arc<Domain>,
    rule: &Rule,
    p_grid: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<PhiEstimate>> {
    p_grid
        .iter()
        .map(|&p| estimate_phi(domain, p, rule, trials, seed))
        .collect()
}

/// CSV rows for a sweep, preceded by `#`-prefixed header lines echoing the
/// resolved configuration.
pub fn write_sweep_csv(
    out: &mut dyn Write,
    estimates: &[PhiEstimate],
    config_lines: &[String],
) -> Result<()> {
    for line in config_lines {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "graph,rule,p,trials,percolated,phi_hat,ci95,seed")?;
    for e in estimates {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.graph, e.rule, e.p, e.trials, e.percolated, e.phi_hat, e.ci_halfwidth_95, e.seed
        )?;
    }
    Ok(())
}

/// Parse a `start:end:count` grid description into explicit probabilities.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::DomainError(format!("grid `{text}` is not start:end:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let end: f64 = parts[1].parse().map_err(|_| bad())?;
    let count: usize = parts[2].parse().map_err(|_| bad())?;
    if count < 2 || !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) || end <= start {
        return Err(bad());
    }
    Ok((0..count)
        .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
        .collect())
}

/// First grid point at which the coupled curve reaches 1/2, with linear
/// interpolation between the straddling neighbours. `None` if the curve
/// never crosses.
pub fn crossing_point(estimates: &[PhiEstimate]) -> Option<f64> {
    let first = estimates.iter().position(|e| e.phi_hat >= 0.5)?;
    if first == 0 {
        return Some(estimates[0].p);
    }
    let (a, b) = (&estimates[first - 1], &estimates[first]);
    let t = (0.5 - a.phi_hat) / (b.phi_hat - a.phi_hat);
    Some(a.p + t * (b.p - a.p))
}

/// Simulate one closure and export the trace.
#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub graph: String,
    pub rule: String,
    pub p: f64,
    pub seed: u64,
    pub initial_infected: u64,
    pub rounds_to_stabilise: u32,
    pub percolated: bool,
    pub final_infected: u64,
    pub per_round_sizes: Vec<u64>,
    pub newly_per_round: Vec<u64>,
}

pub fn simulate(
    domain: &Arc<Domain>,
    p: f64,
    rule: &Rule,
    seed: u64,
    max_rounds: u32,
) -> Result<SimulationReport> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::DomainError(format!("p = {p} is not a probability")));
    }
    let s0 = sample_initial(domain, p, seed);
    let initial = s0.infected_count();
    let trace = closure(&s0, rule, max_rounds)?;
    Ok(SimulationReport {
        graph: domain.handle().spec_string(),
        rule: rule.to_string(),
        p,
        seed,
        initial_infected: initial,
        rounds_to_stabilise: trace.rounds_to_stabilise,
        percolated: trace.percolated,
        final_infected: trace.final_state.infected_count(),
        per_round_sizes: trace.per_round_sizes,
        newly_per_round: trace.newly_per_round,
    })
}

/// Evolve an explicit initial state for bounded rounds (diagnostics).
pub fn closure_of(state: &InfectionState, rule: &Rule) -> Result<crate::engine::ClosureTrace> {
    closure(state, rule, state.domain().len() as u32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_graph, GraphSpec};

    fn domain(spec: GraphSpec) -> Arc<Domain> {
        Domain::build(&make_graph(spec).unwrap()).unwrap()
    }

    #[test]
    fn phi_at_endpoints() {
        let d = domain(GraphSpec::Hypercube { n: 3 });
        let zero = estimate_phi(&d, 0.0, &Rule::Majority, 200, 1).unwrap();
        assert_eq!(zero.phi_hat, 0.0);
        let one = estimate_phi(&d, 1.0, &Rule::Majority, 200, 1).unwrap();
        assert_eq!(one.phi_hat, 1.0);
    }

    #[test]
    fn exact_phi_endpoints() {
        let g = make_graph(GraphSpec::Hypercube { n: 2 }).unwrap();
        assert_eq!(exact_phi_small(&g, 1.0, &Rule::Majority).unwrap(), 1.0);
        assert_eq!(exact_phi_small(&g, 0.0, &Rule::Majority).unwrap(), 0.0);
    }

    #[test]
    fn exact_phi_closed_form_on_four_cycle() {
        // with r = 1 every non-empty set percolates: Phi(p) = 1 - (1-p)^4
        let g = make_graph(GraphSpec::Hypercube { n: 2 }).unwrap();
        let rule = Rule::RNeighbour { r: 1 };
        for p in [0.1, 0.159104, 0.3, 0.7] {
            let phi = exact_phi_small(&g, p, &rule).unwrap();
            let closed = 1.0 - (1.0 - p).powi(4);
            assert!((phi - closed).abs() < 1e-12, "p={p}: {phi} vs {closed}");
        }
        // the closed form crosses 1/2 at 1 - 2^(-1/4)
        let pc = 1.0 - 0.5f64.powf(0.25);
        assert!((exact_phi_small(&g, pc, &rule).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn oracle_and_engine_agree_on_every_subset() {
        // the bitmask oracle and the CSR engine must classify each of the
        // 2^|V| initial sets identically
        for spec in [GraphSpec::Hypercube { n: 3 }, GraphSpec::Permutahedron { n: 2 }] {
            let g = make_graph(spec).unwrap();
            let d = Domain::build(&g).unwrap();
            let nv = d.len();
            for rule in [Rule::Majority, Rule::RNeighbour { r: 2 }] {
                let table = exact_percolation_table(&g, &rule).unwrap();
                let mut engine_table = vec![0u64; nv + 1];
                for mask in 0u32..1 << nv {
                    let members: Vec<_> = (0..nv)
                        .filter(|v| mask >> v & 1 == 1)
                        .map(|v| d.vertex(v as u32))
                        .collect();
                    let s0 = crate::engine::InfectionState::from_members(&d, &members).unwrap();
                    if crate::engine::percolates(&s0, &rule) {
                        engine_table[mask.count_ones() as usize] += 1;
                    }
                }
                assert_eq!(table, engine_table, "{} under {rule}", g.spec_string());
            }
        }
    }

    #[test]
    fn monte_carlo_agrees_with_exact_oracle() {
        let g = make_graph(GraphSpec::Hypercube { n: 2 }).unwrap();
        let d = Domain::build(&g).unwrap();
        let est = estimate_phi(&d, 0.3, &Rule::Majority, 30_000, 9).unwrap();
        let exact = exact_phi_small(&g, 0.3, &Rule::Majority).unwrap();
        let sigma = (exact * (1.0 - exact) / 30_000.0_f64).sqrt();
        assert!((est.phi_hat - exact).abs() < 3.0 * sigma);
    }

    #[test]
    fn pc_bracket_on_four_cycle() {
        let d = domain(GraphSpec::Hypercube { n: 2 });
        let pc = find_pc(&d, &Rule::RNeighbour { r: 1 }, 20_000, 1e-3, 77).unwrap();
        let truth = 1.0 - 0.5f64.powf(0.25);
        assert!(pc.p_hi - pc.p_lo <= 1e-3);
        assert!(
            (pc.p_lo - truth).abs() < 0.01 && (pc.p_hi - truth).abs() < 0.01,
            "bracket [{}, {}] vs {truth}",
            pc.p_lo,
            pc.p_hi
        );
    }

    #[test]
    fn probe_curve_is_monotone() {
        let d = domain(GraphSpec::Hypercube { n: 6 });
        let grid = parse_grid("0:1:11").unwrap();
        let ests = sweep(&d, &Rule::Majority, &grid, 2_000, 3).unwrap();
        for pair in ests.windows(2) {
            assert!(pair[0].phi_hat <= pair[1].phi_hat, "coupling must be monotone");
        }
    }

    #[test]
    fn sweep_endpoints_and_csv() {
        let d = domain(GraphSpec::Hypercube { n: 3 });
        let ests = sweep(&d, &Rule::Majority, &[0.0, 1.0], 500, 2).unwrap();
        assert_eq!(ests[0].phi_hat, 0.0);
        assert_eq!(ests[1].phi_hat, 1.0);
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &ests, &["graph=hypercube:n=3".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# graph=hypercube:n=3\n"));
        assert!(text.contains("graph,rule,p,trials,percolated,phi_hat,ci95,seed"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn grid_parsing() {
        let grid = parse_grid("0:1:21").unwrap();
        assert_eq!(grid.len(), 21);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[20], 1.0);
        assert!((grid[10] - 0.5).abs() < 1e-12);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("1:0:5").is_err());
    }

    #[test]
    fn crossing_point_interpolates() {
        let mk = |p: f64, phi: f64| PhiEstimate {
            graph: String::new(),
            rule: String::new(),
            p,
            trials: 1,
            percolated: 0,
            phi_hat: phi,
            ci_halfwidth_95: 0.0,
            seed: 0,
        };
        let ests = vec![mk(0.0, 0.0), mk(0.5, 0.25), mk(1.0, 1.0)];
        let c = crossing_point(&ests).unwrap();
        assert!((c - (0.5 + 0.5 * (0.25 / 0.75))).abs() < 1e-12);
        assert!(crossing_point(&[mk(0.0, 0.1), mk(1.0, 0.4)]).is_none());
    }
}
