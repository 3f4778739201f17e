//! Executable structural property checks with counterexample reporting.
//!
//! Each property is evaluated literally, per root and radius, against the
//! family's typicality classifier. A failing report carries concrete
//! counterexamples that re-fail their predicate when re-evaluated in
//! isolation (see [`recheck_counterexample`]).

mod isometry;
mod witness;

pub use isometry::{verify_permutahedron_isometry, IsometryReport};
pub use witness::{
    build_witness, count_cherries, deviation_report, layer_weight, witness_stats,
    DeviationReport, SizePolicy, Witness, WitnessStats,
};

use crate::error::{Error, Result};
use crate::graph::{projection_subgraph, BallView, GraphHandle, Vertex};
use serde::Serialize;
use std::collections::{HashMap, HashSet};
use std::fmt;

const MAX_COUNTEREXAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PropertyId {
    P1,
    P2,
    P3i,
    P3ii,
    P3iii,
    P3iv,
    P3v,
    P4,
    P5,
    P6,
}

impl PropertyId {
    pub const ALL: [PropertyId; 10] = [
        PropertyId::P1,
        PropertyId::P2,
        PropertyId::P3i,
        PropertyId::P3ii,
        PropertyId::P3iii,
        PropertyId::P3iv,
        PropertyId::P3v,
        PropertyId::P4,
        PropertyId::P5,
        PropertyId::P6,
    ];

    pub fn parse(text: &str) -> Result<PropertyId> {
        match text {
            "P1" => Ok(PropertyId::P1),
            "P2" => Ok(PropertyId::P2),
            "P3i" => Ok(PropertyId::P3i),
            "P3ii" => Ok(PropertyId::P3ii),
            "P3iii" => Ok(PropertyId::P3iii),
            "P3iv" => Ok(PropertyId::P3iv),
            "P3v" => Ok(PropertyId::P3v),
            "P4" => Ok(PropertyId::P4),
            "P5" => Ok(PropertyId::P5),
            "P6" => Ok(PropertyId::P6),
            _ => Err(Error::DomainError(format!("unknown property `{text}`"))),
        }
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Which roots to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum RootScope {
    Exhaustive,
    Sample { count: u32, seed: u64 },
}

impl RootScope {
    /// Exhaustive roots up to 4096 vertices, seeded sampling beyond.
    pub fn auto(g: &GraphHandle) -> RootScope {
        if g.vertex_count() <= 4096 {
            RootScope::Exhaustive
        } else {
            RootScope::Sample { count: 100, seed: 1 }
        }
    }

    /// Parse `exhaustive` or `sample:<count>:seed=<seed>`.
    pub fn parse(text: &str) -> Result<RootScope> {
        if text == "exhaustive" {
            return Ok(RootScope::Exhaustive);
        }
        let bad = || Error::DomainError(format!("bad root scope `{text}`"));
        let rest = text.strip_prefix("sample:").ok_or_else(bad)?;
        let (count, seed_part) = rest.split_once(':').ok_or_else(bad)?;
        let count = count.parse().map_err(|_| bad())?;
        let seed = seed_part
            .strip_prefix("seed=")
            .and_then(|s| s.parse().ok())
            .ok_or_else(bad)?;
        Ok(RootScope::Sample { count, seed })
    }
}

impl fmt::Display for RootScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RootScope::Exhaustive => write!(f, "exhaustive"),
            RootScope::Sample { count, seed } => write!(f, "sample:{count}:seed={seed}"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CounterExample {
    pub root: String,
    pub ell: u32,
    pub vertices: Vec<String>,
    pub detail: String,
    #[serde(skip)]
    pub raw_root: Vertex,
    #[serde(skip)]
    pub raw_vertices: Vec<Vertex>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub graph: String,
    pub property: PropertyId,
    pub k: u32,
    pub l_max: u32,
    pub scope: String,
    pub roots_checked: u64,
    pub verdict: bool,
    pub counterexamples: Vec<CounterExample>,
}

fn ce(
    g: &GraphHandle,
    root: Vertex,
    ell: u32,
    vertices: Vec<Vertex>,
    detail: String,
) -> CounterExample {
    CounterExample {
        root: g.format_vertex(root),
        ell,
        vertices: vertices.iter().map(|&v| g.format_vertex(v)).collect(),
        detail,
        raw_root: root,
        raw_vertices: vertices,
    }
}

/// `K^(l-1) d^(l-1)` as u128 (the sphere bounds of the typical-structure
/// and separation properties).
fn power_bound(k: u32, d: u32, ell: u32) -> u128 {
    (0..ell.saturating_sub(1)).fold(1u128, |acc, _| {
        acc.saturating_mul(k as u128).saturating_mul(d as u128)
    })
}

/// Evaluate one property over the requested roots.
pub fn verify_property(
    g: &GraphHandle,
    property: PropertyId,
    k: u32,
    l_max: u32,
    scope: RootScope,
) -> Result<PropertyReport> {
    if l_max < 1 {
        return Err(Error::DomainError("l_max must be >= 1".into()));
    }
    let mut report = PropertyReport {
        graph: g.spec_string(),
        property,
        k,
        l_max,
        scope: scope.to_string(),
        roots_checked: 0,
        verdict: true,
        counterexamples: Vec::new(),
    };

    if property == PropertyId::P6 {
        report.roots_checked = 0;
        if let Some(detail) = check_order_bound(g) {
            report.verdict = false;
            report.counterexamples.push(ce(g, g.root(), 0, vec![], detail));
        }
        return Ok(report);
    }

    let roots: Vec<Vertex> = match scope {
        RootScope::Exhaustive => g.enumerate()?,
        RootScope::Sample { count, seed } => (0..count)
            .map(|i| g.random_vertex(seed, i as u64))
            .collect::<Result<_>>()?,
    };

    'roots: for &x in &roots {
        report.roots_checked += 1;
        let ball = g.ball(x, l_max + 1)?;
        for ell in 1..=l_max {
            let found = check_property_at(g, property, k, x, ell, &ball)?;
            for item in found {
                report.verdict = false;
                if report.counterexamples.len() < MAX_COUNTEREXAMPLES {
                    report.counterexamples.push(item);
                } else {
                    break 'roots;
                }
            }
        }
    }
    Ok(report)
}

/// Convenience: run several properties and merge the verdicts.
pub fn verify_properties(
    g: &GraphHandle,
    properties: &[PropertyId],
    k: u32,
    l_max: u32,
    scope: RootScope,
) -> Result<Vec<PropertyReport>> {
    properties
        .iter()
        .map(|&p| verify_property(g, p, k, l_max, scope))
        .collect()
}

fn typical_sphere(g: &GraphHandle, x: Vertex, ball: &BallView, ell: u32) -> Result<Vec<Vertex>> {
    ball.sphere(ell)
        .iter()
        .copied()
        .filter_map(|y| match g.is_typical(x, y) {
            Ok(true) => Some(Ok(y)),
            Ok(false) => None,
            Err(e) => Some(Err(e)),
        })
        .collect()
}

fn check_property_at(
    g: &GraphHandle,
    property: PropertyId,
    k: u32,
    x: Vertex,
    ell: u32,
    ball: &BallView,
) -> Result<Vec<CounterExample>> {
    let mut out = Vec::new();
    let dx = g.degree(x)?;
    match property {
        PropertyId::P1 => {
            // locally almost regular: |d(x) - d(y)| <= K l on S(x, l)
            for &y in ball.sphere(ell) {
                let dy = g.degree(y)?;
                let gap = dx.abs_diff(dy);
                if gap > k * ell {
                    out.push(ce(g, x, ell, vec![y], format!("|d(x)-d(y)| = {gap} > {}", k * ell)));
                }
            }
        }
        PropertyId::P2 => {
            // bounded backwards expansion: |N(y) ∩ B(x, l)| <= K l
            for &y in ball.sphere(ell) {
                let back = g
                    .neighbors(y)?
                    .into_iter()
                    .filter(|&z| ball.distance_to(z).is_some_and(|d| d <= ell))
                    .count() as u32;
                if back > k * ell {
                    out.push(ce(g, x, ell, vec![y], format!("|N(y) ∩ B(x,{ell})| = {back} > {}", k * ell)));
                }
            }
        }
        PropertyId::P3i => {
            // few non-typical vertices per sphere
            let mut atypical = Vec::new();
            for &y in ball.sphere(ell) {
                if !g.is_typical(x, y)? {
                    atypical.push(y);
                }
            }
            let bound = power_bound(k, dx, ell);
            if atypical.len() as u128 > bound {
                let count = atypical.len();
                atypical.truncate(4);
                out.push(ce(g, x, ell, atypical, format!("|D ∩ S(x,{ell})| = {count} > {bound}")));
            }
        }
        PropertyId::P3ii => {
            // typical vertices have few non-typical neighbours
            for y in typical_sphere(g, x, ball, ell)? {
                let bad = g
                    .neighbors(y)?
                    .into_iter()
                    .filter(|&z| !g.is_typical(x, z).unwrap_or(false))
                    .count() as u32;
                if bad > k * ell {
                    out.push(ce(g, x, ell, vec![y], format!("|D ∩ N(y)| = {bad} > {}", k * ell)));
                }
            }
        }
        PropertyId::P3iii => {
            // two typical vertices share at most one typical forward
            // neighbour; count via the centres of the next sphere
            let layer: HashSet<Vertex> = typical_sphere(g, x, ball, ell)?.into_iter().collect();
            let mut pair_counts: HashMap<(Vertex, Vertex), Vec<Vertex>> = HashMap::new();
            for v in typical_sphere(g, x, ball, ell + 1)? {
                let back: Vec<Vertex> = g
                    .neighbors(v)?
                    .into_iter()
                    .filter(|w| layer.contains(w))
                    .collect();
                for i in 0..back.len() {
                    for j in i + 1..back.len() {
                        let key = (back[i].min(back[j]), back[i].max(back[j]));
                        pair_counts.entry(key).or_default().push(v);
                    }
                }
            }
            let mut offenders: Vec<_> = pair_counts
                .into_iter()
                .filter(|(_, centres)| centres.len() > 1)
                .collect();
            offenders.sort_by_key(|((u, w), _)| (*u, *w));
            for ((u, w), centres) in offenders {
                let mut vs = vec![u, w];
                let n = centres.len();
                vs.extend(centres.into_iter().take(2));
                out.push(ce(g, x, ell, vs, format!("{n} common forward neighbours")));
                if out.len() >= MAX_COUNTEREXAMPLES {
                    return Ok(out);
                }
            }
        }
        PropertyId::P3iv => {
            // a typical vertex at distance l has at most l backward edges
            for v in typical_sphere(g, x, ball, ell)? {
                let back = g
                    .neighbors(v)?
                    .into_iter()
                    .filter(|&z| ball.distance_to(z) == Some(ell - 1))
                    .count() as u32;
                if back > ell {
                    out.push(ce(g, x, ell, vec![v], format!("{back} neighbours in S(x,{})", ell - 1)));
                }
            }
        }
        PropertyId::P3v => {
            // every cherry closes into a 4-cycle through the previous sphere
            let layer: HashSet<Vertex> = typical_sphere(g, x, ball, ell)?.into_iter().collect();
            for v in typical_sphere(g, x, ball, ell + 1)? {
                let back: Vec<Vertex> = g
                    .neighbors(v)?
                    .into_iter()
                    .filter(|w| layer.contains(w))
                    .collect();
                for i in 0..back.len() {
                    for j in i + 1..back.len() {
                        let (u, w) = (back[i], back[j]);
                        if !cherry_closes(g, x, ell, ball, u, w)? {
                            out.push(ce(
                                g,
                                x,
                                ell,
                                vec![u, v, w],
                                "cherry has no common neighbour in the previous typical sphere"
                                    .into(),
                            ));
                            if out.len() >= MAX_COUNTEREXAMPLES {
                                return Ok(out);
                            }
                        }
                    }
                }
            }
        }
        PropertyId::P4 => {
            for &y in ball.sphere(ell) {
                if let Some(detail) = check_projection(g, x, y, ell, k, ball)? {
                    out.push(ce(g, x, ell, vec![y], detail));
                    if out.len() >= MAX_COUNTEREXAMPLES {
                        return Ok(out);
                    }
                }
            }
        }
        PropertyId::P5 => {
            // separation: |B(y, 2l-1) ∩ S_0(x, l)| <= l K^(l-1) d^(l-1)
            let bound = (ell as u128).saturating_mul(power_bound(k, dx, ell));
            for y in typical_sphere(g, x, ball, ell)? {
                let near = g.ball(y, 2 * ell - 1)?;
                let mut count: u128 = 0;
                for (z, _) in near.members() {
                    if g.distance(x, z)? == ell && g.is_typical(x, z)? {
                        count += 1;
                    }
                }
                if count > bound {
                    out.push(ce(g, x, ell, vec![y], format!(
                        "|B(y,{}) ∩ S_0(x,{ell})| = {count} > {bound}",
                        2 * ell - 1
                    )));
                }
            }
        }
        PropertyId::P6 => unreachable!("handled globally"),
    }
    Ok(out)
}

fn cherry_closes(
    g: &GraphHandle,
    x: Vertex,
    ell: u32,
    ball: &BallView,
    u: Vertex,
    w: Vertex,
) -> Result<bool> {
    let nbrs_w: HashSet<Vertex> = g.neighbors(w)?.into_iter().collect();
    for z in g.neighbors(u)? {
        if nbrs_w.contains(&z)
            && ball.distance_to(z) == Some(ell - 1)
            && g.is_typical(x, z)?
        {
            return Ok(true);
        }
    }
    Ok(false)
}

/// The four clauses of the projection property for a single target vertex.
fn check_projection(
    g: &GraphHandle,
    x: Vertex,
    y: Vertex,
    ell: u32,
    k: u32,
    ball: &BallView,
) -> Result<Option<String>> {
    let proj = projection_subgraph(g, x, y, ell)?;
    if !proj.contains(y) {
        return Ok(Some("projection does not contain y".into()));
    }
    // disjoint from B(x, l-1)
    for (z, dist) in ball.members() {
        if dist < ell && proj.contains(z) {
            return Ok(Some(format!(
                "projection meets B(x,{}) at {}",
                ell - 1,
                g.format_vertex(z)
            )));
        }
    }
    // degree deficit bounded by K l over the whole projection
    for w in proj.enumerate()? {
        let deficit = g.degree(w)?.abs_diff(proj.degree(w)?);
        if deficit > k * ell {
            return Ok(Some(format!(
                "degree deficit {deficit} > {} at {}",
                k * ell,
                g.format_vertex(w)
            )));
        }
    }
    Ok(None)
}

/// The global order bound: `|V| < exp(delta^(3/2) ln ln delta / ln^2 delta)`,
/// natural logarithms, strict.
fn check_order_bound(g: &GraphHandle) -> Option<String> {
    let delta = g.min_degree() as f64;
    if delta < 2.0 {
        return Some(format!("minimum degree {delta} too small for the order bound"));
    }
    let bound_log = delta.powf(1.5) * delta.ln().ln() / delta.ln().powi(2);
    let ln_v = (g.vertex_count() as f64).ln();
    if ln_v < bound_log {
        None
    } else {
        Some(format!(
            "ln |V| = {ln_v:.4} >= {bound_log:.4} = delta^(3/2) lnln(delta)/ln^2(delta)"
        ))
    }
}

/// Re-evaluate the predicate of a reported counterexample in isolation.
/// Returns true when the counterexample still violates the property.
pub fn recheck_counterexample(
    g: &GraphHandle,
    property: PropertyId,
    k: u32,
    item: &CounterExample,
) -> Result<bool> {
    let x = item.raw_root;
    let ell = item.ell;
    match property {
        PropertyId::P6 => Ok(check_order_bound(g).is_some()),
        PropertyId::P1 => {
            let y = item.raw_vertices[0];
            Ok(g.degree(x)?.abs_diff(g.degree(y)?) > k * ell)
        }
        PropertyId::P2 => {
            let y = item.raw_vertices[0];
            let mut back = 0;
            for z in g.neighbors(y)? {
                if g.distance(x, z)? <= ell {
                    back += 1;
                }
            }
            Ok(back > k * ell)
        }
        PropertyId::P3ii => {
            let y = item.raw_vertices[0];
            let mut bad = 0;
            for z in g.neighbors(y)? {
                if !g.is_typical(x, z)? {
                    bad += 1;
                }
            }
            Ok(bad > k * ell)
        }
        PropertyId::P3iii => {
            let (u, w) = (item.raw_vertices[0], item.raw_vertices[1]);
            let nbrs_w: HashSet<Vertex> = g.neighbors(w)?.into_iter().collect();
            let mut common = 0;
            for v in g.neighbors(u)? {
                if nbrs_w.contains(&v) && g.distance(x, v)? == ell + 1 && g.is_typical(x, v)? {
                    common += 1;
                }
            }
            Ok(common > 1)
        }
        PropertyId::P3iv => {
            let v = item.raw_vertices[0];
            let mut back = 0;
            for z in g.neighbors(v)? {
                if g.distance(x, z)? == ell - 1 {
                    back += 1;
                }
            }
            Ok(back > ell)
        }
        PropertyId::P3v => {
            let (u, v, w) = (
                item.raw_vertices[0],
                item.raw_vertices[1],
                item.raw_vertices[2],
            );
            // confirm the cherry structure itself
            if !(g.neighbors(v)?.contains(&u) && g.neighbors(v)?.contains(&w)) {
                return Ok(false);
            }
            if !(g.distance(x, u)? == ell && g.distance(x, w)? == ell && g.distance(x, v)? == ell + 1) {
                return Ok(false);
            }
            let nbrs_w: HashSet<Vertex> = g.neighbors(w)?.into_iter().collect();
            for z in g.neighbors(u)? {
                if nbrs_w.contains(&z) && g.distance(x, z)? == ell - 1 && g.is_typical(x, z)? {
                    return Ok(false); // it closes after all
                }
            }
            Ok(true)
        }
        PropertyId::P3i | PropertyId::P5 | PropertyId::P4 => {
            // sphere-level statements: re-evaluate from a fresh ball
            let ball = g.ball(x, ell + 1)?;
            let found = check_property_at(g, property, k, x, ell, &ball)?;
            Ok(found.iter().any(|f| f.raw_vertices == item.raw_vertices))
        }
    }
}

#[cfg(test)]
mod tests;
