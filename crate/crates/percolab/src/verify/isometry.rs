//! All-pairs check that BFS distance on the permutahedron equals the
//! Hamming distance of inversion vectors.

use crate::error::{Error, Result};
use crate::graph::{inversion_vector, make_graph, GraphSpec};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct IsometryReport {
    pub n: u32,
    pub vertex_count: u64,
    pub pairs_checked: u64,
    pub verdict: bool,
    /// `(pi, sigma, bfs distance, inversion distance)` of the first mismatch
    pub first_mismatch: Option<(String, String, u32, u32)>,
}

fn factorial(m: u64) -> u128 {
    (1..=m as u128).product()
}

/// Compare BFS distance with the inversion-vector Hamming distance over all
/// vertex pairs of the `n`-dimensional permutahedron. Defaults to refusing
/// beyond 720 vertices (`n = 5`); `PERCOLAB_MAX_VERTICES` overrides.
pub fn verify_permutahedron_isometry(n: u32) -> Result<IsometryReport> {
    let needed = factorial(n as u64 + 1);
    let cap: u64 = std::env::var("PERCOLAB_MAX_VERTICES")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(720);
    if needed > cap as u128 {
        return Err(Error::ExplicitScaleExceeded { needed, cap });
    }
    let g = make_graph(GraphSpec::Permutahedron { n })?;
    let verts = g.enumerate()?;
    let inv: Vec<_> = verts
        .iter()
        .map(|&v| inversion_vector(&g, v))
        .collect::<Result<_>>()?;
    let diameter = n * (n + 1) / 2;
    let mut pairs_checked = 0u64;
    let mut first_mismatch = None;
    'outer: for (a, &x) in verts.iter().enumerate() {
        let ball = g.ball(x, diameter)?;
        for (b, &y) in verts.iter().enumerate().skip(a + 1) {
            let bfs = ball
                .distance_to(y)
                .expect("permutahedron is connected within its diameter");
            let hamming = inv[a].hamming(&inv[b]);
            pairs_checked += 1;
            if bfs != hamming {
                first_mismatch = Some((g.format_vertex(x), g.format_vertex(y), bfs, hamming));
                break 'outer;
            }
        }
    }
    Ok(IsometryReport {
        n,
        vertex_count: verts.len() as u64,
        pairs_checked,
        verdict: first_mismatch.is_none(),
        first_mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_graph, GraphSpec};

    #[test]
    fn hexagon_isometry() {
        let report = verify_permutahedron_isometry(2).unwrap();
        assert!(report.verdict);
        assert_eq!(report.vertex_count, 6);
        assert_eq!(report.pairs_checked, 15);
    }

    #[test]
    fn reverse_distance_matches_inversion_count() {
        // dist(id, reverse) equals the number of inverted pairs
        for (n, expect) in [(2u32, 3u32), (3, 6)] {
            let g = make_graph(GraphSpec::Permutahedron { n }).unwrap();
            let id = g.root();
            let word: String = (1..=n + 1).rev().map(|d| d.to_string()).collect();
            let rev = g.parse_vertex(&word).unwrap();
            assert_eq!(g.distance(id, rev).unwrap(), expect);
            let iv = inversion_vector(&g, rev).unwrap();
            assert_eq!(iv.count_ones(), expect);
        }
    }

    #[test]
    fn diagonal_pairs_are_trivially_isometric() {
        let g = make_graph(GraphSpec::Permutahedron { n: 3 }).unwrap();
        let v = g.parse_vertex("3142").unwrap();
        assert_eq!(g.distance(v, v).unwrap(), 0);
        let iv = inversion_vector(&g, v).unwrap();
        assert_eq!(iv.hamming(&iv), 0);
    }

    #[test]
    fn refuses_beyond_the_cap() {
        let err = verify_permutahedron_isometry(7).unwrap_err();
        assert!(matches!(err, Error::ExplicitScaleExceeded { .. }));
    }
}
