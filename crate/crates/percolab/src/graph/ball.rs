//! BFS balls with exact distance labels.

use super::{GraphHandle, Vertex};
use crate::error::{Error, Result};
use std::collections::HashMap;

/// The ball `B(x, r)`: every vertex within distance `r` of the centre,
/// labelled with its exact distance, plus per-distance sphere lists.
#[derive(Clone, Debug)]
pub struct BallView {
    center: Vertex,
    radius: u32,
    dist: HashMap<Vertex, u32>,
    spheres: Vec<Vec<Vertex>>,
}

impl BallView {
    pub fn center(&self) -> Vertex {
        self.center
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        false // always contains the centre
    }

    /// Distance from the centre, if `v` lies in the ball.
    pub fn distance_to(&self, v: Vertex) -> Option<u32> {
        self.dist.get(&v).copied()
    }

    /// The sphere `S(x, l)`, sorted by canonical code. Empty slice when
    /// `l` exceeds the radius (or the graph ran out of vertices).
    pub fn sphere(&self, ell: u32) -> &[Vertex] {
        self.spheres
            .get(ell as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn members(&self) -> impl Iterator<Item = (Vertex, u32)> + '_ {
        self.dist.iter().map(|(&v, &d)| (v, d))
    }
}

pub(super) fn bfs_ball(g: &GraphHandle, x: Vertex, r: u32, cap: u64) -> Result<BallView> {
    let mut dist = HashMap::new();
    let mut spheres: Vec<Vec<Vertex>> = vec![vec![x]];
    dist.insert(x, 0);
    let mut frontier = vec![x];
    for d in 1..=r {
        let mut next = Vec::new();
        for &v in &frontier {
            for w in g.neighbors(v)? {
                if !dist.contains_key(&w) {
                    if dist.len() as u64 >= cap {
                        return Err(Error::BallTooLarge { cap });
                    }
                    dist.insert(w, d);
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        spheres.push(next.clone());
        frontier = next;
    }
    Ok(BallView { center: x, radius: r, dist, spheres })
}
