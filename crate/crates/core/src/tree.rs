//! Geometry of the Cayley tree of order `k`.
//!
//! Vertices are numbered in breadth-first order starting from the root `x0`:
//! the root owns indices `1..=k+1`, and every later vertex owns a block of `k`
//! consecutive indices on the next sphere, in the order of its own index.
//! Under this layout the ball `V_n` is exactly the index range
//! `0..ball_size(n)`.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEPTH: usize = 16;

/// Index of a vertex in the breadth-first enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vertex(pub usize);

impl Vertex {
    pub const ROOT: Vertex = Vertex(0);

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// The Cayley tree `Γ^k`: every vertex has `k + 1` neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TreeGeometry {
    order: u32,
    max_depth: usize,
}

impl TreeGeometry {
    pub fn new(order: u32) -> Result<Self> {
        Self::with_max_depth(order, DEFAULT_MAX_DEPTH)
    }

    pub fn with_max_depth(order: u32, max_depth: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidOrder(order));
        }
        let g = TreeGeometry { order, max_depth };
        // Reject depth caps whose ball does not fit in an index.
        g.ball_size(max_depth)?;
        Ok(g)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    fn check_depth(&self, n: usize) -> Result<()> {
        if n > self.max_depth {
            Err(Error::DepthExceeded {
                requested: n,
                max: self.max_depth,
            })
        } else {
            Ok(())
        }
    }

    /// `|W_n|`: 1 for the root, `(k+1)·k^(n-1)` afterwards.
    pub fn sphere_size(&self, n: usize) -> Result<usize> {
        self.check_depth(n)?;
        sphere_len(self.order, n).ok_or(Error::Overflow("computing a sphere size"))
    }

    /// `|V_n| = Σ_{m ≤ n} |W_m|`.
    pub fn ball_size(&self, n: usize) -> Result<usize> {
        self.check_depth(n)?;
        ball_len(self.order, n).ok_or(Error::Overflow("computing a ball size"))
    }

    /// Index range of `V_n`.
    pub fn ball_vertices(&self, n: usize) -> Result<Range<usize>> {
        Ok(0..self.ball_size(n)?)
    }

    /// Index range of `W_n`.
    pub fn sphere_vertices(&self, n: usize) -> Result<Range<usize>> {
        let end = self.ball_size(n)?;
        Ok(end - self.sphere_size(n)?..end)
    }

    /// Distance from the root. Defined for every index, independent of the
    /// depth cap.
    pub fn level(&self, v: Vertex) -> usize {
        let mut n = 0;
        while ball_len(self.order, n).is_some_and(|b| b <= v.0) {
            n += 1;
        }
        n
    }

    /// `(level, position within the sphere)`.
    pub fn position(&self, v: Vertex) -> (usize, usize) {
        let n = self.level(v);
        let start = if n == 0 {
            0
        } else {
            ball_len(self.order, n - 1).expect("smaller than v")
        };
        (n, v.0 - start)
    }

    pub fn parent(&self, v: Vertex) -> Option<Vertex> {
        let (n, pos) = self.position(v);
        match n {
            0 => None,
            1 => Some(Vertex::ROOT),
            _ => {
                let start = if n == 2 {
                    1
                } else {
                    ball_len(self.order, n - 2).expect("smaller than v")
                };
                Some(Vertex(start + pos / self.order as usize))
            }
        }
    }

    /// Number of children: `k + 1` at the root, `k` elsewhere.
    pub fn child_count(&self, v: Vertex) -> usize {
        if v == Vertex::ROOT {
            self.order as usize + 1
        } else {
            self.order as usize
        }
    }

    /// Children of `v` as a consecutive, increasing index range.
    pub fn children(&self, v: Vertex) -> Range<usize> {
        let k = self.order as usize;
        let (n, pos) = self.position(v);
        if n == 0 {
            return 1..k + 2;
        }
        let start = ball_len(self.order, n).expect("index fits") + pos * k;
        start..start + k
    }

    /// Length of the shortest path between `u` and `v`.
    pub fn distance(&self, u: Vertex, v: Vertex) -> usize {
        let (mut a, mut b) = (u, v);
        let (mut la, mut lb) = (self.level(a), self.level(b));
        let mut steps = 0;
        while la > lb {
            a = self.parent(a).expect("non-root has a parent");
            la -= 1;
            steps += 1;
        }
        while lb > la {
            b = self.parent(b).expect("non-root has a parent");
            lb -= 1;
            steps += 1;
        }
        while a != b {
            a = self.parent(a).expect("distinct vertices at level 0 are impossible");
            b = self.parent(b).expect("distinct vertices at level 0 are impossible");
            steps += 2;
        }
        steps
    }
}

fn sphere_len(k: u32, n: usize) -> Option<usize> {
    if n == 0 {
        return Some(1);
    }
    let k = k as usize;
    let exp = u32::try_from(n - 1).ok()?;
    (k + 1).checked_mul(k.checked_pow(exp)?)
}

fn ball_len(k: u32, n: usize) -> Option<usize> {
    (0..=n).try_fold(0usize, |acc, m| acc.checked_add(sphere_len(k, m)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    #[test]
    fn children_follow_bfs_layout() {
        let g = TreeGeometry::new(2).unwrap();
        assert_eq!(g.children(Vertex(0)), 1..4);
        assert_eq!(g.children(Vertex(1)), 4..6);
        assert_eq!(g.children(Vertex(3)), 8..10);
        let line = TreeGeometry::new(1).unwrap();
        assert_eq!(line.children(Vertex(0)), 1..3);
        assert_eq!(line.children(Vertex(2)), 4..5);
    }

    #[test]
    fn sizes() {
        let g2 = TreeGeometry::new(2).unwrap();
        assert_eq!(g2.ball_size(2).unwrap(), 10);
        assert_eq!(TreeGeometry::new(1).unwrap().sphere_size(3).unwrap(), 2);
        assert_eq!(TreeGeometry::new(3).unwrap().sphere_size(3).unwrap(), 36);
        assert_eq!(g2.sphere_vertices(2).unwrap(), 4..10);
    }

    #[test]
    fn depth_cap_is_an_error() {
        let g = TreeGeometry::with_max_depth(2, 4).unwrap();
        assert_eq!(
            g.ball_size(5),
            Err(Error::DepthExceeded {
                requested: 5,
                max: 4
            })
        );
        assert!(TreeGeometry::new(0).is_err());
        assert!(TreeGeometry::with_max_depth(2, 200).is_err());
    }

    #[test]
    fn distances() {
        let g = TreeGeometry::new(2).unwrap();
        assert_eq!(g.distance(Vertex(5), Vertex(5)), 0);
        assert_eq!(g.distance(Vertex(1), Vertex(2)), 2);
        assert_eq!(g.distance(Vertex(4), Vertex(3)), 3);
    }

    /// Adjacency lists built by growing the tree one vertex at a time,
    /// without using the index arithmetic.
    fn grown_adjacency(k: usize, depth: usize) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = vec![vec![]];
        let mut frontier = vec![0usize];
        for _ in 0..depth {
            let mut next = vec![];
            for &v in &frontier {
                let kids = if v == 0 { k + 1 } else { k };
                for _ in 0..kids {
                    let c = adj.len();
                    adj.push(vec![v]);
                    adj[v].push(c);
                    next.push(c);
                }
            }
            frontier = next;
        }
        adj
    }

    fn bfs_distances(adj: &[Vec<usize>], from: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; adj.len()];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    #[test]
    fn distance_matches_graph_search() {
        let g = TreeGeometry::new(2).unwrap();
        let adj = grown_adjacency(2, 4);
        for u in 0..adj.len() {
            let d = bfs_distances(&adj, u);
            for (v, &dv) in d.iter().enumerate() {
                assert_eq!(g.distance(Vertex(u), Vertex(v)), dv, "({u},{v})");
            }
        }
    }

    #[test]
    fn metric_axioms_on_ball_four() {
        let g = TreeGeometry::new(2).unwrap();
        let n = g.ball_size(4).unwrap();
        let d: Vec<Vec<usize>> = (0..n)
            .map(|u| (0..n).map(|v| g.distance(Vertex(u), Vertex(v))).collect())
            .collect();
        for u in 0..n {
            for v in 0..n {
                assert_eq!(d[u][v], d[v][u]);
                assert_eq!(d[u][v] == 0, u == v);
                for w in 0..n {
                    assert!(d[u][w] <= d[u][v] + d[v][w]);
                }
            }
        }
    }

    #[test]
    fn parent_inverts_children() {
        for k in 1..=3 {
            let g = TreeGeometry::new(k).unwrap();
            for v in g.ball_vertices(6).unwrap() {
                for c in g.children(Vertex(v)) {
                    assert_eq!(g.parent(Vertex(c)), Some(Vertex(v)));
                    assert_eq!(g.level(Vertex(c)), g.level(Vertex(v)) + 1);
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_iterated_children() {
        for k in 1..=3 {
            let g = TreeGeometry::new(k).unwrap();
            let mut frontier = vec![Vertex::ROOT];
            let mut total = 1;
            for n in 0..=8 {
                assert_eq!(g.sphere_size(n).unwrap(), frontier.len(), "k={k} n={n}");
                assert_eq!(g.ball_size(n).unwrap(), total, "k={k} n={n}");
                frontier = frontier
                    .iter()
                    .flat_map(|&v| g.children(v).map(Vertex))
                    .collect();
                total += frontier.len();
            }
        }
    }
}
