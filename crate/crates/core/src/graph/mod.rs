//! Sparse pose graph built from detected line segments.
//!
//! Segment endpoints that fall within a merge tolerance collapse into shared
//! nodes (union-find, centroid position), so chains of per-block segments
//! become connected polylines. A second pass adds *augmented* edges between
//! any remaining node pairs closer than a radius `zeta`, bridging gaps where
//! block detection dropped a segment.
//!
//! Edges are undirected but materialized in both directions, which is the
//! form message passing consumes.

mod io;

pub use io::{read_graph, write_graph};

use crate::line::LineSegment;

/// Graph node: a merged segment endpoint, in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub y: f64,
}

impl Node {
    pub fn pos(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn dist(&self, other: &Node) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Directed edge; every undirected connection appears once per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    /// True if the edge was added by proximity augmentation rather than a
    /// detected segment.
    pub augmented: bool,
}

/// Node merging and augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    /// Endpoints within this distance (pixels) merge into one node.
    pub merge_tol: f64,
    /// Augmentation radius in pixels; node pairs strictly closer than this
    /// get an edge. Zero disables augmentation.
    pub zeta: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            merge_tol: 0.5,
            zeta: 15.0,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> crate::error::Result<()> {
        if !self.merge_tol.is_finite() || self.merge_tol < 0.0 {
            return Err(crate::error::Error::InvalidConfig(format!(
                "merge_tol must be finite and non-negative, got {}",
                self.merge_tol
            )));
        }
        if !self.zeta.is_finite() || self.zeta < 0.0 {
            return Err(crate::error::Error::InvalidConfig(format!(
                "zeta must be finite and non-negative, got {}",
                self.zeta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoseGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Attach the later root to the earlier one so representatives
            // keep first-appearance order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Merge segment endpoints into nodes and connect each segment's two ends.
///
/// Merging is transitive: a chain of endpoints pairwise within `merge_tol`
/// collapses into one node at the centroid of all its members. Segments whose
/// two endpoints merge together contribute no edge, and duplicate
/// connections collapse to one.
pub fn build_graph(segments: &[LineSegment], cfg: &GraphConfig) -> PoseGraph {
    let mut points = Vec::with_capacity(segments.len() * 2);
    for s in segments {
        let (p0, p1) = s.endpoints();
        points.push(p0);
        points.push(p1);
    }

    let mut uf = UnionFind::new(points.len());
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            if (dx * dx + dy * dy).sqrt() <= cfg.merge_tol {
                uf.union(i, j);
            }
        }
    }

    // Clusters numbered by first appearance, positions at member centroids.
    let mut cluster_of = vec![usize::MAX; points.len()];
    let mut nodes: Vec<Node> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for i in 0..points.len() {
        let root = uf.find(i);
        if cluster_of[root] == usize::MAX {
            cluster_of[root] = nodes.len();
            nodes.push(Node { x: 0.0, y: 0.0 });
            counts.push(0);
        }
        let c = cluster_of[root];
        cluster_of[i] = c;
        nodes[c].x += points[i][0];
        nodes[c].y += points[i][1];
        counts[c] += 1;
    }
    for (node, &n) in nodes.iter_mut().zip(&counts) {
        node.x /= n as f64;
        node.y /= n as f64;
    }

    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for (k, _) in segments.iter().enumerate() {
        let a = cluster_of[2 * k];
        let b = cluster_of[2 * k + 1];
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            edges.push(Edge { src: a, dst: b, augmented: false });
            edges.push(Edge { src: b, dst: a, augmented: false });
        }
    }

    PoseGraph { nodes, edges }
}

impl PoseGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Directed edge count (twice the number of connections).
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.edges.iter().any(|e| e.src == src && e.dst == dst)
    }

    /// Relative position `dst - src` for an edge.
    pub fn rel(&self, e: &Edge) -> [f64; 2] {
        [
            self.nodes[e.dst].x - self.nodes[e.src].x,
            self.nodes[e.dst].y - self.nodes[e.src].y,
        ]
    }

    /// Connect every unconnected node pair strictly closer than `zeta`,
    /// flagging the new edges as augmented. Idempotent; `zeta = 0` is a
    /// no-op.
    pub fn augment(&mut self, zeta: f64) {
        if zeta <= 0.0 {
            return;
        }
        let mut connected: std::collections::HashSet<(usize, usize)> = self
            .edges
            .iter()
            .map(|e| (e.src.min(e.dst), e.src.max(e.dst)))
            .collect();
        for i in 0..self.nodes.len() {
            for j in (i + 1)..self.nodes.len() {
                if self.nodes[i].dist(&self.nodes[j]) < zeta && connected.insert((i, j)) {
                    self.edges.push(Edge { src: i, dst: j, augmented: true });
                    self.edges.push(Edge { src: j, dst: i, augmented: true });
                }
            }
        }
    }

    /// Per-node input features: position normalized by the sensor size.
    pub fn node_features(&self, width: u32, height: u32) -> ndarray::Array2<f64> {
        let mut x = ndarray::Array2::zeros((self.nodes.len(), 2));
        for (i, n) in self.nodes.iter().enumerate() {
            x[[i, 0]] = n.x / width as f64;
            x[[i, 1]] = n.y / height as f64;
        }
        x
    }

    /// Per-edge pseudo-coordinates: the relative position scaled by
    /// `2 * zeta_max` and shifted so a zero offset maps to the kernel center
    /// `(0.5, 0.5)`, clamped to the unit square. Row order matches
    /// `self.edges`.
    pub fn pseudo_coords(&self, zeta_max: f64) -> ndarray::Array2<f64> {
        let mut u = ndarray::Array2::zeros((self.edges.len(), 2));
        for (k, e) in self.edges.iter().enumerate() {
            let rel = self.rel(e);
            for c in 0..2 {
                u[[k, c]] = (rel[c] / (2.0 * zeta_max) + 0.5).clamp(0.0, 1.0);
            }
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn seg(block: usize, x0: f64, y0: f64, x1: f64, y1: f64) -> LineSegment {
        LineSegment { block, x0, y0, x1, y1, score: 1.0 }
    }

    fn cfg() -> GraphConfig {
        GraphConfig::default()
    }

    #[test]
    fn shared_endpoint_merges_to_centroid() {
        // Two segments meeting near (10, 0): merged node at the mean of the
        // two endpoint positions.
        let segs = [
            seg(0, 0.0, 0.0, 10.0, 0.0),
            seg(1, 10.4, 0.0, 20.0, 0.0),
        ];
        let g = build_graph(&segs, &cfg());
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 4);
        let merged = g
            .nodes
            .iter()
            .find(|n| (n.x - 10.2).abs() < 1e-9)
            .expect("merged node at x = 10.2");
        assert_abs_diff_eq!(merged.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn distant_endpoints_stay_separate() {
        let segs = [
            seg(0, 0.0, 0.0, 10.0, 0.0),
            seg(1, 11.0, 0.0, 20.0, 0.0),
        ];
        let g = build_graph(&segs, &cfg());
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn merging_is_transitive() {
        // Three endpoints in a chain, each within tol of the next but the
        // ends 0.8 apart: all one node.
        let segs = [
            seg(0, 0.0, 0.0, 10.0, 0.0),
            seg(1, 10.4, 0.0, 20.0, 0.0),
            seg(2, 10.8, 0.0, 20.0, 5.0),
        ];
        let g = build_graph(&segs, &cfg());
        assert_eq!(g.node_count(), 4);
    }

    #[test]
    fn degenerate_segment_gives_no_self_loop() {
        let segs = [seg(0, 5.0, 5.0, 5.3, 5.0)];
        let g = build_graph(&segs, &cfg());
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn duplicate_connections_collapse() {
        // Two segments with endpoints merging pairwise into the same two
        // nodes: one undirected edge.
        let segs = [
            seg(0, 0.0, 0.0, 10.0, 0.0),
            seg(1, 0.3, 0.0, 10.3, 0.0),
        ];
        let g = build_graph(&segs, &cfg());
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn edges_materialize_both_directions() {
        let segs = [seg(0, 0.0, 0.0, 10.0, 0.0)];
        let g = build_graph(&segs, &cfg());
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
        let r01 = g.rel(&g.edges[0]);
        let r10 = g.rel(&g.edges[1]);
        assert_abs_diff_eq!(r01[0], -r10[0], epsilon = 1e-12);
        assert_abs_diff_eq!(r01[1], -r10[1], epsilon = 1e-12);
    }

    #[test]
    fn augment_connects_strictly_within_radius() {
        let mut g = PoseGraph {
            nodes: vec![
                Node { x: 0.0, y: 0.0 },
                Node { x: 10.0, y: 0.0 },
                Node { x: 0.0, y: 15.0 },
                Node { x: 40.0, y: 0.0 },
            ],
            edges: vec![],
        };
        g.augment(15.0);
        // (0,1) at distance 10: connected. (0,2) at exactly 15: excluded by
        // the strict inequality. (0,3), (1,3), (2,3), (1,2) beyond: excluded.
        assert_eq!(g.edge_count(), 2);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
        assert!(g.edges.iter().all(|e| e.augmented));
    }

    #[test]
    fn augment_preserves_existing_edges_and_is_idempotent() {
        let segs = [seg(0, 0.0, 0.0, 10.0, 0.0), seg(1, 0.0, 5.0, 10.0, 5.0)];
        let mut g = build_graph(&segs, &cfg());
        let detected = g.edge_count();
        g.augment(15.0);
        let after_one = g.edges.clone();
        assert!(after_one.len() > detected);
        // Existing detected edges keep their flag.
        assert!(g.edges.iter().filter(|e| !e.augmented).count() == detected);
        g.augment(15.0);
        assert_eq!(g.edges, after_one);
    }

    #[test]
    fn augment_zero_radius_is_noop() {
        let mut g = PoseGraph {
            nodes: vec![Node { x: 0.0, y: 0.0 }, Node { x: 0.0, y: 0.0 }],
            edges: vec![],
        };
        g.augment(0.0);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn node_features_are_normalized_positions() {
        let g = PoseGraph {
            nodes: vec![Node { x: 320.0, y: 120.0 }],
            edges: vec![],
        };
        let f = g.node_features(640, 480);
        assert_abs_diff_eq!(f[[0, 0]], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f[[0, 1]], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn pseudo_coords_center_and_clamp() {
        let g = PoseGraph {
            nodes: vec![
                Node { x: 0.0, y: 0.0 },
                Node { x: 20.0, y: -20.0 },
                Node { x: 100.0, y: 0.0 },
            ],
            edges: vec![
                Edge { src: 0, dst: 1, augmented: false },
                Edge { src: 0, dst: 2, augmented: false },
            ],
        };
        // zeta_max = 40: rel (20, -20) maps to (0.75, 0.25); rel (100, 0)
        // exceeds the kernel support and clamps to u_x = 1.
        let u = g.pseudo_coords(40.0);
        assert_abs_diff_eq!(u[[0, 0]], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(u[[0, 1]], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(u[[1, 0]], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[[1, 1]], 0.5, epsilon = 1e-12);
    }

    proptest! {
        /// Augmentation output: symmetric edge set, no self loops, no
        /// duplicates, and a second pass changes nothing.
        #[test]
        fn augment_invariants(seed in 0u64..300, n in 0usize..40, zeta in 0.0f64..30.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let nodes: Vec<Node> = (0..n)
                .map(|_| Node { x: rng.random_range(0.0..100.0), y: rng.random_range(0.0..100.0) })
                .collect();
            let mut g = PoseGraph { nodes, edges: vec![] };
            g.augment(zeta);
            let mut seen = std::collections::HashSet::new();
            for e in &g.edges {
                prop_assert!(e.src != e.dst);
                prop_assert!(seen.insert((e.src, e.dst)), "duplicate directed edge");
            }
            for e in &g.edges {
                prop_assert!(seen.contains(&(e.dst, e.src)), "missing reverse edge");
            }
            let once = g.edges.clone();
            g.augment(zeta);
            prop_assert_eq!(g.edges, once);
        }

        /// Pseudo-coordinates always land in the unit square and opposite
        /// directed edges mirror through the center.
        #[test]
        fn pseudo_coords_in_unit_square(seed in 0u64..300, n in 2usize..30) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let nodes: Vec<Node> = (0..n)
                .map(|_| Node { x: rng.random_range(0.0..200.0), y: rng.random_range(0.0..200.0) })
                .collect();
            let mut g = PoseGraph { nodes, edges: vec![] };
            g.augment(25.0);
            let u = g.pseudo_coords(40.0);
            for k in 0..g.edges.len() {
                prop_assert!((0.0..=1.0).contains(&u[[k, 0]]));
                prop_assert!((0.0..=1.0).contains(&u[[k, 1]]));
            }
            // Edges come in (i -> j, j -> i) consecutive pairs from augment.
            for k in (0..g.edges.len()).step_by(2) {
                for c in 0..2 {
                    // Both coordinates stay unclamped here (zeta < zeta_max),
                    // so mirroring is exact.
                    prop_assert!((u[[k, c]] + u[[k + 1, c]] - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
