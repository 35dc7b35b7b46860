//! Geometric networks: vertices in the plane (or 3-space) joined by polyline
//! edges, with arc-length locations and the shortest-path metric.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// A coordinate tuple. Planar networks store `z = 0`.
pub type Coord = [f64; 3];

/// Edge as supplied by the caller. An empty `polyline` means the straight
/// segment between the two endpoint vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeInput {
    pub from: usize,
    pub to: usize,
    pub polyline: Vec<Vec<f64>>,
}

impl EdgeInput {
    pub fn straight(from: usize, to: usize) -> Self {
        Self {
            from,
            to,
            polyline: Vec::new(),
        }
    }

    pub fn with_polyline(from: usize, to: usize, polyline: Vec<Vec<f64>>) -> Self {
        Self { from, to, polyline }
    }
}

/// Which end of an edge touches a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum End {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    from: usize,
    to: usize,
    points: Vec<Coord>,
    /// Arc length from the first polyline point to each polyline point.
    cumulative: Vec<f64>,
}

impl Edge {
    pub fn from(&self) -> usize {
        self.from
    }

    pub fn to(&self) -> usize {
        self.to
    }

    pub fn is_loop(&self) -> bool {
        self.from == self.to
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn polyline(&self) -> &[Coord] {
        &self.points
    }

    fn point_at(&self, offset: f64) -> Coord {
        let len = self.length();
        if offset <= 0.0 {
            return self.points[0];
        }
        if offset >= len {
            return *self.points.last().unwrap();
        }
        // First cumulative value strictly greater than offset closes the piece.
        let piece = self.cumulative.partition_point(|&c| c <= offset).max(1) - 1;
        let piece = piece.min(self.points.len() - 2);
        let (a, b) = (self.points[piece], self.points[piece + 1]);
        let span = self.cumulative[piece + 1] - self.cumulative[piece];
        let t = (offset - self.cumulative[piece]) / span;
        [
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            a[2] + t * (b[2] - a[2]),
        ]
    }
}

/// Canonical location on a network: an edge and the arc-length distance from
/// the edge's first endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkPoint {
    pub edge: usize,
    pub offset: f64,
}

impl NetworkPoint {
    pub fn new(edge: usize, offset: f64) -> Self {
        Self { edge, offset }
    }
}

/// Result of snapping planar coordinates onto the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapped {
    pub point: NetworkPoint,
    pub distance: f64,
}

/// Immutable geometric network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    dim: usize,
    vertices: Vec<Coord>,
    /// Index of each retained vertex in the caller's input.
    original_ids: Vec<usize>,
    edges: Vec<Edge>,
    incident: Vec<Vec<(usize, End)>>,
    component: Vec<usize>,
    n_components: usize,
    total_length: f64,
}

/// Sum of Euclidean distances between consecutive polyline points.
pub fn arc_length(polyline: &[Coord]) -> f64 {
    polyline.windows(2).map(|w| math::dist(&w[0], &w[1])).sum()
}

fn to_coord(raw: &[f64], dim: usize, what: &str) -> Result<Coord> {
    if raw.len() != dim {
        return Err(Error::Validation(format!(
            "{what}: expected {dim} coordinates, got {}",
            raw.len()
        )));
    }
    if raw.iter().any(|c| !c.is_finite()) {
        return Err(Error::Validation(format!("{what}: non-finite coordinate")));
    }
    let mut c = [0.0; 3];
    c[..dim].copy_from_slice(raw);
    Ok(c)
}

fn close(a: &Coord, b: &Coord) -> bool {
    let scale = 1.0 + a.iter().chain(b.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    math::dist(a, b) <= 1e-9 * scale
}

impl Network {
    /// Builds and validates a network. Vertices without incident edges are
    /// dropped and the remaining vertices renumbered in input order.
    pub fn new(vertices: Vec<Vec<f64>>, edges: Vec<EdgeInput>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Structure("a network needs at least one edge".into()));
        }
        let dim = vertices.first().map(|v| v.len()).unwrap_or(0);
        if dim != 2 && dim != 3 {
            return Err(Error::Validation(format!(
                "vertex coordinates must have 2 or 3 components, got {dim}"
            )));
        }
        let coords = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| to_coord(v, dim, &format!("vertex {i}")))
            .collect::<Result<Vec<_>>>()?;

        let mut raw_edges = Vec::with_capacity(edges.len());
        for (m, e) in edges.iter().enumerate() {
            for (end, idx) in [("from", e.from), ("to", e.to)] {
                if idx >= coords.len() {
                    return Err(Error::Structure(format!(
                        "edge {m}: `{end}` refers to vertex {idx}, but only {} vertices exist",
                        coords.len()
                    )));
                }
            }
            let points = if e.polyline.is_empty() {
                vec![coords[e.from], coords[e.to]]
            } else {
                let pts = e
                    .polyline
                    .iter()
                    .enumerate()
                    .map(|(k, p)| to_coord(p, dim, &format!("edge {m} polyline point {k}")))
                    .collect::<Result<Vec<_>>>()?;
                if pts.len() < 2 {
                    return Err(Error::Validation(format!(
                        "edge {m}: polyline needs at least 2 points"
                    )));
                }
                if !close(&pts[0], &coords[e.from]) || !close(pts.last().unwrap(), &coords[e.to]) {
                    return Err(Error::Validation(format!(
                        "edge {m}: polyline must start at vertex {} and end at vertex {}",
                        e.from, e.to
                    )));
                }
                pts
            };
            let mut cumulative = Vec::with_capacity(points.len());
            cumulative.push(0.0);
            for (k, w) in points.windows(2).enumerate() {
                let d = math::dist(&w[0], &w[1]);
                if d <= 0.0 {
                    return Err(Error::Validation(format!(
                        "edge {m}: polyline points {k} and {} coincide (zero-length piece)",
                        k + 1
                    )));
                }
                cumulative.push(cumulative[k] + d);
            }
            raw_edges.push(Edge {
                from: e.from,
                to: e.to,
                points,
                cumulative,
            });
        }

        // Drop isolated vertices.
        let mut used = vec![false; coords.len()];
        for e in &raw_edges {
            used[e.from] = true;
            used[e.to] = true;
        }
        let mut remap = vec![usize::MAX; coords.len()];
        let mut kept = Vec::new();
        let mut original_ids = Vec::new();
        for (i, c) in coords.iter().enumerate() {
            if used[i] {
                remap[i] = kept.len();
                kept.push(*c);
                original_ids.push(i);
            }
        }
        for e in &mut raw_edges {
            e.from = remap[e.from];
            e.to = remap[e.to];
        }
        Ok(Self::assemble(dim, kept, original_ids, raw_edges))
    }

    fn assemble(dim: usize, vertices: Vec<Coord>, original_ids: Vec<usize>, edges: Vec<Edge>) -> Self {
        let w = vertices.len();
        let mut incident = vec![Vec::new(); w];
        for (m, e) in edges.iter().enumerate() {
            incident[e.from].push((m, End::Start));
            incident[e.to].push((m, End::End));
        }

        // Connected components by union-find.
        let mut parent: Vec<usize> = (0..w).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &edges {
            let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut label = vec![usize::MAX; w];
        let mut component = vec![0; w];
        let mut n_components = 0;
        for v in 0..w {
            let root = find(&mut parent, v);
            if label[root] == usize::MAX {
                label[root] = n_components;
                n_components += 1;
            }
            component[v] = label[root];
        }

        let total_length = edges.iter().map(Edge::length).sum();
        Self {
            dim,
            vertices,
            original_ids,
            edges,
            incident,
            component,
            n_components,
            total_length,
        }
    }

    /// Rebuilds the network from its own parts.
    pub fn to_input(&self) -> (Vec<Vec<f64>>, Vec<EdgeInput>) {
        let vertices = self.vertices.iter().map(|c| c[..self.dim].to_vec()).collect();
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeInput {
                from: e.from,
                to: e.to,
                polyline: e.points.iter().map(|p| p[..self.dim].to_vec()).collect(),
            })
            .collect();
        (vertices, edges)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Coord] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn original_vertex_ids(&self) -> &[usize] {
        &self.original_ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, m: usize) -> &Edge {
        &self.edges[m]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edge ends touching vertex `v`; a loop contributes both of its ends.
    pub fn incident(&self, v: usize) -> &[(usize, End)] {
        &self.incident[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incident[v].len()
    }

    pub fn component_of(&self, v: usize) -> usize {
        self.component[v]
    }

    pub fn component_count(&self) -> usize {
        self.n_components
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn check_point(&self, p: &NetworkPoint) -> Result<()> {
        let Some(edge) = self.edges.get(p.edge) else {
            return Err(Error::Domain(format!(
                "edge index {} out of range ({} edges)",
                p.edge,
                self.edges.len()
            )));
        };
        if !(p.offset >= 0.0 && p.offset <= edge.length()) {
            return Err(Error::Domain(format!(
                "offset {} outside [0, {}] on edge {}",
                p.offset,
                edge.length(),
                p.edge
            )));
        }
        Ok(())
    }

    /// The vertex a point sits on, if it is exactly an edge end.
    pub fn vertex_at(&self, p: &NetworkPoint) -> Option<usize> {
        let e = &self.edges[p.edge];
        if p.offset <= 0.0 {
            Some(e.from)
        } else if p.offset >= e.length() {
            Some(e.to)
        } else {
            None
        }
    }

    /// Coordinates of a network point.
    pub fn embed(&self, p: &NetworkPoint) -> Result<Coord> {
        self.check_point(p)?;
        Ok(self.edges[p.edge].point_at(p.offset))
    }

    /// Closest network location to `coords`, failing when it is farther than
    /// `tolerance`. Exact ties go to the lowest edge index, then the smallest
    /// offset.
    pub fn snap(&self, coords: &[f64], tolerance: f64) -> Result<Snapped> {
        let q = to_coord(coords, self.dim, "snap query")?;
        let mut best: Option<Snapped> = None;
        for (m, e) in self.edges.iter().enumerate() {
            for (k, w) in e.points.windows(2).enumerate() {
                let (a, b) = (w[0], w[1]);
                let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let aq = [q[0] - a[0], q[1] - a[1], q[2] - a[2]];
                let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
                let t = ((aq[0] * ab[0] + aq[1] * ab[1] + aq[2] * ab[2]) / len2).clamp(0.0, 1.0);
                let foot = [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]];
                let d = math::dist(&foot, &q);
                let span = e.cumulative[k + 1] - e.cumulative[k];
                let offset = (e.cumulative[k] + t * span).min(e.length());
                if best.is_none_or(|s| d < s.distance) {
                    best = Some(Snapped {
                        point: NetworkPoint::new(m, offset),
                        distance: d,
                    });
                }
            }
        }
        let best = best.expect("network has at least one edge");
        if best.distance > tolerance {
            return Err(Error::Snap {
                distance: best.distance,
                tolerance,
            });
        }
        Ok(best)
    }

    /// Shortest-path distances from vertex `src` to every vertex
    /// (`f64::INFINITY` when unreachable).
    pub fn vertex_distances(&self, src: usize) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
            }
        }
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        let mut dist = vec![f64::INFINITY; self.vertices.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Item(0.0, src));
        while let Some(Item(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &(m, end) in &self.incident[v] {
                let e = &self.edges[m];
                let other = if end == End::Start { e.to } else { e.from };
                let nd = d + e.length();
                if nd < dist[other] {
                    dist[other] = nd;
                    heap.push(Item(nd, other));
                }
            }
        }
        dist
    }

    /// Shortest-path distance `d_L` between two network points; infinite
    /// across connected components.
    pub fn distance(&self, z1: &NetworkPoint, z2: &NetworkPoint) -> f64 {
        let e1 = &self.edges[z1.edge];
        let e2 = &self.edges[z2.edge];
        if self.component[e1.from] != self.component[e2.from] {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        if z1.edge == z2.edge {
            best = (z1.offset - z2.offset).abs();
        }
        // Leave z1's edge through either end, enter z2's edge through either end.
        let exits = [
            (e1.from, z1.offset),
            (e1.to, e1.length() - z1.offset),
        ];
        let entries = [
            (e2.from, z2.offset),
            (e2.to, e2.length() - z2.offset),
        ];
        for (v, d_out) in exits {
            let dv = self.vertex_distances(v);
            for (u, d_in) in entries {
                best = best.min(d_out + dv[u] + d_in);
            }
        }
        best
    }

    /// Optional normalization: removes every degree-2 vertex joining two
    /// distinct edges and concatenates their polylines. The geometric set is
    /// unchanged.
    pub fn merge_degree_two(&self) -> Result<Network> {
        let mut edges: Vec<Option<(usize, usize, Vec<Coord>)>> = self
            .edges
            .iter()
            .map(|e| Some((e.from, e.to, e.points.clone())))
            .collect();
        let mut removed = vec![false; self.vertices.len()];
        loop {
            let mut changed = false;
            for v in 0..self.vertices.len() {
                if removed[v] {
                    continue;
                }
                let inc: Vec<(usize, End)> = edges
                    .iter()
                    .enumerate()
                    .filter_map(|(m, e)| e.as_ref().map(|e| (m, e)))
                    .flat_map(|(m, (f, t, _))| {
                        let mut out = Vec::new();
                        if *f == v {
                            out.push((m, End::Start));
                        }
                        if *t == v {
                            out.push((m, End::End));
                        }
                        out
                    })
                    .collect();
                if inc.len() != 2 || inc[0].0 == inc[1].0 {
                    continue;
                }
                let (ma, ea) = inc[0];
                let (mb, eb) = inc[1];
                let (fa, ta, mut pa) = edges[ma].take().unwrap();
                let (fb, tb, mut pb) = edges[mb].take().unwrap();
                // Orient a to end at v and b to start at v.
                let start = if ea == End::End {
                    fa
                } else {
                    pa.reverse();
                    ta
                };
                let stop = if eb == End::Start {
                    tb
                } else {
                    pb.reverse();
                    fb
                };
                pa.pop();
                pa.extend(pb);
                edges[ma.min(mb)] = Some((start, stop, pa));
                removed[v] = true;
                changed = true;
            }
            if !changed {
                break;
            }
        }
        let vertices = self.vertices.iter().map(|c| c[..self.dim].to_vec()).collect();
        let inputs = edges
            .into_iter()
            .flatten()
            .map(|(f, t, pts)| EdgeInput {
                from: f,
                to: t,
                polyline: pts.iter().map(|p| p[..self.dim].to_vec()).collect(),
            })
            .collect();
        Network::new(vertices, inputs)
    }
}
