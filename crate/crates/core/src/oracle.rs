//! Exact restriction-aware shortest paths: Dijkstra that only relaxes edges
//! whose limits admit the actor.
//!
//! Ties are broken deterministically. The queue is ordered by (distance,
//! vertex id) and a vertex keeps the smallest (predecessor, edge) pair among
//! equally short parents, so identical inputs always give identical vertex
//! sequences.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::model::{edge_feasible, Actor, Distance, EdgeId, Path, RoadNetwork, VertexId};
use crate::partition::CellDecomposition;

/// Reusable search state. Buffers are reset lazily through an epoch counter,
/// so repeated queries cost only the vertices they touch.
#[derive(Debug, Clone, Default)]
pub struct Dijkstra {
    dist: Vec<Distance>,
    pred: Vec<(VertexId, EdgeId)>,
    seen: Vec<u32>,
    done: Vec<u32>,
    epoch: u32,
    heap: BinaryHeap<Reverse<(Distance, VertexId)>>,
    settled_count: usize,
}

impl Dijkstra {
    pub fn new(vertex_count: usize) -> Self {
        let mut d = Dijkstra::default();
        d.resize(vertex_count);
        d
    }

    fn resize(&mut self, n: usize) {
        if self.dist.len() < n {
            self.dist.resize(n, 0);
            self.pred.resize(n, (0, 0));
            self.seen.resize(n, 0);
            self.done.resize(n, 0);
        }
    }

    fn start(&mut self, n: usize) {
        self.resize(n);
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.seen.iter_mut().for_each(|x| *x = 0);
            self.done.iter_mut().for_each(|x| *x = 0);
            self.epoch = 1;
        }
        self.heap.clear();
        self.settled_count = 0;
    }

    /// Vertices settled by the last search.
    pub fn settled_count(&self) -> usize {
        self.settled_count
    }

    /// Runs from `s` until `target` is settled (or the queue drains).
    /// `admit(edge, head)` decides which arcs may be relaxed.
    fn run(
        &mut self,
        net: &RoadNetwork,
        s: VertexId,
        target: Option<VertexId>,
        admit: impl Fn(EdgeId, VertexId) -> bool,
    ) {
        self.start(net.vertex_count() as usize);
        let ep = self.epoch;
        self.dist[s as usize] = 0;
        self.seen[s as usize] = ep;
        self.pred[s as usize] = (s, EdgeId::MAX);
        self.heap.push(Reverse((0, s)));
        while let Some(Reverse((d, u))) = self.heap.pop() {
            if self.done[u as usize] == ep {
                continue;
            }
            self.done[u as usize] = ep;
            self.settled_count += 1;
            if Some(u) == target {
                break;
            }
            for a in net.arcs(u) {
                let w = a.head as usize;
                if self.done[w] == ep || !admit(a.edge, a.head) {
                    continue;
                }
                let nd = d + net.edge(a.edge).length as Distance;
                if self.seen[w] != ep || nd < self.dist[w] {
                    self.seen[w] = ep;
                    self.dist[w] = nd;
                    self.pred[w] = (u, a.edge);
                    self.heap.push(Reverse((nd, a.head)));
                } else if nd == self.dist[w] && (u, a.edge) < self.pred[w] {
                    self.pred[w] = (u, a.edge);
                }
            }
        }
    }

    fn path_to(&self, s: VertexId, d: VertexId) -> Option<Path> {
        if self.done[d as usize] != self.epoch {
            return None;
        }
        let mut vertices = vec![d];
        let mut v = d;
        while v != s {
            v = self.pred[v as usize].0;
            vertices.push(v);
        }
        vertices.reverse();
        Some(Path::from_parts(vertices, self.dist[d as usize]))
    }

    pub fn shortest_path<A: Actor + ?Sized>(
        &mut self,
        net: &RoadNetwork,
        s: VertexId,
        d: VertexId,
        actor: &A,
    ) -> Result<Option<Path>> {
        net.check_vertex(s)?;
        net.check_vertex(d)?;
        self.run(net, s, Some(d), |e, _| {
            edge_feasible(&net.edge(e).limits, actor)
        });
        Ok(self.path_to(s, d))
    }

    pub fn shortest_path_in_cell<A: Actor + ?Sized>(
        &mut self,
        net: &RoadNetwork,
        decomp: &CellDecomposition,
        cell: u32,
        u: VertexId,
        v: VertexId,
        actor: &A,
    ) -> Result<Option<Path>> {
        decomp.cell(cell)?;
        for x in [u, v] {
            net.check_vertex(x)?;
            if decomp.cell_of(x) != cell {
                return Err(Error::UnknownVertex(x));
            }
        }
        self.run(net, u, Some(v), |e, head| {
            decomp.cell_of(head) == cell && edge_feasible(&net.edge(e).limits, actor)
        });
        Ok(self.path_to(u, v))
    }
}

/// Shortest path from `s` to `d` using only edges feasible for `actor`, or
/// `None` when no such path exists.
pub fn restricted_dijkstra<A: Actor + ?Sized>(
    net: &RoadNetwork,
    s: VertexId,
    d: VertexId,
    actor: &A,
) -> Result<Option<Path>> {
    Dijkstra::new(net.vertex_count() as usize).shortest_path(net, s, d, actor)
}

/// Like [`restricted_dijkstra`] but confined to the induced edges of one
/// cell. Both endpoints must lie in that cell.
pub fn cell_shortest_path<A: Actor + ?Sized>(
    net: &RoadNetwork,
    decomp: &CellDecomposition,
    cell: u32,
    u: VertexId,
    v: VertexId,
    actor: &A,
) -> Result<Option<Path>> {
    Dijkstra::new(net.vertex_count() as usize).shortest_path_in_cell(net, decomp, cell, u, v, actor)
}
