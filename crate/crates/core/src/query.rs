//! Query answering over the overlay: full subgraphs of the source and target
//! cells, every inter-cell edge, and one virtual edge per stored shortcut
//! whose cost is resolved per vehicle by matching. Falls back to the exact
//! oracle when the overlay has no path.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::index::ShortcutIndex;
use crate::model::{edge_feasible, Distance, EdgeId, Path, RoadNetwork, Vehicle, VertexId};
use crate::oracle::Dijkstra;
use crate::partition::CellDecomposition;

const NONE: u32 = u32::MAX;

/// One hop of an overlay path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hop {
    Edge {
        to: VertexId,
        edge: EdgeId,
    },
    /// Entry `entry` of shortcut number `shortcut` in `cell`'s list.
    Shortcut {
        cell: u32,
        shortcut: u32,
        entry: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlayPath {
    pub source: VertexId,
    pub hops: Vec<Hop>,
    pub distance: Distance,
}

/// Replaces virtual hops by their pooled vertex sequences.
pub fn expand(path: &OverlayPath, net: &RoadNetwork, index: &ShortcutIndex) -> Result<Path> {
    let mut vertices = vec![path.source];
    for hop in &path.hops {
        match *hop {
            Hop::Edge { to, edge } => {
                let from = *vertices.last().expect("non-empty");
                let e = net
                    .edges()
                    .get(edge as usize)
                    .ok_or(Error::NonAdjacent(from, to))?;
                if (e.u, e.v) != (from.min(to), from.max(to)) {
                    return Err(Error::NonAdjacent(from, to));
                }
                vertices.push(to);
            }
            Hop::Shortcut {
                cell,
                shortcut,
                entry,
            } => {
                let cs = index.cell(cell)?;
                let dangling = Error::DanglingRef { cell, path: entry };
                let sc = cs.shortcuts().get(shortcut as usize).ok_or(dangling)?;
                let e = sc
                    .entries()
                    .get(entry as usize)
                    .ok_or(Error::DanglingRef { cell, path: entry })?;
                let from = *vertices.last().expect("non-empty");
                if sc.src != from {
                    return Err(Error::NonAdjacent(from, sc.src));
                }
                cs.splice_into(e, &mut vertices)?;
            }
        }
    }
    Ok(Path::from_parts(vertices, path.distance))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VirtualEdge {
    pub cell: u32,
    pub src: VertexId,
    pub dst: VertexId,
    /// Position in the cell's shortcut list.
    pub shortcut: u32,
}

/// Materialized overlay for one (s, d) pair. Query answering walks the
/// same structure implicitly; this form exists for inspection and tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlayGraph {
    /// Ascending.
    pub vertices: Vec<VertexId>,
    /// Endpoint-cell edges and inter-cell edges, ascending.
    pub edges: Vec<EdgeId>,
    pub virtual_edges: Vec<VirtualEdge>,
}

pub fn build_overlay(
    net: &RoadNetwork,
    decomp: &CellDecomposition,
    index: &ShortcutIndex,
    s: VertexId,
    d: VertexId,
) -> Result<OverlayGraph> {
    net.check_vertex(s)?;
    net.check_vertex(d)?;
    index.check_decomposition(decomp)?;
    let (cs, cd) = (decomp.cell_of(s), decomp.cell_of(d));
    let endpoint = |c: u32| c == cs || c == cd;
    let mut vertices = Vec::new();
    for cell in decomp.cells() {
        if endpoint(cell.id) {
            vertices.extend_from_slice(&cell.vertices);
        } else {
            vertices.extend_from_slice(decomp.boundary_vertices(cell.id)?);
        }
    }
    vertices.sort_unstable();
    let mut edges: Vec<EdgeId> = decomp.inter_cell_edges().to_vec();
    for c in [cs, cd] {
        edges.extend_from_slice(&decomp.cell(c)?.edges);
    }
    edges.sort_unstable();
    edges.dedup();
    let virtual_edges = index
        .cells()
        .iter()
        .filter(|c| !endpoint(c.cell))
        .flat_map(|c| {
            c.shortcuts().iter().enumerate().map(|(i, sc)| VirtualEdge {
                cell: c.cell,
                src: sc.src,
                dst: sc.dst,
                shortcut: i as u32,
            })
        })
        .collect();
    Ok(OverlayGraph {
        vertices,
        edges,
        virtual_edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryStatus {
    Overlay,
    Fallback,
    NoPath,
}

impl QueryStatus {
    pub fn label(self) -> &'static str {
        match self {
            QueryStatus::Overlay => "overlay",
            QueryStatus::Fallback => "fallback",
            QueryStatus::NoPath => "no_path",
        }
    }
}

/// Matching counters for one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchStats {
    pub calls: usize,
    pub scanned: usize,
    /// Sum of the lengths of the shortcuts matched against.
    pub available: usize,
    /// Calls whose result differed from the exhaustive scan (only counted
    /// when verification is enabled).
    pub mismatches: usize,
}

impl MatchStats {
    pub fn add(&mut self, o: &MatchStats) {
        self.calls += o.calls;
        self.scanned += o.scanned;
        self.available += o.available;
        self.mismatches += o.mismatches;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub path: Option<Path>,
    pub status: QueryStatus,
    pub matching: MatchStats,
    /// Vertices settled by the overlay search and, if it ran, the oracle.
    pub settled: usize,
    pub overlay_time: Duration,
    pub fallback_time: Duration,
}

impl QueryResult {
    pub fn distance(&self) -> Option<Distance> {
        self.path.as_ref().map(Path::distance)
    }
}

/// Per-query scratch space, reusable across queries.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    dist: Vec<Distance>,
    /// (previous vertex, edge id or shortcut position, entry or NONE)
    pred: Vec<(VertexId, u32, u32)>,
    seen: Vec<u32>,
    done: Vec<u32>,
    epoch: u32,
    heap: BinaryHeap<Reverse<(Distance, VertexId)>>,
    settled: usize,
    oracle: Dijkstra,
}

impl Workspace {
    pub fn new(vertex_count: usize) -> Self {
        let mut w = Workspace::default();
        w.reset(vertex_count);
        w
    }

    fn reset(&mut self, n: usize) {
        if self.dist.len() < n {
            self.dist.resize(n, 0);
            self.pred.resize(n, (0, 0, 0));
            self.seen.resize(n, 0);
            self.done.resize(n, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.seen.fill(0);
            self.done.fill(0);
            self.epoch = 1;
        }
        self.heap.clear();
        self.settled = 0;
    }
}

/// Read-only query engine over one network, decomposition and index.
#[derive(Debug, Clone)]
pub struct Planner<'a> {
    net: &'a RoadNetwork,
    decomp: &'a CellDecomposition,
    index: &'a ShortcutIndex,
    /// Per vertex, the range of its cell's shortcut list with `src == v`.
    out: Vec<(u32, u32)>,
    /// Inter-cell arcs per vertex in CSR form, with the edge data inlined.
    cross_first: Vec<u32>,
    cross: Vec<CrossArc>,
    verify: bool,
}

#[derive(Debug, Clone, Copy)]
struct CrossArc {
    head: VertexId,
    edge: EdgeId,
    length: u32,
    limits: crate::model::RestrictionTriple,
}

impl<'a> Planner<'a> {
    pub fn new(
        net: &'a RoadNetwork,
        decomp: &'a CellDecomposition,
        index: &'a ShortcutIndex,
    ) -> Result<Self> {
        index.check_decomposition(decomp)?;
        let mut out = vec![(0, 0); net.vertex_count() as usize];
        for c in index.cells() {
            let list = c.shortcuts();
            let mut i = 0;
            while i < list.len() {
                let src = list[i].src;
                let start = i;
                while i < list.len() && list[i].src == src {
                    i += 1;
                }
                out[src as usize] = (start as u32, i as u32);
            }
        }
        let mut cross_first = Vec::with_capacity(net.vertex_count() as usize + 1);
        let mut cross = Vec::new();
        cross_first.push(0);
        for v in 0..net.vertex_count() {
            for a in net.arcs(v) {
                if decomp.cell_of(a.head) != decomp.cell_of(v) {
                    let e = net.edge(a.edge);
                    cross.push(CrossArc {
                        head: a.head,
                        edge: a.edge,
                        length: e.length,
                        limits: e.limits,
                    });
                }
            }
            cross_first.push(cross.len() as u32);
        }
        Ok(Planner {
            net,
            decomp,
            index,
            out,
            cross_first,
            cross,
            verify: false,
        })
    }

    /// Also compare every match against an exhaustive scan.
    pub fn with_verification(mut self, on: bool) -> Self {
        self.verify = on;
        self
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.net.vertex_count() as usize)
    }

    pub fn plan(&self, s: VertexId, d: VertexId, vehicle: &Vehicle) -> Result<QueryResult> {
        self.plan_with(&mut self.workspace(), s, d, vehicle)
    }

    pub fn plan_with(
        &self,
        ws: &mut Workspace,
        s: VertexId,
        d: VertexId,
        vehicle: &Vehicle,
    ) -> Result<QueryResult> {
        self.net.check_vertex(s)?;
        self.net.check_vertex(d)?;
        let t0 = Instant::now();
        if self.decomp.cell_of(s) == self.decomp.cell_of(d) {
            let path = ws.oracle.shortest_path(self.net, s, d, vehicle)?;
            let status = if path.is_some() {
                QueryStatus::Overlay
            } else {
                QueryStatus::NoPath
            };
            return Ok(QueryResult {
                path,
                status,
                matching: MatchStats::default(),
                settled: ws.oracle.settled_count(),
                overlay_time: t0.elapsed(),
                fallback_time: Duration::ZERO,
            });
        }
        let mut matching = MatchStats::default();
        let overlay = self.search(ws, s, d, vehicle, &mut matching)?;
        let path = overlay
            .map(|p| expand(&p, self.net, self.index))
            .transpose()?;
        let overlay_time = t0.elapsed();
        if path.is_some() {
            return Ok(QueryResult {
                path,
                status: QueryStatus::Overlay,
                matching,
                settled: ws.settled,
                overlay_time,
                fallback_time: Duration::ZERO,
            });
        }
        let t1 = Instant::now();
        let path = ws.oracle.shortest_path(self.net, s, d, vehicle)?;
        let status = if path.is_some() {
            QueryStatus::Fallback
        } else {
            QueryStatus::NoPath
        };
        Ok(QueryResult {
            path,
            status,
            matching,
            settled: ws.settled + ws.oracle.settled_count(),
            overlay_time,
            fallback_time: t1.elapsed(),
        })
    }

    /// Overlay Dijkstra from `s` to `d` (different cells).
    pub fn overlay_path(
        &self,
        s: VertexId,
        d: VertexId,
        vehicle: &Vehicle,
    ) -> Result<Option<OverlayPath>> {
        self.net.check_vertex(s)?;
        self.net.check_vertex(d)?;
        self.search(
            &mut self.workspace(),
            s,
            d,
            vehicle,
            &mut MatchStats::default(),
        )
    }

    fn search(
        &self,
        ws: &mut Workspace,
        s: VertexId,
        d: VertexId,
        vehicle: &Vehicle,
        stats: &mut MatchStats,
    ) -> Result<Option<OverlayPath>> {
        let net = self.net;
        let decomp = self.decomp;
        ws.reset(net.vertex_count() as usize);
        let ep = ws.epoch;
        let (cs, cd) = (decomp.cell_of(s), decomp.cell_of(d));
        ws.dist[s as usize] = 0;
        ws.seen[s as usize] = ep;
        ws.pred[s as usize] = (s, NONE, NONE);
        ws.heap.push(Reverse((0, s)));

        macro_rules! relax {
            ($u:expr, $w:expr, $nd:expr, $via:expr, $entry:expr) => {{
                let w = $w as usize;
                if ws.done[w] != ep && (ws.seen[w] != ep || $nd < ws.dist[w]) {
                    ws.seen[w] = ep;
                    ws.dist[w] = $nd;
                    ws.pred[w] = ($u, $via, $entry);
                    ws.heap.push(Reverse(($nd, $w)));
                }
            }};
        }

        let mut found = false;
        while let Some(Reverse((du, u))) = ws.heap.pop() {
            if ws.done[u as usize] == ep {
                continue;
            }
            ws.done[u as usize] = ep;
            ws.settled += 1;
            if u == d {
                found = true;
                break;
            }
            let cu = decomp.cell_of(u);
            if cu == cs || cu == cd {
                for a in net.arcs(u) {
                    let e = net.edge(a.edge);
                    if edge_feasible(&e.limits, vehicle) {
                        relax!(u, a.head, du + e.length as Distance, a.edge, NONE);
                    }
                }
            } else {
                // middle cells are crossed only through shortcuts
                let arcs = &self.cross[self.cross_first[u as usize] as usize
                    ..self.cross_first[u as usize + 1] as usize];
                for a in arcs {
                    if edge_feasible(&a.limits, vehicle) {
                        relax!(u, a.head, du + a.length as Distance, a.edge, NONE);
                    }
                }
                let cell = self.index.cell(cu)?;
                let (lo, hi) = self.out[u as usize];
                for (k, sc) in cell.shortcuts()[lo as usize..hi as usize]
                    .iter()
                    .enumerate()
                {
                    let t = sc.dst as usize;
                    if ws.done[t] == ep {
                        continue;
                    }
                    // entries are sorted, so the first one bounds every match
                    if ws.seen[t] == ep && du + sc.entries()[0].distance() >= ws.dist[t] {
                        continue;
                    }
                    let (m, scanned) = sc.match_position(vehicle);
                    stats.calls += 1;
                    stats.scanned += scanned;
                    stats.available += sc.len();
                    if self.verify && m.map(|i| &sc.entries()[i]) != sc.full_scan(vehicle) {
                        stats.mismatches += 1;
                    }
                    if let Some(i) = m {
                        let nd = du + sc.entries()[i].distance();
                        relax!(u, sc.dst, nd, lo + k as u32, i as u32);
                    }
                }
            }
        }
        if !found {
            return Ok(None);
        }

        let mut hops = Vec::new();
        let mut v = d;
        while v != s {
            let (prev, via, entry) = ws.pred[v as usize];
            hops.push(if entry == NONE {
                Hop::Edge { to: v, edge: via }
            } else {
                Hop::Shortcut {
                    cell: decomp.cell_of(v),
                    shortcut: via,
                    entry,
                }
            });
            v = prev;
        }
        hops.reverse();
        Ok(Some(OverlayPath {
            source: s,
            hops,
            distance: ws.dist[d as usize],
        }))
    }
}

/// One-shot convenience around [`Planner::plan`].
pub fn plan(
    net: &RoadNetwork,
    decomp: &CellDecomposition,
    index: &ShortcutIndex,
    s: VertexId,
    d: VertexId,
    vehicle: &Vehicle,
) -> Result<QueryResult> {
    Planner::new(net, decomp, index)?.plan(s, d, vehicle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combos::CombinationSet;
    use crate::fixtures::{path_graph, rc, sample_decomposition, sample_network, veh};
    use crate::index::{build_index, IndexMeta};
    use crate::model::{path_distance, path_feasible};

    const INF: f64 = f64::INFINITY;

    fn sample_with(
        combos: &[crate::RestrictionTriple],
    ) -> (RoadNetwork, CellDecomposition, ShortcutIndex) {
        let net = sample_network();
        let d = sample_decomposition(&net);
        let sets = vec![
            CombinationSet::new(),
            combos.iter().copied().collect(),
            CombinationSet::new(),
        ];
        let idx = build_index(&net, &d, &sets, IndexMeta::new("test", 0)).unwrap();
        (net, d, idx)
    }

    #[test]
    fn routed_through_pi2_without_pi1() {
        let (net, d, idx) = sample_with(&[rc(2.0, 2.0, 15.0), rc(2.5, 2.4, 10.0)]);
        let r = plan(&net, &d, &idx, 8, 9, &veh(1.5, 2.0, 2.0)).unwrap();
        assert_eq!(r.status, QueryStatus::Overlay);
        let p = r.path.unwrap();
        assert_eq!(p.vertices(), &[8, 7, 4, 2, 6, 9]);
        assert_eq!(p.distance(), 5);
        assert_eq!(path_distance(p.vertices(), &net).unwrap(), 5);
        assert!(r.matching.calls >= 1);
    }

    #[test]
    fn pi1_used_when_stored() {
        let (net, d, idx) = sample_with(&[rc(1.8, INF, 40.0), rc(2.0, 2.0, 15.0)]);
        let r = plan(&net, &d, &idx, 8, 9, &veh(1.5, 2.0, 2.0)).unwrap();
        assert_eq!(r.path.unwrap().vertices(), &[8, 7, 4, 6, 9]);
    }

    #[test]
    fn fallback_and_no_path() {
        // nothing stored: the overlay cannot cross the middle cell
        let (net, d, idx) = sample_with(&[]);
        let r = plan(&net, &d, &idx, 8, 9, &veh(1.5, 2.0, 2.0)).unwrap();
        assert_eq!(r.status, QueryStatus::Fallback);
        let p = r.path.unwrap();
        assert_eq!(p.vertices(), &[8, 7, 4, 6, 9]);
        assert!(path_feasible(p.vertices(), &veh(1.5, 2.0, 2.0), &net).unwrap());

        let r = plan(&net, &d, &idx, 8, 9, &veh(3.9, 3.5, 45.0)).unwrap();
        assert_eq!(r.status, QueryStatus::NoPath);
        assert!(r.path.is_none());
    }

    #[test]
    fn same_cell_uses_the_oracle() {
        let (net, d, idx) = sample_with(&[]);
        let r = plan(&net, &d, &idx, 7, 6, &veh(1.5, 2.0, 2.0)).unwrap();
        assert_eq!(r.status, QueryStatus::Overlay);
        assert_eq!(r.matching, MatchStats::default());
        assert_eq!(r.path.unwrap().vertices(), &[7, 4, 6]);
        assert!(matches!(
            plan(&net, &d, &idx, 7, 99, &veh(1.0, 1.0, 1.0)),
            Err(Error::UnknownVertex(99))
        ));
    }

    #[test]
    fn overlay_shapes() {
        let (net, d, idx) = sample_with(&[rc(2.0, 2.0, 15.0)]);
        let o = build_overlay(&net, &d, &idx, 8, 9).unwrap();
        assert_eq!(o.vertices, vec![6, 7, 8, 9]);
        assert_eq!(o.edges.len(), 2);
        assert_eq!(o.virtual_edges.len(), 2);
        assert!(o.edges.len() + o.virtual_edges.len() <= net.edge_count() + 2);

        // two cells: everything is physical
        let net = path_graph(6);
        let d = CellDecomposition::from_assignment(&net, vec![0, 0, 0, 1, 1, 1]).unwrap();
        let idx = build_index(
            &net,
            &d,
            &[CombinationSet::new(), CombinationSet::new()],
            IndexMeta::new("t", 0),
        )
        .unwrap();
        let o = build_overlay(&net, &d, &idx, 0, 5).unwrap();
        assert_eq!(o.vertices, (0..6).collect::<Vec<_>>());
        assert_eq!(o.edges.len(), net.edge_count());
        assert!(o.virtual_edges.is_empty());
    }

    #[test]
    fn expand_identity_and_splice() {
        let (net, d, idx) = sample_with(&[rc(2.0, 2.0, 15.0)]);
        let planner = Planner::new(&net, &d, &idx).unwrap();
        let op = planner
            .overlay_path(8, 9, &veh(1.5, 2.0, 2.0))
            .unwrap()
            .unwrap();
        assert!(op.hops.iter().any(|h| matches!(h, Hop::Shortcut { .. })));
        let p = expand(&op, &net, &idx).unwrap();
        assert_eq!(p.vertices(), &[8, 7, 4, 2, 6, 9]);

        let plain = OverlayPath {
            source: 8,
            hops: vec![Hop::Edge {
                to: 7,
                edge: net.edge_between(7, 8).unwrap(),
            }],
            distance: 1,
        };
        assert_eq!(expand(&plain, &net, &idx).unwrap().vertices(), &[8, 7]);

        let bad = OverlayPath {
            source: 7,
            hops: vec![Hop::Shortcut {
                cell: 1,
                shortcut: 0,
                entry: 40,
            }],
            distance: 1,
        };
        assert!(matches!(
            expand(&bad, &net, &idx),
            Err(Error::DanglingRef { .. })
        ));
    }
}
