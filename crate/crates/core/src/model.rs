//! Road network with per-edge height/width/weight limits, vehicles, and the
//! feasibility and domination predicates the rest of the crate builds on.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::textio::{self, Lines};

pub type VertexId = u32;
pub type EdgeId = u32;
/// Sum of edge lengths along a path.
pub type Distance = u64;

/// One of the three restriction dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attr {
    Height,
    Width,
    Weight,
}

impl Attr {
    pub const ALL: [Attr; 3] = [Attr::Height, Attr::Width, Attr::Weight];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Attr::Height => "he",
            Attr::Width => "wi",
            Attr::Weight => "wt",
        }
    }
}

/// Anything that occupies space on a road: a vehicle, or a restriction
/// combination used as a stand-in vehicle when computing shortcuts.
pub trait Actor {
    fn dims(&self) -> [f64; 3];
}

/// Height (m), width (m) and weight (t) limits. `f64::INFINITY` marks a
/// missing restriction of that type.
#[derive(Clone, Copy)]
pub struct RestrictionTriple([f64; 3]);

impl RestrictionTriple {
    pub const UNRESTRICTED: RestrictionTriple = RestrictionTriple([f64::INFINITY; 3]);

    pub fn new(he: f64, wi: f64, wt: f64) -> Result<Self> {
        Self::from_array([he, wi, wt])
    }

    pub fn from_array(values: [f64; 3]) -> Result<Self> {
        for (attr, v) in Attr::ALL.iter().zip(values) {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::invalid(format!(
                    "{} limit must be positive or unrestricted, got {v}",
                    attr.name()
                )));
            }
        }
        Ok(RestrictionTriple(values))
    }

    pub fn he(&self) -> f64 {
        self.0[0]
    }

    pub fn wi(&self) -> f64 {
        self.0[1]
    }

    pub fn wt(&self) -> f64 {
        self.0[2]
    }

    pub fn get(&self, attr: Attr) -> f64 {
        self.0[attr.index()]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    /// Copy with one component replaced. The replacement must itself be a
    /// valid limit.
    pub fn with(&self, attr: Attr, value: f64) -> Result<Self> {
        let mut values = self.0;
        values[attr.index()] = value;
        Self::from_array(values)
    }

    /// Componentwise `self <= other`.
    pub fn le_all(&self, other: &RestrictionTriple) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    pub fn is_unrestricted(&self) -> bool {
        self.0.iter().all(|v| v.is_infinite())
    }
}

impl Actor for RestrictionTriple {
    fn dims(&self) -> [f64; 3] {
        self.0
    }
}

impl PartialEq for RestrictionTriple {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for RestrictionTriple {}

impl PartialOrd for RestrictionTriple {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic on (he, wi, wt). Components are never NaN.
impl Ord for RestrictionTriple {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

impl Hash for RestrictionTriple {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for v in self.0 {
            v.to_bits().hash(state);
        }
    }
}

impl fmt::Debug for RestrictionTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

/// Space separated, `-` for unrestricted.
impl fmt::Display for RestrictionTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            LimitFmt(self.0[0]),
            LimitFmt(self.0[1]),
            LimitFmt(self.0[2])
        )
    }
}

/// Formats a limit value, writing `-` for infinity.
pub struct LimitFmt(pub f64);

impl fmt::Display for LimitFmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("-")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// A concrete vehicle: height and width in meters, weight in tonnes.
#[derive(Clone, Copy, PartialEq)]
pub struct Vehicle([f64; 3]);

impl Vehicle {
    pub fn new(he: f64, wi: f64, wt: f64) -> Result<Self> {
        Self::from_array([he, wi, wt])
    }

    pub fn from_array(values: [f64; 3]) -> Result<Self> {
        for (attr, v) in Attr::ALL.iter().zip(values) {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(format!(
                    "vehicle {} must be finite and positive, got {v}",
                    attr.name()
                )));
            }
        }
        Ok(Vehicle(values))
    }

    pub fn he(&self) -> f64 {
        self.0[0]
    }

    pub fn wi(&self) -> f64 {
        self.0[1]
    }

    pub fn wt(&self) -> f64 {
        self.0[2]
    }

    pub fn get(&self, attr: Attr) -> f64 {
        self.0[attr.index()]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    /// The tightest restriction triple this vehicle still passes.
    pub fn as_triple(&self) -> RestrictionTriple {
        RestrictionTriple(self.0)
    }
}

impl Actor for Vehicle {
    fn dims(&self) -> [f64; 3] {
        self.0
    }
}

impl fmt::Debug for Vehicle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vehicle({} {} {})", self.0[0], self.0[1], self.0[2])
    }
}

impl fmt::Display for Vehicle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.0[0], self.0[1], self.0[2])
    }
}

/// `c` fits under `rc` in every dimension.
pub fn dominates(c: &Vehicle, rc: &RestrictionTriple) -> bool {
    edge_feasible(rc, c)
}

/// An actor may traverse an edge when none of its dimensions exceeds the
/// edge's limit.
#[inline]
pub fn edge_feasible<A: Actor + ?Sized>(limits: &RestrictionTriple, actor: &A) -> bool {
    let d = actor.dims();
    d[0] <= limits.0[0] && d[1] <= limits.0[1] && d[2] <= limits.0[2]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub length: u32,
    pub limits: RestrictionTriple,
}

impl Edge {
    pub fn other(&self, x: VertexId) -> VertexId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Adjacency record: the vertex on the other side and the edge leading there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub head: VertexId,
    pub edge: EdgeId,
}

/// Undirected road network. Edges are stored with `u < v`; adjacency lists
/// are sorted by neighbour id.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    vertex_count: u32,
    edges: Vec<Edge>,
    first_out: Vec<u32>,
    arcs: Vec<Arc>,
}

impl RoadNetwork {
    pub fn new(vertex_count: u32, edges: Vec<Edge>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        for (i, mut e) in edges.into_iter().enumerate() {
            if e.u >= vertex_count || e.v >= vertex_count {
                return Err(Error::invalid(format!(
                    "edge {i} ({}, {}) has an endpoint outside 0..{vertex_count}",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::invalid(format!("edge {i} is a loop at {}", e.u)));
            }
            if e.length == 0 {
                return Err(Error::invalid(format!("edge {i} has zero length")));
            }
            if e.u > e.v {
                std::mem::swap(&mut e.u, &mut e.v);
            }
            if !seen.insert((e.u, e.v)) {
                return Err(Error::invalid(format!(
                    "parallel edge ({}, {}) at position {i}",
                    e.u, e.v
                )));
            }
            normalized.push(e);
        }

        let mut degree = vec![0u32; vertex_count as usize + 1];
        for e in &normalized {
            degree[e.u as usize] += 1;
            degree[e.v as usize] += 1;
        }
        let mut first_out = Vec::with_capacity(vertex_count as usize + 1);
        let mut acc = 0;
        first_out.push(0);
        for d in &degree[..vertex_count as usize] {
            acc += d;
            first_out.push(acc);
        }
        let mut fill = first_out.clone();
        let mut arcs = vec![Arc { head: 0, edge: 0 }; acc as usize];
        for (id, e) in normalized.iter().enumerate() {
            for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                let slot = &mut fill[a as usize];
                arcs[*slot as usize] = Arc {
                    head: b,
                    edge: id as EdgeId,
                };
                *slot += 1;
            }
        }
        for v in 0..vertex_count as usize {
            arcs[first_out[v] as usize..first_out[v + 1] as usize].sort_by_key(|a| a.head);
        }

        Ok(RoadNetwork {
            vertex_count,
            edges: normalized,
            first_out,
            arcs,
        })
    }

    pub fn vertex_count(&self) -> u32 {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id as usize]
    }

    #[inline]
    pub fn arcs(&self, v: VertexId) -> &[Arc] {
        let v = v as usize;
        &self.arcs[self.first_out[v] as usize..self.first_out[v + 1] as usize]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.arcs(v).len()
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v < self.vertex_count {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v))
        }
    }

    pub fn edge_between(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        if u >= self.vertex_count || v >= self.vertex_count {
            return None;
        }
        let arcs = self.arcs(u);
        arcs.binary_search_by_key(&v, |a| a.head)
            .ok()
            .map(|i| arcs[i].edge)
    }

    /// Same topology and lengths with new limits, one per edge in edge order.
    pub fn with_limits(&self, limits: Vec<RestrictionTriple>) -> Result<Self> {
        if limits.len() != self.edges.len() {
            return Err(Error::invalid(format!(
                "expected {} limit triples, got {}",
                self.edges.len(),
                limits.len()
            )));
        }
        let mut net = self.clone();
        for (e, l) in net.edges.iter_mut().zip(limits) {
            e.limits = l;
        }
        Ok(net)
    }

    /// Writes the `n E=m` header followed by `u v length he wi wt` lines.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} E={}", self.vertex_count, self.edges.len())?;
        for e in &self.edges {
            writeln!(w, "{} {} {} {}", e.u, e.v, e.length, e.limits)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = Lines::new(r);
        let (offset, header) = lines
            .next_record()?
            .ok_or_else(|| Error::format(0, "missing graph header"))?;
        let mut it = header.split_whitespace();
        let n: u32 = textio::parse_token(it.next(), offset, "vertex count")?;
        let m_tok = it
            .next()
            .and_then(|t| t.strip_prefix("E="))
            .ok_or_else(|| Error::format(offset, "expected E=<edges> in header"))?;
        let m: usize = textio::parse_token(Some(m_tok), offset, "edge count")?;
        let mut edges = Vec::with_capacity(m);
        while let Some((offset, line)) = lines.next_record()? {
            let mut it = line.split_whitespace();
            let u = textio::parse_token(it.next(), offset, "u")?;
            let v = textio::parse_token(it.next(), offset, "v")?;
            let length = textio::parse_token(it.next(), offset, "length")?;
            let limits = textio::parse_limits(&mut it, offset)?;
            textio::expect_end(&mut it, offset)?;
            edges.push(Edge {
                u,
                v,
                length,
                limits,
            });
        }
        if edges.len() != m {
            return Err(Error::format(
                lines.offset(),
                format!("header announced {m} edges, found {}", edges.len()),
            ));
        }
        RoadNetwork::new(n, edges)
    }
}

/// Ordered vertex sequence with its total length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    vertices: Vec<VertexId>,
    distance: Distance,
}

impl Path {
    pub fn from_vertices(net: &RoadNetwork, vertices: Vec<VertexId>) -> Result<Self> {
        let distance = path_distance(&vertices, net)?;
        Ok(Path { vertices, distance })
    }

    pub(crate) fn from_parts(vertices: Vec<VertexId>, distance: Distance) -> Self {
        Path { vertices, distance }
    }

    pub fn single(v: VertexId) -> Self {
        Path {
            vertices: vec![v],
            distance: 0,
        }
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn distance(&self) -> Distance {
        self.distance
    }

    pub fn source(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn target(&self) -> VertexId {
        *self.vertices.last().expect("paths are never empty")
    }

    pub fn into_vertices(self) -> Vec<VertexId> {
        self.vertices
    }
}

/// Sum of edge lengths along `vertices`.
pub fn path_distance(vertices: &[VertexId], net: &RoadNetwork) -> Result<Distance> {
    vertices.windows(2).try_fold(0, |acc, w| {
        let e = net
            .edge_between(w[0], w[1])
            .ok_or(Error::NonAdjacent(w[0], w[1]))?;
        Ok(acc + net.edge(e).length as Distance)
    })
}

/// Every traversed edge admits `actor`.
pub fn path_feasible<A: Actor + ?Sized>(
    vertices: &[VertexId],
    actor: &A,
    net: &RoadNetwork,
) -> Result<bool> {
    let mut ok = true;
    for w in vertices.windows(2) {
        let e = net
            .edge_between(w[0], w[1])
            .ok_or(Error::NonAdjacent(w[0], w[1]))?;
        ok &= edge_feasible(&net.edge(e).limits, actor);
    }
    Ok(ok)
}
