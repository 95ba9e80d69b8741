//! Deterministic synthetic inputs: road networks, restriction assignments,
//! traffic flows and query sets. Every generator is a pure function of its
//! parameters and seed.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{Attr, Edge, LimitFmt, RestrictionTriple, RoadNetwork, Vehicle, VertexId};
use crate::partition::CellDecomposition;
use crate::textio::{self, Lines};

/// Mean edge length in length units (meters) of generated networks.
const MEAN_SPACING: f64 = 100.0;

/// Random geometric road network on the unit square.
///
/// Candidate edges join each vertex to its nearest neighbours. A minimum
/// spanning forest of the candidates (plus nearest cross-component links if
/// needed) makes the graph connected, then the shortest remaining candidates
/// are added until the edge count reaches `n * avg_degree / 2`. Vertex ids
/// follow a Hilbert curve so that nearby vertices get nearby ids.
pub fn gen_network(n: usize, avg_degree: f64, seed: u64) -> Result<RoadNetwork> {
    if n < 2 {
        return Err(Error::invalid("network needs at least 2 vertices"));
    }
    if avg_degree.is_nan() || avg_degree < 2.0 {
        return Err(Error::invalid("average degree must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    points.sort_by_key(|&(x, y)| hilbert_index(x, y));

    let grid = PointGrid::new(&points);
    let k = ((avg_degree.ceil() as usize) + 2).min(n - 1);
    let mut candidates: Vec<(f64, u32, u32)> = Vec::with_capacity(n * k);
    for v in 0..n {
        for w in grid.nearest(&points, v, k, |_| true) {
            let (a, b) = (v.min(w) as u32, v.max(w) as u32);
            candidates.push((dist(points[v], points[w]), a, b));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    candidates.dedup_by(|x, y| (x.1, x.2) == (y.1, y.2));

    let target = ((n as f64 * avg_degree / 2.0).round() as usize).max(n - 1);
    let mut uf = UnionFind::new(n);
    let mut chosen = vec![false; candidates.len()];
    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(target);
    for (i, &(_, a, b)) in candidates.iter().enumerate() {
        if uf.union(a as usize, b as usize) {
            chosen[i] = true;
            pairs.push((a, b));
        }
    }
    // k-nearest graphs can leave small islands; tie each to its closest
    // outside vertex. Such links are never candidates, or Kruskal would have
    // used them.
    while uf.components > 1 {
        let root0 = uf.find(0);
        let mut best: Option<(f64, usize, usize)> = None;
        let first = (0..n)
            .find(|&v| uf.find(v) != root0)
            .expect("more than one component");
        let island_root = uf.find(first);
        let island: Vec<usize> = (0..n).filter(|&v| uf.find(v) == island_root).collect();
        for &v in &island {
            if let Some(&w) = grid
                .nearest(&points, v, 1, |w| uf.find_const(w) != island_root)
                .first()
            {
                let d = dist(points[v], points[w]);
                if best.is_none_or(|b| d < b.0) {
                    best = Some((d, v, w));
                }
            }
        }
        let (_, v, w) = best.expect("some vertex lies outside the island");
        uf.union(v, w);
        pairs.push((v.min(w) as u32, v.max(w) as u32));
    }
    for (i, &(_, a, b)) in candidates.iter().enumerate() {
        if pairs.len() >= target {
            break;
        }
        if !chosen[i] {
            pairs.push((a, b));
        }
    }
    pairs.sort_unstable();

    let scale = MEAN_SPACING * (n as f64).sqrt();
    let edges = pairs
        .into_iter()
        .map(|(a, b)| Edge {
            u: a,
            v: b,
            length: ((dist(points[a as usize], points[b as usize]) * scale).round() as u32).max(1),
            limits: RestrictionTriple::UNRESTRICTED,
        })
        .collect();
    RoadNetwork::new(n as u32, edges)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn hilbert_index(x: f64, y: f64) -> u64 {
    const ORDER: u32 = 16;
    let side = 1u64 << ORDER;
    let mut px = ((x * side as f64) as u64).min(side - 1);
    let mut py = ((y * side as f64) as u64).min(side - 1);
    let mut d = 0u64;
    let mut s = side / 2;
    while s > 0 {
        let rx = u64::from(px & s > 0);
        let ry = u64::from(py & s > 0);
        d += s * s * ((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                px = side - 1 - px;
                py = side - 1 - py;
            }
            std::mem::swap(&mut px, &mut py);
        }
        s /= 2;
    }
    d
}

struct PointGrid {
    side: usize,
    buckets: Vec<Vec<usize>>,
}

impl PointGrid {
    fn new(points: &[(f64, f64)]) -> Self {
        let side = ((points.len() as f64 / 2.0).sqrt().ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); side * side];
        for (i, &p) in points.iter().enumerate() {
            let (cx, cy) = Self::coords(side, p);
            buckets[cy * side + cx].push(i);
        }
        PointGrid { side, buckets }
    }

    fn coords(side: usize, p: (f64, f64)) -> (usize, usize) {
        let c = |v: f64| ((v * side as f64) as usize).min(side - 1);
        (c(p.0), c(p.1))
    }

    /// Up to `k` nearest points to `points[v]` (excluding `v`) that satisfy
    /// `accept`, closest first.
    fn nearest(
        &self,
        points: &[(f64, f64)],
        v: usize,
        k: usize,
        accept: impl Fn(usize) -> bool,
    ) -> Vec<usize> {
        let (cx, cy) = Self::coords(self.side, points[v]);
        let cell = 1.0 / self.side as f64;
        let mut found: Vec<(f64, usize)> = Vec::new();
        for r in 0..=self.side {
            let (x0, x1) = (cx.saturating_sub(r), (cx + r).min(self.side - 1));
            let (y0, y1) = (cy.saturating_sub(r), (cy + r).min(self.side - 1));
            for y in y0..=y1 {
                for x in x0..=x1 {
                    if x.abs_diff(cx) != r && y.abs_diff(cy) != r {
                        continue;
                    }
                    for &w in &self.buckets[y * self.side + x] {
                        if w != v && accept(w) {
                            found.push((dist(points[v], points[w]), w));
                        }
                    }
                }
            }
            if found.len() >= k {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                // everything outside ring r is at least r cells away
                if found[k - 1].0 <= r as f64 * cell {
                    break;
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.into_iter().take(k).map(|(_, w)| w).collect()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    components: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn find_const(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        self.components -= 1;
        true
    }
}

/// Candidate limit values per restriction type and the share of edges that
/// receive a finite limit of that type.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionPalette {
    pub values: [Vec<f64>; 3],
    pub fractions: [f64; 3],
}

impl Default for RestrictionPalette {
    fn default() -> Self {
        RestrictionPalette {
            values: [
                vec![1.8, 2.0, 2.5, 3.0, 3.5, 4.0],
                vec![2.0, 2.2, 2.4, 3.0],
                vec![5.0, 10.0, 15.0, 20.0, 30.0, 40.0],
            ],
            fractions: [0.30, 0.25, 0.35],
        }
    }
}

impl RestrictionPalette {
    pub fn validate(&self) -> Result<()> {
        for attr in Attr::ALL {
            let vals = &self.values[attr.index()];
            let frac = self.fractions[attr.index()];
            if !(0.0..=1.0).contains(&frac) {
                return Err(Error::invalid(format!(
                    "{} fraction {frac} outside [0, 1]",
                    attr.name()
                )));
            }
            if frac > 0.0 && vals.is_empty() {
                return Err(Error::invalid(format!("{} palette is empty", attr.name())));
            }
            if vals.iter().any(|&v| !v.is_finite() || v <= 0.0) {
                return Err(Error::invalid(format!(
                    "{} palette values must be finite and positive",
                    attr.name()
                )));
            }
            if vals.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "{} palette must be strictly ascending",
                    attr.name()
                )));
            }
        }
        Ok(())
    }

    /// One line per type: `he <fraction> <v1> <v2> ...`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for attr in Attr::ALL {
            write!(w, "{} {}", attr.name(), self.fractions[attr.index()])?;
            for v in &self.values[attr.index()] {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut palette = RestrictionPalette {
            values: [Vec::new(), Vec::new(), Vec::new()],
            fractions: [0.0; 3],
        };
        let mut seen = [false; 3];
        let mut lines = Lines::new(r);
        while let Some((offset, line)) = lines.next_record()? {
            let mut it = line.split_whitespace();
            let attr = match it.next() {
                Some("he") => Attr::Height,
                Some("wi") => Attr::Width,
                Some("wt") => Attr::Weight,
                other => {
                    return Err(Error::format(
                        offset,
                        format!("unknown restriction type {other:?}"),
                    ))
                }
            };
            if std::mem::replace(&mut seen[attr.index()], true) {
                return Err(Error::format(
                    offset,
                    format!("{} listed twice", attr.name()),
                ));
            }
            palette.fractions[attr.index()] = textio::parse_token(it.next(), offset, "fraction")?;
            palette.values[attr.index()] = it
                .map(|t| textio::parse_token(Some(t), offset, "value"))
                .collect::<Result<_>>()?;
        }
        palette
            .validate()
            .map_err(|e| Error::format(lines.offset(), e.to_string()))?;
        Ok(palette)
    }
}

/// Gives each edge, independently per type, a palette value with the
/// type's probability and leaves it unrestricted otherwise.
pub fn assign_restrictions(
    net: &RoadNetwork,
    palette: &RestrictionPalette,
    seed: u64,
) -> Result<RoadNetwork> {
    palette.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limits = (0..net.edge_count())
        .map(|_| {
            let mut vals = [f64::INFINITY; 3];
            for attr in Attr::ALL {
                let i = attr.index();
                // draw both numbers unconditionally to keep streams aligned
                let hit = rng.random::<f64>() < palette.fractions[i];
                let pick: f64 = rng.random();
                if hit {
                    let choices = &palette.values[i];
                    vals[i] =
                        choices[((pick * choices.len() as f64) as usize).min(choices.len() - 1)];
                }
            }
            RestrictionTriple::from_array(vals)
        })
        .collect::<Result<Vec<_>>>()?;
    net.with_limits(limits)
}

/// Mean and standard deviation of one vehicle attribute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub sd: f64,
}

const fn g(mean: f64, sd: f64) -> Gaussian {
    Gaussian { mean, sd }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleCategory {
    pub name: String,
    pub weight: f64,
    pub dims: [Gaussian; 3],
}

impl VehicleCategory {
    pub fn new(name: &str, weight: f64, he: Gaussian, wi: Gaussian, wt: Gaussian) -> Self {
        VehicleCategory {
            name: name.to_string(),
            weight,
            dims: [he, wi, wt],
        }
    }
}

/// Passenger cars, vans, box trucks and heavy goods vehicles.
pub fn default_mix() -> Vec<VehicleCategory> {
    vec![
        VehicleCategory::new("passenger", 0.70, g(1.6, 0.1), g(1.8, 0.05), g(1.8, 0.2)),
        VehicleCategory::new("van", 0.15, g(2.2, 0.1), g(1.95, 0.04), g(3.2, 0.4)),
        VehicleCategory::new("box_truck", 0.10, g(3.2, 0.15), g(2.3, 0.04), g(9.0, 1.5)),
        VehicleCategory::new("heavy", 0.05, g(3.8, 0.08), g(2.55, 0.05), g(28.0, 4.0)),
    ]
}

/// Vehicles observed on the network, optionally tagged with the cell they
/// were seen in.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficFlow {
    pub vehicles: Vec<Vehicle>,
    pub cells: Option<Vec<u32>>,
}

impl TrafficFlow {
    pub fn new(vehicles: Vec<Vehicle>) -> Self {
        TrafficFlow {
            vehicles,
            cells: None,
        }
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    /// Vehicles seen in `cell`; the whole flow when no cells are recorded.
    pub fn for_cell(&self, cell: u32) -> Vec<Vehicle> {
        match &self.cells {
            None => self.vehicles.clone(),
            Some(cells) => self
                .vehicles
                .iter()
                .zip(cells)
                .filter(|(_, &c)| c == cell)
                .map(|(v, _)| *v)
                .collect(),
        }
    }

    /// `he wi wt [cell_id]` per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, v) in self.vehicles.iter().enumerate() {
            match &self.cells {
                Some(cells) => writeln!(w, "{v} {}", cells[i])?,
                None => writeln!(w, "{v}")?,
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut vehicles = Vec::new();
        let mut cells: Vec<u32> = Vec::new();
        let mut tagged: Option<bool> = None;
        let mut lines = Lines::new(r);
        while let Some((offset, line)) = lines.next_record()? {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let has_cell = match toks.len() {
                3 => false,
                4 => true,
                _ => return Err(Error::format(offset, "expected `he wi wt [cell_id]`")),
            };
            if *tagged.get_or_insert(has_cell) != has_cell {
                return Err(Error::format(
                    offset,
                    "cell column present on some lines only",
                ));
            }
            let mut dims = [0.0; 3];
            for (d, t) in dims.iter_mut().zip(&toks) {
                *d = textio::parse_token(Some(t), offset, "dimension")?;
            }
            vehicles
                .push(Vehicle::from_array(dims).map_err(|e| Error::format(offset, e.to_string()))?);
            if has_cell {
                cells.push(textio::parse_token(Some(toks[3]), offset, "cell id")?);
            }
        }
        Ok(TrafficFlow {
            vehicles,
            cells: tagged.unwrap_or(false).then_some(cells),
        })
    }
}

fn validate_mix(mix: &[VehicleCategory]) -> Result<()> {
    if mix.is_empty() {
        return Err(Error::invalid("vehicle mix is empty"));
    }
    let total: f64 = mix.iter().map(|c| c.weight).sum();
    if mix.iter().any(|c| c.weight.is_nan() || c.weight < 0.0) || (total - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "mix weights must be non-negative and sum to 1, got {total}"
        )));
    }
    for c in mix {
        for d in &c.dims {
            if !d.mean.is_finite() || d.mean <= 0.0 || !d.sd.is_finite() || d.sd < 0.0 {
                return Err(Error::invalid(format!(
                    "category {} needs positive means and non-negative spreads",
                    c.name
                )));
            }
        }
    }
    Ok(())
}

/// Samples `n_vehicles` from the category mix. Attribute draws are
/// re-sampled until positive.
pub fn gen_traffic(n_vehicles: usize, mix: &[VehicleCategory], seed: u64) -> Result<TrafficFlow> {
    if n_vehicles == 0 {
        return Err(Error::invalid("traffic needs at least one vehicle"));
    }
    validate_mix(mix)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<[Option<Normal<f64>>; 3]> = mix
        .iter()
        .map(|c| {
            c.dims
                .map(|d| (d.sd > 0.0).then(|| Normal::new(d.mean, d.sd).expect("validated")))
        })
        .collect();
    let mut vehicles = Vec::with_capacity(n_vehicles);
    for _ in 0..n_vehicles {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut cat = mix.len() - 1;
        for (i, c) in mix.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                cat = i;
                break;
            }
        }
        let mut dims = [0.0; 3];
        for (k, d) in dims.iter_mut().enumerate() {
            *d = match &dists[cat][k] {
                None => mix[cat].dims[k].mean,
                Some(normal) => loop {
                    let x = normal.sample(&mut rng);
                    if x > 0.0 {
                        break x;
                    }
                },
            };
        }
        vehicles.push(Vehicle::from_array(dims)?);
    }
    Ok(TrafficFlow::new(vehicles))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Query {
    pub s: VertexId,
    pub d: VertexId,
    pub vehicle: Vehicle,
}

/// Point-to-point queries whose endpoints lie in different cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuerySet {
    pub queries: Vec<Query>,
    pub seed: u64,
}

impl QuerySet {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// `s d he wi wt` per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for q in &self.queries {
            writeln!(w, "{} {} {}", q.s, q.d, q.vehicle)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut queries = Vec::new();
        let mut lines = Lines::new(r);
        while let Some((offset, line)) = lines.next_record()? {
            let mut it = line.split_whitespace();
            let s = textio::parse_token(it.next(), offset, "source")?;
            let d = textio::parse_token(it.next(), offset, "target")?;
            let mut dims = [0.0; 3];
            for x in dims.iter_mut() {
                *x = textio::parse_token(it.next(), offset, "dimension")?;
            }
            textio::expect_end(&mut it, offset)?;
            let vehicle =
                Vehicle::from_array(dims).map_err(|e| Error::format(offset, e.to_string()))?;
            queries.push(Query { s, d, vehicle });
        }
        Ok(QuerySet { queries, seed: 0 })
    }
}

/// `n` queries with endpoints in distinct cells and vehicles drawn uniformly
/// from the traffic flow.
pub fn gen_queries(
    net: &RoadNetwork,
    decomp: &CellDecomposition,
    traffic: &TrafficFlow,
    n: usize,
    seed: u64,
) -> Result<QuerySet> {
    if decomp.cell_count() < 2 {
        return Err(Error::Infeasible(
            "cross-cell queries need at least two cells".into(),
        ));
    }
    if traffic.is_empty() {
        return Err(Error::invalid("traffic flow is empty"));
    }
    let nv = net.vertex_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::with_capacity(n);
    while queries.len() < n {
        let s = rng.random_range(0..nv);
        let d = rng.random_range(0..nv);
        if decomp.cell_of(s) == decomp.cell_of(d) {
            continue;
        }
        let vehicle = traffic.vehicles[rng.random_range(0..traffic.len())];
        queries.push(Query { s, d, vehicle });
    }
    Ok(QuerySet { queries, seed })
}

/// Writes one `cell_id he wi wt` line per triple.
pub fn write_cell_triples<W: Write>(mut w: W, per_cell: &[Vec<[f64; 3]>]) -> Result<()> {
    for (cell, list) in per_cell.iter().enumerate() {
        for t in list {
            writeln!(
                w,
                "{cell} {} {} {}",
                LimitFmt(t[0]),
                LimitFmt(t[1]),
                LimitFmt(t[2])
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::path_graph;
    use crate::partition::partition;

    #[test]
    fn two_vertices_one_edge() {
        let net = gen_network(2, 2.0, 1).unwrap();
        assert_eq!(net.vertex_count(), 2);
        assert_eq!(net.edge_count(), 1);
        assert!(gen_network(1, 2.0, 1).is_err());
        assert!(gen_network(10, 1.0, 1).is_err());
    }

    #[test]
    fn network_is_deterministic() {
        let a = gen_network(300, 4.4, 9).unwrap();
        let b = gen_network(300, 4.4, 9).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_text(&mut ba).unwrap();
        b.write_text(&mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_ne!(a, gen_network(300, 4.4, 10).unwrap());
    }

    #[test]
    fn hilbert_orders_quadrants() {
        let a = hilbert_index(0.1, 0.1);
        let b = hilbert_index(0.1, 0.9);
        let c = hilbert_index(0.9, 0.9);
        let d = hilbert_index(0.9, 0.1);
        assert!(a < b && b < c && c < d);
    }

    #[test]
    fn restriction_fractions_zero_and_one() {
        let net = path_graph(20);
        let mut p = RestrictionPalette {
            fractions: [0.0; 3],
            ..Default::default()
        };
        let r = assign_restrictions(&net, &p, 1).unwrap();
        assert!(r.edges().iter().all(|e| e.limits.is_unrestricted()));

        p.fractions = [1.0, 0.0, 0.0];
        p.values[0] = vec![2.0];
        let r = assign_restrictions(&net, &p, 1).unwrap();
        assert!(r.edges().iter().all(|e| e.limits.he() == 2.0));
    }

    #[test]
    fn palette_validation_and_text() {
        let mut p = RestrictionPalette::default();
        let mut buf = Vec::new();
        p.write_text(&mut buf).unwrap();
        assert_eq!(RestrictionPalette::read_text(&buf[..]).unwrap(), p);
        p.values[1] = vec![2.4, 2.2];
        assert!(p.validate().is_err());
        p = RestrictionPalette::default();
        p.fractions[2] = 1.5;
        assert!(p.validate().is_err());
        p = RestrictionPalette::default();
        p.values[0][0] = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn point_mass_traffic() {
        let mix = vec![VehicleCategory::new(
            "x",
            1.0,
            g(2.0, 0.0),
            g(2.1, 0.0),
            g(7.5, 0.0),
        )];
        let t = gen_traffic(1, &mix, 4).unwrap();
        assert_eq!(t.vehicles, vec![Vehicle::new(2.0, 2.1, 7.5).unwrap()]);
    }

    #[test]
    fn traffic_validation_and_determinism() {
        assert!(gen_traffic(0, &default_mix(), 1).is_err());
        let mut bad = default_mix();
        bad[0].weight = 0.5;
        assert!(gen_traffic(10, &bad, 1).is_err());
        let a = gen_traffic(500, &default_mix(), 5).unwrap();
        let b = gen_traffic(500, &default_mix(), 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn traffic_text_round_trip() {
        let mut t = gen_traffic(50, &default_mix(), 2).unwrap();
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        assert_eq!(TrafficFlow::read_text(&buf[..]).unwrap(), t);
        t.cells = Some((0..50).map(|i| i % 3).collect());
        buf.clear();
        t.write_text(&mut buf).unwrap();
        assert_eq!(TrafficFlow::read_text(&buf[..]).unwrap(), t);
        assert!(TrafficFlow::read_text(&b"1 1 1\n1 1 1 0\n"[..]).is_err());
    }

    #[test]
    fn queries_cross_cells() {
        let net = path_graph(10);
        let decomp = partition(&net, 5, 1).unwrap();
        let traffic = gen_traffic(20, &default_mix(), 1).unwrap();
        let qs = gen_queries(&net, &decomp, &traffic, 300, 8).unwrap();
        assert_eq!(qs.len(), 300);
        assert!(qs
            .queries
            .iter()
            .all(|q| decomp.cell_of(q.s) != decomp.cell_of(q.d)));
        assert_eq!(qs, gen_queries(&net, &decomp, &traffic, 300, 8).unwrap());

        let one = partition(&net, 64, 1).unwrap();
        assert!(matches!(
            gen_queries(&net, &one, &traffic, 5, 1),
            Err(Error::Infeasible(_))
        ));

        let mut buf = Vec::new();
        qs.write_text(&mut buf).unwrap();
        let back = QuerySet::read_text(&buf[..]).unwrap();
        assert_eq!(back.queries, qs.queries);
    }
}
