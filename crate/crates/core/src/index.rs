//! Per-cell shortcut storage: boundary-to-boundary shortest paths for each
//! kept restriction combination, pooled by vertex sequence and presorted by
//! distance so matching can stop at the first feasible entry.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::combos::CombinationSet;
use crate::error::{Error, Result};
use crate::model::{
    dominates, edge_feasible, Distance, RestrictionTriple, RoadNetwork, Vehicle, VertexId,
};
use crate::partition::{self, CellDecomposition};
use crate::textio::{self, Lines};

const FORMAT_HEADER: &str = "trapp-index 1";
const REVERSED: u32 = 1 << 31;
const NONE: u32 = u32::MAX;

/// Distinct vertex sequences of one cell. Each sequence is stored once in
/// canonical orientation (first vertex below last); entries refer to it with
/// a direction flag.
#[derive(Debug, Clone, Default)]
pub struct PathPool {
    offsets: Vec<u32>,
    vertices: Vec<VertexId>,
    distances: Vec<Distance>,
    heads: HashMap<u64, u32>,
    chain: Vec<u32>,
}

impl PartialEq for PathPool {
    fn eq(&self, other: &Self) -> bool {
        self.offsets == other.offsets
            && self.vertices == other.vertices
            && self.distances == other.distances
    }
}

impl Eq for PathPool {}

fn seq_hash(seq: &[VertexId]) -> u64 {
    let mut h = DefaultHasher::new();
    seq.hash(&mut h);
    h.finish()
}

impl PathPool {
    pub fn new() -> Self {
        PathPool {
            offsets: vec![0],
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    /// Sum of sequence lengths.
    pub fn total_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn sequence(&self, id: u32) -> Option<&[VertexId]> {
        let i = id as usize;
        (i < self.len())
            .then(|| &self.vertices[self.offsets[i] as usize..self.offsets[i + 1] as usize])
    }

    pub fn distance(&self, id: u32) -> Option<Distance> {
        self.distances.get(id as usize).copied()
    }

    pub fn find(&self, seq: &[VertexId]) -> Option<u32> {
        let mut id = *self.heads.get(&seq_hash(seq))?;
        while id != NONE {
            if self.sequence(id) == Some(seq) {
                return Some(id);
            }
            id = self.chain[id as usize];
        }
        None
    }

    /// Adds `path` (any orientation) unless an identical sequence is already
    /// pooled. Returns the pool id and whether `path` runs against the
    /// stored orientation.
    pub fn insert(&mut self, path: &[VertexId], distance: Distance) -> (u32, bool) {
        let reversed = path.len() > 1 && path[0] > path[path.len() - 1];
        let canonical: std::borrow::Cow<[VertexId]> = if reversed {
            path.iter().rev().copied().collect::<Vec<_>>().into()
        } else {
            path.into()
        };
        if let Some(id) = self.find(&canonical) {
            return (id, reversed);
        }
        (self.push(&canonical, distance), reversed)
    }

    fn push(&mut self, seq: &[VertexId], distance: Distance) -> u32 {
        let id = self.len() as u32;
        self.vertices.extend_from_slice(seq);
        self.offsets.push(self.vertices.len() as u32);
        self.distances.push(distance);
        let prev = self.heads.insert(seq_hash(seq), id).unwrap_or(NONE);
        self.chain.push(prev);
        id
    }
}

/// One stored path: its combination, pooled sequence and distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShortcutEntry {
    rc: RestrictionTriple,
    path: u32,
    distance: u32,
}

impl ShortcutEntry {
    pub fn new(rc: RestrictionTriple, path_id: u32, reversed: bool, distance: u32) -> Result<Self> {
        if path_id & REVERSED != 0 {
            return Err(Error::invalid(format!("path id {path_id} too large")));
        }
        Ok(ShortcutEntry {
            rc,
            path: path_id | if reversed { REVERSED } else { 0 },
            distance,
        })
    }

    pub fn rc(&self) -> &RestrictionTriple {
        &self.rc
    }

    pub fn path_id(&self) -> u32 {
        self.path & !REVERSED
    }

    pub fn reversed(&self) -> bool {
        self.path & REVERSED != 0
    }

    pub fn distance(&self) -> Distance {
        self.distance as Distance
    }

    fn sort_key(&self) -> (u32, RestrictionTriple) {
        (self.distance, self.rc)
    }
}

/// All stored paths between one ordered boundary pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortcut {
    pub src: VertexId,
    pub dst: VertexId,
    entries: Vec<ShortcutEntry>,
}

impl Shortcut {
    /// Sorts `entries` by (distance, rc) and rejects duplicate combinations.
    pub fn new(src: VertexId, dst: VertexId, mut entries: Vec<ShortcutEntry>) -> Result<Self> {
        entries.sort_by_key(ShortcutEntry::sort_key);
        let mut rcs: Vec<_> = entries.iter().map(|e| e.rc).collect();
        rcs.sort();
        if rcs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!(
                "duplicate combination in shortcut {src}->{dst}"
            )));
        }
        Ok(Shortcut { src, dst, entries })
    }

    pub fn entries(&self) -> &[ShortcutEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First entry (in distance order) whose combination dominates `c`,
    /// together with the number of entries inspected.
    pub fn find_match(&self, c: &Vehicle) -> (Option<&ShortcutEntry>, usize) {
        let (pos, scanned) = self.match_position(c);
        (pos.map(|i| &self.entries[i]), scanned)
    }

    /// Like [`Shortcut::find_match`] but returns the entry's position.
    #[inline]
    pub fn match_position(&self, c: &Vehicle) -> (Option<usize>, usize) {
        match self.entries.iter().position(|e| dominates(c, &e.rc)) {
            Some(i) => (Some(i), i + 1),
            None => (None, self.entries.len()),
        }
    }

    /// Minimum-distance feasible entry by exhaustive scan, ignoring the sort
    /// order. Reference for [`Shortcut::find_match`].
    pub fn full_scan(&self, c: &Vehicle) -> Option<&ShortcutEntry> {
        self.entries
            .iter()
            .filter(|e| dominates(c, &e.rc))
            .min_by_key(|e| e.sort_key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellShortcuts {
    pub cell: u32,
    pool: PathPool,
    /// Ascending by (src, dst).
    shortcuts: Vec<Shortcut>,
}

impl CellShortcuts {
    pub fn new(cell: u32, pool: PathPool, mut shortcuts: Vec<Shortcut>) -> Result<Self> {
        shortcuts.sort_by_key(|s| (s.src, s.dst));
        if shortcuts
            .windows(2)
            .any(|w| (w[0].src, w[0].dst) == (w[1].src, w[1].dst))
        {
            return Err(Error::invalid(format!("duplicate shortcut in cell {cell}")));
        }
        let cs = CellShortcuts {
            cell,
            pool,
            shortcuts,
        };
        for s in &cs.shortcuts {
            for e in &s.entries {
                cs.resolve(e)?;
            }
        }
        Ok(cs)
    }

    pub fn pool(&self) -> &PathPool {
        &self.pool
    }

    pub fn shortcuts(&self) -> &[Shortcut] {
        &self.shortcuts
    }

    pub fn shortcut(&self, src: VertexId, dst: VertexId) -> Option<&Shortcut> {
        self.shortcuts
            .binary_search_by_key(&(src, dst), |s| (s.src, s.dst))
            .ok()
            .map(|i| &self.shortcuts[i])
    }

    pub fn entry_count(&self) -> usize {
        self.shortcuts.iter().map(Shortcut::len).sum()
    }

    /// Entry's vertex sequence in travel order.
    pub fn resolve(&self, entry: &ShortcutEntry) -> Result<Vec<VertexId>> {
        let seq = self
            .pool
            .sequence(entry.path_id())
            .ok_or(Error::DanglingRef {
                cell: self.cell,
                path: entry.path_id(),
            })?;
        let mut v = seq.to_vec();
        if entry.reversed() {
            v.reverse();
        }
        Ok(v)
    }

    /// Appends the entry's sequence after its first vertex, which the caller
    /// already holds as the last vertex of `out`.
    pub(crate) fn splice_into(&self, entry: &ShortcutEntry, out: &mut Vec<VertexId>) -> Result<()> {
        let seq = self
            .pool
            .sequence(entry.path_id())
            .ok_or(Error::DanglingRef {
                cell: self.cell,
                path: entry.path_id(),
            })?;
        if entry.reversed() {
            out.extend(seq.iter().rev().skip(1));
        } else {
            out.extend(seq.iter().skip(1));
        }
        Ok(())
    }
}

/// Build provenance stored with the index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexMeta {
    pub strategy: String,
    pub seed: u64,
    /// Free-form `key value` pairs, e.g. `k 30`.
    pub params: Vec<(String, String)>,
}

impl IndexMeta {
    pub fn new(strategy: impl Into<String>, seed: u64) -> Self {
        IndexMeta {
            strategy: strategy.into(),
            seed,
            params: Vec::new(),
        }
    }

    pub fn param(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.params.push((key.into(), value.to_string()));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StorageStats {
    pub shortcuts: usize,
    pub total_entries: usize,
    pub distinct_paths: usize,
    pub total_path_vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortcutIndex {
    meta: IndexMeta,
    assignment: Vec<u32>,
    cells: Vec<CellShortcuts>,
}

impl ShortcutIndex {
    pub fn new(
        meta: IndexMeta,
        decomp: &CellDecomposition,
        cells: Vec<CellShortcuts>,
    ) -> Result<Self> {
        if cells.len() != decomp.cell_count()
            || cells.iter().enumerate().any(|(i, c)| c.cell as usize != i)
        {
            return Err(Error::invalid(
                "cell shortcuts must cover every cell in order",
            ));
        }
        let idx = ShortcutIndex {
            meta,
            assignment: decomp.assignment().to_vec(),
            cells,
        };
        for cs in &idx.cells {
            let boundary = decomp.boundary_vertices(cs.cell)?;
            for s in &cs.shortcuts {
                if boundary.binary_search(&s.src).is_err()
                    || boundary.binary_search(&s.dst).is_err()
                {
                    return Err(Error::invalid(format!(
                        "shortcut {}->{} is not between boundary vertices of cell {}",
                        s.src, s.dst, cs.cell
                    )));
                }
            }
        }
        Ok(idx)
    }

    pub fn meta(&self) -> &IndexMeta {
        &self.meta
    }

    pub fn cells(&self) -> &[CellShortcuts] {
        &self.cells
    }

    pub fn cell(&self, id: u32) -> Result<&CellShortcuts> {
        self.cells.get(id as usize).ok_or(Error::UnknownCell(id))
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn fingerprint(&self) -> u64 {
        partition::assignment_fingerprint(&self.assignment)
    }

    /// Fails with `MismatchedIndex` unless the index was built over `decomp`.
    pub fn check_decomposition(&self, decomp: &CellDecomposition) -> Result<()> {
        if self.fingerprint() != decomp.fingerprint() {
            return Err(Error::MismatchedIndex(format!(
                "index partition {:016x}, decomposition {:016x}",
                self.fingerprint(),
                decomp.fingerprint()
            )));
        }
        Ok(())
    }

    /// Rebuilds the decomposition stored in the index.
    pub fn decomposition(&self, net: &RoadNetwork) -> Result<CellDecomposition> {
        if self.assignment.len() != net.vertex_count() as usize {
            return Err(Error::MismatchedIndex(format!(
                "index covers {} vertices, network has {}",
                self.assignment.len(),
                net.vertex_count()
            )));
        }
        CellDecomposition::from_assignment(net, self.assignment.clone())
    }

    pub fn storage_stats(&self) -> StorageStats {
        let mut s = StorageStats::default();
        for c in &self.cells {
            s.shortcuts += c.shortcuts.len();
            s.total_entries += c.entry_count();
            s.distinct_paths += c.pool.len();
            s.total_path_vertices += c.pool.total_vertices();
        }
        s
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{FORMAT_HEADER}")?;
        writeln!(w, "[meta]")?;
        writeln!(w, "strategy {}", self.meta.strategy)?;
        writeln!(w, "seed {}", self.meta.seed)?;
        for (k, v) in &self.meta.params {
            writeln!(w, "param {k} {v}")?;
        }
        writeln!(w, "[partition]")?;
        writeln!(w, "vertices {}", self.assignment.len())?;
        for (v, c) in self.assignment.iter().enumerate() {
            writeln!(w, "{v} {c}")?;
        }
        writeln!(w, "[pool]")?;
        for c in &self.cells {
            writeln!(w, "cell {} {}", c.cell, c.pool.len())?;
            for id in 0..c.pool.len() as u32 {
                write!(w, "{id} {}", c.pool.distances[id as usize])?;
                for v in c.pool.sequence(id).expect("id in range") {
                    write!(w, " {v}")?;
                }
                writeln!(w)?;
            }
        }
        writeln!(w, "[shortcuts]")?;
        for c in &self.cells {
            writeln!(w, "cell {} {}", c.cell, c.entry_count())?;
            for s in &c.shortcuts {
                for e in &s.entries {
                    let flag = if e.reversed() { "r" } else { "" };
                    writeln!(w, "{} {} {} {}{flag}", s.src, s.dst, e.rc, e.path_id())?;
                }
            }
        }
        writeln!(w, "[end]")?;
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        IndexReader::new(r).read()
    }
}

struct IndexReader<R> {
    lines: Lines<R>,
}

impl<R: BufRead> IndexReader<R> {
    fn new(r: R) -> Self {
        IndexReader {
            lines: Lines::new(r),
        }
    }

    fn next(&mut self) -> Result<(usize, String)> {
        let end = self.lines.offset();
        match self.lines.next_record()? {
            Some((o, l)) => Ok((o, l.to_string())),
            None => Err(Error::format(
                end.max(self.lines.offset()),
                "unexpected end of file",
            )),
        }
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        let (o, l) = self.next()?;
        if l != want {
            return Err(Error::format(o, format!("expected {want:?}, found {l:?}")));
        }
        Ok(())
    }

    fn cell_header(&mut self, want: u32) -> Result<(usize, usize)> {
        let (o, l) = self.next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some("cell") {
            return Err(Error::format(
                o,
                format!("expected cell header, found {l:?}"),
            ));
        }
        let id: u32 = textio::parse_token(it.next(), o, "cell id")?;
        let n: usize = textio::parse_token(it.next(), o, "record count")?;
        textio::expect_end(&mut it, o)?;
        if id != want {
            return Err(Error::format(
                o,
                format!("expected cell {want}, found {id}"),
            ));
        }
        Ok((o, n))
    }

    fn read(mut self) -> Result<ShortcutIndex> {
        self.expect(FORMAT_HEADER)?;
        self.expect("[meta]")?;
        let mut meta = IndexMeta::default();
        let mut seen = (false, false);
        let (mut o, mut l) = self.next()?;
        while l != "[partition]" {
            let (key, rest) = l.split_once(char::is_whitespace).unwrap_or((&l, ""));
            let rest = rest.trim();
            match key {
                "strategy" if !rest.is_empty() => {
                    meta.strategy = rest.to_string();
                    seen.0 = true;
                }
                "seed" => {
                    meta.seed = textio::parse_token(Some(rest), o, "seed")?;
                    seen.1 = true;
                }
                "param" => {
                    let (k, v) = rest
                        .split_once(char::is_whitespace)
                        .ok_or_else(|| Error::format(o, "param needs a key and a value"))?;
                    meta.params.push((k.to_string(), v.trim().to_string()));
                }
                _ => return Err(Error::format(o, format!("unexpected meta line {l:?}"))),
            }
            (o, l) = self.next()?;
        }
        if !(seen.0 && seen.1) {
            return Err(Error::format(o, "meta needs strategy and seed"));
        }

        let (o, l) = self.next()?;
        let n: usize = match l.strip_prefix("vertices ") {
            Some(rest) => textio::parse_token(Some(rest.trim()), o, "vertex count")?,
            None => return Err(Error::format(o, "expected vertex count")),
        };
        let mut assignment = Vec::with_capacity(n);
        for v in 0..n {
            let (o, l) = self.next()?;
            let mut it = l.split_whitespace();
            let id: usize = textio::parse_token(it.next(), o, "vertex id")?;
            let c: u32 = textio::parse_token(it.next(), o, "cell id")?;
            textio::expect_end(&mut it, o)?;
            if id != v {
                return Err(Error::format(o, format!("expected vertex {v}, found {id}")));
            }
            assignment.push(c);
        }
        let cell_count = assignment
            .iter()
            .map(|&c| c as usize + 1)
            .max()
            .unwrap_or(0);

        self.expect("[pool]")?;
        let mut pools = Vec::with_capacity(cell_count);
        for cell in 0..cell_count as u32 {
            let (_, count) = self.cell_header(cell)?;
            let mut pool = PathPool::new();
            for id in 0..count as u32 {
                let (o, l) = self.next()?;
                let mut it = l.split_whitespace();
                let got: u32 = textio::parse_token(it.next(), o, "path id")?;
                if got != id {
                    return Err(Error::format(o, format!("expected path {id}, found {got}")));
                }
                let dist: Distance = textio::parse_token(it.next(), o, "distance")?;
                let seq = it
                    .map(|t| textio::parse_token::<VertexId>(Some(t), o, "vertex"))
                    .collect::<Result<Vec<_>>>()?;
                if seq.len() < 2 || seq[0] > seq[seq.len() - 1] {
                    return Err(Error::format(
                        o,
                        "pool sequence must be canonical with two or more vertices",
                    ));
                }
                if seq
                    .iter()
                    .any(|&v| v as usize >= n || assignment[v as usize] != cell)
                {
                    return Err(Error::format(
                        o,
                        format!("pool sequence leaves cell {cell}"),
                    ));
                }
                if pool.find(&seq).is_some() {
                    return Err(Error::format(o, "duplicate pool sequence"));
                }
                pool.push(&seq, dist);
            }
            pools.push(pool);
        }

        self.expect("[shortcuts]")?;
        let mut cells = Vec::with_capacity(cell_count);
        for (cell, pool) in pools.into_iter().enumerate() {
            let (_, count) = self.cell_header(cell as u32)?;
            let mut shortcuts: Vec<Shortcut> = Vec::new();
            for _ in 0..count {
                let (o, l) = self.next()?;
                let mut it = l.split_whitespace();
                let src: VertexId = textio::parse_token(it.next(), o, "source")?;
                let dst: VertexId = textio::parse_token(it.next(), o, "target")?;
                let rc = textio::parse_limits(&mut it, o)?;
                let tok = it.next();
                let (id_tok, reversed) = match tok.and_then(|t| t.strip_suffix('r')) {
                    Some(t) => (Some(t), true),
                    None => (tok, false),
                };
                let id: u32 = textio::parse_token(id_tok, o, "path id")?;
                textio::expect_end(&mut it, o)?;
                let seq = pool.sequence(id).ok_or(Error::DanglingRef {
                    cell: cell as u32,
                    path: id,
                })?;
                let (first, last) = (seq[0], seq[seq.len() - 1]);
                let (from, to) = if reversed {
                    (last, first)
                } else {
                    (first, last)
                };
                if (from, to) != (src, dst) {
                    return Err(Error::format(
                        o,
                        format!("path {id} does not run {src}->{dst}"),
                    ));
                }
                let dist = u32::try_from(pool.distances[id as usize])
                    .map_err(|_| Error::format(o, "distance out of range"))?;
                let entry = ShortcutEntry::new(rc, id, reversed, dist)
                    .map_err(|e| Error::format(o, e.to_string()))?;
                match shortcuts.last_mut() {
                    Some(s) if (s.src, s.dst) == (src, dst) => {
                        let prev = s.entries.last().expect("shortcuts are never empty");
                        if prev.sort_key() >= entry.sort_key() {
                            return Err(Error::format(o, "shortcut entries out of order"));
                        }
                        s.entries.push(entry);
                    }
                    last => {
                        if last.is_some_and(|s| (s.src, s.dst) > (src, dst)) {
                            return Err(Error::format(o, "shortcuts out of order"));
                        }
                        shortcuts.push(Shortcut {
                            src,
                            dst,
                            entries: vec![entry],
                        });
                    }
                }
            }
            for s in &shortcuts {
                let mut rcs: Vec<_> = s.entries.iter().map(|e| e.rc).collect();
                rcs.sort();
                if rcs.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::format(
                        self.lines.offset(),
                        format!("duplicate combination in shortcut {}->{}", s.src, s.dst),
                    ));
                }
            }
            cells.push(CellShortcuts {
                cell: cell as u32,
                pool,
                shortcuts,
            });
        }
        self.expect("[end]")?;
        if let Some((o, _)) = self.lines.next_record()? {
            return Err(Error::format(o, "trailing data after [end]"));
        }
        Ok(ShortcutIndex {
            meta,
            assignment,
            cells,
        })
    }
}

/// A cell's induced subgraph with dense local ids. Local ids follow global
/// order, so searches here break ties exactly like the global oracle.
struct LocalGraph {
    global: Vec<VertexId>,
    first_out: Vec<u32>,
    /// (head, local edge)
    arcs: Vec<(u32, u32)>,
    lengths: Vec<u32>,
}

impl LocalGraph {
    fn new(net: &RoadNetwork, decomp: &CellDecomposition, cell: u32) -> Result<Self> {
        let c = decomp.cell(cell)?;
        let mut first_out = vec![0u32];
        let mut arcs = Vec::new();
        for &v in &c.vertices {
            for a in net.arcs(v) {
                if let Ok(e) = c.edges.binary_search(&a.edge) {
                    let head = c.vertices.binary_search(&a.head).expect("induced edge");
                    arcs.push((head as u32, e as u32));
                }
            }
            first_out.push(arcs.len() as u32);
        }
        Ok(LocalGraph {
            global: c.vertices.clone(),
            first_out,
            arcs,
            lengths: c.edges.iter().map(|&e| net.edge(e).length).collect(),
        })
    }

    fn local(&self, v: VertexId) -> usize {
        self.global.binary_search(&v).expect("vertex in cell")
    }

    /// One-to-all search from `s` over edges with `mask[e]` set.
    fn search(&self, s: usize, mask: &[bool], dist: &mut [Distance], pred: &mut [(u32, u32)]) {
        use std::cmp::Reverse;
        dist.fill(Distance::MAX);
        let mut done = vec![false; self.global.len()];
        let mut heap = std::collections::BinaryHeap::new();
        dist[s] = 0;
        pred[s] = (s as u32, NONE);
        heap.push(Reverse((0, s as u32)));
        while let Some(Reverse((d, u))) = heap.pop() {
            let u = u as usize;
            if done[u] {
                continue;
            }
            done[u] = true;
            for &(w, e) in &self.arcs[self.first_out[u] as usize..self.first_out[u + 1] as usize] {
                let wi = w as usize;
                if done[wi] || !mask[e as usize] {
                    continue;
                }
                let nd = d + self.lengths[e as usize] as Distance;
                if nd < dist[wi] {
                    dist[wi] = nd;
                    pred[wi] = (u as u32, e);
                    heap.push(Reverse((nd, w)));
                } else if nd == dist[wi] && (u as u32, e) < pred[wi] {
                    pred[wi] = (u as u32, e);
                }
            }
        }
    }
}

/// Shortest within-cell paths between every ordered pair of boundary
/// vertices of `cell`, one entry per combination of `combos` that admits a
/// path. Combinations with the same feasible edge set share one search.
pub fn build_cell_shortcuts(
    net: &RoadNetwork,
    decomp: &CellDecomposition,
    cell: u32,
    combos: &CombinationSet,
) -> Result<CellShortcuts> {
    let c = decomp.cell(cell)?;
    let boundary = decomp.boundary_vertices(cell)?;
    let mut pool = PathPool::new();
    if combos.is_empty() || boundary.len() < 2 {
        return CellShortcuts::new(cell, pool, Vec::new());
    }
    let g = LocalGraph::new(net, decomp, cell)?;

    let mut groups: BTreeMap<Vec<bool>, Vec<RestrictionTriple>> = BTreeMap::new();
    for rc in combos {
        let mask = c
            .edges
            .iter()
            .map(|&e| edge_feasible(&net.edge(e).limits, rc))
            .collect();
        groups.entry(mask).or_default().push(*rc);
    }

    let mut entries: BTreeMap<(VertexId, VertexId), Vec<ShortcutEntry>> = BTreeMap::new();
    let mut dist = vec![0; g.global.len()];
    let mut pred = vec![(0, 0); g.global.len()];
    let mut seq = Vec::new();
    for (mask, rcs) in &groups {
        for &s in boundary {
            let sl = g.local(s);
            g.search(sl, mask, &mut dist, &mut pred);
            for &t in boundary {
                let tl = g.local(t);
                if t == s || dist[tl] == Distance::MAX {
                    continue;
                }
                seq.clear();
                let mut v = tl;
                seq.push(g.global[v]);
                while v != sl {
                    v = pred[v].0 as usize;
                    seq.push(g.global[v]);
                }
                seq.reverse();
                let d = u32::try_from(dist[tl]).map_err(|_| {
                    Error::invalid(format!("distance {} in cell {cell} overflows", dist[tl]))
                })?;
                let (id, reversed) = pool.insert(&seq, dist[tl]);
                let list = entries.entry((s, t)).or_default();
                for rc in rcs {
                    list.push(ShortcutEntry::new(*rc, id, reversed, d)?);
                }
            }
        }
    }
    let shortcuts = entries
        .into_iter()
        .map(|((s, t), list)| Shortcut::new(s, t, list))
        .collect::<Result<Vec<_>>>()?;
    CellShortcuts::new(cell, pool, shortcuts)
}

/// Builds every cell in parallel. `combos[i]` is the set for cell `i`.
pub fn build_index(
    net: &RoadNetwork,
    decomp: &CellDecomposition,
    combos: &[CombinationSet],
    meta: IndexMeta,
) -> Result<ShortcutIndex> {
    if combos.len() != decomp.cell_count() {
        return Err(Error::invalid(format!(
            "{} combination sets for {} cells",
            combos.len(),
            decomp.cell_count()
        )));
    }
    let cells = combos
        .par_iter()
        .enumerate()
        .map(|(i, set)| build_cell_shortcuts(net, decomp, i as u32, set))
        .collect::<Result<Vec<_>>>()?;
    ShortcutIndex::new(meta, decomp, cells)
}

/// Entries `e2` of `s` for which some entry with a componentwise smaller or
/// equal combination is strictly longer. Smaller combinations admit a
/// superset of edges, so this must be zero.
pub fn monotonicity_violations(s: &Shortcut) -> usize {
    // dominance prefix-max over the grid of the shortcut's own values
    let axes: [Vec<f64>; 3] = [0, 1, 2].map(|d| {
        let mut v: Vec<f64> = s.entries.iter().map(|e| e.rc.as_array()[d]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    });
    let dims = axes.clone().map(|a| a.len());
    let at = |i: usize, j: usize, k: usize| (i * dims[1] + j) * dims[2] + k;
    let pos = |e: &ShortcutEntry| {
        let a = e.rc.as_array();
        [0, 1, 2].map(|d| axes[d].partition_point(|&x| x < a[d]))
    };
    let mut grid = vec![0u32; dims.iter().product()];
    for e in &s.entries {
        let [i, j, k] = pos(e);
        grid[at(i, j, k)] = e.distance;
    }
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let mut m = grid[at(i, j, k)];
                if i > 0 {
                    m = m.max(grid[at(i - 1, j, k)]);
                }
                if j > 0 {
                    m = m.max(grid[at(i, j - 1, k)]);
                }
                if k > 0 {
                    m = m.max(grid[at(i, j, k - 1)]);
                }
                grid[at(i, j, k)] = m;
            }
        }
    }
    s.entries
        .iter()
        .filter(|e| {
            let [i, j, k] = pos(e);
            grid[at(i, j, k)] > e.distance
        })
        .count()
}

/// Quadratic reference for [`monotonicity_violations`].
pub fn monotonicity_violations_brute(s: &Shortcut) -> usize {
    s.entries
        .iter()
        .filter(|e2| {
            s.entries
                .iter()
                .any(|e1| e1.rc.le_all(&e2.rc) && e1.distance > e2.distance)
        })
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IndexAudit {
    pub entries: usize,
    /// Entries whose path is infeasible under their own combination, leaves
    /// the cell, has the wrong endpoints or a wrong distance.
    pub bad_entries: usize,
    pub monotonicity_violations: usize,
}

/// Checks every entry against the network and every shortcut for distance
/// monotonicity.
pub fn audit_index(net: &RoadNetwork, index: &ShortcutIndex) -> Result<IndexAudit> {
    let per_cell = index
        .cells
        .par_iter()
        .map(|cs| {
            let mut a = IndexAudit::default();
            for s in &cs.shortcuts {
                a.monotonicity_violations += monotonicity_violations(s);
                for e in &s.entries {
                    a.entries += 1;
                    let seq = cs.resolve(e)?;
                    let ok = seq.first() == Some(&s.src)
                        && seq.last() == Some(&s.dst)
                        && seq
                            .iter()
                            .all(|&v| index.assignment.get(v as usize) == Some(&cs.cell))
                        && crate::model::path_distance(&seq, net).ok() == Some(e.distance())
                        && crate::model::path_feasible(&seq, &e.rc, net).unwrap_or(false);
                    a.bad_entries += usize::from(!ok);
                }
            }
            Ok(a)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_cell
        .into_iter()
        .fold(IndexAudit::default(), |x, y| IndexAudit {
            entries: x.entries + y.entries,
            bad_entries: x.bad_entries + y.bad_entries,
            monotonicity_violations: x.monotonicity_violations + y.monotonicity_violations,
        }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combos::{all_combinations, collect_catalog};
    use crate::fixtures::{rc, sample_decomposition, sample_network, veh};
    use crate::oracle::cell_shortest_path;

    const INF: f64 = f64::INFINITY;

    fn sample_combos() -> CombinationSet {
        [rc(1.8, INF, 40.0), rc(2.0, 2.0, 15.0), rc(2.5, 2.4, 10.0)]
            .into_iter()
            .collect()
    }

    fn sample_index(combos: CombinationSet) -> (RoadNetwork, CellDecomposition, ShortcutIndex) {
        let net = sample_network();
        let d = sample_decomposition(&net);
        let sets = vec![CombinationSet::new(), combos, CombinationSet::new()];
        let idx = build_index(&net, &d, &sets, IndexMeta::new("test", 0)).unwrap();
        (net, d, idx)
    }

    #[test]
    fn sample_shortcut_entries() {
        let (_, _, idx) = sample_index(sample_combos());
        let cs = idx.cell(1).unwrap();
        let s = cs.shortcut(7, 6).unwrap();
        let paths: Vec<_> = s.entries().iter().map(|e| cs.resolve(e).unwrap()).collect();
        assert_eq!(
            paths,
            vec![vec![7, 4, 6], vec![7, 4, 2, 6], vec![7, 4, 1, 2, 6]]
        );
        let dists: Vec<_> = s.entries().iter().map(|e| e.distance()).collect();
        assert_eq!(dists, vec![2, 3, 4]);
        // the reverse shortcut shares the pooled sequences
        assert_eq!(cs.pool().len(), 3);
        assert!(s.entries().iter().all(|e| e.reversed()));
        assert!(cs
            .shortcut(6, 7)
            .unwrap()
            .entries()
            .iter()
            .all(|e| !e.reversed()));
    }

    #[test]
    fn matching_on_the_sample() {
        let (_, _, idx) = sample_index(sample_combos());
        let cs = idx.cell(1).unwrap();
        let s = cs.shortcut(7, 6).unwrap();
        let (m, scanned) = s.find_match(&veh(2.0, 2.0, 10.0));
        assert_eq!(cs.resolve(m.unwrap()).unwrap(), vec![7, 4, 2, 6]);
        assert_eq!(scanned, 2);
        let (m, scanned) = s.find_match(&veh(3.0, 3.0, 50.0));
        assert!(m.is_none());
        assert_eq!(scanned, 3);
    }

    #[test]
    fn identical_paths_share_one_pool_sequence() {
        let (_, _, idx) = sample_index(
            [rc(2.0, 2.4, 10.0), rc(2.5, 2.4, 10.0)]
                .into_iter()
                .collect(),
        );
        let stats = idx.storage_stats();
        assert_eq!(stats.total_entries, 4);
        assert_eq!(stats.distinct_paths, 1);
        assert_eq!(stats.total_path_vertices, 5);
    }

    #[test]
    fn empty_combinations_give_empty_index() {
        let (_, _, idx) = sample_index(CombinationSet::new());
        assert_eq!(idx.storage_stats(), StorageStats::default());
    }

    #[test]
    fn all_combinations_match_the_oracle() {
        let net = sample_network();
        let d = sample_decomposition(&net);
        let all = all_combinations(&collect_catalog(&net, &d.cells()[1]));
        let cs = build_cell_shortcuts(&net, &d, 1, &all).unwrap();
        for rc in &all {
            for (s, t) in [(7, 6), (6, 7)] {
                let want = cell_shortest_path(&net, &d, 1, s, t, rc).unwrap();
                let got = cs
                    .shortcut(s, t)
                    .and_then(|sc| sc.entries().iter().find(|e| e.rc() == rc))
                    .map(|e| cs.resolve(e).unwrap());
                assert_eq!(got, want.map(|p| p.into_vertices()), "{rc:?} {s}->{t}");
            }
        }
        let idx = ShortcutIndex::new(
            IndexMeta::new("all", 0),
            &d,
            vec![
                build_cell_shortcuts(&net, &d, 0, &CombinationSet::new()).unwrap(),
                cs,
                build_cell_shortcuts(&net, &d, 2, &CombinationSet::new()).unwrap(),
            ],
        )
        .unwrap();
        let audit = audit_index(&net, &idx).unwrap();
        assert_eq!(audit.bad_entries, 0);
        assert_eq!(audit.monotonicity_violations, 0);
        for s in idx.cell(1).unwrap().shortcuts() {
            assert_eq!(monotonicity_violations_brute(s), 0);
        }
    }

    #[test]
    fn monotonicity_checker_flags_inversions() {
        let mut pool = PathPool::new();
        let (a, _) = pool.insert(&[0, 1], 1);
        let (b, _) = pool.insert(&[0, 2, 1], 5);
        let s = Shortcut::new(
            0,
            1,
            vec![
                ShortcutEntry::new(rc(2.0, 2.0, 2.0), b, false, 5).unwrap(),
                ShortcutEntry::new(rc(3.0, 3.0, 3.0), a, false, 1).unwrap(),
                ShortcutEntry::new(rc(1.0, 4.0, 4.0), a, false, 1).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(monotonicity_violations(&s), 1);
        assert_eq!(monotonicity_violations_brute(&s), 1);
    }

    #[test]
    fn text_round_trip() {
        let (net, d, idx) = sample_index(sample_combos());
        let idx = ShortcutIndex {
            meta: IndexMeta::new("trapp", 7).param("k", 30).param("f", 0.03),
            ..idx
        };
        let mut buf = Vec::new();
        idx.write_text(&mut buf).unwrap();
        let back = ShortcutIndex::read_text(&buf[..]).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.decomposition(&net).unwrap(), d);
        back.check_decomposition(&d).unwrap();

        let (_, _, empty) = sample_index(CombinationSet::new());
        let mut buf = Vec::new();
        empty.write_text(&mut buf).unwrap();
        assert_eq!(ShortcutIndex::read_text(&buf[..]).unwrap(), empty);
    }

    #[test]
    fn malformed_files() {
        let (_, _, idx) = sample_index(sample_combos());
        let mut buf = Vec::new();
        idx.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let truncated = &text[..text.len() / 2];
        assert!(matches!(
            ShortcutIndex::read_text(truncated.as_bytes()),
            Err(Error::Format { .. })
        ));
        let bad_version = text.replacen("trapp-index 1", "trapp-index 9", 1);
        assert!(matches!(
            ShortcutIndex::read_text(bad_version.as_bytes()),
            Err(Error::Format { offset: 0, .. })
        ));
        let dangling: String = text
            .lines()
            .map(|l| {
                if l.starts_with("6 7 ") {
                    let (head, _) = l.rsplit_once(' ').unwrap();
                    format!("{head} 9\n")
                } else {
                    format!("{l}\n")
                }
            })
            .collect();
        assert!(matches!(
            ShortcutIndex::read_text(dangling.as_bytes()),
            Err(Error::DanglingRef { cell: 1, path: 9 })
        ));
    }

    #[test]
    fn mismatched_decomposition() {
        let (net, _, idx) = sample_index(sample_combos());
        let other = CellDecomposition::from_assignment(&net, vec![0; 10]).unwrap();
        assert!(matches!(
            idx.check_decomposition(&other),
            Err(Error::MismatchedIndex(_))
        ));
    }
}
