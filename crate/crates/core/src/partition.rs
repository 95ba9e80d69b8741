//! Vertex partition into cells and their boundary (entry/exit) vertices.
//!
//! Cells come from seeded region growing: each cell starts at the lowest-id
//! unassigned vertex and repeatedly absorbs the frontier vertex with the most
//! already-assigned neighbours, which keeps cells compact and cuts small.
//! Fragments that end up below half the target size are merged into their
//! smallest neighbouring cell when that keeps it under twice the target.

use std::collections::BinaryHeap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{EdgeId, RoadNetwork, VertexId};
use crate::textio::{self, Lines};

pub const DEFAULT_CELL_SIZE: usize = 64;

const UNASSIGNED: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub id: u32,
    /// Sorted ascending.
    pub vertices: Vec<VertexId>,
    /// Edges with both endpoints in this cell, ascending.
    pub edges: Vec<EdgeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellDecomposition {
    cells: Vec<Cell>,
    cell_of: Vec<u32>,
    inter_cell_edges: Vec<EdgeId>,
    boundary: Vec<Vec<VertexId>>,
}

impl CellDecomposition {
    /// Builds a decomposition from an explicit vertex → cell map. Cell ids
    /// must be dense: every id below the maximum has at least one vertex.
    pub fn from_assignment(net: &RoadNetwork, cell_of: Vec<u32>) -> Result<Self> {
        if cell_of.len() != net.vertex_count() as usize {
            return Err(Error::invalid(format!(
                "assignment covers {} vertices, network has {}",
                cell_of.len(),
                net.vertex_count()
            )));
        }
        let cell_count = cell_of.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        let mut cells: Vec<Cell> = (0..cell_count as u32)
            .map(|id| Cell {
                id,
                vertices: Vec::new(),
                edges: Vec::new(),
            })
            .collect();
        for (v, &c) in cell_of.iter().enumerate() {
            cells[c as usize].vertices.push(v as VertexId);
        }
        if let Some(empty) = cells.iter().find(|c| c.vertices.is_empty()) {
            return Err(Error::invalid(format!("cell {} has no vertices", empty.id)));
        }

        let mut inter_cell_edges = Vec::new();
        let mut is_boundary = vec![false; cell_of.len()];
        for (id, e) in net.edges().iter().enumerate() {
            let (cu, cv) = (cell_of[e.u as usize], cell_of[e.v as usize]);
            if cu == cv {
                cells[cu as usize].edges.push(id as EdgeId);
            } else {
                inter_cell_edges.push(id as EdgeId);
                is_boundary[e.u as usize] = true;
                is_boundary[e.v as usize] = true;
            }
        }
        let boundary = cells
            .iter()
            .map(|c| {
                c.vertices
                    .iter()
                    .copied()
                    .filter(|&v| is_boundary[v as usize])
                    .collect()
            })
            .collect();

        Ok(CellDecomposition {
            cells,
            cell_of,
            inter_cell_edges,
            boundary,
        })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, id: u32) -> Result<&Cell> {
        self.cells.get(id as usize).ok_or(Error::UnknownCell(id))
    }

    #[inline]
    pub fn cell_of(&self, v: VertexId) -> u32 {
        self.cell_of[v as usize]
    }

    pub fn assignment(&self) -> &[u32] {
        &self.cell_of
    }

    pub fn inter_cell_edges(&self) -> &[EdgeId] {
        &self.inter_cell_edges
    }

    /// Endpoints of inter-cell edges that lie in `cell_id`, ascending. On an
    /// undirected network this is both the entry and the exit set.
    pub fn boundary_vertices(&self, cell_id: u32) -> Result<&[VertexId]> {
        self.boundary
            .get(cell_id as usize)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownCell(cell_id))
    }

    pub fn boundary_vertex_count(&self) -> usize {
        self.boundary.iter().map(Vec::len).sum()
    }

    /// Stable hash of the vertex → cell map, stored in index metadata.
    pub fn fingerprint(&self) -> u64 {
        assignment_fingerprint(&self.cell_of)
    }

    /// One `vertex_id cell_id` line per vertex.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (v, c) in self.cell_of.iter().enumerate() {
            writeln!(w, "{v} {c}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(net: &RoadNetwork, r: R) -> Result<Self> {
        let n = net.vertex_count() as usize;
        let mut cell_of = vec![UNASSIGNED; n];
        let mut lines = Lines::new(r);
        while let Some((offset, line)) = lines.next_record()? {
            let mut it = line.split_whitespace();
            let v: u32 = textio::parse_token(it.next(), offset, "vertex id")?;
            let c: u32 = textio::parse_token(it.next(), offset, "cell id")?;
            textio::expect_end(&mut it, offset)?;
            let slot = cell_of
                .get_mut(v as usize)
                .ok_or_else(|| Error::format(offset, format!("vertex {v} out of range")))?;
            if *slot != UNASSIGNED {
                return Err(Error::format(offset, format!("vertex {v} assigned twice")));
            }
            if c == UNASSIGNED {
                return Err(Error::format(offset, "cell id out of range"));
            }
            *slot = c;
        }
        if let Some(v) = cell_of.iter().position(|&c| c == UNASSIGNED) {
            return Err(Error::format(
                lines.offset(),
                format!("vertex {v} has no cell"),
            ));
        }
        Self::from_assignment(net, cell_of)
    }
}

pub(crate) fn assignment_fingerprint(cell_of: &[u32]) -> u64 {
    textio::fnv1a(
        (cell_of.len() as u64)
            .to_le_bytes()
            .into_iter()
            .chain(cell_of.iter().flat_map(|c| c.to_le_bytes())),
    )
}

/// Seeded region-growing partition targeting `target_cell_size` vertices per
/// cell.
pub fn partition(
    net: &RoadNetwork,
    target_cell_size: usize,
    seed: u64,
) -> Result<CellDecomposition> {
    if target_cell_size < 2 {
        return Err(Error::invalid("target cell size must be at least 2"));
    }
    let n = net.vertex_count() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tie: Vec<u32> = (0..n).map(|_| rng.random()).collect();

    let mut cell_of = vec![UNASSIGNED; n];
    let mut sizes: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut next_seed = 0usize;

    let assigned_neighbours = |cell_of: &[u32], v: VertexId| {
        net.arcs(v)
            .iter()
            .filter(|a| cell_of[a.head as usize] != UNASSIGNED)
            .count() as u32
    };

    loop {
        while next_seed < n && cell_of[next_seed] != UNASSIGNED {
            next_seed += 1;
        }
        if next_seed == n {
            break;
        }
        let cell = sizes.len() as u32;
        let mut size = 0;
        heap.clear();
        heap.push((0u32, std::cmp::Reverse(0u32), next_seed as VertexId));
        while size < target_cell_size {
            let Some((score, _, v)) = heap.pop() else {
                break;
            };
            if cell_of[v as usize] != UNASSIGNED
                || (size > 0 && score != assigned_neighbours(&cell_of, v))
            {
                continue;
            }
            cell_of[v as usize] = cell;
            size += 1;
            for a in net.arcs(v) {
                let w = a.head;
                if cell_of[w as usize] == UNASSIGNED {
                    let s = assigned_neighbours(&cell_of, w);
                    heap.push((s, std::cmp::Reverse(tie[w as usize]), w));
                }
            }
        }
        sizes.push(size);
    }

    merge_fragments(net, &mut cell_of, &mut sizes, target_cell_size);

    // renumber by first appearance in vertex order
    let mut relabel = vec![UNASSIGNED; sizes.len()];
    let mut next = 0;
    for c in cell_of.iter_mut() {
        if relabel[*c as usize] == UNASSIGNED {
            relabel[*c as usize] = next;
            next += 1;
        }
        *c = relabel[*c as usize];
    }
    CellDecomposition::from_assignment(net, cell_of)
}

fn merge_fragments(net: &RoadNetwork, cell_of: &mut [u32], sizes: &mut [usize], target: usize) {
    let cell_count = sizes.len();
    let mut members: Vec<Vec<VertexId>> = vec![Vec::new(); cell_count];
    for (v, &c) in cell_of.iter().enumerate() {
        members[c as usize].push(v as VertexId);
    }
    for c in 0..cell_count {
        if sizes[c] == 0 || sizes[c] * 2 >= target {
            continue;
        }
        let mut best: Option<(usize, u32)> = None;
        for &v in &members[c] {
            for a in net.arcs(v) {
                let other = cell_of[a.head as usize];
                if other as usize == c || sizes[other as usize] + sizes[c] > 2 * target {
                    continue;
                }
                let key = (sizes[other as usize], other);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        if let Some((_, into)) = best {
            let moved = std::mem::take(&mut members[c]);
            for &v in &moved {
                cell_of[v as usize] = into;
            }
            sizes[into as usize] += sizes[c];
            sizes[c] = 0;
            members[into as usize].extend(moved);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{path_graph, sample_decomposition, sample_network};

    #[test]
    fn path_graph_splits_in_two() {
        let net = path_graph(10);
        let d = partition(&net, 5, 1).unwrap();
        assert_eq!(d.cell_count(), 2);
        assert_eq!(d.cells()[0].vertices, vec![0, 1, 2, 3, 4]);
        assert_eq!(d.cells()[1].vertices, vec![5, 6, 7, 8, 9]);
        assert_eq!(d.inter_cell_edges().len(), 1);
        assert_eq!(d.boundary_vertices(0).unwrap(), &[4]);
        assert_eq!(d.boundary_vertices(1).unwrap(), &[5]);
    }

    #[test]
    fn large_target_gives_one_cell() {
        let net = path_graph(10);
        let d = partition(&net, 10, 3).unwrap();
        assert_eq!(d.cell_count(), 1);
        assert!(d.boundary_vertices(0).unwrap().is_empty());
        assert!(d.inter_cell_edges().is_empty());
    }

    #[test]
    fn sample_boundary() {
        let net = sample_network();
        let d = sample_decomposition(&net);
        assert_eq!(d.boundary_vertices(1).unwrap(), &[6, 7]);
        assert_eq!(d.boundary_vertices(0).unwrap(), &[8]);
        assert!(matches!(d.boundary_vertices(3), Err(Error::UnknownCell(3))));
    }

    #[test]
    fn rejects_small_target_and_bad_assignment() {
        let net = path_graph(4);
        assert!(partition(&net, 1, 0).is_err());
        assert!(CellDecomposition::from_assignment(&net, vec![0, 0, 2, 2]).is_err());
        assert!(CellDecomposition::from_assignment(&net, vec![0, 0, 1]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let net = path_graph(10);
        let d = partition(&net, 5, 1).unwrap();
        let mut buf = Vec::new();
        d.write_text(&mut buf).unwrap();
        assert_eq!(CellDecomposition::read_text(&net, &buf[..]).unwrap(), d);
        let err = CellDecomposition::read_text(&net, &b"0 0\n0 1\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 4, .. }));
    }
}
