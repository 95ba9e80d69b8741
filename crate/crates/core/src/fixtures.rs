//! Small hand-built instances shared by unit and integration tests.

use crate::model::{Edge, RestrictionTriple, RoadNetwork, Vehicle};
use crate::partition::CellDecomposition;

const INF: f64 = f64::INFINITY;

pub fn rc(he: f64, wi: f64, wt: f64) -> RestrictionTriple {
    RestrictionTriple::new(he, wi, wt).unwrap()
}

pub fn veh(he: f64, wi: f64, wt: f64) -> Vehicle {
    Vehicle::new(he, wi, wt).unwrap()
}

fn edge(u: u32, v: u32, length: u32, limits: RestrictionTriple) -> Edge {
    Edge {
        u,
        v,
        length,
        limits,
    }
}

/// A cell on vertices 0..=7 whose entry/exit pair is (7, 6), plus two
/// outside vertices 8 and 9 hanging off 7 and 6.
///
/// Inside the cell there are 6 height, 4 width and 5 weight catalog values
/// (counting "unrestricted"). The shortest 7→6 paths are:
/// - unrestricted / (1.8, -, 40): 7 4 6, length 2
/// - (2.0, 2.0, 15): 7 4 2 6, length 3
/// - (2.0, 2.4, 10) and (2.5, 2.4, 10): 7 4 1 2 6, length 4
pub fn sample_network() -> RoadNetwork {
    let edges = vec![
        edge(0, 7, 1, rc(INF, INF, 15.0)),
        edge(0, 5, 3, rc(INF, INF, INF)),
        edge(1, 2, 1, rc(INF, INF, 10.0)),
        edge(1, 3, 2, rc(2.0, INF, INF)),
        edge(1, 4, 1, rc(2.5, 2.4, INF)),
        edge(2, 4, 1, rc(3.0, 2.0, 20.0)),
        edge(2, 6, 1, rc(INF, 3.0, 15.0)),
        edge(3, 5, 1, rc(INF, 3.0, 20.0)),
        edge(4, 6, 1, rc(1.8, INF, INF)),
        edge(4, 7, 1, rc(3.5, INF, 40.0)),
        edge(5, 6, 2, rc(3.0, INF, 10.0)),
        edge(6, 9, 1, RestrictionTriple::UNRESTRICTED),
        edge(7, 8, 1, RestrictionTriple::UNRESTRICTED),
    ];
    RoadNetwork::new(10, edges).unwrap()
}

/// Three cells: {8}, the sample cell {0..=7}, and {9}.
pub fn sample_decomposition(net: &RoadNetwork) -> CellDecomposition {
    let mut assignment = vec![1u32; 10];
    assignment[8] = 0;
    assignment[9] = 2;
    CellDecomposition::from_assignment(net, assignment).unwrap()
}

/// Path graph 0 - 1 - ... - (n-1) with unit lengths and no limits.
pub fn path_graph(n: u32) -> RoadNetwork {
    let edges = (1..n)
        .map(|v| edge(v - 1, v, 1, RestrictionTriple::UNRESTRICTED))
        .collect();
    RoadNetwork::new(n, edges).unwrap()
}
