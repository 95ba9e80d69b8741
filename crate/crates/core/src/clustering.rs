//! K-means over vehicle dimensions and the per-cluster representation
//! vectors (componentwise maxima) that seed the combination filter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::TrafficFlow;
use crate::error::{Error, Result};
use crate::model::{RestrictionTriple, Vehicle};
use crate::partition::CellDecomposition;

pub const DEFAULT_K: usize = 30;
pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleCluster {
    members: Vec<Vehicle>,
}

impl VehicleCluster {
    pub fn new(members: Vec<Vehicle>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("clusters cannot be empty"));
        }
        Ok(VehicleCluster { members })
    }

    pub fn members(&self) -> &[Vehicle] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Componentwise maximum of a cluster; every member fits under it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepresentationVector([f64; 3]);

impl RepresentationVector {
    pub fn he(&self) -> f64 {
        self.0[0]
    }

    pub fn wi(&self) -> f64 {
        self.0[1]
    }

    pub fn wt(&self) -> f64 {
        self.0[2]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn as_triple(&self) -> RestrictionTriple {
        RestrictionTriple::from_array(self.0).expect("vehicle maxima are positive")
    }
}

pub fn representation_vector(cluster: &VehicleCluster) -> RepresentationVector {
    let mut max = [f64::MIN; 3];
    for v in cluster.members() {
        for (m, x) in max.iter_mut().zip(v.as_array()) {
            *m = m.max(x);
        }
    }
    RepresentationVector(max)
}

/// Clusters plus the objective after every Lloyd update.
#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub clusters: Vec<VehicleCluster>,
    pub objective: Vec<f64>,
}

pub fn kmeans(
    vehicles: &[Vehicle],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Vec<VehicleCluster>> {
    kmeans_traced(vehicles, k, seed, max_iters).map(|o| o.clusters)
}

/// Lloyd's algorithm on z-scored (he, wi, wt) with k-means++ seeding.
/// `k` is capped at the number of distinct vehicles and empty clusters are
/// dropped from the result.
pub fn kmeans_traced(
    vehicles: &[Vehicle],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KMeansOutcome> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if vehicles.is_empty() {
        return Err(Error::invalid("cannot cluster an empty vehicle list"));
    }
    let points = zscore(vehicles);
    let mut distinct: Vec<[u64; 3]> = points.iter().map(|p| p.map(f64::to_bits)).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let k = k.min(distinct.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(&points, k, &mut rng);
    let mut assign = vec![usize::MAX; points.len()];
    let mut objective = Vec::new();

    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        for (p, a) in points.iter().zip(assign.iter_mut()) {
            let best = nearest(&centers, p);
            if best != *a {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0; 3]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            for d in 0..3 {
                sums[a][d] += p[d];
            }
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].map(|s| s / counts[c] as f64);
            }
        }
        objective.push(
            points
                .iter()
                .zip(&assign)
                .map(|(p, &a)| sq_dist(p, &centers[a]))
                .sum(),
        );
    }

    let mut members: Vec<Vec<Vehicle>> = vec![Vec::new(); k];
    for (v, &a) in vehicles.iter().zip(&assign) {
        members[a].push(*v);
    }
    let clusters = members
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|members| VehicleCluster { members })
        .collect();
    Ok(KMeansOutcome {
        clusters,
        objective,
    })
}

fn zscore(vehicles: &[Vehicle]) -> Vec<[f64; 3]> {
    let n = vehicles.len() as f64;
    let mut mean = [0.0; 3];
    for v in vehicles {
        for (m, x) in mean.iter_mut().zip(v.as_array()) {
            *m += x / n;
        }
    }
    let mut sd = [0.0; 3];
    for v in vehicles {
        for d in 0..3 {
            sd[d] += (v.as_array()[d] - mean[d]).powi(2) / n;
        }
    }
    let sd = sd.map(|s| if s > 0.0 { s.sqrt() } else { 1.0 });
    vehicles
        .iter()
        .map(|v| {
            let a = v.as_array();
            [0, 1, 2].map(|d| (a[d] - mean[d]) / sd[d])
        })
        .collect()
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn nearest(centers: &[[f64; 3]], p: &[f64; 3]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn seed_centers(points: &[[f64; 3]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            // rounding can land the walk on an existing center
            if d2[idx] == 0.0 {
                idx = d2.iter().position(|&w| w > 0.0).expect("total > 0");
            }
            idx
        } else {
            break;
        };
        let c = points[pick];
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// Representation vectors per cell, in cell order then cluster order. With
/// untagged traffic every cell clusters the same global flow.
pub fn representation_vectors_all(
    decomp: &CellDecomposition,
    traffic: &TrafficFlow,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Vec<Vec<RepresentationVector>>> {
    if traffic.is_empty() {
        return Err(Error::invalid("traffic flow is empty"));
    }
    let rvs_of = |vehicles: &[Vehicle]| -> Result<Vec<RepresentationVector>> {
        if vehicles.is_empty() {
            return Ok(Vec::new());
        }
        Ok(kmeans(vehicles, k, seed, max_iters)?
            .iter()
            .map(representation_vector)
            .collect())
    };
    match &traffic.cells {
        None => {
            let rvs = rvs_of(&traffic.vehicles)?;
            Ok(vec![rvs; decomp.cell_count()])
        }
        Some(_) => (0..decomp.cell_count() as u32)
            .map(|c| rvs_of(&traffic.for_cell(c)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::veh;

    #[test]
    fn single_cluster() {
        let vs = vec![veh(1.5, 1.8, 1.6), veh(1.7, 1.7, 2.0), veh(3.0, 2.5, 20.0)];
        let c = kmeans(&vs, 1, 0, 10).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members(), &vs[..]);
    }

    #[test]
    fn identical_vehicles_collapse() {
        let vs = vec![veh(2.0, 2.0, 3.0); 8];
        let c = kmeans(&vs, 5, 3, 10).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 8);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(kmeans(&[], 3, 0, 10).is_err());
        assert!(kmeans(&[veh(1.0, 1.0, 1.0)], 0, 0, 10).is_err());
        assert!(VehicleCluster::new(vec![]).is_err());
    }

    #[test]
    fn representation_vector_is_componentwise_max() {
        let c = VehicleCluster::new(vec![veh(1.5, 1.8, 1.6), veh(1.7, 1.7, 2.0)]).unwrap();
        assert_eq!(representation_vector(&c).as_array(), [1.7, 1.8, 2.0]);
        let single = VehicleCluster::new(vec![veh(2.2, 1.9, 3.1)]).unwrap();
        assert_eq!(representation_vector(&single).as_array(), [2.2, 1.9, 3.1]);
    }

    #[test]
    fn zscore_handles_constant_columns() {
        let z = zscore(&[veh(2.0, 1.0, 5.0), veh(2.0, 3.0, 5.0)]);
        assert_eq!(z[0], [0.0, -1.0, 0.0]);
        assert_eq!(z[1], [0.0, 1.0, 0.0]);
    }
}
