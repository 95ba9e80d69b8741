//! Per-cell restriction combinations: the catalog of limit values found on a
//! cell's edges, the traffic-driven TRAPP selection (representation vector
//! mapping plus combination rematch), and the All / Random baselines.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clustering::{self, RepresentationVector};
use crate::datagen::TrafficFlow;
use crate::error::{Error, Result};
use crate::model::{dominates, Attr, RestrictionTriple, RoadNetwork, Vehicle};
use crate::partition::{Cell, CellDecomposition};

pub const DEFAULT_REMATCH_FRACTION: f64 = 0.03;

/// Distinct limit values per type occurring inside a cell, ascending, with
/// infinity last when some edge of the cell lacks that limit.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionCatalog {
    values: [Vec<f64>; 3],
}

impl RestrictionCatalog {
    pub fn new(values: [Vec<f64>; 3]) -> Result<Self> {
        for (attr, vals) in Attr::ALL.iter().zip(&values) {
            if vals.is_empty() {
                return Err(Error::invalid(format!("{} catalog is empty", attr.name())));
            }
            if vals.iter().any(|&v| v.is_nan() || v <= 0.0) || vals.windows(2).any(|w| w[0] >= w[1])
            {
                return Err(Error::invalid(format!(
                    "{} catalog must be positive and strictly increasing",
                    attr.name()
                )));
            }
        }
        Ok(RestrictionCatalog { values })
    }

    pub fn values(&self, attr: Attr) -> &[f64] {
        &self.values[attr.index()]
    }

    pub fn finite_values(&self, attr: Attr) -> &[f64] {
        let v = self.values(attr);
        match v.last() {
            Some(x) if x.is_infinite() => &v[..v.len() - 1],
            _ => v,
        }
    }

    /// Number of triples in the full cross product.
    pub fn combination_count(&self) -> usize {
        self.values.iter().map(Vec::len).product()
    }

    pub fn contains(&self, attr: Attr, value: f64) -> bool {
        self.position(attr, value).is_some()
    }

    fn position(&self, attr: Attr, value: f64) -> Option<usize> {
        self.values(attr).iter().position(|&v| v == value)
    }

    /// Index of the first catalog value `>= x`, or the list length when
    /// every value is smaller.
    fn rank(&self, attr: Attr, x: f64) -> usize {
        self.values(attr).partition_point(|&v| v < x)
    }
}

pub fn collect_catalog(net: &RoadNetwork, cell: &Cell) -> RestrictionCatalog {
    let mut values: [Vec<f64>; 3] = Default::default();
    let mut unrestricted = [cell.edges.is_empty(); 3];
    for &e in &cell.edges {
        let limits = net.edge(e).limits;
        for attr in Attr::ALL {
            let v = limits.get(attr);
            if v.is_finite() {
                values[attr.index()].push(v);
            } else {
                unrestricted[attr.index()] = true;
            }
        }
    }
    for (vals, open) in values.iter_mut().zip(unrestricted) {
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        if open || vals.is_empty() {
            vals.push(f64::INFINITY);
        }
    }
    RestrictionCatalog { values }
}

/// Deduplicated restriction triples, iterated in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CombinationSet(BTreeSet<RestrictionTriple>);

impl CombinationSet {
    pub fn new() -> Self {
        CombinationSet::default()
    }

    pub fn insert(&mut self, rc: RestrictionTriple) -> bool {
        self.0.insert(rc)
    }

    pub fn contains(&self, rc: &RestrictionTriple) -> bool {
        self.0.contains(rc)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RestrictionTriple> + '_ {
        self.0.iter()
    }

    pub fn is_superset(&self, other: &CombinationSet) -> bool {
        self.0.is_superset(&other.0)
    }

    /// Every component of every triple occurs in the catalog.
    pub fn within(&self, cat: &RestrictionCatalog) -> bool {
        self.iter()
            .all(|rc| Attr::ALL.iter().all(|&a| cat.contains(a, rc.get(a))))
    }
}

impl FromIterator<RestrictionTriple> for CombinationSet {
    fn from_iter<I: IntoIterator<Item = RestrictionTriple>>(iter: I) -> Self {
        CombinationSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a CombinationSet {
    type Item = &'a RestrictionTriple;
    type IntoIter = std::collections::btree_set::Iter<'a, RestrictionTriple>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Maps each component to the nearest finite catalog value (ties go to the
/// larger value). A type whose catalog holds only infinity maps to infinity.
pub fn map_vector(rv: &RepresentationVector, cat: &RestrictionCatalog) -> RestrictionTriple {
    let rv = rv.as_array();
    let mut out = [f64::INFINITY; 3];
    for attr in Attr::ALL {
        let x = rv[attr.index()];
        let finite = cat.finite_values(attr);
        if finite.is_empty() {
            continue;
        }
        let i = finite.partition_point(|&v| v < x);
        out[attr.index()] = if i == 0 {
            finite[0]
        } else if i == finite.len() {
            finite[i - 1]
        } else {
            let (lo, hi) = (finite[i - 1], finite[i]);
            if x - lo < hi - x {
                lo
            } else {
                hi
            }
        };
    }
    RestrictionTriple::from_array(out).expect("catalog values are valid limits")
}

/// Maps every representation vector into its cell's catalog.
pub fn refine_all(
    rvs: &[Vec<RepresentationVector>],
    catalogs: &[RestrictionCatalog],
) -> Result<Vec<CombinationSet>> {
    if rvs.len() != catalogs.len() {
        return Err(Error::invalid(format!(
            "{} representation vector lists for {} catalogs",
            rvs.len(),
            catalogs.len()
        )));
    }
    Ok(rvs
        .iter()
        .zip(catalogs)
        .map(|(list, cat)| list.iter().map(|rv| map_vector(rv, cat)).collect())
        .collect())
}

/// Number of vehicles that fit under `rc` but under no componentwise-smaller
/// member of `set`: the vehicles `rc` would newly (or more tightly) serve.
pub fn theta(rc: &RestrictionTriple, set: &CombinationSet, cell_traffic: &[Vehicle]) -> usize {
    let smaller: Vec<&RestrictionTriple> = set.iter().filter(|other| other.le_all(rc)).collect();
    cell_traffic
        .iter()
        .filter(|c| dominates(c, rc) && !smaller.iter().any(|s| dominates(c, s)))
        .count()
}

/// Traffic binned by catalog rank per type. A vehicle fits under a triple of
/// catalog values exactly when each of its ranks is at most the value's
/// catalog index, so theta reduces to sums over at most |he|·|wi|·|wt| bins.
struct RankHistogram {
    dims: [usize; 3],
    counts: Vec<usize>,
}

impl RankHistogram {
    fn new(cat: &RestrictionCatalog, traffic: &[Vehicle]) -> Self {
        let dims = Attr::ALL.map(|a| cat.values(a).len());
        let mut counts = vec![0; dims.iter().product()];
        for c in traffic {
            let r = Attr::ALL.map(|a| cat.rank(a, c.get(a)));
            if r.iter().zip(&dims).all(|(r, d)| r < d) {
                counts[(r[0] * dims[1] + r[1]) * dims[2] + r[2]] += 1;
            }
        }
        RankHistogram { dims, counts }
    }

    fn theta(&self, rc: [usize; 3], smaller: &[[usize; 3]]) -> usize {
        let mut total = 0;
        for a in 0..=rc[0] {
            for b in 0..=rc[1] {
                for c in 0..=rc[2] {
                    let n = self.counts[(a * self.dims[1] + b) * self.dims[2] + c];
                    if n > 0 && !smaller.iter().any(|s| a <= s[0] && b <= s[1] && c <= s[2]) {
                        total += n;
                    }
                }
            }
        }
        total
    }
}

/// Combination rematch: for every member of a snapshot of `set`, swap one
/// component for the value one or two steps up or down among the snapshot's
/// sorted values of that type, and keep the variant if theta reaches
/// `f * |cell_traffic|`.
pub fn rematch(
    set: &CombinationSet,
    cell_traffic: &[Vehicle],
    f: f64,
    cat: &RestrictionCatalog,
) -> Result<CombinationSet> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::invalid(format!(
            "rematch fraction {f} outside [0, 1]"
        )));
    }
    if !set.within(cat) {
        return Err(Error::invalid(
            "combination uses values outside the cell catalog",
        ));
    }
    let threshold = f * cell_traffic.len() as f64;
    let hist = RankHistogram::new(cat, cell_traffic);
    let index_of = |rc: &RestrictionTriple| {
        Attr::ALL.map(|a| cat.position(a, rc.get(a)).expect("checked by within()"))
    };
    let snapshot: Vec<[usize; 3]> = set.iter().map(index_of).collect();
    let per_type: [Vec<usize>; 3] = [0, 1, 2].map(|d| {
        let mut v: Vec<usize> = snapshot.iter().map(|rc| rc[d]).collect();
        v.sort_unstable();
        v.dedup();
        v
    });

    let mut out = set.clone();
    for rc in &snapshot {
        for d in 0..3 {
            let values = &per_type[d];
            let pos = values
                .binary_search(&rc[d])
                .expect("value comes from the snapshot") as isize;
            for j in 1..=2isize {
                for p in [pos + j, pos - j] {
                    if p < 0 || p as usize >= values.len() {
                        continue;
                    }
                    let mut cand = *rc;
                    cand[d] = values[p as usize];
                    let smaller: Vec<[usize; 3]> = snapshot
                        .iter()
                        .filter(|s| (0..3).all(|i| s[i] <= cand[i]))
                        .copied()
                        .collect();
                    if hist.theta(cand, &smaller) as f64 >= threshold {
                        out.insert(
                            RestrictionTriple::from_array(
                                Attr::ALL.map(|a| cat.values(a)[cand[a.index()]]),
                            )
                            .expect("catalog values are valid limits"),
                        );
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Full cross product of the catalog.
pub fn all_combinations(cat: &RestrictionCatalog) -> CombinationSet {
    let mut set = CombinationSet::new();
    for &he in cat.values(Attr::Height) {
        for &wi in cat.values(Attr::Width) {
            for &wt in cat.values(Attr::Weight) {
                set.insert(RestrictionTriple::new(he, wi, wt).expect("catalog values are valid"));
            }
        }
    }
    set
}

/// Uniform sample without replacement of `budget` triples from the cross
/// product (all of them when the budget covers it).
pub fn random_combinations(cat: &RestrictionCatalog, budget: usize, seed: u64) -> CombinationSet {
    let total = cat.combination_count();
    if budget >= total {
        return all_combinations(cat);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [nh, nw, nt] = Attr::ALL.map(|a| cat.values(a).len());
    debug_assert_eq!(nh * nw * nt, total);
    rand::seq::index::sample(&mut rng, total, budget)
        .into_iter()
        .map(|i| {
            let (h, rest) = (i / (nw * nt), i % (nw * nt));
            RestrictionTriple::new(
                cat.values(Attr::Height)[h],
                cat.values(Attr::Width)[rest / nt],
                cat.values(Attr::Weight)[rest % nt],
            )
            .expect("catalog values are valid")
        })
        .collect()
}

/// How many combinations the Random baseline keeps per cell.
#[derive(Debug, Clone, PartialEq)]
pub enum RandomBudget {
    PerCell(usize),
    /// One budget per cell, e.g. the TRAPP selection sizes.
    Matched(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrappParams {
    pub k: usize,
    pub f: f64,
    pub max_iters: usize,
}

impl Default for TrappParams {
    fn default() -> Self {
        TrappParams {
            k: clustering::DEFAULT_K,
            f: DEFAULT_REMATCH_FRACTION,
            max_iters: clustering::DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    All,
    Random(RandomBudget),
    Trapp(TrappParams),
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::All => "all",
            Strategy::Random(_) => "random",
            Strategy::Trapp(_) => "trapp",
        }
    }
}

/// Intermediate products of the TRAPP selection, kept for dumps and checks.
#[derive(Debug, Clone)]
pub struct TrappSelection {
    pub representation_vectors: Vec<Vec<RepresentationVector>>,
    pub refined: Vec<CombinationSet>,
    pub combinations: Vec<CombinationSet>,
}

pub fn trapp_selection(
    net: &RoadNetwork,
    decomp: &CellDecomposition,
    traffic: &TrafficFlow,
    params: &TrappParams,
    seed: u64,
) -> Result<TrappSelection> {
    let catalogs: Vec<RestrictionCatalog> = decomp
        .cells()
        .iter()
        .map(|c| collect_catalog(net, c))
        .collect();
    let rvs =
        clustering::representation_vectors_all(decomp, traffic, params.k, seed, params.max_iters)?;
    let refined = refine_all(&rvs, &catalogs)?;
    let combinations = refined
        .iter()
        .zip(&catalogs)
        .enumerate()
        .map(|(cell, (set, cat))| {
            let cell_traffic = match traffic.cells {
                None => std::borrow::Cow::Borrowed(&traffic.vehicles[..]),
                Some(_) => std::borrow::Cow::Owned(traffic.for_cell(cell as u32)),
            };
            rematch(set, &cell_traffic, params.f, cat)
        })
        .collect::<Result<_>>()?;
    Ok(TrappSelection {
        representation_vectors: rvs,
        refined,
        combinations,
    })
}

/// Combination set per cell for the given strategy.
pub fn select_combinations(
    net: &RoadNetwork,
    decomp: &CellDecomposition,
    traffic: &TrafficFlow,
    strategy: &Strategy,
    seed: u64,
) -> Result<Vec<CombinationSet>> {
    let catalogs = || decomp.cells().iter().map(|c| collect_catalog(net, c));
    match strategy {
        Strategy::All => Ok(catalogs().map(|c| all_combinations(&c)).collect()),
        Strategy::Random(budget) => {
            if let RandomBudget::Matched(b) = budget {
                if b.len() != decomp.cell_count() {
                    return Err(Error::invalid(format!(
                        "{} per-cell budgets for {} cells",
                        b.len(),
                        decomp.cell_count()
                    )));
                }
            }
            Ok(catalogs()
                .enumerate()
                .map(|(i, cat)| {
                    let b = match budget {
                        RandomBudget::PerCell(b) => *b,
                        RandomBudget::Matched(b) => b[i],
                    };
                    random_combinations(&cat, b, seed.wrapping_add(i as u64))
                })
                .collect())
        }
        Strategy::Trapp(params) => {
            Ok(trapp_selection(net, decomp, traffic, params, seed)?.combinations)
        }
    }
}
