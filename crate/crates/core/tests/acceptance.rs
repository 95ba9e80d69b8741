//! Acceptance suite A1-A8 on the default synthetic configuration.
//!
//! Runs sequentially in one process so that only one index is alive at a
//! time, prints one PASS/FAIL line per criterion and exits non-zero if any
//! criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trapp_core::bench::{
    compare, index_digest, write_csv, EvalOptions, ExperimentConfig, Metrics, Scenario,
    StrategySpec,
};
use trapp_core::clustering::{kmeans, representation_vector};
use trapp_core::index::{audit_index, ShortcutIndex};
use trapp_core::oracle::{restricted_dijkstra, Dijkstra};
use trapp_core::{
    dominates, path_feasible, Actor, CellDecomposition, Edge, RestrictionTriple, RoadNetwork,
    Vehicle, VertexId,
};

const SEEDS: [u64; 3] = [1, 2, 3];

fn strategies() -> Vec<StrategySpec> {
    vec![
        StrategySpec::All,
        StrategySpec::Trapp,
        StrategySpec::RandomMatchTrapp,
    ]
}

struct Verdict {
    ok: bool,
    detail: String,
}

impl Verdict {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Verdict {
            ok,
            detail: detail.into(),
        }
    }
}

#[derive(Default)]
struct InvariantCounts {
    domination_checks: usize,
    domination_violations: usize,
    coverage_checks: usize,
    coverage_violations: usize,
    monotonicity_violations: usize,
    bad_entries: usize,
    entries: usize,
}

/// Per-seed results collected while each index is alive.
#[derive(Default)]
struct SeedRun {
    rows: BTreeMap<String, Metrics>,
    digests: BTreeMap<String, (u64, u64)>,
    csv: Vec<u8>,
    lossless_checked: usize,
    lossless_violations: usize,
    all_distinct_paths: usize,
    all_total_entries: usize,
}

/// Stored paths stay feasible for every vehicle their combination dominates.
fn domination_transfer(
    net: &RoadNetwork,
    idx: &ShortcutIndex,
    sample: &[Vehicle],
    c: &mut InvariantCounts,
) {
    for cs in idx.cells() {
        for sc in cs.shortcuts() {
            for e in sc.entries() {
                let mut seq = None;
                for v in sample {
                    if !dominates(v, e.rc()) {
                        continue;
                    }
                    let seq = seq.get_or_insert_with(|| cs.resolve(e).expect("resolvable"));
                    c.domination_checks += 1;
                    if !path_feasible(seq, v, net).unwrap_or(false) {
                        c.domination_violations += 1;
                    }
                }
            }
        }
    }
}

/// Paths computed under a cluster's representation vector are feasible for
/// every member of the cluster.
fn cluster_coverage(sc: &Scenario, cfg: &ExperimentConfig, c: &mut InvariantCounts) {
    let clusters = kmeans(&sc.traffic.vehicles, cfg.k, cfg.seed, cfg.max_iters).expect("kmeans");
    let mut dij = Dijkstra::new(sc.net.vertex_count() as usize);
    for cluster in &clusters {
        let rv = representation_vector(cluster).as_triple();
        for cell in sc.decomp.cells() {
            let b = sc.decomp.boundary_vertices(cell.id).unwrap();
            if b.len() < 2 {
                continue;
            }
            let (u, v) = (b[0], b[b.len() - 1]);
            let Some(p) = dij
                .shortest_path_in_cell(&sc.net, &sc.decomp, cell.id, u, v, &rv)
                .unwrap()
            else {
                continue;
            };
            for m in cluster.members() {
                c.coverage_checks += 1;
                if !dominates(m, &rv) || !path_feasible(p.vertices(), m, &sc.net).unwrap() {
                    c.coverage_violations += 1;
                }
            }
        }
    }
}

/// Every pooled entry resolves to exactly the sequence an unpooled
/// within-cell search produces for its (src, dst, rc).
fn lossless(net: &RoadNetwork, decomp: &CellDecomposition, idx: &ShortcutIndex) -> (usize, usize) {
    let mut dij = Dijkstra::new(net.vertex_count() as usize);
    let (mut checked, mut bad) = (0, 0);
    for cs in idx.cells() {
        for sc in cs.shortcuts() {
            for e in sc.entries() {
                checked += 1;
                let want = dij
                    .shortest_path_in_cell(net, decomp, cs.cell, sc.src, sc.dst, e.rc())
                    .unwrap()
                    .map(|p| p.into_vertices());
                if want.as_deref() != Some(&cs.resolve(e).unwrap()[..]) {
                    bad += 1;
                }
            }
        }
    }
    (checked, bad)
}

fn run_seed(seed: u64, invariants: Option<&mut InvariantCounts>, extra_checks: bool) -> SeedRun {
    let cfg = ExperimentConfig {
        seed,
        ..Default::default()
    };
    let sc = Scenario::generate(&cfg).expect("scenario");
    let sample: Vec<Vehicle> = sc.traffic.vehicles.iter().step_by(500).copied().collect();
    let mut out = SeedRun::default();
    let mut invariants = invariants;
    if let Some(c) = invariants.as_deref_mut() {
        cluster_coverage(&sc, &cfg, c);
    }
    let opts = EvalOptions {
        warmup: true,
        verify_matches: true,
        repeats: 3,
    };
    let report = compare(&sc, &cfg, &strategies(), opts, |spec, idx| {
        out.digests.insert(spec.label(), index_digest(idx)?);
        if let Some(c) = invariants.as_deref_mut() {
            let audit = audit_index(&sc.net, idx)?;
            c.entries += audit.entries;
            c.bad_entries += audit.bad_entries;
            c.monotonicity_violations += audit.monotonicity_violations;
            domination_transfer(&sc.net, idx, &sample, c);
        }
        if extra_checks && *spec == StrategySpec::All {
            let st = idx.storage_stats();
            out.all_distinct_paths = st.distinct_paths;
            out.all_total_entries = st.total_entries;
            let (checked, bad) = lossless(&sc.net, &sc.decomp, idx);
            out.lossless_checked = checked;
            out.lossless_violations = bad;
        }
        Ok(())
    })
    .expect("compare");
    write_csv(&mut out.csv, report.rows(), false).expect("csv");
    for m in report.rows() {
        out.rows.insert(m.strategy.clone(), m.clone());
    }
    out
}

/// Minimum feasible distance by enumerating every simple path.
fn brute_force(net: &RoadNetwork, s: VertexId, d: VertexId, actor: &dyn Actor) -> Option<u64> {
    fn go(
        net: &RoadNetwork,
        u: VertexId,
        d: VertexId,
        actor: &dyn Actor,
        seen: &mut Vec<bool>,
        acc: u64,
        best: &mut Option<u64>,
    ) {
        if u == d {
            *best = Some(best.map_or(acc, |b| b.min(acc)));
            return;
        }
        for a in net.arcs(u) {
            let e = net.edge(a.edge);
            if seen[a.head as usize] || !trapp_core::edge_feasible(&e.limits, actor) {
                continue;
            }
            seen[a.head as usize] = true;
            go(net, a.head, d, actor, seen, acc + e.length as u64, best);
            seen[a.head as usize] = false;
        }
    }
    let mut seen = vec![false; net.vertex_count() as usize];
    seen[s as usize] = true;
    let mut best = None;
    go(net, s, d, actor, &mut seen, 0, &mut best);
    best
}

fn a2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA2);
    let values = [1.8, 2.0, 2.5, 3.0, f64::INFINITY];
    let pick = |rng: &mut ChaCha8Rng| values[rng.random_range(0..values.len())];
    let (mut graphs, mut queries, mut mismatches) = (0, 0, 0);
    while graphs < 1200 {
        let n = rng.random_range(2..=12u32);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < 0.35 {
                    edges.push(Edge {
                        u,
                        v,
                        length: rng.random_range(1..=20),
                        limits: RestrictionTriple::new(
                            pick(&mut rng),
                            pick(&mut rng),
                            pick(&mut rng),
                        )
                        .unwrap(),
                    });
                }
            }
        }
        let net = RoadNetwork::new(n, edges).unwrap();
        graphs += 1;
        for _ in 0..5 {
            let (s, d) = (rng.random_range(0..n), rng.random_range(0..n));
            let veh = Vehicle::new(
                rng.random_range(1.0..3.2),
                rng.random_range(1.5..3.2),
                rng.random_range(1.0..3.2),
            )
            .unwrap();
            let rc =
                RestrictionTriple::new(pick(&mut rng), pick(&mut rng), pick(&mut rng)).unwrap();
            for actor in [&veh as &dyn Actor, &rc as &dyn Actor] {
                queries += 1;
                let got = restricted_dijkstra(&net, s, d, actor)
                    .unwrap()
                    .map(|p| p.distance());
                if got != brute_force(&net, s, d, actor) {
                    mismatches += 1;
                }
            }
        }
    }
    Verdict::new(
        mismatches == 0,
        format!("{graphs} graphs, {queries} queries, {mismatches} mismatches vs simple-path enumeration"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut verdicts: Vec<(&str, Verdict)> = Vec::new();
    let mut invariants = InvariantCounts::default();
    let mut runs = Vec::new();
    for &seed in &SEEDS {
        let t = Instant::now();
        runs.push(run_seed(seed, Some(&mut invariants), true));
        eprintln!("seed {seed} done in {:.1?}", t.elapsed());
    }
    let row = |r: &SeedRun, s: &str| r.rows.get(s).cloned().expect("row present");

    // A1
    let mut ok = true;
    let mut parts = Vec::new();
    for (seed, r) in SEEDS.iter().zip(&runs) {
        let all = row(r, "all");
        let exact = all.failures == 0
            && all.failure_rate == 0.0
            && all.optimal_proportion == 1.0
            && all.mean_error_rate == 0.0
            && all.unsound == 0;
        ok &= exact;
        parts.push(format!(
            "seed {seed}: {}/{} solvable optimal, failures {}",
            (all.optimal_proportion * all.solvable as f64).round(),
            all.solvable,
            all.failures
        ));
    }
    verdicts.push((
        "A1 all-strategy exactness",
        Verdict::new(ok, parts.join("; ")),
    ));

    // A2
    let t = Instant::now();
    let v = a2();
    verdicts.push((
        "A2 oracle correctness",
        Verdict::new(v.ok, format!("{} in {:.1?}", v.detail, t.elapsed())),
    ));

    // A3
    let l = &invariants;
    verdicts.push((
        "A3 invariant suites",
        Verdict::new(
            l.domination_violations == 0 && l.coverage_violations == 0 && l.monotonicity_violations == 0 && l.bad_entries == 0,
            format!(
                "domination transfer {}/{} violations, cluster coverage {}/{} violations, monotonicity {} violations over {} entries, {} malformed entries",
                l.domination_violations, l.domination_checks, l.coverage_violations, l.coverage_checks, l.monotonicity_violations, l.entries, l.bad_entries
            ),
        ),
    ));

    // A4
    let mut ok = true;
    let mut parts = Vec::new();
    for (seed, r) in SEEDS.iter().zip(&runs) {
        for m in r.rows.values() {
            let pass =
                m.match_mismatches == 0 && m.mean_scanned_entries <= 0.8 * m.mean_shortcut_entries;
            ok &= pass;
            parts.push(format!(
                "seed {seed} {}: {} calls, {} mismatches, scanned {:.2} of {:.2}",
                m.strategy,
                m.match_calls,
                m.match_mismatches,
                m.mean_scanned_entries,
                m.mean_shortcut_entries
            ));
        }
    }
    verdicts.push(("A4 presorted matching", Verdict::new(ok, parts.join("; "))));

    // A5
    let mut ok = true;
    let mut parts = Vec::new();
    for (seed, r) in SEEDS.iter().zip(&runs) {
        let (all, trapp, random) = (row(r, "all"), row(r, "trapp"), row(r, "random-match-trapp"));
        let share = trapp.total_entries as f64 / all.total_entries as f64;
        let pass = share <= 0.10
            && trapp.failure_rate <= 0.05
            && trapp.mean_error_rate <= 0.05
            && trapp.optimal_proportion >= 0.70
            && trapp.optimal_proportion >= random.optimal_proportion;
        ok &= pass;
        parts.push(format!(
            "seed {seed}: entries {:.1}% of all, failure {:.3}, delta {:.4}, optimal {:.3} vs random {:.3}",
            share * 100.0,
            trapp.failure_rate,
            trapp.mean_error_rate,
            trapp.optimal_proportion,
            random.optimal_proportion
        ));
    }
    verdicts.push(("A5 storage and quality", Verdict::new(ok, parts.join("; "))));

    // A6
    let mut ok = true;
    let mut parts = Vec::new();
    for (seed, r) in SEEDS.iter().zip(&runs) {
        let ratio = r.all_distinct_paths as f64 / r.all_total_entries as f64;
        ok &=
            ratio <= 0.6 && r.lossless_violations == 0 && r.lossless_checked == r.all_total_entries;
        parts.push(format!(
            "seed {seed}: {} paths for {} entries ({:.1}%), {} of {} entries differ from unpooled",
            r.all_distinct_paths,
            r.all_total_entries,
            ratio * 100.0,
            r.lossless_violations,
            r.lossless_checked
        ));
    }
    verdicts.push(("A6 path merger", Verdict::new(ok, parts.join("; "))));

    // A7
    let mut ok = true;
    let mut parts = Vec::new();
    for (seed, r) in SEEDS.iter().zip(&runs) {
        let t = row(r, "trapp");
        let ratio = t.mean_query_time_us / t.mean_oracle_time_us;
        ok &= ratio <= 0.2;
        parts.push(format!(
            "seed {seed}: {:.1}us vs oracle {:.1}us (ratio {:.3}, {:.1}x)",
            t.mean_query_time_us, t.mean_oracle_time_us, ratio, t.speedup
        ));
    }
    verdicts.push(("A7 query speed", Verdict::new(ok, parts.join("; "))));

    // A8: rerun seed 1 from scratch
    let again = run_seed(SEEDS[0], None, false);
    let first = &runs[0];
    let same_index = first.digests == again.digests;
    let same_csv = first.csv == again.csv;
    verdicts.push((
        "A8 determinism",
        Verdict::new(
            same_index && same_csv,
            format!(
                "index files identical: {same_index} ({} strategies, {} bytes total); metric csv identical: {same_csv}",
                first.digests.len(),
                first.digests.values().map(|d| d.1).sum::<u64>()
            ),
        ),
    ));

    let mut failed = 0;
    for (name, v) in &verdicts {
        println!(
            "{} {name}: {}",
            if v.ok { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.ok);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1?}",
        verdicts.len() - failed,
        start.elapsed()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
