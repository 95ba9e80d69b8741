//! Experiment harness: synthetic scenarios, index builds per strategy, query
//! replay against the exact oracle, and the resulting metrics as CSV/JSON.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::combos::{self, RandomBudget, Strategy, TrappParams};
use crate::datagen::{self, QuerySet, RestrictionPalette, TrafficFlow, VehicleCategory};
use crate::error::{Error, Result};
use crate::index::{build_index, IndexMeta, ShortcutIndex};
use crate::model::{path_distance, path_feasible, RoadNetwork};
use crate::oracle::Dijkstra;
use crate::partition::{self, CellDecomposition};
use crate::query::{MatchStats, Planner, QueryStatus};

/// Metric columns that hold wall-clock measurements.
pub const TIMING_COLUMNS: [&str; 4] = [
    "mean_query_time_us",
    "mean_oracle_time_us",
    "speedup",
    "build_time_s",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub vertices: usize,
    pub avg_degree: f64,
    pub cell_size: usize,
    pub k: usize,
    pub f: f64,
    pub max_iters: usize,
    pub queries: usize,
    pub vehicles: usize,
    pub seed: u64,
    #[serde(skip)]
    pub palette: RestrictionPalette,
    #[serde(skip)]
    pub mix: Vec<VehicleCategory>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            vertices: 20_000,
            avg_degree: 4.4,
            cell_size: partition::DEFAULT_CELL_SIZE,
            k: crate::clustering::DEFAULT_K,
            f: combos::DEFAULT_REMATCH_FRACTION,
            max_iters: crate::clustering::DEFAULT_MAX_ITERS,
            queries: 300,
            vehicles: 10_000,
            seed: 1,
            palette: RestrictionPalette::default(),
            mix: datagen::default_mix(),
        }
    }
}

impl ExperimentConfig {
    pub fn trapp_params(&self) -> TrappParams {
        TrappParams {
            k: self.k,
            f: self.f,
            max_iters: self.max_iters,
        }
    }
}

/// Independent generator streams derived from one experiment seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream)
}

/// Network, decomposition, traffic and queries shared by all strategies.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub net: RoadNetwork,
    pub decomp: CellDecomposition,
    pub traffic: TrafficFlow,
    pub queries: QuerySet,
}

impl Scenario {
    pub fn generate(cfg: &ExperimentConfig) -> Result<Self> {
        let base = datagen::gen_network(cfg.vertices, cfg.avg_degree, derive_seed(cfg.seed, 0))?;
        let net = datagen::assign_restrictions(&base, &cfg.palette, derive_seed(cfg.seed, 1))?;
        let decomp = partition::partition(&net, cfg.cell_size, derive_seed(cfg.seed, 2))?;
        let traffic = datagen::gen_traffic(cfg.vehicles, &cfg.mix, derive_seed(cfg.seed, 3))?;
        let queries = datagen::gen_queries(
            &net,
            &decomp,
            &traffic,
            cfg.queries,
            derive_seed(cfg.seed, 4),
        )?;
        Ok(Scenario {
            net,
            decomp,
            traffic,
            queries,
        })
    }
}

/// Strategy as requested on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategySpec {
    All,
    Trapp,
    /// Fixed number of random combinations per cell.
    Random(usize),
    /// Random with each cell's budget set to TRAPP's combination count there.
    RandomMatchTrapp,
}

impl StrategySpec {
    pub fn label(&self) -> String {
        match self {
            StrategySpec::All => "all".into(),
            StrategySpec::Trapp => "trapp".into(),
            StrategySpec::Random(b) => format!("random:{b}"),
            StrategySpec::RandomMatchTrapp => "random-match-trapp".into(),
        }
    }
}

impl std::str::FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(StrategySpec::All),
            "trapp" => Ok(StrategySpec::Trapp),
            "random-match-trapp" | "random" => Ok(StrategySpec::RandomMatchTrapp),
            _ => match s.strip_prefix("random:").map(str::parse) {
                Some(Ok(b)) => Ok(StrategySpec::Random(b)),
                _ => Err(Error::invalid(format!(
                    "unknown strategy {s:?} (all, trapp, random, random:N, random-match-trapp)"
                ))),
            },
        }
    }
}

/// Per-cell combination sets for `spec`.
pub fn strategy_combinations(
    sc: &Scenario,
    cfg: &ExperimentConfig,
    spec: &StrategySpec,
) -> Result<Vec<combos::CombinationSet>> {
    let seed = derive_seed(cfg.seed, 5);
    let strategy = match spec {
        StrategySpec::All => Strategy::All,
        StrategySpec::Trapp => Strategy::Trapp(cfg.trapp_params()),
        StrategySpec::Random(b) => Strategy::Random(RandomBudget::PerCell(*b)),
        StrategySpec::RandomMatchTrapp => {
            let trapp = strategy_combinations(sc, cfg, &StrategySpec::Trapp)?;
            Strategy::Random(RandomBudget::Matched(
                trapp.iter().map(|s| s.len()).collect(),
            ))
        }
    };
    combos::select_combinations(&sc.net, &sc.decomp, &sc.traffic, &strategy, seed)
}

pub fn index_meta(cfg: &ExperimentConfig, spec: &StrategySpec) -> IndexMeta {
    let meta = IndexMeta::new(spec.label(), cfg.seed);
    match spec {
        StrategySpec::Trapp | StrategySpec::RandomMatchTrapp => meta
            .param("k", cfg.k)
            .param("f", cfg.f)
            .param("max_iters", cfg.max_iters),
        _ => meta,
    }
}

pub fn build_strategy_index(
    sc: &Scenario,
    cfg: &ExperimentConfig,
    spec: &StrategySpec,
) -> Result<ShortcutIndex> {
    let sets = strategy_combinations(sc, cfg, spec)?;
    build_index(&sc.net, &sc.decomp, &sets, index_meta(cfg, spec))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub strategy: String,
    pub queries: usize,
    /// Queries for which the oracle finds a path.
    pub solvable: usize,
    pub failures: usize,
    pub no_path: usize,
    pub failure_rate: f64,
    pub optimal_proportion: f64,
    pub mean_error_rate: f64,
    pub max_error_rate: f64,
    /// Returned paths that are infeasible, mis-measured or shorter than the
    /// oracle's. Always zero for a correct engine.
    pub unsound: usize,
    pub shortcuts: usize,
    pub total_entries: usize,
    pub distinct_paths: usize,
    pub total_path_vertices: usize,
    pub match_calls: usize,
    pub mean_scanned_entries: f64,
    pub mean_shortcut_entries: f64,
    pub match_mismatches: usize,
    /// Mean vertices settled per query by the planner and by the oracle.
    pub mean_settled: f64,
    pub mean_oracle_settled: f64,
    pub mean_query_time_us: f64,
    pub mean_oracle_time_us: f64,
    pub speedup: f64,
    pub build_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRecord {
    pub s: u32,
    pub d: u32,
    pub vehicle: [f64; 3],
    pub status: &'static str,
    pub distance: Option<u64>,
    pub oracle_distance: Option<u64>,
    pub scanned_entries: usize,
    pub time_us: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Run every query once untimed before the timed pass.
    pub warmup: bool,
    /// Check every match against an exhaustive scan (done in the warm-up
    /// pass when there is one, so timings are unaffected).
    pub verify_matches: bool,
    /// Timed passes; each query's time is its minimum over the passes, for
    /// the planner and the oracle alike.
    pub repeats: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            warmup: true,
            verify_matches: true,
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub records: Vec<QueryRecord>,
}

fn micros(d: Duration) -> f64 {
    d.as_secs_f64() * 1e6
}

/// Replays `queries` on the index and on the oracle, single-threaded.
pub fn evaluate(
    net: &RoadNetwork,
    decomp: &CellDecomposition,
    index: &ShortcutIndex,
    queries: &QuerySet,
    opts: EvalOptions,
) -> Result<Evaluation> {
    index.check_decomposition(decomp)?;
    let qs = &queries.queries;

    let mut dij = Dijkstra::new(net.vertex_count() as usize);
    if opts.warmup {
        for q in qs {
            dij.shortest_path(net, q.s, q.d, &q.vehicle)?;
        }
    }
    let repeats = opts.repeats.max(1);
    let mut oracle = Vec::with_capacity(qs.len());
    let mut oracle_times = vec![Duration::MAX; qs.len()];
    let mut oracle_settled = 0;
    for rep in 0..repeats {
        for (i, q) in qs.iter().enumerate() {
            let t = Instant::now();
            let p = dij.shortest_path(net, q.s, q.d, &q.vehicle)?;
            oracle_times[i] = oracle_times[i].min(t.elapsed());
            if rep == 0 {
                oracle_settled += dij.settled_count();
                oracle.push(p.map(|p| p.distance()));
            }
        }
    }
    let oracle_time: Duration = oracle_times.iter().sum();

    let planner = Planner::new(net, decomp, index)?;
    let mut ws = planner.workspace();
    let mut mismatches = 0;
    if opts.warmup {
        let checked = planner.clone().with_verification(opts.verify_matches);
        for q in qs {
            mismatches += checked
                .plan_with(&mut ws, q.s, q.d, &q.vehicle)?
                .matching
                .mismatches;
        }
    }
    let timed = planner.with_verification(opts.verify_matches && !opts.warmup);
    let mut times = vec![Duration::MAX; qs.len()];
    for _ in 1..repeats {
        for (i, q) in qs.iter().enumerate() {
            let t = Instant::now();
            timed.plan_with(&mut ws, q.s, q.d, &q.vehicle)?;
            times[i] = times[i].min(t.elapsed());
        }
    }

    let mut m = Metrics {
        strategy: index.meta().strategy.clone(),
        queries: qs.len(),
        solvable: 0,
        failures: 0,
        no_path: 0,
        failure_rate: 0.0,
        optimal_proportion: 0.0,
        mean_error_rate: 0.0,
        max_error_rate: 0.0,
        unsound: 0,
        shortcuts: 0,
        total_entries: 0,
        distinct_paths: 0,
        total_path_vertices: 0,
        match_calls: 0,
        mean_scanned_entries: 0.0,
        mean_shortcut_entries: 0.0,
        match_mismatches: 0,
        mean_settled: 0.0,
        mean_oracle_settled: 0.0,
        mean_query_time_us: 0.0,
        mean_oracle_time_us: 0.0,
        speedup: 0.0,
        build_time_s: 0.0,
    };
    let mut matching = MatchStats::default();
    let mut query_time = Duration::ZERO;
    let mut settled = 0;
    let mut optimal = 0;
    let mut overlay_ok = 0;
    let mut error_sum = 0.0;
    let mut records = Vec::with_capacity(qs.len());
    for (i, (q, &best)) in qs.iter().zip(&oracle).enumerate() {
        let t = Instant::now();
        let r = timed.plan_with(&mut ws, q.s, q.d, &q.vehicle)?;
        let took = times[i].min(t.elapsed());
        query_time += took;
        matching.add(&r.matching);
        settled += r.settled;

        if let Some(p) = &r.path {
            let ok = p.source() == q.s
                && p.target() == q.d
                && path_distance(p.vertices(), net).ok() == Some(p.distance())
                && path_feasible(p.vertices(), &q.vehicle, net).unwrap_or(false)
                && best.is_some_and(|b| p.distance() >= b);
            m.unsound += usize::from(!ok);
        } else if best.is_some() && r.status != QueryStatus::NoPath {
            m.unsound += 1;
        }
        if r.status == QueryStatus::NoPath && best.is_some() {
            m.unsound += 1;
        }
        if best.is_some() {
            m.solvable += 1;
        }
        match r.status {
            QueryStatus::Fallback => m.failures += 1,
            QueryStatus::NoPath => m.no_path += 1,
            QueryStatus::Overlay => {
                if let (Some(d), Some(b)) = (r.distance(), best) {
                    overlay_ok += 1;
                    let delta = if b == 0 {
                        0.0
                    } else {
                        (d - b.min(d)) as f64 / b as f64
                    };
                    error_sum += delta;
                    m.max_error_rate = m.max_error_rate.max(delta);
                    optimal += usize::from(d == b);
                }
            }
        }
        records.push(QueryRecord {
            s: q.s,
            d: q.d,
            vehicle: q.vehicle.as_array(),
            status: r.status.label(),
            distance: r.distance(),
            oracle_distance: best,
            scanned_entries: r.matching.scanned,
            time_us: micros(took),
        });
    }

    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    m.failure_rate = ratio(m.failures, m.solvable);
    m.optimal_proportion = ratio(optimal, m.solvable);
    m.mean_error_rate = if overlay_ok == 0 {
        0.0
    } else {
        error_sum / overlay_ok as f64
    };
    let st = index.storage_stats();
    m.shortcuts = st.shortcuts;
    m.total_entries = st.total_entries;
    m.distinct_paths = st.distinct_paths;
    m.total_path_vertices = st.total_path_vertices;
    m.match_calls = matching.calls;
    m.mean_scanned_entries = ratio(matching.scanned, matching.calls);
    m.mean_shortcut_entries = ratio(matching.available, matching.calls);
    m.match_mismatches = mismatches + matching.mismatches;
    m.mean_settled = ratio(settled, qs.len());
    m.mean_oracle_settled = ratio(oracle_settled, qs.len());
    if !qs.is_empty() {
        m.mean_query_time_us = micros(query_time) / qs.len() as f64;
        m.mean_oracle_time_us = micros(oracle_time) / qs.len() as f64;
        m.speedup = if query_time.is_zero() {
            0.0
        } else {
            oracle_time.as_secs_f64() / query_time.as_secs_f64()
        };
    }
    Ok(Evaluation {
        metrics: m,
        records,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub runs: Vec<Evaluation>,
}

impl Report {
    pub fn rows(&self) -> impl Iterator<Item = &Metrics> {
        self.runs.iter().map(|r| &r.metrics)
    }

    pub fn row(&self, strategy: &str) -> Option<&Metrics> {
        self.rows().find(|m| m.strategy == strategy)
    }
}

/// Builds and evaluates each strategy in turn on one scenario. Indices are
/// dropped after evaluation, so peak memory is one index at a time.
/// `on_index` sees every index before it is dropped.
pub fn compare(
    sc: &Scenario,
    cfg: &ExperimentConfig,
    strategies: &[StrategySpec],
    opts: EvalOptions,
    mut on_index: impl FnMut(&StrategySpec, &ShortcutIndex) -> Result<()>,
) -> Result<Report> {
    if strategies.is_empty() {
        return Err(Error::invalid("no strategies given"));
    }
    let mut runs = Vec::with_capacity(strategies.len());
    for spec in strategies {
        let t = Instant::now();
        let index = build_strategy_index(sc, cfg, spec)?;
        let build = t.elapsed();
        on_index(spec, &index)?;
        let mut ev = evaluate(&sc.net, &sc.decomp, &index, &sc.queries, opts)?;
        ev.metrics.build_time_s = build.as_secs_f64();
        runs.push(ev);
    }
    Ok(Report {
        config: cfg.clone(),
        runs,
    })
}

/// One CSV row per strategy. Timing columns are left out unless requested.
pub fn write_csv<'a, W: Write>(
    w: W,
    rows: impl IntoIterator<Item = &'a Metrics>,
    timings: bool,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header_done = false;
    for m in rows {
        let value = serde_json::to_value(m).map_err(|e| Error::invalid(e.to_string()))?;
        let obj = value.as_object().expect("metrics serialize to an object");
        let keep: Vec<(&String, &serde_json::Value)> = obj
            .iter()
            .filter(|(k, _)| timings || !TIMING_COLUMNS.contains(&k.as_str()))
            .collect();
        if !header_done {
            out.write_record(keep.iter().map(|(k, _)| k.as_str()))
                .map_err(csv_err)?;
            header_done = true;
        }
        out.write_record(keep.iter().map(|(_, v)| match v {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        }))
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("{other:?}")),
    }
}

pub fn write_json<W: Write>(w: W, report: &Report) -> Result<()> {
    serde_json::to_writer_pretty(w, report).map_err(|e| match e.io_error_kind() {
        Some(kind) => Error::Io(std::io::Error::new(kind, e.to_string())),
        None => Error::invalid(e.to_string()),
    })
}

/// FNV-1a over everything written; lets large serialized indices be
/// compared without holding them in memory.
#[derive(Debug, Clone)]
pub struct DigestWriter {
    hash: u64,
    bytes: u64,
}

impl Default for DigestWriter {
    fn default() -> Self {
        DigestWriter {
            hash: 0xcbf2_9ce4_8422_2325,
            bytes: 0,
        }
    }
}

impl DigestWriter {
    pub fn digest(&self) -> (u64, u64) {
        (self.hash, self.bytes)
    }
}

impl Write for DigestWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        for &b in buf {
            self.hash ^= b as u64;
            self.hash = self.hash.wrapping_mul(0x0100_0000_01b3);
        }
        self.bytes += buf.len() as u64;
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

/// Digest and length of the index's text serialization.
pub fn index_digest(index: &ShortcutIndex) -> Result<(u64, u64)> {
    let mut d = std::io::BufWriter::with_capacity(1 << 16, DigestWriter::default());
    index.write_text(&mut d)?;
    let d = d.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(d.digest())
}
