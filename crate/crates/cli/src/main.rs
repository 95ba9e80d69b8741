//! `trapp`: generate synthetic inputs, build shortcut indices, answer
//! queries and run strategy comparisons.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use trapp_core::bench::{self, EvalOptions, ExperimentConfig, Scenario, StrategySpec};
use trapp_core::combos::{self, RandomBudget, Strategy, TrappParams};
use trapp_core::datagen::{self, RestrictionPalette, TrafficFlow};
use trapp_core::index::{build_index, IndexMeta, ShortcutIndex};
use trapp_core::oracle::restricted_dijkstra;
use trapp_core::query::Planner;
use trapp_core::{partition, CellDecomposition, Error, RoadNetwork, Vehicle, VertexId};

#[derive(Parser)]
#[command(
    name = "trapp",
    version,
    about = "Restriction-aware route planning on partitioned road networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a road network with height/width/weight limits.
    GenGraph(GenGraph),
    /// Sample a traffic flow from the default vehicle mix.
    GenTraffic(GenTraffic),
    /// Generate cross-cell queries for a partitioned network.
    GenQueries(GenQueries),
    /// Partition a network into cells.
    Partition(PartitionCmd),
    /// Build a shortcut index.
    Build(Build),
    /// Answer one query with a stored index.
    Query(QueryCmd),
    /// Compare strategies on a synthetic scenario.
    Bench(BenchCmd),
}

#[derive(Args)]
struct Output {
    /// Output file (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl Output {
    fn open(&self) -> Result<Box<dyn Write>, Error> {
        Ok(match &self.output {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Args)]
struct GenGraph {
    #[arg(long, default_value_t = 20_000)]
    vertices: usize,
    #[arg(long, default_value_t = 4.4)]
    avg_degree: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Palette file (`he <fraction> <v1> ...` per type).
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Restricted-edge fractions `he,wi,wt`, overriding the palette's.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    fractions: Option<Vec<f64>>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct GenTraffic {
    #[arg(long, default_value_t = 10_000)]
    vehicles: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct GenQueries {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    partition: PathBuf,
    #[arg(long)]
    traffic: PathBuf,
    #[arg(short = 'n', long, default_value_t = 300)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct PartitionCmd {
    #[arg(long)]
    graph: PathBuf,
    /// Target cell size in vertices.
    #[arg(long, default_value_t = partition::DEFAULT_CELL_SIZE)]
    target: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    All,
    Random,
    Trapp,
}

#[derive(Args)]
struct Build {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    partition: PathBuf,
    /// Traffic file; required for trapp and for random without a budget.
    #[arg(long)]
    traffic: Option<PathBuf>,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = trapp_core::clustering::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = combos::DEFAULT_REMATCH_FRACTION)]
    f: f64,
    #[arg(long, default_value_t = trapp_core::clustering::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Combinations per cell for random; defaults to TRAPP's count per cell.
    #[arg(long)]
    random_budget: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write the selected combinations (`cell_id he wi wt`).
    #[arg(long)]
    combos: Option<PathBuf>,
    /// Also write the representation vectors (`cell_id he wi wt`); needs traffic.
    #[arg(long)]
    rvs: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct QueryCmd {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    s: VertexId,
    d: VertexId,
    he: f64,
    wi: f64,
    wt: f64,
    /// Also run the exact search and report its distance.
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct BenchCmd {
    /// Comma-separated: all, trapp, random, random:N.
    #[arg(long, value_delimiter = ',', default_value = "all,trapp,random")]
    strategies: Vec<String>,
    #[arg(long, default_value_t = 20_000)]
    vertices: usize,
    #[arg(long, default_value_t = 4.4)]
    avg_degree: f64,
    #[arg(long, default_value_t = partition::DEFAULT_CELL_SIZE)]
    cell_size: usize,
    #[arg(long, default_value_t = trapp_core::clustering::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = combos::DEFAULT_REMATCH_FRACTION)]
    f: f64,
    #[arg(long, default_value_t = 300)]
    queries: usize,
    #[arg(long, default_value_t = 10_000)]
    vehicles: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Timed passes per query (minimum is kept).
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Leave wall-clock columns out of the CSV.
    #[arg(long)]
    no_timings: bool,
    /// Metrics CSV (stdout if omitted).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Full report with per-query records.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn open(path: &FsPath) -> Result<BufReader<File>, Error> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &FsPath) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_graph(path: &FsPath) -> Result<RoadNetwork, Error> {
    RoadNetwork::read_text(open(path)?)
}

fn read_palette(path: Option<&PathBuf>) -> Result<RestrictionPalette, Error> {
    match path {
        Some(p) => RestrictionPalette::read_text(open(p)?),
        None => Ok(RestrictionPalette::default()),
    }
}

fn gen_graph(a: &GenGraph) -> Result<(), Error> {
    let mut palette = read_palette(a.palette.as_ref())?;
    if let Some(fr) = &a.fractions {
        palette.fractions = [fr[0], fr[1], fr[2]];
    }
    let base = datagen::gen_network(a.vertices, a.avg_degree, bench::derive_seed(a.seed, 0))?;
    let net = datagen::assign_restrictions(&base, &palette, bench::derive_seed(a.seed, 1))?;
    net.write_text(a.out.open()?)
}

fn gen_traffic(a: &GenTraffic) -> Result<(), Error> {
    let flow = datagen::gen_traffic(a.vehicles, &datagen::default_mix(), a.seed)?;
    flow.write_text(a.out.open()?)
}

fn gen_queries(a: &GenQueries) -> Result<(), Error> {
    let net = read_graph(&a.graph)?;
    let decomp = CellDecomposition::read_text(&net, open(&a.partition)?)?;
    let traffic = TrafficFlow::read_text(open(&a.traffic)?)?;
    datagen::gen_queries(&net, &decomp, &traffic, a.count, a.seed)?.write_text(a.out.open()?)
}

fn run_partition(a: &PartitionCmd) -> Result<(), Error> {
    let net = read_graph(&a.graph)?;
    let decomp = partition(&net, a.target, a.seed)?;
    eprintln!(
        "{} cells, {} boundary vertices, {} inter-cell edges",
        decomp.cell_count(),
        decomp.boundary_vertex_count(),
        decomp.inter_cell_edges().len()
    );
    decomp.write_text(a.out.open()?)
}

fn build(a: &Build) -> Result<(), Error> {
    let net = read_graph(&a.graph)?;
    let decomp = CellDecomposition::read_text(&net, open(&a.partition)?)?;
    let params = TrappParams {
        k: a.k,
        f: a.f,
        max_iters: a.max_iters,
    };
    let traffic = || -> Result<TrafficFlow, Error> {
        let p = a
            .traffic
            .as_ref()
            .ok_or_else(|| Error::InvalidParam("--traffic is required for this strategy".into()))?;
        TrafficFlow::read_text(open(p)?)
    };
    let none = TrafficFlow::default();
    let (strategy, flow, label) = match (a.strategy, a.random_budget) {
        (StrategyArg::All, _) => (Strategy::All, none, "all".to_string()),
        (StrategyArg::Trapp, _) => (
            Strategy::Trapp(params.clone()),
            traffic()?,
            "trapp".to_string(),
        ),
        (StrategyArg::Random, Some(b)) => (
            Strategy::Random(RandomBudget::PerCell(b)),
            none,
            StrategySpec::Random(b).label(),
        ),
        (StrategyArg::Random, None) => {
            let flow = traffic()?;
            let trapp = combos::select_combinations(
                &net,
                &decomp,
                &flow,
                &Strategy::Trapp(params.clone()),
                a.seed,
            )?;
            let sizes = trapp.iter().map(|s| s.len()).collect();
            (
                Strategy::Random(RandomBudget::Matched(sizes)),
                flow,
                StrategySpec::RandomMatchTrapp.label(),
            )
        }
    };
    let sets = combos::select_combinations(&net, &decomp, &flow, &strategy, a.seed)?;
    if let Some(p) = &a.rvs {
        let flow = if flow.is_empty() { traffic()? } else { flow };
        let sel = combos::trapp_selection(&net, &decomp, &flow, &params, a.seed)?;
        let triples: Vec<Vec<[f64; 3]>> = sel
            .representation_vectors
            .iter()
            .map(|list| list.iter().map(|rv| rv.as_array()).collect())
            .collect();
        datagen::write_cell_triples(create(p)?, &triples)?;
    }
    if let Some(p) = &a.combos {
        let triples: Vec<Vec<[f64; 3]>> = sets
            .iter()
            .map(|s| s.iter().map(|rc| rc.as_array()).collect())
            .collect();
        datagen::write_cell_triples(create(p)?, &triples)?;
    }
    let mut meta = IndexMeta::new(label, a.seed);
    if !matches!(
        strategy,
        Strategy::All | Strategy::Random(RandomBudget::PerCell(_))
    ) {
        meta = meta
            .param("k", a.k)
            .param("f", a.f)
            .param("max_iters", a.max_iters);
    }
    let index = build_index(&net, &decomp, &sets, meta)?;
    let st = index.storage_stats();
    eprintln!(
        "{} shortcuts, {} entries, {} distinct paths",
        st.shortcuts, st.total_entries, st.distinct_paths
    );
    index.write_text(a.out.open()?)
}

fn query(a: &QueryCmd) -> Result<(), Error> {
    let net = read_graph(&a.graph)?;
    let index = ShortcutIndex::read_text(open(&a.index)?)?;
    let decomp = index.decomposition(&net)?;
    let vehicle = Vehicle::new(a.he, a.wi, a.wt)?;
    let res = Planner::new(&net, &decomp, &index)?.plan(a.s, a.d, &vehicle)?;
    let mut out = io::stdout().lock();
    match res.distance() {
        Some(d) => writeln!(out, "distance {d}")?,
        None => writeln!(out, "distance none")?,
    }
    writeln!(out, "status {}", res.status.label())?;
    if let Some(p) = &res.path {
        let seq: Vec<String> = p.vertices().iter().map(|v| v.to_string()).collect();
        writeln!(out, "path {}", seq.join(" "))?;
    }
    if a.exact {
        match restricted_dijkstra(&net, a.s, a.d, &vehicle)? {
            Some(p) => writeln!(out, "exact {}", p.distance())?,
            None => writeln!(out, "exact none")?,
        }
    }
    Ok(())
}

fn run_bench(a: &BenchCmd) -> Result<(), Error> {
    let strategies = a
        .strategies
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<StrategySpec>, _>>()?;
    if a.repeats == 0 {
        return Err(Error::InvalidParam("--repeats must be at least 1".into()));
    }
    let cfg = ExperimentConfig {
        vertices: a.vertices,
        avg_degree: a.avg_degree,
        cell_size: a.cell_size,
        k: a.k,
        f: a.f,
        queries: a.queries,
        vehicles: a.vehicles,
        seed: a.seed,
        palette: read_palette(a.palette.as_ref())?,
        ..Default::default()
    };
    let sc = Scenario::generate(&cfg)?;
    let opts = EvalOptions {
        repeats: a.repeats,
        ..Default::default()
    };
    let report = bench::compare(&sc, &cfg, &strategies, opts, |spec, _| {
        eprintln!("built {}", spec.label());
        Ok(())
    })?;
    match &a.csv {
        Some(p) => bench::write_csv(create(p)?, report.rows(), !a.no_timings)?,
        None => bench::write_csv(io::stdout().lock(), report.rows(), !a.no_timings)?,
    }
    if let Some(p) = &a.json {
        let mut w = create(p)?;
        bench::write_json(&mut w, &report)?;
        w.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::GenGraph(a) => gen_graph(a),
        Command::GenTraffic(a) => gen_traffic(a),
        Command::GenQueries(a) => gen_queries(a),
        Command::Partition(a) => run_partition(a),
        Command::Build(a) => build(a),
        Command::Query(a) => query(a),
        Command::Bench(a) => run_bench(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
