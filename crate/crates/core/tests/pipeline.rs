use trapp_core::bench::{
    build_strategy_index, compare, evaluate, index_digest, write_csv, EvalOptions,
    ExperimentConfig, Scenario, StrategySpec,
};
use trapp_core::datagen::QuerySet;
use trapp_core::fixtures::{rc, sample_decomposition, sample_network, veh};
use trapp_core::index::{build_index, IndexMeta, ShortcutIndex};
use trapp_core::query::{plan, QueryStatus};
use trapp_core::{partition, Error};

fn small() -> ExperimentConfig {
    ExperimentConfig {
        vertices: 1500,
        cell_size: 40,
        queries: 60,
        vehicles: 2000,
        seed: 11,
        ..Default::default()
    }
}

fn quiet() -> EvalOptions {
    EvalOptions {
        warmup: false,
        verify_matches: true,
        repeats: 1,
    }
}

#[test]
fn strategies_share_one_scenario() {
    let cfg = small();
    let sc = Scenario::generate(&cfg).unwrap();
    let report = compare(
        &sc,
        &cfg,
        &[
            StrategySpec::All,
            StrategySpec::Trapp,
            StrategySpec::RandomMatchTrapp,
        ],
        quiet(),
        |_, idx| idx.check_decomposition(&sc.decomp),
    )
    .unwrap();
    let all = report.row("all").unwrap();
    let trapp = report.row("trapp").unwrap();
    let random = report.row("random-match-trapp").unwrap();
    assert!(trapp.total_entries <= all.total_entries);
    assert_eq!(all.failures, 0);
    assert_eq!(all.optimal_proportion, 1.0);
    for m in [all, trapp, random] {
        assert_eq!(m.queries, 60);
        assert_eq!(m.solvable, all.solvable);
        assert_eq!(m.unsound, 0);
        assert_eq!(m.match_mismatches, 0);
        assert!((0.0..=1.0).contains(&m.failure_rate));
        assert!((0.0..=1.0).contains(&m.optimal_proportion));
        assert!(m.mean_error_rate >= 0.0);
        assert!(m.mean_scanned_entries <= m.mean_shortcut_entries);
    }
}

#[test]
fn single_strategy_gives_one_row() {
    let cfg = small();
    let sc = Scenario::generate(&cfg).unwrap();
    let report = compare(&sc, &cfg, &[StrategySpec::Trapp], quiet(), |_, _| Ok(())).unwrap();
    assert_eq!(report.rows().count(), 1);
    assert!(compare(&sc, &cfg, &[], quiet(), |_, _| Ok(())).is_err());
}

#[test]
fn pipeline_is_deterministic() {
    let cfg = small();
    let run = || {
        let sc = Scenario::generate(&cfg).unwrap();
        let mut digests = Vec::new();
        let report = compare(
            &sc,
            &cfg,
            &[StrategySpec::Trapp, StrategySpec::Random(5)],
            quiet(),
            |_, idx| {
                digests.push(index_digest(idx)?);
                Ok(())
            },
        )
        .unwrap();
        let mut csv = Vec::new();
        write_csv(&mut csv, report.rows(), false).unwrap();
        (digests, csv)
    };
    assert_eq!(run(), run());
}

#[test]
fn stored_index_answers_like_the_built_one() {
    let cfg = small();
    let sc = Scenario::generate(&cfg).unwrap();
    let index = build_strategy_index(&sc, &cfg, &StrategySpec::Trapp).unwrap();
    let mut buf = Vec::new();
    index.write_text(&mut buf).unwrap();
    let loaded = ShortcutIndex::read_text(&buf[..]).unwrap();
    let decomp = loaded.decomposition(&sc.net).unwrap();
    for q in &sc.queries.queries {
        let a = plan(&sc.net, &sc.decomp, &index, q.s, q.d, &q.vehicle).unwrap();
        let b = plan(&sc.net, &decomp, &loaded, q.s, q.d, &q.vehicle).unwrap();
        assert_eq!(a.path, b.path);
        assert_eq!(a.status, b.status);
    }
}

#[test]
fn evaluate_rejects_foreign_decomposition() {
    let cfg = small();
    let sc = Scenario::generate(&cfg).unwrap();
    let index = build_strategy_index(&sc, &cfg, &StrategySpec::Random(2)).unwrap();
    let other = partition(&sc.net, 25, 3).unwrap();
    let err = evaluate(&sc.net, &other, &index, &sc.queries, quiet()).unwrap_err();
    assert!(matches!(err, Error::MismatchedIndex(_)), "{err}");
}

#[test]
fn empty_query_set_gives_zero_rates() {
    let cfg = small();
    let sc = Scenario::generate(&cfg).unwrap();
    let index = build_strategy_index(&sc, &cfg, &StrategySpec::Trapp).unwrap();
    let m = evaluate(&sc.net, &sc.decomp, &index, &QuerySet::default(), quiet())
        .unwrap()
        .metrics;
    assert_eq!((m.queries, m.failures, m.match_calls), (0, 0, 0));
    assert_eq!(
        (m.failure_rate, m.optimal_proportion, m.mean_error_rate),
        (0.0, 0.0, 0.0)
    );
}

#[test]
fn sample_routes_through_the_stored_paths() {
    let net = sample_network();
    let decomp = sample_decomposition(&net);
    let sets = vec![
        Default::default(),
        [rc(2.0, 2.0, 15.0), rc(2.5, 2.4, 10.0)]
            .into_iter()
            .collect(),
        Default::default(),
    ];
    let index = build_index(&net, &decomp, &sets, IndexMeta::new("fixture", 0)).unwrap();
    // small van: only the (2.0, 2.0, 15) path fits it and it wins
    let r = plan(&net, &decomp, &index, 8, 9, &veh(1.9, 1.9, 12.0)).unwrap();
    assert_eq!(r.status, QueryStatus::Overlay);
    assert_eq!(r.path.unwrap().vertices(), &[8, 7, 4, 2, 6, 9]);
    // too wide for the first, fits the second
    let r = plan(&net, &decomp, &index, 8, 9, &veh(2.4, 2.3, 9.0)).unwrap();
    assert_eq!(r.status, QueryStatus::Overlay);
    assert_eq!(r.path.unwrap().vertices(), &[8, 7, 4, 1, 2, 6, 9]);
    // heavier than every stored combination: the exact search takes over
    let r = plan(&net, &decomp, &index, 8, 9, &veh(1.5, 1.5, 30.0)).unwrap();
    assert_eq!(r.status, QueryStatus::Fallback);
    assert_eq!(r.path.unwrap().vertices(), &[8, 7, 4, 6, 9]);
}
