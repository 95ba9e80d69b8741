//! Shared setup for the criterion benches.

use trapp_core::bench::{build_strategy_index, ExperimentConfig, Scenario, StrategySpec};
use trapp_core::index::ShortcutIndex;

/// Default configuration scaled down so a bench run stays short.
pub fn config(vertices: usize) -> ExperimentConfig {
    ExperimentConfig {
        vertices,
        queries: 100,
        vehicles: 5_000,
        ..Default::default()
    }
}

/// Scenario plus its TRAPP and All indices.
pub struct Fixture {
    pub cfg: ExperimentConfig,
    pub scenario: Scenario,
    pub trapp: ShortcutIndex,
    pub all: ShortcutIndex,
}

impl Fixture {
    pub fn new(vertices: usize) -> Self {
        let cfg = config(vertices);
        let scenario = Scenario::generate(&cfg).expect("scenario");
        let trapp =
            build_strategy_index(&scenario, &cfg, &StrategySpec::Trapp).expect("trapp index");
        let all = build_strategy_index(&scenario, &cfg, &StrategySpec::All).expect("all index");
        Fixture {
            cfg,
            scenario,
            trapp,
            all,
        }
    }
}
