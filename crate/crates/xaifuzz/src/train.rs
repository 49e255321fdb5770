//! Seeded training recipes for the two models under test.

use std::path::Path;

use xaifuzz_core::nn::{digit_classifier, driver_regressor, train, Network, NnError, TrainConfig, TrainReport};
use xaifuzz_core::road::{behaviour_cloning_set, generate_road, BcConfig, Road, RoadError, RoadGenConfig, SimConfig};
use xaifuzz_core::rng::stream;

use crate::idx::{DigitSet, IdxError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Data(#[from] IdxError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Road(#[from] RoadError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitRecipe {
    pub init_seed: u64,
    pub train: TrainConfig,
}

impl Default for DigitRecipe {
    fn default() -> Self {
        Self {
            init_seed: 1,
            train: TrainConfig {
                epochs: 12,
                batch_size: 32,
                learning_rate: 0.02,
                momentum: 0.9,
                lr_decay: 0.8,
                seed: 1,
                target_metric: None,
                max_shift: 1,
            },
        }
    }
}

/// Trains the digit classifier on the `train` split of `data_dir` and
/// evaluates it on the `t10k` split.
pub fn train_digit(data_dir: &Path, recipe: &DigitRecipe) -> Result<(Network, TrainReport), TrainError> {
    let train_set = DigitSet::load_split(data_dir, "train")?.samples();
    let test_set = DigitSet::load_split(data_dir, "t10k")?.samples();
    let net = digit_classifier(&mut stream(recipe.init_seed, 0))?;
    Ok(train(net, &train_set, &test_set, &recipe.train)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverRecipe {
    /// Roads driven by the expert for training and held-out evaluation.
    pub train_roads: u64,
    pub test_roads: u64,
    /// Road generator seed. Training roads take the first streams, test
    /// roads the ones after them.
    pub road_seed: u64,
    pub init_seed: u64,
    pub bc: BcConfig,
    pub train: TrainConfig,
}

impl Default for DriverRecipe {
    fn default() -> Self {
        Self {
            train_roads: 60,
            test_roads: 10,
            road_seed: 1000,
            init_seed: 4,
            bc: BcConfig::default(),
            train: TrainConfig {
                epochs: 6,
                batch_size: 32,
                learning_rate: 0.01,
                momentum: 0.9,
                lr_decay: 0.85,
                seed: 5,
                target_metric: None,
                max_shift: 0,
            },
        }
    }
}

fn roads(seed: u64, ids: std::ops::Range<u64>) -> Result<Vec<Road>, RoadError> {
    let cfg = RoadGenConfig::default();
    ids.map(|i| generate_road(&mut stream(seed, i), &cfg)).collect()
}

/// Behaviour cloning of the pure-pursuit expert on generated roads.
pub fn train_driver(recipe: &DriverRecipe) -> Result<(Network, TrainReport), TrainError> {
    let sim = SimConfig::default();
    let n = recipe.train_roads;
    let train_roads = roads(recipe.road_seed, 0..n)?;
    let test_roads = roads(recipe.road_seed, n..n + recipe.test_roads)?;
    let train_set = behaviour_cloning_set(&train_roads, &sim, &recipe.bc, &mut stream(recipe.init_seed, 1))?;
    let test_set = behaviour_cloning_set(&test_roads, &sim, &recipe.bc, &mut stream(recipe.init_seed, 2))?;
    let net = driver_regressor(&mut stream(recipe.init_seed, 0))?;
    Ok(train(net, &train_set, &test_set, &recipe.train)?)
}
