//! Data preparation and training shared by `train`, `experiment` and tests.

use crate::data::{
    ingest_csv, split, two_moons, CsvSchema, Dataset, SplitSpec, Splits, Standardizer,
};
use crate::error::Result;
use crate::eval::error_rate;
use crate::ict::{train_with_observer, IctConfig, IctModel, TrainData, TrainOutcome, TrainState};

use super::config::RunOptions;

#[derive(Debug, Clone)]
pub struct PreparedData {
    /// The full dataset before splitting.
    pub source: Dataset,
    pub splits: Splits,
}

/// Generates or reads the dataset and splits it. `seed` is used unless
/// `opts.data_seed` is set.
pub fn prepare_data(opts: &RunOptions, seed: u64) -> Result<PreparedData> {
    let data_seed = opts.data_seed.unwrap_or(seed);
    let source = match &opts.data {
        Some(path) => ingest_csv(
            path,
            &CsvSchema {
                require_labels: true,
                class_count: None,
            },
        )?,
        None => two_moons(opts.n, opts.noise, data_seed)?,
    };
    let spec = SplitSpec {
        labels_per_class: opts.labels_per_class,
        unlabeled_count: opts.unlabeled_count,
        validation_count: opts.validation_count,
        test_count: opts.test_count,
        include_labeled_in_unlabeled: opts.include_labeled_in_unlabeled,
        seed: data_seed,
    };
    let mut splits = split(&source, &spec)?;
    if opts.standardize {
        let st = Standardizer::fit(&splits.unlabeled);
        splits.labeled = st.apply(&splits.labeled)?;
        splits.unlabeled = st.apply(&splits.unlabeled)?;
        splits.validation = splits
            .validation
            .as_ref()
            .map(|d| st.apply(d))
            .transpose()?;
        splits.test = splits.test.as_ref().map(|d| st.apply(d)).transpose()?;
    }
    Ok(PreparedData { source, splits })
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: TrainOutcome,
    /// Test error of the final evaluation network.
    pub final_test_error: Option<f64>,
    /// Test error of the best-validation network.
    pub selected_test_error: Option<f64>,
}

pub fn run_training<F>(config: &IctConfig, data: &PreparedData, observer: F) -> Result<RunResult>
where
    F: FnMut(&TrainState, &IctModel) -> Result<()>,
{
    let s = &data.splits;
    let outcome = train_with_observer(
        config,
        TrainData {
            labeled: &s.labeled,
            unlabeled: &s.unlabeled,
            validation: s.validation.as_ref(),
        },
        observer,
    )?;
    let (final_test_error, selected_test_error) = match &s.test {
        Some(test) => (
            Some(error_rate(outcome.final_network(), test)?),
            Some(error_rate(outcome.selected_network(), test)?),
        ),
        None => (None, None),
    };
    Ok(RunResult {
        outcome,
        final_test_error,
        selected_test_error,
    })
}
