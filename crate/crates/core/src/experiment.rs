//! Blocked paired comparison: each strategy run is paired with a freshly
//! executed baseline run in the same block, orders counterbalanced, and
//! inference happens on the within-pair differences. Preprocessing is
//! re-executed and re-timed inside every run, matching the measurement
//! boundary of the workflow.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PreprocessConfig, RawRecord};
use crate::meter::{MeterConfig, RunMeasurement};
use crate::stats::{DeltaSeries, Metric};
use crate::strategy::{
    run_workflow, ExecuteOptions, StrategyLabel, StrategyPlan, WorkflowError, WorkflowManifest,
    WorkflowResult,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("block must contain at least one pair")]
    EmptyBlock,
    #[error("baseline mean of {0} is zero; relative savings undefined")]
    ZeroBaselineMean(&'static str),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error("failed to persist partial results: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairOrder {
    BaselineFirst,
    StrategyFirst,
}

/// One paired repetition: both runs, their order, and compact manifests for
/// equivalence checking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub index: usize,
    pub order: PairOrder,
    pub baseline: RunMeasurement,
    pub strategy: RunMeasurement,
    pub baseline_manifest: WorkflowManifest,
    pub strategy_manifest: WorkflowManifest,
}

/// A complete block of paired runs for one strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedBlock {
    pub strategy_label: StrategyLabel,
    pub pairs: Vec<PairRecord>,
    pub n: usize,
    pub seed: u64,
}

/// Block plus the final pair's full results, kept for output-equivalence
/// checks at the common K.
pub struct BlockOutcome {
    pub block: PairedBlock,
    pub final_baseline: WorkflowResult,
    pub final_strategy: WorkflowResult,
}

/// Run `n` paired repetitions of `plan` against `baseline_plan`.
///
/// Pair `i` (1-indexed) runs baseline-first when `i` is odd, strategy-first
/// otherwise — strict alternation starting baseline-first. Each run is a
/// full metered workflow on the same records, preprocessing included. When
/// `partial_dir` is given, every completed pair is written there
/// immediately, so an aborted block leaves its finished pairs on disk.
#[allow(clippy::too_many_arguments)]
pub fn run_block(
    plan: &StrategyPlan,
    baseline_plan: &StrategyPlan,
    n: usize,
    records: &[RawRecord],
    pre_config: &PreprocessConfig,
    opts: &ExecuteOptions,
    meter_config: &MeterConfig,
    partial_dir: Option<&Path>,
) -> Result<BlockOutcome, ExperimentError> {
    if n < 1 {
        return Err(ExperimentError::EmptyBlock);
    }
    let mut pairs = Vec::with_capacity(n);
    let mut last: Option<(WorkflowResult, WorkflowResult)> = None;
    for i in 1..=n {
        let order = if i % 2 == 1 {
            PairOrder::BaselineFirst
        } else {
            PairOrder::StrategyFirst
        };
        let run =
            |p: &StrategyPlan| run_workflow(p, records, pre_config, opts, meter_config.clone());
        let (baseline_result, strategy_result) = match order {
            PairOrder::BaselineFirst => {
                let (b, _) = run(baseline_plan)?;
                let (s, _) = run(plan)?;
                (b, s)
            }
            PairOrder::StrategyFirst => {
                let (s, _) = run(plan)?;
                let (b, _) = run(baseline_plan)?;
                (b, s)
            }
        };
        debug_assert_eq!(
            baseline_result.corpus_hash, strategy_result.corpus_hash,
            "paired runs must consume identical inputs"
        );
        let pair = PairRecord {
            index: i,
            order,
            baseline: baseline_result.measurement.clone(),
            strategy: strategy_result.measurement.clone(),
            baseline_manifest: baseline_result.manifest(),
            strategy_manifest: strategy_result.manifest(),
        };
        if let Some(dir) = partial_dir {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("pair_{i:02}.json"));
            std::fs::write(path, serde_json::to_string_pretty(&pair).expect("serializable"))?;
        }
        pairs.push(pair);
        last = Some((baseline_result, strategy_result));
    }
    let (final_baseline, final_strategy) = last.expect("n >= 1");
    Ok(BlockOutcome {
        block: PairedBlock {
            strategy_label: plan.label,
            n,
            seed: opts.hyper.seed,
            pairs,
        },
        final_baseline,
        final_strategy,
    })
}

fn metric_value(m: &RunMeasurement, metric: Metric) -> f64 {
    match metric {
        Metric::RuntimeSeconds => m.total_seconds,
        Metric::EmissionsGrams => m.emissions_g,
    }
}

/// Paired differences, baseline minus strategy, in pair order.
pub fn deltas(block: &PairedBlock, metric: Metric) -> DeltaSeries {
    let values = block
        .pairs
        .iter()
        .map(|p| metric_value(&p.baseline, metric) - metric_value(&p.strategy, metric))
        .collect();
    DeltaSeries::new(metric, values)
}

/// Mean savings for one metric. `relative_pct` is the ratio of means,
/// `100 * mean(delta) / mean(baseline)`; positive values mean the strategy
/// is cheaper.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricSavings {
    pub absolute_mean: f64,
    pub relative_pct: f64,
    pub baseline_mean: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SavingsSummary {
    pub runtime: MetricSavings,
    pub emissions: MetricSavings,
}

fn savings_for(block: &PairedBlock, metric: Metric) -> Result<MetricSavings, ExperimentError> {
    let n = block.pairs.len() as f64;
    let baseline_mean = block
        .pairs
        .iter()
        .map(|p| metric_value(&p.baseline, metric))
        .sum::<f64>()
        / n;
    if baseline_mean == 0.0 {
        return Err(ExperimentError::ZeroBaselineMean(metric.as_str()));
    }
    let absolute_mean = deltas(block, metric).values.iter().sum::<f64>() / n;
    Ok(MetricSavings {
        absolute_mean,
        relative_pct: 100.0 * absolute_mean / baseline_mean,
        baseline_mean,
    })
}

/// Absolute and relative mean paired savings for both metrics.
pub fn savings_summary(block: &PairedBlock) -> Result<SavingsSummary, ExperimentError> {
    if block.pairs.is_empty() {
        return Err(ExperimentError::EmptyBlock);
    }
    Ok(SavingsSummary {
        runtime: savings_for(block, Metric::RuntimeSeconds)?,
        emissions: savings_for(block, Metric::EmissionsGrams)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_synthetic;
    use crate::strategy::{constraints_plan, decision_plan, naive_plan, StopReason};

    fn synth_records() -> Vec<RawRecord> {
        let (docs, _) = generate_synthetic(3, 30, 30, 25, 0.4, 1e-3, 77).unwrap();
        docs.into_iter()
            .enumerate()
            .map(|(i, d)| RawRecord::new(None, &d.tokens.join(" "), Some(2018 + (i % 4) as i32)))
            .collect()
    }

    fn fast_opts() -> ExecuteOptions {
        ExecuteOptions {
            top_n_words: 5,
            ..ExecuteOptions::default()
        }
    }

    fn tiny_block(n: usize) -> BlockOutcome {
        let records = synth_records();
        let pre = PreprocessConfig {
            min_tokens: 1,
            ..PreprocessConfig::default()
        };
        run_block(
            &constraints_plan().with_k_range(2, 6),
            &naive_plan().with_k_range(2, 6),
            n,
            &records,
            &pre,
            &fast_opts(),
            &MeterConfig::default(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn orders_alternate_starting_baseline_first() {
        let outcome = tiny_block(5);
        let orders: Vec<PairOrder> = outcome.block.pairs.iter().map(|p| p.order).collect();
        assert_eq!(
            orders,
            vec![
                PairOrder::BaselineFirst,
                PairOrder::StrategyFirst,
                PairOrder::BaselineFirst,
                PairOrder::StrategyFirst,
                PairOrder::BaselineFirst,
            ]
        );
        assert_eq!(outcome.block.pairs.len(), 5);
    }

    #[test]
    fn paired_runs_share_inputs_and_seed() {
        let outcome = tiny_block(2);
        for pair in &outcome.block.pairs {
            assert_eq!(
                pair.baseline_manifest.corpus_hash,
                pair.strategy_manifest.corpus_hash
            );
            assert_eq!(pair.baseline_manifest.seed, pair.strategy_manifest.seed);
        }
    }

    #[test]
    fn strategy_trains_no_more_models_than_baseline() {
        let outcome = tiny_block(2);
        for pair in &outcome.block.pairs {
            assert!(
                pair.strategy_manifest.trained_models <= pair.baseline_manifest.trained_models
            );
        }
        // Coarse grid on 2..=6: baseline 5 models, strategy 3.
        assert_eq!(outcome.block.pairs[0].baseline_manifest.trained_models, 5);
        assert_eq!(outcome.block.pairs[0].strategy_manifest.trained_models, 3);
    }

    #[test]
    fn deltas_subtract_in_pair_order() {
        let mut outcome = tiny_block(2);
        // Overwrite measurements with known values.
        for (i, pair) in outcome.block.pairs.iter_mut().enumerate() {
            pair.baseline.total_seconds = 10.0 + 2.0 * i as f64;
            pair.strategy.total_seconds = 7.0 + i as f64;
            pair.baseline.emissions_g = 4.0;
            pair.strategy.emissions_g = 1.5;
        }
        let d = deltas(&outcome.block, Metric::RuntimeSeconds);
        assert_eq!(d.values, vec![3.0, 4.0]);
        let e = deltas(&outcome.block, Metric::EmissionsGrams);
        assert_eq!(e.values, vec![2.5, 2.5]);
    }

    #[test]
    fn identical_runs_give_zero_deltas() {
        let mut outcome = tiny_block(1);
        let m = outcome.block.pairs[0].baseline.clone();
        outcome.block.pairs[0].strategy = m;
        let d = deltas(&outcome.block, Metric::RuntimeSeconds);
        assert_eq!(d.values, vec![0.0]);
    }

    #[test]
    fn savings_match_published_arithmetic() {
        // Back-calculation from the published constraints row: mean delta
        // 1011.07 s against baseline mean 2252.4 s is 44.89 %.
        let mut outcome = tiny_block(1);
        let pair = &mut outcome.block.pairs[0];
        pair.baseline.total_seconds = 2252.4;
        pair.strategy.total_seconds = 2252.4 - 1011.07;
        pair.baseline.emissions_g = 4.002;
        pair.strategy.emissions_g = 4.002 - 2.532;
        let summary = savings_summary(&outcome.block).unwrap();
        assert!((summary.runtime.absolute_mean - 1011.07).abs() < 1e-9);
        assert!((summary.runtime.relative_pct - 44.89).abs() < 0.005);
        assert!((summary.emissions.absolute_mean - 2.532).abs() < 1e-9);
        assert!((summary.emissions.relative_pct - 63.27).abs() < 0.005);
    }

    #[test]
    fn savings_all_zero_deltas() {
        let mut outcome = tiny_block(1);
        let m = outcome.block.pairs[0].baseline.clone();
        outcome.block.pairs[0].strategy = m;
        let summary = savings_summary(&outcome.block).unwrap();
        assert_eq!(summary.runtime.absolute_mean, 0.0);
        assert_eq!(summary.runtime.relative_pct, 0.0);
    }

    #[test]
    fn savings_invariant_under_pair_permutation() {
        let mut outcome = tiny_block(3);
        for (i, pair) in outcome.block.pairs.iter_mut().enumerate() {
            pair.baseline.total_seconds = 10.0 + i as f64;
            pair.strategy.total_seconds = 5.0 + 2.0 * i as f64;
            pair.baseline.emissions_g = 1.0 + i as f64;
            pair.strategy.emissions_g = 0.5;
        }
        let before = savings_summary(&outcome.block).unwrap();
        outcome.block.pairs.reverse();
        let after = savings_summary(&outcome.block).unwrap();
        assert!((before.runtime.relative_pct - after.runtime.relative_pct).abs() < 1e-12);
        assert!((before.emissions.absolute_mean - after.emissions.absolute_mean).abs() < 1e-12);
    }

    #[test]
    fn zero_baseline_mean_is_an_error() {
        let mut outcome = tiny_block(1);
        outcome.block.pairs[0].baseline.total_seconds = 0.0;
        outcome.block.pairs[0].strategy.total_seconds = 0.0;
        assert!(matches!(
            savings_summary(&outcome.block),
            Err(ExperimentError::ZeroBaselineMean("runtime_seconds"))
        ));
    }

    #[test]
    fn decision_block_keeps_fewer_models_and_early_stop_metadata() {
        let records = synth_records();
        let pre = PreprocessConfig {
            min_tokens: 1,
            ..PreprocessConfig::default()
        };
        let outcome = run_block(
            &decision_plan().with_k_range(2, 6),
            &naive_plan().with_k_range(2, 6),
            1,
            &records,
            &pre,
            &fast_opts(),
            &MeterConfig::default(),
            None,
        )
        .unwrap();
        let manifest = &outcome.block.pairs[0].strategy_manifest;
        assert!(manifest.trained_models <= 3);
        assert!(matches!(
            manifest.stop_reason,
            StopReason::Exhausted | StopReason::EarlyStopped
        ));
        assert_eq!(outcome.final_strategy.models.len(), 1);
    }

    #[test]
    fn partial_pairs_are_persisted() {
        let records = synth_records();
        let pre = PreprocessConfig {
            min_tokens: 1,
            ..PreprocessConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        run_block(
            &constraints_plan().with_k_range(2, 4),
            &naive_plan().with_k_range(2, 4),
            2,
            &records,
            &pre,
            &fast_opts(),
            &MeterConfig::default(),
            Some(dir.path()),
        )
        .unwrap();
        assert!(dir.path().join("pair_01.json").exists());
        assert!(dir.path().join("pair_02.json").exists());
    }
}
