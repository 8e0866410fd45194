//! Run configuration, serialized verbatim into every manifest so any
//! invocation can be reproduced exactly.

use serde::{Deserialize, Serialize};

use footbench_core::meter::{MeterConfig, DEFAULT_CARBON_INTENSITY, DEFAULT_POWER_WATTS};
use footbench_core::strategy::{ExecuteOptions, HyperBase, StrategyLabel};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub csv_path: String,
    pub output_dir: String,
    pub strategy: StrategyLabel,
    pub pairs: usize,
    pub seed: u64,
    pub k_min: usize,
    pub k_max: usize,
    /// None means the symmetric default 1/k.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub sweeps: u32,
    pub iterations: u32,
    pub power_watts: f64,
    pub carbon_intensity: f64,
    pub bootstrap_b: usize,
    pub top_n_words: usize,
    pub cooccur_threshold: f64,
    pub min_tokens: usize,
    pub environment_note: String,
}

impl RunConfig {
    pub fn meter_config(&self) -> MeterConfig {
        MeterConfig {
            power_watts: self.power_watts,
            carbon_intensity: self.carbon_intensity,
            overhead_multiplier: 1.0,
            environment_note: self.environment_note.clone(),
        }
    }

    pub fn execute_options(&self) -> ExecuteOptions {
        ExecuteOptions {
            hyper: HyperBase {
                alpha: self.alpha,
                beta: self.beta,
                sweeps: self.sweeps,
                per_doc_iterations: self.iterations,
                seed: self.seed,
            },
            top_n_words: self.top_n_words,
            epsilon: footbench_core::diagnostics::DEFAULT_EPSILON,
            full_scope_top_docs: footbench_core::strategy::DEFAULT_FULL_TOP_DOCS,
        }
    }

    pub fn preprocess_config(&self) -> footbench_core::corpus::PreprocessConfig {
        footbench_core::corpus::PreprocessConfig {
            min_tokens: self.min_tokens,
            ..footbench_core::corpus::PreprocessConfig::default()
        }
    }

    /// Deterministic run identifier derived from the configuration.
    pub fn run_id(&self) -> String {
        format!(
            "{}_k{}-{}_s{}",
            self.strategy.as_str(),
            self.k_min,
            self.k_max,
            self.seed
        )
    }
}

pub fn default_power_watts() -> f64 {
    DEFAULT_POWER_WATTS
}

pub fn default_carbon_intensity() -> f64 {
    DEFAULT_CARBON_INTENSITY
}
