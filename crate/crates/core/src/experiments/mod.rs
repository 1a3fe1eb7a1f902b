//! Data generators, metrics and the simulation studies.
//!
//! Every study is a pure function of its configuration and seed; repetition
//! `r` draws from stream `r` of the seed.

pub mod generators;
pub mod methods;
pub mod metrics;
pub mod noisy;
pub mod null_power;
pub mod output;
pub mod split_bias;
pub mod stats;
pub mod titanic;

pub use generators::{gen_noisy, gen_strobl, NoisyConfig, StroblCase, StroblConfig};
pub use methods::{Method, Scorer};
pub use metrics::auc;
pub use noisy::{noisy_methods, run_noisy, NoisyResult};
pub use null_power::{null_power_methods, run_null_power, FeatureSummary, NullPowerResult};
pub use output::{config_hash, Metadata, ScoreRow, StudyOutput};
pub use split_bias::{run_null_split_bias, split_bias_output, SplitBiasConfig, SplitBiasRow};
pub use titanic::{run_titanic, run_titanic_on, titanic_methods, SeedAverage, TitanicConfig, TitanicResult};
