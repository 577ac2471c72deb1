pub mod gen;
pub mod mix;
pub mod profile;
pub mod pseudolabel;
pub mod report;
pub mod translate;

pub use gen::GenArgs;
pub use mix::MixArgs;
pub use profile::ProfileArgs;
pub use pseudolabel::PseudoLabelArgs;
pub use report::ReportArgs;
pub use translate::TranslateArgs;

use dgt_core::{DistanceMode, RadialPartition};
use serde::de::DeserializeOwned;

/// clap value parser for the library's snake_case serde enums.
pub(crate) fn serde_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unrecognized value {s:?}"))
}

pub(crate) fn partition(
    m: usize,
    r_max: f64,
    mode: DistanceMode,
) -> anyhow::Result<RadialPartition> {
    RadialPartition::new(m, r_max, mode).map_err(|e| crate::usage(e.to_string()))
}
