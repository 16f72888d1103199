//! Library half of the `hhe` command: artifact formats, run reports and
//! the measurement drivers behind each verb.

pub mod bench;
pub mod ecg;
mod error;
pub mod files;
pub mod report;

pub use error::{CliError, Result};

use hhe_core::bfv::BfvProfile;

/// Environment variable that overrides `--profile`.
pub const PROFILE_ENV: &str = "HHE_PROFILE";

/// `HHE_PROFILE` wins over the flag when set and non-empty.
pub fn resolve_profile(flag: &str, env: Option<&str>) -> Result<BfvProfile> {
    let name = env.filter(|s| !s.is_empty()).unwrap_or(flag);
    Ok(BfvProfile::by_name(name)?)
}

/// `"1,5,25"` -> `[1, 5, 25]`.
pub fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CliError::invalid(format!("{t:?} in {s:?} is not a count")))
        })
        .collect()
}
