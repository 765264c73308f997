//! Train/test partitions by timestep.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::labels::LabelTable;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSpec {
    /// Odd timestep indices train, even ones test.
    OddEven,
    /// The final timestep of each field tests, the rest train.
    LastTimestepOut,
}

impl FromStr for SplitSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "odd_even" | "odd-even" => Ok(SplitSpec::OddEven),
            "last_timestep_out" | "last-timestep-out" => Ok(SplitSpec::LastTimestepOut),
            _ => Err(Error::Argument(format!(
                "unknown split {s:?} (odd_even | last_timestep_out)"
            ))),
        }
    }
}

/// Splits rows by (field, timestep). Both sides must be non-empty.
pub fn split(labels: &LabelTable, spec: SplitSpec) -> Result<(LabelTable, LabelTable)> {
    let steps = labels.timesteps();
    if steps.len() < 2 {
        return Err(Error::Split(format!(
            "need at least 2 timesteps, found {}",
            steps.len()
        )));
    }
    let last_of = |field: &str| steps.iter().filter(|(f, _)| f == field).map(|&(_, t)| t).max();
    let is_train = |field: &str, t: u32| match spec {
        SplitSpec::OddEven => t % 2 == 1,
        SplitSpec::LastTimestepOut => Some(t) != last_of(field),
    };
    let (train, test): (Vec<_>, Vec<_>) = labels
        .rows
        .iter()
        .cloned()
        .partition(|r| is_train(&r.field_name, r.timestep));
    if train.is_empty() || test.is_empty() {
        return Err(Error::Split(format!(
            "{spec:?} split of timesteps {:?} leaves one side empty",
            steps.iter().map(|(_, t)| *t).collect::<Vec<_>>()
        )));
    }
    Ok((labels.with_rows(train), labels.with_rows(test)))
}
