use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn name(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "val" => Ok(SplitTag::Val),
            "test" => Ok(SplitTag::Test),
            other => Err(Error::validation("split", format!("unknown split {other:?}"))),
        }
    }
}

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Shuffle with a seeded Fisher-Yates pass, then cut into train/val/test.
///
/// Validation and test get `floor(n * r)` items; training takes the rest.
pub fn split_cohort<T: Clone>(ids: &[T], ratios: (f64, f64, f64), seed: u64) -> Result<Splits<T>> {
    let (rt, rv, rs) = ratios;
    if [rt, rv, rs].iter().any(|r| !r.is_finite() || *r < 0.0) || (rt + rv + rs - 1.0).abs() > 1e-9 {
        return Err(Error::validation(
            "ratios",
            format!("must be non-negative and sum to 1, got ({rt}, {rv}, {rs})"),
        ));
    }
    let n = ids.len();
    // 1e-9 slack absorbs products like 10 * 0.1 landing a hair below an integer
    let n_val = ((n as f64) * rv + 1e-9).floor() as usize;
    let n_test = ((n as f64) * rs + 1e-9).floor() as usize;
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut rng::stream(seed, "split"));
    let test = shuffled.split_off(n - n_test);
    let val = shuffled.split_off(n - n_test - n_val);
    Ok(Splits {
        train: shuffled,
        val,
        test,
    })
}
