use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::data::Split;

/// A closed, open or half-open interval, optionally restricted to integers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub lo_open: bool,
    #[serde(default)]
    pub hi_open: bool,
    #[serde(default)]
    pub integer: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
            integer: false,
        }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Interval {
            lo_open: true,
            hi_open: true,
            ..Interval::closed(lo, hi)
        }
    }

    /// `(lo, hi]`
    pub fn left_open(lo: f64, hi: f64) -> Self {
        Interval {
            lo_open: true,
            ..Interval::closed(lo, hi)
        }
    }

    pub fn integers(lo: i64, hi: i64) -> Self {
        Interval {
            integer: true,
            ..Interval::closed(lo as f64, hi as f64)
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_open { v > self.lo } else { v >= self.lo };
        let below = if self.hi_open { v < self.hi } else { v <= self.hi };
        above && below && (!self.integer || v.fract() == 0.0)
    }

    fn int_bounds(&self) -> (i64, i64) {
        let mut lo = self.lo.ceil() as i64;
        if self.lo_open && (lo as f64) == self.lo {
            lo += 1;
        }
        let mut hi = self.hi.floor() as i64;
        if self.hi_open && (hi as f64) == self.hi {
            hi -= 1;
        }
        (lo, hi)
    }

    pub fn validate(&self, name: &str) -> Result<(), BenchError> {
        let bad = |why: &str| Err(BenchError::Range(format!("`{name}` interval {why}")));
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return bad("has non-finite bounds");
        }
        if self.lo > self.hi || (self.lo == self.hi && (self.lo_open || self.hi_open)) {
            return bad("is empty");
        }
        if self.integer {
            let (lo, hi) = self.int_bounds();
            if lo > hi {
                return bad("contains no integers");
            }
        }
        Ok(())
    }

    pub fn disjoint(&self, other: &Interval) -> bool {
        let before = |a: &Interval, b: &Interval| {
            a.hi < b.lo || (a.hi == b.lo && (a.hi_open || b.lo_open))
        };
        before(self, other) || before(other, self)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.integer {
            let (lo, hi) = self.int_bounds();
            return rng.random_range(lo..=hi) as f64;
        }
        loop {
            let u: f64 = rng.random();
            let v = self.lo + (self.hi - self.lo) * u;
            if self.contains(v) {
                return v;
            }
        }
    }
}

/// Sampling intervals for one input variable. `ood: None` means the OOD
/// split reuses the training interval for this variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarRange {
    pub name: String,
    pub train: Interval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood: Option<Interval>,
}

impl VarRange {
    pub fn new(name: &str, train: Interval) -> Self {
        VarRange {
            name: name.to_string(),
            train,
            ood: None,
        }
    }

    pub fn with_ood(mut self, ood: Interval) -> Self {
        self.ood = Some(ood);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSpec {
    pub vars: Vec<VarRange>,
    pub n_train: usize,
    pub n_test_id: usize,
    pub n_test_ood: usize,
}

impl RangeSpec {
    /// Variables whose OOD interval differs from the training interval.
    pub fn designated(&self) -> Vec<&VarRange> {
        self.vars.iter().filter(|v| v.ood.is_some()).collect()
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        for v in &self.vars {
            v.train.validate(&v.name)?;
            if let Some(ood) = &v.ood {
                ood.validate(&v.name)?;
                if !ood.disjoint(&v.train) {
                    return Err(BenchError::Range(format!(
                        "OOD interval of `{}` overlaps its training interval",
                        v.name
                    )));
                }
            }
        }
        if self.n_test_ood > 0 && self.designated().is_empty() {
            return Err(BenchError::Range(
                "OOD split requested but no variable has a disjoint OOD interval".into(),
            ));
        }
        Ok(())
    }

    pub fn interval(&self, name: &str) -> Option<&VarRange> {
        self.vars.iter().find(|v| v.name == name)
    }
}

/// Everything needed to draw one split deterministically.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub split: Split,
    pub names: Vec<String>,
    pub intervals: Vec<Interval>,
    pub count: usize,
    pub seed: u64,
    pub stream: u64,
}

impl SamplingPlan {
    /// Draws `count` rows; returns column-major values.
    pub fn sample_columns(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        let mut cols = vec![Vec::with_capacity(self.count); self.intervals.len()];
        for _ in 0..self.count {
            for (col, iv) in cols.iter_mut().zip(&self.intervals) {
                col.push(iv.sample(&mut rng));
            }
        }
        cols
    }
}

fn stream_of(split: Split) -> u64 {
    match split {
        Split::Train => 1,
        Split::TestId => 2,
        Split::TestOod => 3,
    }
}

/// Builds the train / in-distribution test / OOD sampling plans. Train and
/// test_id share intervals but draw from disjoint RNG streams.
pub fn split_id_ood(spec: &RangeSpec, seed: u64) -> Result<[SamplingPlan; 3], BenchError> {
    spec.validate()?;
    let names: Vec<String> = spec.vars.iter().map(|v| v.name.clone()).collect();
    let train: Vec<Interval> = spec.vars.iter().map(|v| v.train).collect();
    let ood: Vec<Interval> = spec.vars.iter().map(|v| v.ood.unwrap_or(v.train)).collect();
    let plan = |split, intervals: Vec<Interval>, count| SamplingPlan {
        split,
        names: names.clone(),
        intervals,
        count,
        seed,
        stream: stream_of(split),
    };
    Ok([
        plan(Split::Train, train.clone(), spec.n_train),
        plan(Split::TestId, train, spec.n_test_id),
        plan(Split::TestOod, ood, spec.n_test_ood),
    ])
}
