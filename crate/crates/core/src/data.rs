use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One specimen measured by the predicate (`x`) and test (`y`) methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

/// The paired measurements of a method-comparison study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCDataset {
    samples: Vec<PairedSample>,
}

impl MCDataset {
    pub const MIN_SAMPLES: usize = 3;

    pub fn new(samples: Vec<PairedSample>) -> Result<Self> {
        if samples.len() < Self::MIN_SAMPLES {
            return Err(Error::data(format!(
                "need at least {} samples, got {}",
                Self::MIN_SAMPLES,
                samples.len()
            )));
        }
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if s.index == 0 {
                return Err(Error::data("sample indices start at 1"));
            }
            if !s.x.is_finite() || !s.y.is_finite() {
                return Err(Error::data(format!("sample {} has a non-finite value", s.index)));
            }
            if !seen.insert(s.index) {
                return Err(Error::data(format!("duplicate sample index {}", s.index)));
            }
        }
        Ok(Self { samples })
    }

    /// Pairs `xs[i], ys[i]` numbered `1..=n`.
    pub fn from_xy(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::data(format!(
                "x and y lengths differ ({} vs {})",
                xs.len(),
                ys.len()
            )));
        }
        Self::new(
            xs.iter()
                .zip(ys)
                .enumerate()
                .map(|(i, (&x, &y))| PairedSample { index: i + 1, x, y })
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[PairedSample] {
        &self.samples
    }

    pub fn xs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y).collect()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.index).collect()
    }

    /// Copy without the sample at `position` (0-based).
    pub fn without_position(&self, position: usize) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != position)
            .map(|(_, s)| *s)
            .collect();
        Self::new(samples)
    }

    /// Copy keeping only samples whose index is not in `excluded`.
    pub fn excluding(&self, excluded: &[usize]) -> Result<Self> {
        Self::new(
            self.samples
                .iter()
                .filter(|s| !excluded.contains(&s.index))
                .copied()
                .collect(),
        )
    }

    pub fn get(&self, index: usize) -> Option<&PairedSample> {
        self.samples.iter().find(|s| s.index == index)
    }
}
