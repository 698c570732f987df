use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::SemanticsError;
use crate::sensormodels::DetectionSet;

/// Per-class detection counts, indexed by vocabulary order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub counts: Vec<u32>,
}

impl FeatureVector {
    pub fn zeros(m: usize) -> Self {
        Self { counts: vec![0; m] }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn squared_distance(&self, other: &FeatureVector) -> u64 {
        self.counts
            .iter()
            .zip(&other.counts)
            .map(|(&a, &b)| {
                let d = i64::from(a) - i64::from(b);
                (d * d) as u64
            })
            .sum()
    }
}

impl std::ops::Add for &FeatureVector {
    type Output = FeatureVector;
    fn add(self, rhs: &FeatureVector) -> FeatureVector {
        FeatureVector {
            counts: self.counts.iter().zip(&rhs.counts).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Counts confident detections per vocabulary class over a window.
/// Unknown classes are skipped with a warning.
pub fn build_feature_vector<S: AsRef<str>>(
    window: &[DetectionSet],
    vocabulary: &[S],
    tau_conf: f64,
) -> FeatureVector {
    let mut fv = FeatureVector::zeros(vocabulary.len());
    for set in window {
        for d in &set.detections {
            if d.confidence < tau_conf {
                continue;
            }
            match vocabulary.iter().position(|v| v.as_ref() == d.class_label) {
                Some(k) => fv.counts[k] += 1,
                None => log::warn!("detection of unknown class {:?} ignored", d.class_label),
            }
        }
    }
    fv
}

/// One labeled training example as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub counts: BTreeMap<String, u32>,
    pub category: String,
}

/// k-nearest-neighbor room-category classifier over feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct RoomClassifier {
    samples: Vec<(FeatureVector, String)>,
    k: usize,
    dim: usize,
}

impl RoomClassifier {
    pub fn new(dim: usize, k: usize) -> Self {
        Self {
            samples: Vec::new(),
            k: k.max(1),
            dim,
        }
    }

    pub fn from_rows<S: AsRef<str>>(
        rows: &[TrainingRow],
        vocabulary: &[S],
        k: usize,
    ) -> Result<Self, SemanticsError> {
        let mut c = Self::new(vocabulary.len(), k);
        for (row, r) in rows.iter().enumerate() {
            let mut fv = FeatureVector::zeros(vocabulary.len());
            for (label, &n) in &r.counts {
                let k = vocabulary
                    .iter()
                    .position(|v| v.as_ref() == label)
                    .ok_or_else(|| SemanticsError::UnknownTrainingClass {
                        row,
                        label: label.clone(),
                    })?;
                fv.counts[k] = n;
            }
            c.add(fv, r.category.clone())?;
        }
        Ok(c)
    }

    pub fn to_rows<S: AsRef<str>>(&self, vocabulary: &[S]) -> Vec<TrainingRow> {
        self.samples
            .iter()
            .map(|(fv, cat)| TrainingRow {
                counts: fv
                    .counts
                    .iter()
                    .zip(vocabulary)
                    .filter(|(n, _)| **n > 0)
                    .map(|(n, v)| (v.as_ref().to_string(), *n))
                    .collect(),
                category: cat.clone(),
            })
            .collect()
    }

    pub fn add(&mut self, fv: FeatureVector, category: String) -> Result<(), SemanticsError> {
        if fv.len() != self.dim {
            return Err(SemanticsError::FeatureLength {
                expected: self.dim,
                actual: fv.len(),
            });
        }
        self.samples.push((fv, category));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Majority category among the k nearest samples. Neighbors are ranked
    /// by distance then training index; vote ties go to the category whose
    /// first neighbor ranks highest.
    pub fn classify(&self, r: &FeatureVector) -> Result<&str, SemanticsError> {
        if self.samples.is_empty() {
            return Err(SemanticsError::Untrained);
        }
        if r.len() != self.dim {
            return Err(SemanticsError::FeatureLength {
                expected: self.dim,
                actual: r.len(),
            });
        }
        let mut ranked: Vec<(u64, usize)> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, (fv, _))| (fv.squared_distance(r), i))
            .collect();
        ranked.sort_unstable();
        let neighbors = &ranked[..self.k.min(ranked.len())];
        let mut votes: Vec<(&str, usize, usize)> = Vec::new();
        for (rank, &(_, i)) in neighbors.iter().enumerate() {
            let cat = self.samples[i].1.as_str();
            match votes.iter_mut().find(|v| v.0 == cat) {
                Some(v) => v.1 += 1,
                None => votes.push((cat, 1, rank)),
            }
        }
        votes.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        Ok(votes[0].0)
    }
}
