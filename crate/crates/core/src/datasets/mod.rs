//! Labeled accelerometer windows, subject metadata and the loaders that
//! produce them.
//!
//! Every loader returns a [`DatasetBundle`], whose constructor checks the
//! referential-integrity invariants and puts subjects and windows into a
//! canonical order (subjects by id, windows by `(subject_id, window_id)`).
//! Downstream code relies on that order for deterministic splits and seeds.

mod canonical;
mod motionsense;
mod window;

use std::collections::{BTreeSet, HashSet};

pub use canonical::{
    load_canonical, load_canonical_with_rate, write_canonical, write_subjects_csv,
    write_windows_csv, SUBJECTS_HEADER, WINDOWS_HEADER,
};
pub use motionsense::{load_motionsense, load_motionsense_with, MotionSenseOptions, ACTIVITIES};
pub use window::{resample, window_stream};

use crate::error::{HarError, Result};

/// Standard gravity, used to convert m/s² to g.
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Sampling rate of both supported datasets.
pub const DEFAULT_RATE_HZ: f64 = 50.0;

/// One tri-axial acceleration sample `(ax, ay, az)` in g.
pub type Sample = [f64; 3];

/// Biological sex, encoded 0/1 for distance computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub fn code(self) -> u8 {
        match self {
            Sex::Female => 0,
            Sex::Male => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Sex> {
        match code {
            0 => Some(Sex::Female),
            1 => Some(Sex::Male),
            _ => None,
        }
    }
}

/// Physical attributes of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectMeta {
    pub subject_id: String,
    pub sex: Sex,
    /// Years.
    pub age: u32,
    /// Kilograms.
    pub weight: f64,
    /// Centimeters.
    pub height: f64,
}

impl SubjectMeta {
    /// `(sex, age, weight, height)` as a raw numeric vector.
    pub fn physical_vector(&self) -> Vec<f64> {
        vec![
            f64::from(self.sex.code()),
            f64::from(self.age),
            self.weight,
            self.height,
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.subject_id.is_empty() {
            return Err(HarError::InvalidBundle("empty subject id".into()));
        }
        if self.age == 0 {
            return Err(HarError::InvalidBundle(format!(
                "subject `{}` has non-positive age",
                self.subject_id
            )));
        }
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(HarError::InvalidBundle(format!(
                "subject `{}` has non-positive weight",
                self.subject_id
            )));
        }
        if !(self.height.is_finite() && self.height > 0.0) {
            return Err(HarError::InvalidBundle(format!(
                "subject `{}` has non-positive height",
                self.subject_id
            )));
        }
        Ok(())
    }
}

/// A fixed-length tri-axial window with its activity label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub subject_id: String,
    pub label: String,
    pub window_id: u64,
    pub samples: Vec<Sample>,
    /// Samples per second.
    pub rate: f64,
}

impl LabeledWindow {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Values of one axis (0 = x, 1 = y, 2 = z).
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[axis]).collect()
    }
}

/// An immutable, validated collection of windows plus subject metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    name: String,
    subjects: Vec<SubjectMeta>,
    windows: Vec<LabeledWindow>,
    label_set: Vec<String>,
}

impl DatasetBundle {
    /// Validates and canonicalizes a bundle.
    ///
    /// `label_set` is sorted and deduplicated; any label used by a window
    /// must already be present in it.
    pub fn new(
        name: impl Into<String>,
        mut subjects: Vec<SubjectMeta>,
        mut windows: Vec<LabeledWindow>,
        label_set: Vec<String>,
    ) -> Result<Self> {
        let label_set: Vec<String> = label_set
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        let mut ids = HashSet::with_capacity(subjects.len());
        for s in &subjects {
            s.validate()?;
            if !ids.insert(s.subject_id.as_str()) {
                return Err(HarError::InvalidBundle(format!(
                    "duplicate subject id `{}`",
                    s.subject_id
                )));
            }
        }

        if let Some(first) = windows.first() {
            let (len, rate) = (first.len(), first.rate);
            if len == 0 {
                return Err(HarError::InvalidBundle("empty window".into()));
            }
            if !(rate.is_finite() && rate > 0.0) {
                return Err(HarError::InvalidBundle(format!("invalid rate {rate}")));
            }
            let mut keys = HashSet::with_capacity(windows.len());
            for w in &windows {
                if w.len() != len {
                    return Err(HarError::InvalidBundle(format!(
                        "window {}/{} has {} samples, expected {len}",
                        w.subject_id,
                        w.window_id,
                        w.len()
                    )));
                }
                if w.rate != rate {
                    return Err(HarError::InvalidBundle(format!(
                        "window {}/{} has rate {}, expected {rate}",
                        w.subject_id, w.window_id, w.rate
                    )));
                }
                if !ids.contains(w.subject_id.as_str()) {
                    return Err(HarError::OrphanSubject(w.subject_id.clone()));
                }
                if label_set.binary_search(&w.label).is_err() {
                    return Err(HarError::InvalidBundle(format!(
                        "window {}/{} has label `{}` outside the label set",
                        w.subject_id, w.window_id, w.label
                    )));
                }
                if w.samples.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(HarError::InvalidBundle(format!(
                        "window {}/{} contains non-finite samples",
                        w.subject_id, w.window_id
                    )));
                }
                if !keys.insert((w.subject_id.as_str(), w.window_id)) {
                    return Err(HarError::InvalidBundle(format!(
                        "duplicate window {}/{}",
                        w.subject_id, w.window_id
                    )));
                }
            }
        }

        subjects.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
        windows.sort_by(|a, b| {
            a.subject_id
                .cmp(&b.subject_id)
                .then(a.window_id.cmp(&b.window_id))
        });

        Ok(DatasetBundle {
            name: name.into(),
            subjects,
            windows,
            label_set,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Subjects, sorted by id.
    pub fn subjects(&self) -> &[SubjectMeta] {
        &self.subjects
    }

    /// Windows, sorted by `(subject_id, window_id)`.
    pub fn windows(&self) -> &[LabeledWindow] {
        &self.windows
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectMeta> {
        self.subjects
            .binary_search_by(|s| s.subject_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.subjects[i])
    }

    pub fn subject_ids(&self) -> Vec<&str> {
        self.subjects.iter().map(|s| s.subject_id.as_str()).collect()
    }

    /// Index of `label` in the label set.
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.label_set
            .binary_search_by(|l| l.as_str().cmp(label))
            .ok()
    }

    /// Samples per window (0 for an empty bundle).
    pub fn window_length(&self) -> usize {
        self.windows.first().map_or(0, LabeledWindow::len)
    }

    pub fn rate(&self) -> Option<f64> {
        self.windows.first().map(|w| w.rate)
    }

    /// Windows owned by one subject, in window-id order.
    pub fn windows_of<'a>(&'a self, subject_id: &'a str) -> impl Iterator<Item = &'a LabeledWindow> + 'a {
        self.windows.iter().filter(move |w| w.subject_id == subject_id)
    }
}
