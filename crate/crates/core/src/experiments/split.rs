use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datasets::DatasetBundle;
use crate::error::{HarError, Result};

pub const DEFAULT_HYB_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitMode {
    /// Subject-independent: the test subject contributes nothing to training.
    Si,
    /// Hybrid: part of the test subject's windows join the training set.
    Hyb,
}

impl SplitMode {
    pub const ALL: [SplitMode; 2] = [SplitMode::Si, SplitMode::Hyb];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::Si => "SI",
            SplitMode::Hyb => "HYB",
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitMode {
    type Err = HarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SI" => Ok(SplitMode::Si),
            "HYB" => Ok(SplitMode::Hyb),
            other => Err(HarError::InvalidArgument(format!("unknown split mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub test_subject: String,
    /// Only read in HYB mode.
    pub hyb_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn si(test_subject: impl Into<String>) -> Self {
        SplitSpec {
            mode: SplitMode::Si,
            test_subject: test_subject.into(),
            hyb_fraction: DEFAULT_HYB_FRACTION,
            seed: 0,
        }
    }

    pub fn hyb(test_subject: impl Into<String>, hyb_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            mode: SplitMode::Hyb,
            test_subject: test_subject.into(),
            hyb_fraction,
            seed,
        }
    }
}

/// Indices into `bundle.windows()`. Both lists are ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub test_subject: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Test-subject windows moved into `train` (HYB only).
    pub donated: Vec<usize>,
    /// Classes of the test subject with a single window, which donate nothing.
    pub flagged_classes: Vec<String>,
}

impl Split {
    pub fn is_donated(&self, index: usize) -> bool {
        self.donated.binary_search(&index).is_ok()
    }
}

fn check_subject(bundle: &DatasetBundle, test_subject: &str) -> Result<()> {
    if bundle.subject(test_subject).is_none() {
        return Err(HarError::UnknownSubject(test_subject.to_string()));
    }
    Ok(())
}

/// Leave-one-subject-out split.
pub fn make_si_split(bundle: &DatasetBundle, test_subject: &str) -> Result<Split> {
    check_subject(bundle, test_subject)?;
    let (test, train) = (0..bundle.windows().len()).partition(|&i| bundle.windows()[i].subject_id == test_subject);
    Ok(Split {
        test_subject: test_subject.to_string(),
        train,
        test,
        donated: Vec::new(),
        flagged_classes: Vec::new(),
    })
}

/// Number of windows a class with `n` windows donates.
pub fn donation_count(n: usize, fraction: f64) -> usize {
    if n < 2 {
        0
    } else {
        ((fraction * n as f64).floor() as usize).max(1)
    }
}

/// Hybrid split: per class of the test subject (in label order), a seeded
/// shuffle picks `donation_count(n, fraction)` windows to move into training.
pub fn make_hyb_split(bundle: &DatasetBundle, test_subject: &str, fraction: f64, seed: u64) -> Result<Split> {
    check_subject(bundle, test_subject)?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HarError::InvalidArgument(format!(
            "hyb fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let windows = bundle.windows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut donated = Vec::new();
    let mut flagged_classes = Vec::new();
    for label in bundle.label_set() {
        let mut own: Vec<usize> = (0..windows.len())
            .filter(|&i| windows[i].subject_id == test_subject && &windows[i].label == label)
            .collect();
        if own.is_empty() {
            continue;
        }
        if own.len() == 1 {
            log::warn!("{test_subject}: class {label} has a single window and donates nothing");
            flagged_classes.push(label.clone());
            continue;
        }
        own.shuffle(&mut rng);
        donated.extend_from_slice(&own[..donation_count(own.len(), fraction)]);
    }
    donated.sort_unstable();

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, w) in windows.iter().enumerate() {
        if w.subject_id != test_subject || donated.binary_search(&i).is_ok() {
            train.push(i);
        } else {
            test.push(i);
        }
    }
    Ok(Split {
        test_subject: test_subject.to_string(),
        train,
        test,
        donated,
        flagged_classes,
    })
}

pub fn make_split(bundle: &DatasetBundle, spec: &SplitSpec) -> Result<Split> {
    match spec.mode {
        SplitMode::Si => make_si_split(bundle, &spec.test_subject),
        SplitMode::Hyb => make_hyb_split(bundle, &spec.test_subject, spec.hyb_fraction, spec.seed),
    }
}

/// Values of `m` for PDL: 10, 15, 20, ... with `available` appended as the
/// last entry; just `{available}` when fewer than 10 subjects are available.
pub fn pdl_schedule(available: usize) -> Result<Vec<usize>> {
    if available == 0 {
        return Err(HarError::InvalidArgument("no training subjects available".into()));
    }
    if available < 10 {
        return Ok(vec![available]);
    }
    let mut m: Vec<usize> = (10..available).step_by(5).collect();
    m.push(available);
    Ok(m)
}
