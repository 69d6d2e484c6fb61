//! Motion Sense ingestion.
//!
//! The published archive holds one folder per activity trial (`dws_1`,
//! `wlk_7`, ...) with one `sub_<code>.csv` per participant, plus
//! `data_subjects_info.csv` (`code,weight,height,age,gender,trials`). Trials
//! from `A_DeviceMotion_data` carry `userAcceleration.{x,y,z}` in g and are
//! preferred; `B_Accelerometer_data` trials (`x,y,z`) are used only when no
//! device-motion trial exists.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use walkdir::WalkDir;

use super::{window_stream, DatasetBundle, LabeledWindow, Sample, Sex, SubjectMeta, DEFAULT_RATE_HZ};
use crate::error::{HarError, Result};

/// Activity codes, as used in trial folder names.
pub const ACTIVITIES: [&str; 6] = ["dws", "jog", "sit", "std", "ups", "wlk"];

const SUBJECT_INFO_FILE: &str = "data_subjects_info.csv";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSenseOptions {
    pub rate: f64,
    pub window_s: f64,
    pub overlap: f64,
}

impl Default for MotionSenseOptions {
    fn default() -> Self {
        MotionSenseOptions {
            rate: DEFAULT_RATE_HZ,
            window_s: 3.0,
            overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
struct Trial {
    activity: String,
    trial: u32,
    subject_code: u32,
    device_motion: bool,
    path: PathBuf,
}

fn subject_id(code: u32) -> String {
    format!("sub_{code}")
}

fn parse_trial(path: &Path) -> Option<Trial> {
    let file = path.file_name()?.to_str()?;
    let code = file.strip_prefix("sub_")?.strip_suffix(".csv")?.parse().ok()?;
    let folder = path.parent()?.file_name()?.to_str()?;
    let (activity, trial) = folder.split_once('_')?;
    if !ACTIVITIES.contains(&activity) {
        return None;
    }
    let trial = trial.parse().ok()?;
    let device_motion = path
        .ancestors()
        .any(|a| a.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.contains("DeviceMotion")));
    Some(Trial {
        activity: activity.to_string(),
        trial,
        subject_code: code,
        device_motion,
        path: path.to_path_buf(),
    })
}

fn read_recording(path: &Path) -> Result<Vec<Sample>> {
    let file = File::open(path).map_err(|e| HarError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| HarError::csv(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let cols = match (
        find("userAcceleration.x"),
        find("userAcceleration.y"),
        find("userAcceleration.z"),
    ) {
        (Some(x), Some(y), Some(z)) => [x, y, z],
        _ => match (find("x"), find("y"), find("z")) {
            (Some(x), Some(y), Some(z)) => [x, y, z],
            _ => {
                return Err(HarError::HeaderMismatch {
                    path: path.to_path_buf(),
                    expected: "userAcceleration.{x,y,z} or x,y,z".into(),
                    found: headers.iter().collect::<Vec<_>>().join(","),
                })
            }
        },
    };
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| HarError::csv(path, e))?;
        let mut s: Sample = [0.0; 3];
        for (axis, &c) in cols.iter().enumerate() {
            let raw = record
                .get(c)
                .ok_or_else(|| HarError::malformed(path, i + 2, "short row"))?;
            s[axis] = raw
                .trim()
                .parse()
                .map_err(|_| HarError::malformed(path, i + 2, format!("cannot parse `{raw}`")))?;
            if !s[axis].is_finite() {
                return Err(HarError::malformed(path, i + 2, "non-finite value"));
            }
        }
        samples.push(s);
    }
    Ok(samples)
}

fn read_subject_info(path: &Path) -> Result<Vec<SubjectMeta>> {
    let file = File::open(path).map_err(|e| HarError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| HarError::csv(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| HarError::HeaderMismatch {
                path: path.to_path_buf(),
                expected: "code,weight,height,age,gender".into(),
                found: headers.iter().collect::<Vec<_>>().join(","),
            })
    };
    let (code_c, weight_c, height_c, age_c, gender_c) =
        (col("code")?, col("weight")?, col("height")?, col("age")?, col("gender")?);

    let mut subjects = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| HarError::csv(path, e))?;
        let get = |c: usize, name: &str| -> Result<f64> {
            let raw = record
                .get(c)
                .ok_or_else(|| HarError::malformed(path, row, format!("missing `{name}`")))?;
            raw.trim()
                .parse::<f64>()
                .map_err(|_| HarError::malformed(path, row, format!("cannot parse `{name}` from `{raw}`")))
        };
        let code = get(code_c, "code")?;
        let gender = get(gender_c, "gender")?;
        let age = get(age_c, "age")?;
        let sex = if gender == 0.0 {
            Sex::Female
        } else if gender == 1.0 {
            Sex::Male
        } else {
            return Err(HarError::malformed(path, row, format!("gender {gender} is not 0/1")));
        };
        if code.fract() != 0.0 || code < 0.0 || age.fract() != 0.0 || age < 0.0 {
            return Err(HarError::malformed(path, row, "code and age must be non-negative integers"));
        }
        subjects.push(SubjectMeta {
            subject_id: subject_id(code as u32),
            sex,
            age: age as u32,
            weight: get(weight_c, "weight")?,
            height: get(height_c, "height")?,
        });
    }
    Ok(subjects)
}

/// Loads a Motion Sense directory with the default 3 s / 50 % windowing.
pub fn load_motionsense(root: &Path) -> Result<DatasetBundle> {
    load_motionsense_with(root, MotionSenseOptions::default())
}

pub fn load_motionsense_with(root: &Path, options: MotionSenseOptions) -> Result<DatasetBundle> {
    let mut info = None;
    let mut trials = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            HarError::io(path, std::io::Error::other(e.to_string()))
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        if path.file_name().and_then(|n| n.to_str()) == Some(SUBJECT_INFO_FILE) {
            info.get_or_insert_with(|| path.to_path_buf());
        } else if let Some(t) = parse_trial(path) {
            trials.push(t);
        }
    }

    if trials.is_empty() {
        return Err(HarError::NoTrials(root.to_path_buf()));
    }
    if trials.iter().any(|t| t.device_motion) {
        trials.retain(|t| t.device_motion);
    }
    let info = info.ok_or_else(|| HarError::MissingSubjectInfo(root.to_path_buf()))?;
    let subjects = read_subject_info(&info)?;

    trials.sort_by(|a, b| {
        (a.subject_code, &a.activity, a.trial).cmp(&(b.subject_code, &b.activity, b.trial))
    });
    for t in &trials {
        let id = subject_id(t.subject_code);
        if !subjects.iter().any(|s| s.subject_id == id) {
            return Err(HarError::OrphanSubject(id));
        }
    }

    let recordings: Vec<Vec<Vec<Sample>>> = trials
        .par_iter()
        .map(|t| {
            let rec = read_recording(&t.path)?;
            window_stream(&rec, options.rate, options.window_s, options.overlap)
        })
        .collect::<Result<_>>()?;

    let mut next_id: BTreeMap<u32, u64> = BTreeMap::new();
    let mut windows = Vec::new();
    for (t, segs) in trials.iter().zip(recordings) {
        let counter = next_id.entry(t.subject_code).or_insert(0);
        for samples in segs {
            windows.push(LabeledWindow {
                subject_id: subject_id(t.subject_code),
                label: t.activity.clone(),
                window_id: *counter,
                samples,
                rate: options.rate,
            });
            *counter += 1;
        }
    }

    DatasetBundle::new(
        "motionsense",
        subjects,
        windows,
        ACTIVITIES.iter().map(|s| s.to_string()).collect(),
    )
}
