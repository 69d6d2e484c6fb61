use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{DatasetBundle, LabeledWindow, Sample, Sex, SubjectMeta, DEFAULT_RATE_HZ};
use crate::error::{HarError, Result};

pub const WINDOWS_HEADER: &str = "subject_id,label,window_id,sample_index,ax,ay,az";
pub const SUBJECTS_HEADER: &str = "subject_id,sex,age,weight_kg,height_cm";

fn open_reader(path: &Path, expected: &str) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| HarError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| HarError::csv(path, e))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != expected {
        return Err(HarError::HeaderMismatch {
            path: path.to_path_buf(),
            expected: expected.to_string(),
            found,
        });
    }
    Ok(reader)
}

fn field<T: std::str::FromStr>(path: &Path, row: usize, record: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = record
        .get(idx)
        .ok_or_else(|| HarError::malformed(path, row, format!("missing `{name}`")))?;
    raw.trim()
        .parse()
        .map_err(|_| HarError::malformed(path, row, format!("cannot parse `{name}` from `{raw}`")))
}

fn read_subjects(path: &Path) -> Result<Vec<SubjectMeta>> {
    let mut reader = open_reader(path, SUBJECTS_HEADER)?;
    let mut subjects = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| HarError::csv(path, e))?;
        let code: u8 = field(path, row, &record, 1, "sex")?;
        subjects.push(SubjectMeta {
            subject_id: record[0].to_string(),
            sex: Sex::from_code(code)
                .ok_or_else(|| HarError::malformed(path, row, format!("sex code {code} is not 0/1")))?,
            age: field(path, row, &record, 2, "age")?,
            weight: field(path, row, &record, 3, "weight_kg")?,
            height: field(path, row, &record, 4, "height_cm")?,
        });
    }
    Ok(subjects)
}

struct PartialWindow {
    label: String,
    samples: BTreeMap<usize, Sample>,
}

fn read_windows(path: &Path, rate: f64) -> Result<Vec<LabeledWindow>> {
    let mut reader = open_reader(path, WINDOWS_HEADER)?;
    let mut partial: BTreeMap<(String, u64), PartialWindow> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| HarError::csv(path, e))?;
        let subject = record[0].to_string();
        let label = record
            .get(1)
            .ok_or_else(|| HarError::malformed(path, row, "missing `label`"))?
            .to_string();
        let window_id: u64 = field(path, row, &record, 2, "window_id")?;
        let index: usize = field(path, row, &record, 3, "sample_index")?;
        let sample = [
            field(path, row, &record, 4, "ax")?,
            field(path, row, &record, 5, "ay")?,
            field(path, row, &record, 6, "az")?,
        ];
        let entry = partial.entry((subject, window_id)).or_insert_with(|| PartialWindow {
            label: label.clone(),
            samples: BTreeMap::new(),
        });
        if entry.label != label {
            return Err(HarError::malformed(path, row, "label changes within a window"));
        }
        if entry.samples.insert(index, sample).is_some() {
            return Err(HarError::malformed(path, row, format!("duplicate sample_index {index}")));
        }
    }

    let mut expected_len = None;
    let mut windows = Vec::with_capacity(partial.len());
    for ((subject_id, window_id), w) in partial {
        let n = w.samples.len();
        if w.samples.keys().next_back() != Some(&(n - 1)) {
            return Err(HarError::InvalidBundle(format!(
                "window {subject_id}/{window_id} has non-contiguous sample indices"
            )));
        }
        match expected_len {
            None => expected_len = Some(n),
            Some(len) if len != n => {
                return Err(HarError::InvalidBundle(format!(
                    "window {subject_id}/{window_id} has {n} samples, expected {len}"
                )))
            }
            _ => {}
        }
        windows.push(LabeledWindow {
            subject_id,
            label: w.label,
            window_id,
            samples: w.samples.into_values().collect(),
            rate,
        });
    }
    Ok(windows)
}

/// Loads a canonical windows/subjects CSV pair sampled at 50 Hz.
pub fn load_canonical(windows_csv: &Path, subjects_csv: &Path) -> Result<DatasetBundle> {
    load_canonical_with_rate(windows_csv, subjects_csv, DEFAULT_RATE_HZ)
}

/// Loads a canonical CSV pair, tagging every window with `rate`.
///
/// Windows are kept exactly as stored; the label set is the set of labels
/// that occur in the windows file.
pub fn load_canonical_with_rate(windows_csv: &Path, subjects_csv: &Path, rate: f64) -> Result<DatasetBundle> {
    let subjects = read_subjects(subjects_csv)?;
    let windows = read_windows(windows_csv, rate)?;
    let labels = windows.iter().map(|w| w.label.clone()).collect();
    let name = windows_csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "canonical".into());
    DatasetBundle::new(name, subjects, windows, labels)
}

/// Writes the windows CSV; floats use the shortest representation that
/// parses back to the same bits.
pub fn write_windows_csv(bundle: &DatasetBundle, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| HarError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| HarError::io(path, e);
    writeln!(out, "{WINDOWS_HEADER}").map_err(io)?;
    for w in bundle.windows() {
        for (i, s) in w.samples.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                w.subject_id, w.label, w.window_id, i, s[0], s[1], s[2]
            )
            .map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn write_subjects_csv(bundle: &DatasetBundle, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| HarError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| HarError::io(path, e);
    writeln!(out, "{SUBJECTS_HEADER}").map_err(io)?;
    for s in bundle.subjects() {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.subject_id,
            s.sex.code(),
            s.age,
            s.weight,
            s.height
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes `windows.csv` and `subjects.csv` into `dir`.
pub fn write_canonical(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarError::io(dir, e))?;
    write_windows_csv(bundle, &dir.join("windows.csv"))?;
    write_subjects_csv(bundle, &dir.join("subjects.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn single_window_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from(WINDOWS_HEADER);
        body.push('\n');
        for i in 0..151 {
            body.push_str(&format!("s1,walk,0,{i},0.1,0.2,{}\n", i as f64 * 0.01));
        }
        let w = write(dir.path(), "windows.csv", &body);
        let s = write(dir.path(), "subjects.csv", "subject_id,sex,age,weight_kg,height_cm\ns1,1,30,70.5,180\n");
        let b = load_canonical(&w, &s).unwrap();
        assert_eq!(b.windows().len(), 1);
        assert_eq!(b.window_length(), 151);
        assert_eq!(b.windows()[0].samples[150][2], 1.5);
        assert_eq!(b.subjects()[0].sex, Sex::Male);
        assert_eq!(b.rate(), Some(50.0));
    }

    #[test]
    fn orphan_and_header_errors() {
        let dir = tempfile::tempdir().unwrap();
        let w = write(dir.path(), "w.csv", &format!("{WINDOWS_HEADER}\nghost,walk,0,0,0,0,0\n"));
        let s = write(dir.path(), "s.csv", &format!("{SUBJECTS_HEADER}\ns1,0,30,60,160\n"));
        assert!(matches!(load_canonical(&w, &s), Err(HarError::OrphanSubject(_))));

        let bad = write(dir.path(), "bad.csv", "subject,label\n");
        assert!(matches!(load_canonical(&bad, &s), Err(HarError::HeaderMismatch { .. })));
    }

    #[test]
    fn inconsistent_window_lengths() {
        let dir = tempfile::tempdir().unwrap();
        let w = write(
            dir.path(),
            "w.csv",
            &format!("{WINDOWS_HEADER}\ns1,a,0,0,0,0,0\ns1,a,0,1,0,0,0\ns1,a,1,0,0,0,0\n"),
        );
        let s = write(dir.path(), "s.csv", &format!("{SUBJECTS_HEADER}\ns1,0,30,60,160\n"));
        assert!(matches!(load_canonical(&w, &s), Err(HarError::InvalidBundle(_))));

        let gap = write(dir.path(), "g.csv", &format!("{WINDOWS_HEADER}\ns1,a,0,0,0,0,0\ns1,a,0,2,0,0,0\n"));
        assert!(load_canonical(&gap, &s).is_err());
    }

    #[test]
    fn malformed_number() {
        let dir = tempfile::tempdir().unwrap();
        let w = write(dir.path(), "w.csv", &format!("{WINDOWS_HEADER}\ns1,a,0,0,abc,0,0\n"));
        let s = write(dir.path(), "s.csv", &format!("{SUBJECTS_HEADER}\ns1,0,30,60,160\n"));
        assert!(matches!(load_canonical(&w, &s), Err(HarError::MalformedRow { row: 2, .. })));
    }
}
