use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::split::SplitMode;
use crate::error::{HarError, Result};
use crate::similarity::SimilarityKind;

pub const RESULTS_HEADER: &str = "dataset,method,sim_kind,split,subject_id,m,n_test,accuracy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Similarity-weighted boosting.
    Pml,
    /// Convnet trained on the most similar subjects.
    Pdl,
    /// Convnet trained on every training subject.
    Dl,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pml, Method::Pdl, Method::Dl];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pml => "PML",
            Method::Pdl => "PDL",
            Method::Dl => "DL",
        }
    }

    pub fn uses_similarity(self) -> bool {
        !matches!(self, Method::Dl)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = HarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PML" => Ok(Method::Pml),
            "PDL" => Ok(Method::Pdl),
            "DL" => Ok(Method::Dl),
            other => Err(HarError::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub dataset: String,
    pub method: Method,
    pub sim_kind: Option<SimilarityKind>,
    pub split: SplitMode,
    pub subject_id: String,
    pub m: Option<usize>,
    pub n_test: usize,
    pub accuracy: f64,
}

impl RunResult {
    /// Grouping key for `field`; absent values map to the empty string.
    pub fn key(&self, field: GroupField) -> String {
        match field {
            GroupField::Dataset => self.dataset.clone(),
            GroupField::Method => self.method.to_string(),
            GroupField::SimKind => self.sim_kind.map(|k| k.to_string()).unwrap_or_default(),
            GroupField::Split => self.split.to_string(),
            GroupField::Subject => self.subject_id.clone(),
            GroupField::M => self.m.map(|m| m.to_string()).unwrap_or_default(),
        }
    }
}

pub fn write_results<W: Write>(results: &[RunResult], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.dataset,
            r.method,
            r.sim_kind.map(|k| k.to_string()).unwrap_or_default(),
            r.split,
            r.subject_id,
            r.m.map(|m| m.to_string()).unwrap_or_default(),
            r.n_test,
            r.accuracy
        )?;
    }
    Ok(())
}

pub fn save_results(results: &[RunResult], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| HarError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_results(results, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| HarError::io(path, e))
}

/// Parses a results CSV; `origin` names the source in errors.
pub fn read_results<R: Read>(input: R, origin: &Path) -> Result<Vec<RunResult>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers().map_err(|e| HarError::csv(origin, e))?.clone();
    let found = headers.iter().collect::<Vec<_>>().join(",");
    if found != RESULTS_HEADER {
        return Err(HarError::HeaderMismatch {
            path: origin.to_path_buf(),
            expected: RESULTS_HEADER.to_string(),
            found,
        });
    }
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| HarError::csv(origin, e))?;
        let bad = |reason: String| HarError::malformed(origin, row + 1, reason);
        let optional = |s: &str| if s.trim().is_empty() { None } else { Some(s.trim().to_string()) };
        let accuracy: f64 = record[7].trim().parse().map_err(|e| bad(format!("accuracy: {e}")))?;
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(bad(format!("accuracy {accuracy} outside [0, 1]")));
        }
        out.push(RunResult {
            dataset: record[0].trim().to_string(),
            method: record[1].parse().map_err(|e: HarError| bad(e.to_string()))?,
            sim_kind: optional(&record[2])
                .map(|s| s.parse())
                .transpose()
                .map_err(|e: HarError| bad(e.to_string()))?,
            split: record[3].parse().map_err(|e: HarError| bad(e.to_string()))?,
            subject_id: record[4].trim().to_string(),
            m: optional(&record[5])
                .map(|s| s.parse())
                .transpose()
                .map_err(|e| bad(format!("m: {e}")))?,
            n_test: record[6].trim().parse().map_err(|e| bad(format!("n_test: {e}")))?,
            accuracy,
        });
    }
    Ok(out)
}

pub fn load_results(path: &Path) -> Result<Vec<RunResult>> {
    let file = std::fs::File::open(path).map_err(|e| HarError::io(path, e))?;
    read_results(file, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupField {
    Dataset,
    Method,
    SimKind,
    Split,
    Subject,
    M,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroRow {
    /// One value per requested group field, in request order.
    pub key: Vec<String>,
    pub accuracy: f64,
    pub n_subjects: usize,
}

/// Unweighted mean accuracy per group. Within a group each subject's results
/// (several `m` values for PDL) are averaged first, then subjects are
/// averaged. Rows are sorted by key.
pub fn macro_accuracy(results: &[RunResult], group_by: &[GroupField]) -> Result<Vec<MacroRow>> {
    if results.is_empty() {
        return Err(HarError::EmptyInput("results"));
    }
    let mut groups: BTreeMap<Vec<String>, BTreeMap<&str, (f64, usize)>> = BTreeMap::new();
    for r in results {
        let key = group_by.iter().map(|&f| r.key(f)).collect();
        let entry = groups.entry(key).or_default().entry(r.subject_id.as_str()).or_default();
        entry.0 += r.accuracy;
        entry.1 += 1;
    }
    Ok(groups
        .into_iter()
        .map(|(key, subjects)| {
            let n = subjects.len();
            let total: f64 = subjects.values().map(|(sum, count)| sum / *count as f64).sum();
            MacroRow {
                key,
                accuracy: total / n as f64,
                n_subjects: n,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(method: Method, subject: &str, m: Option<usize>, accuracy: f64) -> RunResult {
        RunResult {
            dataset: "d".into(),
            method,
            sim_kind: method.uses_similarity().then_some(SimilarityKind::PhysicalSensor),
            split: SplitMode::Hyb,
            subject_id: subject.into(),
            m,
            n_test: 10,
            accuracy,
        }
    }

    #[test]
    fn csv_round_trip() {
        let rs = vec![
            result(Method::Pml, "s1", None, 0.25),
            result(Method::Pdl, "s1", Some(10), 0.1 + 0.2),
            result(Method::Dl, "s2", None, 1.0),
        ];
        let mut buf = Vec::new();
        write_results(&rs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("d,DL,,HYB,s2,,10,1\n"));
        assert_eq!(read_results(buf.as_slice(), Path::new("r.csv")).unwrap(), rs);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let bad = format!("{RESULTS_HEADER}\nd,XYZ,,SI,s1,,3,0.5\n");
        assert!(read_results(bad.as_bytes(), Path::new("r")).is_err());
        let bad = format!("{RESULTS_HEADER}\nd,DL,,SI,s1,,3,1.5\n");
        assert!(read_results(bad.as_bytes(), Path::new("r")).is_err());
        assert!(read_results("a,b\n".as_bytes(), Path::new("r")).is_err());
    }

    #[test]
    fn macro_averages() {
        let single = [result(Method::Pml, "s1", None, 0.7)];
        assert_eq!(macro_accuracy(&single, &[]).unwrap()[0].accuracy, 0.7);
        let two = [result(Method::Pml, "s1", None, 0.4), result(Method::Pml, "s2", None, 0.6)];
        assert!((macro_accuracy(&two, &[GroupField::Method]).unwrap()[0].accuracy - 0.5).abs() < 1e-15);
        assert!(macro_accuracy(&[], &[]).is_err());
    }

    #[test]
    fn pdl_averages_over_m_before_subjects() {
        let rs = [
            result(Method::Pdl, "s1", Some(10), 0.2),
            result(Method::Pdl, "s1", Some(15), 0.4),
            result(Method::Pdl, "s1", Some(19), 0.6),
            result(Method::Pdl, "s2", Some(10), 1.0),
        ];
        let rows = macro_accuracy(&rs, &[GroupField::Method]).unwrap();
        assert!((rows[0].accuracy - 0.7).abs() < 1e-15);
        assert_eq!(rows[0].n_subjects, 2);
    }
}
