use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::{Path, PathBuf};

use super::{DatasetError, Diagnosis};
use crate::NUM_CLASSES;

const REQUIRED: [&str; 3] = ["file_path", "patient_id", "diagnosis"];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub file_path: String,
    pub patient_id: u32,
    pub diagnosis: Diagnosis,
    pub metadata: BTreeMap<String, String>,
}

/// Ordered, validated list of labeled recordings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    entries: Vec<ManifestEntry>,
    /// Directory that relative `file_path`s resolve against.
    base_dir: Option<PathBuf>,
}

impl Manifest {
    /// Validates paths, patient ids and per-patient label consistency.
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, DatasetError> {
        let mut paths = BTreeSet::new();
        let mut labels: HashMap<u32, Diagnosis> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            let line = i as u64 + 2;
            if e.file_path.trim().is_empty() {
                return Err(DatasetError::Parse {
                    line,
                    message: "empty file_path".into(),
                });
            }
            if e.patient_id == 0 {
                return Err(DatasetError::Parse {
                    line,
                    message: "patient_id must be >= 1".into(),
                });
            }
            if !paths.insert(e.file_path.as_str()) {
                return Err(DatasetError::DuplicatePath {
                    line,
                    path: e.file_path.clone(),
                });
            }
            let first = *labels.entry(e.patient_id).or_insert(e.diagnosis);
            if first != e.diagnosis {
                return Err(DatasetError::PatientConflict {
                    patient: e.patient_id,
                    first,
                    second: e.diagnosis,
                });
            }
        }
        Ok(Self {
            entries,
            base_dir: None,
        })
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    pub fn base_dir(&self) -> Option<&Path> {
        self.base_dir.as_deref()
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Location of an entry's audio file.
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.file_path);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn patients(&self) -> BTreeSet<u32> {
        self.entries.iter().map(|e| e.patient_id).collect()
    }

    /// Parses comma-separated text with a header naming at least
    /// `file_path`, `patient_id` and `diagnosis`. Other columns become
    /// metadata; empty metadata cells are dropped.
    pub fn from_reader(reader: impl Read) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| DatasetError::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DatasetError::Parse {
                    line: 1,
                    message: format!("header lacks `{name}` column"),
                })
        };
        let (ci_path, ci_pid, ci_diag) = (col(REQUIRED[0])?, col(REQUIRED[1])?, col(REQUIRED[2])?);

        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| DatasetError::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let patient_id = rec[ci_pid].parse::<u32>().map_err(|_| DatasetError::Parse {
                line,
                message: format!("patient_id `{}` is not a positive integer", &rec[ci_pid]),
            })?;
            let diagnosis = rec[ci_diag]
                .parse::<Diagnosis>()
                .map_err(|value| DatasetError::UnknownDiagnosis { line, value })?;
            let metadata = headers
                .iter()
                .zip(rec.iter())
                .enumerate()
                .filter(|(i, (_, v))| ![ci_path, ci_pid, ci_diag].contains(i) && !v.is_empty())
                .map(|(_, (k, v))| (k.to_string(), v.to_string()))
                .collect();
            entries.push(ManifestEntry {
                file_path: rec[ci_path].to_string(),
                patient_id,
                diagnosis,
                metadata,
            });
        }
        Self::new(entries)
    }

    /// Reads a manifest file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let file = std::fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
        let m = Self::from_reader(file)?;
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        Ok(m.with_base_dir(dir))
    }

    /// Comma-separated text with metadata keys as extra columns in sorted order.
    pub fn to_csv(&self) -> String {
        let keys: BTreeSet<&str> = self
            .entries
            .iter()
            .flat_map(|e| e.metadata.keys().map(String::as_str))
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = REQUIRED.iter().copied().chain(keys.iter().copied()).collect();
        w.write_record(&header).expect("in-memory write");
        for e in &self.entries {
            let mut row = vec![
                e.file_path.clone(),
                e.patient_id.to_string(),
                e.diagnosis.name().to_string(),
            ];
            row.extend(keys.iter().map(|k| e.metadata.get(*k).cloned().unwrap_or_default()));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 fields")
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_csv()).map_err(|e| DatasetError::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    pub counts: [usize; NUM_CLASSES],
    pub fractions: [f64; NUM_CLASSES],
    pub total: usize,
}

impl ClassDistribution {
    pub fn from_labels(labels: impl IntoIterator<Item = Diagnosis>) -> Result<Self, DatasetError> {
        let mut counts = [0usize; NUM_CLASSES];
        for d in labels {
            counts[d.code()] += 1;
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(DatasetError::Empty);
        }
        let fractions = counts.map(|c| c as f64 / total as f64);
        Ok(Self {
            counts,
            fractions,
            total,
        })
    }

    /// Most frequent class; ties go to the lowest code.
    pub fn modal_class(&self) -> Diagnosis {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        Diagnosis::ALL[best]
    }

    pub fn majority_fraction(&self) -> f64 {
        self.fractions[self.modal_class().code()]
    }
}

pub fn class_distribution(m: &Manifest) -> Result<ClassDistribution, DatasetError> {
    ClassDistribution::from_labels(m.entries().iter().map(|e| e.diagnosis))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Manifest, DatasetError> {
        Manifest::from_reader(text.as_bytes())
    }

    #[test]
    fn three_rows_two_classes() {
        let m = load("file_path,patient_id,diagnosis\na.wav,1,COPD\nb.wav,2,Healthy\nc.wav,3,copd\n").unwrap();
        assert_eq!(m.len(), 3);
        let d = class_distribution(&m).unwrap();
        assert_eq!(d.counts.iter().filter(|&&c| c > 0).count(), 2);
        assert_eq!(d.fractions[Diagnosis::Copd.code()], 2.0 / 3.0);
        assert_eq!(d.fractions[Diagnosis::Healthy.code()], 1.0 / 3.0);
        assert_eq!(d.modal_class(), Diagnosis::Copd);
    }

    #[test]
    fn unknown_class_names_the_row() {
        let err = load("file_path,patient_id,diagnosis\na.wav,1,COPD\nb.wav,2,Flu\n").unwrap_err();
        assert_eq!(
            err,
            DatasetError::UnknownDiagnosis {
                line: 3,
                value: "Flu".into()
            }
        );
    }

    #[test]
    fn patient_conflict_and_duplicates() {
        let err = load("file_path,patient_id,diagnosis\na.wav,7,COPD\nb.wav,7,Healthy\n").unwrap_err();
        assert!(matches!(err, DatasetError::PatientConflict { patient: 7, .. }));
        let err = load("file_path,patient_id,diagnosis\na.wav,7,COPD\na.wav,8,COPD\n").unwrap_err();
        assert!(matches!(err, DatasetError::DuplicatePath { .. }));
        assert!(load("file_path,patient_id,diagnosis\na.wav,0,COPD\n").is_err());
        assert!(load("file_path,patient_id,diagnosis\na.wav,x,COPD\n").is_err());
        assert!(load("path,patient_id,diagnosis\na.wav,1,COPD\n").is_err());
    }

    #[test]
    fn metadata_round_trips() {
        let text = "patient_id,file_path,diagnosis,location,mode\n1,a.wav,URTI,Tc,sc\n2,b.wav,LRTI,,mc\n";
        let m = load(text).unwrap();
        assert_eq!(m.entries()[0].metadata["location"], "Tc");
        assert!(!m.entries()[1].metadata.contains_key("location"));
        let back = load(&m.to_csv()).unwrap();
        assert_eq!(back, m);
        assert!(m.to_csv().starts_with("file_path,patient_id,diagnosis,location,mode\n"));
    }

    #[test]
    fn balanced_distribution() {
        let rows: String = Diagnosis::ALL
            .iter()
            .enumerate()
            .map(|(i, d)| format!("f{i}.wav,{},{}\n", i + 1, d))
            .collect();
        let m = load(&format!("file_path,patient_id,diagnosis\n{rows}")).unwrap();
        let d = class_distribution(&m).unwrap();
        assert!(d.fractions.iter().all(|&f| f == 0.125));
        assert_eq!(d.majority_fraction(), 0.125);
        assert!((d.fractions.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert_eq!(class_distribution(&Manifest::default()), Err(DatasetError::Empty));
    }

    #[test]
    fn relative_paths_resolve_against_base() {
        let m = load("file_path,patient_id,diagnosis\na.wav,1,COPD\n/abs/b.wav,2,COPD\n")
            .unwrap()
            .with_base_dir("/data");
        assert_eq!(m.resolve(&m.entries()[0]), PathBuf::from("/data/a.wav"));
        assert_eq!(m.resolve(&m.entries()[1]), PathBuf::from("/abs/b.wav"));
    }
}
