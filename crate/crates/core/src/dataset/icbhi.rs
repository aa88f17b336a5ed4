//! Adapter from the ICBHI corpus layout (flat directory of
//! `<patient>_<index>_<location>_<mode>_<equipment>.wav` files plus a
//! patient → diagnosis table) to a [`Manifest`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use super::{DatasetError, Diagnosis, Manifest, ManifestEntry};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    /// Non-audio files that were ignored.
    pub skipped: Vec<String>,
}

/// Leading decimal digits of a file name, e.g. `101` for `101_1b1_Al_sc_Meditron.wav`.
pub fn patient_id_from_name(name: &str) -> Option<u32> {
    let end = name.find(|c: char| !c.is_ascii_digit()).unwrap_or(name.len());
    name[..end].parse().ok().filter(|&p| p >= 1)
}

/// Parses `patient,diagnosis` lines (comma, tab or space separated). A first
/// line whose leading field is not a number is treated as a header.
pub fn parse_diagnosis_table(text: &str) -> Result<HashMap<u32, Diagnosis>, DatasetError> {
    let mut table = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty());
        let (Some(pid), Some(diag)) = (fields.next(), fields.next()) else {
            return Err(DatasetError::Parse {
                line: i as u64 + 1,
                message: format!("expected `patient,diagnosis`, got `{line}`"),
            });
        };
        let Ok(pid) = pid.parse::<u32>() else {
            if i == 0 {
                continue;
            }
            return Err(DatasetError::Parse {
                line: i as u64 + 1,
                message: format!("patient id `{pid}` is not an integer"),
            });
        };
        let d = diag
            .parse::<Diagnosis>()
            .map_err(|value| DatasetError::UnknownDiagnosis {
                line: i as u64 + 1,
                value,
            })?;
        if let Some(prev) = table.insert(pid, d) {
            if prev != d {
                return Err(DatasetError::PatientConflict {
                    patient: pid,
                    first: prev,
                    second: d,
                });
            }
        }
    }
    Ok(table)
}

fn filename_metadata(stem: &str) -> BTreeMap<String, String> {
    let parts: Vec<&str> = stem.split('_').collect();
    let mut meta = BTreeMap::new();
    if let [_, index, location, mode, equipment] = parts[..] {
        for (k, v) in [
            ("recording", index),
            ("chest_location", location),
            ("acquisition_mode", mode),
            ("equipment", equipment),
        ] {
            meta.insert(k.to_string(), v.to_string());
        }
    }
    meta
}

/// Builds a manifest from every `.wav` file directly inside `corpus_dir`, in
/// file-name order. Paths are stored absolute.
pub fn ingest_corpus(corpus_dir: &Path, diagnosis_table: &Path) -> Result<(Manifest, IngestReport), DatasetError> {
    let table_text = std::fs::read_to_string(diagnosis_table).map_err(|e| DatasetError::io(diagnosis_table, e))?;
    let table = parse_diagnosis_table(&table_text)?;
    let dir = corpus_dir.canonicalize().map_err(|e| DatasetError::io(corpus_dir, e))?;
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .map_err(|e| DatasetError::io(&dir, e))?
        .filter_map(Result::ok)
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    let wav_stems: BTreeSet<String> = names
        .iter()
        .filter_map(|n| {
            n.strip_suffix(".wav")
                .or_else(|| n.strip_suffix(".WAV"))
                .map(str::to_string)
        })
        .collect();

    let mut report = IngestReport::default();
    let mut entries = Vec::new();
    let mut missing = BTreeSet::new();
    for name in names {
        let Some(stem) = name.strip_suffix(".wav").or_else(|| name.strip_suffix(".WAV")) else {
            let companion = name.rsplit_once('.').is_some_and(|(s, _)| wav_stems.contains(s));
            if companion {
                log::debug!("skipping annotation file {name}");
            } else {
                log::warn!("skipping non-audio file {name}");
            }
            report.skipped.push(name);
            continue;
        };
        let pid = patient_id_from_name(stem).ok_or_else(|| DatasetError::UnmatchedFile(name.clone()))?;
        let Some(&diagnosis) = table.get(&pid) else {
            missing.insert(pid);
            continue;
        };
        entries.push(ManifestEntry {
            file_path: dir.join(&name).display().to_string(),
            patient_id: pid,
            diagnosis,
            metadata: filename_metadata(stem),
        });
    }
    if !missing.is_empty() {
        return Err(DatasetError::MissingPatients(missing.into_iter().collect()));
    }
    if entries.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok((Manifest::new(entries)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patient_numbers() {
        assert_eq!(patient_id_from_name("101_1b1_Al_sc_Meditron"), Some(101));
        assert_eq!(patient_id_from_name("7"), Some(7));
        assert_eq!(patient_id_from_name("notes"), None);
        assert_eq!(patient_id_from_name("0_x"), None);
    }

    #[test]
    fn diagnosis_table_formats() {
        let t = parse_diagnosis_table("patient,diagnosis\n101,URTI\n102\tHealthy\n\n103 copd\n").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[&103], Diagnosis::Copd);
        assert!(parse_diagnosis_table("101,Flu\n").is_err());
        assert!(parse_diagnosis_table("101,URTI\nx,URTI\n").is_err());
        assert!(parse_diagnosis_table("101,URTI\n101,COPD\n").is_err());
    }

    #[test]
    fn icbhi_name_metadata() {
        let m = filename_metadata("101_1b1_Al_sc_Meditron");
        assert_eq!(m["chest_location"], "Al");
        assert_eq!(m["equipment"], "Meditron");
        assert!(filename_metadata("101_x").is_empty());
    }
}
