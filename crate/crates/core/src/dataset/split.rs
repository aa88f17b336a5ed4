use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, Diagnosis, Manifest};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let f = [self.train, self.validation, self.test];
        if f.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(DatasetError::Fractions(format!("{self} has a non-positive fraction")));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DatasetError::Fractions(format!("{self} does not sum to 1")));
        }
        Ok(())
    }

    /// Subset sizes for `n` items: each set gets the floor of its quota and
    /// the leftover items go to the largest fractional remainders (earlier
    /// subsets win ties). Every size is within one item of its quota.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let quotas = [self.train, self.validation, self.test].map(|f| f * n as f64);
        let mut sizes = quotas.map(|q| (q + 1e-9).floor() as usize);
        let mut left = n.saturating_sub(sizes.iter().sum());
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - sizes[a] as f64;
            let rb = quotas[b] - sizes[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            sizes[i] += 1;
            left -= 1;
        }
        sizes
    }
}

impl fmt::Display for SplitFractions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.train, self.validation, self.test)
    }
}

impl FromStr for SplitFractions {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self, DatasetError> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| DatasetError::Fractions(format!("`{s}` is not three comma-separated numbers")))?;
        let [train, validation, test] = parts[..] else {
            return Err(DatasetError::Fractions(format!("`{s}` needs exactly three fractions")));
        };
        let f = Self {
            train,
            validation,
            test,
        };
        f.validate()?;
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    #[default]
    BySample,
    /// Whole patients are assigned to one subset; fractions count patients.
    ByPatient,
}

impl FromStr for Grouping {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self, DatasetError> {
        match s.to_ascii_lowercase().as_str() {
            "sample" | "by_sample" => Ok(Grouping::BySample),
            "patient" | "by_patient" => Ok(Grouping::ByPatient),
            other => Err(DatasetError::Fractions(format!("unknown grouping `{other}`"))),
        }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grouping::BySample => "sample",
            Grouping::ByPatient => "patient",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub fractions: SplitFractions,
    pub grouping: Grouping,
    /// Split each class separately so subsets keep the class proportions.
    pub stratify: bool,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            fractions: SplitFractions::default(),
            grouping: Grouping::default(),
            stratify: false,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    Train,
    Validation,
    Test,
}

impl FromStr for Subset {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self, DatasetError> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Subset::Train),
            "val" | "validation" => Ok(Subset::Validation),
            "test" => Ok(Subset::Test),
            other => Err(DatasetError::Fractions(format!("unknown subset `{other}`"))),
        }
    }
}

/// Disjoint, sorted manifest-index sets covering every entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl SplitAssignment {
    pub fn subset(&self, s: Subset) -> &[usize] {
        match s {
            Subset::Train => &self.train,
            Subset::Validation => &self.validation,
            Subset::Test => &self.test,
        }
    }
}

/// Seeded shuffle of the grouping units, then partition by [`SplitFractions::sizes`].
pub fn split(m: &Manifest, cfg: &SplitConfig) -> Result<SplitAssignment, DatasetError> {
    cfg.fractions.validate()?;
    if m.len() < 3 {
        return Err(DatasetError::TooFew { n: m.len(), needed: 3 });
    }
    // grouping units (single entries or whole patients), keyed for stable order
    let mut units: BTreeMap<u64, (Diagnosis, Vec<usize>)> = BTreeMap::new();
    for (i, e) in m.entries().iter().enumerate() {
        let key = match cfg.grouping {
            Grouping::BySample => i as u64,
            Grouping::ByPatient => e.patient_id as u64,
        };
        units.entry(key).or_insert((e.diagnosis, Vec::new())).1.push(i);
    }
    let strata: Vec<Vec<&Vec<usize>>> = if cfg.stratify {
        Diagnosis::ALL
            .iter()
            .map(|d| {
                units
                    .values()
                    .filter(|(u, _)| u == d)
                    .map(|(_, v)| v)
                    .collect::<Vec<_>>()
            })
            .filter(|s| !s.is_empty())
            .collect()
    } else {
        vec![units.values().map(|(_, v)| v).collect()]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    for mut stratum in strata {
        stratum.shuffle(&mut rng);
        let sizes = cfg.fractions.sizes(stratum.len());
        let mut it = stratum.into_iter();
        for (set, &k) in out.iter_mut().zip(&sizes) {
            for unit in it.by_ref().take(k) {
                set.extend(unit);
            }
        }
    }
    for set in &mut out {
        set.sort_unstable();
    }
    let [train, validation, test] = out;
    Ok(SplitAssignment {
        train,
        validation,
        test,
        seed: cfg.seed,
    })
}
