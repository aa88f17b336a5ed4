use std::collections::BTreeMap;

use super::{AugmentError, AugmentSpec, NoiseSource};
use crate::audio::AudioClip;
use crate::dataset::Diagnosis;
use crate::NUM_CLASSES;

struct Line<'a> {
    number: usize,
    fields: BTreeMap<&'a str, &'a str>,
}

impl<'a> Line<'a> {
    fn err(&self, message: impl Into<String>) -> AugmentError {
        AugmentError::Plan {
            line: self.number,
            message: message.into(),
        }
    }

    fn take(&mut self, key: &str) -> Result<&'a str, AugmentError> {
        self.fields
            .remove(key)
            .ok_or_else(|| self.err(format!("missing `{key}`")))
    }

    fn num(&mut self, key: &str) -> Result<f64, AugmentError> {
        let v = self.take(key)?;
        v.parse().map_err(|_| self.err(format!("`{key}={v}` is not a number")))
    }

    fn finish(self, spec: AugmentSpec) -> Result<AugmentSpec, AugmentError> {
        match self.fields.keys().next() {
            Some(k) => Err(self.err(format!("unknown key `{k}` for {}", spec.name()))),
            None => Ok(spec),
        }
    }
}

/// Parses one spec per line (`transform=name key=value ...`); blank lines and
/// `#` comments are ignored. `load_noise` resolves `noise=<path>` values.
pub fn parse_plan(
    text: &str,
    mut load_noise: impl FnMut(&str) -> Result<AudioClip, AugmentError>,
) -> Result<Vec<AugmentSpec>, AugmentError> {
    let mut specs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or_default().trim();
        if body.is_empty() {
            continue;
        }
        let mut line = Line {
            number: i + 1,
            fields: BTreeMap::new(),
        };
        for tok in body.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| line.err(format!("`{tok}` is not key=value")))?;
            if line.fields.insert(k, v).is_some() {
                return Err(line.err(format!("duplicate key `{k}`")));
            }
        }
        let spec = match line.take("transform")? {
            "time_stretch" => AugmentSpec::TimeStretch {
                rate: line.num("rate")?,
            },
            "pitch_shift" => AugmentSpec::PitchShift {
                semitones: line.num("semitones")?,
            },
            "noise_mix" => {
                let snr_db = line.num("snr_db")?;
                let noise = match line.take("noise")? {
                    "white" => {
                        let v = line.take("seed")?;
                        let seed = v
                            .parse()
                            .map_err(|_| line.err(format!("`seed={v}` is not an integer")))?;
                        NoiseSource::White { seed }
                    }
                    path => NoiseSource::Clip(load_noise(path).map_err(|e| line.err(e.to_string()))?),
                };
                AugmentSpec::NoiseMix { snr_db, noise }
            }
            "compress" => AugmentSpec::DynRangeCompress {
                threshold_db: line.num("threshold_db")?,
                ratio: line.num("ratio")?,
            },
            "time_shift" => {
                let offset_s = line.num("offset_s")?;
                let circular = match line.fields.remove("circular").unwrap_or("false") {
                    "true" => true,
                    "false" => false,
                    other => return Err(line.err(format!("`circular={other}` must be true or false"))),
                };
                AugmentSpec::TimeShift { offset_s, circular }
            }
            "subsample" => {
                let list = line.take("offsets_s")?;
                let offsets_s = list
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(|_| line.err(format!("`offsets_s={list}` is not a number list")))?;
                AugmentSpec::SubsampleWindows {
                    offsets_s,
                    duration_s: line.num("duration_s")?,
                }
            }
            other => return Err(line.err(format!("unknown transform `{other}`"))),
        };
        specs.push(line.finish(spec)?);
    }
    Ok(specs)
}

pub fn format_plan(specs: &[AugmentSpec]) -> String {
    specs.iter().map(|s| format!("{s}\n")).collect()
}

/// Oversampling plan that brings every present class up to the modal count.
///
/// Members of a short class are cycled in order; the first pass over them
/// uses `pool[0]`, the second `pool[1]`, and so on. Returns
/// `(example index, spec)` pairs.
pub fn balance_plan(labels: &[Diagnosis], pool: &[AugmentSpec]) -> Result<Vec<(usize, AugmentSpec)>, AugmentError> {
    if pool.is_empty() {
        return Err(AugmentError::Param("balance plan needs at least one transform".into()));
    }
    let mut members: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, d) in labels.iter().enumerate() {
        members[d.code()].push(i);
    }
    let target = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut plan = Vec::new();
    for m in members.iter().filter(|m| !m.is_empty()) {
        for j in 0..target - m.len() {
            plan.push((m[j % m.len()], pool[(j / m.len()) % pool.len()].clone()));
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_files(p: &str) -> Result<AudioClip, AugmentError> {
        Err(AugmentError::Param(format!("no file {p}")))
    }

    #[test]
    fn parses_every_transform_and_round_trips() {
        let text = "# expansion plan\n\
            transform=time_stretch rate=1.1\n\
            transform=pitch_shift semitones=-2\n\
            \n\
            transform=noise_mix snr_db=20 noise=white seed=4  # hiss\n\
            transform=compress threshold_db=-20 ratio=4\n\
            transform=time_shift offset_s=0.25 circular=true\n\
            transform=subsample offsets_s=0,1,2.5 duration_s=1\n";
        let specs = parse_plan(text, no_files).unwrap();
        assert_eq!(specs.len(), 6);
        assert_eq!(specs[0], AugmentSpec::TimeStretch { rate: 1.1 });
        assert_eq!(
            specs[5],
            AugmentSpec::SubsampleWindows {
                offsets_s: vec![0.0, 1.0, 2.5],
                duration_s: 1.0
            }
        );
        assert_eq!(parse_plan(&format_plan(&specs), no_files).unwrap(), specs);
    }

    #[test]
    fn noise_files_go_through_loader() {
        let specs = parse_plan("transform=noise_mix snr_db=5 noise=hum.wav", |p| {
            Ok(AudioClip::new(vec![0.1, -0.1], 4000, p).unwrap())
        })
        .unwrap();
        assert_eq!(specs[0].to_string(), "transform=noise_mix snr_db=5 noise=hum.wav");
        assert!(parse_plan("transform=noise_mix snr_db=5 noise=hum.wav", no_files).is_err());
    }

    #[test]
    fn plan_errors_name_the_line() {
        for (text, line) in [
            ("transform=warp x=1", 1),
            ("\ntransform=time_stretch", 2),
            ("transform=time_stretch rate=fast", 1),
            ("transform=time_stretch rate=1 extra=2", 1),
            ("rate=1", 1),
            ("transform=time_shift offset_s=1 circular=maybe", 1),
            ("transform", 1),
        ] {
            match parse_plan(text, no_files) {
                Err(AugmentError::Plan { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn balance_fills_to_the_mode() {
        use Diagnosis::*;
        let labels = [Copd, Copd, Copd, Copd, Copd, Urti, Urti, Healthy];
        let pool = [
            AugmentSpec::TimeShift {
                offset_s: 0.1,
                circular: true,
            },
            AugmentSpec::PitchShift { semitones: 1.0 },
        ];
        let plan = balance_plan(&labels, &pool).unwrap();
        let count = |d: Diagnosis| {
            labels.iter().filter(|&&l| l == d).count() + plan.iter().filter(|(i, _)| labels[*i] == d).count()
        };
        assert_eq!((count(Copd), count(Urti), count(Healthy)), (5, 5, 5));
        assert_eq!(count(Asthma), 0);
        let healthy: Vec<&AugmentSpec> = plan.iter().filter(|(i, _)| *i == 7).map(|(_, s)| s).collect();
        assert_eq!(healthy, vec![&pool[0], &pool[1], &pool[0], &pool[1]]);
        assert!(balance_plan(&labels, &[]).is_err());
    }
}
