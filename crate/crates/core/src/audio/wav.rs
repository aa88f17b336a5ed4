//! RIFF/WAVE reader and writer.
//!
//! Little-endian `RIFF`/`WAVE` containers with integer PCM (8/16/24/32-bit)
//! or IEEE float (32/64-bit) data. `WAVE_FORMAT_EXTENSIBLE` is resolved to its
//! sub-format. Unknown chunks are skipped by their declared size.

use std::path::Path;

use super::{AudioClip, AudioError};

const TAG_PCM: u16 = 1;
const TAG_FLOAT: u16 = 3;
const TAG_EXTENSIBLE: u16 = 0xFFFE;

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
    offset: usize,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn malformed(offset: usize, reason: impl Into<String>) -> AudioError {
    AudioError::MalformedHeader {
        offset,
        reason: reason.into(),
    }
}

/// Decodes a RIFF/WAVE byte buffer into a mono clip.
pub fn parse_wav(bytes: &[u8], source_id: &str) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 {
        return Err(malformed(0, "file shorter than the 12-byte RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed(0, "missing `RIFF` magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed(8, "missing `WAVE` form type"));
    }

    let mut format: Option<Format> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(malformed(pos, format!("fmt chunk of {size} bytes, need 16")));
                }
                if body + size > bytes.len() {
                    return Err(AudioError::TruncatedChunk {
                        offset: pos,
                        declared: size,
                        available: bytes.len() - body,
                    });
                }
                let mut tag = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let sample_rate = u32_at(bytes, body + 4);
                let bits = u16_at(bytes, body + 14);
                if tag == TAG_EXTENSIBLE {
                    if size < 40 {
                        return Err(malformed(pos, "extensible fmt chunk shorter than 40 bytes"));
                    }
                    tag = u16_at(bytes, body + 24);
                }
                if sample_rate == 0 {
                    return Err(AudioError::ZeroSampleRate { offset: body + 4 });
                }
                if channels == 0 {
                    return Err(malformed(body + 2, "zero channel count"));
                }
                format = Some(Format {
                    tag,
                    channels,
                    sample_rate,
                    bits,
                    offset: body,
                });
            }
            b"data" => {
                let fmt = format
                    .as_ref()
                    .ok_or_else(|| malformed(pos, "data chunk before fmt chunk"))?;
                let available = bytes.len() - body;
                if size > available {
                    return Err(AudioError::TruncatedChunk {
                        offset: pos,
                        declared: size,
                        available,
                    });
                }
                let samples = decode(fmt, &bytes[body..body + size])?;
                if samples.is_empty() {
                    return Err(malformed(pos, "data chunk holds no complete frame"));
                }
                return AudioClip::new(samples, fmt.sample_rate, source_id);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
    Err(malformed(pos.min(bytes.len()), "no data chunk found"))
}

fn decode(fmt: &Format, data: &[u8]) -> Result<Vec<f64>, AudioError> {
    let unsupported = || AudioError::UnsupportedEncoding {
        offset: fmt.offset,
        tag: fmt.tag,
        bits: fmt.bits,
    };
    let width = match (fmt.tag, fmt.bits) {
        (TAG_PCM, 8 | 16 | 24 | 32) | (TAG_FLOAT, 32 | 64) => fmt.bits as usize / 8,
        _ => return Err(unsupported()),
    };
    let decode_one = |b: &[u8]| -> f64 {
        match (fmt.tag, width) {
            (TAG_PCM, 1) => (b[0] as f64 - 128.0) / 128.0,
            (TAG_PCM, 2) => i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
            (TAG_PCM, 3) => {
                let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
                v as f64 / 8_388_608.0
            }
            (TAG_PCM, 4) => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
            (_, 4) => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            _ => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    };
    let channels = fmt.channels as usize;
    let frame = width * channels;
    let out: Vec<f64> = data
        .chunks_exact(frame)
        .map(|f| f.chunks_exact(width).map(decode_one).sum::<f64>() / channels as f64)
        .collect();
    if let Some(i) = out.iter().position(|x| !x.is_finite()) {
        return Err(malformed(fmt.offset, format!("non-finite float sample in frame {i}")));
    }
    Ok(out)
}

/// Sample encodings accepted by [`encode_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Pcm24,
    Float32,
}

/// Encodes a clip as a mono RIFF/WAVE buffer. Integer encodings clamp to the
/// representable range.
pub fn encode_wav(clip: &AudioClip, format: SampleFormat) -> Vec<u8> {
    let (tag, bits) = match format {
        SampleFormat::Pcm16 => (TAG_PCM, 16u16),
        SampleFormat::Pcm24 => (TAG_PCM, 24),
        SampleFormat::Float32 => (TAG_FLOAT, 32),
    };
    let width = bits as usize / 8;
    let data_len = clip.len() * width;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate().to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate() * width as u32).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &x in clip.samples() {
        match format {
            SampleFormat::Pcm16 => {
                let v = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            SampleFormat::Pcm24 => {
                let v = (x * 8_388_608.0).round().clamp(-8_388_608.0, 8_388_607.0) as i32;
                out.extend_from_slice(&v.to_le_bytes()[..3]);
            }
            SampleFormat::Float32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
        }
    }
    if data_len & 1 == 1 {
        out.push(0);
    }
    out
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| AudioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_wav(&bytes, &path.display().to_string())
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip, format: SampleFormat) -> Result<(), AudioError> {
    let path = path.as_ref();
    std::fs::write(path, encode_wav(clip, format)).map_err(|e| AudioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
