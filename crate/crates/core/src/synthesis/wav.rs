//! Canonical RIFF/WAVE, PCM 16-bit mono.
//!
//! Layout written (all integers little-endian):
//!
//! | offset | bytes | value                         |
//! |--------|-------|-------------------------------|
//! | 0      | 4     | `RIFF`                        |
//! | 4      | 4     | 36 + data size                |
//! | 8      | 4     | `WAVE`                        |
//! | 12     | 4     | `fmt `                        |
//! | 16     | 4     | 16                            |
//! | 20     | 2     | 1 (PCM)                       |
//! | 22     | 2     | 1 (channels)                  |
//! | 24     | 4     | sample rate                   |
//! | 28     | 4     | sample rate * 2 (byte rate)   |
//! | 32     | 2     | 2 (block align)               |
//! | 34     | 2     | 16 (bits per sample)          |
//! | 36     | 4     | `data`                        |
//! | 40     | 4     | data size = 2 * sample count  |
//! | 44     | ...   | samples                       |

use super::SynthesisError;

pub const HEADER_LEN: usize = 44;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavFormat {
    pub audio_format: u16,
    pub channels: u16,
    pub sample_rate: u32,
    pub byte_rate: u32,
    pub block_align: u16,
    pub bits_per_sample: u16,
}

impl WavFormat {
    pub fn pcm16_mono(sample_rate: u32) -> WavFormat {
        WavFormat {
            audio_format: 1,
            channels: 1,
            sample_rate,
            byte_rate: sample_rate * 2,
            block_align: 2,
            bits_per_sample: 16,
        }
    }
}

/// A parsed WAV file: its format chunk and the raw bytes of its data chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WavData {
    pub format: WavFormat,
    pub data: Vec<u8>,
}

impl WavData {
    /// Samples, when the format is PCM16 mono.
    pub fn samples(&self) -> Result<Vec<i16>, SynthesisError> {
        if self.format != WavFormat::pcm16_mono(self.format.sample_rate) {
            return Err(SynthesisError::BadAudio("only PCM 16-bit mono is supported".into()));
        }
        Ok(pcm16_from_bytes(&self.data))
    }

    pub fn duration_secs(&self) -> f64 {
        if self.format.byte_rate == 0 {
            return 0.0;
        }
        self.data.len() as f64 / self.format.byte_rate as f64
    }
}

pub fn pcm16_from_bytes(bytes: &[u8]) -> Vec<i16> {
    bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect()
}

pub fn encode_wav(samples: &[i16], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(HEADER_LEN + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses a RIFF/WAVE file, walking its chunks. Unknown chunks are skipped.
pub fn parse_wav(bytes: &[u8]) -> Result<WavData, SynthesisError> {
    let bad = |m: &str| SynthesisError::BadAudio(m.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("not a RIFF/WAVE file"));
    }
    let mut format = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("chunk overruns file"))?;
        match id {
            b"fmt " => {
                if len < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                format = Some(WavFormat {
                    audio_format: u16_at(bytes, body),
                    channels: u16_at(bytes, body + 2),
                    sample_rate: u32_at(bytes, body + 4),
                    byte_rate: u32_at(bytes, body + 8),
                    block_align: u16_at(bytes, body + 12),
                    bits_per_sample: u16_at(bytes, body + 14),
                });
            }
            b"data" => {
                let format = format.ok_or_else(|| bad("data chunk before fmt chunk"))?;
                return Ok(WavData {
                    format,
                    data: bytes[body..end].to_vec(),
                });
            }
            _ => {}
        }
        // chunks are padded to even length
        pos = end + (len & 1);
    }
    Err(bad("no data chunk"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let w = encode_wav(&[1, -2, 3], 22050);
        let mut expected = Vec::new();
        expected.extend_from_slice(b"RIFF");
        expected.extend_from_slice(&[42, 0, 0, 0]);
        expected.extend_from_slice(b"WAVEfmt ");
        expected.extend_from_slice(&[16, 0, 0, 0, 1, 0, 1, 0]);
        expected.extend_from_slice(&[0x22, 0x56, 0, 0]);
        expected.extend_from_slice(&[0x44, 0xAC, 0, 0]);
        expected.extend_from_slice(&[2, 0, 16, 0]);
        expected.extend_from_slice(b"data");
        expected.extend_from_slice(&[6, 0, 0, 0]);
        expected.extend_from_slice(&[1, 0, 0xFE, 0xFF, 3, 0]);
        assert_eq!(w, expected);
    }

    #[test]
    fn parse_round_trip_and_extra_chunks() {
        let w = encode_wav(&[5, 6], 16000);
        let parsed = parse_wav(&w).unwrap();
        assert_eq!(parsed.format, WavFormat::pcm16_mono(16000));
        assert_eq!(parsed.samples().unwrap(), [5, 6]);

        // insert an odd-sized LIST chunk (with pad byte) before data
        let mut with_list = w[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[b'a', b'b', b'c', 0]);
        with_list.extend_from_slice(&w[36..]);
        assert_eq!(parse_wav(&with_list).unwrap().samples().unwrap(), [5, 6]);

        assert!(parse_wav(b"RIFF\0\0\0\0WAVE").is_err());
        assert!(parse_wav(&w[..42]).is_err());
        assert!(parse_wav(b"not audio").is_err());
    }

    #[test]
    fn empty_file() {
        let w = encode_wav(&[], 22050);
        assert_eq!(w.len(), HEADER_LEN);
        assert_eq!(parse_wav(&w).unwrap().data.len(), 0);
    }
}
