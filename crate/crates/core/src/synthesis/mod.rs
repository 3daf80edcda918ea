//! Audio rendering behind a backend trait, chapter assembly and voice
//! enrollment.

mod deterministic;
pub mod mock;
mod remote;
pub mod wav;

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use deterministic::{
    enrollment_voice_id, silence_samples, speech_samples, ssml_content, tone_frequency, DeterministicBackend,
    SsmlContent, AMPLITUDE, MS_PER_CHAR,
};
pub use remote::{RemoteBackend, DEFAULT_BACKOFF, DEFAULT_TIMEOUT};
pub use wav::{encode_wav, parse_wav, WavData, WavFormat};

use crate::script::{delivery, segment_ssml, CastMap, Chapter, ScriptError, SsmlOptions};
use crate::script::{PARAGRAPH_BREAK_MS, SEGMENT_BREAK_MS};

pub const DEFAULT_SAMPLE_RATE: u32 = 22050;
pub const SUPPORTED_SAMPLE_RATES: [u32; 4] = [16000, 22050, 24000, 44100];
pub const MIN_RATE: f64 = 0.5;
pub const MAX_RATE: f64 = 3.0;
pub const MIN_ENROLL_SECS: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum SynthesisError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed SSML: {0}")]
    MalformedSsml(String),
    #[error("backend rejected credentials (HTTP {0})")]
    AuthFailed(u16),
    #[error("backend rejected SSML: {0}")]
    BackendRejectedSsml(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: usize, last: String },
    #[error("request timed out")]
    Timeout,
    #[error("backend error: {0}")]
    Backend(String),
    #[error("enrollment audio is {seconds:.2} s, need at least 5 s")]
    AudioTooShort { seconds: f64 },
    #[error("bad audio: {0}")]
    BadAudio(String),
    #[error("clips have different sample rates ({0} and {1})")]
    MixedSampleRates(u32, u32),
    #[error("{clips} clips need {expected} gaps, got {actual}")]
    GapCount { clips: usize, expected: usize, actual: usize },
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<io::Error> for SynthesisError {
    fn from(e: io::Error) -> Self {
        SynthesisError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisRequest {
    pub ssml: String,
    pub voice_id: String,
    pub rate: f64,
    pub pitch: f64,
    pub sample_rate_hz: u32,
    pub emotion_style: Option<String>,
    /// Carried through to the clip for tracing.
    pub segment_id: String,
}

impl SynthesisRequest {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if !(MIN_RATE..=MAX_RATE).contains(&self.rate) {
            return Err(SynthesisError::InvalidRequest(format!(
                "rate {} outside [{MIN_RATE}, {MAX_RATE}]",
                self.rate
            )));
        }
        if !SUPPORTED_SAMPLE_RATES.contains(&self.sample_rate_hz) {
            return Err(SynthesisError::InvalidRequest(format!(
                "sample rate {} not one of {SUPPORTED_SAMPLE_RATES:?}",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioClip {
    pub samples: Vec<i16>,
    pub sample_rate_hz: u32,
    pub source_segment_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoiceOrigin {
    Builtin,
    Enrolled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoiceProfile {
    pub voice_id: String,
    pub origin: VoiceOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enrollment_audio_ref: Option<String>,
}

pub trait SynthesisBackend: Send + Sync {
    fn synthesize(&self, req: &SynthesisRequest) -> Result<AudioClip, SynthesisError>;
    /// Registers a WAV recording and returns the new voice id.
    fn enroll(&self, wav: &[u8]) -> Result<String, SynthesisError>;
    fn name(&self) -> &str;
}

/// Enrolls a recording and stores it as `<store>/<voice_id>.wav`.
pub fn enroll_voice(backend: &dyn SynthesisBackend, wav: &[u8], store: &Path) -> Result<VoiceProfile, SynthesisError> {
    let parsed = parse_wav(wav)?;
    if parsed.duration_secs() < MIN_ENROLL_SECS {
        return Err(SynthesisError::AudioTooShort {
            seconds: parsed.duration_secs(),
        });
    }
    let voice_id = backend.enroll(wav)?;
    if voice_id.is_empty() || voice_id.contains(['/', '\\']) || voice_id.starts_with('.') {
        return Err(SynthesisError::Backend(format!("unusable voice id {voice_id:?}")));
    }
    fs::create_dir_all(store)?;
    let name = format!("{voice_id}.wav");
    write_atomic(&store.join(&name), wav)?;
    Ok(VoiceProfile {
        voice_id,
        origin: VoiceOrigin::Enrolled,
        enrollment_audio_ref: Some(name),
    })
}

/// Writes via a sibling temp file and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Concatenates clips with `gaps_ms[i]` ms of silence between clip `i` and
/// clip `i + 1`. Returns the samples and their rate.
pub fn concat_clips(clips: &[AudioClip], gaps_ms: &[u64], default_rate: u32) -> Result<(Vec<i16>, u32), SynthesisError> {
    let expected = clips.len().saturating_sub(1);
    if gaps_ms.len() != expected {
        return Err(SynthesisError::GapCount {
            clips: clips.len(),
            expected,
            actual: gaps_ms.len(),
        });
    }
    let rate = clips.first().map_or(default_rate, |c| c.sample_rate_hz);
    if let Some(c) = clips.iter().find(|c| c.sample_rate_hz != rate) {
        return Err(SynthesisError::MixedSampleRates(rate, c.sample_rate_hz));
    }
    let total = clips.iter().map(|c| c.samples.len() as u64).sum::<u64>()
        + gaps_ms.iter().map(|&g| silence_samples(g, rate)).sum::<u64>();
    let mut out = Vec::with_capacity(total as usize);
    for (i, clip) in clips.iter().enumerate() {
        if i > 0 {
            out.resize(out.len() + silence_samples(gaps_ms[i - 1], rate) as usize, 0);
        }
        out.extend_from_slice(&clip.samples);
    }
    Ok((out, rate))
}

/// Writes the concatenation of `clips` as a WAV file; returns its sample count.
pub fn assemble_audio(clips: &[AudioClip], gaps_ms: &[u64], out_path: &Path) -> Result<u64, SynthesisError> {
    let (samples, rate) = concat_clips(clips, gaps_ms, DEFAULT_SAMPLE_RATE)?;
    write_atomic(out_path, &encode_wav(&samples, rate))?;
    Ok(samples.len() as u64)
}

/// Per-segment requests for a chapter plus the gaps between them: 200 ms
/// inside a paragraph, 500 ms between paragraphs.
pub fn chapter_requests(
    chapter: &Chapter,
    cast: &CastMap,
    opts: &SsmlOptions,
    sample_rate_hz: u32,
) -> Result<(Vec<SynthesisRequest>, Vec<u64>), SynthesisError> {
    let mut reqs = Vec::new();
    let mut gaps = Vec::new();
    for (p, para) in chapter.spoken_paragraphs().iter().enumerate() {
        for (s, seg) in para.iter().enumerate() {
            if !reqs.is_empty() {
                gaps.push(if s == 0 { PARAGRAPH_BREAK_MS } else { SEGMENT_BREAK_MS } as u64);
            }
            let d = delivery(seg, cast, opts)?;
            reqs.push(SynthesisRequest {
                ssml: segment_ssml(seg, cast, opts)?,
                voice_id: d.voice_id,
                rate: d.rate,
                pitch: d.pitch,
                sample_rate_hz,
                emotion_style: d.style,
                segment_id: format!("{}-p{:03}-s{:03}", chapter.file_stem(), p, s),
            });
        }
    }
    Ok((reqs, gaps))
}

/// Synthesizes a chapter segment by segment. Returns the WAV bytes and
/// the sample count.
pub fn render_chapter_wav(
    backend: &dyn SynthesisBackend,
    chapter: &Chapter,
    cast: &CastMap,
    opts: &SsmlOptions,
    sample_rate_hz: u32,
) -> Result<(Vec<u8>, u64), SynthesisError> {
    let (reqs, gaps) = chapter_requests(chapter, cast, opts, sample_rate_hz)?;
    let clips = reqs.iter().map(|r| backend.synthesize(r)).collect::<Result<Vec<_>, _>>()?;
    let (samples, _) = concat_clips(&clips, &gaps, sample_rate_hz)?;
    Ok((encode_wav(&samples, sample_rate_hz), samples.len() as u64))
}

/// [`render_chapter_wav`] written to `out_path`.
pub fn render_chapter(
    backend: &dyn SynthesisBackend,
    chapter: &Chapter,
    cast: &CastMap,
    opts: &SsmlOptions,
    sample_rate_hz: u32,
    out_path: &Path,
) -> Result<u64, SynthesisError> {
    let (wav, n) = render_chapter_wav(backend, chapter, cast, opts, sample_rate_hz)?;
    write_atomic(out_path, &wav)?;
    Ok(n)
}

/// Milliseconds of audio in `samples` at `rate`, rounded.
pub fn duration_ms(samples: u64, rate: u32) -> u64 {
    (samples as f64 * 1000.0 / rate as f64).round() as u64
}
