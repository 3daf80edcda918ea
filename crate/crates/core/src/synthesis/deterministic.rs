use std::f64::consts::PI;

use super::wav::parse_wav;
use super::{AudioClip, SynthesisBackend, SynthesisError, SynthesisRequest, MIN_ENROLL_SECS};
use crate::dom::collapse_whitespace;
use crate::hash::fnv1a64;
use crate::hash::fnv1a64_str;

pub const MS_PER_CHAR: f64 = 60.0;
pub const AMPLITUDE: f64 = 0.2;

/// Test backend: a sine tone whose length follows the text length.
#[derive(Debug, Clone, Copy, Default)]
pub struct DeterministicBackend;

/// Spoken text and pauses of an SSML document.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SsmlContent {
    /// Characters of every text node after whitespace collapsing and
    /// trimming, summed.
    pub chars: usize,
    pub breaks_ms: Vec<u64>,
}

fn parse_break_time(t: &str) -> Option<u64> {
    let t = t.trim();
    let (num, scale) = if let Some(ms) = t.strip_suffix("ms") {
        (ms, 1.0)
    } else if let Some(s) = t.strip_suffix('s') {
        (s, 1000.0)
    } else {
        return None;
    };
    let v: f64 = num.trim().parse().ok()?;
    (v.is_finite() && v >= 0.0).then(|| (v * scale).round() as u64)
}

pub fn ssml_content(ssml: &str) -> Result<SsmlContent, SynthesisError> {
    let doc = roxmltree::Document::parse(ssml).map_err(|e| SynthesisError::MalformedSsml(e.to_string()))?;
    if doc.root_element().tag_name().name() != "speak" {
        return Err(SynthesisError::MalformedSsml("root element is not <speak>".into()));
    }
    let mut content = SsmlContent::default();
    for node in doc.descendants() {
        if node.is_text() {
            content.chars += collapse_whitespace(node.text().unwrap_or("")).chars().count();
        } else if node.is_element() && node.tag_name().name() == "break" {
            let t = node.attribute("time").unwrap_or("0ms");
            let ms = parse_break_time(t)
                .ok_or_else(|| SynthesisError::MalformedSsml(format!("bad break time {t:?}")))?;
            content.breaks_ms.push(ms);
        }
    }
    Ok(content)
}

/// Samples for `chars` characters at `rate`, before pauses.
pub fn speech_samples(chars: usize, rate: f64, sample_rate: u32) -> u64 {
    (MS_PER_CHAR * chars as f64 * sample_rate as f64 / (1000.0 * rate)).round() as u64
}

pub fn silence_samples(ms: u64, sample_rate: u32) -> u64 {
    (ms as f64 * sample_rate as f64 / 1000.0).round() as u64
}

pub fn tone_frequency(voice_id: &str) -> f64 {
    110.0 + (fnv1a64_str(voice_id) % 880) as f64
}

impl DeterministicBackend {
    pub fn render(&self, req: &SynthesisRequest) -> Result<AudioClip, SynthesisError> {
        req.validate()?;
        let content = ssml_content(&req.ssml)?;
        let sr = req.sample_rate_hz;
        let n = speech_samples(content.chars, req.rate, sr)
            + content.breaks_ms.iter().map(|&ms| silence_samples(ms, sr)).sum::<u64>();
        let freq = tone_frequency(&req.voice_id);
        let step = 2.0 * PI * freq / sr as f64;
        let samples = (0..n)
            .map(|i| (AMPLITUDE * i16::MAX as f64 * (step * i as f64).sin()).round() as i16)
            .collect();
        Ok(AudioClip {
            samples,
            sample_rate_hz: sr,
            source_segment_id: req.segment_id.clone(),
        })
    }
}

/// Voice id for enrolled audio: `enrolled-` plus the first 8 hex digits of
/// FNV-1a over the WAV data chunk.
pub fn enrollment_voice_id(wav: &[u8]) -> Result<String, SynthesisError> {
    let parsed = parse_wav(wav)?;
    if parsed.duration_secs() < MIN_ENROLL_SECS {
        return Err(SynthesisError::AudioTooShort {
            seconds: parsed.duration_secs(),
        });
    }
    Ok(format!("enrolled-{}", &format!("{:016x}", fnv1a64(&parsed.data))[..8]))
}

impl SynthesisBackend for DeterministicBackend {
    fn synthesize(&self, req: &SynthesisRequest) -> Result<AudioClip, SynthesisError> {
        self.render(req)
    }

    fn enroll(&self, wav: &[u8]) -> Result<String, SynthesisError> {
        enrollment_voice_id(wav)
    }

    fn name(&self) -> &str {
        "deterministic"
    }
}
