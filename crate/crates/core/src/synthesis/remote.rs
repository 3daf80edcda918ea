use std::thread;
use std::time::{Duration, Instant};

use ureq::Agent;

use super::wav::{parse_wav, pcm16_from_bytes};
use super::{AudioClip, SynthesisBackend, SynthesisError, SynthesisRequest};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
pub const DEFAULT_BACKOFF: [Duration; 3] = [Duration::from_secs(1), Duration::from_secs(2), Duration::from_secs(4)];
const MAX_RESPONSE_BYTES: u64 = 512 * 1024 * 1024;

/// HTTP synthesis backend. See `docs/remote-backend.md` for the contract.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    pub endpoint: String,
    pub token: String,
    /// Deadline for one request including all retries.
    pub timeout: Duration,
    /// Wait before each retry; its length is the retry limit.
    pub backoff: Vec<Duration>,
    agent: Agent,
}

enum Attempt {
    Done(Vec<u8>, Option<String>),
    Retry(String),
}

impl RemoteBackend {
    pub fn new(endpoint: &str, token: &str) -> RemoteBackend {
        let agent: Agent = Agent::config_builder().http_status_as_error(false).build().into();
        RemoteBackend {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            token: token.to_string(),
            timeout: DEFAULT_TIMEOUT,
            backoff: DEFAULT_BACKOFF.to_vec(),
            agent,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.endpoint, path)
    }

    /// Runs `send` with retries on 429, 5xx and transport failures.
    fn with_retries(
        &self,
        mut send: impl FnMut(Duration) -> Result<Attempt, SynthesisError>,
    ) -> Result<(Vec<u8>, Option<String>), SynthesisError> {
        let deadline = Instant::now() + self.timeout;
        let mut last = String::new();
        for attempt in 0..=self.backoff.len() {
            if attempt > 0 {
                let wait = self.backoff[attempt - 1];
                if Instant::now() + wait >= deadline {
                    return Err(SynthesisError::Timeout);
                }
                thread::sleep(wait);
            }
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Err(SynthesisError::Timeout);
            }
            match send(remaining)? {
                Attempt::Done(body, ctype) => return Ok((body, ctype)),
                Attempt::Retry(why) => last = why,
            }
        }
        Err(SynthesisError::Exhausted {
            attempts: self.backoff.len() + 1,
            last,
        })
    }
}

fn classify(result: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<Attempt, SynthesisError> {
    let mut resp = match result {
        Ok(r) => r,
        Err(ureq::Error::Timeout(_)) => return Err(SynthesisError::Timeout),
        Err(e) => return Ok(Attempt::Retry(e.to_string())),
    };
    let status = resp.status().as_u16();
    let ctype = resp
        .headers()
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    let body = match resp.body_mut().with_config().limit(MAX_RESPONSE_BYTES).read_to_vec() {
        Ok(b) => b,
        Err(ureq::Error::Timeout(_)) => return Err(SynthesisError::Timeout),
        Err(e) => return Ok(Attempt::Retry(e.to_string())),
    };
    let text = || String::from_utf8_lossy(&body[..body.len().min(500)]).into_owned();
    match status {
        200..=299 => Ok(Attempt::Done(body, ctype)),
        401 | 403 => Err(SynthesisError::AuthFailed(status)),
        400 => Err(SynthesisError::BackendRejectedSsml(text())),
        429 | 500..=599 => Ok(Attempt::Retry(format!("HTTP {status}"))),
        _ => Err(SynthesisError::Backend(format!("HTTP {status}: {}", text()))),
    }
}

/// Decodes a synthesis response: a WAV file, or raw little-endian PCM16 at
/// the requested rate.
fn decode_audio(body: &[u8], ctype: Option<&str>, req: &SynthesisRequest) -> Result<AudioClip, SynthesisError> {
    let is_wav = body.starts_with(b"RIFF") || ctype.is_some_and(|c| c.contains("wav"));
    let samples = if is_wav {
        let wav = parse_wav(body)?;
        if wav.format.sample_rate != req.sample_rate_hz {
            return Err(SynthesisError::Backend(format!(
                "asked for {} Hz, backend returned {} Hz",
                req.sample_rate_hz, wav.format.sample_rate
            )));
        }
        wav.samples()?
    } else {
        if body.len() % 2 != 0 {
            return Err(SynthesisError::BadAudio("odd number of PCM bytes".into()));
        }
        pcm16_from_bytes(body)
    };
    Ok(AudioClip {
        samples,
        sample_rate_hz: req.sample_rate_hz,
        source_segment_id: req.segment_id.clone(),
    })
}

const BOUNDARY: &str = "----audiobook-enroll-7d3f2a";

fn multipart_body(wav: &[u8]) -> Vec<u8> {
    let mut body = Vec::with_capacity(wav.len() + 256);
    body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
    body.extend_from_slice(b"Content-Disposition: form-data; name=\"audio\"; filename=\"enroll.wav\"\r\n");
    body.extend_from_slice(b"Content-Type: audio/wav\r\n\r\n");
    body.extend_from_slice(wav);
    body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
    body
}

impl SynthesisBackend for RemoteBackend {
    fn synthesize(&self, req: &SynthesisRequest) -> Result<AudioClip, SynthesisError> {
        req.validate()?;
        let url = self.url("/synthesize");
        let (body, ctype) = self.with_retries(|remaining| {
            let mut builder = self
                .agent
                .post(&url)
                .config()
                .timeout_global(Some(remaining))
                .build()
                .header("Authorization", &format!("Bearer {}", self.token))
                .header("Content-Type", "application/ssml+xml")
                .header("X-Voice-Id", &req.voice_id)
                .header("X-Sample-Rate", &req.sample_rate_hz.to_string())
                .header("Accept", "audio/wav, audio/L16");
            if let Some(style) = &req.emotion_style {
                builder = builder.header("X-Emotion-Style", style);
            }
            classify(builder.send(req.ssml.as_bytes()))
        })?;
        decode_audio(&body, ctype.as_deref(), req)
    }

    fn enroll(&self, wav: &[u8]) -> Result<String, SynthesisError> {
        parse_wav(wav)?;
        let url = self.url("/enroll");
        let payload = multipart_body(wav);
        let (body, _) = self.with_retries(|remaining| {
            classify(
                self.agent
                    .post(&url)
                    .config()
                    .timeout_global(Some(remaining))
                    .build()
                    .header("Authorization", &format!("Bearer {}", self.token))
                    .header("Content-Type", &format!("multipart/form-data; boundary={BOUNDARY}"))
                    .send(&payload[..]),
            )
        })?;
        let v: serde_json::Value =
            serde_json::from_slice(&body).map_err(|e| SynthesisError::Backend(format!("enroll response: {e}")))?;
        v.get("voice_id")
            .and_then(|id| id.as_str())
            .filter(|id| !id.is_empty())
            .map(str::to_string)
            .ok_or_else(|| SynthesisError::Backend("enroll response has no voice_id".into()))
    }

    fn name(&self) -> &str {
        "remote"
    }
}

#[cfg(test)]
mod tests {
    use super::super::mock::{MockReply, MockServer};
    use super::super::wav::encode_wav;
    use super::*;

    fn req() -> SynthesisRequest {
        SynthesisRequest {
            ssml: "<speak>hi</speak>".into(),
            voice_id: "v1".into(),
            rate: 1.0,
            pitch: 0.0,
            sample_rate_hz: 22050,
            emotion_style: None,
            segment_id: "seg".into(),
        }
    }

    fn fast(server: &MockServer) -> RemoteBackend {
        let mut b = RemoteBackend::new(&server.url(), "tok");
        b.backoff = vec![Duration::from_millis(10); 3];
        b
    }

    #[test]
    fn silence_pass_through_and_headers() {
        let server = MockServer::start(vec![MockReply::pcm(&[0; 16])]);
        let clip = RemoteBackend::new(&server.url(), "tok").synthesize(&req()).unwrap();
        assert_eq!(clip.samples, vec![0; 16]);
        let seen = server.requests();
        assert_eq!(seen.len(), 1);
        assert_eq!((seen[0].method.as_str(), seen[0].path.as_str()), ("POST", "/synthesize"));
        assert_eq!(seen[0].header("authorization"), Some("Bearer tok"));
        assert_eq!(seen[0].header("x-voice-id"), Some("v1"));
        assert_eq!(seen[0].header("x-sample-rate"), Some("22050"));
        assert_eq!(seen[0].body, b"<speak>hi</speak>");
    }

    #[test]
    fn wav_response() {
        let server = MockServer::start(vec![MockReply::wav(&encode_wav(&[1, 2, 3], 22050))]);
        assert_eq!(fast(&server).synthesize(&req()).unwrap().samples, [1, 2, 3]);
        let server = MockServer::start(vec![MockReply::wav(&encode_wav(&[1], 16000))]);
        assert!(matches!(fast(&server).synthesize(&req()), Err(SynthesisError::Backend(_))));
    }

    #[test]
    fn retries_with_default_backoff() {
        let server = MockServer::start(vec![MockReply::status(429), MockReply::status(429), MockReply::pcm(&[7; 4])]);
        let start = Instant::now();
        let clip = RemoteBackend::new(&server.url(), "tok").synthesize(&req()).unwrap();
        assert!(start.elapsed() >= Duration::from_secs(3));
        assert_eq!(clip.samples, [7; 4]);
        assert_eq!(server.requests().len(), 3);
    }

    #[test]
    fn non_retryable_statuses() {
        let server = MockServer::start(vec![MockReply::status(401)]);
        assert_eq!(fast(&server).synthesize(&req()), Err(SynthesisError::AuthFailed(401)));
        assert_eq!(server.requests().len(), 1);

        let server = MockServer::start(vec![MockReply::status(400)]);
        assert!(matches!(fast(&server).synthesize(&req()), Err(SynthesisError::BackendRejectedSsml(_))));
        assert_eq!(server.requests().len(), 1);

        for status in [404, 413, 422] {
            let server = MockServer::start(vec![MockReply::status(status)]);
            assert!(fast(&server).synthesize(&req()).is_err());
            assert_eq!(server.requests().len(), 1, "{status}");
        }
    }

    #[test]
    fn exhaustion_after_three_retries() {
        let server = MockServer::start(vec![MockReply::status(503)]);
        assert!(matches!(fast(&server).synthesize(&req()), Err(SynthesisError::Exhausted { attempts: 4, .. })));
        assert_eq!(server.requests().len(), 4);
    }

    #[test]
    fn overall_deadline() {
        let server = MockServer::start(vec![MockReply::status(503)]);
        let mut b = fast(&server);
        b.backoff = vec![Duration::from_millis(300); 3];
        b.timeout = Duration::from_millis(500);
        assert_eq!(b.synthesize(&req()), Err(SynthesisError::Timeout));
    }

    #[test]
    fn remote_enrollment() {
        let server = MockServer::start(vec![MockReply::json(r#"{"voice_id":"remote-42"}"#)]);
        let wav = encode_wav(&[0; 10], 22050);
        assert_eq!(fast(&server).enroll(&wav).unwrap(), "remote-42");
        let seen = &server.requests()[0];
        assert_eq!(seen.path, "/enroll");
        assert!(seen.header("content-type").unwrap().starts_with("multipart/form-data; boundary="));
        assert!(seen.body.windows(wav.len()).any(|w| w == wav));
    }
}
