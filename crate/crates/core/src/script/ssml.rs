use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cast::CastMap;
use super::segment::Segment;
use super::{Chapter, Emotion, NarrationScript, ScriptError};

pub const SSML_NAMESPACE: &str = "http://www.w3.org/2001/10/synthesis";
pub const PARAGRAPH_BREAK_MS: u32 = 500;
pub const SEGMENT_BREAK_MS: u32 = 200;

/// Output dialect and global prosody for SSML export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsmlOptions {
    /// Global rate multiplier, combined with each voice's own rate.
    pub rate: f64,
    /// Global pitch offset in semitones, added to each voice's own pitch.
    pub pitch: f64,
    pub lang: String,
    /// Tag of the expressive-style wrapper, e.g. `mstts:express-as`.
    pub style_element: String,
    pub style_attribute: String,
    /// Extra namespace declarations on `<speak>`, prefix to URI.
    pub namespaces: BTreeMap<String, String>,
    /// Emotions with a style; unmapped emotions get no wrapper.
    pub emotion_styles: BTreeMap<Emotion, String>,
}

impl Default for SsmlOptions {
    fn default() -> Self {
        SsmlOptions {
            rate: 1.0,
            pitch: 0.0,
            lang: "en".to_string(),
            style_element: "mstts:express-as".to_string(),
            style_attribute: "style".to_string(),
            namespaces: [("mstts".to_string(), "https://www.w3.org/2001/mstts".to_string())].into(),
            emotion_styles: [
                (Emotion::Happy, "cheerful"),
                (Emotion::Sad, "sad"),
                (Emotion::Angry, "angry"),
                (Emotion::Fearful, "terrified"),
                (Emotion::Surprised, "excited"),
            ]
            .into_iter()
            .map(|(e, s)| (e, s.to_string()))
            .collect(),
        }
    }
}

/// Escapes element content. Quotes are left alone.
pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}

fn escape_attr(s: &str) -> String {
    escape_text(s).replace('"', "&quot;")
}

/// Decimal with at most two fractional digits and no trailing zeros.
fn short_decimal(x: f64) -> String {
    let r = (x * 100.0).round() / 100.0;
    let r = if r == 0.0 { 0.0 } else { r };
    if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

fn signed(x: f64) -> String {
    let s = short_decimal(x);
    if s.starts_with('-') {
        s
    } else {
        format!("+{s}")
    }
}

/// Rate multiplier as a relative percentage: 2.0 gives "+100%".
pub fn format_rate(multiplier: f64) -> String {
    format!("{}%", signed((multiplier - 1.0) * 100.0))
}

/// Pitch offset as signed semitones: 2 gives "+2st".
pub fn format_pitch(semitones: f64) -> String {
    format!("{}st", signed(semitones))
}

/// The voice, rate and pitch a segment is spoken with.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub voice_id: String,
    pub rate: f64,
    pub pitch: f64,
    pub style: Option<String>,
}

pub fn delivery(segment: &Segment, cast: &CastMap, opts: &SsmlOptions) -> Result<Delivery, ScriptError> {
    let voice = cast
        .get(&segment.speaker)
        .ok_or_else(|| ScriptError::UnmappedVoice(segment.speaker.clone()))?;
    let style = if segment.is_dialogue() {
        opts.emotion_styles.get(&segment.emotion).cloned()
    } else {
        None
    };
    Ok(Delivery {
        voice_id: voice.voice_id.clone(),
        rate: opts.rate * voice.rate,
        pitch: opts.pitch + voice.pitch,
        style,
    })
}

fn open_speak(out: &mut String, opts: &SsmlOptions) {
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = write!(out, "<speak version=\"1.0\" xmlns=\"{SSML_NAMESPACE}\"");
    for (prefix, uri) in &opts.namespaces {
        let _ = write!(out, " xmlns:{prefix}=\"{}\"", escape_attr(uri));
    }
    let _ = writeln!(out, " xml:lang=\"{}\">", escape_attr(&opts.lang));
}

fn write_voice(out: &mut String, text: &str, d: &Delivery, opts: &SsmlOptions) {
    let _ = write!(out, "<voice name=\"{}\">", escape_attr(&d.voice_id));
    if let Some(style) = &d.style {
        let _ = write!(out, "<{} {}=\"{}\">", opts.style_element, opts.style_attribute, escape_attr(style));
    }
    let _ = write!(
        out,
        "<prosody rate=\"{}\" pitch=\"{}\">{}</prosody>",
        format_rate(d.rate),
        format_pitch(d.pitch),
        escape_text(text)
    );
    if d.style.is_some() {
        let _ = write!(out, "</{}>", opts.style_element);
    }
    out.push_str("</voice>\n");
}

fn write_break(out: &mut String, ms: u32) {
    let _ = writeln!(out, "<break time=\"{ms}ms\"/>");
}

/// A one-segment document, as sent to a synthesis backend.
pub fn segment_ssml(segment: &Segment, cast: &CastMap, opts: &SsmlOptions) -> Result<String, ScriptError> {
    let d = delivery(segment, cast, opts)?;
    let mut out = String::new();
    open_speak(&mut out, opts);
    write_voice(&mut out, &segment.text, &d, opts);
    out.push_str("</speak>\n");
    Ok(out)
}

pub fn chapter_ssml(chapter: &Chapter, cast: &CastMap, opts: &SsmlOptions) -> Result<String, ScriptError> {
    let mut out = String::new();
    open_speak(&mut out, opts);
    for (p, para) in chapter.spoken_paragraphs().iter().enumerate() {
        if p > 0 {
            write_break(&mut out, PARAGRAPH_BREAK_MS);
        }
        for (s, seg) in para.iter().enumerate() {
            if s > 0 {
                write_break(&mut out, SEGMENT_BREAK_MS);
            }
            let d = delivery(seg, cast, opts)?;
            write_voice(&mut out, &seg.text, &d, opts);
        }
    }
    out.push_str("</speak>\n");
    Ok(out)
}

/// One SSML document per chapter, in chapter order.
pub fn export_ssml(script: &NarrationScript, opts: &SsmlOptions) -> Result<Vec<String>, ScriptError> {
    script.chapters.iter().map(|c| chapter_ssml(c, &script.cast, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::super::cast::VoiceSpec;
    use super::super::Paragraph;
    use super::*;

    fn one_segment_chapter(seg: Segment) -> Chapter {
        Chapter {
            index: 1,
            heading: String::new(),
            paragraphs: vec![Paragraph {
                text: seg.text.clone(),
                segments: vec![seg],
            }],
        }
    }

    fn cast() -> CastMap {
        [("narrator".to_string(), VoiceSpec::new("nv"))].into()
    }

    #[test]
    fn minimal_document() {
        let ch = one_segment_chapter(Segment::narration("Hi"));
        let ssml = chapter_ssml(&ch, &cast(), &SsmlOptions::default()).unwrap();
        assert_eq!(ssml.matches("<voice").count(), 1);
        assert_eq!(ssml.matches("<break").count(), 0);
        assert!(ssml.contains("<voice name=\"nv\"><prosody rate=\"+0%\" pitch=\"+0st\">Hi</prosody></voice>"));
        let doc = roxmltree::Document::parse(&ssml).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "speak");
    }

    #[test]
    fn escaping() {
        assert_eq!(escape_text("a <b> & \"c\""), "a &lt;b&gt; &amp; \"c\"");
        let ch = one_segment_chapter(Segment::narration("a <b> & \"c\""));
        let ssml = chapter_ssml(&ch, &cast(), &SsmlOptions::default()).unwrap();
        let doc = roxmltree::Document::parse(&ssml).unwrap();
        let prosody = doc.descendants().find(|n| n.has_tag_name("prosody")).unwrap();
        assert_eq!(prosody.text(), Some("a <b> & \"c\""));
    }

    #[test]
    fn rate_and_pitch_strings() {
        assert_eq!(format_rate(2.0), "+100%");
        assert_eq!(format_rate(1.0), "+0%");
        assert_eq!(format_rate(0.5), "-50%");
        assert_eq!(format_rate(1.255), "+25.5%");
        assert_eq!(format_pitch(2.0), "+2st");
        assert_eq!(format_pitch(-1.5), "-1.5st");
        let opts = SsmlOptions {
            rate: 2.0,
            ..Default::default()
        };
        let ssml = chapter_ssml(&one_segment_chapter(Segment::narration("x")), &cast(), &opts).unwrap();
        assert!(ssml.contains("rate=\"+100%\""));
    }

    #[test]
    fn styles_breaks_and_unmapped_voices() {
        let mut d = super::super::segment::segment_dialogue("\u{201C}I hate you!\u{201D} said Bob.", &super::super::DEFAULT_QUOTE_PAIRS);
        d[0].speaker = "Bob".into();
        d[0].emotion = Emotion::Angry;
        let ch = Chapter {
            index: 1,
            heading: "One".into(),
            paragraphs: vec![Paragraph {
                text: String::new(),
                segments: d,
            }],
        };
        let mut c = cast();
        assert!(matches!(chapter_ssml(&ch, &c, &SsmlOptions::default()), Err(ScriptError::UnmappedVoice(s)) if s == "Bob"));
        c.insert("Bob".into(), VoiceSpec { voice_id: "b".into(), rate: 1.5, pitch: 1.0 });
        let ssml = chapter_ssml(&ch, &c, &SsmlOptions::default()).unwrap();
        assert!(ssml.contains("<mstts:express-as style=\"angry\"><prosody rate=\"+50%\" pitch=\"+1st\">I hate you!</prosody></mstts:express-as>"));
        assert_eq!(ssml.matches("<break time=\"500ms\"/>").count(), 1);
        assert_eq!(ssml.matches("<break time=\"200ms\"/>").count(), 1);
        roxmltree::Document::parse(&ssml).unwrap();

        let plain = SsmlOptions {
            emotion_styles: BTreeMap::new(),
            ..Default::default()
        };
        assert!(!chapter_ssml(&ch, &c, &plain).unwrap().contains("express-as"));
    }
}
