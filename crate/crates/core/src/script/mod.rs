//! Narration scripts: chapter extraction, dialogue segmentation, speaker
//! attribution, emotion tags, voice casting and SSML.

mod attribution;
mod cast;
mod emotion;
mod extract;
mod segment;
mod ssml;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use attribution::{attribute_speakers, find_speakers, SPEECH_VERBS};
pub use cast::{assign_voices, pool_index, CastMap, VoiceSpec};
pub use emotion::{tag_emotion, Emotion, Lexicon};
pub use extract::{extract_chapters, PlainChapter};
pub use segment::{reconstruct, segment_dialogue, Segment, SegmentKind, DEFAULT_QUOTE_PAIRS, NARRATOR, UNKNOWN_SPEAKER};
pub use ssml::{
    chapter_ssml, delivery, escape_text, export_ssml, format_pitch, format_rate, segment_ssml, Delivery, SsmlOptions,
    PARAGRAPH_BREAK_MS, SEGMENT_BREAK_MS, SSML_NAMESPACE,
};

use crate::dom::{collapse_whitespace, DomTree};
use crate::ingest::Metadata;

pub const SCRIPT_FORMAT: &str = "script v1";

#[derive(Debug, Error, PartialEq)]
pub enum ScriptError {
    #[error("book has no non-empty paragraphs")]
    EmptyBook,
    #[error("voice pool is empty")]
    EmptyVoicePool,
    #[error("no voice cast for speaker {0:?}")]
    UnmappedVoice(String),
    #[error("script file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub text: String,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chapter {
    /// 1-based; 0 is reserved for a prepended dedication.
    pub index: usize,
    pub heading: String,
    pub paragraphs: Vec<Paragraph>,
}

impl Chapter {
    /// Paragraphs as read aloud: a non-empty heading is spoken first by
    /// the narrator.
    pub fn spoken_paragraphs(&self) -> Vec<Vec<Segment>> {
        let mut out = Vec::with_capacity(self.paragraphs.len() + 1);
        if !self.heading.is_empty() {
            let mut h = Segment::narration(&self.heading);
            h.space_before = false;
            out.push(vec![h]);
        }
        out.extend(self.paragraphs.iter().map(|p| p.segments.clone()));
        out
    }

    /// Output file stem, e.g. `ch001`.
    pub fn file_stem(&self) -> String {
        format!("ch{:03}", self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NarrationScript {
    pub format: String,
    pub book_id: String,
    pub title: String,
    pub author: String,
    /// Language tag from the book, possibly empty.
    #[serde(default)]
    pub language: String,
    pub chapters: Vec<Chapter>,
    pub cast: CastMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptOptions {
    pub quote_pairs: Vec<(char, char)>,
    pub narrator_voice: String,
    pub voice_pool: Vec<String>,
}

impl Default for ScriptOptions {
    fn default() -> Self {
        ScriptOptions {
            quote_pairs: DEFAULT_QUOTE_PAIRS.to_vec(),
            narrator_voice: "narrator-1".to_string(),
            voice_pool: (1..=4).map(|i| format!("voice-{i}")).collect(),
        }
    }
}

impl NarrationScript {
    pub fn speakers(&self) -> impl Iterator<Item = &str> {
        self.chapters
            .iter()
            .flat_map(|c| &c.paragraphs)
            .flat_map(|p| &p.segments)
            .map(|s| s.speaker.as_str())
    }

    /// Pretty JSON with a trailing newline; field order is fixed.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("script serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<NarrationScript, ScriptError> {
        let script: NarrationScript = serde_json::from_str(text).map_err(|e| ScriptError::Format(e.to_string()))?;
        if script.format != SCRIPT_FORMAT {
            return Err(ScriptError::Format(format!("unsupported format {:?}", script.format)));
        }
        Ok(script)
    }

    /// Prepends a chapter 0 holding `text` as one narrated paragraph.
    pub fn prepend_dedication(&mut self, text: &str) {
        let text = collapse_whitespace(text);
        if text.is_empty() {
            return;
        }
        let mut seg = Segment::narration(&text);
        seg.space_before = false;
        self.chapters.insert(
            0,
            Chapter {
                index: 0,
                heading: String::new(),
                paragraphs: vec![Paragraph { text, segments: vec![seg] }],
            },
        );
    }
}

/// Segments one chapter's paragraphs, attributes speakers and tags
/// dialogue emotions.
pub fn annotate_chapter(paragraphs: &[String], quote_pairs: &[(char, char)]) -> Vec<Paragraph> {
    let mut segs: Vec<Vec<Segment>> = paragraphs.iter().map(|p| segment_dialogue(p, quote_pairs)).collect();
    attribute_speakers(&mut segs);
    for seg in segs.iter_mut().flatten() {
        if seg.is_dialogue() {
            seg.emotion = tag_emotion(&seg.text);
        }
    }
    paragraphs
        .iter()
        .zip(segs)
        .map(|(text, segments)| Paragraph {
            text: text.clone(),
            segments,
        })
        .collect()
}

pub fn build_script(
    book_id: &str,
    metadata: &Metadata,
    tree: &DomTree,
    opts: &ScriptOptions,
) -> Result<NarrationScript, ScriptError> {
    let plain = extract_chapters(tree);
    if plain.is_empty() {
        return Err(ScriptError::EmptyBook);
    }
    let chapters: Vec<Chapter> = plain
        .into_iter()
        .map(|c| Chapter {
            index: c.index,
            heading: c.heading,
            paragraphs: annotate_chapter(&c.paragraphs, &opts.quote_pairs),
        })
        .collect();
    let mut script = NarrationScript {
        format: SCRIPT_FORMAT.to_string(),
        book_id: book_id.to_string(),
        title: metadata.title.clone(),
        author: metadata.author.clone(),
        language: metadata.language.clone(),
        chapters,
        cast: CastMap::new(),
    };
    script.cast = assign_voices(script.speakers(), &opts.voice_pool, &opts.narrator_voice)?;
    Ok(script)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::parse_html;

    fn meta() -> Metadata {
        Metadata {
            title: "T".into(),
            author: "A".into(),
            language: "en".into(),
        }
    }

    #[test]
    fn build_and_round_trip() {
        let html = "<h2>I</h2><p>\u{201C}I hate you!\u{201D} said Alice.</p><p>\u{201C}Why?\u{201D} asked Bob.</p><p>Silence.</p>";
        let script = build_script("b1", &meta(), &parse_html(html), &ScriptOptions::default()).unwrap();
        assert_eq!(script.chapters.len(), 1);
        let segs: Vec<&Segment> = script.chapters[0].paragraphs.iter().flat_map(|p| &p.segments).collect();
        assert_eq!(segs[0].speaker, "Alice");
        assert_eq!(segs[0].emotion, Emotion::Angry);
        assert_eq!(segs[2].speaker, "Bob");
        for p in &script.chapters[0].paragraphs {
            assert_eq!(reconstruct(&p.segments), p.text);
        }
        assert!(script.speakers().all(|s| script.cast.contains_key(s)));
        let json = script.to_json();
        assert_eq!(NarrationScript::from_json(&json).unwrap(), script);
        assert_eq!(json, NarrationScript::from_json(&json).unwrap().to_json());
    }

    #[test]
    fn empty_book() {
        let err = build_script("b", &meta(), &parse_html("<p> </p>"), &ScriptOptions::default());
        assert_eq!(err, Err(ScriptError::EmptyBook));
    }

    #[test]
    fn dedication_is_chapter_zero() {
        let mut script = build_script("b", &meta(), &parse_html("<p>x</p>"), &ScriptOptions::default()).unwrap();
        script.prepend_dedication("For  Ada");
        assert_eq!(script.chapters[0].index, 0);
        assert_eq!(script.chapters[0].file_stem(), "ch000");
        assert_eq!(script.chapters[0].paragraphs[0].text, "For Ada");
        assert_eq!(script.chapters[1].file_stem(), "ch001");
        let ssml = export_ssml(&script, &SsmlOptions::default()).unwrap();
        assert!(ssml[0].contains(">For Ada</prosody>"));
    }
}
