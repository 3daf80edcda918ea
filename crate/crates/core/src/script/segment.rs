use serde::{Deserialize, Serialize};

use super::Emotion;

pub const NARRATOR: &str = "narrator";
pub const UNKNOWN_SPEAKER: &str = "unknown";

/// Default quote pairs: curly double quotes, and a straight `"` that both
/// opens and closes.
pub const DEFAULT_QUOTE_PAIRS: [(char, char); 2] = [('\u{201C}', '\u{201D}'), ('"', '"')];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Narration,
    Dialogue,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub text: String,
    pub speaker: String,
    pub emotion: Emotion,
    /// Opening quote character, for dialogue.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quote_open: Option<char>,
    /// Closing quote character; `None` on dialogue left open at paragraph end.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quote_close: Option<char>,
    /// Whether a space separates this segment from the previous one.
    pub space_before: bool,
    /// Space between the opening quote and the text.
    #[serde(default, skip_serializing_if = "is_false")]
    pub pad_open: bool,
    /// Space between the text and the closing quote.
    #[serde(default, skip_serializing_if = "is_false")]
    pub pad_close: bool,
}

impl Segment {
    pub fn narration(text: &str) -> Segment {
        Segment {
            kind: SegmentKind::Narration,
            text: text.to_string(),
            speaker: NARRATOR.to_string(),
            emotion: Emotion::Neutral,
            quote_open: None,
            quote_close: None,
            space_before: true,
            pad_open: false,
            pad_close: false,
        }
    }

    pub fn is_dialogue(&self) -> bool {
        self.kind == SegmentKind::Dialogue
    }

    /// Dialogue whose quote was still open at the end of its paragraph.
    pub fn is_unterminated(&self) -> bool {
        self.is_dialogue() && self.quote_close.is_none()
    }
}

/// Splits a paragraph into narration and dialogue segments.
///
/// A quote pair enclosing only whitespace is not dialogue; its characters
/// stay in the surrounding narration. A close quote with no matching open
/// quote is ordinary text.
pub fn segment_dialogue(paragraph: &str, quote_pairs: &[(char, char)]) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut narration = String::new();
    // (open char, close char, raw text since the open quote)
    let mut open: Option<(char, char, String)> = None;
    // whitespace seen since the last emitted segment ended
    let mut pending_space = false;

    for ch in paragraph.chars() {
        match &mut open {
            Some((o, c, inner)) => {
                if ch == *c {
                    let (o, c, inner) = (*o, *c, std::mem::take(inner));
                    open = None;
                    if inner.trim().is_empty() {
                        narration.push(o);
                        narration.push_str(&inner);
                        narration.push(c);
                    } else {
                        flush_narration(&mut out, &mut narration, &mut pending_space);
                        out.push(dialogue(o, Some(c), &inner, pending_space));
                        pending_space = false;
                    }
                } else {
                    inner.push(ch);
                }
            }
            None => {
                if let Some(&(o, c)) = quote_pairs.iter().find(|(o, _)| *o == ch) {
                    open = Some((o, c, String::new()));
                } else {
                    narration.push(ch);
                }
            }
        }
    }
    if let Some((o, _, inner)) = open {
        if inner.trim().is_empty() {
            narration.push(o);
            narration.push_str(&inner);
        } else {
            flush_narration(&mut out, &mut narration, &mut pending_space);
            out.push(dialogue(o, None, &inner, pending_space));
            pending_space = false;
        }
    }
    flush_narration(&mut out, &mut narration, &mut pending_space);
    if let Some(first) = out.first_mut() {
        first.space_before = false;
    }
    out
}

fn dialogue(open: char, close: Option<char>, inner: &str, space_before: bool) -> Segment {
    Segment {
        kind: SegmentKind::Dialogue,
        text: inner.trim().to_string(),
        speaker: UNKNOWN_SPEAKER.to_string(),
        emotion: Emotion::Neutral,
        quote_open: Some(open),
        quote_close: close,
        space_before,
        pad_open: inner.starts_with(char::is_whitespace),
        pad_close: close.is_some() && inner.ends_with(char::is_whitespace),
    }
}

/// Emits buffered narration, if any non-whitespace, and records whether
/// whitespace separates it from its neighbours.
fn flush_narration(out: &mut Vec<Segment>, buf: &mut String, pending_space: &mut bool) {
    if buf.is_empty() {
        return;
    }
    let trimmed = buf.trim();
    if trimmed.is_empty() {
        *pending_space = true;
    } else {
        let mut seg = Segment::narration(trimmed);
        seg.space_before = *pending_space || buf.starts_with(char::is_whitespace);
        out.push(seg);
        *pending_space = buf.ends_with(char::is_whitespace);
    }
    buf.clear();
}

/// Rebuilds paragraph text from segments: a single space wherever
/// `space_before` is set, quote characters around dialogue per its flags.
pub fn reconstruct(segments: &[Segment]) -> String {
    let mut s = String::new();
    for (i, seg) in segments.iter().enumerate() {
        if i > 0 && seg.space_before {
            s.push(' ');
        }
        if let Some(o) = seg.quote_open {
            s.push(o);
        }
        if seg.pad_open {
            s.push(' ');
        }
        s.push_str(&seg.text);
        if seg.pad_close {
            s.push(' ');
        }
        if let Some(c) = seg.quote_close {
            s.push(c);
        }
    }
    s
}
