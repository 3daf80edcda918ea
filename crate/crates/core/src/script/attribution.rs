use super::segment::{Segment, SegmentKind, UNKNOWN_SPEAKER};

pub const SPEECH_VERBS: [&str; 15] = [
    "said", "asked", "replied", "cried", "whispered", "shouted", "answered", "exclaimed", "muttered", "called",
    "continued", "added", "observed", "returned", "inquired",
];

/// Capitalized words that are never (the start of) a speaker name.
const STOP_WORDS: &[&str] = &[
    "a", "again", "an", "and", "as", "at", "but", "for", "he", "her", "here", "his", "i", "if", "in", "it", "its",
    "just", "my", "no", "now", "of", "oh", "on", "only", "or", "our", "presently", "she", "so", "still", "that",
    "the", "their", "then", "there", "they", "this", "to", "we", "well", "what", "when", "where", "while", "who",
    "why", "with", "yes", "yet", "you", "your",
];

const TITLES: &[&str] = &["mr.", "mrs.", "ms.", "dr.", "st.", "capt.", "col.", "gen.", "prof.", "rev.", "lt.", "sgt."];

const MAX_NAME_TOKENS: usize = 3;

fn is_title(token: &str) -> bool {
    TITLES.contains(&token.to_lowercase().as_str())
}

fn strip_punct(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

fn is_capitalized(token: &str) -> bool {
    strip_punct(token).chars().next().is_some_and(char::is_uppercase)
}

/// True when the token ends a phrase: trailing punctuation other than a
/// title abbreviation's period.
fn closes_phrase(token: &str) -> bool {
    !is_title(token) && token.ends_with(|c: char| !c.is_alphanumeric())
}

fn is_verb(token: &str) -> bool {
    let core = strip_punct(token).to_lowercase();
    SPEECH_VERBS.contains(&core.as_str())
}

fn name_of(tokens: &[&str]) -> Option<String> {
    let start = tokens
        .iter()
        .position(|t| !STOP_WORDS.contains(&strip_punct(t).to_lowercase().as_str()))?;
    let parts: Vec<&str> = tokens[start..]
        .iter()
        .map(|t| if is_title(t) { t.trim_start_matches(|c: char| !c.is_alphanumeric()) } else { strip_punct(t) })
        .collect();
    if parts.iter().all(|p| is_title(p)) {
        return None;
    }
    Some(parts.join(" "))
}

/// Speaker names found in a narration span, in textual order, from the
/// patterns `<Name> <verb>` and `<verb> <Name>`.
pub fn find_speakers(narration: &str) -> Vec<String> {
    let tokens: Vec<&str> = narration.split_whitespace().collect();
    let mut found = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        if !is_verb(tok) {
            continue;
        }
        // <Name> <verb>
        let mut j = i;
        while j > 0 && i - j < MAX_NAME_TOKENS {
            let prev = tokens[j - 1];
            if !is_capitalized(prev) || closes_phrase(prev) {
                break;
            }
            j -= 1;
        }
        if j < i {
            if let Some(name) = name_of(&tokens[j..i]) {
                found.push(name);
                continue;
            }
        }
        // <verb> <Name>; a verb followed by punctuation takes no name
        if closes_phrase(tok) {
            continue;
        }
        let mut k = i + 1;
        while k < tokens.len() && k - i <= MAX_NAME_TOKENS && is_capitalized(tokens[k]) {
            k += 1;
            if closes_phrase(tokens[k - 1]) {
                break;
            }
        }
        if k > i + 1 {
            if let Some(name) = name_of(&tokens[i + 1..k]) {
                found.push(name);
            }
        }
    }
    found
}

/// Explicit attribution for the dialogue at `idx`: the first name in the
/// following narration segment, else the last name in the preceding one.
fn own_attribution(segments: &[Segment], idx: usize) -> Option<String> {
    let next = segments.get(idx + 1).filter(|s| s.kind == SegmentKind::Narration);
    if let Some(name) = next.and_then(|s| find_speakers(&s.text).into_iter().next()) {
        return Some(name);
    }
    let prev = idx.checked_sub(1).map(|p| &segments[p]).filter(|s| s.kind == SegmentKind::Narration);
    prev.and_then(|s| find_speakers(&s.text).pop())
}

/// Assigns speakers to every dialogue segment of one chapter, in order.
///
/// Priority: an explicit pattern next to the dialogue; the speaker of an
/// unterminated quote closing the previous paragraph (for a paragraph that
/// opens with dialogue); an earlier speaker in the same paragraph; the
/// alternation of the two most recent distinct speakers; else "unknown".
pub fn attribute_speakers(paragraphs: &mut [Vec<Segment>]) {
    // distinct consecutive speakers so far in the chapter
    let mut history: Vec<String> = Vec::new();
    let mut carried: Option<String> = None;
    for para in paragraphs.iter_mut() {
        let mut para_speaker: Option<String> = None;
        let carry = carried.take();
        for idx in 0..para.len() {
            if !para[idx].is_dialogue() {
                continue;
            }
            let speaker = own_attribution(para, idx)
                .or_else(|| if idx == 0 { carry.clone() } else { None })
                .or_else(|| para_speaker.clone())
                .or_else(|| (history.len() >= 2).then(|| history[history.len() - 2].clone()))
                .unwrap_or_else(|| UNKNOWN_SPEAKER.to_string());
            if speaker != UNKNOWN_SPEAKER {
                if history.last() != Some(&speaker) {
                    history.push(speaker.clone());
                }
                para_speaker = Some(speaker.clone());
            }
            para[idx].speaker = speaker;
        }
        if let Some(last) = para.last() {
            if last.is_unterminated() && last.speaker != UNKNOWN_SPEAKER {
                carried = Some(last.speaker.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::segment::{segment_dialogue, DEFAULT_QUOTE_PAIRS};
    use super::*;

    fn chapter(paras: &[&str]) -> Vec<Vec<Segment>> {
        let mut ch: Vec<Vec<Segment>> = paras.iter().map(|p| segment_dialogue(p, &DEFAULT_QUOTE_PAIRS)).collect();
        attribute_speakers(&mut ch);
        ch
    }

    fn speakers(ch: &[Vec<Segment>]) -> Vec<&str> {
        ch.iter().flatten().filter(|s| s.is_dialogue()).map(|s| s.speaker.as_str()).collect()
    }

    #[test]
    fn name_patterns() {
        assert_eq!(find_speakers("said Alice."), ["Alice"]);
        assert_eq!(find_speakers("Alice said."), ["Alice"]);
        assert_eq!(find_speakers("Then Mr. Darcy replied, coldly."), ["Mr. Darcy"]);
        assert_eq!(find_speakers("answered Captain John Smith at once."), ["Captain John Smith"]);
        assert_eq!(find_speakers("said he."), Vec::<String>::new());
        assert_eq!(find_speakers("said I."), Vec::<String>::new());
        assert_eq!(find_speakers("She said."), Vec::<String>::new());
        assert_eq!(find_speakers("Bob, Alice said."), ["Alice"]);
        assert_eq!(find_speakers("he said, Alice being gone."), Vec::<String>::new());
    }

    #[test]
    fn verb_name_example() {
        let ch = chapter(&["\u{201C}Go,\u{201D} said Alice."]);
        assert_eq!(speakers(&ch), ["Alice"]);
    }

    #[test]
    fn alternation() {
        let ch = chapter(&[
            "\u{201C}Hello,\u{201D} said Alice.",
            "\u{201C}Hello yourself,\u{201D} said Bob.",
            "\u{201C}Fine weather.\u{201D}",
            "\u{201C}It is.\u{201D}",
        ]);
        assert_eq!(speakers(&ch), ["Alice", "Bob", "Alice", "Bob"]);
    }

    #[test]
    fn no_context_is_unknown() {
        assert_eq!(speakers(&chapter(&["\u{201C}Who goes there?\u{201D}"])), ["unknown"]);
    }

    #[test]
    fn continued_quote_reuses_speaker() {
        let ch = chapter(&[
            "\u{201C}Well,\u{201D} said Bob.",
            "Alice said, \u{201C}It began in the spring",
            "\u{201C}and it ended in the fall.\u{201D}",
        ]);
        assert_eq!(speakers(&ch), ["Bob", "Alice", "Alice"]);
    }

    #[test]
    fn same_paragraph_speaker() {
        // alternation would pick Bob for the last line
        let ch = chapter(&[
            "\u{201C}Hi,\u{201D} said Bob.",
            "Alice said, \u{201C}Go.\u{201D} She paused. \u{201C}Now.\u{201D}",
        ]);
        assert_eq!(speakers(&ch), ["Bob", "Alice", "Alice"]);
    }
}
