use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Neutral,
    Happy,
    Sad,
    Angry,
    Fearful,
    Surprised,
}

impl Emotion {
    pub const ALL: [Emotion; 6] = [
        Emotion::Neutral,
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Angry,
        Emotion::Fearful,
        Emotion::Surprised,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Angry => "angry",
            Emotion::Fearful => "fearful",
            Emotion::Surprised => "surprised",
        }
    }

    pub fn parse(s: &str) -> Option<Emotion> {
        Emotion::ALL.into_iter().find(|e| e.as_str() == s)
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stem lists per scored emotion. Neutral has none.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<(Emotion, Vec<String>)>,
}

fn parse_stems(src: &str) -> Vec<String> {
    src.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

static BUILTIN: LazyLock<Lexicon> = LazyLock::new(|| Lexicon {
    entries: vec![
        (Emotion::Happy, parse_stems(include_str!("../../data/emotions/happy.txt"))),
        (Emotion::Sad, parse_stems(include_str!("../../data/emotions/sad.txt"))),
        (Emotion::Angry, parse_stems(include_str!("../../data/emotions/angry.txt"))),
        (Emotion::Fearful, parse_stems(include_str!("../../data/emotions/fearful.txt"))),
        (Emotion::Surprised, parse_stems(include_str!("../../data/emotions/surprised.txt"))),
    ],
});

static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[\p{L}\p{N}'’]+").unwrap());

impl Lexicon {
    pub fn builtin() -> &'static Lexicon {
        &BUILTIN
    }

    pub fn new(entries: Vec<(Emotion, Vec<String>)>) -> Lexicon {
        let entries = entries
            .into_iter()
            .map(|(e, stems)| (e, stems.into_iter().map(|s| s.to_lowercase()).collect()))
            .collect();
        Lexicon { entries }
    }

    pub fn stems(&self, emotion: Emotion) -> &[String] {
        self.entries
            .iter()
            .find(|(e, _)| *e == emotion)
            .map_or(&[], |(_, s)| s.as_slice())
    }

    /// Score per emotion in `Emotion::ALL` order (neutral always 0): the
    /// number of words starting with one of the emotion's stems, plus the
    /// punctuation bonuses.
    pub fn scores(&self, text: &str) -> [u32; 6] {
        let mut scores = [0u32; 6];
        let words: Vec<String> = WORD.find_iter(text).map(|m| m.as_str().to_lowercase()).collect();
        for (emotion, stems) in &self.entries {
            let hits = words
                .iter()
                .filter(|w| stems.iter().any(|s| w.starts_with(s.as_str())))
                .count();
            scores[*emotion as usize] += hits as u32;
        }
        let last = text
            .trim_end_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '’' | '”' | ')'))
            .chars()
            .last();
        let bonus = |scores: &mut [u32; 6], e: Emotion| {
            if scores[e as usize] > 0 {
                scores[e as usize] += 1;
            }
        };
        match last {
            Some('!') => {
                bonus(&mut scores, Emotion::Angry);
                bonus(&mut scores, Emotion::Surprised);
                bonus(&mut scores, Emotion::Happy);
            }
            Some('?') => bonus(&mut scores, Emotion::Surprised),
            _ => {}
        }
        scores
    }

    /// Unique highest score wins; ties and all-zero give neutral.
    pub fn tag(&self, text: &str) -> Emotion {
        let scores = self.scores(text);
        let max = *scores.iter().max().unwrap_or(&0);
        if max == 0 || scores.iter().filter(|&&s| s == max).count() > 1 {
            return Emotion::Neutral;
        }
        Emotion::ALL[scores.iter().position(|&s| s == max).unwrap()]
    }
}

pub fn tag_emotion(text: &str) -> Emotion {
    Lexicon::builtin().tag(text)
}
