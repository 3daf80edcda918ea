use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::segment::NARRATOR;
use super::ScriptError;
use crate::hash::fnv1a64_str;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceSpec {
    pub voice_id: String,
    /// Speaking-rate multiplier.
    pub rate: f64,
    /// Pitch offset in semitones.
    pub pitch: f64,
}

impl VoiceSpec {
    pub fn new(voice_id: &str) -> VoiceSpec {
        VoiceSpec {
            voice_id: voice_id.to_string(),
            rate: 1.0,
            pitch: 0.0,
        }
    }
}

pub type CastMap = BTreeMap<String, VoiceSpec>;

/// Index into a voice pool for a speaker name.
pub fn pool_index(speaker: &str, pool_len: usize) -> usize {
    (fnv1a64_str(speaker) % pool_len as u64) as usize
}

/// Narrator gets `narrator_voice`; every other speaker a pool voice picked
/// by FNV-1a of the name.
pub fn assign_voices<'a>(
    speakers: impl IntoIterator<Item = &'a str>,
    voice_pool: &[String],
    narrator_voice: &str,
) -> Result<CastMap, ScriptError> {
    if voice_pool.is_empty() {
        return Err(ScriptError::EmptyVoicePool);
    }
    let distinct: BTreeSet<&str> = speakers.into_iter().collect();
    let mut cast = CastMap::new();
    cast.insert(NARRATOR.to_string(), VoiceSpec::new(narrator_voice));
    for s in distinct {
        if s != NARRATOR {
            cast.insert(s.to_string(), VoiceSpec::new(&voice_pool[pool_index(s, voice_pool.len())]));
        }
    }
    Ok(cast)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    #[test]
    fn narration_only() {
        let cast = assign_voices(["narrator"], &pool(3), "nv").unwrap();
        assert_eq!(cast.len(), 1);
        assert_eq!(cast["narrator"], VoiceSpec::new("nv"));
    }

    #[test]
    fn single_voice_pool() {
        let cast = assign_voices(["Alice", "Bob", "unknown"], &pool(1), "nv").unwrap();
        assert!(cast.iter().filter(|(k, _)| *k != "narrator").all(|(_, v)| v.voice_id == "v0"));
        assert_eq!(cast.len(), 4);
    }

    #[test]
    fn hashed_pool_choice() {
        // FNV-1a 64 of "Alice" is 0x123909cb9f15d167 and of "Bob" 0x16566419b10316b4
        // (computed with a separate reference implementation); mod 4 gives 3 and 0.
        let cast = assign_voices(["Alice", "Bob"], &pool(4), "nv").unwrap();
        assert_eq!(cast["Alice"].voice_id, "v3");
        assert_eq!(cast["Bob"].voice_id, "v0");
        assert_eq!(assign_voices(["Alice"], &[], "nv"), Err(ScriptError::EmptyVoicePool));
    }
}
