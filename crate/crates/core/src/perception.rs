//! Perception events and the scripted (JSON lines) event source.
//!
//! ```text
//! {"t_ms":0,"event":"face","identity":"ada","confidence":0.9}
//! {"t_ms":1200,"event":"emotion","category":"Happiness","v":0.8,"a":0.6,"d":0.5}
//! ```

use serde::{Deserialize, Serialize};

use crate::affect::{AffectError, CategoryRegistry, EmotionEstimate, Vad};

#[derive(Debug, Clone, PartialEq)]
pub enum PerceptionKind {
    FaceDetected { identity: Option<String>, confidence: f64 },
    EmotionDetected(EmotionEstimate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionEvent {
    pub kind: PerceptionKind,
    /// Milliseconds on the source's clock.
    pub at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PerceptionError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: AffectError },
    #[error("line {line}: confidence {value} outside [0, 1]")]
    Confidence { line: usize, value: f64 },
}

/// One line of a scripted perception file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventRecord {
    Face {
        t_ms: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        identity: Option<String>,
        confidence: f64,
    },
    Emotion { t_ms: u64, category: String, v: f64, a: f64, d: f64 },
}

impl EventRecord {
    pub fn into_event(
        self,
        categories: &CategoryRegistry,
        line: usize,
    ) -> Result<PerceptionEvent, PerceptionError> {
        match self {
            EventRecord::Face { t_ms, identity, confidence } => {
                if !(0.0..=1.0).contains(&confidence) {
                    return Err(PerceptionError::Confidence { line, value: confidence });
                }
                Ok(PerceptionEvent {
                    kind: PerceptionKind::FaceDetected { identity, confidence },
                    at_ms: t_ms,
                })
            }
            EventRecord::Emotion { t_ms, category, v, a, d } => {
                let est = EmotionEstimate::new(category, Vad::new(v, a, d), categories)
                    .map_err(|source| PerceptionError::Invalid { line, source })?;
                Ok(PerceptionEvent { kind: PerceptionKind::EmotionDetected(est), at_ms: t_ms })
            }
        }
    }

    pub fn from_event(e: &PerceptionEvent) -> Self {
        match &e.kind {
            PerceptionKind::FaceDetected { identity, confidence } => EventRecord::Face {
                t_ms: e.at_ms,
                identity: identity.clone(),
                confidence: *confidence,
            },
            PerceptionKind::EmotionDetected(est) => EventRecord::Emotion {
                t_ms: e.at_ms,
                category: est.category.clone(),
                v: est.vad.valence,
                a: est.vad.arousal,
                d: est.vad.dominance,
            },
        }
    }
}

/// Parses one JSON-lines record; `line` is 1-based and only used in errors.
pub fn parse_event_line(
    text: &str,
    categories: &CategoryRegistry,
    line: usize,
) -> Result<PerceptionEvent, PerceptionError> {
    let rec: EventRecord = serde_json::from_str(text)
        .map_err(|e| PerceptionError::Parse { line, message: e.to_string() })?;
    rec.into_event(categories, line)
}

/// Parses a whole scripted file. Blank lines are skipped. Events are
/// returned sorted by time (stable for equal timestamps).
pub fn parse_script(
    text: &str,
    categories: &CategoryRegistry,
) -> Result<Vec<PerceptionEvent>, PerceptionError> {
    let mut events = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_event_line(l, categories, i + 1))
        .collect::<Result<Vec<_>, _>>()?;
    events.sort_by_key(|e| e.at_ms);
    Ok(events)
}
