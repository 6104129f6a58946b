//! Emotion estimates and the mirroring map from a perceived emotion to one
//! of the robot's expressions.
//!
//! Estimates carry one categorical label (from a 26-label registry) and
//! valence/arousal/dominance coordinates in [0, 1]. Mapping first consults
//! a category table; categories without a row fall back to the expression
//! whose V/A/D anchor is nearest in Euclidean distance.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::command::{CommandError, ExpressionId, ExpressionRegistry};

pub const CATEGORY_COUNT: usize = 26;

/// The published context-emotion category labels.
pub const STANDARD_CATEGORIES: [&str; CATEGORY_COUNT] = [
    "Affection",
    "Anger",
    "Annoyance",
    "Anticipation",
    "Aversion",
    "Confidence",
    "Disapproval",
    "Disconnection",
    "Disquietment",
    "Doubt/Confusion",
    "Embarrassment",
    "Engagement",
    "Esteem",
    "Excitement",
    "Fatigue",
    "Fear",
    "Happiness",
    "Pain",
    "Peace",
    "Pleasure",
    "Sadness",
    "Sensitivity",
    "Suffering",
    "Surprise",
    "Sympathy",
    "Yearning",
];

const STANDARD_TABLE: [(&str, &str); CATEGORY_COUNT] = [
    ("Affection", "love"),
    ("Anger", "angry"),
    ("Annoyance", "angry"),
    ("Anticipation", "excited"),
    ("Aversion", "disgusted"),
    ("Confidence", "happy"),
    ("Disapproval", "disgusted"),
    ("Disconnection", "neutral"),
    ("Disquietment", "afraid"),
    ("Doubt/Confusion", "confused"),
    ("Embarrassment", "confused"),
    ("Engagement", "happy"),
    ("Esteem", "love"),
    ("Excitement", "excited"),
    ("Fatigue", "sleepy"),
    ("Fear", "afraid"),
    ("Happiness", "happy"),
    ("Pain", "sad"),
    ("Peace", "neutral"),
    ("Pleasure", "happy"),
    ("Sadness", "sad"),
    ("Sensitivity", "sad"),
    ("Suffering", "sad"),
    ("Surprise", "surprised"),
    ("Sympathy", "love"),
    ("Yearning", "sad"),
];

// (expression, valence, arousal, dominance)
const STANDARD_ANCHORS: [(&str, f64, f64, f64); 11] = [
    ("happy", 0.85, 0.60, 0.60),
    ("sad", 0.20, 0.25, 0.30),
    ("angry", 0.15, 0.80, 0.75),
    ("surprised", 0.60, 0.85, 0.45),
    ("afraid", 0.15, 0.80, 0.20),
    ("disgusted", 0.20, 0.55, 0.60),
    ("neutral", 0.50, 0.40, 0.50),
    ("love", 0.90, 0.50, 0.55),
    ("sleepy", 0.50, 0.10, 0.40),
    ("confused", 0.40, 0.55, 0.30),
    ("excited", 0.85, 0.90, 0.65),
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AffectError {
    #[error("unknown emotion category `{0}`")]
    UnknownCategory(String),
    #[error("{0} = {1} is outside [0, 1]")]
    OutOfRange(&'static str, f64),
    #[error("invalid mirroring config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Expression(#[from] CommandError),
    #[error("cannot read mirroring config: {0}")]
    Io(String),
}

/// Point in valence/arousal/dominance space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vad {
    pub valence: f64,
    pub arousal: f64,
    pub dominance: f64,
}

impl Vad {
    pub fn new(valence: f64, arousal: f64, dominance: f64) -> Self {
        Vad { valence, arousal, dominance }
    }

    pub fn squared_distance(&self, other: &Vad) -> f64 {
        let dv = self.valence - other.valence;
        let da = self.arousal - other.arousal;
        let dd = self.dominance - other.dominance;
        dv * dv + da * da + dd * dd
    }

    pub fn scaled(&self, k: f64) -> Vad {
        Vad::new(self.valence * k, self.arousal * k, self.dominance * k)
    }

    fn check_unit(&self) -> Result<(), AffectError> {
        for (name, v) in [
            ("valence", self.valence),
            ("arousal", self.arousal),
            ("dominance", self.dominance),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(AffectError::OutOfRange(name, v));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionEstimate {
    pub category: String,
    #[serde(flatten)]
    pub vad: Vad,
}

impl EmotionEstimate {
    /// Builds an estimate, checking ranges and category membership.
    pub fn new(
        category: impl Into<String>,
        vad: Vad,
        categories: &CategoryRegistry,
    ) -> Result<Self, AffectError> {
        let category = category.into();
        vad.check_unit()?;
        if !categories.contains(&category) {
            return Err(AffectError::UnknownCategory(category));
        }
        Ok(EmotionEstimate { category, vad })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryRegistry {
    labels: Vec<String>,
}

impl CategoryRegistry {
    pub fn new<I, S>(labels: I) -> Result<Self, AffectError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != CATEGORY_COUNT {
            return Err(AffectError::InvalidConfig(format!(
                "category registry needs {CATEGORY_COUNT} labels, got {}",
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.trim().is_empty() || labels[..i].contains(l) {
                return Err(AffectError::InvalidConfig(format!("bad or duplicate category `{l}`")));
            }
        }
        Ok(CategoryRegistry { labels })
    }

    pub fn standard() -> Self {
        CategoryRegistry::new(STANDARD_CATEGORIES).expect("shipped categories are valid")
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }
}

/// On-disk (TOML) form of the mirroring configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorConfigFile {
    pub categories: Vec<String>,
    #[serde(default)]
    pub table: BTreeMap<String, String>,
    /// Expression name → [valence, arousal, dominance].
    pub anchors: BTreeMap<String, [f64; 3]>,
}

/// Validated mirroring configuration.
#[derive(Debug, Clone)]
pub struct MirrorMap {
    categories: CategoryRegistry,
    table: BTreeMap<String, ExpressionId>,
    /// One anchor per expression, in registry order.
    anchors: Vec<(ExpressionId, Vad)>,
}

impl MirrorMap {
    /// The shipped table and anchors over the shipped registries.
    pub fn standard() -> Self {
        let registry = ExpressionRegistry::standard();
        let table = STANDARD_TABLE
            .iter()
            .map(|(c, e)| (c.to_string(), registry.lookup(e).expect("shipped table is valid")))
            .collect();
        let anchors = registry
            .iter()
            .map(|id| {
                let (_, v, a, d) = STANDARD_ANCHORS
                    .iter()
                    .find(|(n, ..)| *n == id.as_str())
                    .expect("every shipped expression has an anchor");
                (id.clone(), Vad::new(*v, *a, *d))
            })
            .collect();
        MirrorMap { categories: CategoryRegistry::standard(), table, anchors }
    }

    pub fn from_parts(
        categories: CategoryRegistry,
        table: BTreeMap<String, ExpressionId>,
        anchors: BTreeMap<ExpressionId, Vad>,
        registry: &ExpressionRegistry,
    ) -> Result<Self, AffectError> {
        for (cat, expr) in &table {
            if !categories.contains(cat) {
                return Err(AffectError::UnknownCategory(cat.clone()));
            }
            if !registry.contains(expr) {
                return Err(AffectError::InvalidConfig(format!("table maps to unknown `{expr}`")));
            }
        }
        if let Some(stray) = anchors.keys().find(|k| !registry.contains(k)) {
            return Err(AffectError::InvalidConfig(format!("anchor for unknown expression `{stray}`")));
        }
        let mut ordered = Vec::with_capacity(registry.len());
        for id in registry.iter() {
            let vad = anchors
                .get(id)
                .ok_or_else(|| AffectError::InvalidConfig(format!("no anchor for `{id}`")))?;
            if ![vad.valence, vad.arousal, vad.dominance].iter().all(|c| c.is_finite()) {
                return Err(AffectError::InvalidConfig(format!("non-finite anchor for `{id}`")));
            }
            ordered.push((id.clone(), *vad));
        }
        Ok(MirrorMap { categories, table, anchors: ordered })
    }

    pub fn from_file_config(
        file: MirrorConfigFile,
        registry: &ExpressionRegistry,
    ) -> Result<Self, AffectError> {
        let categories = CategoryRegistry::new(file.categories)?;
        let table = file
            .table
            .into_iter()
            .map(|(c, e)| Ok((c, registry.lookup(&e)?)))
            .collect::<Result<BTreeMap<_, _>, AffectError>>()?;
        let anchors = file
            .anchors
            .into_iter()
            .map(|(e, [v, a, d])| Ok((registry.lookup(&e)?, Vad::new(v, a, d))))
            .collect::<Result<BTreeMap<_, _>, AffectError>>()?;
        MirrorMap::from_parts(categories, table, anchors, registry)
    }

    pub fn load(path: &Path, registry: &ExpressionRegistry) -> Result<Self, AffectError> {
        let text = std::fs::read_to_string(path).map_err(|e| AffectError::Io(e.to_string()))?;
        let file: MirrorConfigFile =
            toml::from_str(&text).map_err(|e| AffectError::InvalidConfig(e.to_string()))?;
        MirrorMap::from_file_config(file, registry)
    }

    pub fn to_file_config(&self) -> MirrorConfigFile {
        MirrorConfigFile {
            categories: self.categories.iter().map(str::to_owned).collect(),
            table: self.table.iter().map(|(c, e)| (c.clone(), e.to_string())).collect(),
            anchors: self
                .anchors
                .iter()
                .map(|(e, v)| (e.to_string(), [v.valence, v.arousal, v.dominance]))
                .collect(),
        }
    }

    pub fn categories(&self) -> &CategoryRegistry {
        &self.categories
    }

    pub fn anchors(&self) -> &[(ExpressionId, Vad)] {
        &self.anchors
    }

    /// Same map with every anchor multiplied by `k`.
    pub fn with_scaled_anchors(&self, k: f64) -> MirrorMap {
        let mut out = self.clone();
        for (_, vad) in &mut out.anchors {
            *vad = vad.scaled(k);
        }
        out
    }

    pub fn without_table(&self) -> MirrorMap {
        MirrorMap { table: BTreeMap::new(), ..self.clone() }
    }

    pub fn table_entry(&self, category: &str) -> Option<&ExpressionId> {
        self.table.get(category)
    }

    /// Expression whose anchor is nearest to `point`; first in registry
    /// order on ties.
    pub fn nearest_anchor(&self, point: &Vad) -> &ExpressionId {
        let mut best = &self.anchors[0];
        let mut best_d = point.squared_distance(&best.1);
        for entry in &self.anchors[1..] {
            let d = point.squared_distance(&entry.1);
            if d < best_d {
                best = entry;
                best_d = d;
            }
        }
        &best.0
    }

    pub fn map_emotion_to_expression(&self, e: &EmotionEstimate) -> ExpressionId {
        match self.table.get(&e.category) {
            Some(id) => id.clone(),
            None => self.nearest_anchor(&e.vad).clone(),
        }
    }
}

impl Default for MirrorMap {
    fn default() -> Self {
        MirrorMap::standard()
    }
}

/// Maps with the shipped configuration.
pub fn map_emotion_to_expression(e: &EmotionEstimate) -> ExpressionId {
    MirrorMap::standard().map_emotion_to_expression(e)
}
