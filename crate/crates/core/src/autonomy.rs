//! Autonomous-mode behaviours: greeting detected faces and mirroring
//! detected emotions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::affect::MirrorMap;
use crate::command::Command;
use crate::perception::{PerceptionEvent, PerceptionKind};
use crate::runtime::{Mode, RobotState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutonomyConfig {
    /// Faces below this confidence are ignored.
    pub face_threshold: f64,
    /// Minimum time between two greetings of the same identity.
    pub greeting_cooldown_ms: u64,
    /// `{name}` is replaced by the identity.
    pub greeting_template: String,
    /// Used when the face has no identity.
    pub anonymous_greeting: String,
}

impl Default for AutonomyConfig {
    fn default() -> Self {
        AutonomyConfig {
            face_threshold: 0.7,
            greeting_cooldown_ms: 30_000,
            greeting_template: "Hello, {name}!".into(),
            anonymous_greeting: "Hello there!".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AutonomyEngine {
    config: AutonomyConfig,
    mirror: MirrorMap,
    // None keys the anonymous visitor
    last_greeting: HashMap<Option<String>, u64>,
}

impl AutonomyEngine {
    pub fn new(config: AutonomyConfig, mirror: MirrorMap) -> Self {
        AutonomyEngine { config, mirror, last_greeting: HashMap::new() }
    }

    pub fn config(&self) -> &AutonomyConfig {
        &self.config
    }

    pub fn mirror(&self) -> &MirrorMap {
        &self.mirror
    }

    pub fn greeting_for(&self, identity: Option<&str>) -> Command {
        let anonymous = || {
            Command::say(self.config.anonymous_greeting.clone())
                .unwrap_or_else(|_| Command::Say("Hello!".into()))
        };
        match identity {
            Some(name) => Command::say(self.config.greeting_template.replace("{name}", name))
                .unwrap_or_else(|_| anonymous()),
            None => anonymous(),
        }
    }

    /// Turns a batch of events into actions. Cooldowns are measured on the
    /// events' own timestamps. Returns nothing unless `state` is autonomous.
    pub fn tick(&mut self, state: &RobotState, events: &[PerceptionEvent]) -> Vec<Command> {
        if state.mode != Mode::Autonomous {
            return Vec::new();
        }
        let mut actions = Vec::new();
        for event in events {
            match &event.kind {
                PerceptionKind::FaceDetected { identity, confidence } => {
                    if *confidence < self.config.face_threshold {
                        continue;
                    }
                    let due = match self.last_greeting.get(identity) {
                        None => true,
                        Some(&last) => {
                            event.at_ms.saturating_sub(last) >= self.config.greeting_cooldown_ms
                        }
                    };
                    if due {
                        self.last_greeting.insert(identity.clone(), event.at_ms);
                        actions.push(self.greeting_for(identity.as_deref()));
                    }
                }
                PerceptionKind::EmotionDetected(estimate) => {
                    actions.push(Command::Express(self.mirror.map_emotion_to_expression(estimate)));
                }
            }
        }
        actions
    }

    /// Feeds a scripted session one event at a time, as if the robot were
    /// autonomous throughout. Each action carries its event's timestamp.
    pub fn replay(&mut self, events: &[PerceptionEvent]) -> Vec<(u64, Command)> {
        let state = RobotState { mode: Mode::Autonomous, ..RobotState::default() };
        events
            .iter()
            .flat_map(|e| {
                self.tick(&state, std::slice::from_ref(e)).into_iter().map(move |c| (e.at_ms, c))
            })
            .collect()
    }
}

impl Default for AutonomyEngine {
    fn default() -> Self {
        AutonomyEngine::new(AutonomyConfig::default(), MirrorMap::standard())
    }
}
