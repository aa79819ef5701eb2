//! Event schema: the fixed ontology the prompts and the parser operate on.
//!
//! The schema is never modified during optimization; only the task
//! instruction and the per-type guideline texts evolve.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};

/// One event type: a name, a parent-event name, and its argument roles.
///
/// Every event implicitly carries a `mention` field (the trigger span);
/// `roles` lists only the argument roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventType {
    pub name: String,
    pub parent: String,
    pub roles: Vec<String>,
}

/// Ordered list of event types. Declaration order is significant: prompt
/// composition and instance serialization follow it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSchema {
    pub events: Vec<EventType>,
}

impl EventSchema {
    /// Validates name uniqueness and per-event role uniqueness.
    pub fn new(events: Vec<EventType>) -> Result<Self> {
        let mut seen = HashSet::new();
        for ev in &events {
            if ev.name.is_empty() {
                return Err(Error::Schema("event type with empty name".into()));
            }
            if !seen.insert(ev.name.clone()) {
                return Err(Error::Schema(format!("duplicate event type `{}`", ev.name)));
            }
            let mut roles = HashSet::new();
            for role in &ev.roles {
                if role == "mention" {
                    return Err(Error::Schema(format!(
                        "event type `{}` declares reserved role `mention`",
                        ev.name
                    )));
                }
                if !roles.insert(role.clone()) {
                    return Err(Error::Schema(format!(
                        "duplicate role `{}` in event type `{}`",
                        role, ev.name
                    )));
                }
            }
        }
        Ok(Self { events })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: EventSchema = serde_json::from_str(text)?;
        Self::new(raw.events)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn event(&self, name: &str) -> Option<&EventType> {
        self.events.iter().find(|e| e.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.event(name).is_some()
    }

    /// Event type names in declaration order.
    pub fn type_names(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_types() -> Vec<EventType> {
        vec![
            EventType {
                name: "Die".into(),
                parent: "LifeEvent".into(),
                roles: vec!["agent".into(), "victim".into()],
            },
            EventType {
                name: "Meet".into(),
                parent: "ContactEvent".into(),
                roles: vec!["entity".into(), "place".into()],
            },
        ]
    }

    #[test]
    fn accepts_unique_names() {
        let schema = EventSchema::new(two_types()).unwrap();
        assert_eq!(schema.len(), 2);
        assert!(schema.contains("Die"));
        assert!(!schema.contains("Attack"));
    }

    #[test]
    fn rejects_duplicate_event_names() {
        let mut events = two_types();
        events.push(events[0].clone());
        assert!(EventSchema::new(events).is_err());
    }

    #[test]
    fn rejects_duplicate_roles() {
        let events = vec![EventType {
            name: "Die".into(),
            parent: "LifeEvent".into(),
            roles: vec!["agent".into(), "agent".into()],
        }];
        assert!(EventSchema::new(events).is_err());
    }

    #[test]
    fn rejects_reserved_mention_role() {
        let events = vec![EventType {
            name: "Die".into(),
            parent: "LifeEvent".into(),
            roles: vec!["mention".into()],
        }];
        assert!(EventSchema::new(events).is_err());
    }
}
