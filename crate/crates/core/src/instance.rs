//! Extracted event instances and generic task annotations.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::EventSchema;

/// One extracted event: type, trigger mention, and role → argument spans.
///
/// Instances are normalized against the schema: the argument map carries
/// every declared role of the event type, in declaration order, with empty
/// lists for unfilled roles. This makes equality and the serialize/parse
/// round trip exact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventInstance {
    pub event_type: String,
    pub mention: String,
    pub arguments: IndexMap<String, Vec<String>>,
}

impl EventInstance {
    /// Builds a normalized instance. Rejects unknown event types, unknown
    /// roles, and empty mentions.
    pub fn new(
        event_type: &str,
        mention: &str,
        arguments: impl IntoIterator<Item = (String, Vec<String>)>,
        schema: &EventSchema,
    ) -> Result<Self> {
        let ev = schema
            .event(event_type)
            .ok_or_else(|| Error::Schema(format!("unknown event type `{event_type}`")))?;
        if mention.is_empty() {
            return Err(Error::Schema(format!(
                "empty mention for event type `{event_type}`"
            )));
        }
        let mut args: IndexMap<String, Vec<String>> = ev
            .roles
            .iter()
            .map(|r| (r.clone(), Vec::new()))
            .collect();
        for (role, spans) in arguments {
            match args.get_mut(&role) {
                Some(slot) => *slot = spans,
                None => {
                    return Err(Error::Schema(format!(
                        "role `{role}` is not declared for event type `{event_type}`"
                    )))
                }
            }
        }
        Ok(Self {
            event_type: event_type.to_string(),
            mention: mention.to_string(),
            arguments: args,
        })
    }

    /// Checks the normalized-form invariants against a schema.
    pub fn validate(&self, schema: &EventSchema) -> Result<()> {
        let ev = schema
            .event(&self.event_type)
            .ok_or_else(|| Error::Schema(format!("unknown event type `{}`", self.event_type)))?;
        if self.mention.is_empty() {
            return Err(Error::Schema(format!(
                "empty mention for event type `{}`",
                self.event_type
            )));
        }
        if self.arguments.len() != ev.roles.len()
            || !self
                .arguments
                .keys()
                .zip(ev.roles.iter())
                .all(|(a, b)| a == b)
        {
            return Err(Error::Schema(format!(
                "argument roles of `{}` do not match schema declaration order",
                self.event_type
            )));
        }
        Ok(())
    }

    /// All argument spans in role order, with their role names.
    pub fn argument_spans(&self) -> impl Iterator<Item = (&str, &str)> {
        self.arguments
            .iter()
            .flat_map(|(role, spans)| spans.iter().map(move |s| (role.as_str(), s.as_str())))
    }
}

/// A named-entity span for the NER plug-in task. Position is compared only
/// when both sides carry one; otherwise matching is by text multiset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerSpan {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
}

impl NerSpan {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), offset: None }
    }

    pub fn at(text: impl Into<String>, offset: usize) -> Self {
        Self { text: text.into(), offset: Some(offset) }
    }

    /// Strict-match predicate: text equality, plus offset equality when both
    /// spans carry positions.
    pub fn matches(&self, other: &NerSpan) -> bool {
        self.text == other.text
            && match (self.offset, other.offset) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::EventType;

    fn schema() -> EventSchema {
        EventSchema::new(vec![EventType {
            name: "Die".into(),
            parent: "LifeEvent".into(),
            roles: vec!["agent".into(), "victim".into(), "place".into()],
        }])
        .unwrap()
    }

    #[test]
    fn normalizes_missing_roles_to_empty_lists() {
        let inst = EventInstance::new(
            "Die",
            "killed",
            vec![("victim".to_string(), vec!["soldier".to_string()])],
            &schema(),
        )
        .unwrap();
        assert_eq!(
            inst.arguments.keys().collect::<Vec<_>>(),
            vec!["agent", "victim", "place"]
        );
        assert!(inst.arguments["agent"].is_empty());
        assert_eq!(inst.arguments["victim"], vec!["soldier"]);
    }

    #[test]
    fn rejects_unknown_role() {
        let err = EventInstance::new(
            "Die",
            "killed",
            vec![("weapon".to_string(), vec![])],
            &schema(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_empty_mention() {
        assert!(EventInstance::new("Die", "", vec![], &schema()).is_err());
    }

    #[test]
    fn ner_span_position_rules() {
        assert!(NerSpan::text("flu").matches(&NerSpan::at("flu", 10)));
        assert!(!NerSpan::at("flu", 3).matches(&NerSpan::at("flu", 10)));
        assert!(!NerSpan::text("flu").matches(&NerSpan::text("cold")));
    }
}
