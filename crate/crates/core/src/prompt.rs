//! Prompt states: a task instruction plus per-event-type guideline texts,
//! with lineage tracking and the guideline-inheritance edit rule.
//!
//! A child state copies every guideline it does not edit byte-for-byte from
//! its parent; `edited_types` records exactly what changed. Composition
//! renders the instruction followed by one Python-style class block per
//! event type, in schema declaration order.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::schema::EventSchema;

/// Pseudo-type recorded in `edited_types` when the instruction itself was
/// rewritten, so edit statistics can count instruction rewrites separately
/// from guideline rewrites.
pub const INSTRUCTION_EDIT_MARKER: &str = "__instruction__";

/// Separator line between the instruction and the event definition blocks.
pub const DEFINITIONS_HEADER: &str = "# Here are the event definitions:";

/// Opaque prompt-state identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateId(pub String);

impl StateId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for StateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A versioned prompt: instruction text, guideline text per event type, and
/// lineage. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptState {
    pub id: StateId,
    pub parent: Option<StateId>,
    pub depth: u32,
    pub instruction: String,
    /// Event type → guideline text, ordered by schema declaration order.
    /// A guideline is either prose (wrapped into a class block at
    /// composition time) or a full `class Name(Parent):` block (embedded
    /// verbatim).
    pub guidelines: IndexMap<String, String>,
    pub edited_types: BTreeSet<String>,
}

impl PromptState {
    /// Builds a root state: no parent, depth 0, empty edit set. Guidelines
    /// must cover every schema type; they are reordered to schema order.
    pub fn root(
        id: StateId,
        instruction: String,
        guidelines: IndexMap<String, String>,
        schema: &EventSchema,
    ) -> Result<Self> {
        let ordered = order_guidelines(&guidelines, schema)?;
        Ok(Self {
            id,
            parent: None,
            depth: 0,
            instruction,
            guidelines: ordered,
            edited_types: BTreeSet::new(),
        })
    }

    /// Applies an edit set to a parent state, producing the child.
    ///
    /// Unmentioned guidelines are copied verbatim; `edited_types` holds the
    /// edit keys plus [`INSTRUCTION_EDIT_MARKER`] when the instruction text
    /// actually changed. An edit naming a type outside the schema is
    /// rejected and no child is created.
    pub fn apply_edits(
        parent: &PromptState,
        child_id: StateId,
        new_instruction: Option<String>,
        guideline_edits: &BTreeMap<String, String>,
        schema: &EventSchema,
    ) -> Result<Self> {
        for ty in guideline_edits.keys() {
            if !schema.contains(ty) {
                return Err(Error::UnknownEditType(ty.clone()));
            }
        }
        let mut edited_types: BTreeSet<String> = guideline_edits.keys().cloned().collect();
        let instruction = match new_instruction {
            Some(text) if text != parent.instruction => {
                edited_types.insert(INSTRUCTION_EDIT_MARKER.to_string());
                text
            }
            Some(text) => text,
            None => parent.instruction.clone(),
        };
        let guidelines = parent
            .guidelines
            .iter()
            .map(|(ty, text)| {
                let text = guideline_edits.get(ty).unwrap_or(text).clone();
                (ty.clone(), text)
            })
            .collect();
        Ok(Self {
            id: child_id,
            parent: Some(parent.id.clone()),
            depth: parent.depth + 1,
            instruction,
            guidelines,
            edited_types,
        })
    }

    /// Edited guideline types, excluding the instruction marker.
    pub fn edited_guideline_types(&self) -> impl Iterator<Item = &String> {
        self.edited_types
            .iter()
            .filter(|t| t.as_str() != INSTRUCTION_EDIT_MARKER)
    }

    pub fn instruction_edited(&self) -> bool {
        self.edited_types.contains(INSTRUCTION_EDIT_MARKER)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("prompt state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn order_guidelines(
    guidelines: &IndexMap<String, String>,
    schema: &EventSchema,
) -> Result<IndexMap<String, String>> {
    for ty in guidelines.keys() {
        if !schema.contains(ty) {
            return Err(Error::Compose {
                event_type: ty.clone(),
                reason: "guideline for unknown event type".into(),
            });
        }
    }
    let mut ordered = IndexMap::new();
    for ty in schema.type_names() {
        let text = guidelines.get(ty).ok_or_else(|| Error::Compose {
            event_type: ty.to_string(),
            reason: "missing guideline for declared event type".into(),
        })?;
        ordered.insert(ty.to_string(), text.clone());
    }
    Ok(ordered)
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

/// Renders the full prompt text: instruction, separator line, then one class
/// block per event type in schema order. Pure function of (state, schema);
/// identical inputs yield identical bytes.
pub fn compose(state: &PromptState, schema: &EventSchema) -> Result<String> {
    let definitions = compose_definitions(state, schema)?;
    Ok(format!(
        "{}\n\n{}\n\n{}",
        state.instruction, DEFINITIONS_HEADER, definitions
    ))
}

/// Renders only the event definition blocks, blank-line separated. Used both
/// by [`compose`] and as the `{event_definitions}` binding of the
/// meta-prompts.
pub fn compose_definitions(state: &PromptState, schema: &EventSchema) -> Result<String> {
    for ty in state.guidelines.keys() {
        if !schema.contains(ty) {
            return Err(Error::Compose {
                event_type: ty.clone(),
                reason: "guideline for unknown event type".into(),
            });
        }
    }
    let mut blocks = Vec::with_capacity(schema.len());
    for event in &schema.events {
        let guideline = state.guidelines.get(&event.name).ok_or_else(|| Error::Compose {
            event_type: event.name.clone(),
            reason: "missing guideline for declared event type".into(),
        })?;
        blocks.push(render_class_block(&event.name, &event.parent, &event.roles, guideline)?);
    }
    Ok(blocks.join("\n\n"))
}

/// Renders one class block. Guidelines that already are class blocks (they
/// start with `class `) embed verbatim after a header check; prose becomes
/// the docstring with one commented line per role.
fn render_class_block(
    name: &str,
    parent: &str,
    roles: &[String],
    guideline: &str,
) -> Result<String> {
    if guideline.trim_start().starts_with("class ") {
        let trimmed = guideline.trim_start();
        let header = format!("class {name}(");
        if !trimmed.starts_with(&header) {
            return Err(Error::Compose {
                event_type: name.to_string(),
                reason: format!(
                    "guideline block header does not match: expected `{header}...`"
                ),
            });
        }
        return Ok(trimmed.trim_end().to_string());
    }
    let mut block = format!("class {name}({parent}):\n    \"\"\"\n");
    for line in guideline.lines() {
        if line.is_empty() {
            block.push('\n');
        } else {
            block.push_str("    ");
            block.push_str(line);
            block.push('\n');
        }
    }
    block.push_str("    \"\"\"\n");
    block.push_str("    mention: str  # the text span that triggers the event\n");
    for role in roles {
        block.push_str(&format!("    {role}: List  # text spans for the '{role}' role\n"));
    }
    Ok(block.trim_end().to_string())
}

// ---------------------------------------------------------------------------
// State store and trajectories
// ---------------------------------------------------------------------------

/// In-memory id → state map with deterministic id assignment. Writes are
/// serialized by requiring `&mut self`; states themselves are immutable and
/// freely shareable once inserted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StateStore {
    states: BTreeMap<StateId, PromptState>,
    next_id: u64,
}

impl StateStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, state: PromptState) -> Result<StateId> {
        if self.states.contains_key(&state.id) {
            return Err(Error::Lineage(format!("duplicate state id `{}`", state.id)));
        }
        if let Some(parent) = &state.parent {
            let parent_state = self
                .states
                .get(parent)
                .ok_or_else(|| Error::Lineage(format!("unknown parent id `{parent}`")))?;
            if state.depth != parent_state.depth + 1 {
                return Err(Error::Lineage(format!(
                    "state `{}` depth {} does not extend parent depth {}",
                    state.id, state.depth, parent_state.depth
                )));
            }
        } else if state.depth != 0 {
            return Err(Error::Lineage(format!(
                "root state `{}` must have depth 0",
                state.id
            )));
        }
        let id = state.id.clone();
        self.states.insert(id.clone(), state);
        Ok(id)
    }

    /// Applies edits to `parent_id` and stores the child under a fresh id.
    pub fn derive(
        &mut self,
        parent_id: &StateId,
        new_instruction: Option<String>,
        guideline_edits: &BTreeMap<String, String>,
        schema: &EventSchema,
    ) -> Result<StateId> {
        let parent = self
            .get(parent_id)
            .ok_or_else(|| Error::Lineage(format!("unknown parent id `{parent_id}`")))?
            .clone();
        self.next_id += 1;
        let child_id = StateId(format!("s{:04}", self.next_id));
        let child =
            PromptState::apply_edits(&parent, child_id, new_instruction, guideline_edits, schema)?;
        self.insert(child)
    }

    pub fn get(&self, id: &StateId) -> Option<&PromptState> {
        self.states.get(id)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateId, &PromptState)> {
        self.states.iter()
    }

    /// Ancestor chain of `id`, root first, ending at `id` itself.
    pub fn lineage(&self, id: &StateId) -> Result<Vec<&PromptState>> {
        let mut chain = Vec::new();
        let mut cursor = Some(id.clone());
        while let Some(cur) = cursor {
            let state = self
                .get(&cur)
                .ok_or_else(|| Error::Lineage(format!("broken parent link at `{cur}`")))?;
            chain.push(state);
            cursor = state.parent.clone();
            if chain.len() > self.states.len() {
                return Err(Error::Lineage("cyclic lineage".into()));
            }
        }
        chain.reverse();
        Ok(chain)
    }
}

/// Composed prompt texts along the lineage of `id`, root first. The list has
/// `depth + 1` elements; the last is the composition of `id` itself.
pub fn trajectory(store: &StateStore, id: &StateId, schema: &EventSchema) -> Result<Vec<String>> {
    store
        .lineage(id)?
        .into_iter()
        .map(|state| compose(state, schema))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::EventType;

    fn schema() -> EventSchema {
        EventSchema::new(vec![
            EventType {
                name: "Die".into(),
                parent: "LifeEvent".into(),
                roles: vec!["victim".into(), "place".into()],
            },
            EventType {
                name: "Meet".into(),
                parent: "ContactEvent".into(),
                roles: vec!["entity".into()],
            },
        ])
        .unwrap()
    }

    fn root(schema: &EventSchema) -> PromptState {
        let mut guidelines = IndexMap::new();
        guidelines.insert("Meet".to_string(), "Face-to-face interactions.".to_string());
        guidelines.insert("Die".to_string(), "A person loses their life.".to_string());
        PromptState::root(
            StateId("root".into()),
            "# Extract the events.".into(),
            guidelines,
            schema,
        )
        .unwrap()
    }

    #[test]
    fn compose_orders_blocks_by_schema() {
        let s = schema();
        let state = root(&s);
        let text = compose(&state, &s).unwrap();
        let die = text.find("class Die(LifeEvent):").unwrap();
        let meet = text.find("class Meet(ContactEvent):").unwrap();
        assert!(die < meet, "blocks must follow schema order");
        assert!(text.starts_with("# Extract the events."));
        assert!(text.contains(DEFINITIONS_HEADER));
        assert!(text.contains("victim: List  #"));
    }

    #[test]
    fn compose_is_deterministic() {
        let s = schema();
        let state = root(&s);
        assert_eq!(compose(&state, &s).unwrap(), compose(&state, &s).unwrap());
    }

    #[test]
    fn compose_rejects_unknown_guideline_type() {
        let s = schema();
        let mut state = root(&s);
        state.guidelines.insert("Attack".to_string(), "x".to_string());
        let err = compose(&state, &s).unwrap_err();
        assert!(err.to_string().contains("Attack"));
    }

    #[test]
    fn verbatim_class_block_embeds_and_validates() {
        let s = schema();
        let mut state = root(&s);
        let block = "class Die(LifeEvent):\n    \"\"\"\n    Updated rules.\n    \"\"\"\n    mention: str  # trigger\n    victim: List  # who died\n    place: List  # where";
        state.guidelines["Die"] = block.to_string();
        let text = compose(&state, &s).unwrap();
        assert!(text.contains("Updated rules."));

        state.guidelines["Die"] = "class Meet(ContactEvent):\n    pass".to_string();
        assert!(compose(&state, &s).is_err());
    }

    #[test]
    fn diff_localized_to_edited_block() {
        let s = schema();
        let a = root(&s);
        let mut store = StateStore::new();
        store.insert(a.clone()).unwrap();
        let mut edits = BTreeMap::new();
        edits.insert("Die".to_string(), "A person dies. Include nominal triggers.".to_string());
        let b_id = store.derive(&a.id, None, &edits, &s).unwrap();
        let b = store.get(&b_id).unwrap();

        let ta = compose(&a, &s).unwrap();
        let tb = compose(b, &s).unwrap();
        // Identical before the Die block body and identical from the Meet
        // block onward.
        let meet_a = ta.find("class Meet").unwrap();
        let meet_b = tb.find("class Meet").unwrap();
        assert_eq!(&ta[meet_a..], &tb[meet_b..]);
        let die_a = ta.find("class Die").unwrap();
        assert_eq!(&ta[..die_a], &tb[..die_a]);
    }

    #[test]
    fn apply_edits_inherits_unedited_guidelines() {
        let s = schema();
        let parent = root(&s);
        let mut edits = BTreeMap::new();
        edits.insert("Die".to_string(), "New Die guideline.".to_string());
        let child = PromptState::apply_edits(
            &parent,
            StateId("c1".into()),
            None,
            &edits,
            &s,
        )
        .unwrap();
        assert_eq!(child.depth, 1);
        assert_eq!(child.parent.as_ref().unwrap().as_str(), "root");
        assert_eq!(
            child.edited_types.iter().collect::<Vec<_>>(),
            vec!["Die"]
        );
        assert_eq!(child.guidelines["Meet"], parent.guidelines["Meet"]);
        assert_eq!(child.guidelines["Die"], "New Die guideline.");
    }

    #[test]
    fn identity_edit_produces_twin() {
        let s = schema();
        let parent = root(&s);
        let child = PromptState::apply_edits(
            &parent,
            StateId("c1".into()),
            Some(parent.instruction.clone()),
            &BTreeMap::new(),
            &s,
        )
        .unwrap();
        assert!(child.edited_types.is_empty());
        assert_eq!(child.instruction, parent.instruction);
        assert_eq!(child.guidelines, parent.guidelines);
    }

    #[test]
    fn instruction_change_sets_marker() {
        let s = schema();
        let parent = root(&s);
        let child = PromptState::apply_edits(
            &parent,
            StateId("c1".into()),
            Some("# New instruction.".into()),
            &BTreeMap::new(),
            &s,
        )
        .unwrap();
        assert!(child.instruction_edited());
        assert_eq!(child.edited_guideline_types().count(), 0);
    }

    #[test]
    fn rejects_edit_for_unknown_type() {
        let s = schema();
        let parent = root(&s);
        let mut edits = BTreeMap::new();
        edits.insert("Attack".to_string(), "x".to_string());
        let err =
            PromptState::apply_edits(&parent, StateId("c1".into()), None, &edits, &s).unwrap_err();
        assert!(matches!(err, Error::UnknownEditType(t) if t == "Attack"));
    }

    #[test]
    fn trajectory_is_prefix_closed() {
        let s = schema();
        let mut store = StateStore::new();
        let root_id = store.insert(root(&s)).unwrap();
        let mut edits = BTreeMap::new();
        edits.insert("Die".to_string(), "v1".to_string());
        let c1 = store.derive(&root_id, None, &edits, &s).unwrap();
        edits.insert("Die".to_string(), "v2".to_string());
        let c2 = store.derive(&c1, None, &edits, &s).unwrap();

        let t_root = trajectory(&store, &root_id, &s).unwrap();
        let t1 = trajectory(&store, &c1, &s).unwrap();
        let t2 = trajectory(&store, &c2, &s).unwrap();
        assert_eq!(t_root.len(), 1);
        assert_eq!(t1.len(), 2);
        assert_eq!(t2.len(), 3);
        assert_eq!(t1[..], t2[..2], "parent trajectory is a strict prefix");
        assert_eq!(t1[0], t_root[0]);
    }

    #[test]
    fn broken_parent_link_errors() {
        let s = schema();
        let mut store = StateStore::new();
        let r = root(&s);
        let child = PromptState {
            id: StateId("c9".into()),
            parent: Some(StateId("ghost".into())),
            depth: 1,
            instruction: r.instruction.clone(),
            guidelines: r.guidelines.clone(),
            edited_types: BTreeSet::new(),
        };
        assert!(store.insert(child).is_err());
    }

    #[test]
    fn json_round_trip_is_byte_exact() {
        let s = schema();
        let state = root(&s);
        let json = state.to_json();
        let back = PromptState::from_json(&json).unwrap();
        assert_eq!(back, state);
        assert_eq!(back.to_json(), json);
    }
}
