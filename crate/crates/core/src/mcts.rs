//! Monte Carlo Tree Search over prompt states.
//!
//! Each iteration rolls out from the root: nodes with children select a
//! child by UCT, childless nodes run the four-step expansion loop to create
//! up to `expansion_width` children and the rollout continues through the
//! best of them. A node whose batch comes back error-free twice in a row is
//! early-stopped. After a rollout, Q values along the path are updated with
//! the future-reward sequences. The tree checkpoints after every iteration
//! and checkpoints are bit-stable across save/load.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::Gateway;
use crate::instance::EventInstance;
use crate::optimizer::{self, AnsweredQuery, ErrorExample};
use crate::prompt::{self, PromptState, StateId, StateStore};
use crate::schema::EventSchema;
use crate::template::MetaPromptTemplate;

pub type TrainExample = (String, Vec<EventInstance>);

/// How edge Q values aggregate the recorded rollout reward sequences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QAggregation {
    /// Maximum over visits of the mean future reward of that visit.
    #[default]
    MaxOfMeans,
    /// Mean over visits of the mean future reward.
    MeanOfMeans,
}

/// Where the per-edge reward r(s, f) comes from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardSource {
    /// Evaluate the child prompt on the development set.
    #[default]
    Dev,
    /// Score the parent's batch answers.
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Depth limit L.
    #[serde(default = "default_depth_limit")]
    pub depth_limit: u32,
    /// Iteration budget τ.
    #[serde(default = "default_iterations")]
    pub iterations: u32,
    /// Exploration weight c.
    #[serde(default = "default_exploration")]
    pub exploration: f64,
    /// Batch size k per rollout.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Children created when a childless node expands.
    #[serde(default = "default_expansion_width")]
    pub expansion_width: u32,
    /// Consecutive error-free rollouts before a node stops expanding.
    #[serde(default = "default_early_stop_window")]
    pub early_stop_window: u32,
    #[serde(default)]
    pub q_aggregation: QAggregation,
    #[serde(default)]
    pub reward_source: RewardSource,
}

fn default_depth_limit() -> u32 {
    5
}
fn default_iterations() -> u32 {
    12
}
fn default_exploration() -> f64 {
    2.5
}
fn default_batch_size() -> usize {
    15
}
fn default_expansion_width() -> u32 {
    3
}
fn default_early_stop_window() -> u32 {
    2
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            depth_limit: default_depth_limit(),
            iterations: default_iterations(),
            exploration: default_exploration(),
            batch_size: default_batch_size(),
            expansion_width: default_expansion_width(),
            early_stop_window: default_early_stop_window(),
            q_aggregation: QAggregation::MaxOfMeans,
            reward_source: RewardSource::Dev,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth_limit == 0
            || self.iterations == 0
            || self.batch_size == 0
            || self.expansion_width == 0
            || self.early_stop_window == 0
        {
            return Err(Error::Config(
                "search configuration values must be positive".into(),
            ));
        }
        if self.exploration <= 0.0 {
            return Err(Error::Config("exploration weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// One search-tree node. The node represents both a prompt state and the
/// edge (parent, feedback) that produced it; Q and the reward sequences
/// live on that edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchNode {
    pub id: NodeId,
    pub state: StateId,
    pub parent: Option<NodeId>,
    /// Incoming action: the feedback text that produced this state.
    pub feedback: Option<String>,
    pub children: Vec<NodeId>,
    pub depth: u32,
    /// Times this node acted on a rollout path (selection or expansion).
    pub visits: u32,
    /// Edge value under the configured aggregation.
    pub q: f64,
    /// One future-reward sequence {r_t, …} per recorded visit.
    pub reward_sequences: Vec<Vec<f64>>,
    /// r(parent, feedback) recorded when the edge was created.
    pub reward: f64,
    /// Full development-set reward of this node's prompt.
    pub dev_reward: f64,
    pub error_free_streak: u32,
    pub early_stopped: bool,
    /// Error-category histogram accumulated over this node's expansions.
    pub error_categories: BTreeMap<String, u32>,
}

// ---------------------------------------------------------------------------
// UCT selection
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ChildStats {
    pub q: f64,
    pub visits: u32,
}

/// UCT score: Q + c · √(ln N(parent) / N(child)).
pub fn uct_score(q: f64, exploration: f64, parent_visits: u32, child_visits: u32) -> f64 {
    let ln_parent = f64::from(parent_visits.max(1)).ln();
    q + exploration * (ln_parent / f64::from(child_visits)).sqrt()
}

/// Index of the child to follow. An unvisited child is selected
/// unconditionally (earliest first); otherwise the UCT argmax, ties broken
/// by creation order.
pub fn select_child(
    parent_visits: u32,
    children: &[ChildStats],
    exploration: f64,
) -> Option<usize> {
    if children.is_empty() {
        return None;
    }
    if let Some(idx) = children.iter().position(|c| c.visits == 0) {
        return Some(idx);
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (idx, child) in children.iter().enumerate() {
        let score = uct_score(child.q, exploration, parent_visits, child.visits);
        if score > best_score {
            best = idx;
            best_score = score;
        }
    }
    Some(best)
}

// ---------------------------------------------------------------------------
// Batch sampling
// ---------------------------------------------------------------------------

/// Uniform sampling without replacement over training indices, reshuffling
/// the deck when exhausted. Cursor and deck are checkpointed so a resumed
/// run draws the same batches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchSampler {
    deck: Vec<u32>,
    cursor: usize,
}

impl BatchSampler {
    pub fn new(n: usize) -> Self {
        Self { deck: (0..n as u32).collect(), cursor: n }
    }

    pub fn draw(&mut self, k: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
        if self.deck.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.cursor >= self.deck.len() {
                self.deck.shuffle(rng);
                self.cursor = 0;
            }
            out.push(self.deck[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Search engine
// ---------------------------------------------------------------------------

/// Everything the engine borrows from the runner: data, models, templates,
/// and the development-set evaluation hook.
pub struct SearchContext<'a> {
    pub schema: &'a EventSchema,
    pub train: &'a [TrainExample],
    pub task: &'a Gateway,
    pub optimizer: &'a Gateway,
    pub feedback_template: &'a MetaPromptTemplate,
    pub rewrite_template: &'a MetaPromptTemplate,
    /// Evaluates a prompt state on the development set, returning the
    /// scalar reward.
    pub dev_eval: &'a (dyn Fn(&PromptState) -> Result<f64> + 'a),
}

/// Serializable snapshot of the whole search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: SearchConfig,
    pub seed: u64,
    pub iteration: u32,
    pub rng: ChaCha8Rng,
    pub sampler: BatchSampler,
    pub schema: EventSchema,
    pub states: StateStore,
    pub nodes: Vec<SearchNode>,
    pub root: NodeId,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn node(&self, id: NodeId) -> &SearchNode {
        &self.nodes[id.0 as usize]
    }

    pub fn state_of(&self, id: NodeId) -> &PromptState {
        self.states
            .get(&self.node(id).state)
            .expect("checkpoint states cover all nodes")
    }

    /// The node with maximal dev reward; ties broken by smaller depth, then
    /// earlier creation.
    pub fn best_node(&self) -> NodeId {
        best_of(&self.nodes)
    }
}

fn best_of(nodes: &[SearchNode]) -> NodeId {
    let mut best = &nodes[0];
    for node in &nodes[1..] {
        if node.dev_reward > best.dev_reward
            || (node.dev_reward == best.dev_reward && node.depth < best.depth)
        {
            best = node;
        }
    }
    best.id
}

pub struct Search<'a> {
    config: SearchConfig,
    ctx: SearchContext<'a>,
    seed: u64,
    iteration: u32,
    rng: ChaCha8Rng,
    sampler: BatchSampler,
    store: StateStore,
    nodes: Vec<SearchNode>,
    root: NodeId,
}

impl<'a> Search<'a> {
    /// Starts a fresh search: stores the root state and evaluates it on the
    /// dev set so the no-optimization baseline is a best-node candidate.
    pub fn new(
        config: SearchConfig,
        ctx: SearchContext<'a>,
        root_state: PromptState,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if ctx.train.is_empty() {
            return Err(Error::Search("training set is empty".into()));
        }
        let train_len = ctx.train.len();
        let mut store = StateStore::new();
        let root_id = store.insert(root_state)?;
        let dev_reward = {
            let root_state = store.get(&root_id).expect("root stored");
            (ctx.dev_eval)(root_state)?
        };
        let root = NodeId(0);
        let nodes = vec![SearchNode {
            id: root,
            state: root_id,
            parent: None,
            feedback: None,
            children: Vec::new(),
            depth: 0,
            visits: 0,
            q: 0.0,
            reward_sequences: Vec::new(),
            reward: dev_reward,
            dev_reward,
            error_free_streak: 0,
            early_stopped: false,
            error_categories: BTreeMap::new(),
        }];
        Ok(Self {
            config,
            ctx,
            seed,
            iteration: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sampler: BatchSampler::new(train_len),
            store,
            nodes,
            root,
        })
    }

    /// Continues a checkpointed search. The context must carry the same
    /// schema the checkpoint was taken with.
    pub fn resume(checkpoint: Checkpoint, ctx: SearchContext<'a>) -> Result<Self> {
        if *ctx.schema != checkpoint.schema {
            return Err(Error::Search(
                "checkpoint schema differs from the configured schema".into(),
            ));
        }
        if ctx.train.is_empty() {
            return Err(Error::Search("training set is empty".into()));
        }
        Ok(Self {
            config: checkpoint.config,
            ctx,
            seed: checkpoint.seed,
            iteration: checkpoint.iteration,
            rng: checkpoint.rng,
            sampler: checkpoint.sampler,
            store: checkpoint.states,
            nodes: checkpoint.nodes,
            root: checkpoint.root,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config,
            seed: self.seed,
            iteration: self.iteration,
            rng: self.rng.clone(),
            sampler: self.sampler.clone(),
            schema: self.ctx.schema.clone(),
            states: self.store.clone(),
            nodes: self.nodes.clone(),
            root: self.root,
        }
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn is_finished(&self) -> bool {
        self.iteration >= self.config.iterations
    }

    pub fn node(&self, id: NodeId) -> &SearchNode {
        &self.nodes[id.0 as usize]
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    pub fn store(&self) -> &StateStore {
        &self.store
    }

    pub fn best_node(&self) -> NodeId {
        best_of(&self.nodes)
    }

    /// Runs the remaining iterations, checkpointing after each one. On a
    /// backend failure the latest tree is persisted before the error
    /// surfaces, so the run stays resumable.
    pub fn run(&mut self, checkpoint_path: Option<&Path>) -> Result<()> {
        while !self.is_finished() {
            let step_result = self.step();
            if let Some(path) = checkpoint_path {
                self.checkpoint().save(path)?;
            }
            step_result?;
        }
        Ok(())
    }

    /// One MCTS iteration: a rollout to the depth limit or an early stop,
    /// then back-propagation.
    pub fn step(&mut self) -> Result<()> {
        if self.is_finished() {
            return Err(Error::Search("iteration budget exhausted".into()));
        }
        let batch = self.sample_batch();
        let mut current = self.root;
        let mut path: Vec<NodeId> = Vec::new();
        for _ in 0..self.config.depth_limit {
            if self.node(current).early_stopped {
                break;
            }
            if !self.node(current).children.is_empty() {
                let child = self.uct_child(current);
                self.nodes[current.0 as usize].visits += 1;
                path.push(child);
                current = child;
                continue;
            }
            // Expansion branch: the node acts, so it counts a visit even
            // when zero errors skip the expansion.
            debug_assert!(self.node(current).depth < self.config.depth_limit);
            let state = self
                .store
                .get(&self.node(current).state)
                .expect("node state stored")
                .clone();
            let answers = optimizer::generate_answers(
                &state,
                self.ctx.schema,
                &batch,
                self.ctx.task,
                self.config.batch_size,
            )?;
            let errors = optimizer::extract_errors(&answers);
            self.record_categories(current, &errors);
            self.nodes[current.0 as usize].visits += 1;
            if errors.is_empty() {
                let node = &mut self.nodes[current.0 as usize];
                node.error_free_streak += 1;
                if node.error_free_streak >= self.config.early_stop_window {
                    node.early_stopped = true;
                }
                break;
            }
            self.nodes[current.0 as usize].error_free_streak = 0;
            let created = self.expand(current, &state, &answers, &errors)?;
            let Some(next) = self.best_created(&created) else {
                break; // every rewrite failed; nothing to continue through
            };
            path.push(next);
            current = next;
        }
        self.backpropagate(&path);
        self.iteration += 1;
        Ok(())
    }

    /// Highest-reward child among freshly created ones, earliest on ties.
    fn best_created(&self, created: &[NodeId]) -> Option<NodeId> {
        let mut best: Option<NodeId> = None;
        for id in created {
            match best {
                None => best = Some(*id),
                Some(b) if self.node(*id).reward > self.node(b).reward => best = Some(*id),
                _ => {}
            }
        }
        best
    }

    fn sample_batch(&mut self) -> Vec<TrainExample> {
        self.sampler
            .draw(
                self.config.batch_size.min(self.ctx.train.len()),
                &mut self.rng,
            )
            .into_iter()
            .map(|i| self.ctx.train[i as usize].clone())
            .collect()
    }

    fn uct_child(&self, parent: NodeId) -> NodeId {
        let node = self.node(parent);
        let stats: Vec<ChildStats> = node
            .children
            .iter()
            .map(|c| ChildStats { q: self.node(*c).q, visits: self.node(*c).visits })
            .collect();
        let idx = select_child(node.visits, &stats, self.config.exploration)
            .expect("selection requires children");
        node.children[idx]
    }

    fn record_categories(&mut self, node: NodeId, errors: &[ErrorExample]) {
        let histogram = optimizer::categorize_errors(errors);
        let slot = &mut self.nodes[node.0 as usize].error_categories;
        for (category, count) in histogram {
            *slot.entry(category.to_string()).or_insert(0) += count;
        }
    }

    /// Creates up to `expansion_width` children of `parent`: per child one
    /// feedback call and one rewrite call (retried once on a missing
    /// instruction block), then a dev evaluation. Children failing both
    /// rewrite attempts are skipped.
    fn expand(
        &mut self,
        parent: NodeId,
        parent_state: &PromptState,
        answers: &[AnsweredQuery],
        errors: &[ErrorExample],
    ) -> Result<Vec<NodeId>> {
        let trajectory = prompt::trajectory(&self.store, &parent_state.id, self.ctx.schema)?;
        let batch_reward = match self.config.reward_source {
            RewardSource::Batch => Some(batch_reward_of(answers)?),
            RewardSource::Dev => None,
        };
        let mut created = Vec::new();
        for _ in 0..self.config.expansion_width {
            let feedback = optimizer::generate_feedback(
                parent_state,
                self.ctx.schema,
                errors,
                self.ctx.feedback_template,
                self.ctx.optimizer,
            )?;
            let attempt = |store: &mut StateStore| {
                optimizer::rewrite_prompt(
                    store,
                    &parent_state.id,
                    self.ctx.schema,
                    errors,
                    &feedback,
                    self.ctx.rewrite_template,
                    &trajectory,
                    self.ctx.optimizer,
                )
            };
            let child_state_id = match attempt(&mut self.store) {
                Ok(id) => id,
                Err(Error::Rewrite(_)) => match attempt(&mut self.store) {
                    Ok(id) => id,
                    Err(Error::Rewrite(_)) => continue,
                    Err(other) => return Err(other),
                },
                Err(other) => return Err(other),
            };
            let dev_reward = {
                let child_state =
                    self.store.get(&child_state_id).expect("derived state stored");
                (self.ctx.dev_eval)(child_state)?
            };
            let reward = batch_reward.unwrap_or(dev_reward);
            let id = NodeId(self.nodes.len() as u32);
            let depth = self.node(parent).depth + 1;
            self.nodes.push(SearchNode {
                id,
                state: child_state_id,
                parent: Some(parent),
                feedback: Some(feedback),
                children: Vec::new(),
                depth,
                visits: 0,
                q: 0.0,
                reward_sequences: Vec::new(),
                reward,
                dev_reward,
                error_free_streak: 0,
                early_stopped: false,
                error_categories: BTreeMap::new(),
            });
            self.nodes[parent.0 as usize].children.push(id);
            created.push(id);
        }
        Ok(created)
    }

    /// Appends the future-reward sequence {r_t, …, r_T} to every edge on the
    /// path and recomputes its Q under the configured aggregation.
    fn backpropagate(&mut self, path: &[NodeId]) {
        let rewards: Vec<f64> = path.iter().map(|id| self.node(*id).reward).collect();
        for (t, id) in path.iter().enumerate() {
            let node = &mut self.nodes[id.0 as usize];
            node.reward_sequences.push(rewards[t..].to_vec());
            node.q = aggregate_q(&node.reward_sequences, self.config.q_aggregation);
        }
    }
}

/// Q from recorded reward sequences.
pub fn aggregate_q(sequences: &[Vec<f64>], mode: QAggregation) -> f64 {
    if sequences.is_empty() {
        return 0.0;
    }
    let means: Vec<f64> = sequences
        .iter()
        .map(|seq| seq.iter().sum::<f64>() / seq.len().max(1) as f64)
        .collect();
    match mode {
        QAggregation::MaxOfMeans => means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        QAggregation::MeanOfMeans => means.iter().sum::<f64>() / means.len() as f64,
    }
}

/// Reward of a scored batch: the mean-F1 reward over the batch answers.
fn batch_reward_of(answers: &[AnsweredQuery]) -> Result<f64> {
    let preds: Vec<Vec<EventInstance>> = answers
        .iter()
        .map(|a| a.outcome.instances.clone())
        .collect();
    let golds: Vec<Vec<EventInstance>> = answers.iter().map(|a| a.gold.clone()).collect();
    Ok(crate::scorer::score_ee(&preds, &golds)?.reward)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uct_single_child() {
        let children = [ChildStats { q: 10.0, visits: 3 }];
        assert_eq!(select_child(5, &children, 2.5), Some(0));
    }

    #[test]
    fn uct_vanishing_bonus_at_ln_one() {
        // N(s)=1 → ln 1 = 0, so the score reduces to Q.
        assert_eq!(uct_score(0.7, 2.5, 1, 1), 0.7);
    }

    #[test]
    fn uct_worked_example() {
        // Q=0.5, c=2.5, N(s)=4, N(child)=1 → 0.5 + 2.5·√(ln 4) ≈ 3.4435
        let score = uct_score(0.5, 2.5, 4, 1);
        let expected = 0.5 + 2.5 * 4.0_f64.ln().sqrt();
        assert!((score - 3.4435).abs() < 1e-4, "got {score}");
        assert!((score - expected).abs() < 1e-12);
    }

    #[test]
    fn uct_prefers_unvisited_child() {
        let children = [
            ChildStats { q: 99.0, visits: 5 },
            ChildStats { q: 0.0, visits: 0 },
        ];
        assert_eq!(select_child(6, &children, 2.5), Some(1));
    }

    #[test]
    fn uct_tie_breaks_to_earliest() {
        let children = [
            ChildStats { q: 1.0, visits: 2 },
            ChildStats { q: 1.0, visits: 2 },
        ];
        assert_eq!(select_child(4, &children, 2.5), Some(0));
    }

    #[test]
    fn uct_scale_invariance() {
        let children = [
            ChildStats { q: 3.0, visits: 4 },
            ChildStats { q: 5.0, visits: 1 },
            ChildStats { q: 4.0, visits: 2 },
        ];
        let base = select_child(7, &children, 2.5);
        for lambda in [0.25, 2.0, 17.0] {
            let scaled: Vec<ChildStats> = children
                .iter()
                .map(|c| ChildStats { q: c.q * lambda, visits: c.visits })
                .collect();
            assert_eq!(select_child(7, &scaled, 2.5 * lambda), base);
        }
    }

    #[test]
    fn aggregate_modes() {
        let sequences = vec![vec![30.0], vec![20.0]];
        assert_eq!(aggregate_q(&sequences, QAggregation::MaxOfMeans), 30.0);
        assert_eq!(aggregate_q(&sequences, QAggregation::MeanOfMeans), 25.0);
        assert_eq!(aggregate_q(&[], QAggregation::MaxOfMeans), 0.0);
    }

    #[test]
    fn sampler_reshuffles_without_replacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut sampler = BatchSampler::new(5);
        for _ in 0..3 {
            let mut batch = sampler.draw(5, &mut rng);
            batch.sort_unstable();
            assert_eq!(batch, vec![0, 1, 2, 3, 4], "one full deck per draw");
        }
    }

    #[test]
    fn sampler_is_deterministic_per_seed() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sampler = BatchSampler::new(10);
            sampler.draw(6, &mut rng)
        };
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn sampler_round_trips_through_serde() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sampler = BatchSampler::new(8);
        sampler.draw(5, &mut rng);
        let json = serde_json::to_string(&sampler).unwrap();
        let mut restored: BatchSampler = serde_json::from_str(&json).unwrap();
        let mut rng2 = rng.clone();
        assert_eq!(sampler.draw(5, &mut rng), restored.draw(5, &mut rng2));
    }

    #[test]
    fn config_defaults_match_settings() {
        let config = SearchConfig::default();
        assert_eq!(config.depth_limit, 5);
        assert_eq!(config.iterations, 12);
        assert_eq!(config.exploration, 2.5);
        assert_eq!(config.batch_size, 15);
        assert_eq!(config.expansion_width, 3);
        assert_eq!(config.early_stop_window, 2);
        assert!(config.validate().is_ok());
    }

    #[test]
    fn config_rejects_zeroes() {
        let config = SearchConfig { depth_limit: 0, ..SearchConfig::default() };
        assert!(config.validate().is_err());
    }

    #[test]
    fn q_replay_matches_bruteforce() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let visits = rng.gen_range(1..6);
            let sequences: Vec<Vec<f64>> = (0..visits)
                .map(|_| {
                    let len = rng.gen_range(1..5);
                    (0..len).map(|_| rng.gen_range(0.0..100.0)).collect()
                })
                .collect();
            let means: Vec<f64> = sequences
                .iter()
                .map(|s| s.iter().sum::<f64>() / s.len() as f64)
                .collect();
            let expected_max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let expected_mean = means.iter().sum::<f64>() / means.len() as f64;
            assert!(
                (aggregate_q(&sequences, QAggregation::MaxOfMeans) - expected_max).abs() < 1e-12
            );
            assert!(
                (aggregate_q(&sequences, QAggregation::MeanOfMeans) - expected_mean).abs()
                    < 1e-12
            );
        }
    }
}
