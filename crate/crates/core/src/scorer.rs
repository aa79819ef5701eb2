//! Dataset scoring: trigger/argument F1 for event extraction, plus the
//! accuracy and strict-span NER plug-ins for the generalization tasks.
//!
//! Event extraction is scored micro-aggregated over four metrics:
//!
//! - TI: trigger identification — multiset match on trigger mention text
//! - TC: trigger classification — mention text plus event type
//! - AI: argument identification — argument text matched inside a
//!   TC-correct event
//! - AC: argument classification — AI plus role-name equality
//!
//! The scalar reward is the arithmetic mean of the four F1 values on a
//! 0–100 scale. Matching is greedy in serialized order with each gold item
//! consumed at most once, which for pure-equality predicates equals the
//! optimal assignment on triggers and can diverge on arguments only when
//! duplicate (mention, type) pairs carry different argument sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{EventInstance, NerSpan};

/// Confusion counts and derived scores for one metric. Percentages are on a
/// 0–100 scale. When every count is zero there is nothing to get wrong, so
/// the scores are 100 rather than 0; otherwise a zero denominator yields 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricScore {
    pub fn from_counts(tp: u32, fp: u32, fn_: u32) -> Self {
        if tp == 0 && fp == 0 && fn_ == 0 {
            return Self { tp, fp, fn_, precision: 100.0, recall: 100.0, f1: 100.0 };
        }
        let precision = if tp + fp == 0 {
            0.0
        } else {
            100.0 * f64::from(tp) / f64::from(tp + fp)
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            100.0 * f64::from(tp) / f64::from(tp + fn_)
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { tp, fp, fn_, precision, recall, f1 }
    }
}

/// Scores for the four EE metrics plus the scalar reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub ti: MetricScore,
    pub tc: MetricScore,
    pub ai: MetricScore,
    pub ac: MetricScore,
    pub reward: f64,
}

impl ScoreReport {
    fn from_counts(counts: &EeCounts) -> Self {
        let ti = MetricScore::from_counts(counts.ti.0, counts.ti.1, counts.ti.2);
        let tc = MetricScore::from_counts(counts.tc.0, counts.tc.1, counts.tc.2);
        let ai = MetricScore::from_counts(counts.ai.0, counts.ai.1, counts.ai.2);
        let ac = MetricScore::from_counts(counts.ac.0, counts.ac.1, counts.ac.2);
        let reward = reward_from_f1(ti.f1, tc.f1, ai.f1, ac.f1);
        Self { ti, tc, ai, ac, reward }
    }

    /// One Table-style row: the four F1 values and the reward.
    pub fn row(&self) -> String {
        format!(
            "TI {:6.2}  TC {:6.2}  AI {:6.2}  AC {:6.2}  reward {:6.2}",
            self.ti.f1, self.tc.f1, self.ai.f1, self.ac.f1, self.reward
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("score report serializes")
    }
}

/// Arithmetic mean of the four F1 values.
pub fn reward_from_f1(ti: f64, tc: f64, ai: f64, ac: f64) -> f64 {
    (ti + tc + ai + ac) / 4.0
}

/// Recomputes the scalar reward of a report.
pub fn reward(report: &ScoreReport) -> f64 {
    reward_from_f1(report.ti.f1, report.tc.f1, report.ai.f1, report.ac.f1)
}

/// Raw (tp, fp, fn) per metric, exposed so tests can compare greedy counts
/// against an independent matching oracle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EeCounts {
    pub ti: (u32, u32, u32),
    pub tc: (u32, u32, u32),
    pub ai: (u32, u32, u32),
    pub ac: (u32, u32, u32),
}

impl EeCounts {
    fn add(&mut self, other: &EeCounts) {
        for (a, b) in [
            (&mut self.ti, other.ti),
            (&mut self.tc, other.tc),
            (&mut self.ai, other.ai),
            (&mut self.ac, other.ac),
        ] {
            a.0 += b.0;
            a.1 += b.1;
            a.2 += b.2;
        }
    }
}

/// Micro-aggregated EE scores over a dataset of per-example instance lists.
pub fn score_ee(
    predictions: &[Vec<EventInstance>],
    golds: &[Vec<EventInstance>],
) -> Result<ScoreReport> {
    if predictions.len() != golds.len() {
        return Err(Error::Scoring(format!(
            "length mismatch: {} predictions vs {} golds",
            predictions.len(),
            golds.len()
        )));
    }
    let mut total = EeCounts::default();
    for (pred, gold) in predictions.iter().zip(golds) {
        total.add(&example_counts(pred, gold));
    }
    Ok(ScoreReport::from_counts(&total))
}

fn norm(span: &str) -> &str {
    span.trim()
}

/// Greedy confusion counts for a single example.
pub fn example_counts(pred: &[EventInstance], gold: &[EventInstance]) -> EeCounts {
    let mut counts = EeCounts::default();

    // TI: multiset match on mention text.
    counts.ti = greedy_match(pred, gold, |p, g| norm(&p.mention) == norm(&g.mention));
    // TC: mention text plus event type.
    counts.tc = greedy_match(pred, gold, |p, g| {
        norm(&p.mention) == norm(&g.mention) && p.event_type == g.event_type
    });

    // Arguments score against the gold event each prediction TC-paired with.
    let pairing = greedy_pairing(pred, gold, |p, g| {
        norm(&p.mention) == norm(&g.mention) && p.event_type == g.event_type
    });
    let total_pred_args: u32 = pred.iter().map(|e| e.argument_spans().count() as u32).sum();
    let total_gold_args: u32 = gold.iter().map(|e| e.argument_spans().count() as u32).sum();
    let (mut ai_tp, mut ac_tp) = (0u32, 0u32);
    for (p_idx, g_idx) in &pairing {
        let (ai, ac) = pair_argument_matches(&pred[*p_idx], &gold[*g_idx]);
        ai_tp += ai;
        ac_tp += ac;
    }
    counts.ai = (ai_tp, total_pred_args - ai_tp, total_gold_args - ai_tp);
    counts.ac = (ac_tp, total_pred_args - ac_tp, total_gold_args - ac_tp);
    counts
}

/// Greedy multiset matching in serialized order; each gold consumed at most
/// once. Returns (tp, fp, fn).
fn greedy_match(
    pred: &[EventInstance],
    gold: &[EventInstance],
    matches: impl Fn(&EventInstance, &EventInstance) -> bool,
) -> (u32, u32, u32) {
    let pairs = greedy_pairing(pred, gold, matches);
    let tp = pairs.len() as u32;
    (tp, pred.len() as u32 - tp, gold.len() as u32 - tp)
}

/// The (pred index, gold index) pairs chosen by greedy first-come matching.
fn greedy_pairing(
    pred: &[EventInstance],
    gold: &[EventInstance],
    matches: impl Fn(&EventInstance, &EventInstance) -> bool,
) -> Vec<(usize, usize)> {
    let mut consumed = vec![false; gold.len()];
    let mut pairs = Vec::new();
    for (pi, p) in pred.iter().enumerate() {
        for (gi, g) in gold.iter().enumerate() {
            if !consumed[gi] && matches(p, g) {
                consumed[gi] = true;
                pairs.push((pi, gi));
                break;
            }
        }
    }
    pairs
}

/// AI/AC true positives for one TC-paired (prediction, gold) event pair.
/// AI matches argument text against any unconsumed gold argument of the
/// paired event; AC additionally requires the role name to agree. The two
/// metrics keep separate consumption books.
pub fn pair_argument_matches(pred: &EventInstance, gold: &EventInstance) -> (u32, u32) {
    let gold_args: Vec<(&str, &str)> = gold.argument_spans().collect();
    let mut ai_used = vec![false; gold_args.len()];
    let mut ac_used = vec![false; gold_args.len()];
    let (mut ai, mut ac) = (0u32, 0u32);
    for (role, span) in pred.argument_spans() {
        if let Some(slot) = gold_args
            .iter()
            .enumerate()
            .find(|(i, (_, g))| !ai_used[*i] && norm(g) == norm(span))
            .map(|(i, _)| i)
        {
            ai_used[slot] = true;
            ai += 1;
        }
        if let Some(slot) = gold_args
            .iter()
            .enumerate()
            .find(|(i, (r, g))| !ac_used[*i] && *r == role && norm(g) == norm(span))
            .map(|(i, _)| i)
        {
            ac_used[slot] = true;
            ac += 1;
        }
    }
    (ai, ac)
}

// ---------------------------------------------------------------------------
// Plug-in metrics for the generalization tasks
// ---------------------------------------------------------------------------

/// Fraction of exact matches after normalization (trim, lowercase, collapse
/// internal whitespace), on a 0–100 scale.
pub fn score_accuracy(predictions: &[String], golds: &[String]) -> Result<f64> {
    if predictions.len() != golds.len() {
        return Err(Error::Scoring(format!(
            "length mismatch: {} predictions vs {} golds",
            predictions.len(),
            golds.len()
        )));
    }
    if predictions.is_empty() {
        return Ok(0.0);
    }
    let correct = predictions
        .iter()
        .zip(golds)
        .filter(|(p, g)| normalize_label(p) == normalize_label(g))
        .count();
    Ok(100.0 * correct as f64 / predictions.len() as f64)
}

fn normalize_label(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Strict-span micro-F1 on a 0–100 scale. Spans match on text, and on
/// position when both sides carry one.
pub fn score_ner(predictions: &[Vec<NerSpan>], golds: &[Vec<NerSpan>]) -> Result<f64> {
    let (tp, fp, fn_) = ner_counts(predictions, golds)?;
    Ok(MetricScore::from_counts(tp, fp, fn_).f1)
}

/// Micro (tp, fp, fn) for strict-span NER, exposed for the oracle tests.
pub fn ner_counts(
    predictions: &[Vec<NerSpan>],
    golds: &[Vec<NerSpan>],
) -> Result<(u32, u32, u32)> {
    if predictions.len() != golds.len() {
        return Err(Error::Scoring(format!(
            "length mismatch: {} predictions vs {} golds",
            predictions.len(),
            golds.len()
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0u32, 0u32, 0u32);
    for (pred, gold) in predictions.iter().zip(golds) {
        let mut consumed = vec![false; gold.len()];
        for p in pred {
            match gold
                .iter()
                .enumerate()
                .find(|(i, g)| !consumed[*i] && p.matches(g))
            {
                Some((i, _)) => {
                    consumed[i] = true;
                    tp += 1;
                }
                None => fp += 1,
            }
        }
        fn_ += consumed.iter().filter(|c| !**c).count() as u32;
    }
    Ok((tp, fp, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{EventSchema, EventType};

    fn schema() -> EventSchema {
        EventSchema::new(vec![
            EventType {
                name: "Die".into(),
                parent: "LifeEvent".into(),
                roles: vec!["agent".into(), "victim".into(), "place".into()],
            },
            EventType {
                name: "Meet".into(),
                parent: "ContactEvent".into(),
                roles: vec!["entity".into(), "place".into()],
            },
        ])
        .unwrap()
    }

    fn die(s: &EventSchema, mention: &str, victim: &[&str]) -> EventInstance {
        EventInstance::new(
            "Die",
            mention,
            vec![("victim".to_string(), victim.iter().map(|v| v.to_string()).collect())],
            s,
        )
        .unwrap()
    }

    #[test]
    fn identity_scores_perfect() {
        let s = schema();
        let gold = vec![vec![die(&s, "killed", &["soldier"])], vec![]];
        let report = score_ee(&gold, &gold).unwrap();
        assert_eq!(report.ti.f1, 100.0);
        assert_eq!(report.tc.f1, 100.0);
        assert_eq!(report.ai.f1, 100.0);
        assert_eq!(report.ac.f1, 100.0);
        assert_eq!(report.reward, 100.0);
    }

    #[test]
    fn empty_versus_empty_is_perfect() {
        let report = score_ee(&[vec![]], &[vec![]]).unwrap();
        assert_eq!(report.reward, 100.0);
    }

    #[test]
    fn spurious_event_halves_precision() {
        let s = schema();
        let gold = vec![vec![die(&s, "killed", &[])]];
        let meet = EventInstance::new("Meet", "met", vec![], &s).unwrap();
        let pred = vec![vec![die(&s, "killed", &[]), meet]];
        let report = score_ee(&pred, &gold).unwrap();
        assert!((report.ti.precision - 50.0).abs() < 1e-9);
        assert!((report.ti.recall - 100.0).abs() < 1e-9);
        assert!((report.ti.f1 - 66.666_666_666_666_67).abs() < 1e-9);
    }

    #[test]
    fn table_reward_arithmetic() {
        let r = reward_from_f1(39.29, 33.93, 16.47, 16.47);
        assert!((r - 26.54).abs() < 1e-9);
        assert_eq!(reward_from_f1(0.0, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(reward_from_f1(100.0, 100.0, 100.0, 100.0), 100.0);
    }

    #[test]
    fn empty_prediction_on_evented_gold_scores_zero() {
        let s = schema();
        let gold = vec![vec![die(&s, "killed", &["man"])]];
        let report = score_ee(&[vec![]], &gold).unwrap();
        assert_eq!(report.ti.f1, 0.0);
        assert_eq!(report.ac.f1, 0.0);
        assert_eq!(report.reward, 0.0);
    }

    #[test]
    fn argument_requires_type_correct_host() {
        let s = schema();
        // Prediction has the right argument span but the wrong event type,
        // so AI gets no credit.
        let gold = vec![vec![die(&s, "killed", &["soldier"])]];
        let pred_inst = EventInstance::new(
            "Meet",
            "killed",
            vec![("entity".to_string(), vec!["soldier".to_string()])],
            &s,
        )
        .unwrap();
        let report = score_ee(&[vec![pred_inst]], &gold).unwrap();
        assert_eq!(report.ti.tp, 1, "TI is type-blind");
        assert_eq!(report.tc.tp, 0);
        assert_eq!(report.ai.tp, 0);
        assert_eq!(report.ac.tp, 0);
    }

    #[test]
    fn ai_ignores_role_ac_does_not() {
        let s = schema();
        let gold = vec![vec![EventInstance::new(
            "Die",
            "killed",
            vec![("victim".to_string(), vec!["soldier".to_string()])],
            &s,
        )
        .unwrap()]];
        let pred = vec![vec![EventInstance::new(
            "Die",
            "killed",
            vec![("agent".to_string(), vec!["soldier".to_string()])],
            &s,
        )
        .unwrap()]];
        let report = score_ee(&pred, &gold).unwrap();
        assert_eq!(report.ai.tp, 1);
        assert_eq!(report.ac.tp, 0);
    }

    #[test]
    fn hierarchy_holds() {
        let s = schema();
        let gold = vec![vec![die(&s, "killed", &["a"]), die(&s, "died", &["b"])]];
        let pred = vec![vec![
            die(&s, "killed", &["b"]),
            EventInstance::new("Meet", "died", vec![], &s).unwrap(),
        ]];
        let report = score_ee(&pred, &gold).unwrap();
        assert!(report.tc.tp <= report.ti.tp);
        assert!(report.ac.tp <= report.ai.tp);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(score_ee(&[vec![]], &[]).is_err());
        assert!(score_accuracy(&["a".into()], &[]).is_err());
        assert!(score_ner(&[vec![]], &[]).is_err());
    }

    #[test]
    fn accuracy_normalization() {
        let preds = vec!["  Triangle ".to_string(), "square".to_string(), "circle".to_string(), "line".to_string()];
        let golds = vec!["triangle".to_string(), "Square".to_string(), "hexagon".to_string(), "sector".to_string()];
        let acc = score_accuracy(&preds, &golds).unwrap();
        assert!((acc - 50.0).abs() < 1e-9);
        let identical = score_accuracy(&golds, &golds).unwrap();
        assert_eq!(identical, 100.0);
    }

    #[test]
    fn one_of_four_correct_is_25() {
        let preds = vec!["a", "x", "y", "z"].into_iter().map(String::from).collect::<Vec<_>>();
        let golds = vec!["a", "b", "c", "d"].into_iter().map(String::from).collect::<Vec<_>>();
        assert!((score_accuracy(&preds, &golds).unwrap() - 25.0).abs() < 1e-9);
    }

    #[test]
    fn ner_counts_example() {
        // tp=3, fp=1, fn=2 → F1 ≈ 66.67
        let golds = vec![vec![
            NerSpan::text("flu"),
            NerSpan::text("cancer"),
            NerSpan::text("asthma"),
            NerSpan::text("anemia"),
            NerSpan::text("gout"),
        ]];
        let preds = vec![vec![
            NerSpan::text("flu"),
            NerSpan::text("cancer"),
            NerSpan::text("asthma"),
            NerSpan::text("measles"),
        ]];
        let f1 = score_ner(&preds, &golds).unwrap();
        assert!((f1 - 66.666_666_666_666_67).abs() < 1e-9);
    }

    #[test]
    fn ner_identity_and_empty() {
        let gold = vec![vec![NerSpan::at("flu", 4)]];
        assert_eq!(score_ner(&gold, &gold).unwrap(), 100.0);
        assert_eq!(score_ner(&[vec![]], &gold).unwrap(), 0.0);
    }
}
