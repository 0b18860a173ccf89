//! Next-token querying and correctness classification.
//!
//! A [`Backend`] answers one question: given a prompt, what are the
//! log-probabilities of the next token? Classification compares the two
//! candidate completions ` wrong` and ` correct` and normalizes them into
//! an overfitting score in `[0, 1]`. The bundled [`MockBackend`] is a
//! deterministic offline stand-in driven by scripted rules and, failing
//! those, by the demonstration labels visible in the prompt itself.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;

use crate::corpus::Label;
use crate::math;

/// Candidate completion claiming the patch is overfitting.
pub const CANDIDATE_WRONG: &str = " wrong";
/// Candidate completion claiming the patch is correct.
pub const CANDIDATE_CORRECT: &str = " correct";

/// Errors surfaced by backends and by classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LlmError {
    /// The backend could not be reached; `attempts` requests were made.
    BackendUnavailable { attempts: u32, detail: String },
    /// The backend rejected the prompt as too long; not retryable.
    PromptTooLong { detail: String },
    /// The backend answered with something other than the expected shape.
    ProtocolError { detail: String },
    /// The returned distribution contains no token matching a candidate,
    /// neither exactly nor as a prefix.
    MissingCandidate(String),
}

impl fmt::Display for LlmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LlmError::BackendUnavailable { attempts, detail } => {
                write!(f, "backend unavailable after {attempts} attempts: {detail}")
            }
            LlmError::PromptTooLong { detail } => write!(f, "prompt too long: {detail}"),
            LlmError::ProtocolError { detail } => write!(f, "protocol error: {detail}"),
            LlmError::MissingCandidate(candidate) => write!(
                f,
                "next-token distribution lacks candidate {candidate:?} (no exact or prefix match)"
            ),
        }
    }
}

impl core::error::Error for LlmError {}

/// Whether a distribution covers every token or only the top entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completeness {
    TopK(usize),
    Exact,
}

/// Next-token log-probabilities: `(token, logprob)` pairs sorted by
/// descending logprob, ties by ascending token.
#[derive(Debug, Clone, PartialEq)]
pub struct NextTokenDistribution {
    pub entries: Vec<(String, f64)>,
    pub completeness: Completeness,
}

/// Anything that can report next-token log-probabilities for a prompt.
/// `candidates` names the completions the caller cares about; backends may
/// use it to validate coverage but must return whatever the model reports.
pub trait Backend {
    fn query_next_token(
        &self,
        prompt: &str,
        candidates: &[&str],
    ) -> Result<NextTokenDistribution, LlmError>;
}

/// The verdict for one test patch.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectnessPrediction {
    /// `P(wrong) / (P(wrong) + P(correct))`, in `[0, 1]`.
    pub overfitting_score: f64,
    /// `Overfitting` iff the score exceeds 0.5; an exact tie is `Correct`.
    pub label: Label,
    /// Unnormalized `exp(logprob)` of the wrong-candidate token.
    pub p_wrong_raw: f64,
    /// Unnormalized `exp(logprob)` of the correct-candidate token.
    pub p_correct_raw: f64,
}

/// Finds the logprob for `candidate`: an exact token match wins; otherwise
/// the longest token that is a prefix of the candidate (tokenizers often
/// split ` wrong` into ` wr` + `ong`, so the leading piece carries the
/// decision mass).
fn lookup_candidate(entries: &[(String, f64)], candidate: &str) -> Option<f64> {
    if let Some((_, logprob)) = entries.iter().find(|(token, _)| token == candidate) {
        return Some(*logprob);
    }
    let mut best: Option<(usize, f64)> = None;
    for (token, logprob) in entries {
        if token.is_empty() || token == candidate || !candidate.starts_with(token.as_str()) {
            continue;
        }
        match best {
            Some((len, _)) if token.len() <= len => {}
            _ => best = Some((token.len(), *logprob)),
        }
    }
    best.map(|(_, logprob)| logprob)
}

/// Normalizes the two candidate logprobs into an overfitting score.
///
/// The score is computed with max-subtraction before exponentiation, so it
/// is invariant under a common shift of both logprobs and never overflows.
pub fn classify(
    distribution: &NextTokenDistribution,
    candidate_wrong: &str,
    candidate_correct: &str,
) -> Result<CorrectnessPrediction, LlmError> {
    let logprob_wrong = lookup_candidate(&distribution.entries, candidate_wrong)
        .ok_or_else(|| LlmError::MissingCandidate(candidate_wrong.to_string()))?;
    let logprob_correct = lookup_candidate(&distribution.entries, candidate_correct)
        .ok_or_else(|| LlmError::MissingCandidate(candidate_correct.to_string()))?;

    let peak = if logprob_wrong >= logprob_correct {
        logprob_wrong
    } else {
        logprob_correct
    };
    let shifted_wrong = math::exp(logprob_wrong - peak);
    let shifted_correct = math::exp(logprob_correct - peak);
    let overfitting_score = shifted_wrong / (shifted_wrong + shifted_correct);
    let label = if overfitting_score > 0.5 {
        Label::Overfitting
    } else {
        Label::Correct
    };
    Ok(CorrectnessPrediction {
        overfitting_score,
        label,
        p_wrong_raw: math::exp(logprob_wrong),
        p_correct_raw: math::exp(logprob_correct),
    })
}

/// Classifies against the standard ` wrong` / ` correct` candidates.
pub fn classify_standard(
    distribution: &NextTokenDistribution,
) -> Result<CorrectnessPrediction, LlmError> {
    classify(distribution, CANDIDATE_WRONG, CANDIDATE_CORRECT)
}

/// A scripted response: the first rule whose `prompt_contains` substring
/// appears in the prompt supplies the two candidate logprobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedRule {
    pub prompt_contains: String,
    pub logprob_wrong: f64,
    pub logprob_correct: f64,
}

/// Answered demonstration markers the mock scans for in prompts. They are
/// the tails of the demonstration template and never match the unanswered
/// test-patch question.
const VOTE_WRONG: &str = "A: It was wrong";
const VOTE_CORRECT: &str = "A: It was correct";

/// Deterministic offline backend.
///
/// Scripted rules are consulted first, in order. Without a matching rule
/// the mock votes on the demonstrations it can see in the prompt: each
/// answered question contributes a weight of `m - r` where `r` is its
/// position among the `m` answers (earlier demonstrations weigh more), and
/// the vote is Laplace-smoothed so a prompt with no demonstrations yields
/// an even split. Every prompt it is queried with is recorded.
#[derive(Debug, Default)]
pub struct MockBackend {
    rules: Vec<ScriptedRule>,
    seen_prompts: RefCell<Vec<String>>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a scripted rule; rules are matched in insertion order.
    pub fn with_rule(
        mut self,
        prompt_contains: impl Into<String>,
        logprob_wrong: f64,
        logprob_correct: f64,
    ) -> Self {
        self.rules.push(ScriptedRule {
            prompt_contains: prompt_contains.into(),
            logprob_wrong,
            logprob_correct,
        });
        self
    }

    /// Every prompt this backend has been queried with, in order.
    pub fn seen_prompts(&self) -> Vec<String> {
        self.seen_prompts.borrow().clone()
    }

    fn vote_logprobs(prompt: &str) -> (f64, f64) {
        let mut votes: Vec<(usize, bool)> = Vec::new();
        for (pattern, is_wrong) in [(VOTE_WRONG, true), (VOTE_CORRECT, false)] {
            let mut from = 0;
            while let Some(offset) = prompt[from..].find(pattern) {
                votes.push((from + offset, is_wrong));
                from += offset + 1;
            }
        }
        votes.sort_unstable_by_key(|(position, _)| *position);
        let total_votes = votes.len() as f64;
        let mut weight_wrong = 0.0;
        let mut weight_total = 0.0;
        for (rank, (_, is_wrong)) in votes.iter().enumerate() {
            let weight = total_votes - rank as f64;
            weight_total += weight;
            if *is_wrong {
                weight_wrong += weight;
            }
        }
        let p_wrong = (weight_wrong + 1.0) / (weight_total + 2.0);
        (math::ln(p_wrong), math::ln(1.0 - p_wrong))
    }
}

impl Backend for MockBackend {
    fn query_next_token(
        &self,
        prompt: &str,
        _candidates: &[&str],
    ) -> Result<NextTokenDistribution, LlmError> {
        self.seen_prompts.borrow_mut().push(prompt.to_string());
        let (logprob_wrong, logprob_correct) = match self
            .rules
            .iter()
            .find(|rule| prompt.contains(rule.prompt_contains.as_str()))
        {
            Some(rule) => (rule.logprob_wrong, rule.logprob_correct),
            None => Self::vote_logprobs(prompt),
        };
        let mut entries = alloc::vec![
            (CANDIDATE_WRONG.to_string(), logprob_wrong),
            (CANDIDATE_CORRECT.to_string(), logprob_correct),
        ];
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(NextTokenDistribution {
            entries,
            completeness: Completeness::Exact,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{render_demonstration, Demonstration};
    use alloc::vec;

    fn dist(entries: Vec<(&str, f64)>) -> NextTokenDistribution {
        NextTokenDistribution {
            entries: entries
                .into_iter()
                .map(|(t, lp)| (t.to_string(), lp))
                .collect(),
            completeness: Completeness::TopK(5),
        }
    }

    #[test]
    fn classify_normalizes_two_candidates() {
        let prediction =
            classify_standard(&dist(vec![(" wrong", -0.5), (" correct", -1.0)])).unwrap();
        let expected = 1.0 / (1.0 + math::exp(-0.5));
        assert!((prediction.overfitting_score - expected).abs() < 1e-15);
        assert_eq!(prediction.label, Label::Overfitting);
        assert!((prediction.p_wrong_raw - math::exp(-0.5)).abs() < 1e-15);
        assert!((prediction.p_correct_raw - math::exp(-1.0)).abs() < 1e-15);
    }

    #[test]
    fn classify_is_invariant_under_logprob_shift() {
        let base = classify_standard(&dist(vec![(" wrong", -0.5), (" correct", -1.0)])).unwrap();
        let shifted =
            classify_standard(&dist(vec![(" wrong", -700.5), (" correct", -701.0)])).unwrap();
        assert_eq!(
            base.overfitting_score.to_bits(),
            shifted.overfitting_score.to_bits()
        );
        assert_eq!(base.label, shifted.label);
    }

    #[test]
    fn exact_tie_classifies_as_correct() {
        let prediction =
            classify_standard(&dist(vec![(" wrong", -2.0), (" correct", -2.0)])).unwrap();
        assert_eq!(prediction.overfitting_score, 0.5);
        assert_eq!(prediction.label, Label::Correct);
    }

    #[test]
    fn prefix_fallback_picks_longest_prefix_token() {
        let prediction = classify_standard(&dist(vec![
            (" w", -3.0),
            (" wr", -0.2),
            (" correct", -1.2),
        ]))
        .unwrap();
        // " wr" is the longest prefix of " wrong" present.
        assert!((prediction.p_wrong_raw - math::exp(-0.2)).abs() < 1e-15);
    }

    #[test]
    fn exact_match_beats_longer_looking_prefix() {
        let prediction = classify_standard(&dist(vec![
            (" wrong", -2.0),
            (" wr", -0.1),
            (" correct", -1.0),
        ]))
        .unwrap();
        assert!((prediction.p_wrong_raw - math::exp(-2.0)).abs() < 1e-15);
    }

    #[test]
    fn missing_candidate_is_reported() {
        let err = classify_standard(&dist(vec![("foo", -1.0), (" correct", -1.0)])).unwrap_err();
        assert_eq!(err, LlmError::MissingCandidate(" wrong".to_string()));
    }

    #[test]
    fn scripted_rule_takes_precedence() {
        let backend = MockBackend::new().with_rule("MARKER-17", -0.1, -4.0);
        let dist = backend
            .query_next_token("prompt with MARKER-17 inside", &[" wrong", " correct"])
            .unwrap();
        assert_eq!(dist.entries[0], (" wrong".to_string(), -0.1));
        assert_eq!(dist.entries[1], (" correct".to_string(), -4.0));
        assert_eq!(dist.completeness, Completeness::Exact);
    }

    #[test]
    fn vote_fallback_weights_earlier_demonstrations_more() {
        let backend = MockBackend::new();
        let prompt = "x\nQ: It was wrong or correct? A: It was wrong\n\n\
                      y\nQ: It was wrong or correct? A: It was correct\n\n\
                      z\nQ: It was wrong or correct? A: It was wrong\n\n\
                      t\nQ: It was wrong or correct? A: It was";
        let dist = backend
            .query_next_token(prompt, &[" wrong", " correct"])
            .unwrap();
        // Weights 3, 2, 1 for the three answers; wrong gets 3 + 1 = 4 of 6.
        // Laplace: p_wrong = 5/8.
        let prediction = classify_standard(&dist).unwrap();
        assert!((prediction.overfitting_score - 5.0 / 8.0).abs() < 1e-12);
        assert_eq!(prediction.label, Label::Overfitting);
    }

    #[test]
    fn vote_fallback_without_demonstrations_is_an_even_split() {
        let backend = MockBackend::new();
        let dist = backend
            .query_next_token("frag\nQ: It was wrong or correct? A: It was", &[])
            .unwrap();
        let prediction = classify_standard(&dist).unwrap();
        assert_eq!(prediction.overfitting_score, 0.5);
        assert_eq!(prediction.label, Label::Correct);
    }

    #[test]
    fn vote_patterns_match_the_demonstration_template() {
        let wrong = render_demonstration(
            &Demonstration::new("p1", "body", Label::Overfitting, 0.9).unwrap(),
        );
        let correct =
            render_demonstration(&Demonstration::new("p2", "body", Label::Correct, 0.9).unwrap());
        assert!(wrong.contains(VOTE_WRONG));
        assert!(!wrong.contains(VOTE_CORRECT));
        assert!(correct.contains(VOTE_CORRECT));
        // The wrong-pattern is a prefix of neither answer in the correct demo.
        assert!(!correct.contains(VOTE_WRONG));
    }

    #[test]
    fn mock_records_prompts_in_order() {
        let backend = MockBackend::new();
        backend.query_next_token("first", &[]).unwrap();
        backend.query_next_token("second", &[]).unwrap();
        assert_eq!(backend.seen_prompts(), vec!["first", "second"]);
    }
}
