//! In-context-learning prompt assembly under a token budget.
//!
//! A prompt is the concatenation, separated by blank lines, of:
//! retrieved demonstrations, guidance blocks (bug description, execution
//! trace, failing cases, coverage), and the test-patch question. When the
//! encoded prompt exceeds the token budget, parts degrade in a fixed
//! order: lowest-similarity demonstrations are dropped first, then the
//! coverage block falls back to its summary, then the execution trace is
//! dropped, then failing-test bodies reduce to names. The bug description
//! and the test-patch question are never sacrificed; if the prompt still
//! exceeds the budget, assembly fails.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::bpe::Vocabulary;
use crate::corpus::Label;
use crate::guidance::{GuidanceBlock, GuidanceKind};

/// The fixed question appended to every patch text. The model is expected
/// to continue with ` wrong` or ` correct`.
pub const QUESTION_SUFFIX: &str = "\nQ: It was wrong or correct? A: It was";

/// Completion word used in demonstrations of clean patches.
pub const LABEL_WORD_CORRECT: &str = "correct";
/// Completion word used in demonstrations of overfitting patches.
pub const LABEL_WORD_WRONG: &str = "wrong";

/// Errors from prompt assembly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptError {
    /// The patch fragment under test is empty or whitespace-only.
    EmptyFragment,
    /// A demonstration was built from a record without a label.
    UnlabeledDemonstration(String),
    /// Even the maximally reduced prompt exceeds the budget.
    BudgetTooSmall { required: usize, budget: usize },
}

impl fmt::Display for PromptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptError::EmptyFragment => write!(f, "patch fragment is empty"),
            PromptError::UnlabeledDemonstration(id) => {
                write!(f, "demonstration patch {id} has no label")
            }
            PromptError::BudgetTooSmall { required, budget } => write!(
                f,
                "prompt needs {required} tokens even after maximal reduction, budget is {budget}"
            ),
        }
    }
}

impl core::error::Error for PromptError {}

/// One labeled example shown to the model before the test patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub patch_id: String,
    pub patch_text: String,
    pub label_word: &'static str,
    pub similarity: f64,
}

impl Demonstration {
    /// Builds a demonstration from a labeled patch; unlabeled records are
    /// rejected because they cannot supply a completion word.
    pub fn new(
        patch_id: impl Into<String>,
        patch_text: impl Into<String>,
        label: Label,
        similarity: f64,
    ) -> Result<Self, PromptError> {
        let patch_id = patch_id.into();
        let label_word = match label {
            Label::Correct => LABEL_WORD_CORRECT,
            Label::Overfitting => LABEL_WORD_WRONG,
            Label::Unlabeled => return Err(PromptError::UnlabeledDemonstration(patch_id)),
        };
        Ok(Demonstration {
            patch_id,
            patch_text: patch_text.into(),
            label_word,
            similarity,
        })
    }
}

/// Renders the question part for the patch under test. The text ends with
/// `A: It was` so that the model's next token answers the question.
pub fn render_test_patch(fragment: &str) -> Result<String, PromptError> {
    if fragment.trim().is_empty() {
        return Err(PromptError::EmptyFragment);
    }
    Ok(format!("{fragment}{QUESTION_SUFFIX}"))
}

/// Renders one demonstration: patch text, the fixed question, and the
/// answered label word.
pub fn render_demonstration(demo: &Demonstration) -> String {
    format!(
        "{}{QUESTION_SUFFIX} {}\n",
        demo.patch_text, demo.label_word
    )
}

/// Placement of demonstrations relative to their retrieval similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoOrder {
    MostSimilarFirst,
    LeastSimilarFirst,
}

/// Identity of one prompt part, as recorded in the assembly manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartKind {
    Demonstration { patch_id: String },
    Bug,
    Trace,
    Case,
    Coverage,
    TestPatch,
}

/// What became of a part during assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartStatus {
    Included,
    Reduced,
    Dropped,
}

impl PartStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PartStatus::Included => "included",
            PartStatus::Reduced => "reduced",
            PartStatus::Dropped => "dropped",
        }
    }
}

/// One manifest row: which part, and whether it survived intact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub kind: PartKind,
    pub status: PartStatus,
}

impl ManifestEntry {
    /// Canonical `part=status` rendering, e.g. `demo:p042=dropped`.
    pub fn render(&self) -> String {
        let kind = match &self.kind {
            PartKind::Demonstration { patch_id } => return format!("demo:{patch_id}={}", self.status.as_str()),
            PartKind::Bug => "bug",
            PartKind::Trace => "trace",
            PartKind::Case => "case",
            PartKind::Coverage => "coverage",
            PartKind::TestPatch => "test_patch",
        };
        format!("{kind}={}", self.status.as_str())
    }
}

/// A finished prompt: its text, its measured token count, and the fate of
/// every part that was offered to the assembler.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledPrompt {
    pub text: String,
    pub token_count: usize,
    pub parts_manifest: Vec<ManifestEntry>,
}

impl AssembledPrompt {
    /// The manifest as canonical `part=status` lines.
    pub fn manifest_lines(&self) -> Vec<String> {
        self.parts_manifest.iter().map(ManifestEntry::render).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotState {
    Included,
    Reduced,
    Dropped,
}

struct DemoSlot<'a> {
    demo: &'a Demonstration,
    dropped: bool,
}

struct GuidanceSlot<'a> {
    block: &'a GuidanceBlock,
    state: SlotState,
}

fn push_part<'a>(parts: &mut Vec<&'a str>, text: &'a str) {
    parts.push(text.strip_suffix('\n').unwrap_or(text));
}

fn build_text(
    demo_texts: &[String],
    demo_slots: &[DemoSlot<'_>],
    guidance_slots: &[GuidanceSlot<'_>],
    test_prompt: &str,
) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for (text, slot) in demo_texts.iter().zip(demo_slots) {
        if !slot.dropped {
            push_part(&mut parts, text);
        }
    }
    for slot in guidance_slots {
        match slot.state {
            SlotState::Included => push_part(&mut parts, &slot.block.text),
            SlotState::Reduced => {
                let reduced = slot.block.reduced.as_deref().unwrap_or(&slot.block.text);
                push_part(&mut parts, reduced);
            }
            SlotState::Dropped => {}
        }
    }
    push_part(&mut parts, test_prompt);
    parts.join("\n\n")
}

/// Among surviving demonstrations, picks the one to drop next: lowest
/// similarity first, ties broken toward the larger patch id so the patches
/// ranked higher by retrieval are kept.
fn next_demo_to_drop(slots: &[DemoSlot<'_>]) -> Option<usize> {
    let mut candidate: Option<usize> = None;
    for (i, slot) in slots.iter().enumerate() {
        if slot.dropped {
            continue;
        }
        match candidate {
            None => candidate = Some(i),
            Some(c) => {
                let current = &slots[c];
                let ord = slot
                    .demo
                    .similarity
                    .total_cmp(&current.demo.similarity)
                    .then_with(|| current.demo.patch_id.cmp(&slot.demo.patch_id));
                if ord == Ordering::Less {
                    candidate = Some(i);
                }
            }
        }
    }
    candidate
}

/// Assembles the prompt for one test patch.
///
/// `demos` may arrive in any order; they are placed according to `order`
/// (ties by patch id). `guidance` blocks keep their given order.
/// `test_prompt` must be the output of [`render_test_patch`]. The finished
/// text is re-encoded with `vocab` after every degradation step, so the
/// returned `token_count` is exact and `<= budget`.
pub fn assemble(
    demos: &[Demonstration],
    guidance: &[GuidanceBlock],
    test_prompt: &str,
    budget: usize,
    vocab: &Vocabulary,
    order: DemoOrder,
) -> Result<AssembledPrompt, PromptError> {
    let mut ordered: Vec<&Demonstration> = demos.iter().collect();
    match order {
        DemoOrder::MostSimilarFirst => ordered.sort_by(|a, b| {
            b.similarity
                .total_cmp(&a.similarity)
                .then_with(|| a.patch_id.cmp(&b.patch_id))
        }),
        DemoOrder::LeastSimilarFirst => ordered.sort_by(|a, b| {
            a.similarity
                .total_cmp(&b.similarity)
                .then_with(|| a.patch_id.cmp(&b.patch_id))
        }),
    }
    let demo_texts: Vec<String> = ordered.iter().map(|d| render_demonstration(d)).collect();
    let mut demo_slots: Vec<DemoSlot<'_>> = ordered
        .iter()
        .map(|demo| DemoSlot {
            demo,
            dropped: false,
        })
        .collect();
    let mut guidance_slots: Vec<GuidanceSlot<'_>> = guidance
        .iter()
        .map(|block| GuidanceSlot {
            block,
            state: SlotState::Included,
        })
        .collect();

    loop {
        let text = build_text(&demo_texts, &demo_slots, &guidance_slots, test_prompt);
        let token_count = vocab.encode(&text).len();
        if token_count <= budget {
            let mut parts_manifest = Vec::new();
            for slot in &demo_slots {
                parts_manifest.push(ManifestEntry {
                    kind: PartKind::Demonstration {
                        patch_id: slot.demo.patch_id.clone(),
                    },
                    status: if slot.dropped {
                        PartStatus::Dropped
                    } else {
                        PartStatus::Included
                    },
                });
            }
            for slot in &guidance_slots {
                let kind = match slot.block.kind {
                    GuidanceKind::Bug => PartKind::Bug,
                    GuidanceKind::Trace => PartKind::Trace,
                    GuidanceKind::Case => PartKind::Case,
                    GuidanceKind::Coverage => PartKind::Coverage,
                };
                let status = match slot.state {
                    SlotState::Included => PartStatus::Included,
                    SlotState::Reduced => PartStatus::Reduced,
                    SlotState::Dropped => PartStatus::Dropped,
                };
                parts_manifest.push(ManifestEntry { kind, status });
            }
            parts_manifest.push(ManifestEntry {
                kind: PartKind::TestPatch,
                status: PartStatus::Included,
            });
            return Ok(AssembledPrompt {
                text,
                token_count,
                parts_manifest,
            });
        }

        if let Some(idx) = next_demo_to_drop(&demo_slots) {
            demo_slots[idx].dropped = true;
            continue;
        }
        if let Some(slot) = guidance_slots.iter_mut().find(|s| {
            s.block.kind == GuidanceKind::Coverage
                && s.state == SlotState::Included
                && s.block.reduced.is_some()
        }) {
            slot.state = SlotState::Reduced;
            continue;
        }
        if let Some(slot) = guidance_slots
            .iter_mut()
            .find(|s| s.block.kind == GuidanceKind::Trace && s.state != SlotState::Dropped)
        {
            slot.state = SlotState::Dropped;
            continue;
        }
        if let Some(slot) = guidance_slots.iter_mut().find(|s| {
            s.block.kind == GuidanceKind::Case
                && s.state == SlotState::Included
                && s.block.reduced.is_some()
        }) {
            slot.state = SlotState::Reduced;
            continue;
        }
        return Err(PromptError::BudgetTooSmall {
            required: token_count,
            budget,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::{render_guidance, BugContext};
    use alloc::string::ToString;
    use alloc::vec;

    fn byte_vocab() -> Vocabulary {
        Vocabulary::bytes_only()
    }

    fn sample_guidance() -> Vec<GuidanceBlock> {
        render_guidance(&BugContext {
            bug_id: "Math-50".to_string(),
            description: Some("iteration stalls".to_string()),
            execution_trace: Some("solve -> stall".to_string()),
            failing_tests: vec![("testIssue631".to_string(), "assertEquals(a, b);".to_string())],
            line_coverage: Some(0.74),
            condition_coverage: Some(0.45),
            raw_coverage_report: Some("per-line detail".to_string()),
        })
    }

    fn sample_demos() -> Vec<Demonstration> {
        vec![
            Demonstration::new("p002", "- old line\n+ new line", Label::Overfitting, 0.92)
                .unwrap(),
            Demonstration::new("p001", "- foo\n+ bar", Label::Correct, 0.95).unwrap(),
        ]
    }

    #[test]
    fn test_patch_template_is_exact() {
        assert_eq!(
            render_test_patch("fragment code").unwrap(),
            "fragment code\nQ: It was wrong or correct? A: It was"
        );
    }

    #[test]
    fn empty_fragment_is_rejected() {
        assert_eq!(
            render_test_patch(" \n \t"),
            Err(PromptError::EmptyFragment)
        );
    }

    #[test]
    fn demonstration_template_is_exact() {
        let demo = Demonstration::new("p9", "patch body", Label::Correct, 0.5).unwrap();
        assert_eq!(
            render_demonstration(&demo),
            "patch body\nQ: It was wrong or correct? A: It was correct\n"
        );
        let demo = Demonstration::new("p9", "patch body", Label::Overfitting, 0.5).unwrap();
        assert_eq!(
            render_demonstration(&demo),
            "patch body\nQ: It was wrong or correct? A: It was wrong\n"
        );
    }

    #[test]
    fn unlabeled_demonstration_is_rejected() {
        assert_eq!(
            Demonstration::new("p7", "text", Label::Unlabeled, 0.5),
            Err(PromptError::UnlabeledDemonstration("p7".to_string()))
        );
    }

    #[test]
    fn generous_budget_includes_everything_in_order() {
        let vocab = byte_vocab();
        let demos = sample_demos();
        let guidance = sample_guidance();
        let test_prompt = render_test_patch("frag").unwrap();
        let prompt = assemble(
            &demos,
            &guidance,
            &test_prompt,
            1 << 20,
            &vocab,
            DemoOrder::MostSimilarFirst,
        )
        .unwrap();

        let expected = [
            "- foo\n+ bar\nQ: It was wrong or correct? A: It was correct",
            "- old line\n+ new line\nQ: It was wrong or correct? A: It was wrong",
            "The bug refers to: iteration stalls",
            "The execution trace is: solve -> stall",
            "The failing test cases are:\ntestIssue631:\nassertEquals(a, b);",
            "The test coverage is: line coverage 74.0%, condition coverage 45.0%\nper-line detail",
            "frag\nQ: It was wrong or correct? A: It was",
        ]
        .join("\n\n");
        assert_eq!(prompt.text, expected);
        assert_eq!(prompt.token_count, expected.len());
        assert_eq!(
            prompt.manifest_lines(),
            vec![
                "demo:p001=included",
                "demo:p002=included",
                "bug=included",
                "trace=included",
                "case=included",
                "coverage=included",
                "test_patch=included",
            ]
        );
    }

    #[test]
    fn least_similar_first_reverses_demo_placement() {
        let vocab = byte_vocab();
        let demos = sample_demos();
        let test_prompt = render_test_patch("frag").unwrap();
        let prompt = assemble(
            &demos,
            &[],
            &test_prompt,
            1 << 20,
            &vocab,
            DemoOrder::LeastSimilarFirst,
        )
        .unwrap();
        let p001 = prompt.text.find("- foo").unwrap();
        let p002 = prompt.text.find("- old line").unwrap();
        assert!(p002 < p001, "lower-similarity demo should come first");
    }

    #[test]
    fn over_budget_drops_lowest_similarity_demo_first() {
        let vocab = byte_vocab();
        let demos = sample_demos();
        let guidance = sample_guidance();
        let test_prompt = render_test_patch("frag").unwrap();
        let full = assemble(
            &demos,
            &guidance,
            &test_prompt,
            1 << 20,
            &vocab,
            DemoOrder::MostSimilarFirst,
        )
        .unwrap();
        let squeezed = assemble(
            &demos,
            &guidance,
            &test_prompt,
            full.token_count - 1,
            &vocab,
            DemoOrder::MostSimilarFirst,
        )
        .unwrap();
        assert!(!squeezed.text.contains("- old line"), "p002 must be dropped");
        assert!(squeezed.text.contains("- foo"), "p001 must survive");
        assert!(squeezed
            .manifest_lines()
            .contains(&"demo:p002=dropped".to_string()));
        assert!(squeezed.token_count <= full.token_count - 1);
    }

    #[test]
    fn equal_similarity_drops_larger_patch_id_first() {
        let vocab = byte_vocab();
        let demos = vec![
            Demonstration::new("p001", "aaaa", Label::Correct, 0.9).unwrap(),
            Demonstration::new("p002", "bbbb", Label::Correct, 0.9).unwrap(),
        ];
        let test_prompt = render_test_patch("frag").unwrap();
        let full = assemble(
            &demos,
            &[],
            &test_prompt,
            1 << 20,
            &vocab,
            DemoOrder::MostSimilarFirst,
        )
        .unwrap();
        let squeezed = assemble(
            &demos,
            &[],
            &test_prompt,
            full.token_count - 1,
            &vocab,
            DemoOrder::MostSimilarFirst,
        )
        .unwrap();
        assert!(squeezed.text.contains("aaaa"));
        assert!(!squeezed.text.contains("bbbb"));
    }

    #[test]
    fn degradation_order_reaches_minimal_prompt() {
        let vocab = byte_vocab();
        let demos = sample_demos();
        let guidance = sample_guidance();
        let test_prompt = render_test_patch("frag").unwrap();

        let minimal_text = [
            "The bug refers to: iteration stalls",
            "The failing test cases are: testIssue631",
            "The test coverage is: line coverage 74.0%, condition coverage 45.0%",
            "frag\nQ: It was wrong or correct? A: It was",
        ]
        .join("\n\n");

        let prompt = assemble(
            &demos,
            &guidance,
            &test_prompt,
            minimal_text.len(),
            &vocab,
            DemoOrder::MostSimilarFirst,
        )
        .unwrap();
        assert_eq!(prompt.text, minimal_text);
        assert_eq!(
            prompt.manifest_lines(),
            vec![
                "demo:p001=dropped",
                "demo:p002=dropped",
                "bug=included",
                "trace=dropped",
                "case=reduced",
                "coverage=reduced",
                "test_patch=included",
            ]
        );

        let err = assemble(
            &demos,
            &guidance,
            &test_prompt,
            minimal_text.len() - 1,
            &vocab,
            DemoOrder::MostSimilarFirst,
        )
        .unwrap_err();
        assert_eq!(
            err,
            PromptError::BudgetTooSmall {
                required: minimal_text.len(),
                budget: minimal_text.len() - 1,
            }
        );
    }

    #[test]
    fn assembly_is_deterministic() {
        let vocab = byte_vocab();
        let demos = sample_demos();
        let guidance = sample_guidance();
        let test_prompt = render_test_patch("frag").unwrap();
        let a = assemble(&demos, &guidance, &test_prompt, 200, &vocab, DemoOrder::MostSimilarFirst);
        let b = assemble(&demos, &guidance, &test_prompt, 200, &vocab, DemoOrder::MostSimilarFirst);
        assert_eq!(a, b);
    }
}
