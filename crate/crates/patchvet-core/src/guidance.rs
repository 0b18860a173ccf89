//! Per-bug guiding information and its rendering into prompt blocks.
//!
//! A [`BugContext`] carries whatever artifacts exist for a benchmark bug:
//! a natural-language description, an execution trace, failing test cases,
//! and line/condition coverage. [`render_guidance`] turns the present fields
//! into ordered text blocks with fixed preambles; block order is always
//! bug description, execution trace, failing cases, coverage.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Errors from coverage-summary parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuidanceError {
    /// A coverage summary exists but does not parse; payload is the
    /// offending segment.
    CoverageParseError(String),
}

impl fmt::Display for GuidanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuidanceError::CoverageParseError(segment) => {
                write!(f, "unparseable coverage summary segment {segment:?}")
            }
        }
    }
}

impl core::error::Error for GuidanceError {}

/// Guiding information for one benchmark bug. Absent artifacts are `None`
/// or empty; only present fields are rendered.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BugContext {
    pub bug_id: String,
    pub description: Option<String>,
    pub execution_trace: Option<String>,
    /// `(test_name, body_or_log)` pairs, sorted by name.
    pub failing_tests: Vec<(String, String)>,
    /// Fraction in `[0, 1]`.
    pub line_coverage: Option<f64>,
    /// Fraction in `[0, 1]`.
    pub condition_coverage: Option<f64>,
    pub raw_coverage_report: Option<String>,
}

/// Which guidance component a block renders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GuidanceKind {
    Bug,
    Trace,
    Case,
    Coverage,
}

impl GuidanceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GuidanceKind::Bug => "bug",
            GuidanceKind::Trace => "trace",
            GuidanceKind::Case => "case",
            GuidanceKind::Coverage => "coverage",
        }
    }
}

/// One renderable guidance block. `reduced`, when present, is the shorter
/// form the prompt assembler may fall back to under budget pressure (test
/// names without bodies; coverage summary without the raw report).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuidanceBlock {
    pub kind: GuidanceKind,
    pub text: String,
    pub reduced: Option<String>,
}

/// The default preamble of each block kind. The bug-description wording is
/// the published template; the other three follow its pattern and are part
/// of this toolkit's stable output contract.
pub const BUG_PREAMBLE: &str = "The bug refers to: ";
pub const TRACE_PREAMBLE: &str = "The execution trace is: ";
pub const CASE_PREAMBLE: &str = "The failing test cases are:";
pub const COVERAGE_PREAMBLE: &str = "The test coverage is: ";

/// Preamble texts for the four block kinds; overridable through
/// configuration, defaulting to the published wording.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Preambles {
    pub bug: String,
    pub trace: String,
    pub case: String,
    pub coverage: String,
}

impl Default for Preambles {
    fn default() -> Self {
        Preambles {
            bug: String::from(BUG_PREAMBLE),
            trace: String::from(TRACE_PREAMBLE),
            case: String::from(CASE_PREAMBLE),
            coverage: String::from(COVERAGE_PREAMBLE),
        }
    }
}

/// Formats a coverage fraction as a percentage with one decimal.
fn percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

/// Renders the present fields of `ctx` as ordered blocks (bug, trace,
/// cases, coverage) with the default preambles. Absent fields produce no
/// block. Pure: equal contexts render byte-identically.
pub fn render_guidance(ctx: &BugContext) -> Vec<GuidanceBlock> {
    render_guidance_with(ctx, &Preambles::default())
}

/// [`render_guidance`] with custom preamble texts.
pub fn render_guidance_with(ctx: &BugContext, preambles: &Preambles) -> Vec<GuidanceBlock> {
    let mut blocks = Vec::new();

    if let Some(description) = &ctx.description {
        blocks.push(GuidanceBlock {
            kind: GuidanceKind::Bug,
            text: format!("{}{description}", preambles.bug),
            reduced: None,
        });
    }

    if let Some(trace) = &ctx.execution_trace {
        blocks.push(GuidanceBlock {
            kind: GuidanceKind::Trace,
            text: format!("{}{trace}", preambles.trace),
            reduced: None,
        });
    }

    if !ctx.failing_tests.is_empty() {
        let mut text = preambles.case.clone();
        for (name, body) in &ctx.failing_tests {
            text.push('\n');
            text.push_str(name);
            text.push_str(":\n");
            text.push_str(body);
        }
        let names: Vec<&str> = ctx.failing_tests.iter().map(|(n, _)| n.as_str()).collect();
        let reduced = format!("{} {}", preambles.case, names.join(", "));
        blocks.push(GuidanceBlock {
            kind: GuidanceKind::Case,
            text,
            reduced: Some(reduced),
        });
    }

    let coverage = &preambles.coverage;
    let summary = match (ctx.line_coverage, ctx.condition_coverage) {
        (Some(line), Some(cond)) => Some(format!(
            "{coverage}line coverage {}, condition coverage {}",
            percent(line),
            percent(cond)
        )),
        (Some(line), None) => Some(format!("{coverage}line coverage {}", percent(line))),
        (None, Some(cond)) => Some(format!("{coverage}condition coverage {}", percent(cond))),
        (None, None) => None,
    };
    match (summary, &ctx.raw_coverage_report) {
        (Some(summary), Some(raw)) => blocks.push(GuidanceBlock {
            kind: GuidanceKind::Coverage,
            text: format!("{summary}\n{raw}"),
            reduced: Some(summary),
        }),
        (Some(summary), None) => blocks.push(GuidanceBlock {
            kind: GuidanceKind::Coverage,
            text: summary,
            reduced: None,
        }),
        (None, Some(raw)) => blocks.push(GuidanceBlock {
            kind: GuidanceKind::Coverage,
            text: format!("{}{raw}", coverage.trim_end()),
            reduced: None,
        }),
        (None, None) => {}
    }

    blocks
}

/// Parses a coverage summary of the form `lines: <covered>/<total>` and/or
/// `conditions: <covered>/<total>`, with segments separated by newlines or
/// commas. Returns `(line_coverage, condition_coverage)` as fractions.
/// Either key may be absent; an empty summary, an unknown key, a zero
/// total, or a covered count above the total is an error.
pub fn parse_coverage_summary(text: &str) -> Result<(Option<f64>, Option<f64>), GuidanceError> {
    let mut line = None;
    let mut condition = None;
    let mut any = false;
    for segment in text.split(['\n', ',']) {
        let segment = segment.trim();
        if segment.is_empty() {
            continue;
        }
        any = true;
        let err = || GuidanceError::CoverageParseError(segment.to_string());
        let (key, value) = segment.split_once(':').ok_or_else(err)?;
        let (covered, total) = value.trim().split_once('/').ok_or_else(err)?;
        let covered: u64 = covered.trim().parse().map_err(|_| err())?;
        let total: u64 = total.trim().parse().map_err(|_| err())?;
        if total == 0 || covered > total {
            return Err(err());
        }
        let fraction = covered as f64 / total as f64;
        match key.trim() {
            "lines" => line = Some(fraction),
            "conditions" => condition = Some(fraction),
            _ => return Err(err()),
        }
    }
    if !any {
        return Err(GuidanceError::CoverageParseError(text.to_string()));
    }
    Ok((line, condition))
}
