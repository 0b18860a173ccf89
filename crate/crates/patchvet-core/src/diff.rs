//! Unified-diff parsing with byte-exact re-serialization.
//!
//! The parser keeps every line verbatim (headers included), so
//! [`DiffDocument::serialize`] reproduces the input bytes exactly, including
//! the presence or absence of a trailing newline. Structured fields (paths,
//! hunk ranges) are derived views used for validation and analysis.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Error raised by [`parse_unified_diff`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiffError {
    /// The input is not a well-formed unified diff. The payload is the
    /// 1-based line number of the offending line; 0 means the document as a
    /// whole is unusable (empty, or no file section found).
    MalformedDiff(usize),
}

impl fmt::Display for DiffError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffError::MalformedDiff(0) => {
                write!(f, "malformed diff: no file sections found")
            }
            DiffError::MalformedDiff(line) => {
                write!(f, "malformed diff at line {line}")
            }
        }
    }
}

impl core::error::Error for DiffError {}

/// One line inside a hunk, stored without its one-character marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiffLine {
    /// Line present in both versions (marker `' '`).
    Context(String),
    /// Line added by the patch (marker `'+'`).
    Added(String),
    /// Line removed by the patch (marker `'-'`).
    Removed(String),
    /// A `\ No newline at end of file` style marker (marker `'\'`); the
    /// payload is the text after the backslash.
    NoNewline(String),
}

/// One `@@`-delimited hunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hunk {
    /// The verbatim `@@ … @@ …` header line.
    pub header: String,
    pub old_start: u64,
    pub old_count: u64,
    pub new_start: u64,
    pub new_count: u64,
    /// Optional section heading after the closing `@@` (function name in
    /// git-style diffs), without its leading space.
    pub section: String,
    pub lines: Vec<DiffLine>,
}

impl Hunk {
    /// Content of the added lines, in order.
    pub fn added_lines(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().filter_map(|l| match l {
            DiffLine::Added(s) => Some(s.as_str()),
            _ => None,
        })
    }

    /// Content of the removed lines, in order.
    pub fn removed_lines(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().filter_map(|l| match l {
            DiffLine::Removed(s) => Some(s.as_str()),
            _ => None,
        })
    }
}

/// One file section: everything from its leading header block through its
/// last hunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileDiff {
    /// Verbatim lines before the `---` header (e.g. `diff --git`, `index`).
    /// For the first file this also covers any document preamble.
    pub header_lines: Vec<String>,
    /// Verbatim `--- …` line.
    pub old_header: String,
    /// Verbatim `+++ …` line.
    pub new_header: String,
    /// Path extracted from `old_header` (tab-suffixed timestamps stripped).
    pub old_path: String,
    /// Path extracted from `new_header`.
    pub new_path: String,
    pub hunks: Vec<Hunk>,
}

/// A parsed unified diff, possibly spanning several files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffDocument {
    pub files: Vec<FileDiff>,
    /// Verbatim lines after the final hunk that belong to no file section.
    pub trailing: Vec<String>,
    /// Whether the input ended with a newline; preserved on serialization.
    pub ends_with_newline: bool,
}

impl DiffDocument {
    /// Total number of hunks across all files.
    pub fn hunk_count(&self) -> usize {
        self.files.iter().map(|f| f.hunks.len()).sum()
    }

    /// Re-serializes to the exact byte sequence the document was parsed
    /// from.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut first = true;
        let mut sep = |out: &mut String| {
            if !first {
                out.push('\n');
            }
            first = false;
        };
        for file in &self.files {
            for h in &file.header_lines {
                sep(&mut out);
                out.push_str(h);
            }
            sep(&mut out);
            out.push_str(&file.old_header);
            sep(&mut out);
            out.push_str(&file.new_header);
            for hunk in &file.hunks {
                sep(&mut out);
                out.push_str(&hunk.header);
                for line in &hunk.lines {
                    let (marker, body) = match line {
                        DiffLine::Context(s) => (' ', s),
                        DiffLine::Added(s) => ('+', s),
                        DiffLine::Removed(s) => ('-', s),
                        DiffLine::NoNewline(s) => ('\\', s),
                    };
                    sep(&mut out);
                    out.push(marker);
                    out.push_str(body);
                }
            }
        }
        for t in &self.trailing {
            sep(&mut out);
            out.push_str(t);
        }
        if self.ends_with_newline {
            out.push('\n');
        }
        out
    }
}

/// Strips the `--- `/`+++ ` prefix and any tab-separated timestamp from a
/// file header line.
fn header_path(line: &str) -> String {
    let rest = &line[4..];
    match rest.find('\t') {
        Some(i) => rest[..i].to_string(),
        None => rest.to_string(),
    }
}

/// Parses `start[,count]`; the count defaults to 1 when omitted.
fn parse_range(text: &str) -> Option<(u64, u64)> {
    match text.split_once(',') {
        Some((s, c)) => Some((s.parse().ok()?, c.parse().ok()?)),
        None => Some((text.parse().ok()?, 1)),
    }
}

/// Parses a hunk header of the form `@@ -a[,b] +c[,d] @@[ section]`.
fn parse_hunk_header(line: &str) -> Option<(u64, u64, u64, u64, String)> {
    let rest = line.strip_prefix("@@ -")?;
    let close = rest.find(" @@")?;
    let ranges = &rest[..close];
    let mut section = &rest[close + 3..];
    if let Some(s) = section.strip_prefix(' ') {
        section = s;
    }
    let (old, new) = ranges.split_once(" +")?;
    let (old_start, old_count) = parse_range(old)?;
    let (new_start, new_count) = parse_range(new)?;
    Some((old_start, old_count, new_start, new_count, section.to_string()))
}

/// Parses a unified diff.
///
/// Accepts one or more file sections, each introduced by a `--- ` line
/// immediately followed by a `+++ ` line. Hunk line counts are validated
/// against the `@@` headers. Lines between file sections (e.g. `diff --git`
/// headers) are kept verbatim so that [`DiffDocument::serialize`] is
/// byte-identical to the input.
///
/// Errors with [`DiffError::MalformedDiff`] carrying the 1-based line number
/// of the problem; line number 0 means the input was empty or contained no
/// file section at all.
pub fn parse_unified_diff(text: &str) -> Result<DiffDocument, DiffError> {
    if text.is_empty() {
        return Err(DiffError::MalformedDiff(0));
    }
    let ends_with_newline = text.ends_with('\n');
    let mut lines: Vec<&str> = text.split('\n').collect();
    if ends_with_newline {
        lines.pop();
    }

    let mut files: Vec<FileDiff> = Vec::new();
    let mut buffer: Vec<String> = Vec::new();
    let mut i = 0usize;

    while i < lines.len() {
        let line = lines[i];
        let line_no = i + 1;
        let starts_file = line.starts_with("--- ")
            && i + 1 < lines.len()
            && lines[i + 1].starts_with("+++ ");
        if !starts_file {
            // Once at least one file has been parsed, stray hunk-ish lines
            // between sections indicate a hunk whose header under-counted
            // its body; reject them instead of silently treating them as
            // headers of the next file.
            if !files.is_empty()
                && matches!(line.as_bytes().first(), Some(b'+') | Some(b'-') | Some(b' ') | Some(b'@') | Some(b'\\'))
            {
                return Err(DiffError::MalformedDiff(line_no));
            }
            buffer.push(line.to_string());
            i += 1;
            continue;
        }

        let old_header = line.to_string();
        let new_header = lines[i + 1].to_string();
        let old_path = header_path(&old_header);
        let new_path = header_path(&new_header);
        let header_lines = core::mem::take(&mut buffer);
        i += 2;

        let mut hunks: Vec<Hunk> = Vec::new();
        // At least one hunk is required after a ---/+++ pair.
        if i >= lines.len() || !lines[i].starts_with("@@") {
            return Err(DiffError::MalformedDiff(i + 1));
        }
        while i < lines.len() && lines[i].starts_with("@@") {
            let header_line_no = i + 1;
            let header = lines[i].to_string();
            let (old_start, old_count, new_start, new_count, section) =
                parse_hunk_header(&header).ok_or(DiffError::MalformedDiff(header_line_no))?;
            i += 1;

            let mut body: Vec<DiffLine> = Vec::new();
            let mut remaining_old = old_count;
            let mut remaining_new = new_count;
            while remaining_old > 0 || remaining_new > 0 {
                if i >= lines.len() {
                    return Err(DiffError::MalformedDiff(header_line_no));
                }
                let body_line = lines[i];
                let body_line_no = i + 1;
                let mut bytes = body_line.bytes();
                match bytes.next() {
                    Some(b' ') => {
                        if remaining_old == 0 || remaining_new == 0 {
                            return Err(DiffError::MalformedDiff(body_line_no));
                        }
                        remaining_old -= 1;
                        remaining_new -= 1;
                        body.push(DiffLine::Context(body_line[1..].to_string()));
                    }
                    Some(b'-') => {
                        if remaining_old == 0 {
                            return Err(DiffError::MalformedDiff(body_line_no));
                        }
                        remaining_old -= 1;
                        body.push(DiffLine::Removed(body_line[1..].to_string()));
                    }
                    Some(b'+') => {
                        if remaining_new == 0 {
                            return Err(DiffError::MalformedDiff(body_line_no));
                        }
                        remaining_new -= 1;
                        body.push(DiffLine::Added(body_line[1..].to_string()));
                    }
                    Some(b'\\') => {
                        body.push(DiffLine::NoNewline(body_line[1..].to_string()));
                    }
                    _ => return Err(DiffError::MalformedDiff(body_line_no)),
                }
                i += 1;
            }
            // A final "\ No newline at end of file" marker may follow the
            // last counted line.
            if i < lines.len() && lines[i].starts_with('\\') {
                body.push(DiffLine::NoNewline(lines[i][1..].to_string()));
                i += 1;
            }
            hunks.push(Hunk {
                header,
                old_start,
                old_count,
                new_start,
                new_count,
                section,
                lines: body,
            });
        }

        files.push(FileDiff {
            header_lines,
            old_header,
            new_header,
            old_path,
            new_path,
            hunks,
        });
    }

    if files.is_empty() {
        return Err(DiffError::MalformedDiff(0));
    }
    Ok(DiffDocument {
        files,
        trailing: buffer,
        ends_with_newline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    const ONE_HUNK: &str = "\
--- a/src/Calc.java
+++ b/src/Calc.java
@@ -10,2 +10,2 @@ int add(int a, int b) {
 int r;
-r = a - b;
+r = a + b;
";

    #[test]
    fn one_hunk_replacing_one_line() {
        let doc = parse_unified_diff(ONE_HUNK).unwrap();
        assert_eq!(doc.files.len(), 1);
        assert_eq!(doc.hunk_count(), 1);
        let hunk = &doc.files[0].hunks[0];
        assert_eq!(hunk.removed_lines().collect::<Vec<_>>(), vec!["r = a - b;"]);
        assert_eq!(hunk.added_lines().collect::<Vec<_>>(), vec!["r = a + b;"]);
        assert_eq!(hunk.section, "int add(int a, int b) {");
        assert_eq!(doc.files[0].old_path, "a/src/Calc.java");
        assert_eq!(doc.files[0].new_path, "b/src/Calc.java");
    }

    #[test]
    fn empty_input_is_malformed_at_zero() {
        assert_eq!(parse_unified_diff(""), Err(DiffError::MalformedDiff(0)));
    }

    #[test]
    fn input_without_file_sections_is_malformed_at_zero() {
        assert_eq!(
            parse_unified_diff("just some text\nno diff here\n"),
            Err(DiffError::MalformedDiff(0))
        );
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let doc = parse_unified_diff(ONE_HUNK).unwrap();
        assert_eq!(doc.serialize(), ONE_HUNK);
        // Without the trailing newline as well.
        let trimmed = ONE_HUNK.strip_suffix('\n').unwrap();
        let doc2 = parse_unified_diff(trimmed).unwrap();
        assert_eq!(doc2.serialize(), trimmed);
    }

    #[test]
    fn three_file_diff_matches_marker_counting_oracle() {
        let mut text = String::new();
        for (i, hunks) in [(1, 1), (2, 2), (3, 1)] {
            text.push_str(&format!("diff --git a/f{i}.txt b/f{i}.txt\n"));
            text.push_str(&format!("--- a/f{i}.txt\n+++ b/f{i}.txt\n"));
            for h in 0..hunks {
                let start = 1 + 10 * h;
                text.push_str(&format!("@@ -{start},3 +{start},3 @@\n ctx\n-old{i}\n+new{i}\n ctx2\n"));
            }
        }
        // Independent oracle: count "@@" markers per "--- " section.
        let oracle: usize = text.lines().filter(|l| l.starts_with("@@")).count();
        let doc = parse_unified_diff(&text).unwrap();
        assert_eq!(doc.files.len(), 3);
        assert_eq!(doc.hunk_count(), oracle);
        assert_eq!(doc.files[1].hunks.len(), 2);
        assert_eq!(doc.serialize(), text);
    }

    #[test]
    fn overcounted_hunk_header_is_rejected() {
        // Header claims two removed lines but only one is present before the
        // next section.
        let text = "--- a/x\n+++ b/x\n@@ -1,2 +1,1 @@\n-gone\n+kept\n";
        let err = parse_unified_diff(text).unwrap_err();
        assert!(matches!(err, DiffError::MalformedDiff(_)));
    }

    #[test]
    fn undercounted_hunk_header_is_rejected() {
        // Header claims one added line but two follow.
        let text = "--- a/x\n+++ b/x\n@@ -1,1 +1,1 @@\n-a\n+b\n+c\n";
        assert_eq!(parse_unified_diff(text), Err(DiffError::MalformedDiff(6)));
    }

    #[test]
    fn unparseable_hunk_header_reports_its_line() {
        let text = "--- a/x\n+++ b/x\n@@ nonsense @@\n";
        assert_eq!(parse_unified_diff(text), Err(DiffError::MalformedDiff(3)));
    }

    #[test]
    fn no_newline_marker_is_preserved() {
        let text = "--- a/x\n+++ b/x\n@@ -1,1 +1,1 @@\n-old\n+new\n\\ No newline at end of file\n";
        let doc = parse_unified_diff(text).unwrap();
        assert_eq!(doc.serialize(), text);
        let last = doc.files[0].hunks[0].lines.last().unwrap();
        assert!(matches!(last, DiffLine::NoNewline(_)));
    }

    #[test]
    fn git_header_lines_survive_round_trip() {
        let text = "diff --git a/x b/x\nindex 1234567..89abcde 100644\n--- a/x\n+++ b/x\n@@ -1,1 +1,1 @@\n-a\n+b\n";
        let doc = parse_unified_diff(text).unwrap();
        assert_eq!(doc.files[0].header_lines.len(), 2);
        assert_eq!(doc.serialize(), text);
    }

    #[test]
    fn zero_count_ranges_parse() {
        // Pure addition: old side has zero lines.
        let text = "--- a/x\n+++ b/x\n@@ -0,0 +1,2 @@\n+one\n+two\n";
        let doc = parse_unified_diff(text).unwrap();
        assert_eq!(doc.files[0].hunks[0].old_count, 0);
        assert_eq!(doc.files[0].hunks[0].new_count, 2);
        assert_eq!(doc.serialize(), text);
    }

    #[test]
    fn count_defaults_to_one_when_omitted() {
        let text = "--- a/x\n+++ b/x\n@@ -5 +5 @@\n-a\n+b\n";
        let doc = parse_unified_diff(text).unwrap();
        let h = &doc.files[0].hunks[0];
        assert_eq!((h.old_start, h.old_count, h.new_start, h.new_count), (5, 1, 5, 1));
        assert_eq!(doc.serialize(), text);
    }
}
