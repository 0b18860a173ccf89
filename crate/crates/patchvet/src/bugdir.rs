//! Reads per-bug guiding information from a directory tree.
//!
//! Layout under the bug root:
//!
//! ```text
//! <root>/<bug_id>/description.txt        bug report text
//! <root>/<bug_id>/trace.txt              execution trace of the failing run
//! <root>/<bug_id>/failing_tests/<n>.txt  one file per failing test case
//! <root>/<bug_id>/coverage_summary.txt   "lines: c/t" and "conditions: c/t"
//! <root>/<bug_id>/coverage_raw.txt       full coverage report
//! ```
//!
//! Every file is optional; a missing file simply leaves the matching
//! context field empty. Only a missing `<root>/<bug_id>` directory is an
//! error, because it means the dataset references a bug the benchmark
//! does not know about.

use std::path::{Path, PathBuf};

use patchvet_core::guidance::{self, BugContext};

/// Errors from bug-directory loading.
#[derive(Debug, thiserror::Error)]
pub enum BugDirError {
    #[error("unknown bug {bug_id:?}: no directory at {path}")]
    UnknownBug { bug_id: String, path: PathBuf },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Coverage {
        path: PathBuf,
        source: guidance::GuidanceError,
    },
}

/// Reads a file if it exists; trailing whitespace is trimmed and files
/// that are empty after trimming count as absent.
fn read_optional(path: &Path) -> Result<Option<String>, BugDirError> {
    match std::fs::read_to_string(path) {
        Ok(text) => {
            let text = text.trim_end().to_string();
            Ok(if text.is_empty() { None } else { Some(text) })
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(BugDirError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

/// Loads the guiding information for one bug.
pub fn load_bug_context(root: &Path, bug_id: &str) -> Result<BugContext, BugDirError> {
    let dir = root.join(bug_id);
    if !dir.is_dir() {
        return Err(BugDirError::UnknownBug {
            bug_id: bug_id.to_string(),
            path: dir,
        });
    }

    let mut ctx = BugContext {
        bug_id: bug_id.to_string(),
        ..BugContext::default()
    };
    ctx.description = read_optional(&dir.join("description.txt"))?;
    ctx.execution_trace = read_optional(&dir.join("trace.txt"))?;
    ctx.raw_coverage_report = read_optional(&dir.join("coverage_raw.txt"))?;

    let summary_path = dir.join("coverage_summary.txt");
    if let Some(summary) = read_optional(&summary_path)? {
        let (line, condition) =
            guidance::parse_coverage_summary(&summary).map_err(|source| BugDirError::Coverage {
                path: summary_path,
                source,
            })?;
        ctx.line_coverage = line;
        ctx.condition_coverage = condition;
    }

    let tests_dir = dir.join("failing_tests");
    if tests_dir.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&tests_dir)
            .map_err(|source| BugDirError::Io {
                path: tests_dir.clone(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|ext| ext == "txt"))
            .collect();
        entries.sort();
        for path in entries {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            if let Some(body) = read_optional(&path)? {
                ctx.failing_tests.push((name, body));
            }
        }
    }
    Ok(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn make_bug(dir: &Path, bug_id: &str) -> PathBuf {
        let bug = dir.join(bug_id);
        std::fs::create_dir_all(bug.join("failing_tests")).unwrap();
        bug
    }

    #[test]
    fn full_directory_loads_every_field() {
        let root = tempfile::tempdir().unwrap();
        let bug = make_bug(root.path(), "Math-5");
        std::fs::write(bug.join("description.txt"), "NPE in reciprocal\n").unwrap();
        std::fs::write(bug.join("trace.txt"), "at Complex.reciprocal(Complex.java:300)\n")
            .unwrap();
        std::fs::write(bug.join("coverage_summary.txt"), "lines: 74/100\nconditions: 45/100\n")
            .unwrap();
        std::fs::write(bug.join("coverage_raw.txt"), "Complex.java 74%\n").unwrap();
        std::fs::write(bug.join("failing_tests/testReciprocalZero.txt"), "expected NaN\n")
            .unwrap();
        std::fs::write(bug.join("failing_tests/testAtanI.txt"), "expected infinite\n").unwrap();

        let ctx = load_bug_context(root.path(), "Math-5").unwrap();
        assert_eq!(ctx.description.as_deref(), Some("NPE in reciprocal"));
        assert!(ctx.execution_trace.is_some());
        assert_eq!(ctx.line_coverage, Some(0.74));
        assert_eq!(ctx.condition_coverage, Some(0.45));
        assert!(ctx.raw_coverage_report.is_some());
        // Sorted by file name, not directory order.
        assert_eq!(ctx.failing_tests[0].0, "testAtanI");
        assert_eq!(ctx.failing_tests[1].0, "testReciprocalZero");
    }

    #[test]
    fn missing_files_leave_fields_empty() {
        let root = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(root.path().join("Lang-1")).unwrap();
        let ctx = load_bug_context(root.path(), "Lang-1").unwrap();
        assert!(ctx.description.is_none());
        assert!(ctx.execution_trace.is_none());
        assert!(ctx.failing_tests.is_empty());
        assert!(ctx.line_coverage.is_none());
        assert!(ctx.raw_coverage_report.is_none());
    }

    #[test]
    fn missing_directory_is_unknown_bug() {
        let root = tempfile::tempdir().unwrap();
        match load_bug_context(root.path(), "Chart-9") {
            Err(BugDirError::UnknownBug { bug_id, .. }) => assert_eq!(bug_id, "Chart-9"),
            other => panic!("expected unknown-bug error, got {other:?}"),
        }
    }

    #[test]
    fn unparseable_coverage_summary_is_an_error() {
        let root = tempfile::tempdir().unwrap();
        let bug = make_bug(root.path(), "Time-4");
        std::fs::write(bug.join("coverage_summary.txt"), "garbage\n").unwrap();
        assert!(matches!(
            load_bug_context(root.path(), "Time-4"),
            Err(BugDirError::Coverage { .. })
        ));
    }

    #[test]
    fn non_txt_files_in_failing_tests_are_ignored() {
        let root = tempfile::tempdir().unwrap();
        let bug = make_bug(root.path(), "Closure-2");
        std::fs::write(bug.join("failing_tests/testA.txt"), "body\n").unwrap();
        std::fs::write(bug.join("failing_tests/notes.md"), "skip me\n").unwrap();
        let ctx = load_bug_context(root.path(), "Closure-2").unwrap();
        assert_eq!(ctx.failing_tests.len(), 1);
        assert_eq!(ctx.failing_tests[0].0, "testA");
    }
}
