//! Prediction files: one `patch_id,score,label` line per assessed patch.
//! These are both an evaluation output and the input format for baseline
//! predictions in significance testing.

use std::path::Path;

use patchvet_core::corpus::Label;

use super::{read_file, write_file, FormatError};

/// One assessed patch: its overfitting score and the thresholded label.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub patch_id: String,
    /// Overfitting probability in `[0, 1]`.
    pub score: f64,
    /// `Correct` or `Overfitting`; never `Unlabeled`.
    pub label: Label,
}

/// Renders rows to file text. Scores use the shortest decimal form that
/// parses back to the identical value, so a render/parse cycle is lossless.
pub fn render_predictions(rows: &[PredictionRow]) -> Result<String, FormatError> {
    let mut out = String::new();
    for row in rows {
        if row.patch_id.contains([',', '\n', '\r']) {
            return Err(malformed(format!(
                "patch id {:?} contains a delimiter",
                row.patch_id
            )));
        }
        if row.label == Label::Unlabeled {
            return Err(malformed(format!(
                "prediction for {:?} has no decided label",
                row.patch_id
            )));
        }
        out.push_str(&format!("{},{},{}\n", row.patch_id, row.score, row.label));
    }
    Ok(out)
}

pub fn save_predictions(path: &Path, rows: &[PredictionRow]) -> Result<(), FormatError> {
    write_file(path, render_predictions(rows)?.as_bytes())
}

fn malformed(message: String) -> FormatError {
    FormatError::Malformed {
        path: std::path::PathBuf::from("<predictions>"),
        message,
    }
}

fn parse_line(line: &str, path: &Path, line_no: usize) -> Result<PredictionRow, FormatError> {
    let bad = |message: String| FormatError::Malformed {
        path: path.to_path_buf(),
        message: format!("line {line_no}: {message}"),
    };
    let mut parts = line.split(',');
    let (Some(patch_id), Some(score), Some(label), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(bad("expected \"patch_id,score,label\"".to_string()));
    };
    let score: f64 = score
        .parse()
        .map_err(|_| bad(format!("unparseable score {score:?}")))?;
    if !score.is_finite() {
        return Err(bad(format!("non-finite score {score}")));
    }
    let label = match Label::parse(label) {
        Some(l @ (Label::Correct | Label::Overfitting)) => l,
        _ => return Err(bad(format!("unusable label {label:?}"))),
    };
    Ok(PredictionRow {
        patch_id: patch_id.to_string(),
        score,
        label,
    })
}

pub fn parse_predictions(text: &str, path: &Path) -> Result<Vec<PredictionRow>, FormatError> {
    let mut rows = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(parse_line(line.trim(), path, index + 1)?);
    }
    Ok(rows)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRow>, FormatError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| FormatError::Malformed {
        path: path.to_path_buf(),
        message: "prediction file is not valid UTF-8".to_string(),
    })?;
    parse_predictions(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip_exactly() {
        let rows = vec![
            PredictionRow {
                patch_id: "p1".to_string(),
                score: 0.75,
                label: Label::Overfitting,
            },
            PredictionRow {
                patch_id: "p2".to_string(),
                score: 1.0 / 3.0,
                label: Label::Correct,
            },
        ];
        let text = render_predictions(&rows).unwrap();
        let parsed = parse_predictions(&text, Path::new("t")).unwrap();
        assert_eq!(parsed, rows);
        assert_eq!(parsed[1].score, 1.0 / 3.0);
    }

    #[test]
    fn rendering_rejects_delimiters_in_ids() {
        let rows = vec![PredictionRow {
            patch_id: "p,1".to_string(),
            score: 0.5,
            label: Label::Correct,
        }];
        assert!(render_predictions(&rows).is_err());
    }

    #[test]
    fn parsing_rejects_unlabeled_and_garbage() {
        assert!(parse_predictions("p1,0.5,unlabeled\n", Path::new("t")).is_err());
        assert!(parse_predictions("p1,half,correct\n", Path::new("t")).is_err());
        assert!(parse_predictions("p1,0.5\n", Path::new("t")).is_err());
        assert!(parse_predictions("p1,0.5,correct,extra\n", Path::new("t")).is_err());
    }

    #[test]
    fn blank_lines_are_skipped() {
        let rows = parse_predictions("\np1,0.9,overfitting\n\n", Path::new("t")).unwrap();
        assert_eq!(rows.len(), 1);
    }
}
