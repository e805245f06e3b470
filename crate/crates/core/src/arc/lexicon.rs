use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// The small fixture lexicon shipped with the crate.
pub const BUNDLED_LEXICON: &str = include_str!("../../fixtures/lexicon.tsv");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Word to valence in `[0, 1]`. Immutable once loaded.
#[derive(Debug, Clone, Default)]
pub struct ValenceLexicon {
    entries: HashMap<String, f64>,
}

impl ValenceLexicon {
    /// Parses `word<TAB>valence[<TAB>arousal<TAB>dominance]` lines. `#`
    /// comments and blank lines are skipped, as is a header line whose
    /// valence column is not numeric.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut entries = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let word = cols.next().unwrap_or_default().trim().to_lowercase();
            let Some(raw) = cols.next() else {
                return Err(LexiconError::Parse {
                    line: n + 1,
                    reason: "missing valence column".into(),
                });
            };
            let valence: f64 = match raw.trim().parse() {
                Ok(v) => v,
                Err(_) if entries.is_empty() => continue,
                Err(_) => {
                    return Err(LexiconError::Parse {
                        line: n + 1,
                        reason: format!("valence {raw:?} is not a number"),
                    })
                }
            };
            if !(0.0..=1.0).contains(&valence) {
                return Err(LexiconError::Parse {
                    line: n + 1,
                    reason: format!("valence {valence} outside [0, 1]"),
                });
            }
            if word.is_empty() {
                return Err(LexiconError::Parse {
                    line: n + 1,
                    reason: "empty word".into(),
                });
            }
            entries.insert(word, valence);
        }
        Ok(ValenceLexicon { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_LEXICON).expect("bundled lexicon parses")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact lowercase entry only.
    pub fn get(&self, word: &str) -> Option<f64> {
        self.entries.get(&word.trim().to_lowercase()).copied()
    }

    /// Lowercase lookup, then one retry with `-ed`, `-ing` or `-s` removed
    /// (also trying the stem with a trailing `e`).
    pub fn lookup(&self, word: &str) -> Option<f64> {
        let w = word.trim().to_lowercase();
        if let Some(v) = self.entries.get(&w) {
            return Some(*v);
        }
        for suffix in ["ing", "ed", "s"] {
            if let Some(stem) = w.strip_suffix(suffix).filter(|s| s.len() >= 3) {
                if let Some(v) = self.entries.get(stem).or_else(|| self.entries.get(&format!("{stem}e"))) {
                    return Some(*v);
                }
            }
        }
        None
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_vad_columns_and_comments() {
        let lex = ValenceLexicon::parse(
            "# comment\nterm\tvalence\tarousal\tdominance\nHappy\t0.96\t0.73\t0.68\nsad\t0.05\n\n",
        )
        .unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.get("happy"), Some(0.96));
        assert_eq!(lex.get("SAD"), Some(0.05));
    }

    #[test]
    fn rejects_out_of_range_values() {
        assert!(ValenceLexicon::parse("happy\t1.5").is_err());
        assert!(ValenceLexicon::parse("happy\t0.5\nsad\tlow").is_err());
    }

    #[test]
    fn suffix_retry() {
        let lex = ValenceLexicon::parse("hope\t0.9\nworry\t0.2\nexcite\t0.8").unwrap();
        assert_eq!(lex.lookup("hopes"), Some(0.9));
        assert_eq!(lex.lookup("worried"), None);
        assert_eq!(lex.lookup("excited"), Some(0.8));
        assert_eq!(lex.lookup("hoping"), Some(0.9));
        assert_eq!(lex.lookup("unknown"), None);
    }

    #[test]
    fn bundled_lexicon_has_fifty_words() {
        let lex = ValenceLexicon::bundled();
        assert_eq!(lex.len(), 50);
        assert!(lex.words().all(|(_, v)| (0.0..=1.0).contains(&v)));
    }
}
