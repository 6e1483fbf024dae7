use regex::Regex;

use crate::error::{Error, Result};
use crate::text::collapse_whitespace;

/// Default Wikipedia citation markers. Self-closing `<ref/>` comes before
/// the paired form so `<ref name=x/>` never opens a paired match.
pub const DEFAULT_PATTERNS: [&str; 3] = [r"<ref[^>]*/>", r"(?s)<ref[^>]*>.*?</ref>", r"\[\d+\]"];

/// Detects and strips citation markers.
#[derive(Debug, Clone)]
pub struct CitationDetector {
    patterns: Vec<Regex>,
}

impl Default for CitationDetector {
    fn default() -> Self {
        Self::new(DEFAULT_PATTERNS).expect("default citation patterns compile")
    }
}

impl CitationDetector {
    pub fn new<I, S>(patterns: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let patterns = patterns
            .into_iter()
            .map(|p| {
                Regex::new(p.as_ref())
                    .map_err(|e| Error::invalid(format!("bad citation pattern {:?}: {e}", p.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { patterns })
    }

    /// Returns the cleaned text and whether any marker was present.
    pub fn detect(&self, raw: &str) -> (String, bool) {
        let mut text = raw.to_string();
        let mut cited = false;
        // Removing one marker can expose another ("[[1]2]"), so iterate to a
        // fixed point.
        loop {
            let mut changed = false;
            for re in &self.patterns {
                if re.is_match(&text) {
                    text = re.replace_all(&text, "").into_owned();
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            cited = true;
        }
        if !cited {
            return (collapse_whitespace(&text), false);
        }
        (tighten_punctuation(&collapse_whitespace(&text)), true)
    }
}

/// Convenience wrapper using the default patterns.
pub fn detect_citation(raw: &str) -> (String, bool) {
    thread_local! {
        static DEFAULT: CitationDetector = CitationDetector::default();
    }
    DEFAULT.with(|d| d.detect(raw))
}

// A removed marker leaves "word ." behind; glue the punctuation back.
fn tighten_punctuation(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == ' ' && chars.peek().is_some_and(|n| matches!(n, '.' | ',' | ';' | ':' | '!' | '?')) {
            continue;
        }
        out.push(c);
    }
    out.trim().to_string()
}
