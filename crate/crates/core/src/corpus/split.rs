use crate::text::collapse_whitespace;

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Rule-based sentence splitter.
///
/// Splits after a run of `.`, `!` or `?` that is followed by a space and an
/// uppercase letter. A run starting with `.` right after a digit never
/// splits ("in 1996. He" stays whole, as does "3.5").
pub fn split_sentences(text: &str) -> Vec<String> {
    let collapsed = collapse_whitespace(text);
    let chars: Vec<char> = collapsed.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if !is_terminator(chars[i]) {
            i += 1;
            continue;
        }
        let run_start = i;
        while i + 1 < chars.len() && is_terminator(chars[i + 1]) {
            i += 1;
        }
        let followed_by_upper =
            chars.get(i + 1) == Some(&' ') && chars.get(i + 2).is_some_and(|c| c.is_uppercase());
        let after_digit = chars[run_start] == '.'
            && run_start > 0
            && chars[run_start - 1].is_ascii_digit();
        if followed_by_upper && !after_digit {
            out.push(chars[start..=i].iter().collect());
            start = i + 2;
            i += 2;
        } else {
            i += 1;
        }
    }
    if start < chars.len() {
        out.push(chars[start..].iter().collect());
    }
    out
}
