//! Sentence text helpers shared by the generator, the embedding cache and the
//! response parser.

use unicode_normalization::UnicodeNormalization;

/// Canonical lookup key for a sentence: Unicode NFC, trimmed, internal
/// whitespace collapsed to single spaces. Case and punctuation are kept.
pub fn normalize_key(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    collapse_whitespace(&nfc)
}

pub(crate) fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Turn a filled template into a dataset sentence: single spaces, capitalized
/// first letter, one terminal period.
pub fn finish_sentence(body: &str) -> String {
    let collapsed = collapse_whitespace(body);
    let trimmed = collapsed.trim_end_matches('.');
    let mut chars = trimmed.chars();
    let mut out = match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect::<String>(),
        None => String::new(),
    };
    out.push('.');
    out
}

/// Loose comparison form used when matching free-text answers: NFC, case-folded,
/// whitespace collapsed, terminal punctuation stripped.
pub fn answer_form(text: &str) -> String {
    let key = normalize_key(text).to_lowercase();
    key.trim_end_matches(['.', '!', '?', ',', ';', ':']).trim_end().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_collapses_and_composes() {
        assert_eq!(normalize_key("  The  mat\trolled \n"), "The mat rolled");
        // e + combining acute -> precomposed é
        assert_eq!(normalize_key("caf\u{0065}\u{0301}"), "caf\u{00e9}");
    }

    #[test]
    fn sentences_are_capitalized_with_one_period() {
        assert_eq!(finish_sentence("the mat rolled  into a pillow"), "The mat rolled into a pillow.");
        assert_eq!(finish_sentence("the chef baked "), "The chef baked.");
        assert_eq!(finish_sentence("done."), "Done.");
    }

    #[test]
    fn answer_form_folds_case_and_punctuation() {
        assert_eq!(answer_form("The MAT rolled into a pillow!."), "the mat rolled into a pillow");
        assert_eq!(answer_form("option d"), "option d");
    }
}
