//! Text normalization shared by OCR matching, VQA answer projection and
//! description matching.

use unicode_normalization::UnicodeNormalization;

/// Compatibility-fold, lowercase, turn punctuation into spaces and collapse
/// whitespace.
///
/// ```
/// assert_eq!(vprog::text::normalize("  Open—24 HOURS! "), "open 24 hours");
/// assert_eq!(vprog::text::normalize("ＳＨＯＰ"), "shop");
/// ```
pub fn normalize(s: &str) -> String {
    let folded: String = s
        .nfkc()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    collapse_whitespace(&folded)
}

/// Trim and join runs of whitespace with a single space.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Case- and whitespace-insensitive key used to match descriptions and
/// fixture queries.
pub fn description_key(s: &str) -> String {
    collapse_whitespace(&s.to_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn punctuation_becomes_space() {
        assert_eq!(normalize("Yes."), "yes");
        assert_eq!(normalize("it's"), "it s");
        assert_eq!(normalize("a--b"), "a b");
        assert_eq!(normalize("!!!"), "");
    }

    #[test]
    fn description_key_keeps_punctuation() {
        assert_eq!(description_key("  Potted   Plant "), "potted plant");
    }
}
