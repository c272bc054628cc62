use std::sync::OnceLock;

use regex::Regex;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

/// Minimum token length, in code points, that survives cleaning.
pub const MIN_TOKEN_CHARS: usize = 3;

fn email_pattern() -> &'static Regex {
    static EMAIL: OnceLock<Regex> = OnceLock::new();
    EMAIL.get_or_init(|| Regex::new(r"[^\s@]+@[^\s@]+\.[^\s@]+").expect("valid email regex"))
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || c.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// `scheme://...` anywhere in the token, or a `www.` prefix.
pub fn is_url(token: &str) -> bool {
    token.contains("://")
        || token
            .get(..4)
            .is_some_and(|prefix| prefix.eq_ignore_ascii_case("www."))
}

/// Anything of the shape `local@domain.tld`.
pub fn is_email(token: &str) -> bool {
    email_pattern().is_match(token)
}

/// Removes hyperlinks, emails, punctuation-only tokens and tokens shorter
/// than three characters. Surviving tokens keep their case and are joined
/// by single spaces.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for token in raw.split_whitespace() {
        let token = token.trim_matches(is_punctuation);
        if token.chars().count() < MIN_TOKEN_CHARS || is_url(token) || is_email(token) {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn drops_urls_and_short_words() {
        assert_eq!(clean_text("go to http://spam.example now please"), "now please");
    }

    #[test]
    fn drops_emails_and_punctuation_tokens() {
        assert_eq!(clean_text("Contact me@example.com asap !!"), "Contact asap");
    }

    #[test]
    fn empty_input() {
        assert_eq!(clean_text(""), "");
        assert_eq!(clean_text("   \t\n "), "");
    }

    #[test]
    fn strips_edge_punctuation_and_keeps_three_char_tokens() {
        assert_eq!(clean_text("\"Wow,\" said the cat... ok?"), "Wow said the cat");
        assert_eq!(clean_text("(www.example.org) «Hallo» – Welt!"), "Hallo Welt");
        assert_eq!(clean_text("don't stop"), "don't stop");
    }

    #[test]
    fn www_prefix_is_case_insensitive() {
        assert_eq!(clean_text("see WWW.Example.com today"), "see today");
    }

    #[test]
    fn keeps_long_emoji_runs() {
        // three code points survive, two do not
        assert_eq!(clean_text("nice 😀😀😀 😀😀"), "nice 😀😀😀");
    }

    #[test]
    fn multibyte_length_counts_code_points() {
        assert_eq!(clean_text("für äöü ß"), "für äöü");
    }

    proptest! {
        #[test]
        fn idempotent(raw in "\\PC{0,80}") {
            let once = clean_text(&raw);
            prop_assert_eq!(clean_text(&once), once.clone());
        }

        #[test]
        fn tokens_satisfy_postconditions(
            raw in prop::collection::vec(
                prop_oneof![
                    "[a-zA-Z]{1,6}",
                    "https?://[a-z]{1,8}\\.[a-z]{2,3}",
                    "www\\.[a-z]{1,8}\\.com",
                    "[a-z]{1,5}@[a-z]{1,5}\\.[a-z]{2,3}",
                    "[!?.,;:]{1,3}",
                    "\\PC{1,6}",
                ],
                0..20,
            ).prop_map(|v| v.join(" "))
        ) {
            let cleaned = clean_text(&raw);
            for tok in cleaned.split(' ').filter(|t| !t.is_empty()) {
                prop_assert!(tok.chars().count() >= MIN_TOKEN_CHARS);
                prop_assert!(!is_url(tok), "url survived: {}", tok);
                prop_assert!(!is_email(tok), "email survived: {}", tok);
            }
            prop_assert!(!cleaned.contains("  "));
        }
    }
}
