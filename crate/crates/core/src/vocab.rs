//! Shipped word lists: the 80-category detector vocabulary and the stopword
//! list used when reducing captions to content words.

use std::collections::HashSet;
use std::sync::OnceLock;

static LABELS_TXT: &str = include_str!("../data/coco_labels.txt");
static STOPWORDS_TXT: &str = include_str!("../data/stopwords.txt");

fn parse_list(text: &'static str) -> Vec<&'static str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// The detector's category vocabulary, in class-id order.
pub fn labels() -> &'static [&'static str] {
    static LABELS: OnceLock<Vec<&'static str>> = OnceLock::new();
    LABELS.get_or_init(|| parse_list(LABELS_TXT))
}

pub fn is_label(label: &str) -> bool {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| labels().iter().copied().collect())
        .contains(label)
}

pub fn is_stopword(word: &str) -> bool {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| parse_list(STOPWORDS_TXT).into_iter().collect())
        .contains(word)
}

/// Lowercased alphanumeric tokens in document order.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Tokens with stopwords removed, in document order.
pub fn content_words(text: &str) -> Vec<String> {
    tokens(text).into_iter().filter(|t| !is_stopword(t)).collect()
}
