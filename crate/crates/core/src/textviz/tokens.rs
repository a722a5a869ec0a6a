use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{fail, ErrorCode, Result};
use crate::trec_io::QuerySet;

pub const DEFAULT_MIN_TOKEN_LEN: usize = 2;

const ENGLISH_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// The bundled English stopword list.
pub fn default_stopwords() -> BTreeSet<String> {
    ENGLISH_STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCount {
    pub token: String,
    pub count: usize,
}

/// Word-cloud data, most frequent first, ties broken alphabetically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenFrequencies {
    pub entries: Vec<TokenCount>,
}

impl TokenFrequencies {
    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn count(&self, token: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.token == token).map(|e| e.count)
    }
}

pub fn token_frequencies(
    queries: &QuerySet,
    stopwords: &BTreeSet<String>,
    min_token_len: usize,
) -> Result<TokenFrequencies> {
    if queries.is_empty() {
        return fail(ErrorCode::InsufficientData, "no queries to count");
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for rec in &queries.records {
        for tok in tokenize(&rec.text) {
            if tok.chars().count() >= min_token_len && !stopwords.contains(&tok) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
    }
    if counts.is_empty() {
        return fail(ErrorCode::AllTokensFiltered, "every token was filtered out");
    }
    let mut entries: Vec<TokenCount> = counts
        .into_iter()
        .map(|(token, count)| TokenCount { token, count })
        .collect();
    // BTreeMap order is already token-ascending; a stable sort keeps it for ties
    entries.sort_by_key(|e| std::cmp::Reverse(e.count));
    Ok(TokenFrequencies { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trec_io::QueryRecord;

    pub(crate) fn queries(texts: &[&str]) -> QuerySet {
        QuerySet {
            records: texts
                .iter()
                .enumerate()
                .map(|(i, t)| QueryRecord {
                    qid: format!("q{i}"),
                    text: t.to_string(),
                })
                .collect(),
        }
    }

    #[test]
    fn counts_and_order() {
        let f = token_frequencies(
            &queries(&["heart attack treatment", "heart disease"]),
            &BTreeSet::new(),
            DEFAULT_MIN_TOKEN_LEN,
        )
        .unwrap();
        let pairs: Vec<(&str, usize)> = f.entries.iter().map(|e| (e.token.as_str(), e.count)).collect();
        assert_eq!(pairs, [("heart", 2), ("attack", 1), ("disease", 1), ("treatment", 1)]);
    }

    #[test]
    fn case_folding_and_filtering() {
        let none = BTreeSet::new();
        let f = token_frequencies(&queries(&["Heart heart HEART"]), &none, 2).unwrap();
        assert_eq!(f.count("heart"), Some(3));
        let stop: BTreeSet<String> = ["heart".to_string()].into();
        assert_eq!(
            token_frequencies(&queries(&["Heart heart"]), &stop, 2).unwrap_err().code,
            ErrorCode::AllTokensFiltered
        );
        let f = token_frequencies(&queries(&["a b-cd, e"]), &none, 2).unwrap();
        assert_eq!(f.total(), 1);
    }

    #[test]
    fn bundled_list() {
        let s = default_stopwords();
        assert!(s.len() >= 300);
        assert!(s.contains("the") && s.contains("of"));
        let f = token_frequencies(&queries(&["the treatment of the heart"]), &s, 2).unwrap();
        assert_eq!(f.total(), 2);
    }
}
