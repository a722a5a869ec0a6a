use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::tokens::tokenize;
use crate::error::{fail, ErrorCode, Result};
use crate::trec_io::QuerySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorSource {
    Tfidf,
    External,
}

/// One L2-normalized row per query. `vocabulary` names the dimensions for
/// TF-IDF vectors and is empty for imported embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryVectors {
    pub qids: Vec<String>,
    pub vocabulary: Vec<String>,
    pub dimension: usize,
    pub vectors: Vec<Vec<f64>>,
    pub source: VectorSource,
}

impl QueryVectors {
    pub fn vector(&self, qid: &str) -> Option<&[f64]> {
        let i = self.qids.iter().position(|q| q == qid)?;
        Some(&self.vectors[i])
    }
}

pub(crate) fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// TF-IDF with raw term counts and smoothed idf `ln((1 + N) / (1 + df)) + 1`.
/// Every token counts, including one-character tokens and stopwords.
pub fn tfidf_vectors(queries: &QuerySet) -> Result<QueryVectors> {
    let n = queries.len();
    if n < 2 {
        return fail(ErrorCode::InsufficientData, "need at least 2 queries");
    }
    let term_counts: Vec<BTreeMap<String, usize>> = queries
        .records
        .iter()
        .map(|r| {
            let mut tf = BTreeMap::new();
            for tok in tokenize(&r.text) {
                *tf.entry(tok).or_insert(0) += 1;
            }
            tf
        })
        .collect();
    let vocabulary: Vec<String> = term_counts
        .iter()
        .flat_map(|tf| tf.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let mut df = vec![0usize; vocabulary.len()];
    for tf in &term_counts {
        for t in tf.keys() {
            df[index[t.as_str()]] += 1;
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| ((1 + n) as f64 / (1 + d) as f64).ln() + 1.0)
        .collect();
    let vectors = term_counts
        .iter()
        .map(|tf| {
            let mut row = vec![0.0; vocabulary.len()];
            for (t, &c) in tf {
                let j = index[t.as_str()];
                row[j] = c as f64 * idf[j];
            }
            l2_normalize(&mut row);
            row
        })
        .collect();
    Ok(QueryVectors {
        qids: queries.qids().map(str::to_owned).collect(),
        dimension: vocabulary.len(),
        vocabulary,
        vectors,
        source: VectorSource::Tfidf,
    })
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return fail(
            ErrorCode::DimensionMismatch,
            format!("vector lengths {} and {} differ", u.len(), v.len()),
        );
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return fail(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbour {
    pub qid: String,
    pub similarity: f64,
}

/// The `k` most similar other queries for each query. Zero vectors have no
/// neighbours.
pub fn nearest_queries(vectors: &QueryVectors, k: usize) -> BTreeMap<String, Vec<Neighbour>> {
    let mut out = BTreeMap::new();
    for (i, qid) in vectors.qids.iter().enumerate() {
        let mut list: Vec<Neighbour> = vectors
            .qids
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .filter_map(|(j, other)| {
                cosine_similarity(&vectors.vectors[i], &vectors.vectors[j])
                    .ok()
                    .map(|similarity| Neighbour {
                        qid: other.clone(),
                        similarity,
                    })
            })
            .collect();
        list.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then_with(|| a.qid.cmp(&b.qid)));
        list.truncate(k);
        out.insert(qid.clone(), list);
    }
    out
}
