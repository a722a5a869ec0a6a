//! Query-text analytics: word-cloud counts, query vectors, similarity and
//! 2D/3D projections.

mod embeddings;
mod pca;
mod tokens;
mod vectors;

pub use embeddings::load_embeddings;
pub use pca::{pca_project, Projection};
pub use tokens::{default_stopwords, token_frequencies, tokenize, TokenCount, TokenFrequencies, DEFAULT_MIN_TOKEN_LEN};
pub use vectors::{cosine_similarity, nearest_queries, tfidf_vectors, Neighbour, QueryVectors, VectorSource};
