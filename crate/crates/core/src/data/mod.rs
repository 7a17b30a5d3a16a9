//! Corpus handling: dataset files, tokenization, vocabulary, pretrained
//! vectors, and truncation into model-ready index sequences.

mod dataset;
mod embeddings;
mod text;
mod tokenized;
mod vocab;

pub use dataset::{
    load_dataset, parse_csv, parse_jsonl, to_jsonl, write_jsonl, Article, Dataset, DatasetFormat,
    Label, RejectedRecord,
};
pub use embeddings::{
    build_embedding_matrix, load_pretrained, parse_pretrained, PretrainedEmbeddings,
    DEFAULT_EMBEDDING_DIM, OOV_INIT,
};
pub use text::{split_sentences, tokenize_words};
pub use tokenized::{pad_document, pad_sentence, tokenize_all, tokenize_article, SequenceLimits, TokenizedArticle};
pub use vocab::{
    article_tokens, build_vocab, token_counts, vocab_from_counts, Vocabulary, DEFAULT_MAX_VOCAB,
    PAD_TOKEN, RESERVED, UNK_ID, UNK_TOKEN,
};
