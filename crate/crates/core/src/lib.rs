pub mod corpus;
pub mod nn;
pub mod preprocess;
pub mod scoring;
pub mod tfidf;
pub mod semantic;
pub mod explain;
pub mod fusion;
pub mod config;
pub mod pipeline;
pub mod harness;
