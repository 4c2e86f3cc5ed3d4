//! Hybrid retrieval over statutes and precedents, judgment prompting for
//! reasoning models, structured-output parsing and lexical evaluation.

pub mod chunking;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod dense;
pub mod embedding;
pub mod evaluation;
pub mod generation;
pub mod lexical;
pub mod pipeline;
pub mod ranking;
pub mod retrieval;
pub mod text;

#[cfg(test)]
mod test_support;
