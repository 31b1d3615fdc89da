//! Extraction of privacy-practice disclosures from privacy policies with
//! chat-completion models, plus evaluation, consistency auditing and cost
//! modelling of those extractions.

pub mod audit;
pub mod budget;
pub mod config;
pub mod corpus;
pub mod economics;
pub mod evaluation;
pub mod finetune;
pub mod parsing;
pub mod prompting;
pub mod provider;
