pub mod commands;
pub mod config;
pub mod corpus;
pub mod similarity;
