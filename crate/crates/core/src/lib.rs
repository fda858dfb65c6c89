pub mod cli;
pub mod climate;
pub mod corpus;
pub mod engine;
pub mod export;
pub mod generation;
pub mod neural;
pub mod service;
pub mod training;
