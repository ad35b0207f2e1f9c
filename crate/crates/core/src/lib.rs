pub mod accumulator;
pub mod bench;
pub mod board;
pub mod book;
pub mod codebook;
pub mod config;
pub mod eval;
pub mod heads;
pub mod mapping;
pub mod matches;
pub mod nn;
pub mod pattern;
pub mod protocol;
pub mod search;
pub mod service;
pub mod threats;
pub mod weights;
