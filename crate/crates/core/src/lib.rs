//! Game-based abstraction of nondeterministic probabilistic programs.

pub mod domain;
pub mod game;
pub mod ir;
pub mod mdp;
pub mod parser;
pub mod refine;
pub mod solver;
