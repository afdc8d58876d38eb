//! Compile first-order-logic problem statements over finite integer domains
//! into two-player semantic games, then learn strategies by neural MCTS
//! self-play.
//!
//! The crate is organized around a pipeline:
//!
//! - [`fol`] parses a small problem DSL into a [`fol::Problem`] with
//!   preorder-indexed formula trees.
//! - [`semgame`] turns a problem into a two-player game: states, legal
//!   moves, transitions, terminal evaluation, and a numeric state encoding.
//! - [`hsr`] ships the highest-safe-rung benchmark together with closed-form
//!   and brute-force correctness oracles used for fault counting.
//! - [`nn`] holds self-contained feed-forward policy/value networks with
//!   hand-derived gradients, Adam, and the policy losses.
//! - [`mcts`] is the search: PUCT selection, full expansion, value-network
//!   roll-outs, incremental-mean backup, and the warm-start options.
//! - [`train`] drives self-play, replay-buffer training, arena evaluation,
//!   and convergence detection for the named experiment configurations.
//! - [`score`] ranks checkpoints without ground truth via Elo and a
//!   two-population evolutionary stationary distribution.

pub mod fol;
pub mod hsr;
pub mod mcts;
pub mod nn;
pub mod score;
pub mod semgame;
pub mod train;

pub use fol::{parse_problem, Problem};
pub use semgame::{GameState, Player, Role};
