//! Query-aware visual token selection.
//!
//! Scores every visual token by fusing its intrinsic attention mass with its
//! relevance to a text query, keeps the top-scoring half of the budget, and
//! fills the rest with a redundancy-pruned sample of what remains.
//!
//! ```
//! use vistoken::io::synth::{synth_fixture, FixtureSpec};
//! use vistoken::partition::{select_tokens, SelectionConfig};
//!
//! let fx = synth_fixture(&FixtureSpec { seed: 7, ..Default::default() }).unwrap();
//! let cfg = SelectionConfig::with_keep(64);
//! let out = select_tokens(&fx.visual, &fx.attention, Some(&fx.text), &fx.projector, &cfg).unwrap();
//! assert_eq!(out.kept().len(), 64);
//! ```

pub mod cli;
pub mod error;
pub mod io;
pub mod math;
pub mod metrics;
pub mod partition;
pub mod relevance;
pub mod theory;

pub use error::{Error, Result};
pub use math::{Epsilon, FeatureMatrix, ScoreVector};
pub use partition::{select_tokens, PruneMode, SelectionConfig, SelectionResult};
pub use relevance::Projector;
