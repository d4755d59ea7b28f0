//! Channel-width search: group-lasso sparsification, threshold pruning,
//! uniform expansion, grid search and Pareto extraction.

mod config;
mod cost;
mod pareto;
mod penalty;
mod prune;
mod search;

pub use config::{default_grid, ChannelGroup, CostKind, RegularizerConfig};
pub use cost::{channel_costs, ChannelCosts};
pub use pareto::{pareto_front, pareto_indices, Axis};
pub use penalty::{group_lasso_penalty, GroupLasso};
pub use prune::{channel_magnitudes, expand, prune, prune_channels};
pub use search::{morph_search, SearchData, SearchOptions, SearchPoint, SearchProgress, SHRINK_LR};
