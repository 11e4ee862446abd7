//! Discretized-state Q-learning with variance-estimation exploration.

mod agent;
mod discretizer;
mod table;

pub use agent::{
    select_action_egreedy, select_action_ve, EpsSchedule, ExplorationConfig, ExplorationMode,
    TabularAgent,
};
pub use discretizer::{Discretizer, OneHotIndexer, StateIndexer};
pub use table::QSigmaTable;
