//! Word-level recurrent language models: embedding, two stacked LSTM, GRU
//! or recurrent-highway layers, and an untied decoder.

mod cell;
mod forward;
mod params;

pub use cell::{cell_step, GateVars};
pub use forward::{
    bind_state, collect_grads, detach_state, forward_chunk, BoundParams, ChunkOutput, HiddenState,
    LanguageModel, LayerState, StateVars,
};
pub use params::{Arch, CellParams, GateParams, ModelParams, INIT_RANGE, LAYERS};
