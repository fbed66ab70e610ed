//! Non-binary LDPC outer code over Z_2^v.

mod bp;
mod graph;

pub use bp::{
    bp_round, check_to_var_message, codeword_score, list_decode, BeliefState, ListDecodeOptions,
    BELIEF_FLOOR, LIST_DECODE_MAX_ROUNDS, LIST_DECODE_TOLERANCE,
};
pub use graph::{
    bits_to_symbols, load_check_table, parse_check_table, symbols_to_bits, OuterCodeword,
    OuterFactorGraph, DEFAULT_TABLE_16_8,
};
pub use crate::wht::fwht;
