//! Turns the recovered bin states into the final message list.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::encoder::{DeviceMessage, SparseState};
use crate::error::Result;
use crate::occupancy::OccupancyEstimate;
use crate::outer_code::{list_decode, ListDecodeOptions, OuterFactorGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedEntry {
    /// Zero-based bin.
    pub bin: usize,
    pub payload: Vec<u8>,
    pub score: f64,
}

impl DecodedEntry {
    pub fn message(&self, bin_bits: u32) -> DeviceMessage {
        DeviceMessage::from_bin(self.bin, bin_bits, self.payload.clone())
    }
}

/// At most `K` unique `(bin, payload)` entries, best score first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecodedList {
    pub entries: Vec<DecodedEntry>,
}

impl DecodedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, bin: usize, payload: &[u8]) -> bool {
        self.entries.iter().any(|e| e.bin == bin && e.payload == payload)
    }
}

/// List-decodes every bin with its `K̂_b`, merges the candidates, orders them
/// by score (ties by `(bin, payload)`), drops duplicates and truncates to `K`.
pub fn disambiguate(
    s_hat: &SparseState,
    k_hat: &OccupancyEstimate,
    options: &ListDecodeOptions,
    graph: &OuterFactorGraph,
    max_messages: usize,
) -> Result<DecodedList> {
    let per_bin = (0..s_hat.bins())
        .into_par_iter()
        .map(|b| {
            let k = k_hat.k_hat.get(b).copied().unwrap_or(0.0);
            list_decode(s_hat.block(b), k, options, graph).map(|cands| {
                cands
                    .into_iter()
                    .map(|(cw, score)| DecodedEntry {
                        bin: b,
                        payload: graph.payload_of(&cw),
                        score,
                    })
                    .collect::<Vec<_>>()
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut entries: Vec<DecodedEntry> = per_bin.into_iter().flatten().collect();
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.bin.cmp(&b.bin))
            .then_with(|| a.payload.cmp(&b.payload))
    });
    let mut seen = HashSet::new();
    entries.retain(|e| seen.insert((e.bin, e.payload.clone())));
    entries.truncate(max_messages);
    Ok(DecodedList { entries })
}
