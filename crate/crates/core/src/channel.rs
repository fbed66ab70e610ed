//! Superposition of all device signals plus unit-variance AWGN.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::encoder::{Amplitudes, DeviceMessage, SparseState};
use crate::error::{Error, Result};
use crate::outer_code::OuterFactorGraph;
use crate::sensing::SensingOperator;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOutput {
    /// `y_pilot[b] = d0·K_b + N(0, 1)`.
    pub y_pilot: Vec<f64>,
    /// `y = Σ_b d·A_b s_b + z`.
    pub y_main: Vec<f64>,
    /// True occupancy `K_b` per bin.
    pub occupancy: Vec<usize>,
    /// True superposed state `s`.
    pub state: SparseState,
}

/// Sends every message through the channel. The main signal is formed per
/// bin from the superposed state, which by linearity equals the sum of the
/// device signals. Noise is drawn pilot first, then main, and not at all in
/// noiseless mode.
pub fn transmit<R: Rng + ?Sized>(
    messages: &[DeviceMessage],
    cfg: &SystemConfig,
    graph: &OuterFactorGraph,
    ops: &[SensingOperator],
    amps: &Amplitudes,
    rng: &mut R,
) -> Result<ChannelOutput> {
    if ops.len() != cfg.bins {
        return Err(Error::DimensionMismatch {
            expected: cfg.bins,
            actual: ops.len(),
        });
    }
    let mut state = SparseState::for_config(cfg);
    let mut occupancy = vec![0usize; cfg.bins];
    for msg in messages {
        let bin = msg.bin();
        if bin >= cfg.bins {
            return Err(Error::DimensionMismatch {
                expected: cfg.bins,
                actual: bin + 1,
            });
        }
        occupancy[bin] += 1;
        state.add_codeword(bin, &graph.encode(&msg.payload)?);
    }

    let mut y_pilot: Vec<f64> = occupancy.iter().map(|&k| amps.pilot * k as f64).collect();
    let mut y_main = vec![0.0; cfg.n_main()];
    for (b, op) in ops.iter().enumerate() {
        if occupancy[b] == 0 {
            continue;
        }
        for (y, v) in y_main.iter_mut().zip(op.forward(state.block(b))?) {
            *y += amps.main * v;
        }
    }

    if !cfg.noiseless {
        for y in y_pilot.iter_mut().chain(y_main.iter_mut()) {
            *y += rng.sample::<f64, _>(StandardNormal);
        }
    }

    Ok(ChannelOutput {
        y_pilot,
        y_main,
        occupancy,
        state,
    })
}
