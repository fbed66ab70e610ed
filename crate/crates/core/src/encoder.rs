//! Device-side encoding: bin selection, outer encoding, one-hot indexing,
//! amplitude scaling and the occupancy pilot.

use rand::Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::outer_code::{OuterCodeword, OuterFactorGraph};
use crate::sensing::SensingOperator;

/// A device's message: `w0` bin-selection bits followed by the `J·v` bits
/// carried by the outer code. Bits are stored one per byte.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeviceMessage {
    pub bin_bits: Vec<u8>,
    pub payload: Vec<u8>,
}

impl DeviceMessage {
    pub fn random<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Self {
        let bin_bits = (0..cfg.bin_bits()).map(|_| rng.random_range(0..2u8)).collect();
        let payload = (0..cfg.payload_bits()).map(|_| rng.random_range(0..2u8)).collect();
        DeviceMessage { bin_bits, payload }
    }

    /// Zero-based bin slot, `select_bin(self) - 1`.
    pub fn bin(&self) -> usize {
        self.bin_bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize)
    }

    pub fn from_bin(bin: usize, bin_bits: u32, payload: Vec<u8>) -> Self {
        let bin_bits = (0..bin_bits).rev().map(|k| ((bin >> k) & 1) as u8).collect();
        DeviceMessage { bin_bits, payload }
    }
}

/// One-based bin index `b = [w(0)]_2 + 1`.
pub fn select_bin(msg: &DeviceMessage) -> usize {
    msg.bin() + 1
}

/// Concatenated per-bin states `s = s_1 … s_B`; each block holds `L`
/// sections of `2^v` nonnegative reals.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState {
    bins: usize,
    sections: usize,
    alphabet: usize,
    data: Vec<f64>,
}

impl SparseState {
    pub fn zeros(bins: usize, sections: usize, alphabet: usize) -> Self {
        SparseState {
            bins,
            sections,
            alphabet,
            data: vec![0.0; bins * sections * alphabet],
        }
    }

    pub fn for_config(cfg: &SystemConfig) -> Self {
        Self::zeros(cfg.bins, cfg.sections, cfg.alphabet())
    }

    pub fn from_blocks(sections: usize, alphabet: usize, blocks: Vec<Vec<f64>>) -> Result<Self> {
        let block_len = sections * alphabet;
        let bins = blocks.len();
        let mut data = Vec::with_capacity(bins * block_len);
        for b in blocks {
            if b.len() != block_len {
                return Err(Error::DimensionMismatch {
                    expected: block_len,
                    actual: b.len(),
                });
            }
            data.extend(b);
        }
        Ok(SparseState {
            bins,
            sections,
            alphabet,
            data,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn sections(&self) -> usize {
        self.sections
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn block_len(&self) -> usize {
        self.sections * self.alphabet
    }

    pub fn block(&self, bin: usize) -> &[f64] {
        let n = self.block_len();
        &self.data[bin * n..(bin + 1) * n]
    }

    pub fn block_mut(&mut self, bin: usize) -> &mut [f64] {
        let n = self.block_len();
        &mut self.data[bin * n..(bin + 1) * n]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.block_len())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Adds one device's one-hot sections into its bin.
    pub fn add_codeword(&mut self, bin: usize, cw: &OuterCodeword) {
        let q = self.alphabet;
        let block = self.block_mut(bin);
        for (l, &s) in cw.symbols.iter().enumerate() {
            block[l * q + s as usize] += 1.0;
        }
    }
}

/// `m`: section `ℓ` is one-hot at position `v(ℓ)`.
pub fn index_sections(cw: &OuterCodeword, alphabet: usize) -> Vec<f64> {
    let mut m = vec![0.0; cw.symbols.len() * alphabet];
    for (l, &s) in cw.symbols.iter().enumerate() {
        m[l * alphabet + s as usize] = 1.0;
    }
    m
}

/// Signal amplitudes shared by every device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    /// Amplitude `d` of the CCS signal.
    pub main: f64,
    /// Pilot amplitude `d0`.
    pub pilot: f64,
    /// Per-device energy budget `n·P`.
    pub energy: f64,
}

/// Splits the per-device budget `n·P = 2w·Eb/N0` (with `w` the payload bits)
/// between the pilot, `d0² = f·nP`, and the `L` unit-norm columns of the
/// main signal, `d² = (nP − d0²)/L`.
pub fn compute_amplitudes(cfg: &SystemConfig) -> Result<Amplitudes> {
    let fraction = cfg.pilot_fraction();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "pilot energy fraction {fraction} must lie in (0, 1)"
        )));
    }
    let ebn0 = 10f64.powf(cfg.ebn0_db / 10.0);
    let energy = 2.0 * cfg.payload_bits() as f64 * ebn0;
    let pilot_energy = fraction * energy;
    Ok(Amplitudes {
        main: ((energy - pilot_energy) / cfg.sections as f64).sqrt(),
        pilot: pilot_energy.sqrt(),
        energy,
    })
}

/// Power per channel use `P`.
pub fn power_per_channel_use(cfg: &SystemConfig) -> f64 {
    2.0 * cfg.payload_bits() as f64 * 10f64.powf(cfg.ebn0_db / 10.0) / cfg.n_total as f64
}

/// The two parts of a device's transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSignal {
    /// `d0·e_b`, length `B`.
    pub pilot: Vec<f64>,
    /// `d·A_b m`, length `n_main`.
    pub main: Vec<f64>,
}

impl DeviceSignal {
    pub fn energy(&self) -> f64 {
        self.pilot.iter().chain(&self.main).map(|x| x * x).sum()
    }
}

pub fn encode_device(
    msg: &DeviceMessage,
    cfg: &SystemConfig,
    graph: &OuterFactorGraph,
    ops: &[SensingOperator],
    amps: &Amplitudes,
) -> Result<DeviceSignal> {
    if ops.len() != cfg.bins {
        return Err(Error::DimensionMismatch {
            expected: cfg.bins,
            actual: ops.len(),
        });
    }
    if msg.bin_bits.len() != cfg.bin_bits() as usize {
        return Err(Error::DimensionMismatch {
            expected: cfg.bin_bits() as usize,
            actual: msg.bin_bits.len(),
        });
    }
    let bin = msg.bin();
    let cw = graph.encode(&msg.payload)?;
    let mut main = ops[bin].forward(&index_sections(&cw, graph.alphabet()))?;
    main.iter_mut().for_each(|x| *x *= amps.main);
    let mut pilot = vec![0.0; cfg.bins];
    pilot[bin] = amps.pilot;
    Ok(DeviceSignal { pilot, main })
}
