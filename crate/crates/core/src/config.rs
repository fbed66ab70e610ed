//! Simulation parameters, presets and the flat `key = value` config format.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// How occupancy estimates are refined from the AMP effective observation
/// between iterations. The pilot LMMSE estimate always seeds AMP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Refinement {
    #[default]
    None,
    MmsePosterior,
    MlEpsilon,
}

impl FromStr for Refinement {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Refinement::None),
            "mmse_posterior" => Ok(Refinement::MmsePosterior),
            "ml_epsilon" => Ok(Refinement::MlEpsilon),
            other => Err(Error::Config(format!("unknown occupancy refinement {other:?}"))),
        }
    }
}

impl Refinement {
    pub fn as_str(&self) -> &'static str {
        match self {
            Refinement::None => "none",
            Refinement::MmsePosterior => "mmse_posterior",
            Refinement::MlEpsilon => "ml_epsilon",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Small instance that runs in seconds; used by the test suites.
    Desk,
    /// K = 64, w = 128, n = 38400, L = 16, v = 16, rate 1/2.
    Paper,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }
}

/// Every parameter of a simulation point.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Active devices `K`.
    pub active_devices: usize,
    /// Channel uses `n`, including the `B` pilot uses.
    pub n_total: usize,
    /// Bin count `B`, a power of two.
    pub bins: usize,
    /// Bits per section `v`.
    pub section_bits: u32,
    /// Outer-code sections `L`.
    pub sections: usize,
    /// Information sections `J`.
    pub info_sections: usize,
    pub ebn0_db: f64,
    /// Fraction of the per-device energy spent on the pilot; `None` means
    /// `0.002·B`.
    pub pilot_energy_fraction: Option<f64>,
    pub amp_iterations: usize,
    pub bp_rounds_per_denoise: usize,
    /// Candidates beyond `round(K̂_b)` per root section during list decoding.
    pub list_surplus: usize,
    /// Number of root sections (sections `0..list_roots`) that seed list
    /// decoding.
    pub list_roots: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub genie_occupancy: bool,
    pub noiseless: bool,
    pub occupancy_refinement: Refinement,
    /// Optional check table file; the built-in graph is used otherwise.
    pub check_table: Option<PathBuf>,
}

impl SystemConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => SystemConfig {
                active_devices: 64,
                n_total: 38400,
                bins: 1,
                section_bits: 16,
                sections: 16,
                info_sections: 8,
                ebn0_db: 2.0,
                pilot_energy_fraction: None,
                amp_iterations: 10,
                bp_rounds_per_denoise: 1,
                list_surplus: 5,
                list_roots: 1,
                trials: 100,
                base_seed: 0,
                genie_occupancy: false,
                noiseless: false,
                occupancy_refinement: Refinement::None,
                check_table: None,
            },
            Preset::Desk => SystemConfig {
                active_devices: 24,
                n_total: 3000,
                bins: 1,
                section_bits: 10,
                sections: 8,
                info_sections: 4,
                ebn0_db: DESK_EBN0_DB,
                pilot_energy_fraction: None,
                amp_iterations: 10,
                bp_rounds_per_denoise: 1,
                list_surplus: 5,
                list_roots: 4,
                trials: 200,
                base_seed: 0,
                genie_occupancy: false,
                noiseless: false,
                occupancy_refinement: Refinement::None,
                check_table: None,
            },
        }
    }

    pub fn paper() -> Self {
        Self::preset(Preset::Paper)
    }

    pub fn desk() -> Self {
        Self::preset(Preset::Desk)
    }

    /// Bin-selection bits `w0 = log2 B`.
    pub fn bin_bits(&self) -> u32 {
        self.bins.trailing_zeros()
    }

    pub fn payload_bits(&self) -> usize {
        self.info_sections * self.section_bits as usize
    }

    pub fn alphabet(&self) -> usize {
        1 << self.section_bits
    }

    /// Channel uses left for the CCS signal after the `B` pilot uses.
    pub fn n_main(&self) -> usize {
        self.n_total.saturating_sub(self.bins)
    }

    /// Columns per bin, `L·2^v`.
    pub fn column_count(&self) -> usize {
        self.sections << self.section_bits
    }

    /// Hadamard dimension: the next power of two at or above `L·2^v`.
    pub fn hadamard_dim(&self) -> usize {
        self.column_count().next_power_of_two()
    }

    pub fn pilot_fraction(&self) -> f64 {
        self.pilot_energy_fraction.unwrap_or(0.002 * self.bins as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.bins == 0 || !self.bins.is_power_of_two() {
            return fail(format!("bins = {} is not a power of two", self.bins));
        }
        if self.section_bits == 0 || self.section_bits > 20 {
            return fail(format!("section_bits = {} outside 1..=20", self.section_bits));
        }
        if self.sections < 2 || self.info_sections == 0 || self.info_sections >= self.sections {
            return fail(format!(
                "need 1 <= info_sections < sections, got {} and {}",
                self.info_sections, self.sections
            ));
        }
        if self.n_total <= self.bins {
            return fail(format!("n_total = {} leaves no main channel uses after {} pilots", self.n_total, self.bins));
        }
        if self.n_main() > self.hadamard_dim() - 1 {
            return fail(format!(
                "n_main = {} exceeds Hadamard rows available ({})",
                self.n_main(),
                self.hadamard_dim() - 1
            ));
        }
        let f = self.pilot_fraction();
        if !(f > 0.0 && f < 1.0) {
            return fail(format!("pilot energy fraction {f} outside (0, 1)"));
        }
        if !self.ebn0_db.is_finite() {
            return fail("ebn0_db must be finite".into());
        }
        if self.trials == 0 {
            return fail("trials must be >= 1".into());
        }
        if self.list_roots == 0 || self.list_roots > self.sections {
            return fail(format!("list_roots = {} outside 1..=sections", self.list_roots));
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Unknown keys are errors.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", i + 1)));
            };
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_kv_text(text: &str, base: Preset) -> Result<Self> {
        let mut cfg = Self::preset(base);
        cfg.apply_kv_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, base: Preset) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_kv_text(&text, base)
    }

    /// Sets one field by its name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
        }
        match key {
            "active_devices" => self.active_devices = num(key, value)?,
            "n_total" => self.n_total = num(key, value)?,
            "bins" => self.bins = num(key, value)?,
            "section_bits" => self.section_bits = num(key, value)?,
            "sections" => self.sections = num(key, value)?,
            "info_sections" => self.info_sections = num(key, value)?,
            "ebn0_db" => self.ebn0_db = num(key, value)?,
            "pilot_energy_fraction" => {
                self.pilot_energy_fraction = match value {
                    "auto" => None,
                    v => Some(num(key, v)?),
                }
            }
            "amp_iterations" => self.amp_iterations = num(key, value)?,
            "bp_rounds_per_denoise" => self.bp_rounds_per_denoise = num(key, value)?,
            "list_surplus" => self.list_surplus = num(key, value)?,
            "list_roots" => self.list_roots = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "base_seed" => self.base_seed = num(key, value)?,
            "genie_occupancy" => self.genie_occupancy = num(key, value)?,
            "noiseless" => self.noiseless = num(key, value)?,
            "occupancy_refinement" => self.occupancy_refinement = value.parse()?,
            "check_table" => {
                self.check_table = match value {
                    "" | "default" => None,
                    p => Some(PathBuf::from(p)),
                }
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Serializes to the flat config format; `from_kv_text` reads it back.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("active_devices", self.active_devices.to_string());
        put("n_total", self.n_total.to_string());
        put("bins", self.bins.to_string());
        put("section_bits", self.section_bits.to_string());
        put("sections", self.sections.to_string());
        put("info_sections", self.info_sections.to_string());
        put("ebn0_db", self.ebn0_db.to_string());
        put(
            "pilot_energy_fraction",
            self.pilot_energy_fraction.map_or("auto".into(), |f| f.to_string()),
        );
        put("amp_iterations", self.amp_iterations.to_string());
        put("bp_rounds_per_denoise", self.bp_rounds_per_denoise.to_string());
        put("list_surplus", self.list_surplus.to_string());
        put("list_roots", self.list_roots.to_string());
        put("trials", self.trials.to_string());
        put("base_seed", self.base_seed.to_string());
        put("genie_occupancy", self.genie_occupancy.to_string());
        put("noiseless", self.noiseless.to_string());
        put("occupancy_refinement", self.occupancy_refinement.as_str().into());
        put(
            "check_table",
            self.check_table
                .as_ref()
                .map_or("default".into(), |p| p.display().to_string()),
        );
        s
    }
}

/// Eb/N0 of the desk preset, in the range where the single-bin PUPE sits
/// between 5% and 30%.
pub const DESK_EBN0_DB: f64 = 3.0;
