//! Triadic factor graph over Z_2^v and systematic encoding.

use std::path::Path;

use crate::error::{Error, Result};

/// Check table used for the (L = 16, J = 8) outer code. Information
/// sections form an 8-cycle through the checks, each information section
/// has degree two and each parity section degree one; the bipartite graph
/// is connected and its girth is 16.
pub const DEFAULT_TABLE_16_8: [[usize; 3]; 8] = [
    [0, 1, 8],
    [2, 3, 9],
    [4, 5, 10],
    [6, 7, 11],
    [1, 2, 12],
    [3, 4, 13],
    [5, 6, 14],
    [7, 0, 15],
];

/// Non-binary LDPC outer code whose checks each constrain three sections to
/// XOR to zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OuterFactorGraph {
    sections: usize,
    info_sections: usize,
    bits: u32,
    checks: Vec<[usize; 3]>,
    /// `(check, parity section)` in the order parity sections get resolved.
    parity_order: Vec<(usize, usize)>,
    /// For every section, the `(check, slot)` pairs it participates in.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl OuterFactorGraph {
    /// Builds the outer graph, either from `check_table` or from the built-in
    /// construction when `None`.
    pub fn build(
        sections: usize,
        info_sections: usize,
        bits: u32,
        check_table: Option<&[[usize; 3]]>,
    ) -> Result<Self> {
        if sections < 2 {
            return Err(Error::InvalidGraph(format!("need L >= 2, got {sections}")));
        }
        if info_sections == 0 || info_sections >= sections {
            return Err(Error::InvalidGraph(format!(
                "need 1 <= J < L, got J = {info_sections}, L = {sections}"
            )));
        }
        if bits == 0 || bits > 24 {
            return Err(Error::InvalidGraph(format!("section width v = {bits} out of range 1..=24")));
        }
        let checks = match check_table {
            Some(t) => t.to_vec(),
            None => default_table(sections, info_sections)?,
        };
        Self::from_checks(sections, info_sections, bits, checks)
    }

    /// A graph with no checks at all (`J = L`). Beliefs pass through BP
    /// unconstrained, which turns the dynamic denoiser into the static one.
    pub fn uncoded(sections: usize, bits: u32) -> Self {
        OuterFactorGraph {
            sections,
            info_sections: sections,
            bits,
            checks: Vec::new(),
            parity_order: Vec::new(),
            adjacency: vec![Vec::new(); sections],
        }
    }

    fn from_checks(sections: usize, info_sections: usize, bits: u32, checks: Vec<[usize; 3]>) -> Result<Self> {
        let parity = sections - info_sections;
        if checks.len() != parity {
            return Err(Error::InvalidGraph(format!(
                "expected L - J = {parity} checks, got {}",
                checks.len()
            )));
        }
        let mut adjacency = vec![Vec::new(); sections];
        for (c, check) in checks.iter().enumerate() {
            for (slot, &s) in check.iter().enumerate() {
                if s >= sections {
                    return Err(Error::InvalidGraph(format!("check {c}: section {s} out of range")));
                }
                if check[..slot].contains(&s) {
                    return Err(Error::InvalidGraph(format!("check {c}: section {s} repeated")));
                }
                adjacency[s].push((c, slot));
            }
        }
        if let Some(s) = adjacency.iter().position(|a| a.is_empty()) {
            return Err(Error::InvalidGraph(format!("section {s} is not covered by any check")));
        }

        let mut known: Vec<bool> = (0..sections).map(|s| s < info_sections).collect();
        let mut done = vec![false; checks.len()];
        let mut parity_order = Vec::with_capacity(parity);
        while parity_order.len() < parity {
            let next = (0..checks.len()).filter(|&c| !done[c]).find_map(|c| {
                let mut unknown = checks[c].iter().filter(|&&s| !known[s]);
                match (unknown.next(), unknown.next()) {
                    (Some(&s), None) => Some((c, s)),
                    _ => None,
                }
            });
            let Some((c, s)) = next else {
                return Err(Error::InvalidGraph(
                    "checks cannot be ordered to resolve one parity section each".into(),
                ));
            };
            done[c] = true;
            known[s] = true;
            parity_order.push((c, s));
        }

        Ok(OuterFactorGraph {
            sections,
            info_sections,
            bits,
            checks,
            parity_order,
            adjacency,
        })
    }

    /// Section count `L`.
    pub fn sections(&self) -> usize {
        self.sections
    }

    /// Information section count `J`.
    pub fn info_sections(&self) -> usize {
        self.info_sections
    }

    /// Bits per section `v`.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Alphabet size `2^v`.
    pub fn alphabet(&self) -> usize {
        1 << self.bits
    }

    pub fn checks(&self) -> &[[usize; 3]] {
        &self.checks
    }

    pub fn rate(&self) -> f64 {
        self.info_sections as f64 / self.sections as f64
    }

    pub fn payload_bits(&self) -> usize {
        self.info_sections * self.bits as usize
    }

    /// Parity sections in the order encoding resolves them.
    pub fn parity_order(&self) -> impl Iterator<Item = usize> + '_ {
        self.parity_order.iter().map(|&(_, s)| s)
    }

    pub(crate) fn adjacency(&self, section: usize) -> &[(usize, usize)] {
        &self.adjacency[section]
    }

    /// Systematic encoding of `J·v` payload bits.
    pub fn encode(&self, payload: &[u8]) -> Result<OuterCodeword> {
        if payload.len() != self.payload_bits() {
            return Err(Error::DimensionMismatch {
                expected: self.payload_bits(),
                actual: payload.len(),
            });
        }
        let mut symbols = bits_to_symbols(payload, self.bits);
        symbols.resize(self.sections, 0);
        for &(c, p) in &self.parity_order {
            symbols[p] = self.checks[c].iter().filter(|&&s| s != p).fold(0, |acc, &s| acc ^ symbols[s]);
        }
        Ok(OuterCodeword { symbols })
    }

    /// True iff every check XORs to zero and the codeword has the right shape.
    pub fn validate(&self, cw: &OuterCodeword) -> bool {
        cw.symbols.len() == self.sections
            && cw.symbols.iter().all(|&s| (s as usize) < self.alphabet())
            && self
                .checks
                .iter()
                .all(|[a, b, c]| cw.symbols[*a] ^ cw.symbols[*b] ^ cw.symbols[*c] == 0)
    }

    /// Recovers the payload bits from the systematic sections.
    pub fn payload_of(&self, cw: &OuterCodeword) -> Vec<u8> {
        symbols_to_bits(&cw.symbols[..self.info_sections], self.bits)
    }
}

/// Built-in check table: the fixed table for (16, 8), otherwise a greedy
/// deterministic construction. Each check pairs parity section `J + c` with
/// two already-resolved sections, preferring uncovered sections first, then
/// pairs that join disconnected components, then pairs that do not already
/// share a check (no 4-cycles), then least-used sections.
fn default_table(sections: usize, info: usize) -> Result<Vec<[usize; 3]>> {
    if (sections, info) == (16, 8) {
        return Ok(DEFAULT_TABLE_16_8.to_vec());
    }
    let mut coverage = vec![0usize; sections];
    let mut component: Vec<usize> = (0..sections).collect();
    let mut table: Vec<[usize; 3]> = Vec::new();
    for c in 0..sections - info {
        let parity = info + c;
        let mut best: Option<((usize, bool, bool, usize), (usize, usize))> = None;
        for p in 0..parity {
            for q in p + 1..parity {
                let uncovered = (coverage[p] == 0) as usize + (coverage[q] == 0) as usize;
                let joins = component[p] != component[q];
                let fresh = !table.iter().any(|t| t.contains(&p) && t.contains(&q));
                let load = coverage[p] + coverage[q];
                let key = (uncovered, joins, fresh, usize::MAX - load);
                if best.is_none_or(|(k, _)| key > k) {
                    best = Some((key, (p, q)));
                }
            }
        }
        let Some((_, (p, q))) = best else {
            return Err(Error::InvalidGraph(format!(
                "default construction needs J >= 2 (L = {sections}, J = {info})"
            )));
        };
        for s in [p, q, parity] {
            coverage[s] += 1;
        }
        let (from, to) = (component[q], component[p]);
        for comp in component.iter_mut() {
            if *comp == from {
                *comp = to;
            }
        }
        let (from, to) = (component[parity], component[p]);
        for comp in component.iter_mut() {
            if *comp == from {
                *comp = to;
            }
        }
        table.push([p, q, parity]);
    }
    if coverage.contains(&0) {
        return Err(Error::InvalidGraph(format!(
            "too few parity checks to cover all sections (L = {sections}, J = {info})"
        )));
    }
    Ok(table)
}

/// Parses a check table: one check per line, three whitespace-separated
/// zero-based section indices, `#` starts a comment.
pub fn parse_check_table(text: &str) -> Result<Vec<[usize; 3]>> {
    let mut table = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::CheckTableParse {
                line: i + 1,
                msg: format!("expected 3 indices, found {}", fields.len()),
            });
        }
        let mut check = [0usize; 3];
        for (slot, f) in fields.iter().enumerate() {
            check[slot] = f.parse().map_err(|_| Error::CheckTableParse {
                line: i + 1,
                msg: format!("bad index {f:?}"),
            })?;
        }
        table.push(check);
    }
    Ok(table)
}

pub fn load_check_table(path: impl AsRef<Path>) -> Result<Vec<[usize; 3]>> {
    parse_check_table(&std::fs::read_to_string(path)?)
}

/// Codeword of the outer code: one symbol in `[0, 2^v)` per section.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OuterCodeword {
    pub symbols: Vec<u32>,
}

/// Packs bits (one per byte, 0 or 1) into `v`-bit symbols, big-endian within
/// each symbol. Trailing bits that do not fill a symbol are ignored.
pub fn bits_to_symbols(bits: &[u8], v: u32) -> Vec<u32> {
    bits.chunks_exact(v as usize)
        .map(|chunk| chunk.iter().fold(0u32, |acc, &b| (acc << 1) | (b & 1) as u32))
        .collect()
}

/// Inverse of [`bits_to_symbols`].
pub fn symbols_to_bits(symbols: &[u32], v: u32) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|&s| (0..v).rev().map(move |k| ((s >> k) & 1) as u8))
        .collect()
}
