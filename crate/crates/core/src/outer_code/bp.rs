//! Belief propagation on the outer factor graph.
//!
//! Beliefs for a bin are stored flat: section `ℓ` occupies
//! `[ℓ·2^v, (ℓ+1)·2^v)`. A check enforces `a ⊕ b ⊕ c = 0`, so the message to
//! one neighbour is the XOR-convolution of the other two, which the
//! Walsh–Hadamard transform diagonalizes.

use crate::error::{Error, Result};
use crate::wht::fwht_in_place;

use super::graph::{OuterCodeword, OuterFactorGraph};

/// Floor applied to extrinsic beliefs before rescaling.
pub const BELIEF_FLOOR: f64 = 1e-12;

/// Round cap for list-decoding BP.
pub const LIST_DECODE_MAX_ROUNDS: usize = 8;

/// Convergence threshold on the max absolute change of extrinsic beliefs.
pub const LIST_DECODE_TOLERANCE: f64 = 1e-6;

/// Normalizes `x` to unit sum in place. A vector with zero (or non-positive)
/// mass becomes uniform; returns false in that case.
fn normalize_or_uniform(x: &mut [f64]) -> bool {
    let sum: f64 = x.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        let inv = 1.0 / sum;
        x.iter_mut().for_each(|e| *e *= inv);
        true
    } else {
        let u = 1.0 / x.len() as f64;
        x.iter_mut().for_each(|e| *e = u);
        false
    }
}

fn clip_and_rescale(x: &mut [f64]) {
    x.iter_mut().for_each(|e| *e = e.clamp(BELIEF_FLOOR, 1.0));
    normalize_or_uniform(x);
}

/// XOR-convolution of two spectra (already transformed), returned in the
/// symbol domain, clipped at zero and normalized.
fn convolve_spectra(fa: &[f64], fb: &[f64], out: &mut [f64]) -> bool {
    for ((o, a), b) in out.iter_mut().zip(fa).zip(fb) {
        *o = a * b;
    }
    fwht_in_place(out);
    let scale = 1.0 / out.len() as f64;
    out.iter_mut().for_each(|e| *e = (*e * scale).max(0.0));
    normalize_or_uniform(out)
}

/// Message a degree-3 XOR check sends to one neighbour given the incoming
/// messages from the other two: `fwht(fwht(μ1) ⊙ fwht(μ2)) / 2^v`, clipped at
/// zero and normalized to unit sum.
pub fn check_to_var_message(mu1: &[f64], mu2: &[f64]) -> Result<Vec<f64>> {
    if !mu1.len().is_power_of_two() {
        return Err(Error::NotPowerOfTwo(mu1.len()));
    }
    if mu1.len() != mu2.len() {
        return Err(Error::DimensionMismatch {
            expected: mu1.len(),
            actual: mu2.len(),
        });
    }
    if mu1.iter().chain(mu2).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("check message input"));
    }
    if mu1.iter().all(|&x| x == 0.0) || mu2.iter().all(|&x| x == 0.0) {
        return Err(Error::VacuousMessage);
    }
    let mut fa = mu1.to_vec();
    let mut fb = mu2.to_vec();
    fwht_in_place(&mut fa);
    fwht_in_place(&mut fb);
    let mut out = vec![0.0; mu1.len()];
    if !convolve_spectra(&fa, &fb, &mut out) {
        return Err(Error::VacuousMessage);
    }
    Ok(out)
}

/// Beliefs and per-edge check-to-variable messages for one outer graph.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    alphabet: usize,
    /// `check_to_var[c][slot]`: message from check `c` to the section in `slot`.
    check_to_var: Vec<[Vec<f64>; 3]>,
    /// Clipped, rescaled extrinsic belief per section, flat.
    extrinsic: Vec<f64>,
}

impl BeliefState {
    /// Uniform messages and beliefs, the state before any round has run.
    pub fn new(graph: &OuterFactorGraph) -> Self {
        let q = graph.alphabet();
        let u = 1.0 / q as f64;
        BeliefState {
            alphabet: q,
            check_to_var: graph
                .checks()
                .iter()
                .map(|_| [vec![u; q], vec![u; q], vec![u; q]])
                .collect(),
            extrinsic: vec![u; q * graph.sections()],
        }
    }

    /// Extrinsic belief of every section (excludes the section's own evidence).
    pub fn extrinsic(&self) -> &[f64] {
        &self.extrinsic
    }

    pub fn section(&self, section: usize) -> &[f64] {
        &self.extrinsic[section * self.alphabet..(section + 1) * self.alphabet]
    }

    pub fn into_extrinsic(self) -> Vec<f64> {
        self.extrinsic
    }
}

fn check_evidence(evidence: &[f64], graph: &OuterFactorGraph) -> Result<()> {
    let expected = graph.sections() * graph.alphabet();
    if evidence.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: evidence.len(),
        });
    }
    if evidence.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("local evidence"));
    }
    Ok(())
}

/// One flooding round.
///
/// Variable-to-check messages combine the (normalized) local evidence with
/// the other incoming check messages of `state`; check-to-variable messages
/// follow from [`check_to_var_message`]; the returned extrinsic belief of a
/// section is the normalized product of its incoming check messages, clipped
/// to `[BELIEF_FLOOR, 1]` and rescaled.
pub fn bp_round(state: &BeliefState, evidence: &[f64], graph: &OuterFactorGraph) -> Result<BeliefState> {
    check_evidence(evidence, graph)?;
    if evidence.iter().any(|&x| x < 0.0) {
        return Err(Error::Config("local evidence must be nonnegative".into()));
    }
    let q = graph.alphabet();
    let checks = graph.checks();

    let mut local = evidence.to_vec();
    for sec in local.chunks_exact_mut(q) {
        normalize_or_uniform(sec);
    }

    let mut next: Vec<[Vec<f64>; 3]> = Vec::with_capacity(checks.len());
    let mut spectra = [vec![0.0; q], vec![0.0; q], vec![0.0; q]];
    for (c, check) in checks.iter().enumerate() {
        for (slot, &s) in check.iter().enumerate() {
            let msg = &mut spectra[slot];
            msg.copy_from_slice(&local[s * q..(s + 1) * q]);
            for &(c2, k2) in graph.adjacency(s) {
                if c2 != c {
                    for (m, x) in msg.iter_mut().zip(&state.check_to_var[c2][k2]) {
                        *m *= x;
                    }
                }
            }
            normalize_or_uniform(msg);
            fwht_in_place(msg);
        }
        let mut out = [vec![0.0; q], vec![0.0; q], vec![0.0; q]];
        for (slot, o) in out.iter_mut().enumerate() {
            convolve_spectra(&spectra[(slot + 1) % 3], &spectra[(slot + 2) % 3], o);
        }
        next.push(out);
    }

    let mut extrinsic = vec![1.0; q * graph.sections()];
    for (s, belief) in extrinsic.chunks_exact_mut(q).enumerate() {
        for &(c, k) in graph.adjacency(s) {
            for (b, x) in belief.iter_mut().zip(&next[c][k]) {
                *b *= x;
            }
        }
        normalize_or_uniform(belief);
        clip_and_rescale(belief);
    }

    Ok(BeliefState {
        alphabet: q,
        check_to_var: next,
        extrinsic,
    })
}

/// Indices of the `count` largest entries, ties broken by lower index.
pub(crate) fn top_indices(x: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    let count = count.min(x.len());
    if count == 0 {
        return Vec::new();
    }
    let by_belief = |a: &usize, b: &usize| x[*b].total_cmp(&x[*a]).then(a.cmp(b));
    if count < idx.len() {
        idx.select_nth_unstable_by(count - 1, by_belief);
        idx.truncate(count);
    }
    idx.sort_by(by_belief);
    idx
}

fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// Likelihood score of a codeword: `Σ_ℓ ln belief_ℓ(symbol_ℓ)` with beliefs
/// floored at [`BELIEF_FLOOR`].
pub fn codeword_score(section_beliefs: &[f64], cw: &OuterCodeword, alphabet: usize) -> f64 {
    cw.symbols
        .iter()
        .enumerate()
        .map(|(l, &s)| section_beliefs[l * alphabet + s as usize].max(BELIEF_FLOOR).ln())
        .sum()
}

/// Options for [`list_decode`].
#[derive(Debug, Clone, PartialEq)]
pub struct ListDecodeOptions {
    /// Extra candidates beyond `round(k_hat)` taken from each root section.
    pub surplus: usize,
    /// Sections whose top entries seed clamped BP runs.
    pub roots: Vec<usize>,
}

impl Default for ListDecodeOptions {
    fn default() -> Self {
        ListDecodeOptions {
            surplus: 5,
            roots: vec![0],
        }
    }
}

/// Likelihood-ranked list decoding.
///
/// For each root section, takes its `round(k_hat) + surplus` highest-belief
/// symbols; for each, clamps the root to that symbol, runs BP until the
/// extrinsic beliefs settle (or [`LIST_DECODE_MAX_ROUNDS`]), and reads off the
/// per-section argmax of evidence times extrinsic belief. Valid codewords are
/// kept with their [`codeword_score`], sorted by descending score (ties by
/// symbol order) and deduplicated.
pub fn list_decode(
    section_beliefs: &[f64],
    k_hat: f64,
    options: &ListDecodeOptions,
    graph: &OuterFactorGraph,
) -> Result<Vec<(OuterCodeword, f64)>> {
    check_evidence(section_beliefs, graph)?;
    let q = graph.alphabet();
    let count = k_hat.max(0.0).round() as usize + options.surplus;
    if count == 0 {
        return Ok(Vec::new());
    }

    let mut evidence: Vec<f64> = section_beliefs.iter().map(|&x| x.max(0.0)).collect();
    for sec in evidence.chunks_exact_mut(q) {
        normalize_or_uniform(sec);
    }

    let mut found: Vec<(OuterCodeword, f64)> = Vec::new();
    for &root in &options.roots {
        if root >= graph.sections() {
            return Err(Error::InvalidGraph(format!("root section {root} out of range")));
        }
        let root_span = root * q..(root + 1) * q;
        for cand in top_indices(&section_beliefs[root_span.clone()], count) {
            let mut clamped = evidence.clone();
            clamped[root_span.clone()].iter_mut().for_each(|e| *e = 0.0);
            clamped[root * q + cand] = 1.0;

            let mut state = BeliefState::new(graph);
            for _ in 0..LIST_DECODE_MAX_ROUNDS {
                let next = bp_round(&state, &clamped, graph)?;
                let delta = next
                    .extrinsic
                    .iter()
                    .zip(&state.extrinsic)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                state = next;
                if delta < LIST_DECODE_TOLERANCE {
                    break;
                }
            }

            let mut posterior = vec![0.0; q];
            let symbols: Vec<u32> = (0..graph.sections())
                .map(|s| {
                    for (k, p) in posterior.iter_mut().enumerate() {
                        *p = clamped[s * q + k] * state.extrinsic[s * q + k];
                    }
                    argmax(&posterior) as u32
                })
                .collect();
            let cw = OuterCodeword { symbols };
            if graph.validate(&cw) {
                let score = codeword_score(section_beliefs, &cw, q);
                found.push((cw, score));
            }
        }
    }

    found.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut seen = std::collections::HashSet::new();
    found.retain(|(cw, _)| seen.insert(cw.clone()));
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outer_code::graph::symbols_to_bits;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn delta(q: usize, at: usize) -> Vec<f64> {
        let mut v = vec![0.0; q];
        v[at] = 1.0;
        v
    }

    fn brute_xor_conv(a: &[f64], b: &[f64]) -> Vec<f64> {
        let q = a.len();
        let mut out = vec![0.0; q];
        for i in 0..q {
            for j in 0..q {
                out[i ^ j] += a[i] * b[j];
            }
        }
        let s: f64 = out.iter().sum();
        out.iter().map(|x| x / s).collect()
    }

    #[test]
    fn point_masses_xor() {
        let m = check_to_var_message(&delta(8, 3), &delta(8, 5)).unwrap();
        for (i, x) in m.iter().enumerate() {
            let want = if i == 3 ^ 5 { 1.0 } else { 0.0 };
            assert!((x - want).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_absorbs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let m = check_to_var_message(&vec![1.0 / 16.0; 16], &mu).unwrap();
        assert!(m.iter().all(|x| (x - 1.0 / 16.0).abs() < 1e-12));
    }

    #[test]
    fn zero_inputs_rejected() {
        assert_eq!(check_to_var_message(&[0.0; 4], &[0.0; 4]), Err(Error::VacuousMessage));
        assert!(matches!(
            check_to_var_message(&[1.0; 4], &[1.0; 8]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn convolution_matches_brute_force_exhaustively() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for v in 1..=6 {
            let q = 1 << v;
            for _ in 0..20 {
                let a: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
                let b: Vec<f64> = (0..q).map(|_| rng.random::<f64>()).collect();
                let fast = check_to_var_message(&a, &b).unwrap();
                for (f, o) in fast.iter().zip(brute_xor_conv(&a, &b)) {
                    assert!((f - o).abs() <= 1e-9 * o.abs().max(1e-300), "v={v}: {f} vs {o}");
                }
            }
        }
    }

    #[test]
    fn no_checks_gives_uniform_extrinsics() {
        let g = OuterFactorGraph::uncoded(3, 2);
        let ev: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let st = bp_round(&BeliefState::new(&g), &ev, &g).unwrap();
        assert!(st.extrinsic().iter().all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn uniform_evidence_stays_uniform() {
        let g = OuterFactorGraph::build(8, 4, 3, None).unwrap();
        let st = bp_round(&BeliefState::new(&g), &vec![0.3; 64], &g).unwrap();
        assert!(st.extrinsic().iter().all(|x| (x - 0.125).abs() < 1e-12));
    }

    #[test]
    fn codeword_evidence_concentrates() {
        let g = OuterFactorGraph::build(4, 2, 3, None).unwrap();
        let cw = g.encode(&symbols_to_bits(&[6, 3], 3)).unwrap();
        let mut ev = vec![0.0; 32];
        for (l, &s) in cw.symbols.iter().enumerate() {
            ev[l * 8 + s as usize] = 1.0;
        }
        let st = bp_round(&BeliefState::new(&g), &ev, &g).unwrap();
        for (l, &s) in cw.symbols.iter().enumerate() {
            assert!(st.section(l)[s as usize] > 1.0 - 1e-9);
        }
    }

    #[test]
    fn rejects_non_finite_evidence() {
        let g = OuterFactorGraph::build(4, 2, 2, None).unwrap();
        let mut ev = vec![1.0; 16];
        ev[3] = f64::NAN;
        assert!(matches!(bp_round(&BeliefState::new(&g), &ev, &g), Err(Error::NonFinite(_))));
    }

    #[test]
    fn rounds_preserve_normalization() {
        let g = OuterFactorGraph::build(8, 4, 4, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ev: Vec<f64> = (0..128).map(|_| rng.random::<f64>().powi(4)).collect();
        let mut st = BeliefState::new(&g);
        for _ in 0..4 {
            st = bp_round(&st, &ev, &g).unwrap();
            for l in 0..8 {
                let sec = st.section(l);
                assert!((sec.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(sec.iter().all(|&x| x >= BELIEF_FLOOR * (1.0 - 1e-9) && x <= 1.0));
            }
        }
    }

    #[test]
    fn list_decode_single_indicator() {
        let g = OuterFactorGraph::build(8, 4, 5, None).unwrap();
        let cw = g.encode(&symbols_to_bits(&[1, 17, 30, 4], 5)).unwrap();
        let mut beliefs = vec![0.0; 8 * 32];
        for (l, &s) in cw.symbols.iter().enumerate() {
            beliefs[l * 32 + s as usize] = 1.0;
        }
        let opts = ListDecodeOptions { surplus: 0, roots: vec![0] };
        let out = list_decode(&beliefs, 1.0, &opts, &g).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, cw);
        assert!(out[0].1.abs() < 1e-12);
    }

    #[test]
    fn list_decode_zero_request_is_empty() {
        let g = OuterFactorGraph::build(8, 4, 5, None).unwrap();
        let opts = ListDecodeOptions { surplus: 0, roots: vec![0] };
        assert!(list_decode(&vec![1.0 / 32.0; 256], 0.0, &opts, &g).unwrap().is_empty());
    }

    #[test]
    fn list_decode_three_noisy_codewords() {
        let g = OuterFactorGraph::build(8, 4, 6, None).unwrap();
        let q = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sent = Vec::new();
        let mut beliefs: Vec<f64> = (0..8 * q).map(|_| 0.02 * rng.random::<f64>()).collect();
        while sent.len() < 3 {
            let payload: Vec<u8> = (0..24).map(|_| rng.random_range(0..2u8)).collect();
            let cw = g.encode(&payload).unwrap();
            if sent.iter().any(|c: &OuterCodeword| c.symbols[0] == cw.symbols[0]) {
                continue;
            }
            for (l, &s) in cw.symbols.iter().enumerate() {
                beliefs[l * q + s as usize] = 0.9 + 0.1 * rng.random::<f64>();
            }
            sent.push(cw);
        }
        let opts = ListDecodeOptions { surplus: 2, roots: vec![0] };
        let out = list_decode(&beliefs, 3.0, &opts, &g).unwrap();
        for cw in &sent {
            assert!(out.iter().any(|(c, _)| c == cw), "missing {cw:?}");
        }
        assert!(out.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn top_indices_ties_prefer_low_index() {
        assert_eq!(top_indices(&[0.5, 0.9, 0.5, 0.1], 3), vec![1, 0, 2]);
        assert_eq!(top_indices(&[0.5; 3], 5), vec![0, 1, 2]);
    }
}
