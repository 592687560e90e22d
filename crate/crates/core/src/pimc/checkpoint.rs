//! Plain-text checkpointing with bit-exact resume.
//!
//! Floats are serialized as the hex of their IEEE-754 bits, so a resumed
//! run reproduces the uninterrupted one byte for byte. The RNG state is the
//! (seed, stream, word position) triple of the counter-based ChaCha
//! generator.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Full mid-run state of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub chain: u64,
    /// Completed sweeps, counting annealing and burn-in.
    pub ticks: u64,
    pub n_sites: usize,
    pub slices: usize,
    pub seed: u64,
    pub word_pos: u128,
    pub accepted_frac_sum: f64,
    pub spins: Vec<i8>,
    pub nn_series: Vec<f64>,
    pub energy_series: Vec<f64>,
}

const HEADER: &str = "quanneal pimc checkpoint v1";

/// Serialize to the plain structured text format.
pub fn write_checkpoint(cp: &Checkpoint) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "chain {}", cp.chain);
    let _ = writeln!(out, "ticks {}", cp.ticks);
    let _ = writeln!(out, "n_sites {}", cp.n_sites);
    let _ = writeln!(out, "slices {}", cp.slices);
    let _ = writeln!(out, "seed {}", cp.seed);
    let _ = writeln!(out, "word_pos {}", cp.word_pos);
    let _ = writeln!(out, "accepted_frac_sum {:016x}", cp.accepted_frac_sum.to_bits());
    let spins: String = cp
        .spins
        .iter()
        .map(|&s| if s > 0 { '+' } else { '-' })
        .collect();
    let _ = writeln!(out, "spins {spins}");
    for (name, series) in [("nn_corr", &cp.nn_series), ("energy", &cp.energy_series)] {
        let _ = writeln!(out, "series {name} {}", series.len());
        for v in series {
            let _ = writeln!(out, "{:016x}", v.to_bits());
        }
    }
    let _ = writeln!(out, "end");
    out
}

/// Parse the checkpoint format, rejecting anything malformed.
pub fn read_checkpoint(text: &str) -> Result<Checkpoint> {
    let mut lines = text.lines();
    let bad = |msg: &str| Error::invalid(format!("checkpoint: {msg}"));
    if lines.next() != Some(HEADER) {
        return Err(bad("missing header"));
    }
    let mut cp = Checkpoint {
        chain: 0,
        ticks: 0,
        n_sites: 0,
        slices: 0,
        seed: 0,
        word_pos: 0,
        accepted_frac_sum: 0.0,
        spins: Vec::new(),
        nn_series: Vec::new(),
        energy_series: Vec::new(),
    };
    let mut saw_end = false;
    while let Some(line) = lines.next() {
        let mut parts = line.split_whitespace();
        let key = parts.next().ok_or_else(|| bad("blank line"))?;
        match key {
            "chain" => cp.chain = parse(parts.next(), "chain")?,
            "ticks" => cp.ticks = parse(parts.next(), "ticks")?,
            "n_sites" => cp.n_sites = parse(parts.next(), "n_sites")?,
            "slices" => cp.slices = parse(parts.next(), "slices")?,
            "seed" => cp.seed = parse(parts.next(), "seed")?,
            "word_pos" => cp.word_pos = parse(parts.next(), "word_pos")?,
            "accepted_frac_sum" => {
                let bits = u64::from_str_radix(
                    parts.next().ok_or_else(|| bad("accepted_frac_sum"))?,
                    16,
                )
                .map_err(|_| bad("accepted_frac_sum hex"))?;
                cp.accepted_frac_sum = f64::from_bits(bits);
            }
            "spins" => {
                let s = parts.next().ok_or_else(|| bad("spins"))?;
                cp.spins = s
                    .chars()
                    .map(|c| match c {
                        '+' => Ok(1i8),
                        '-' => Ok(-1i8),
                        _ => Err(bad("spin char")),
                    })
                    .collect::<Result<_>>()?;
            }
            "series" => {
                let name = parts.next().ok_or_else(|| bad("series name"))?.to_string();
                let count: usize = parse(parts.next(), "series count")?;
                let mut series = Vec::with_capacity(count);
                for _ in 0..count {
                    let l = lines.next().ok_or_else(|| bad("series truncated"))?;
                    let bits =
                        u64::from_str_radix(l.trim(), 16).map_err(|_| bad("series hex"))?;
                    series.push(f64::from_bits(bits));
                }
                match name.as_str() {
                    "nn_corr" => cp.nn_series = series,
                    "energy" => cp.energy_series = series,
                    _ => return Err(bad("unknown series")),
                }
            }
            "end" => {
                saw_end = true;
                break;
            }
            _ => return Err(bad(&format!("unknown key {key}"))),
        }
    }
    if !saw_end {
        return Err(bad("missing end marker"));
    }
    if cp.spins.len() != cp.n_sites * cp.slices {
        return Err(bad("spin count does not match lattice shape"));
    }
    Ok(cp)
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, name: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::invalid(format!("checkpoint: bad {name}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let cp = Checkpoint {
            chain: 3,
            ticks: 777,
            n_sites: 2,
            slices: 3,
            seed: 99,
            word_pos: 123456789012345678901234567890u128,
            accepted_frac_sum: 0.1 + 0.2, // not representable cleanly in decimal
            spins: vec![1, -1, -1, 1, 1, -1],
            nn_series: vec![0.1, -0.3333333333333333, f64::MIN_POSITIVE],
            energy_series: vec![-4.25],
        };
        let text = write_checkpoint(&cp);
        let back = read_checkpoint(&text).unwrap();
        assert_eq!(cp, back);
    }

    #[test]
    fn malformed_rejected() {
        assert!(read_checkpoint("nope").is_err());
        let cp = Checkpoint {
            chain: 0,
            ticks: 0,
            n_sites: 2,
            slices: 2,
            seed: 0,
            word_pos: 0,
            accepted_frac_sum: 0.0,
            spins: vec![1, 1, 1, 1],
            nn_series: vec![],
            energy_series: vec![],
        };
        let text = write_checkpoint(&cp);
        assert!(read_checkpoint(&text.replace("end\n", "")).is_err());
        assert!(read_checkpoint(&text.replace("spins ++++", "spins ++x+")).is_err());
    }
}
