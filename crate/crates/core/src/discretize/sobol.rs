//! Sobol sequence from a direction-number table in the standard
//! `d s a m_1 ... m_s` layout, with digital-shift scrambling.

use std::sync::OnceLock;

use super::{CandidateSet, DiscretizerConfig};
use crate::error::{Error, Result};
use crate::rng::RngStream;

const BITS: usize = 32;
const BUNDLED: &str = include_str!("../../data/sobol_direction_numbers.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
struct Primitive {
    s: u32,
    a: u32,
    m: Vec<u32>,
}

/// Parsed direction-number table. Dimension 1 is implicit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SobolTable {
    rows: Vec<Primitive>,
}

impl SobolTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('d') {
                continue;
            }
            let bad = |reason: &str| Error::SobolTable {
                line: lineno + 1,
                reason: reason.into(),
            };
            let nums: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| bad("non-integer field")))
                .collect::<Result<_>>()?;
            if nums.len() < 3 {
                return Err(bad("expected `d s a m_1 ... m_s`"));
            }
            let (d, s, a) = (nums[0] as usize, nums[1], nums[2]);
            if d != rows.len() + 2 {
                return Err(bad("dimensions must be consecutive starting at 2"));
            }
            if s == 0 || s as usize >= BITS || nums.len() != 3 + s as usize {
                return Err(bad("degree does not match the number of m values"));
            }
            let m = nums[3..].to_vec();
            for (k, mk) in m.iter().enumerate() {
                if mk % 2 == 0 || *mk >= 1 << (k + 1) {
                    return Err(bad("m_k must be odd and below 2^k"));
                }
            }
            rows.push(Primitive { s, a, m });
        }
        Ok(Self { rows })
    }

    /// The table shipped with the crate (64 dimensions).
    pub fn bundled() -> &'static SobolTable {
        static TABLE: OnceLock<SobolTable> = OnceLock::new();
        TABLE.get_or_init(|| SobolTable::parse(BUNDLED).expect("bundled Sobol table is valid"))
    }

    pub fn max_dim(&self) -> usize {
        self.rows.len() + 1
    }

    fn directions(&self, dim: usize) -> Result<Vec<[u32; BITS]>> {
        if dim == 0 || dim > self.max_dim() {
            return Err(Error::SobolDimension {
                dim,
                max: self.max_dim(),
            });
        }
        let mut out = Vec::with_capacity(dim);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - k);
        }
        out.push(first);
        for row in &self.rows[..dim - 1] {
            let s = row.s as usize;
            let mut v = [0u32; BITS];
            for k in 0..BITS {
                v[k] = if k < s {
                    row.m[k] << (BITS - 1 - k)
                } else {
                    let mut x = v[k - s] ^ (v[k - s] >> s);
                    for i in 1..s {
                        if (row.a >> (s - 1 - i)) & 1 == 1 {
                            x ^= v[k - i];
                        }
                    }
                    x
                };
            }
            out.push(v);
        }
        Ok(out)
    }
}

/// Gray-code Sobol generator. The all-zeros first point is skipped.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    shift: Vec<u32>,
    index: u32,
}

impl SobolSequence {
    pub fn new(table: &SobolTable, dim: usize) -> Result<Self> {
        let directions = table.directions(dim)?;
        Ok(Self {
            directions,
            state: vec![0; dim],
            shift: vec![0; dim],
            index: 0,
        })
    }

    /// Digital shift: XOR every coordinate with a random 32-bit key.
    pub fn scrambled(table: &SobolTable, dim: usize, rng: &mut RngStream) -> Result<Self> {
        let mut seq = Self::new(table, dim)?;
        seq.shift = (0..dim).map(|_| rng.next_u32()).collect();
        Ok(seq)
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let c = self.index.trailing_ones() as usize;
        self.index = self.index.wrapping_add(1);
        for (s, dirs) in self.state.iter_mut().zip(&self.directions) {
            *s ^= dirs[c.min(BITS - 1)];
        }
        self.state
            .iter()
            .zip(&self.shift)
            .map(|(s, k)| (s ^ k) as f64 / 4_294_967_296.0)
            .collect()
    }
}

pub fn sobol_candidates(
    cfg: &DiscretizerConfig,
    dim: usize,
    rng: &mut RngStream,
) -> Result<CandidateSet> {
    let mut seq = SobolSequence::scrambled(SobolTable::bundled(), dim, rng)?;
    Ok((0..cfg.n_candidates).map(|_| seq.next_point()).collect())
}
