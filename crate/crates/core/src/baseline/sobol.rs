//! Sobol low-discrepancy sequence with Joe–Kuo direction numbers.

use crate::baseline::joe_kuo::{DIRECTIONS, MAX_DIM};
use crate::error::{arg, Result};

const BITS: usize = 32;

/// Generator for the unscrambled Sobol sequence in `[0, 1)^dim`.
///
/// Point `i` is the Gray-code XOR of direction numbers, so any index can be
/// produced directly.
#[derive(Debug, Clone)]
pub struct Sobol {
    dim: usize,
    /// `v[j][k]`: direction number `k` of dimension `j`, left-aligned in 32 bits.
    v: Vec<[u32; BITS]>,
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return arg(format!("Sobol dimension must be in 1..={MAX_DIM}, got {dim}"));
        }
        let v = DIRECTIONS[..dim]
            .iter()
            .map(|&(s, a, m)| {
                let s = s as usize;
                let mut v = [0u32; BITS];
                if s == 0 {
                    for (k, vk) in v.iter_mut().enumerate() {
                        *vk = 1 << (BITS - 1 - k);
                    }
                    return v;
                }
                for k in 0..s.min(BITS) {
                    v[k] = m[k] << (BITS - 1 - k);
                }
                for k in s..BITS {
                    let mut x = v[k - s] ^ (v[k - s] >> s);
                    for i in 1..s {
                        if (a >> (s - 1 - i)) & 1 == 1 {
                            x ^= v[k - i];
                        }
                    }
                    v[k] = x;
                }
                v
            })
            .collect();
        Ok(Self { dim, v })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes point `index` (0 is the origin) into `out`.
    pub fn point(&self, index: u32, out: &mut [f64]) {
        let gray = index ^ (index >> 1);
        for (o, v) in out.iter_mut().zip(&self.v) {
            let mut x = 0u32;
            let mut g = gray;
            let mut k = 0;
            while g != 0 {
                if g & 1 == 1 {
                    x ^= v[k];
                }
                g >>= 1;
                k += 1;
            }
            *o = x as f64 / 4_294_967_296.0;
        }
    }
}

/// Points `start .. start + n` of the `d`-dimensional sequence.
pub fn sobol_points(d: usize, n: usize, start: u32) -> Result<Vec<Vec<f64>>> {
    let s = Sobol::new(d)?;
    let end = start as u64 + n as u64;
    if end > u32::MAX as u64 + 1 {
        return arg("Sobol index range exceeds 2^32");
    }
    Ok((0..n)
        .map(|i| {
            let mut p = vec![0.0; d];
            s.point(start + i as u32, &mut p);
            p
        })
        .collect())
}
