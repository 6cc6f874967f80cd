//! Wishart Gram matrices, entrywise absolute powers, and the centered and
//! scaled decompositions used on either side of the positivity transition.
//!
//! Symmetric matrices store the lower triangle packed row-major. Every
//! parallel construction assigns each output entry to exactly one task and
//! accumulates inside an entry with a fixed 8-lane block structure, so
//! results are bit-identical for any thread count.

use crate::ensembles::RectMatrix;
use crate::error::{Error, Result};
use crate::spectral;
use rayon::prelude::*;

/// Dense real symmetric matrix, lower triangle packed row-major:
/// entry `(i, j)` with `j <= i` lives at index `i (i + 1) / 2 + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    lower: Vec<f64>,
}

#[inline]
pub(crate) fn packed_len(m: usize) -> usize {
    m * (m + 1) / 2
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl SymmetricMatrix {
    pub fn from_lower(dim: usize, lower: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("matrix dimension must be >= 1".into()));
        }
        if lower.len() != packed_len(dim) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} packed entries for dim {dim}, got {}",
                packed_len(dim),
                lower.len()
            )));
        }
        if let Some(k) = lower.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("packed entry {k} is not finite")));
        }
        Ok(SymmetricMatrix { dim, lower })
    }

    /// Builds from a full row-major square slice; the strict upper triangle
    /// is ignored.
    pub fn from_full_lower(dim: usize, full: &[f64]) -> Result<Self> {
        let mut lower = Vec::with_capacity(packed_len(dim));
        for i in 0..dim {
            lower.extend_from_slice(&full[i * dim..i * dim + i + 1]);
        }
        Self::from_lower(dim, lower)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut lower = Vec::with_capacity(packed_len(dim));
        for i in 0..dim {
            for j in 0..=i {
                lower.push(f(i, j));
            }
        }
        Self::from_lower(dim, lower)
    }

    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix { dim, lower: vec![0.0; packed_len(dim)] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut a = Self::zeros(dim);
        for i in 0..dim {
            a.lower[row_start(i) + i] = 1.0;
        }
        a
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.lower[row_start(r) + c]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.lower[row_start(r) + c] = v;
    }

    pub fn packed(&self) -> &[f64] {
        &self.lower
    }

    /// Lower-triangle slice of row `i` (columns `0..=i`).
    #[inline]
    pub fn row_lower(&self, i: usize) -> &[f64] {
        &self.lower[row_start(i)..row_start(i) + i + 1]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.lower[row_start(i) + i]).sum()
    }

    /// Frobenius norm, counting both triangles.
    pub fn frobenius_norm(&self) -> f64 {
        let mut diag = 0.0;
        let mut off = 0.0;
        for i in 0..self.dim {
            let row = self.row_lower(i);
            for (j, &v) in row.iter().enumerate() {
                if j == i {
                    diag += v * v;
                } else {
                    off += v * v;
                }
            }
        }
        (diag + 2.0 * off).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.lower.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }

    /// Expands to a full row-major square buffer.
    pub fn to_full(&self) -> Vec<f64> {
        let m = self.dim;
        let mut full = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                let v = self.lower[row_start(i) + j];
                full[i * m + j] = v;
                full[j * m + i] = v;
            }
        }
        full
    }

    /// Plain-text dump: first line `symmetric <m>`, then the lower triangle
    /// one row per line, full round-trip precision.
    pub fn dump(&self) -> String {
        let mut out = format!("symmetric {}\n", self.dim);
        for i in 0..self.dim {
            let row: Vec<String> = self.row_lower(i).iter().map(|&v| crate::fmt_f64(v)).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidConfig("empty matrix dump".into()))?;
        let dim: usize = header
            .strip_prefix("symmetric ")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| Error::InvalidConfig(format!("bad dump header {header:?}")))?;
        let mut lower = Vec::with_capacity(packed_len(dim));
        for (i, line) in lines.take(dim).enumerate() {
            let vals: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse).collect();
            let vals = vals
                .map_err(|e| Error::InvalidConfig(format!("bad float on row {i}: {e}")))?;
            if vals.len() != i + 1 {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {}",
                    vals.len(),
                    i + 1
                )));
            }
            lower.extend_from_slice(&vals);
        }
        Self::from_lower(dim, lower)
    }
}

/// Dot product with a fixed 8-lane accumulation structure. The lane layout
/// does not depend on thread count, so results are reproducible while still
/// breaking the floating-point dependency chain.
#[inline]
pub(crate) fn dot8(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for k in 0..chunks {
        let (ca, cb) = (&a[k * 8..k * 8 + 8], &b[k * 8..k * 8 + 8]);
        for l in 0..8 {
            acc[l] += ca[l] * cb[l];
        }
    }
    for (l, (&xa, &xb)) in a[chunks * 8..].iter().zip(&b[chunks * 8..]).enumerate() {
        acc[l] += xa * xb;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// Splits a packed lower-triangle buffer into disjoint mutable chunks of
/// `rows_per_block` consecutive rows. The block structure is fixed, so
/// parallel writers are assigned deterministically.
pub(crate) fn split_packed_rows_mut(
    buf: &mut [f64],
    m: usize,
    rows_per_block: usize,
) -> Vec<(usize, &mut [f64])> {
    let mut blocks = Vec::new();
    let mut rest = buf;
    let mut row = 0;
    while row < m {
        let hi = (row + rows_per_block).min(m);
        let len = row_start(hi) - row_start(row);
        let (chunk, tail) = rest.split_at_mut(len);
        blocks.push((row, chunk));
        rest = tail;
        row = hi;
    }
    blocks
}

/// `A = X X^T / n`. Each Gram entry is one `dot8` of two rows of `X`;
/// entries are computed in parallel over fixed row blocks.
pub fn wishart(x: &RectMatrix, n: usize) -> Result<SymmetricMatrix> {
    if x.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "wishart normalizer n = {n} must equal the column count {}",
            x.cols()
        )));
    }
    let m = x.rows();
    let nf = n as f64;
    let mut lower = vec![0.0f64; packed_len(m)];
    let blocks = split_packed_rows_mut(&mut lower, m, 16);
    blocks.into_par_iter().for_each(|(row0, chunk)| {
        let mut at = 0;
        let hi = row0 + count_rows(chunk.len(), row0);
        for i in row0..hi {
            let ri = x.row(i);
            for j in 0..=i {
                chunk[at] = dot8(ri, x.row(j)) / nf;
                at += 1;
            }
        }
    });
    SymmetricMatrix::from_lower(m, lower)
}

fn count_rows(chunk_len: usize, row0: usize) -> usize {
    let mut rows = 0;
    let mut len = 0;
    while len < chunk_len {
        len += row0 + rows + 1;
        rows += 1;
    }
    rows
}

/// Entrywise `|a|^alpha` with the continuous extension `0^alpha := 0`.
pub fn hadamard_abs_power(a: &SymmetricMatrix, alpha: f64) -> Result<SymmetricMatrix> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    let m = a.dim();
    let mut lower = vec![0.0f64; a.packed().len()];
    let bad: Vec<usize> = lower
        .par_chunks_mut(4096)
        .zip(a.packed().par_chunks(4096))
        .enumerate()
        .filter_map(|(c, (out, inp))| {
            for (k, (o, &v)) in out.iter_mut().zip(inp).enumerate() {
                let w = v.abs().powf(alpha);
                if !w.is_finite() {
                    return Some(c * 4096 + k);
                }
                *o = w;
            }
            None
        })
        .collect();
    if let Some(&k) = bad.first() {
        let (i, j) = unpack_index(k);
        return Err(Error::NonFinite(format!(
            "|A[{i}][{j}]|^{alpha} overflowed (entry {})",
            a.packed()[k]
        )));
    }
    SymmetricMatrix::from_lower(m, lower)
}

fn unpack_index(k: usize) -> (usize, usize) {
    let mut i = 0;
    while row_start(i + 1) <= k {
        i += 1;
    }
    (i, k - row_start(i))
}

/// Scaling context for the centered decompositions: caches
/// `m = floor(n^s)` and `ell_alpha`.
#[derive(Debug, Clone, Copy)]
pub struct WishartContext {
    pub n: u64,
    pub s: f64,
    pub m: u64,
    pub alpha: f64,
    pub ell_alpha: f64,
}

impl WishartContext {
    pub fn new(n: u64, s: f64, alpha: f64) -> Result<Self> {
        let m = crate::ensembles::rows_for(n, s)?;
        let ell_alpha = spectral::ell_alpha(alpha)?;
        Ok(WishartContext { n, s, m, alpha, ell_alpha })
    }
}

/// Subcritical split `B -> (C, D, E)`:
/// `C = B * n^((alpha - s)/2)`, `D` diagonal with
/// `D_ii = C_ii - ell_alpha / n^(s/2)`, and
/// `E = C - D - (ell_alpha / n^(s/2)) J` with an exactly zero diagonal.
pub fn subcritical_split(
    b: &SymmetricMatrix,
    ctx: &WishartContext,
) -> Result<(SymmetricMatrix, SymmetricMatrix, SymmetricMatrix)> {
    let m = b.dim();
    if m as u64 != ctx.m {
        return Err(Error::DimensionMismatch(format!(
            "B has dim {m}, context expects {}",
            ctx.m
        )));
    }
    let nf = ctx.n as f64;
    let c_scale = nf.powf((ctx.alpha - ctx.s) / 2.0);
    let shift = ctx.ell_alpha / nf.powf(ctx.s / 2.0);

    let c = SymmetricMatrix::from_fn(m, |i, j| b.get(i, j) * c_scale)?;
    let d = SymmetricMatrix::from_fn(m, |i, j| if i == j { c.get(i, i) - shift } else { 0.0 })?;
    let e = SymmetricMatrix::from_fn(m, |i, j| if i == j { 0.0 } else { c.get(i, j) - shift })?;
    Ok((c, d, e))
}

/// Supercritical centering: zero diagonal, off-diagonal
/// `B_ij - ell_alpha / n^(alpha/2)`. Equals the subcritical `E` rescaled by
/// `n^((s - alpha)/2)` off the diagonal.
pub fn supercritical_center(b: &SymmetricMatrix, ctx: &WishartContext) -> Result<SymmetricMatrix> {
    let m = b.dim();
    if m as u64 != ctx.m {
        return Err(Error::DimensionMismatch(format!(
            "B has dim {m}, context expects {}",
            ctx.m
        )));
    }
    let shift = ctx.ell_alpha / (ctx.n as f64).powf(ctx.alpha / 2.0);
    SymmetricMatrix::from_fn(m, |i, j| if i == j { 0.0 } else { b.get(i, j) - shift })
}

/// The deterministic counterexample matrix with entries `1 + eps * i * j`
/// (1-based indices): the all-ones matrix plus `eps v v^T` with
/// `v = (1, ..., n)`, hence PSD of rank at most 2.
pub fn horn_fitzgerald_matrix(n: usize, eps: f64) -> Result<SymmetricMatrix> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("need n >= 2, got {n}")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    SymmetricMatrix::from_fn(n, |i, j| 1.0 + eps * ((i + 1) * (j + 1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_matrix, EntryLaw, SeedSpec};

    fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn wishart_hand_examples() {
        // 1x1: X = [x], n = 1 -> [x^2]
        let x = RectMatrix::from_rows(1, 1, vec![3.0]).unwrap();
        assert_eq!(wishart(&x, 1).unwrap().get(0, 0), 9.0);

        // identity: X = I2, n = 2 -> I2 / 2
        let x = RectMatrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let a = wishart(&x, 2).unwrap();
        assert_eq!(a.get(0, 0), 0.5);
        assert_eq!(a.get(1, 1), 0.5);
        assert_eq!(a.get(0, 1), 0.0);

        // hand dot products
        let x = RectMatrix::from_rows(2, 3, vec![1.0, 2.0, 3.0, 0.0, 1.0, 1.0]).unwrap();
        let a = wishart(&x, 3).unwrap();
        assert!(approx_eq(a.get(0, 0), 14.0 / 3.0, 1e-15));
        assert!(approx_eq(a.get(0, 1), 5.0 / 3.0, 1e-15));
        assert!(approx_eq(a.get(1, 1), 2.0 / 3.0, 1e-15));

        assert!(wishart(&x, 4).is_err());
    }

    #[test]
    fn wishart_matches_sequential_reference() {
        let law = EntryLaw::gaussian();
        let x = sample_matrix(37, 61, &law, &SeedSpec::new(9, 0)).unwrap();
        let a = wishart(&x, 61).unwrap();
        for i in 0..37 {
            for j in 0..=i {
                let want = dot8(x.row(i), x.row(j)) / 61.0;
                assert_eq!(a.get(i, j), want);
            }
        }
    }

    #[test]
    fn hadamard_power_examples() {
        let a = SymmetricMatrix::from_fn(2, |i, j| if i == j { 4.0 } else { 2.0 }).unwrap();
        let p1 = hadamard_abs_power(&a, 1.0).unwrap();
        assert_eq!(p1, a);
        let p2 = hadamard_abs_power(&a, 2.0).unwrap();
        assert_eq!(p2.get(0, 0), 16.0);
        assert_eq!(p2.get(0, 1), 4.0);

        let b = SymmetricMatrix::from_fn(2, |i, j| if i == j { 4.0 } else { -1.0 }).unwrap();
        let h = hadamard_abs_power(&b, 0.5).unwrap();
        assert_eq!(h.get(0, 0), 2.0);
        assert_eq!(h.get(0, 1), 1.0);
        assert_eq!(h.get(1, 1), 2.0);

        // 0^alpha := 0
        let z = SymmetricMatrix::zeros(3);
        assert_eq!(hadamard_abs_power(&z, 0.7).unwrap(), z);

        assert!(hadamard_abs_power(&a, 0.0).is_err());
        let huge = SymmetricMatrix::from_fn(2, |_, _| 1e300).unwrap();
        assert!(matches!(hadamard_abs_power(&huge, 2.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn subcritical_split_reconstructs() {
        // direct-substitution example at n = 4, s = 1, alpha = 0.5, on a
        // hand-sized 2x2 matrix (context fields set directly)
        let ctx = WishartContext {
            n: 4,
            s: 1.0,
            m: 2,
            alpha: 0.5,
            ell_alpha: crate::spectral::ell_alpha(0.5).unwrap(),
        };
        let b = SymmetricMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { 0.25 }).unwrap();
        let (c, d, e) = subcritical_split(&b, &ctx).unwrap();

        // C = B / sqrt(2) at n = 4, s = 1, alpha = 0.5
        let inv_sqrt2 = 4f64.powf(-0.25);
        assert!(approx_eq(c.get(0, 1), 0.25 * inv_sqrt2, 1e-16));

        // E has an exactly zero diagonal and the direct-substitution entry
        assert_eq!(e.get(0, 0), 0.0);
        assert_eq!(e.get(1, 1), 0.0);
        let shift = ctx.ell_alpha / 2.0; // n^(s/2) = 2
        assert!(approx_eq(e.get(0, 1), 0.25 * inv_sqrt2 - shift, 1e-16));

        // reconstruction C = E + D + shift * J, to ulp scale
        let ulp_scale = 8.0 * f64::EPSILON * c.max_abs();
        for i in 0..2 {
            for j in 0..=i {
                let jj = shift;
                let back = e.get(i, j) + d.get(i, j) + jj;
                assert!(approx_eq(back, c.get(i, j), ulp_scale));
            }
        }
    }

    #[test]
    fn supercritical_center_examples() {
        let ctx = WishartContext::new(4, 1.0, 1.0).unwrap();
        let shift = ctx.ell_alpha / 2.0; // n^(alpha/2) = 2
        let b = SymmetricMatrix::from_fn(4, |i, j| {
            if i == j {
                1.0
            } else if (i, j) == (1, 0) {
                0.9
            } else {
                shift
            }
        })
        .unwrap();
        let c = supercritical_center(&b, &ctx).unwrap();
        for i in 0..4 {
            assert_eq!(c.get(i, i), 0.0);
        }
        assert!(approx_eq(c.get(0, 1), 0.9 - shift, 1e-16));
        assert_eq!(c.get(0, 2), 0.0); // centering kills entries equal to the shift
    }

    #[test]
    fn supercritical_equals_rescaled_subcritical_e() {
        let law = EntryLaw::gaussian();
        let ctx = WishartContext::new(64, 0.8, 0.6).unwrap();
        let x = sample_matrix(ctx.m as usize, 64, &law, &SeedSpec::new(11, 0)).unwrap();
        let a = wishart(&x, 64).unwrap();
        let b = hadamard_abs_power(&a, ctx.alpha).unwrap();
        let (_, _, e) = subcritical_split(&b, &ctx).unwrap();
        let c = supercritical_center(&b, &ctx).unwrap();
        let rescale = (ctx.n as f64).powf((ctx.s - ctx.alpha) / 2.0);
        for i in 0..b.dim() {
            for j in 0..i {
                let want = e.get(i, j) * rescale;
                let got = c.get(i, j);
                let denom = want.abs().max(1e-300);
                assert!(
                    ((got - want) / denom).abs() <= 1e-12,
                    "({i},{j}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn horn_fitzgerald_examples() {
        let a = horn_fitzgerald_matrix(2, 1.0).unwrap();
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.get(1, 1), 5.0);

        let b = horn_fitzgerald_matrix(3, 0.5).unwrap();
        let want = [[1.5, 2.0, 2.5], [2.0, 3.0, 4.0], [2.5, 4.0, 5.5]];
        for (i, row) in want.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                assert_eq!(b.get(i, j), w);
            }
        }

        assert!(horn_fitzgerald_matrix(1, 0.5).is_err());
        assert!(horn_fitzgerald_matrix(3, 0.0).is_err());
    }

    #[test]
    fn dump_round_trips() {
        let law = EntryLaw::gaussian();
        let x = sample_matrix(5, 9, &law, &SeedSpec::new(3, 2)).unwrap();
        let a = wishart(&x, 9).unwrap();
        let text = a.dump();
        assert!(text.starts_with("symmetric 5\n"));
        let back = SymmetricMatrix::parse_dump(&text).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn packed_block_splitter_covers_buffer() {
        let m = 23;
        let mut buf = vec![0.0; packed_len(m)];
        let blocks = split_packed_rows_mut(&mut buf, m, 4);
        let total: usize = blocks.iter().map(|(_, c)| c.len()).sum();
        assert_eq!(total, packed_len(m));
        assert_eq!(blocks[0].0, 0);
        assert_eq!(blocks[1].0, 4);
    }
}
