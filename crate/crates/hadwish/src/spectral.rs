//! Scalar analytics: absolute Gaussian moments, the bivariate covariance
//! functional `I(rho)`, conditional expectations over row pairs, empirical
//! spectral distributions and their moments, Kolmogorov-Smirnov distance,
//! and trace-moment / closed-walk oracles.

use crate::eigensolve::Spectrum;
use crate::error::{Error, Result};
use crate::matrixops::SymmetricMatrix;
use rayon::prelude::*;
use std::sync::OnceLock;

/// `ell_alpha = E|Z|^alpha` for a standard normal `Z`, in closed form
/// `2^(alpha/2) Gamma((alpha+1)/2) / Gamma(1/2)`.
pub fn ell_alpha(alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(1.0);
    }
    Ok(2f64.powf(alpha / 2.0) * lanczos_gamma((alpha + 1.0) / 2.0) / std::f64::consts::PI.sqrt())
}

/// Lanczos approximation with g = 7 and 9 coefficients; accurate to about
/// 1e-13 relative for arguments >= 0.5, which is all this crate needs.
fn lanczos_gamma(z: f64) -> f64 {
    debug_assert!(z >= 0.5);
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let z = z - 1.0;
    let mut x = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * x
}

// ---------------------------------------------------------------------------
// bivariate functional I(rho)
// ---------------------------------------------------------------------------

/// Nodes per axis of the fixed tensor rule behind [`bivariate_i`].
pub const BIVARIATE_NODES: usize = 240;
/// The integration variable is `u` with `x = u^2`; `u <= UMAX` covers
/// `x <= 16`, far past where the Gaussian weight times `x^4` matters.
const UMAX: f64 = 4.0;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0f64;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = -p1 / dp;
            x += dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x.abs(); // enforce exact symmetry of the rule
        nodes[n - 1 - i] = x.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn gl_table() -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    TABLE.get_or_init(|| gauss_legendre(BIVARIATE_NODES))
}

/// `I(rho) = E[(|X|^alpha - ell_alpha)(|Y|^alpha - ell_alpha)]` for a
/// standard bivariate normal with correlation `rho`.
///
/// Evaluated by a fixed tensor quadrature folded onto the positive quadrant:
/// summing the density over the four sign choices turns the integrand into
/// an explicitly even function of `rho` (so `I(rho) = I(-rho)` holds
/// exactly), and the substitution `x = u^2` removes the kink of `|x|^alpha`
/// at the origin, restoring fast convergence for fractional `alpha`.
pub fn bivariate_i(rho: f64, alpha: f64) -> Result<f64> {
    if rho.abs() >= 1.0 || !rho.is_finite() {
        return Err(Error::InvalidConfig(format!("|rho| must be < 1, got {rho}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    let (nodes, weights) = gl_table();
    Ok(bivariate_i_on_rule(rho, alpha, nodes, weights))
}

/// Same functional on a freshly built `n`-node rule; used to verify that the
/// fixed rule is stable under node-count doubling.
pub fn bivariate_i_with_nodes(rho: f64, alpha: f64, n: usize) -> Result<f64> {
    if rho.abs() >= 1.0 || !rho.is_finite() {
        return Err(Error::InvalidConfig(format!("|rho| must be < 1, got {rho}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    let (nodes, weights) = gauss_legendre(n);
    Ok(bivariate_i_on_rule(rho, alpha, &nodes, &weights))
}

fn bivariate_i_on_rule(rho: f64, alpha: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let ell = ell_alpha(alpha).expect("alpha validated by caller");
    let n = nodes.len();
    let mut x = vec![0.0f64; n];
    let mut g = vec![0.0f64; n];
    for i in 0..n {
        let u = 0.5 * UMAX * (nodes[i] + 1.0);
        let wu = 0.5 * UMAX * weights[i];
        x[i] = u * u;
        g[i] = (x[i].powf(alpha) - ell) * 2.0 * u * wu;
    }
    let one_m = 1.0 - rho * rho;
    let a = 1.0 / (2.0 * one_m);
    // the four quadrants fold to twice the cosh pair of exponentials
    let c = 1.0 / (std::f64::consts::PI * one_m.sqrt());
    let mut total = 0.0f64;
    for i in 0..n {
        let xi = x[i];
        let gi = g[i];
        let mut row = 0.0f64;
        // diagonal term once, off-diagonal pairs twice (the kernel is
        // symmetric in (i, j)); fixed summation order
        for j in 0..i {
            let q = xi * xi + x[j] * x[j];
            let p = 2.0 * rho * xi * x[j];
            let kern = (-a * (q - p)).exp() + (-a * (q + p)).exp();
            row += g[j] * kern;
        }
        let q = 2.0 * xi * xi;
        let p = 2.0 * rho * xi * xi;
        let kern_diag = (-a * (q - p)).exp() + (-a * (q + p)).exp();
        total += gi * (2.0 * row + gi * kern_diag);
    }
    c * total
}

// ---------------------------------------------------------------------------
// conditional expectation over a fixed row pair
// ---------------------------------------------------------------------------

/// A fixed pair of rows of `X` together with the scalars that determine the
/// conditional law of the bridged inner products: `sigma = |R| / sqrt(n)`
/// and the correlation `rho = <R_i, R_j> / (|R_i| |R_j|)`.
#[derive(Debug, Clone)]
pub struct RowPair {
    pub r_i: Vec<f64>,
    pub r_j: Vec<f64>,
    pub sigma_i: f64,
    pub sigma_j: f64,
    pub rho_ij: f64,
}

impl RowPair {
    pub fn from_rows(r_i: &[f64], r_j: &[f64]) -> Result<Self> {
        if r_i.is_empty() || r_i.len() != r_j.len() {
            return Err(Error::DimensionMismatch(format!(
                "row lengths {} and {} must match and be positive",
                r_i.len(),
                r_j.len()
            )));
        }
        let n = r_i.len() as f64;
        let ni = crate::matrixops::dot8(r_i, r_i).sqrt();
        let nj = crate::matrixops::dot8(r_j, r_j).sqrt();
        if ni == 0.0 || nj == 0.0 {
            return Err(Error::InvalidConfig("rows must be nonzero".into()));
        }
        let rho = crate::matrixops::dot8(r_i, r_j) / (ni * nj);
        if rho.abs() >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "rows are collinear (rho = {rho})"
            )));
        }
        Ok(RowPair {
            r_i: r_i.to_vec(),
            r_j: r_j.to_vec(),
            sigma_i: ni / n.sqrt(),
            sigma_j: nj / n.sqrt(),
            rho_ij: rho,
        })
    }
}

/// Conditional expectation of the product of centered `alpha`-powers of the
/// two inner products bridged by a fresh Gaussian middle row:
/// `sigma_i^alpha sigma_j^alpha I(rho_ij) + ell^2 (sigma_i^alpha - 1)(sigma_j^alpha - 1)`.
pub fn conditional_y(pair: &RowPair, alpha: f64) -> Result<f64> {
    let ell = ell_alpha(alpha)?;
    let i_val = bivariate_i(pair.rho_ij, alpha)?;
    let si = pair.sigma_i.powf(alpha);
    let sj = pair.sigma_j.powf(alpha);
    Ok(si * sj * i_val + ell * ell * (si - 1.0) * (sj - 1.0))
}

// ---------------------------------------------------------------------------
// empirical spectral distributions
// ---------------------------------------------------------------------------

/// Eigenvalues of one matrix, or pooled across trials of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EsdSample {
    eigenvalues: Vec<f64>,
    pub m: usize,
    pub trials: u32,
}

impl EsdSample {
    /// Builds a sample directly from eigenvalues (sorted on entry).
    pub fn from_values(mut values: Vec<f64>, m: usize, trials: u32) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidConfig("sample must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample contains a non-finite value".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(EsdSample { eigenvalues: values, m, trials })
    }

    pub fn values(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Right-continuous empirical CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.eigenvalues.partition_point(|&v| v <= x);
        k as f64 / self.eigenvalues.len() as f64
    }

    /// CSV with a single `eigenvalue` column, full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eigenvalue\n");
        for &v in &self.eigenvalues {
            out.push_str(&crate::fmt_f64(v));
            out.push('\n');
        }
        out
    }
}

/// The empirical spectral distribution of one solved matrix.
pub fn esd(spectrum: &Spectrum) -> EsdSample {
    EsdSample {
        eigenvalues: spectrum.eigenvalues().to_vec(),
        m: spectrum.dim,
        trials: 1,
    }
}

/// Pools per-trial distributions; the pooled sample approximates the
/// expected empirical spectral distribution of the ensemble.
pub fn pool(samples: &[EsdSample]) -> Result<EsdSample> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidConfig("cannot pool zero samples".into()))?;
    if samples.iter().any(|s| s.m != first.m) {
        return Err(Error::DimensionMismatch(
            "pooled samples must share the matrix dimension".into(),
        ));
    }
    let mut eigenvalues = Vec::with_capacity(samples.iter().map(|s| s.eigenvalues.len()).sum());
    for s in samples {
        eigenvalues.extend_from_slice(&s.eigenvalues);
    }
    eigenvalues.sort_by(f64::total_cmp);
    Ok(EsdSample {
        eigenvalues,
        m: first.m,
        trials: samples.iter().map(|s| s.trials).sum(),
    })
}

/// k-th raw moment of the sample.
pub fn esd_moment(sample: &EsdSample, k: u32) -> f64 {
    let total = sample.eigenvalues.len() as f64;
    sample.eigenvalues.iter().map(|&v| v.powi(k as i32)).sum::<f64>() / total
}

/// Limits forced by the moment computation for the centered subcritical
/// matrix: mean `0`, variance `ell_{2 alpha} - ell_alpha^2`, and twice its
/// square for the two surviving closed-walk classes of the fourth moment.
pub fn moment_targets(alpha: f64) -> Result<(f64, f64, f64)> {
    let ell = ell_alpha(alpha)?;
    let ell2 = ell_alpha(2.0 * alpha)?;
    let m2 = ell2 - ell * ell;
    Ok((0.0, m2, 2.0 * m2 * m2))
}

/// Exact Kolmogorov-Smirnov distance between two empirical CDFs: the sup is
/// attained at the merged jump points.
pub fn ks_distance(a: &EsdSample, b: &EsdSample) -> f64 {
    let (xa, xb) = (&a.eigenvalues, &b.eigenvalues);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let mut ia = 0;
    let mut ib = 0;
    let mut sup = 0.0f64;
    while ia < xa.len() || ib < xb.len() {
        let v = match (xa.get(ia), xb.get(ib)) {
            (Some(&va), Some(&vb)) => va.min(vb),
            (Some(&va), None) => va,
            (None, Some(&vb)) => vb,
            (None, None) => break,
        };
        while ia < xa.len() && xa[ia] <= v {
            ia += 1;
        }
        while ib < xb.len() && xb[ib] <= v {
            ib += 1;
        }
        sup = sup.max((ia as f64 / na - ib as f64 / nb).abs());
    }
    sup
}

// ---------------------------------------------------------------------------
// trace moments and the closed-walk oracle
// ---------------------------------------------------------------------------

/// `Tr(C^{2k})` through the symmetric square `G = C^2` and `k - 2` further
/// multiplies; the last power is contracted as a Frobenius inner product.
pub fn trace_moment(c: &SymmetricMatrix, k: u32) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    let m = c.dim();
    if k == 1 {
        // Tr(C^2) is the squared Frobenius norm
        let f = c.frobenius_norm();
        return Ok(f * f);
    }
    let full = c.to_full();
    let g = full_mul(&full, &full, m);
    check_finite(&g, "C^2")?;
    let mut p = g.clone();
    for step in 2..k {
        p = full_mul(&p, &g, m);
        check_finite(&p, &format!("C^{}", 2 * step))?;
    }
    let total: f64 = p.iter().zip(&g).map(|(&a, &b)| a * b).sum();
    if !total.is_finite() {
        return Err(Error::NonFinite(format!("Tr(C^{}) overflowed", 2 * k)));
    }
    Ok(total)
}

fn check_finite(buf: &[f64], what: &str) -> Result<()> {
    if buf.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} overflowed")));
    }
    Ok(())
}

/// Row-major full multiply `A * B`, parallel over output rows with a fixed
/// inner accumulation order.
fn full_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; m * m];
    out.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        let ar = &a[i * m..(i + 1) * m];
        for (kk, &aik) in ar.iter().enumerate() {
            let br = &b[kk * m..(kk + 1) * m];
            for (o, &bv) in row.iter_mut().zip(br) {
                *o += aik * bv;
            }
        }
    });
    out
}

/// Brute-force expansion of `Tr(C^{2k})` as a sum over closed walks of
/// length `2k` on the loop-free complete graph. Guarded to tiny sizes; this
/// is the independent oracle for [`trace_moment`].
pub fn walk_trace_oracle(c: &SymmetricMatrix, k: u32) -> Result<f64> {
    let m = c.dim();
    if m > 8 || !(1..=3).contains(&k) {
        return Err(Error::InvalidConfig(format!(
            "walk oracle guard: need m <= 8 and 1 <= k <= 3, got m = {m}, k = {k}"
        )));
    }
    for i in 0..m {
        if c.get(i, i) != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "walk oracle requires an exactly zero diagonal; entry ({i}, {i}) = {}",
                c.get(i, i)
            )));
        }
    }
    let len = 2 * k as usize;
    let mut total = 0.0f64;
    for start in 0..m {
        total += walk_sum(c, m, start, start, len, 1.0);
    }
    Ok(total)
}

fn walk_sum(c: &SymmetricMatrix, m: usize, start: usize, cur: usize, left: usize, prod: f64) -> f64 {
    if left == 1 {
        return if cur == start { 0.0 } else { prod * c.get(cur, start) };
    }
    let mut acc = 0.0;
    for next in 0..m {
        if next != cur {
            acc += walk_sum(c, m, start, next, left - 1, prod * c.get(cur, next));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::eigen_spectrum;
    use crate::ensembles::{derive_stream, SeedSpec};
    use rand_core::RngCore;

    const ELL_HALF: f64 = 0.8221789586624586; // E|Z|^(1/2), quadrature value
    const ELL_ONE: f64 = 0.7978845608028654; // sqrt(2/pi)

    #[test]
    fn ell_alpha_examples() {
        assert_eq!(ell_alpha(0.0).unwrap(), 1.0);
        assert!((ell_alpha(2.0).unwrap() - 1.0).abs() < 1e-13);
        assert!((ell_alpha(1.0).unwrap() - ELL_ONE).abs() < 1e-13);
        assert!((ell_alpha(4.0).unwrap() - 3.0).abs() < 1e-12);
        assert!((ell_alpha(0.5).unwrap() - ELL_HALF).abs() < 1e-13);
        assert!(ell_alpha(-0.1).is_err());
    }

    #[test]
    fn lanczos_gamma_reference_points() {
        let cases = [
            (0.5, std::f64::consts::PI.sqrt()),
            (1.0, 1.0),
            (1.5, 0.5 * std::f64::consts::PI.sqrt()),
            (5.0, 24.0),
            (10.5, 1_133_278.388_948_904_7),
        ];
        for (z, want) in cases {
            let got = lanczos_gamma(z);
            assert!((got - want).abs() <= 1e-12 * want, "gamma({z}) = {got}");
        }
    }

    #[test]
    fn gauss_legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // degree-22 monomial is integrated exactly by a 12-point rule
        let got: f64 = x.iter().zip(&w).map(|(&t, &wt)| wt * t.powi(22)).sum();
        assert!((got - 2.0 / 23.0).abs() < 1e-14);
        let odd: f64 = x.iter().zip(&w).map(|(&t, &wt)| wt * t.powi(7)).sum();
        assert!(odd.abs() < 1e-15);
    }

    #[test]
    fn bivariate_i_anchors() {
        // I(0) = 0 and exact evenness
        for alpha in [0.5, 1.0, 1.7, 2.0] {
            assert!(bivariate_i(0.0, alpha).unwrap().abs() <= 1e-12, "alpha {alpha}");
            for rho in [0.1, 0.5, 0.9] {
                let plus = bivariate_i(rho, alpha).unwrap();
                let minus = bivariate_i(-rho, alpha).unwrap();
                assert!((plus - minus).abs() <= 1e-12);
            }
        }
        // alpha = 2 reduces to 2 rho^2 (Isserlis)
        for rho in [0.2, 0.7] {
            let got = bivariate_i(rho, 2.0).unwrap();
            assert!((got - 2.0 * rho * rho).abs() <= 1e-8, "I({rho}, 2) = {got}");
        }
        // alpha = 4 reduces to 72 rho^2 + 24 rho^4
        for rho in [0.3, 0.8] {
            let got = bivariate_i(rho, 4.0).unwrap();
            let want = 72.0 * rho * rho + 24.0 * rho.powi(4);
            assert!((got - want).abs() <= 1e-8 * want, "I({rho}, 4) = {got}");
        }
        assert!(bivariate_i(1.0, 1.0).is_err());
        assert!(bivariate_i(-1.2, 1.0).is_err());
        assert!(bivariate_i(0.5, 0.0).is_err());
    }

    #[test]
    fn bivariate_i_frozen_reference_values() {
        // frozen from an independent high-precision double integral
        let cases = [
            (0.3, 0.5, 0.007738044607589),
            (0.8, 0.5, 0.063282506167787),
            (0.3, 1.7, 0.106883913709465),
            (0.8, 1.7, 0.763724498739341),
        ];
        for (rho, alpha, want) in cases {
            let got = bivariate_i(rho, alpha).unwrap();
            assert!(
                (got - want).abs() <= 1e-12,
                "I({rho}, {alpha}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn bivariate_i_stable_under_node_doubling() {
        for alpha in [0.5, 1.0, 1.5, 4.0] {
            for rho in [0.3, 0.8, 0.99] {
                let fixed = bivariate_i(rho, alpha).unwrap();
                let doubled = bivariate_i_with_nodes(rho, alpha, 2 * BIVARIATE_NODES).unwrap();
                assert!(
                    (fixed - doubled).abs() <= 1e-8,
                    "alpha {alpha}, rho {rho}: {fixed} vs {doubled}"
                );
            }
        }
    }

    #[test]
    fn bivariate_i_ratio_bounded_and_stable() {
        // |I(rho)| / rho^2 stays bounded on [-0.99, 0.99] and its grid max
        // moves by less than 1e-6 under node doubling
        for alpha in [0.5, 1.0, 1.5] {
            let mut max_fixed = 0.0f64;
            let mut max_doubled = 0.0f64;
            let mut rho: f64 = -0.99;
            while rho <= 0.99 {
                if rho.abs() > 1e-9 {
                    let r2 = rho * rho;
                    max_fixed = max_fixed.max(bivariate_i(rho, alpha).unwrap().abs() / r2);
                    max_doubled = max_doubled
                        .max(bivariate_i_with_nodes(rho, alpha, 480).unwrap().abs() / r2);
                }
                rho += 0.06;
            }
            assert!(max_fixed.is_finite());
            assert!(
                (max_fixed - max_doubled).abs() <= 1e-6,
                "alpha {alpha}: {max_fixed} vs {max_doubled}"
            );
        }
    }

    #[test]
    fn conditional_y_closed_cases() {
        // sigma = 1, rho = 0: both summands vanish
        let n = 16;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        a[0] = (n as f64).sqrt();
        b[1] = (n as f64).sqrt();
        let pair = RowPair::from_rows(&a, &b).unwrap();
        assert_eq!(pair.rho_ij, 0.0);
        assert!((pair.sigma_i - 1.0).abs() < 1e-15);
        assert!(conditional_y(&pair, 0.8).unwrap().abs() <= 1e-12);

        // sigma = 1, rho = 0.5, alpha = 2 -> I(0.5, 2) = 0.5
        let mut c = vec![0.0; n];
        c[0] = 0.5 * (n as f64).sqrt();
        c[1] = (0.75f64).sqrt() * (n as f64).sqrt();
        let pair = RowPair::from_rows(&a, &c).unwrap();
        assert!((pair.rho_ij - 0.5).abs() < 1e-15);
        let y = conditional_y(&pair, 2.0).unwrap();
        assert!((y - 0.5).abs() <= 1e-8, "Y = {y}");
    }

    #[test]
    fn conditional_y_matches_monte_carlo() {
        // scaled-down version of the acceptance check: fresh Gaussian middle
        // row, 3e4 samples, 5 standard errors
        let n = 300;
        let seed = SeedSpec::new(77, 0);
        let x = crate::ensembles::sample_matrix(2, n, &crate::ensembles::EntryLaw::gaussian(), &seed)
            .unwrap();
        let pair = RowPair::from_rows(x.row(0), x.row(1)).unwrap();
        let alpha = 0.7;
        let ell = ell_alpha(alpha).unwrap();
        let closed = conditional_y(&pair, alpha).unwrap();

        let mut rng = derive_stream(&SeedSpec::new(78, 0));
        let mut draw = || {
            crate::ensembles::normal_quantile(((rng.next_u64() >> 11) as f64 + 0.5) / 9007199254740992.0)
        };
        let samples = 30_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let sqrt_n = (n as f64).sqrt();
        let mut mid = vec![0.0f64; n];
        for _ in 0..samples {
            for v in mid.iter_mut() {
                *v = draw();
            }
            let di = crate::matrixops::dot8(&pair.r_i, &mid) / sqrt_n;
            let dj = crate::matrixops::dot8(&mid, &pair.r_j) / sqrt_n;
            let term = (di.abs().powf(alpha) - ell) * (dj.abs().powf(alpha) - ell);
            sum += term;
            sumsq += term * term;
        }
        let mean = sum / samples as f64;
        let var = (sumsq / samples as f64 - mean * mean).max(0.0);
        let se = (var / samples as f64).sqrt();
        assert!(
            (closed - mean).abs() <= 5.0 * se,
            "closed {closed} vs MC {mean} +- {se}"
        );
    }

    #[test]
    fn esd_and_pool_examples() {
        let spec = |vals: &[f64]| {
            let a = SymmetricMatrix::from_fn(vals.len(), |i, j| if i == j { vals[i] } else { 0.0 })
                .unwrap();
            eigen_spectrum(&a).unwrap()
        };
        let s = esd(&spec(&[1.0, 2.0, 3.0]));
        assert!((s.cdf(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.cdf(0.5), 0.0);
        assert_eq!(s.cdf(3.0), 1.0);

        let pooled = pool(&[s.clone(), s.clone()]).unwrap();
        assert_eq!(pooled.trials, 2);
        assert!((pooled.cdf(2.0) - s.cdf(2.0)).abs() < 1e-15);

        // pooled moments = average of per-trial moments
        let t1 = esd(&spec(&[0.0, 1.0]));
        let t2 = esd(&spec(&[2.0, 5.0]));
        let p = pool(&[t1.clone(), t2.clone()]).unwrap();
        for k in 1..=4 {
            let avg = 0.5 * (esd_moment(&t1, k) + esd_moment(&t2, k));
            assert!((esd_moment(&p, k) - avg).abs() <= 1e-12);
        }

        assert!(pool(&[]).is_err());
    }

    #[test]
    fn esd_csv_has_eigenvalue_column() {
        let s = EsdSample::from_values(vec![0.5, -0.25], 2, 1).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("eigenvalue"));
        let parsed: Vec<f64> = lines.map(|l| l.parse().unwrap()).collect();
        assert_eq!(parsed, vec![-0.25, 0.5]);
    }

    #[test]
    fn esd_moment_examples() {
        let ones = EsdSample { eigenvalues: vec![1.0, 1.0, 1.0], m: 3, trials: 1 };
        assert_eq!(esd_moment(&ones, 3), 1.0);
        let pm = EsdSample { eigenvalues: vec![-1.0, 1.0], m: 2, trials: 1 };
        assert_eq!(esd_moment(&pm, 2), 1.0);
    }

    #[test]
    fn esd_moment_matches_trace_of_power() {
        let mut rng = derive_stream(&SeedSpec::new(31, 0));
        let mut draw = || {
            crate::ensembles::normal_quantile(((rng.next_u64() >> 11) as f64 + 0.5) / 9007199254740992.0)
        };
        let a = SymmetricMatrix::from_fn(5, |_, _| draw()).unwrap();
        let s = eigen_spectrum(&a).unwrap();
        let sample = esd(&s);
        // direct 4th matrix power oracle
        let full = a.to_full();
        let a2 = full_mul(&full, &full, 5);
        let a4 = full_mul(&a2, &a2, 5);
        let trace4: f64 = (0..5).map(|i| a4[i * 5 + i]).sum();
        let lhs = esd_moment(&sample, 4) * 5.0;
        assert!((lhs - trace4).abs() <= 1e-10 * trace4.abs());
    }

    #[test]
    fn moment_target_examples() {
        let (m1, m2, m4) = moment_targets(1.0).unwrap();
        assert_eq!(m1, 0.0);
        assert!((m2 - (1.0 - 2.0 / std::f64::consts::PI)).abs() < 1e-13);
        assert!((m4 - 2.0 * m2 * m2).abs() < 1e-15);
        let (_, m2, _) = moment_targets(2.0).unwrap();
        assert!((m2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ks_distance_examples() {
        let s = |v: &[f64]| EsdSample { eigenvalues: v.to_vec(), m: v.len(), trials: 1 };
        assert_eq!(ks_distance(&s(&[1.0, 2.0, 5.0]), &s(&[1.0, 2.0, 5.0])), 0.0);
        assert_eq!(ks_distance(&s(&[0.0]), &s(&[1.0])), 1.0);
        assert_eq!(ks_distance(&s(&[1.0, 2.0]), &s(&[1.0, 3.0])), 0.5);
    }

    #[test]
    fn trace_moment_examples() {
        let z = SymmetricMatrix::zeros(3);
        assert_eq!(trace_moment(&z, 1).unwrap(), 0.0);
        assert_eq!(trace_moment(&z, 3).unwrap(), 0.0);

        let c = 0.7;
        let flip = SymmetricMatrix::from_fn(2, |i, j| if i != j { c } else { 0.0 }).unwrap();
        assert!((trace_moment(&flip, 1).unwrap() - 2.0 * c * c).abs() < 1e-15);

        // spectral oracle on a random diag-zero 4x4
        let mut rng = derive_stream(&SeedSpec::new(32, 0));
        let mut draw = || {
            crate::ensembles::normal_quantile(((rng.next_u64() >> 11) as f64 + 0.5) / 9007199254740992.0)
        };
        let c4 = SymmetricMatrix::from_fn(4, |i, j| if i == j { 0.0 } else { draw() }).unwrap();
        let s = eigen_spectrum(&c4).unwrap();
        let want: f64 = s.eigenvalues().iter().map(|&l| l.powi(4)).sum();
        let got = trace_moment(&c4, 2).unwrap();
        assert!((got - want).abs() <= 1e-9 * want.abs(), "{got} vs {want}");
    }

    #[test]
    fn walk_oracle_examples() {
        let c = 0.4;
        let m2 = SymmetricMatrix::from_fn(2, |i, j| if i != j { c } else { 0.0 }).unwrap();
        assert!((walk_trace_oracle(&m2, 1).unwrap() - 2.0 * c * c).abs() < 1e-15);

        let m3 = SymmetricMatrix::from_fn(3, |i, j| if i != j { (i + j) as f64 } else { 0.0 })
            .unwrap();
        let want = 2.0
            * (m3.get(0, 1).powi(2) + m3.get(0, 2).powi(2) + m3.get(1, 2).powi(2));
        assert!((walk_trace_oracle(&m3, 1).unwrap() - want).abs() < 1e-12);

        let mut rng = derive_stream(&SeedSpec::new(33, 0));
        let mut draw = || {
            crate::ensembles::normal_quantile(((rng.next_u64() >> 11) as f64 + 0.5) / 9007199254740992.0)
        };
        let c4 = SymmetricMatrix::from_fn(4, |i, j| if i == j { 0.0 } else { draw() }).unwrap();
        let walk = walk_trace_oracle(&c4, 2).unwrap();
        let trace = trace_moment(&c4, 2).unwrap();
        assert!((walk - trace).abs() <= 1e-10 * trace.abs().max(1.0));

        // guards
        let big = SymmetricMatrix::zeros(9);
        assert!(walk_trace_oracle(&big, 1).is_err());
        assert!(walk_trace_oracle(&m2, 4).is_err());
        let dirty = SymmetricMatrix::identity(3);
        assert!(walk_trace_oracle(&dirty, 1).is_err());
    }
}
