//! Dense symmetric eigensolver and PSD certificates.
//!
//! The solver is the classic two-stage dense path: Householder reduction to
//! tridiagonal form followed by the implicit-shift QL iteration (EISPACK
//! lineage). Large matrices run a values-only reduction on the packed lower
//! triangle; small matrices (`m <= 256`) additionally accumulate the
//! orthogonal factor so every eigenpair residual can be checked against the
//! original matrix. Extremal eigenvalues use Sturm-sequence bisection on the
//! tridiagonal form, which is what the phase-scan experiments call in their
//! hot loop.
//!
//! Everything here is sequential per matrix and allocation-local, so
//! distinct matrices can be solved concurrently from different threads.

use crate::error::{Error, Result};
use crate::matrixops::SymmetricMatrix;
use serde::{Deserialize, Serialize};

/// Dimension cutoff for the eigenvector-accumulating path.
const VECTOR_PATH_MAX: usize = 256;

/// QL sweep budget, in total sweeps, is `QL_SWEEPS_PER_DIM * m`.
const QL_SWEEPS_PER_DIM: usize = 30;

/// Sorted eigenvalues plus solve-quality metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    /// Max over checked eigenpairs of `|A v - lambda v| / |A|_F`. All pairs
    /// are checked on the small-matrix path; the extremal pairs (via inverse
    /// iteration on the reduced form) on the large-matrix path.
    pub max_residual: f64,
    pub dim: usize,
}

impl Spectrum {
    fn new(mut eigenvalues: Vec<f64>, max_residual: f64) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let dim = eigenvalues.len();
        Spectrum { eigenvalues, max_residual, dim }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.dim - 1]
    }
}

/// Outcome of a PSD check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PsdVerdict {
    CertifiedPsd { method: CertificateMethod, margin: f64 },
    CertifiedNotPsd { lambda_min: f64 },
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    Gershgorin,
    Spectral,
}

impl PsdVerdict {
    pub fn is_psd(&self) -> bool {
        matches!(self, PsdVerdict::CertifiedPsd { .. })
    }
}

/// PSD decision threshold: an explicit value, or the scale-aware default
/// `1e-10 * |A|_F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ToleranceRepr", into = "ToleranceRepr")]
pub enum Tolerance {
    Auto,
    Value(f64),
}

impl Tolerance {
    pub fn resolve(&self, a: &SymmetricMatrix) -> f64 {
        match *self {
            Tolerance::Auto => 1e-10 * a.frobenius_norm(),
            Tolerance::Value(t) => t,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ToleranceRepr {
    Num(f64),
    Word(String),
}

impl TryFrom<ToleranceRepr> for Tolerance {
    type Error = Error;
    fn try_from(r: ToleranceRepr) -> Result<Self> {
        match r {
            ToleranceRepr::Num(t) if t >= 0.0 && t.is_finite() => Ok(Tolerance::Value(t)),
            ToleranceRepr::Num(t) => {
                Err(Error::InvalidConfig(format!("tolerance must be >= 0, got {t}")))
            }
            ToleranceRepr::Word(w) if w == "auto" => Ok(Tolerance::Auto),
            ToleranceRepr::Word(w) => {
                Err(Error::InvalidConfig(format!("tolerance must be a number or \"auto\", got {w:?}")))
            }
        }
    }
}

impl From<Tolerance> for ToleranceRepr {
    fn from(t: Tolerance) -> ToleranceRepr {
        match t {
            Tolerance::Auto => ToleranceRepr::Word("auto".into()),
            Tolerance::Value(v) => ToleranceRepr::Num(v),
        }
    }
}

impl std::str::FromStr for Tolerance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Tolerance::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("tolerance must be a number or \"auto\", got {s:?}")))?;
        Tolerance::try_from(ToleranceRepr::Num(v))
    }
}

/// Tridiagonal form: diagonal `d` and subdiagonal `e` (`e[k] = T[k+1][k]`).
struct Tridiagonal {
    d: Vec<f64>,
    e: Vec<f64>,
}

/// Householder reduction of a packed lower triangle to tridiagonal form,
/// values only. Consumes the packed buffer as workspace.
fn tridiagonalize_packed(ap: &mut [f64], m: usize) -> Tridiagonal {
    let mut e = vec![0.0f64; m.saturating_sub(1)];
    let mut p = vec![0.0f64; m];
    let mut w = vec![0.0f64; m];
    for i in (1..m).rev() {
        let (head, tail) = ap.split_at_mut(i * (i + 1) / 2);
        let rowi = &mut tail[..i + 1];
        if i == 1 {
            e[0] = rowi[0];
            break;
        }
        let scale: f64 = rowi[..i].iter().map(|x| x.abs()).sum();
        if scale == 0.0 {
            e[i - 1] = 0.0;
            continue;
        }
        let inv_scale = 1.0 / scale;
        let mut h = 0.0;
        for v in rowi[..i].iter_mut() {
            *v *= inv_scale;
            h += *v * *v;
        }
        let f = rowi[i - 1];
        let g = if f > 0.0 { -h.sqrt() } else { h.sqrt() };
        e[i - 1] = scale * g;
        h -= f * g;
        rowi[i - 1] = f - g;
        let v = &rowi[..i];

        // p = (leading block) * v / h, single pass over the packed block
        let p = &mut p[..i];
        p.fill(0.0);
        let mut off = 0;
        for r in 0..i {
            let row = &head[off..off + r + 1];
            let vr = v[r];
            let mut sum = row[r] * vr;
            for ((pc, &rc), &vc) in p[..r].iter_mut().zip(&row[..r]).zip(&v[..r]) {
                sum += rc * vc;
                *pc += rc * vr;
            }
            p[r] += sum;
            off += r + 1;
        }
        let inv_h = 1.0 / h;
        for x in p.iter_mut() {
            *x *= inv_h;
        }
        let vp: f64 = v.iter().zip(p.iter()).map(|(&a, &b)| a * b).sum();
        let k = vp / (2.0 * h);
        let w = &mut w[..i];
        for ((wk, &pk), &vk) in w.iter_mut().zip(p.iter()).zip(v) {
            *wk = pk - k * vk;
        }

        // rank-2 update of the leading block: B -= v w^T + w v^T
        let mut off = 0;
        for r in 0..i {
            let row = &mut head[off..off + r + 1];
            let (vr, wr) = (v[r], w[r]);
            for ((ac, &wc), &vc) in row.iter_mut().zip(&w[..r + 1]).zip(&v[..r + 1]) {
                *ac -= vr * wc + wr * vc;
            }
            off += r + 1;
        }
    }
    let d: Vec<f64> = (0..m).map(|i| ap[i * (i + 1) / 2 + i]).collect();
    Tridiagonal { d, e }
}

/// Implicit-shift QL iteration, eigenvalues only. `d`/`e` follow the
/// `Tridiagonal` convention; on success `d` holds the unsorted eigenvalues.
fn ql_values(d: &mut [f64], sub: &[f64], fingerprint: &str) -> Result<()> {
    let m = d.len();
    if m <= 1 {
        return Ok(());
    }
    // working copy with the EISPACK sentinel e[m-1] = 0
    let mut e = vec![0.0f64; m];
    e[..m - 1].copy_from_slice(sub);

    let eps = f64::EPSILON;
    let cap = QL_SWEEPS_PER_DIM * m;
    let mut sweeps = 0usize;
    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    for l in 0..m {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        loop {
            let mut mm = l;
            while mm < m - 1 {
                if e[mm].abs() <= eps * tst1 {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            sweeps += 1;
            if sweeps > cap {
                return Err(Error::SolverFailure(format!(
                    "QL exceeded {cap} sweeps on {fingerprint}"
                )));
            }
            // Wilkinson-style implicit shift
            let g = d[l];
            let mut pp = (d[l + 1] - g) / (2.0 * e[l]);
            let mut r = pp.hypot(1.0);
            if pp < 0.0 {
                r = -r;
            }
            d[l] = e[l] / (pp + r);
            d[l + 1] = e[l] * (pp + r);
            let dl1 = d[l + 1];
            let mut h = g - d[l];
            for di in d[l + 2..m].iter_mut() {
                *di -= h;
            }
            f += h;

            pp = d[mm];
            let mut c = 1.0f64;
            let mut c2 = c;
            let mut c3 = c;
            let el1 = e[l + 1];
            let mut s = 0.0f64;
            let mut s2 = 0.0f64;
            for i in (l..mm).rev() {
                c3 = c2;
                c2 = c;
                s2 = s;
                let g = c * e[i];
                h = c * pp;
                r = pp.hypot(e[i]);
                e[i + 1] = s * r;
                s = e[i] / r;
                c = pp / r;
                pp = c * d[i] - s * g;
                d[i + 1] = h + s * (c * g + s * d[i]);
            }
            pp = -s * s2 * c3 * el1 * e[l] / dl1;
            e[l] = s * pp;
            d[l] = c * pp;
            if e[l].abs() <= eps * tst1 {
                break;
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn fingerprint(a: &SymmetricMatrix) -> String {
    format!("symmetric dim {}, |A|_F = {:.6e}", a.dim(), a.frobenius_norm())
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`
/// (Sturm count through the safeguarded LDL^T recursion).
fn count_below(t: &Tridiagonal, x: f64) -> usize {
    const PIVOT_FLOOR: f64 = 1e-300;
    let m = t.d.len();
    let mut count = 0usize;
    let mut prev = 1.0f64;
    for k in 0..m {
        let mut pivot = t.d[k] - x;
        if k > 0 {
            pivot -= t.e[k - 1] * t.e[k - 1] / prev;
        }
        // a vanishing pivot is perturbed to the negative side so it is
        // counted; the perturbation is far below eigenvalue resolution
        if pivot.abs() < PIVOT_FLOOR {
            pivot = -PIVOT_FLOOR;
        }
        if pivot < 0.0 {
            count += 1;
        }
        prev = pivot;
    }
    count
}

/// k-th smallest eigenvalue (0-indexed) of the tridiagonal form, by
/// bisection on the Gershgorin enclosure. The matrix is normalized to unit
/// magnitude first so the pivot recursion stays clear of underflow and
/// overflow at extreme input scales.
fn bisect_kth(t: &Tridiagonal, k: usize) -> f64 {
    let m = t.d.len();
    let mag = t
        .d
        .iter()
        .chain(t.e.iter())
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    if mag == 0.0 {
        return 0.0;
    }
    let inv = 1.0 / mag;
    let scaled = Tridiagonal {
        d: t.d.iter().map(|&v| v * inv).collect(),
        e: t.e.iter().map(|&v| v * inv).collect(),
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { scaled.e[i - 1].abs() } else { 0.0 }
            + if i < m - 1 { scaled.e[i].abs() } else { 0.0 };
        lo = lo.min(scaled.d[i] - r);
        hi = hi.max(scaled.d[i] + r);
    }
    let span = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 2.0 * f64::EPSILON * span {
            break;
        }
        if count_below(&scaled, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi) * mag
}

/// Solves `(T - shift I) x = b` by tridiagonal LU with partial pivoting.
/// Pivoting fills in a second superdiagonal.
fn shifted_tridiag_solve(t: &Tridiagonal, shift: f64, b: &[f64]) -> Vec<f64> {
    let m = t.d.len();
    let mut diag: Vec<f64> = t.d.iter().map(|&v| v - shift).collect();
    let mut sup1 = vec![0.0f64; m];
    let mut sup2 = vec![0.0f64; m];
    sup1[..m - 1].copy_from_slice(&t.e);
    let mut x = b.to_vec();
    for k in 0..m - 1 {
        let sub = t.e[k];
        if sub.abs() <= diag[k].abs() {
            if diag[k] == 0.0 {
                diag[k] = f64::MIN_POSITIVE;
            }
            // sub == 0 whenever diag[k] was zero, so f stays finite
            let f = sub / diag[k];
            diag[k + 1] -= f * sup1[k];
            x[k + 1] -= f * x[k];
        } else {
            // swap rows k and k+1; pivot on the subdiagonal entry
            let f = diag[k] / sub;
            let old_diag_next = diag[k + 1];
            let old_sup = sup1[k];
            diag[k] = sub;
            sup1[k] = old_diag_next;
            sup2[k] = if k + 2 < m { sup1[k + 1] } else { 0.0 };
            diag[k + 1] = old_sup - f * sup1[k];
            sup1[k + 1] = -f * sup2[k];
            x.swap(k, k + 1);
            x[k + 1] -= f * x[k];
        }
    }
    if diag[m - 1] == 0.0 {
        diag[m - 1] = f64::MIN_POSITIVE;
    }
    for k in (0..m).rev() {
        let mut v = x[k];
        if k + 1 < m {
            v -= sup1[k] * x[k + 1];
        }
        if k + 2 < m {
            v -= sup2[k] * x[k + 2];
        }
        x[k] = v / diag[k];
    }
    x
}

/// Residual `|T w - lambda w|` of the eigenvector estimated by two rounds of
/// inverse iteration. The solve shift is nudged off the eigenvalue so the
/// factorization pivots stay representable; the residual is still measured
/// at `lambda` itself.
fn tridiag_eig_residual(t: &Tridiagonal, lambda: f64) -> f64 {
    let m = t.d.len();
    let tnorm = t
        .d
        .iter()
        .chain(t.e.iter())
        .fold(0.0f64, |a, &b| a.max(b.abs()))
        .max(f64::MIN_POSITIVE);
    let solve_shift = lambda + 1e-14 * tnorm;
    let norm = |v: &[f64]| v.iter().map(|&x| x * x).sum::<f64>().sqrt();
    let mut w = vec![1.0 / (m as f64).sqrt(); m];
    for _ in 0..2 {
        w = shifted_tridiag_solve(t, solve_shift, &w);
        let n = norm(&w);
        for x in w.iter_mut() {
            *x /= n;
        }
    }
    let mut res = 0.0f64;
    for k in 0..m {
        let mut tv = t.d[k] * w[k];
        if k > 0 {
            tv += t.e[k - 1] * w[k - 1];
        }
        if k + 1 < m {
            tv += t.e[k] * w[k + 1];
        }
        res += (tv - lambda * w[k]) * (tv - lambda * w[k]);
    }
    res.sqrt()
}

/// Full spectrum of a dense symmetric matrix.
///
/// Residual metadata: every eigenpair is checked against the original matrix
/// when `m <= 256`; otherwise the two extremal pairs are spot-checked on the
/// tridiagonal form (equivalent up to the orthogonal reduction).
pub fn eigen_spectrum(a: &SymmetricMatrix) -> Result<Spectrum> {
    let m = a.dim();
    if m <= VECTOR_PATH_MAX {
        let (values, vectors) = eigen_with_vectors(a)?;
        let residual = max_pair_residual(a, &values, &vectors);
        return Ok(Spectrum::new(values, residual));
    }
    let mut packed = a.packed().to_vec();
    let t = tridiagonalize_packed(&mut packed, m);
    drop(packed);
    let mut d = t.d.clone();
    ql_values(&mut d, &t.e, &fingerprint(a))?;
    d.sort_by(f64::total_cmp);
    let fro = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let res_lo = tridiag_eig_residual(&t, d[0]);
    let res_hi = tridiag_eig_residual(&t, d[m - 1]);
    Ok(Spectrum::new(d, res_lo.max(res_hi) / fro))
}

/// Smallest eigenvalue via Sturm bisection on the tridiagonal form.
pub fn lambda_min(a: &SymmetricMatrix) -> Result<f64> {
    Ok(lambda_extremes(a)?.0)
}

/// Smallest and largest eigenvalues from one reduction.
pub fn lambda_extremes(a: &SymmetricMatrix) -> Result<(f64, f64)> {
    let m = a.dim();
    let mut packed = a.packed().to_vec();
    let t = tridiagonalize_packed(&mut packed, m);
    drop(packed);
    Ok((bisect_kth(&t, 0), bisect_kth(&t, m - 1)))
}

/// Gershgorin intervals `(center_i, radius_i)`: center is the diagonal
/// entry, radius the absolute off-diagonal row sum. Every eigenvalue lies in
/// the union of the intervals.
pub fn gershgorin_intervals(a: &SymmetricMatrix) -> Vec<(f64, f64)> {
    let m = a.dim();
    let mut radius = vec![0.0f64; m];
    let mut center = vec![0.0f64; m];
    for i in 0..m {
        let row = a.row_lower(i);
        for (j, &v) in row.iter().enumerate() {
            if j == i {
                center[i] = v;
            } else {
                radius[i] += v.abs();
                radius[j] += v.abs();
            }
        }
    }
    center.into_iter().zip(radius).collect()
}

/// PSD certificate: Gershgorin first (no eigensolve), spectral fallback.
pub fn psd_certificate(a: &SymmetricMatrix, tol: Tolerance) -> Result<PsdVerdict> {
    let tol = tol.resolve(a);
    if tol < 0.0 {
        return Err(Error::InvalidConfig(format!("tolerance must be >= 0, got {tol}")));
    }
    if let Some(margin) = gershgorin_psd_margin(a, tol) {
        return Ok(PsdVerdict::CertifiedPsd { method: CertificateMethod::Gershgorin, margin });
    }
    let lo = lambda_min(a)?;
    if lo >= -tol {
        Ok(PsdVerdict::CertifiedPsd { method: CertificateMethod::Spectral, margin: lo + tol })
    } else {
        Ok(PsdVerdict::CertifiedNotPsd { lambda_min: lo })
    }
}

/// `min_i (center_i - radius_i) + tol` when that is non-negative.
pub fn gershgorin_psd_margin(a: &SymmetricMatrix, tol: f64) -> Option<f64> {
    let worst = gershgorin_intervals(a)
        .into_iter()
        .map(|(c, r)| c - r)
        .fold(f64::INFINITY, f64::min);
    let margin = worst + tol;
    (margin >= 0.0).then_some(margin)
}

// ---------------------------------------------------------------------------
// small-matrix path with eigenvectors (EISPACK tred2/tql2 lineage)
// ---------------------------------------------------------------------------

/// Eigenvalues and eigenvectors; column `k` of the returned matrix (row-major
/// `m x m`) is the eigenvector of `values[k]`. Ascending order.
pub fn eigen_with_vectors(a: &SymmetricMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = a.dim();
    let mut v = a.to_full();
    let mut d = vec![0.0f64; m];
    let mut e = vec![0.0f64; m];
    tred2(&mut v, &mut d, &mut e, m);
    tql2(&mut v, &mut d, &mut e, m, &fingerprint(a))?;
    Ok((d, v))
}

fn max_pair_residual(a: &SymmetricMatrix, values: &[f64], vectors: &[f64]) -> f64 {
    let m = a.dim();
    let fro = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let full = a.to_full();
    let mut worst = 0.0f64;
    for k in 0..m {
        let mut res = 0.0;
        for i in 0..m {
            let mut av = 0.0;
            for j in 0..m {
                av += full[i * m + j] * vectors[j * m + k];
            }
            let r = av - values[k] * vectors[i * m + k];
            res += r * r;
        }
        worst = worst.max(res.sqrt());
    }
    worst / fro
}

fn tred2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    if n == 1 {
        d[0] = v[0];
        v[0] = 1.0;
        return;
    }
    d.copy_from_slice(&v[(n - 1) * n..n * n]);
    for i in (1..n).rev() {
        let mut scale = 0.0f64;
        let mut h = 0.0f64;
        for &dk in d[..i].iter() {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e[..i].iter_mut() {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in j + 1..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }
    // accumulate transformations
    for i in 0..n - 1 {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for (j, dj) in d.iter_mut().enumerate() {
        *dj = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + n - 1] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize, fp: &str) -> Result<()> {
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let cap = QL_SWEEPS_PER_DIM * n;
    let mut sweeps = 0usize;
    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                sweeps += 1;
                if sweeps > cap {
                    return Err(Error::SolverFailure(format!("QL exceeded {cap} sweeps on {fp}")));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d[l + 2..n].iter_mut() {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[k * n + i + 1];
                        v[k * n + i + 1] = s * v[k * n + i] + c * h;
                        v[k * n + i] = c * v[k * n + i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // ascending sort with matching column swaps
    for i in 0..n - 1 {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for j in 0..n {
                v.swap(j * n + i, j * n + k);
            }
        }
    }
    Ok(())
}
