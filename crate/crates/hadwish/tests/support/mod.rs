//! Independent oracles for the acceptance suite. Nothing here reuses the
//! implementation paths under test: the absolute-moment oracle is adaptive
//! Simpson quadrature, and the Monte Carlo samplers only share the seeded
//! uniform stream and normal quantile (which are themselves pinned against
//! external reference values in unit tests).

use hadwish::ensembles::{derive_stream, normal_quantile, SeedSpec};
use rand_core::RngCore;

/// Adaptive Simpson integration to an absolute tolerance.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// `E|Z|^alpha` by quadrature of the half-normal integral. The segment near
/// zero is integrated in the variable `x = u^2` to tame the fractional
/// power's unbounded derivative.
pub fn ell_alpha_quadrature(alpha: f64) -> f64 {
    let density = move |x: f64| {
        x.powf(alpha) * (-0.5 * x * x).exp() * (2.0 / (2.0 * std::f64::consts::PI).sqrt())
    };
    let near = adaptive_simpson(
        &|u: f64| {
            let x = u * u;
            density(x) * 2.0 * u
        },
        0.0,
        1.0,
        1e-13,
    );
    let far = adaptive_simpson(&density, 1.0, 40.0, 1e-13);
    near + far
}

/// Deterministic stream of standard normals for Monte Carlo oracles.
pub struct NormalStream {
    rng: rand_chacha::ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, trial: u64) -> Self {
        NormalStream { rng: derive_stream(&SeedSpec::new(seed, trial)) }
    }

    pub fn next(&mut self) -> f64 {
        let bits = self.rng.next_u64();
        normal_quantile(((bits >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0))
    }

    pub fn fill(&mut self, buf: &mut [f64]) {
        for v in buf.iter_mut() {
            *v = self.next();
        }
    }
}

/// Mean and standard error of a sample accumulated on the fly.
#[derive(Default)]
pub struct MeanSe {
    n: u64,
    sum: f64,
    sumsq: f64,
}

impl MeanSe {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn se(&self) -> f64 {
        let n = self.n as f64;
        let var = (self.sumsq / n - self.mean() * self.mean()).max(0.0);
        (var / n).sqrt()
    }
}

pub fn report(index: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {index:02} ({name}): {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
