//! Adaptive Gauss–Kronrod quadrature, semi-infinite ranges, and
//! lobe-by-lobe summation of oscillatory tails with Wynn's epsilon
//! acceleration.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_223_066,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Integral estimate with its error bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Tolerances for adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-8,
            abs: 1e-14,
            max_intervals: 2000,
        }
    }
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Self {
        Tolerance {
            rel,
            abs,
            ..Tolerance::default()
        }
    }

    fn accepts(&self, est: &Estimate) -> bool {
        est.error <= self.abs.max(self.rel * est.value.abs())
    }
}

/// One application of the 21-point rule on `[a, b]`.
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut fv = [0.0f64; 20];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Estimate { value, error: err }
}

/// Globally adaptive integration over `[a, b]`, bisecting the interval with
/// the largest error estimate until the total error meets `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    integrate_breaks(f, &[a, b], tol)
}

/// Adaptive integration seeded with the given (sorted) breakpoints.
pub fn integrate_breaks<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: Tolerance) -> Result<Estimate> {
    let mut intervals: Vec<(f64, f64, Estimate)> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1], gk21(&f, w[0], w[1])))
        .collect();
    if intervals.is_empty() {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    loop {
        let total = intervals.iter().fold(Estimate { value: 0.0, error: 0.0 }, |acc, iv| Estimate {
            value: acc.value + iv.2.value,
            error: acc.error + iv.2.error,
        });
        if !total.value.is_finite() {
            return Err(Error::NonFinite("quadrature integrand"));
        }
        if tol.accepts(&total) {
            return Ok(total);
        }
        if intervals.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                what: "adaptive interval budget exhausted".into(),
                estimate: total.value,
                error: total.error,
            });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .expect("non-empty");
        let (a, b, _) = intervals[idx];
        let mid = 0.5 * (a + b);
        if !(mid > a && mid < b) {
            // interval collapsed to adjacent floats; nothing left to refine
            return Err(Error::Quadrature {
                what: "interval collapsed below float resolution".into(),
                estimate: total.value,
                error: total.error,
            });
        }
        intervals[idx] = (a, mid, gk21(&f, a, mid));
        intervals.push((mid, b, gk21(&f, mid, b)));
    }
}

/// Integral over `[a, ∞)` via the map `x = a / t` on `(0, 1]` (requires `a > 0`).
pub fn integrate_tail<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Result<Estimate> {
    debug_assert!(a > 0.0);
    integrate(
        |t: f64| {
            if t <= 0.0 {
                0.0
            } else {
                let x = a / t;
                f(x) * a / (t * t)
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integral over `[0, ∞)`. `scales` are characteristic abscissae of the
/// integrand (kinks, cutoffs); the finite part is split at them and at
/// decades in between, the remainder handled by [`integrate_tail`].
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, scales: &[f64], tol: Tolerance) -> Result<Estimate> {
    let finite: Vec<f64> = scales.iter().copied().filter(|s| s.is_finite() && *s > 0.0).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    let hi = finite.iter().copied().fold(0.0, f64::max).max(1.0);
    let mut points = vec![0.0];
    let mut p = lo * 1e-2;
    while p < hi * 10.0 {
        points.push(p);
        p *= 10.0;
    }
    points.extend(finite.iter().copied());
    let cut = hi * 10.0;
    points.push(cut);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let head = integrate_breaks(&f, &points, tol)?;
    let tail = integrate_tail(&f, cut, tol)?;
    Ok(Estimate {
        value: head.value + tail.value,
        error: head.error + tail.error,
    })
}

/// Wynn epsilon extrapolation of a sequence of partial sums. Returns the
/// best estimate and the change from the previous best estimate.
pub fn wynn_epsilon(sums: &[f64]) -> (f64, f64) {
    let n = sums.len();
    if n < 3 {
        let last = *sums.last().unwrap_or(&0.0);
        let prev = if n >= 2 { sums[n - 2] } else { 0.0 };
        return (last, (last - prev).abs());
    }
    // columns: eps_{-1} = 0, eps_0 = sums
    let mut prev_col = vec![0.0; n + 1];
    let mut col = sums.to_vec();
    let mut best = (sums[n - 1], (sums[n - 1] - sums[n - 2]).abs());
    let mut order = 0;
    while col.len() >= 2 {
        let mut next = Vec::with_capacity(col.len() - 1);
        for k in 0..col.len() - 1 {
            let diff = col[k + 1] - col[k];
            if diff == 0.0 || !diff.is_finite() {
                // exact convergence in this column
                return (col[k + 1], best.1.min((col[k + 1] - best.0).abs()));
            }
            next.push(prev_col[k + 1] + 1.0 / diff);
        }
        order += 1;
        prev_col = col;
        col = next;
        if order % 2 == 0 && !col.is_empty() {
            let m = col.len();
            let est = col[m - 1];
            let change = if m >= 2 {
                (col[m - 1] - col[m - 2]).abs()
            } else {
                (est - best.0).abs()
            };
            if est.is_finite() {
                best = (est, change);
            }
        }
    }
    best
}

/// Sums `∫ f` over consecutive intervals `[x_k, x_{k+1}]` starting at
/// `nodes(0)`, accelerating the partial sums with Wynn's epsilon algorithm.
/// Intended for oscillatory integrands whose sign changes near the nodes.
pub fn sum_lobes<F, N>(f: F, nodes: N, tol: Tolerance, max_lobes: usize) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
    N: Fn(usize) -> f64,
{
    let mut sums: Vec<f64> = Vec::new();
    let mut total = 0.0;
    let mut quad_err = 0.0;
    let mut last_est = f64::NAN;
    let mut stable = 0;
    let mut small = 0;
    let lobe_tol = Tolerance {
        rel: tol.rel * 0.1,
        abs: tol.abs * 0.1,
        max_intervals: tol.max_intervals,
    };
    for k in 0..max_lobes {
        let (a, b) = (nodes(k), nodes(k + 1));
        let lobe = integrate(&f, a, b, lobe_tol)?;
        total += lobe.value;
        quad_err += lobe.error;
        sums.push(total);
        // keep the extrapolation table short; the tail is what matters
        if sums.len() > 40 {
            sums.remove(0);
        }
        if lobe.value.abs() <= tol.abs {
            small += 1;
        } else {
            small = 0;
        }
        if small >= 3 {
            return Ok(Estimate {
                value: total,
                error: quad_err + tol.abs,
            });
        }
        if sums.len() >= 5 {
            let (est, _) = wynn_epsilon(&sums);
            let limit = tol.abs.max(tol.rel * est.abs());
            if (est - last_est).abs() <= limit {
                stable += 1;
                if stable >= 3 {
                    return Ok(Estimate {
                        value: est,
                        error: quad_err + (est - last_est).abs(),
                    });
                }
            } else {
                stable = 0;
            }
            last_est = est;
        }
    }
    Err(Error::Quadrature {
        what: format!("oscillatory tail not converged after {max_lobes} lobes"),
        estimate: total,
        error: (total - last_est).abs(),
    })
}

/// `k`-th positive zero of the Bessel function J0 (1-based).
pub fn j0_zero(k: usize) -> f64 {
    const FIRST: [f64; 3] = [2.404_825_557_695_773, 5.520_078_110_286_311, 8.653_727_912_911_013];
    if (1..=3).contains(&k) {
        return FIRST[k - 1];
    }
    let beta = (k as f64 - 0.25) * std::f64::consts::PI;
    let b8 = 8.0 * beta;
    let mut z = beta + 1.0 / b8 - 124.0 / (3.0 * b8.powi(3)) + 120_928.0 / (15.0 * b8.powi(5));
    // Newton polish: J0' = -J1
    for _ in 0..2 {
        z += libm::j0(z) / libm::j1(z);
    }
    z
}

/// `1 - J0(x)` without cancellation for small arguments.
pub fn one_minus_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 0.25 {
        let q = 0.25 * x * x;
        // 1 - Σ (-q)^k / (k!)^2
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..12 {
            term *= -q / ((k * k) as f64);
            sum -= term;
        }
        sum
    } else {
        1.0 - libm::j0(x)
    }
}

/// `∫_0^∞ J0(r p) g(p) dp`: the range up to the first zero of `J0(r p)` is
/// integrated adaptively, the remainder lobe by lobe between zeros.
pub fn hankel0<G: Fn(f64) -> f64>(g: G, r: f64, scales: &[f64], tol: Tolerance) -> Result<Estimate> {
    if r == 0.0 {
        return integrate_half_line(g, scales, tol);
    }
    let first = j0_zero(1) / r;
    let integrand = |p: f64| libm::j0(r * p) * g(p);
    let mut points = vec![0.0];
    points.extend(scales.iter().copied().filter(|s| s.is_finite() && *s > 0.0 && *s < first));
    let lo = points.iter().skip(1).copied().fold(first, f64::min);
    let mut p = lo * 1e-2;
    while p < first {
        points.push(p);
        p *= 10.0;
    }
    points.push(first);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let head = integrate_breaks(integrand, &points, tol)?;
    let tail = sum_lobes(integrand, |k| j0_zero(k + 1) / r, tol, 20_000)?;
    Ok(Estimate {
        value: head.value + tail.value,
        error: head.error + tail.error,
    })
}

/// `∫_0^∞ sin(t p) g(p) dp` for `t > 0`, split at multiples of `π / t`.
pub fn sine_transform<G: Fn(f64) -> f64>(g: G, t: f64, scales: &[f64], tol: Tolerance) -> Result<Estimate> {
    let period = std::f64::consts::PI / t;
    let integrand = |p: f64| (t * p).sin() * g(p);
    let mut points = vec![0.0];
    points.extend(scales.iter().copied().filter(|s| s.is_finite() && *s > 0.0 && *s < period));
    let lo = points.iter().skip(1).copied().fold(period, f64::min);
    let mut p = lo * 1e-2;
    while p < period {
        points.push(p);
        p *= 10.0;
    }
    points.push(period);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let head = integrate_breaks(integrand, &points, tol)?;
    let tail = sum_lobes(integrand, |k| (k + 1) as f64 * period, tol, 20_000)?;
    Ok(Estimate {
        value: head.value + tail.value,
        error: head.error + tail.error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_weights_sum_to_two() {
        let s: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        assert_relative_eq!(s, 2.0, epsilon = 1e-14);
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert_relative_eq!(g, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn rules_exact_for_polynomials() {
        for deg in 0..=31 {
            let est = gk21(&|x: f64| x.powi(deg), 0.0, 1.0);
            assert_relative_eq!(est.value, 1.0 / (deg as f64 + 1.0), epsilon = 1e-13);
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let est = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, Tolerance::new(1e-10, 1e-14)).unwrap();
        assert_relative_eq!(est.value, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn half_line_algebraic_tail() {
        // ∫_0^∞ dx / (1 + x²)^{4/3} = √π Γ(5/6) / (2 Γ(4/3))
        let exact = std::f64::consts::PI.sqrt() * libm::tgamma(5.0 / 6.0) / (2.0 * libm::tgamma(4.0 / 3.0));
        let est = integrate_half_line(|x: f64| (1.0 + x * x).powf(-4.0 / 3.0), &[1.0], Tolerance::new(1e-11, 1e-15)).unwrap();
        assert_relative_eq!(est.value, exact, epsilon = 1e-9);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut sums = Vec::new();
        let mut s = 0.0;
        for k in 1..=20 {
            s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            sums.push(s);
        }
        let (est, _) = wynn_epsilon(&sums);
        assert!((est - std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn hankel_of_gaussian() {
        // ∫_0^∞ J0(r p) exp(-p²/2) p dp = exp(-r²/2)
        for &r in &[0.0, 0.3, 1.0, 2.5, 7.0] {
            let est = hankel0(|p: f64| (-0.5 * p * p).exp() * p, r, &[1.0], Tolerance::new(1e-10, 1e-15)).unwrap();
            assert!((est.value - (-0.5 * r * r).exp()).abs() < 1e-10, "r={r}: {}", est.value);
        }
    }

    #[test]
    fn hankel_of_slow_algebraic_decay() {
        // ∫_0^∞ J0(r p) p / (1 + p²)^{3/2} dp = exp(-r)
        for &r in &[0.5, 1.0, 3.0] {
            let est = hankel0(|p: f64| p * (1.0 + p * p).powf(-1.5), r, &[1.0], Tolerance::new(1e-10, 1e-15)).unwrap();
            assert!((est.value - (-r).exp()).abs() < 1e-8, "r={r}: {} vs {}", est.value, (-r).exp());
        }
    }

    #[test]
    fn sine_transform_of_exponential() {
        // ∫_0^∞ sin(t p) e^{-p} dp = t / (1 + t²)
        for &t in &[0.1, 1.0, 4.0] {
            let est = sine_transform(|p: f64| (-p).exp(), t, &[1.0], Tolerance::new(1e-11, 1e-15)).unwrap();
            assert_relative_eq!(est.value, t / (1.0 + t * t), epsilon = 1e-9);
        }
    }

    #[test]
    fn j0_zeros_are_roots() {
        for k in 1..50 {
            let z = j0_zero(k);
            assert!(libm::j0(z).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn one_minus_j0_small_argument() {
        for &x in &[1e-6, 1e-3, 0.1, 0.2499, 0.25, 1.0] {
            let reference = 1.0 - libm::j0(x);
            let ours = one_minus_j0(x);
            if x > 0.2 {
                assert_relative_eq!(ours, reference, epsilon = 1e-13);
            } else {
                assert_relative_eq!(ours, x * x / 4.0 - x.powi(4) / 64.0 + x.powi(6) / 2304.0, epsilon = 1e-12);
            }
        }
    }
}
