//! Globally adaptive Gauss-Kronrod (10/21-point) integration.
//!
//! Infinite endpoints are mapped onto finite ones with `x = c ± t/(1-t)`.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
    0.123_491_976_262_065_851_077_208_931_782_934,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
    pub converged: bool,
}

impl QuadResult {
    pub fn into_result(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Quadrature {
                value: self.value,
                error: self.error,
            })
        }
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        resk += WGK[j] * sum;
        if j % 2 == 1 {
            resg += WG[j / 2] * sum;
        }
    }
    (resk * half, ((resk - resg) * half).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn adapt<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], opts: &QuadOptions) -> QuadResult {
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        let (value, error) = kronrod21(f, w[0], w[1]);
        heap.push(Piece {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target || heap.len() >= opts.max_intervals || !value.is_finite() {
            return QuadResult {
                value,
                error,
                intervals: heap.len(),
                converged: error <= target && value.is_finite(),
            };
        }
        let worst = heap.pop().expect("at least one interval");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in double precision.
            heap.push(Piece {
                error: 0.0,
                ..worst
            });
            continue;
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = kronrod21(f, a, b);
            heap.push(Piece { a, b, value, error });
        }
    }
}

/// Integrates `f` over `[a, b]`; either endpoint may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> QuadResult {
    integrate_with_breaks(f, &[a, b], opts)
}

/// Integrates over `[p_0, p_last]` with the interior points used as initial
/// subdivision breaks. Only the outer endpoints may be infinite.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    opts: &QuadOptions,
) -> QuadResult {
    integrate_dyn(&f, points, opts)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, points: &[f64], opts: &QuadOptions) -> QuadResult {
    assert!(points.len() >= 2, "need at least two points");
    let lo = points[0];
    let hi = *points.last().unwrap();
    let finite_interior: Vec<f64> = points[1..points.len() - 1].to_vec();
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => adapt(&f, points, opts),
        (true, false) => {
            // x = lo + t/(1-t) maps [0,1) onto [lo, ∞).
            let g = |t: f64| {
                let u = 1.0 - t;
                f(lo + t / u) / (u * u)
            };
            let mut br = vec![0.0];
            br.extend(finite_interior.iter().map(|&x| (x - lo) / (1.0 + x - lo)));
            br.push(1.0);
            adapt(&g, &br, opts)
        }
        (false, true) => {
            // x = hi - t/(1-t) maps [0,1) onto (-∞, hi].
            let g = |t: f64| {
                let u = 1.0 - t;
                f(hi - t / u) / (u * u)
            };
            let mut br = vec![0.0];
            br.extend(
                finite_interior
                    .iter()
                    .rev()
                    .map(|&x| (hi - x) / (1.0 + hi - x)),
            );
            br.push(1.0);
            adapt(&g, &br, opts)
        }
        (false, false) => {
            let c = if finite_interior.is_empty() {
                0.0
            } else {
                finite_interior[finite_interior.len() / 2]
            };
            let left: Vec<f64> = std::iter::once(f64::NEG_INFINITY)
                .chain(finite_interior.iter().copied().filter(|&x| x < c))
                .chain(std::iter::once(c))
                .collect();
            let right: Vec<f64> = std::iter::once(c)
                .chain(finite_interior.iter().copied().filter(|&x| x > c))
                .chain(std::iter::once(f64::INFINITY))
                .collect();
            let l = integrate_dyn(f, &left, opts);
            let r = integrate_dyn(f, &right, opts);
            let value = l.value + r.value;
            QuadResult {
                value,
                error: l.error + r.error,
                intervals: l.intervals + r.intervals,
                converged: (l.converged && r.converged)
                    || (l.error + r.error) <= opts.abs_tol.max(opts.rel_tol * value.abs()),
            }
        }
    }
}
