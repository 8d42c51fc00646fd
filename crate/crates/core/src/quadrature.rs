//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};

const MAX_INTERVALS: usize = 4000;

// Kronrod abscissae (non-negative half) and weights; every second node is a
// Gauss node.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[lo, hi]` to relative tolerance `rel_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    integrate_with_breaks(f, &[lo, hi], rel_tol)
}

/// Like [`integrate`], but starts from the partition given by `points`
/// (sorted; the first and last entries are the integration limits).
/// Placing breakpoints at kinks or sharp features speeds convergence.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, points: &[f64], rel_tol: f64) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|p| !p.is_finite()) {
        return Err(Error::domain("points", "need at least two finite limits"));
    }
    let lo = points[0];
    let hi = points[points.len() - 1];
    if lo == hi {
        return Ok(0.0);
    }
    let tol = rel_tol.max(4.0 * f64::EPSILON);
    let mut segments: Vec<Segment> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| kronrod15(&f, w[0], w[1]))
        .collect();
    let mut evaluations = 15 * segments.len();

    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::range("quadrature", format!("non-finite integrand on [{lo}, {hi}]")));
        }
        if error <= tol * value.abs() || error < f64::MIN_POSITIVE {
            return Ok(value);
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("non-empty partition");
        let seg = segments[worst];
        let mid = 0.5 * (seg.lo + seg.hi);
        let exhausted = mid <= seg.lo || mid >= seg.hi || (seg.hi - seg.lo) < 1e-15 * mid.abs().max(1e-300);
        if segments.len() >= MAX_INTERVALS || exhausted {
            return Err(Error::Quadrature {
                lo,
                hi,
                estimate: value,
                error,
                evaluations,
            });
        }
        segments[worst] = kronrod15(&f, seg.lo, mid);
        segments.push(kronrod15(&f, mid, seg.hi));
        evaluations += 30;
    }
}
