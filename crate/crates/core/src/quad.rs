//! Adaptive Gauss–Kronrod (7/15 point) quadrature and bracketed bisection.

#![allow(clippy::excessive_precision)]

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
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

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Panel {
    est: f64,
    err: f64,
    // Kronrod estimate of the integral of |f|, the roundoff scale
    abs: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = fc.abs() * WGK[7];
    for k in 0..7 {
        let dx = half * XGK[k];
        let (lo, hi) = (f(centre - dx), f(centre + dx));
        kronrod += WGK[k] * (lo + hi);
        abs += WGK[k] * (lo.abs() + hi.abs());
        if k % 2 == 1 {
            gauss += WG[k / 2] * (lo + hi);
        }
    }
    Panel { est: kronrod * half, err: ((kronrod - gauss) * half).abs(), abs: abs * half.abs() }
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: Panel, tol: f64, depth: u32) -> f64 {
    let Panel { est, err, abs } = whole;
    let roundoff = 50.0 * f64::EPSILON * abs;
    if err <= tol.max(roundoff) || depth == 0 || (b - a).abs() <= 1e4 * f64::EPSILON * a.abs().max(b.abs()) {
        return est;
    }
    let m = 0.5 * (a + b);
    let left = gk15(f, a, m);
    let right = gk15(f, m, b);
    adapt(f, a, m, left, 0.5 * tol, depth - 1) + adapt(f, m, b, right, 0.5 * tol, depth - 1)
}

/// `∫_a^b f` to absolute tolerance `tol`, or to roundoff level when `tol`
/// is below what double precision can resolve for this integrand.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = gk15(&f, a, b);
    adapt(&f, a, b, whole, tol, 48)
}

/// Root of an increasing function on `[lo, hi]` with `f(lo) < 0 < f(hi)`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        assert!((integrate(|x| x * x, 0.0, 3.0, 1e-12) - 9.0).abs() < 1e-12);
        assert!((integrate(f64::exp, 0.0, 1.0, 1e-12) - (1.0f64.exp() - 1.0)).abs() < 1e-12);
        assert_eq!(integrate(|x| x, 2.0, 2.0, 1e-9), 0.0);
    }

    #[test]
    fn log_singularity_at_endpoint() {
        // ∫_0^1 ln(1 - x) dx = -1
        let v = integrate(|x: f64| (-x).ln_1p(), 0.0, 1.0, 1e-10);
        assert!((v + 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn bisection_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12);
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
    }
}
