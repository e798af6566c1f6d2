//! Adaptive Gauss–Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// One G7/K15 panel: returns (Kronrod estimate, |Kronrod - Gauss|).
fn panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = hl * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * hl, ((k - g) * hl).abs())
}

/// Integrates `f` over `[a, b]`, bisecting panels until each Kronrod/Gauss discrepancy
/// is below its share of `max(abs_tol, rel_tol * |I|)`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    let mut panels = vec![(a, b, panel(&f, a, b))];
    for _ in 0..10_000 {
        let total: f64 = panels.iter().map(|p| p.2 .0).sum();
        let err: f64 = panels.iter().map(|p| p.2 .1).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return total;
        }
        let (worst, _) = panels.iter().enumerate().max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1)).expect("non-empty");
        let (lo, hi, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        panels.push((lo, mid, panel(&f, lo, mid)));
        panels.push((mid, hi, panel(&f, mid, hi)));
    }
    panels.iter().map(|p| p.2 .0).sum()
}

/// Integrates over `[a, b]` split at the given interior breakpoints.
pub fn integrate_with_breaks(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> f64 {
    let mut pts: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let share = abs_tol / (pts.len() - 1) as f64;
    pts.windows(2).map(|w| integrate(&f, w[0], w[1], rel_tol, share)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        let v = integrate(|x| x.powi(5), 0.0, 1.0, 1e-12, 1e-14);
        assert!((v - 1.0 / 6.0).abs() < 1e-14);
        let v = integrate(f64::exp, -1.0, 2.0, 1e-12, 1e-14);
        assert!((v - (2f64.exp() - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn kinks_are_resolved() {
        let v = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-10, 1e-12);
        assert!((v - (0.045 + 0.245)).abs() < 1e-9);
        let v = integrate_with_breaks(|x: f64| if x >= 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, &[0.3], 1e-12, 1e-14);
        assert!((v - 0.7).abs() < 1e-13);
    }
}
