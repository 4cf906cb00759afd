//! Real roots of a cubic polynomial.
//!
//! Closed-form (trigonometric for three real roots, Cardano otherwise) followed
//! by Newton polishing against the original coefficients. When the closed form
//! yields a complex pair whose imaginary part is negligible relative to its
//! real part, the pair is reported as a merged double root. This keeps both
//! coalescing roots visible at a saddle node, where a naive solver drops them.

use std::f64::consts::PI;

/// A real root and whether it is a merged (near-)double root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: f64,
    pub double: bool,
}

fn eval(c: &[f64; 4], x: f64) -> (f64, f64) {
    let [a3, a2, a1, a0] = *c;
    let f = ((a3 * x + a2) * x + a1) * x + a0;
    let df = (3.0 * a3 * x + 2.0 * a2) * x + a1;
    (f, df)
}

fn polish(c: &[f64; 4], mut x: f64) -> f64 {
    let (mut f, mut df) = eval(c, x);
    for _ in 0..4 {
        if f == 0.0 || df == 0.0 || !df.is_finite() {
            break;
        }
        let next = x - f / df;
        let (fn_, dfn) = eval(c, next);
        if !(fn_.abs() < f.abs()) {
            break;
        }
        x = next;
        f = fn_;
        df = dfn;
    }
    x
}

/// Real roots of `a3·x³ + a2·x² + a1·x + a0` with `a3 != 0`, sorted ascending.
///
/// `merge_tol` is the relative tolerance under which distinct roots, or the
/// imaginary part of a complex pair, count as a double root.
pub fn real_roots(a3: f64, a2: f64, a1: f64, a0: f64, merge_tol: f64) -> Vec<Root> {
    assert!(a3 != 0.0, "leading coefficient must be non-zero");
    let coeffs = [a3, a2, a1, a0];
    let b = a2 / a3;
    let c = a1 / a3;
    let d = a0 / a3;
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);

    let mut roots: Vec<Root> = Vec::with_capacity(3);
    if disc < 0.0 {
        // three distinct real roots, p < 0
        let r = (-p / 3.0).sqrt();
        let cos_arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
        let phi = cos_arg.acos();
        for k in 0..3 {
            let t = 2.0 * r * ((phi - 2.0 * PI * k as f64) / 3.0).cos();
            roots.push(Root {
                value: polish(&coeffs, t - shift),
                double: false,
            });
        }
    } else {
        let s = (q.abs() / 2.0 + disc.sqrt()).cbrt();
        let a = if q > 0.0 { -s } else { s };
        let (t1, half_gap) = if a == 0.0 {
            (0.0, 0.0)
        } else {
            let b_part = -p / (3.0 * a);
            (a + b_part, (3f64.sqrt() / 2.0) * (a - b_part).abs())
        };
        roots.push(Root {
            value: polish(&coeffs, t1 - shift),
            double: false,
        });
        let re = -t1 / 2.0 - shift;
        if half_gap <= merge_tol * re.abs().max(f64::MIN_POSITIVE) {
            roots.push(Root {
                value: polish(&coeffs, re),
                double: true,
            });
        }
    }

    roots.sort_by(|x, y| x.value.total_cmp(&y.value));
    // merge coalesced neighbours
    let mut merged: Vec<Root> = Vec::with_capacity(roots.len());
    for r in roots {
        if let Some(last) = merged.last_mut() {
            let scale = last.value.abs().max(r.value.abs()).max(f64::MIN_POSITIVE);
            if (r.value - last.value).abs() <= merge_tol * scale {
                last.value = 0.5 * (last.value + r.value);
                last.double = true;
                continue;
            }
        }
        merged.push(r);
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn values(r: &[Root]) -> Vec<f64> {
        r.iter().map(|r| r.value).collect()
    }

    #[test]
    fn three_distinct_roots() {
        // (x-1)(x-2)(x-3)
        let r = values(&real_roots(1.0, -6.0, 11.0, -6.0, 1e-9));
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-13, "{got}");
        }
    }

    #[test]
    fn single_real_root() {
        // (x-2)(x²+1)
        let r = real_roots(1.0, -2.0, 1.0, -2.0, 1e-9);
        assert_eq!(r.len(), 1);
        assert!((r[0].value - 2.0).abs() < 1e-14);
    }

    #[test]
    fn double_root_is_merged_and_flagged() {
        // (x-1)²(x-4) = x³ - 6x² + 9x - 4
        let r = real_roots(1.0, -6.0, 9.0, -4.0, 1e-9);
        assert_eq!(r.len(), 2, "{r:?}");
        assert!(r[0].double);
        assert!((r[0].value - 1.0).abs() < 1e-7);
        assert!(!r[1].double);
        assert!((r[1].value - 4.0).abs() < 1e-13);
    }

    #[test]
    fn triple_root() {
        // (x-2)³
        let r = real_roots(1.0, -6.0, 12.0, -8.0, 1e-9);
        assert!(!r.is_empty());
        assert!(r.iter().all(|x| (x.value - 2.0).abs() < 1e-5), "{r:?}");
    }

    #[test]
    fn badly_scaled_coefficients() {
        // roots 1e-3, 1, 1e3 scaled by 1e12
        let (a, b, c) = (1e-3, 1.0, 1e3);
        let k = 1e12;
        let r = values(&real_roots(
            k,
            -k * (a + b + c),
            k * (a * b + b * c + a * c),
            -k * a * b * c,
            1e-9,
        ));
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([a, b, c]) {
            assert!((got / want - 1.0).abs() < 1e-12, "{got} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn recovers_well_separated_roots(
            x0 in -100.0f64..100.0,
            g1 in 0.01f64..50.0,
            g2 in 0.01f64..50.0,
            lead in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
        ) {
            let xs = [x0, x0 + g1, x0 + g1 + g2];
            let a2 = -lead * (xs[0] + xs[1] + xs[2]);
            let a1 = lead * (xs[0] * xs[1] + xs[1] * xs[2] + xs[0] * xs[2]);
            let a0 = -lead * xs[0] * xs[1] * xs[2];
            let r = values(&real_roots(lead, a2, a1, a0, 1e-12));
            prop_assert_eq!(r.len(), 3);
            let scale = xs.iter().map(|x| x.abs()).fold(1.0, f64::max);
            for (got, want) in r.iter().zip(xs) {
                prop_assert!((got - want).abs() < 1e-8 * scale * scale, "{} vs {}", got, want);
            }
        }
    }
}
