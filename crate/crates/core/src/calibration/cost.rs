use crate::curve::{interpolate, LoadDeflectionCurve};
use crate::error::{Error, Result};

/// Area between two load–deflection curves over their common deflection
/// range. Both curves are interpolated onto the union of their abscissae
/// and |ΔF| is integrated with the trapezoid rule.
pub fn cost(num: &LoadDeflectionCurve, exp: &LoadDeflectionCurve) -> Result<f64> {
    let (a0, a1) = num.domain();
    let (b0, b1) = exp.domain();
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if !(hi > lo) {
        return Err(Error::Domain(format!(
            "curves '{}' [{a0}, {a1}] and '{}' [{b0}, {b1}] do not overlap",
            num.tag(),
            exp.tag()
        )));
    }
    let mut xs: Vec<f64> = num
        .deflections()
        .iter()
        .chain(exp.deflections())
        .copied()
        .filter(|x| *x > lo && *x < hi)
        .chain([lo, hi])
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let diff = |x: f64| -> f64 {
        let f = interpolate(num.deflections(), num.forces(), x).unwrap_or(0.0);
        let g = interpolate(exp.deflections(), exp.forces(), x).unwrap_or(0.0);
        (f - g).abs()
    };
    let vals: Vec<f64> = xs.iter().map(|x| diff(*x)).collect();
    Ok(xs.windows(2).zip(vals.windows(2)).map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1])).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(pairs: &[(f64, f64)]) -> LoadDeflectionCurve {
        LoadDeflectionCurve::from_pairs("t", pairs).unwrap()
    }

    #[test]
    fn hand_values() {
        let a = curve(&[(0.0, 1.0), (2.0, 4.0), (5.0, 0.0)]);
        assert_eq!(cost(&a, &a).unwrap(), 0.0);
        let shifted = curve(&[(0.0, 3.0), (2.0, 6.0), (5.0, 2.0)]);
        assert!((cost(&shifted, &a).unwrap() - 10.0).abs() < 1e-12);
        let tri = curve(&[(0.0, 0.0), (1.0, 3.0), (2.0, 0.0)]);
        let zero = curve(&[(0.0, 0.0), (2.0, 0.0)]);
        assert!((cost(&tri, &zero).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_domains_are_rejected() {
        let a = curve(&[(0.0, 1.0), (1.0, 1.0)]);
        let b = curve(&[(2.0, 1.0), (3.0, 1.0)]);
        assert!(matches!(cost(&a, &b), Err(Error::Domain(_))));
    }

    #[test]
    fn only_common_domain_counts() {
        let short = curve(&[(0.0, 0.0), (1.0, 1.0)]);
        let long = curve(&[(0.0, 0.0), (1.0, 1.0), (3.0, 50.0)]);
        assert_eq!(cost(&short, &long).unwrap(), 0.0);
    }

    fn arb_curve() -> impl Strategy<Value = LoadDeflectionCurve> {
        prop::collection::vec((0.01f64..1.0, -5.0f64..5.0), 2..12).prop_map(|v| {
            let mut u = 0.0;
            let pairs: Vec<(f64, f64)> = v
                .into_iter()
                .map(|(du, f)| {
                    u += du;
                    (u, f)
                })
                .collect();
            let shift = pairs[0].0;
            curve(&pairs.iter().map(|(u, f)| (u - shift, *f)).collect::<Vec<_>>())
        })
    }

    proptest! {
        #[test]
        fn cost_is_a_symmetric_nonnegative_pseudometric(a in arb_curve(), b in arb_curve()) {
            let ab = cost(&a, &b).unwrap();
            let ba = cost(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
            prop_assert_eq!(cost(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn offset_cost_is_offset_times_length(a in arb_curve(), off in 0.0f64..10.0) {
            let shifted = LoadDeflectionCurve::new("s", a.deflections().to_vec(), a.forces().iter().map(|f| f + off).collect()).unwrap();
            let len = a.domain().1 - a.domain().0;
            prop_assert!((cost(&shifted, &a).unwrap() - off * len).abs() <= 1e-9 * (1.0 + off * len));
        }
    }
}
