use proptest::prelude::*;
use std::f64::consts::PI;
use turnpoint::airy::w_j;
use turnpoint::dd::{self, dd, Dd};
use turnpoint::exact::{periodic_coefficients, wronskian_values};
use turnpoint::scaled::Scaled;
use turnpoint::C64;

fn c64() -> impl Strategy<Value = C64> {
    (-10.0f64..10.0, -10.0f64..10.0).prop_map(|(re, im)| C64::new(re, im))
}

fn scaled() -> impl Strategy<Value = Scaled> {
    (c64(), -800.0f64..800.0).prop_filter("nonzero", |(c, _)| c.norm() > 1e-3).prop_map(|(c, s)| Scaled::new(c, s))
}

fn rel(a: Dd, b: Dd) -> f64 {
    dd::to_f64((a - b).abs()) / dd::to_f64(b.abs())
}

proptest! {
    #[test]
    fn dd_product_of_doubles_is_exact(x in -1e6f64..1e6, y in -1e6f64..1e6) {
        let p = dd(x) * dd(y);
        let hi = x * y;
        prop_assert_eq!(p.hi(), hi);
        prop_assert_eq!(p.lo(), x.mul_add(y, -hi));
    }

    #[test]
    fn dd_field_roundtrips(a in 0.1f64..100.0, b in 0.1f64..100.0, t in 1e-20f64..1e-17) {
        let x = dd::dd_pair(a, a * t);
        let y = dd(b);
        prop_assert!(rel((x + y) - y, x) <= 1e-30);
        prop_assert!(rel((x * y) / y, x) <= 1e-30);
        prop_assert!(rel(x.sqrt() * x.sqrt(), x) <= 1e-30);
    }

    #[test]
    fn dd_elementary_functions(x in -20.0f64..20.0) {
        let v = dd(x);
        prop_assert!(dd::to_f64((dd::ln(dd::exp(v)) - v).abs()) <= 1e-30 * x.abs().max(1.0));
        let (s, c) = dd::sin_cos(v);
        prop_assert!(dd::to_f64((s * s + c * c - Dd::ONE).abs()) <= 1e-30);
    }

    #[test]
    fn scaled_arithmetic(a in scaled(), b in scaled()) {
        let (x, y) = (a.add(b), b.add(a));
        prop_assert!(x.sub(y).abs() <= 1e-15 * x.abs().max(1e-300) || x.sub(y).is_zero());
        let back = a.mul(b).div(b);
        prop_assert!((back.ln_abs() - a.ln_abs()).abs() <= 1e-12);
        // log scales up to 1600 carry absolute rounding of a few 1e-13
        let tol = 1e-14 + 4.0 * f64::EPSILON * (a.log_scale.abs() + b.log_scale.abs());
        prop_assert!((back.at_scale(a.log_scale) - a.mantissa).norm() <= tol * a.mantissa.norm());
        prop_assert!(a.sub(a).abs() <= 1e-15 * a.abs());
    }

    #[test]
    fn scaled_matches_plain_complex(a in c64(), b in c64()) {
        let (x, y) = (Scaled::from(a), Scaled::from(b));
        prop_assert!((x.add(y).to_c64() - (a + b)).norm() <= 1e-14 * (a.norm() + b.norm()).max(1.0));
        prop_assert!((x.mul(y).to_c64() - a * b).norm() <= 1e-14 * (a * b).norm().max(1e-300));
    }

    #[test]
    fn wronskian_is_antisymmetric_and_bilinear(f0 in c64(), f1 in c64(), g0 in c64(), g1 in c64(), k in c64()) {
        let f = [Scaled::from(f0), Scaled::from(f1)];
        let g = [Scaled::from(g0), Scaled::from(g1)];
        let a = wronskian_values(f, g);
        let b = wronskian_values(g, f);
        prop_assert!(a.add(b).abs() <= 1e-13 * (f0.norm() * g1.norm() + f1.norm() * g0.norm()).max(1e-300));
        let kf = [f[0].mul_c(k), f[1].mul_c(k)];
        let d = wronskian_values(kf, g).sub(a.mul_c(k));
        prop_assert!(d.abs() <= 1e-13 * k.norm() * (f0.norm() * g1.norm() + f1.norm() * g0.norm()).max(1e-300));
    }

    #[test]
    fn periodic_coefficients_are_linear(f0 in c64(), f1 in c64(), g0 in c64(), g1 in c64(), a in c64(), b in c64(), s in -200.0f64..200.0) {
        let det = f1 * g0 - f0 * g1;
        prop_assume!(det.norm() > 1e-2 * (f1.norm() * g0.norm() + f0.norm() * g1.norm()));
        let f = [Scaled::new(f0, s), Scaled::new(f1, s)];
        let g = [Scaled::new(g0, s), Scaled::new(g1, s)];
        let psi = [f[0].mul_c(a).add(g[0].mul_c(b)), f[1].mul_c(a).add(g[1].mul_c(b))];
        let pc = periodic_coefficients(psi, f, g).unwrap();
        let scale = a.norm() + b.norm();
        prop_assert!((pc.a - a).norm() <= 1e-10 * scale.max(1e-3));
        prop_assert!((pc.b - b).norm() <= 1e-10 * scale.max(1e-3));
    }

    #[test]
    fn airy_family_sums_to_zero(r in 0.0f64..15.0, t in -PI..PI) {
        let z = C64::from_polar(r, t);
        let w: Vec<Scaled> = (0..3).map(|j| { let v = w_j(j, z); Scaled::new(v.value, v.log_scale) }).collect();
        let m = w.iter().map(|x| x.ln_abs()).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(w[0].add(w[1]).add(w[2]).ln_abs() - m <= (1e-11f64).ln());
    }
}
