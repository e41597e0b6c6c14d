use ifsdim::dimension::{cover_sum, predict_dimensions};
use ifsdim::families::{make_gauss, make_linear_power};
use ifsdim::ifs_core::{cylinder_interval, cylinder_length_bounds, project_point, DSystem, DigitWord};
use ifsdim::measures::frostman_build;
use ifsdim::restrictions::{count_restricted_words, enumerate_restricted_words, Phi};
use proptest::prelude::*;

fn systems() -> Vec<DSystem> {
    vec![make_gauss(), make_linear_power(2.0).unwrap(), make_linear_power(3.5).unwrap()]
}

fn word() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(1u64..60, 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn children_nest_and_are_disjoint(digits in word(), a in 1u64..40, b in 1u64..40) {
        prop_assume!(a != b);
        for sys in systems() {
            let parent = DigitWord::new(digits.clone()).unwrap();
            let p = cylinder_interval(&sys, &parent).unwrap();
            let ca = cylinder_interval(&sys, &parent.child(a).unwrap()).unwrap();
            let cb = cylinder_interval(&sys, &parent.child(b).unwrap()).unwrap();
            prop_assert!(p.contains(&ca) && p.contains(&cb));
            prop_assert!(ca.interior_disjoint(&cb));
            // Float enclosures may overlap only by rounding.
            let overlap = ca.hi.min(cb.hi) - ca.lo.max(cb.lo);
            prop_assert!(overlap <= 1e-15, "overlap {overlap}");
            prop_assert!(p.lo <= ca.lo && ca.hi <= p.hi);
            prop_assert!(ca.length() < p.length());
        }
    }

    #[test]
    fn lengths_sit_between_bounds(digits in word()) {
        for sys in systems() {
            let w = DigitWord::new(digits.clone()).unwrap();
            let c = cylinder_interval(&sys, &w).unwrap();
            let b = cylinder_length_bounds(&sys, &w).unwrap();
            let tol = 1e-12 * digits.len() as f64;
            prop_assert!(b.ln_lower <= c.ln_length() + tol, "{} > {}", b.ln_lower, c.ln_length());
            prop_assert!(c.ln_length() <= b.ln_upper + tol);
        }
    }

    #[test]
    fn projection_stays_in_cylinder(digits in word(), tail in 1u64..30) {
        for sys in systems() {
            let w = DigitWord::new(digits.clone()).unwrap();
            let c = cylinder_interval(&sys, &w).unwrap();
            let p = project_point(&sys, &w.child(tail).unwrap()).unwrap();
            let slack = 1e-12;
            prop_assert!(p.point >= c.lo - slack && p.point <= c.hi + slack);
        }
    }

    #[test]
    fn enumerator_agrees_with_counter(beta in 1.0f64..2.5, depth in 1usize..4, cap in 1u64..25, strict in any::<bool>()) {
        let phi = Phi::linear(beta).unwrap();
        let listed = enumerate_restricted_words(&phi, depth, cap, strict).unwrap();
        let mut n = 0u128;
        for w in listed {
            prop_assert_eq!(w.len(), depth);
            for pair in w.digits().windows(2) {
                prop_assert!(phi.allows(pair[0], pair[1], strict).unwrap());
            }
            n += 1;
        }
        prop_assert_eq!(n, count_restricted_words(&phi, depth, cap, strict).unwrap());
    }

    #[test]
    fn depth_one_cover_sum_is_sum_of_lengths(s in 0.3f64..1.0, cap in 2u64..200) {
        let g = make_gauss();
        let phi = Phi::linear(1.0).unwrap();
        let direct: f64 = (1..=cap).map(|i| (1.0 / (i as f64 * (i + 1) as f64)).powf(s)).sum();
        let c = cover_sum(&g, &phi, 1, s, cap).unwrap();
        prop_assert!((c.value - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn hausdorff_never_exceeds_packing(d in 1.01f64..6.0, alpha in 1.0f64..6.0, s0 in 0.0f64..1.0, gl in any::<bool>()) {
        for phi in [Phi::linear(alpha).unwrap(), Phi::power(alpha.max(1.0001)).unwrap()] {
            let p = predict_dimensions(d, &phi, s0, gl).unwrap();
            prop_assert!(p.hausdorff.upper() <= p.packing + 1e-15);
            prop_assert!(p.packing >= 1.0 / d);
        }
    }
}

#[test]
fn frostman_children_split_parent_mass() {
    let g = make_gauss();
    let phi = Phi::linear(1.0).unwrap();
    let m = frostman_build(&g, &phi, 0.1, 3).unwrap();
    let levels = m.levels();
    for a in levels[0].support.0..=levels[0].support.1 {
        let parent = DigitWord::new(vec![a]).unwrap();
        let children: f64 = (levels[1].support.0..=levels[1].support.1)
            .map(|b| m.mass(&parent.child(b).unwrap()).unwrap())
            .sum();
        assert!((children - m.mass(&parent).unwrap()).abs() < 1e-14);
    }
}
