use aelab::padic_matrices::{
    brute_force_mass, brute_force_mass_with, det_valuation_is, elementary_divisor_type,
    stratum_coset_count, stratum_mass, total_mass_check, unit_group_mass, FiniteLevelMatrix,
    PadicStratum,
};
use aelab::tail_equivalence::{
    build_certificate, cylinder_measure, verify_certificate, CylinderSet, FactorSpace, ProductSpace,
    RatioCertificate,
};
use aelab::number_field_primes::FieldSpec;
use aelab::{Error, Execution};

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn valuation(mut n: u64, p: u64) -> u32 {
    let mut v = 0;
    while n.is_multiple_of(p) {
        n /= p;
        v += 1;
    }
    v
}

/// List every Hermite form `[[d1, c], [0, d2]]` of determinant `p^(a+b)`
/// and keep the ones whose entry gcd is exactly `p^a`.
fn hnf_listing_count(p: u64, a: u32, b: u32) -> u128 {
    let n = p.pow(a + b);
    let mut count = 0;
    for i in 0..=(a + b) {
        let d1 = p.pow(i);
        let d2 = n / d1;
        for c in 0..d2 {
            if valuation(gcd(gcd(d1, c), d2), p) == a {
                count += 1;
            }
        }
    }
    count
}

#[test]
fn coset_counts_match_hnf_listing() {
    for p in [2_u64, 3, 5, 7, 11, 13] {
        for n in 0..=6 {
            for a in 0..=n / 2 {
                let b = n - a;
                if p.pow(n) > 2_000_000 {
                    continue;
                }
                assert_eq!(stratum_coset_count(p, a, b).unwrap(), hnf_listing_count(p, a, b), "p={p} ({a},{b})");
            }
        }
    }
}

#[test]
fn coset_count_closed_form() {
    for p in [2_u64, 3, 7] {
        for a in 0..4 {
            assert_eq!(stratum_coset_count(p, a, a).unwrap(), 1);
            for b in a + 1..a + 5 {
                let expected = (p as u128).pow(b - a - 1) * (p as u128 + 1);
                assert_eq!(stratum_coset_count(p, a, b).unwrap(), expected);
            }
        }
    }
}

/// Count level-2 residues directly: `det` a unit, and `det` of valuation 1
/// with some entry a unit.
fn level_two_fractions(p: u64) -> (f64, f64) {
    let m = p * p;
    let (mut unit, mut type01, mut total) = (0_u64, 0_u64, 0_u64);
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    total += 1;
                    let det = (a * d + m * m - b * c % m) % m;
                    let entries_unit = [a, b, c, d].iter().any(|&x| x % p != 0);
                    if !det.is_multiple_of(p) {
                        unit += 1;
                    } else if !det.is_multiple_of(m) && entries_unit {
                        type01 += 1;
                    }
                }
            }
        }
    }
    (unit as f64 / total as f64, type01 as f64 / total as f64)
}

#[test]
fn haar_masses_match_direct_count() {
    for p in [2_u64, 3] {
        let (unit, type01) = level_two_fractions(p);
        assert!((stratum_mass(p, 2.0, 0, 0).unwrap() - unit).abs() < 1e-15);
        assert!((stratum_mass(p, 2.0, 0, 1).unwrap() - type01).abs() < 1e-15);
        let enumerated = brute_force_mass(p, 2, |m| elementary_divisor_type(m) == PadicStratum::Resolved { a: 0, b: 1 }, 2.0).unwrap();
        assert!((enumerated - type01).abs() < 1e-15);
    }
    assert_eq!(stratum_mass(2, 2.0, 0, 0).unwrap(), 0.375);
    assert_eq!(stratum_mass(2, 2.0, 0, 1).unwrap(), 0.28125);
}

#[test]
fn scaling_law_at_level_three() {
    // Multiplying by diag(1, p) maps the unit stratum onto (0, 1), scaling
    // Haar mass by p^-2 and the count of cosets by p + 1.
    let p = 2;
    let unit = brute_force_mass(p, 3, det_valuation_is(0), 2.0).unwrap();
    let one = brute_force_mass(p, 3, det_valuation_is(1), 2.0).unwrap();
    assert!((one - unit * (p + 1) as f64 / (p * p) as f64).abs() < 1e-15);
}

#[test]
fn stratified_masses_reproduce_formula() {
    for beta in [1.3, 1.7] {
        for &(a, b) in &[(0, 0), (0, 1), (1, 1)] {
            let target = PadicStratum::Resolved { a, b };
            let seq = brute_force_mass_with(3, 3, |m| elementary_divisor_type(m) == target, beta, Execution::Sequential).unwrap();
            let par = brute_force_mass_with(3, 3, |m| elementary_divisor_type(m) == target, beta, Execution::Parallel).unwrap();
            assert_eq!(seq, par);
            assert!((seq - stratum_mass(3, beta, a, b).unwrap()).abs() < 1e-14);
        }
    }
}

#[test]
fn brute_force_limits() {
    assert!(matches!(brute_force_mass(5, 4, |_| true, 2.0), Err(Error::ResourceLimit { .. })));
    assert!(matches!(brute_force_mass(4, 1, |_| true, 2.0), Err(Error::Validation(_))));
}

#[test]
fn tail_cells_are_not_classified() {
    let m = FiniteLevelMatrix::new(2, 2, [2, 0, 0, 2]);
    assert_eq!(elementary_divisor_type(&m), PadicStratum::Tail(2));
    let m = FiniteLevelMatrix::new(2, 3, [2, 0, 0, 2]);
    assert_eq!(elementary_divisor_type(&m), PadicStratum::Resolved { a: 1, b: 1 });
}

#[test]
fn mass_sum_matches_local_zeta_oracle() {
    // sum over (a, b) of N(a,b) p^{-(a+b) beta} is the product of
    // (1 - p^-beta)^-1 (1 - p^(1-beta))^-1, so the strata sum to one.
    for p in [2_u64, 3, 5, 7] {
        for beta in [1.5, 2.0, 3.0] {
            let cutoff = 40;
            let check = total_mass_check(p, beta, cutoff).unwrap();
            let pf = p as f64;
            let tail_ratio = pf.powf(1.0 - beta);
            let expected_gap = tail_ratio.powi(cutoff as i32 + 1) * 4.0 + 1e-15;
            assert!(check.gap_to_one <= expected_gap, "p={p} beta={beta}: {}", check.gap_to_one);
            let direct: f64 = (0..=cutoff)
                .flat_map(|n| (0..=n / 2).map(move |a| (a, n - a)))
                .map(|(a, b)| stratum_coset_count(p, a, b).unwrap() as f64 * pf.powf(-((a + b) as f64) * beta))
                .sum::<f64>()
                * unit_group_mass(p, beta);
            assert!((direct - check.partial_sum).abs() < 1e-12);
        }
    }
    assert!(matches!(total_mass_check(2, 1.0, 12), Err(Error::Divergent(_))));
}

#[test]
fn cylinder_measure_is_multiplicative() {
    let mut spaces = ProductSpace::default();
    for (i, norm) in [2_u64, 3, 5, 7].iter().enumerate() {
        spaces.insert(i, FactorSpace::new(*norm, 1.5).unwrap());
    }
    let z1 = CylinderSet::new([(0, 2), (2, 0)]);
    let z2 = CylinderSet::new([(1, 1), (3, 4)]);
    let joint = cylinder_measure(&spaces, &z1.join(&z2).unwrap()).unwrap();
    let product = cylinder_measure(&spaces, &z1).unwrap() * cylinder_measure(&spaces, &z2).unwrap();
    assert!((joint - product).abs() < 1e-16);
    let w = |n: u64, k: i32| (1.0 - (n as f64).powf(-1.5)) * (n as f64).powf(-1.5 * k as f64);
    assert!((cylinder_measure(&spaces, &z1).unwrap() - w(2, 2) * w(5, 0)).abs() < 1e-16);
    let missing = CylinderSet::new([(9, 0)]);
    assert!(matches!(cylinder_measure(&spaces, &missing), Err(Error::MissingFactor(9))));
}

#[test]
fn certificate_ratios_are_exact() {
    let cert = build_certificate(FieldSpec::rationals(), 1.0, 2.0, 0.5, 50).unwrap();
    let spaces = ProductSpace::for_certificate(&cert).unwrap();
    let report = verify_certificate(&cert, &spaces, 0.0).unwrap();
    assert_eq!(report.blocks.len(), 50);
    for b in &report.blocks {
        let expected = b.q_norm as f64 / b.p_norm as f64;
        assert!((b.ratio - expected).abs() <= 1e-14 * expected);
        assert!(b.ratio > 1.5 && b.ratio < 2.5);
    }
    assert!(report.overlapping_places.is_empty());
    assert!(report.pass);
}

#[test]
fn certificate_json_round_trip_and_defaults() {
    let cert = build_certificate(FieldSpec::quadratic(-1).unwrap(), 1.0, 2.0, 0.3, 12).unwrap();
    let text = serde_json::to_string(&cert).unwrap();
    let back: RatioCertificate = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cert);
    let bare = r#"{"beta":2,"lambda":3,"eps":0.5,"blocks":[{"p_norm":5,"q_norm":9},{"p_norm":7,"q_norm":12}]}"#;
    let cert: RatioCertificate = serde_json::from_str(bare).unwrap();
    assert_eq!((cert.blocks[1].p_place, cert.blocks[1].q_place), (2, 3));
    let spaces = ProductSpace::for_certificate(&cert).unwrap();
    let report = verify_certificate(&cert, &spaces, 0.0).unwrap();
    assert!((report.blocks[0].ratio - (9.0_f64 / 5.0).powi(2)).abs() < 1e-14 * 3.24);
}

#[test]
fn overlapping_places_are_reported() {
    let bare = r#"{"beta":1,"lambda":2,"eps":0.5,"blocks":[
        {"p_norm":5,"q_norm":11,"p_place":0,"q_place":1},
        {"p_norm":5,"q_norm":11,"p_place":0,"q_place":2}]}"#;
    let cert: RatioCertificate = serde_json::from_str(bare).unwrap();
    let spaces = ProductSpace::for_certificate(&cert).unwrap();
    let report = verify_certificate(&cert, &spaces, 0.0).unwrap();
    assert_eq!(report.overlapping_places, vec![0]);
    assert!(!report.pass);
}
