use std::collections::BTreeMap;

use aelab::hecke_engine::{
    convexity_excess, convolve, convolve_with, degree, degree_table, hecke_apply, represent,
    HeckeElement, IntegerMatrix, SmithLabel,
};
use aelab::modular_surface::{
    equidistribution_test, hecke_points, hecke_points_with, hyperbolic_mass, mobius,
    reduce_to_fundamental_domain, six_box_partition, DomainBox, MobiusAction, Point,
};
use aelab::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

fn sigma(n: u64) -> u64 {
    (1..=n).filter(|d| n.is_multiple_of(*d)).sum()
}

/// Smith form by explicit row and column Euclidean steps.
fn smith_by_reduction(m: [[i64; 2]; 2]) -> (i64, i64) {
    let mut m = m;
    loop {
        // bring the smallest nonzero entry to (0, 0)
        let (mut bi, mut bj) = (0, 0);
        for i in 0..2 {
            for j in 0..2 {
                if m[i][j] != 0 && (m[bi][bj] == 0 || m[i][j].abs() < m[bi][bj].abs()) {
                    bi = i;
                    bj = j;
                }
            }
        }
        m.swap(0, bi);
        for row in m.iter_mut() {
            row.swap(0, bj);
        }
        let pivot = m[0][0];
        let q = m[1][0] / pivot;
        m[1][0] -= q * pivot;
        m[1][1] -= q * m[0][1];
        let q = m[0][1] / pivot;
        m[0][1] -= q * pivot;
        m[1][1] -= q * m[1][0];
        if m[1][0] == 0 && m[0][1] == 0 {
            if m[1][1] % pivot == 0 {
                return (pivot.abs(), m[1][1].abs());
            }
            m[0][1] = m[1][1];
        }
    }
}

#[test]
fn smith_labels_match_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 2000 {
        let e: [i64; 4] = std::array::from_fn(|_| rng.gen_range(-40..=40));
        let det = e[0] * e[3] - e[1] * e[2];
        if det <= 0 {
            continue;
        }
        let g = IntegerMatrix::new(e[0], e[1], e[2], e[3]).unwrap();
        let (d1, d2) = smith_by_reduction([[e[0], e[1]], [e[2], e[3]]]);
        let label = g.smith_label();
        assert_eq!((label.d1 as i64, label.d2 as i64), (d1, d2), "{e:?}");
        checked += 1;
    }
}

/// Hermite forms `[[a, b], [0, d]]`, `ad = n`, `0 <= b < d`, with entry gcd
/// `d1` and determinant `n`.
fn hnf_classes(d1: i64, d2: i64) -> Vec<[i64; 4]> {
    let n = d1 * d2;
    let mut out = Vec::new();
    for a in 1..=n {
        if n % a != 0 {
            continue;
        }
        let d = n / a;
        for b in 0..d {
            if gcd(gcd(a, b), d) == d1 {
                out.push([a, b, 0, d]);
            }
        }
    }
    out
}

#[test]
fn degree_of_prime_double_cosets() {
    for p in (2..=100).filter(|&p| is_prime(p)) {
        let g = IntegerMatrix::diag(1, p as i64);
        assert_eq!(degree(&g).unwrap(), p + 1);
        assert_eq!(hnf_classes(1, p as i64).len() as u64, p + 1);
    }
}

#[test]
fn degree_sums_are_divisor_sums() {
    for n in 1..=200 {
        let table = degree_table(n).unwrap();
        assert_eq!(table.values().sum::<u64>(), sigma(n), "n = {n}");
        for (label, deg) in &table {
            assert_eq!(*deg as usize, hnf_classes(label.d1 as i64, label.d2 as i64).len());
        }
    }
}

fn same_class(m: [i64; 4], target: [i64; 4]) -> bool {
    // Gamma m = Gamma t iff m t^{-1} is integral (determinants agree).
    let det = target[0] * target[3] - target[1] * target[2];
    let adj = [target[3], -target[1], -target[2], target[0]];
    let prod = [
        m[0] * adj[0] + m[1] * adj[2],
        m[0] * adj[1] + m[1] * adj[3],
        m[2] * adj[0] + m[3] * adj[2],
        m[2] * adj[1] + m[3] * adj[3],
    ];
    prod.iter().all(|x| x % det == 0)
}

fn mul(x: [i64; 4], y: [i64; 4]) -> [i64; 4] {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

/// `[a] * [b] = sum_c m_c [c]`, `m_c = #{(i, j) : Gamma alpha_i beta_j = Gamma c}`.
fn brute_convolution(a: (i64, i64), b: (i64, i64)) -> BTreeMap<(i64, i64), i64> {
    let left = hnf_classes(a.0, a.1);
    let right = hnf_classes(b.0, b.1);
    let n = a.0 * a.1 * b.0 * b.1;
    let mut out = BTreeMap::new();
    for d1 in (1..=n).filter(|d| n % d == 0) {
        let d2 = n / d1;
        if d2 % d1 != 0 {
            continue;
        }
        let target = [d1, 0, 0, d2];
        let count = left
            .iter()
            .flat_map(|x| right.iter().map(move |y| mul(*x, *y)))
            .filter(|m| same_class(*m, target))
            .count() as i64;
        if count > 0 {
            out.insert((d1, d2), count);
        }
    }
    out
}

fn labels_up_to(det_max: u64) -> Vec<SmithLabel> {
    (1..=det_max)
        .flat_map(|n| degree_table(n).unwrap().into_keys())
        .collect()
}

#[test]
fn convolution_matches_brute_force() {
    let t2 = HeckeElement::basis(SmithLabel::new(1, 2).unwrap());
    let sq = convolve(&t2, &t2).unwrap();
    let expected = HeckeElement::from_terms([(SmithLabel::new(1, 4).unwrap(), 1), (SmithLabel::new(2, 2).unwrap(), 3)]);
    assert_eq!(sq, expected);
    for a in labels_up_to(12) {
        for b in labels_up_to(12) {
            if a.det() * b.det() > 72 {
                continue;
            }
            let got = convolve(&HeckeElement::basis(a), &HeckeElement::basis(b)).unwrap();
            let want = brute_convolution((a.d1 as i64, a.d2 as i64), (b.d1 as i64, b.d2 as i64));
            let got: BTreeMap<(i64, i64), i64> = got.terms().map(|(l, c)| ((l.d1 as i64, l.d2 as i64), c)).collect();
            assert_eq!(got, want, "{a} * {b}");
        }
    }
}

#[test]
fn convolution_is_associative_and_parallel_safe() {
    let labels = labels_up_to(36);
    for &x in &labels {
        for &y in &labels {
            if x.det() * y.det() > 36 {
                continue;
            }
            let (ex, ey) = (HeckeElement::basis(x), HeckeElement::basis(y));
            let xy = convolve(&ex, &ey).unwrap();
            assert_eq!(xy, convolve_with(&ex, &ey, Execution::Sequential).unwrap());
            for &z in &labels {
                if x.det() * y.det() * z.det() > 36 {
                    continue;
                }
                let ez = HeckeElement::basis(z);
                let left = convolve(&xy, &ez).unwrap();
                let right = convolve(&ex, &convolve(&ey, &ez).unwrap()).unwrap();
                assert_eq!(left, right, "({x} * {y}) * {z}");
            }
        }
    }
}

#[test]
fn hecke_element_json() {
    let e = HeckeElement::from_terms([(SmithLabel::new(1, 4).unwrap(), 1), (SmithLabel::new(2, 2).unwrap(), 3)]);
    let text = serde_json::to_string(&e).unwrap();
    assert_eq!(text, r#"{"1,4":1,"2,2":3}"#);
    let back: HeckeElement = serde_json::from_str(&text).unwrap();
    assert_eq!(back, e);
    assert!(serde_json::from_str::<HeckeElement>(r#"{"2,3":1}"#).is_err());
}

fn domain_function(z: &Point) -> f64 {
    let r = reduce_to_fundamental_domain(*z).unwrap().point;
    (3.0 * r.x).sin() + 1.0 / r.y
}

#[test]
fn hecke_apply_agrees_with_hecke_points() {
    let z = Point::new(0.1, 1.7).unwrap();
    for p in [2_u64, 3, 5, 7] {
        let via_apply = hecke_apply(&IntegerMatrix::diag(1, p as i64), domain_function, &[z], &MobiusAction).unwrap()[0];
        let pts = hecke_points(z, p).unwrap();
        assert_eq!(pts.len() as u64, p + 1);
        let via_points = pts.iter().map(|q| domain_function(&q.point())).sum::<f64>() / pts.len() as f64;
        assert!((via_apply - via_points).abs() < 1e-9);
    }
}

#[test]
fn representation_respects_products() {
    let points: Vec<Point> = [(0.2, 1.3), (-0.4, 2.2), (0.05, 0.9)].iter().map(|&(x, y)| Point::new(x, y).unwrap()).collect();
    let t2 = HeckeElement::basis(SmithLabel::new(1, 2).unwrap());
    let t3 = HeckeElement::basis(SmithLabel::new(1, 3).unwrap());
    for (a, b) in [(&t2, &t2), (&t2, &t3)] {
        let product = convolve(a, b).unwrap();
        let direct = represent(&product, domain_function, &points, &MobiusAction).unwrap();
        // R(a) R(b) f = R(a * b) f for functions on Gamma \ H
        let inner = |z: &Point| represent(b, domain_function, &[*z], &MobiusAction).unwrap()[0];
        let composed = represent(a, inner, &points, &MobiusAction).unwrap();
        for (x, y) in direct.iter().zip(&composed) {
            assert!((x - y).abs() < 1e-8 * x.abs().max(1.0), "{x} vs {y}");
        }
    }
}

#[test]
fn convexity_holds_for_random_functions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<Point> = (0..6).map(|_| Point::new(rng.gen_range(-0.5..0.5), rng.gen_range(0.6..3.0)).unwrap()).collect();
    for _ in 0..200 {
        let c: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let f = move |z: &Point| c[0] + c[1] * (5.0 * z.x).cos() + c[2] / z.y;
        for n in [2, 3, 4, 6] {
            assert!(convexity_excess(&IntegerMatrix::diag(1, n), f, &points, &MobiusAction).unwrap() <= 1e-12);
        }
    }
}

#[test]
fn reduction_lands_in_domain() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let z = Point::new(rng.gen_range(-50.0..50.0), rng.gen_range(1e-3..5.0)).unwrap();
        let r = reduce_to_fundamental_domain(z).unwrap();
        let w = r.point;
        assert!(w.x >= -0.5 && w.x < 0.5, "{w:?}");
        assert!(w.x * w.x + w.y * w.y >= 1.0 - 1e-9, "{w:?}");
        let again = reduce_to_fundamental_domain(w.point()).unwrap();
        assert!((again.point.x - w.x).abs() < 1e-12 && (again.point.y - w.y).abs() < 1e-12);
        let m = r.matrix;
        assert_eq!(m.det(), 1);
        let image = mobius(&m, &z);
        assert!((image.x - w.x).abs() < 1e-6 && (image.y - w.y).abs() < 1e-6 * w.y.max(1.0));
    }
}

/// Midpoint rule on `dx dy / y^2` over the box cut by `|z| >= 1`, with
/// `u = 1/y` on the unbounded top band.
fn grid_mass(b: &DomainBox) -> f64 {
    let nx = 2000;
    let ny = 2000;
    let hx = (b.x1 - b.x0) / nx as f64;
    let (u0, u1) = (if b.y1.is_finite() { 1.0 / b.y1 } else { 0.0 }, 1.0 / b.y0.max(0.5));
    let hu = (u1 - u0) / ny as f64;
    let mut total = 0.0;
    for i in 0..nx {
        let x = b.x0 + (i as f64 + 0.5) * hx;
        for j in 0..ny {
            let u = u0 + (j as f64 + 0.5) * hu;
            let y = 1.0 / u;
            if x * x + y * y >= 1.0 && y >= b.y0 {
                total += hx * hu;
            }
        }
    }
    total * 2.0 / (std::f64::consts::PI / 3.0)
}

#[test]
fn box_masses_match_grid_quadrature() {
    let full = hyperbolic_mass(&DomainBox::full_domain());
    assert!((full - 2.0).abs() < 1e-12);
    let boxes = six_box_partition();
    let total: f64 = boxes.iter().map(hyperbolic_mass).sum();
    assert!((total - 2.0).abs() < 1e-10);
    for b in boxes.iter().chain([DomainBox::new(-0.3, 0.1, 0.9, 1.2).unwrap()].iter()) {
        assert!((hyperbolic_mass(b) - grid_mass(b)).abs() < 2e-3, "{b:?}");
    }
}

#[test]
fn box_mass_is_invariant_under_reflection() {
    for b in six_box_partition() {
        let mirrored = DomainBox::new(-b.x1, -b.x0, b.y0, b.y1).unwrap();
        assert!((hyperbolic_mass(&b) - hyperbolic_mass(&mirrored)).abs() < 1e-12);
    }
}

#[test]
fn hecke_points_deterministic_across_modes() {
    let z = Point::new(0.0, 2.0).unwrap();
    for n in [12, 64, 97] {
        let seq = hecke_points_with(z, n, Execution::Sequential).unwrap();
        let par = hecke_points_with(z, n, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.len() as u64, sigma(n));
    }
}

#[test]
fn equidistribution_improves() {
    let z = Point::new(0.0, 2.0).unwrap();
    let report = equidistribution_test(z, 2, 8, &six_box_partition()).unwrap();
    assert!(report.discrepancy(8).unwrap() < report.discrepancy(2).unwrap());
    assert!(report.log_slope.unwrap() < 0.0);
    for row in &report.rows {
        assert_eq!(row.points as u64, sigma(2_u64.pow(row.n)));
        let mass: f64 = row.boxes.iter().map(|b| b.empirical).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }
}
