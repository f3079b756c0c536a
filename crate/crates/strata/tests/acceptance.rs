//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Everything is exact rational arithmetic; "tolerance" is equality.

use std::collections::{BTreeMap, BTreeSet};
use strata::algebra::{
    boundary_divisor_split, class_from_string, class_to_string, multiply, pullback_add,
    pushforward_forget, standard_class, Space, StandardClass, TautClass,
};
use strata::graphs::{rooted_trees, rooted_trees_ne, GraphFilter, StableGraph};
use strata::hyperelliptic::{
    hyp_ct_formula, hyp_one, hyp_recursive, nct5_tail, nct_closed, nct_recursive, phigamma,
    spot_check_classes,
};
use strata::integrals::{integrate, pair_with_term, psi_integral, table};
use strata::rat::{factorial, rat, rat_i64, rat_to_string, Rat};
use strata::verify::{
    numerical_equal, suite_hyp, suite_nct, suite_pixton, suite_trees, vanishing_proxy_n7,
    VerdictStatus,
};
use num_traits::Zero;

fn criterion(id: &str, pass: bool, detail: &str) {
    println!("{} {} {}", id, if pass { "PASS" } else { "FAIL" }, detail);
    assert!(pass, "{} failed: {}", id, detail);
}

#[test]
fn a01_tree_sums() {
    let start = std::time::Instant::now();
    for n in 2..=8u32 {
        let mut total = rat_i64(0);
        for t in rooted_trees(n) {
            total += rat_i64(if t.edges.len() % 2 == 1 { -1 } else { 1 });
        }
        let expect = factorial(n - 1) * rat_i64(if n % 2 == 1 { -1 } else { 1 });
        assert_eq!(total, expect, "alternating sum at n={}", n);
    }
    for n in 3..=8u32 {
        let mut total = 0i64;
        for t in rooted_trees_ne(n) {
            total += if t.edges.len() % 2 == 1 { -1 } else { 1 };
        }
        assert_eq!(total, 0, "restricted-family sum at n={}", n);
    }
    criterion(
        "A1",
        true,
        &format!("tree sums n<=8 in {:.1}s", start.elapsed().as_secs_f64()),
    );
}

#[test]
fn a02_euler_integrals() {
    let start = std::time::Instant::now();
    let results = suite_trees();
    for r in results.iter().filter(|r| r.id.starts_with("euler-")) {
        assert!(r.pass, "{}", r.line());
    }
    criterion(
        "A2",
        true,
        &format!("euler integrals n=3..6 in {:.1}s", start.elapsed().as_secs_f64()),
    );
}

#[test]
fn a03_tree_class_identities() {
    let results = suite_trees();
    let mut seen = 0;
    for r in results
        .iter()
        .filter(|r| r.id.starts_with("pullback-") || r.id.starts_with("family-"))
    {
        assert!(r.pass, "{}", r.line());
        seen += 1;
    }
    criterion("A3", seen == 6, &format!("{} definitive identities", seen));
}

#[test]
fn a04_dvv_audit() {
    let start = std::time::Instant::now();
    // genus 0 closed form, exhaustively to n = 8
    fn vectors(n: usize, d: u32) -> Vec<Vec<u32>> {
        if n == 1 {
            return vec![vec![d]];
        }
        let mut out = Vec::new();
        for first in 0..=d {
            for mut rest in vectors(n - 1, d - first) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }
    for n in 3..=8u32 {
        for v in vectors(n as usize, n - 3) {
            let expect = {
                let mut x = factorial(n - 3);
                for &a in &v {
                    x /= factorial(a);
                }
                x
            };
            assert_eq!(psi_integral(0, &v), expect, "closed form at {:?}", v);
        }
    }
    assert_eq!(psi_integral(1, &[1]), rat(1, 24));
    // populate some higher-genus entries, then audit every memoized entry
    let _ = psi_integral(2, &[4]);
    let _ = psi_integral(2, &[0, 1, 4]);
    let _ = psi_integral(2, &[2, 3]);
    let _ = psi_integral(1, &[0, 0, 2]);
    let entries = table().entries();
    assert!(!entries.is_empty());
    for ((g, a), v) in &entries {
        // string
        let mut with0 = a.clone();
        with0.push(0);
        let lhs = psi_integral(*g, &with0);
        let mut rhs = Rat::zero();
        for j in 0..a.len() {
            if a[j] == 0 {
                continue;
            }
            let mut red = a.clone();
            red[j] -= 1;
            rhs += psi_integral(*g, &red);
        }
        assert_eq!(lhs, rhs, "string at g={} a={:?}", g, a);
        // dilaton
        let mut with1 = a.clone();
        with1.push(1);
        let lhs = psi_integral(*g, &with1);
        let factor = rat_i64(2 * *g as i64 - 2 + a.len() as i64);
        assert_eq!(lhs, factor * v.clone(), "dilaton at g={} a={:?}", g, a);
    }
    criterion(
        "A4",
        true,
        &format!(
            "closed form n<=8, string+dilaton on {} entries in {:.1}s",
            entries.len(),
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn a05_pixton_exponential() {
    let start = std::time::Instant::now();
    let results = suite_pixton();
    for r in &results {
        assert!(r.pass, "{}", r.line());
    }
    criterion(
        "A5",
        true,
        &format!("{} exact power checks in {:.1}s", results.len(), start.elapsed().as_secs_f64()),
    );
}

#[test]
fn a06_seed_class() {
    criterion("A6", hyp_ct_formula(1) == hyp_one(), "3 psi - lambda - delta_1, term for term");
}

#[test]
fn a07_main_chain() {
    let max_n: u32 = std::env::var("STRATA_MAX_N")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    for n in 2..=max_n.min(4) {
        let v = numerical_equal(&strata::hyperelliptic::hyp_tilde_formula(n, false), &hyp_recursive(n));
        criterion(
            &format!("A7.n{}", n),
            v.status == VerdictStatus::NumericallyEquivalent,
            &format!("graph formula vs recursion in {:.1}s", v.seconds),
        );
    }
}

#[test]
fn a08_pushforwards() {
    let max_n: u32 = std::env::var("STRATA_MAX_N")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    for n in 2..=max_n.min(4) {
        let down = pushforward_forget(&hyp_recursive(n), n);
        let expect = hyp_recursive(n - 1).scale(&rat_i64(7 - n as i64));
        let v = numerical_equal(&down, &expect);
        criterion(
            &format!("A8.hyp-n{}", n),
            v.passed(),
            &format!("one-point pushforward = {} x previous", 7 - n as i64),
        );
    }
    for n in 3..=(max_n + 1).min(5) {
        let lhs = strata::hyperelliptic::push_and_relabel(&phigamma(n), n - 1, n);
        let rhs = phigamma(n - 1).scale(&rat_i64(8 - n as i64));
        let v = numerical_equal(&lhs, &rhs);
        criterion(
            &format!("A8.correction-n{}", n),
            v.passed(),
            &format!("correction pushforward = {} x previous", 8 - n as i64),
        );
    }
}

#[test]
fn a09_symmetry() {
    let max_n: u32 = std::env::var("STRATA_MAX_N")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    for n in 2..=max_n.min(4) {
        let h = hyp_recursive(n);
        for i in 1..n {
            let map: BTreeMap<u32, u32> = [(i, i + 1), (i + 1, i)].into_iter().collect();
            let v = numerical_equal(&h, &h.relabel(&map));
            criterion(
                &format!("A9.n{}-swap{}{}", n, i, i + 1),
                v.passed(),
                "asymmetric representative, symmetric class",
            );
        }
    }
}

#[test]
fn a10_nct_closed_forms() {
    assert_eq!(nct_closed(2), nct_recursive(2));
    for n in [3u32, 4] {
        let v = numerical_equal(&nct_closed(n), &nct_recursive(n));
        criterion(
            &format!("A10.n{}", n),
            v.passed(),
            &format!("closed form vs recursion in {:.1}s", v.seconds),
        );
    }
    // the five-point spot check: the final strata group pairs to zero with
    // both lambda-decorated boundary classes
    let tail = nct5_tail();
    let (t1, t2) = spot_check_classes();
    for (name, t) in [("a", t1), ("b", t2)] {
        let mut v = Rat::zero();
        for (tt, c) in &t.terms {
            v += c * pair_with_term(&tail, tt);
        }
        criterion(
            &format!("A10.spot-{}", name),
            v.is_zero(),
            &format!("pairing = {}", rat_to_string(&v)),
        );
    }
}

#[test]
#[ignore = "compact-type vanishing proxy on seven points; runs for hours, see README"]
fn a11_vanishing_proxy() {
    let r = vanishing_proxy_n7();
    criterion("A11", r.pass, &r.line());
}

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 33
    }
    fn small(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.next() % ((hi - lo + 1) as u64)) as i64
    }
}

/// A pseudorandom divisor class: psi, kappa_1, lambda, boundary pieces.
fn random_divisor(space: &Space, rng: &mut Lcg) -> TautClass {
    let mut cls = TautClass::zero(space);
    for i in space.marks.clone() {
        cls = cls.add(&standard_class(space, StandardClass::Psi(i)).scale(&rat_i64(rng.small(-2, 2))));
    }
    cls = cls.add(&standard_class(space, StandardClass::Kappa(1)).scale(&rat_i64(rng.small(-2, 2))));
    cls = cls.add(&standard_class(space, StandardClass::Lambda).scale(&rat_i64(rng.small(-2, 2))));
    cls = cls.add(&standard_class(space, StandardClass::DeltaTotal).scale(&rat_i64(rng.small(-2, 2))));
    cls
}

#[test]
fn a12_infrastructure() {
    let start = std::time::Instant::now();
    let mut rng = Lcg(0x5eed);
    // commutativity and associativity on random divisor triples
    for (g, n) in [(0u32, 5u32), (1, 2), (2, 1)] {
        let space = Space::new(g, n);
        for _ in 0..3 {
            let a = random_divisor(&space, &mut rng);
            let b = random_divisor(&space, &mut rng);
            let c = random_divisor(&space, &mut rng);
            let ab = multiply(&a, &b);
            assert_eq!(ab, multiply(&b, &a), "commutativity on ({},{})", g, n);
            assert_eq!(
                multiply(&ab, &c),
                multiply(&a, &multiply(&b, &c)),
                "associativity on ({},{})",
                g,
                n
            );
        }
    }
    // projection formula
    for (g, n) in [(0u32, 5u32), (1, 2), (2, 1)] {
        let hi = Space::new(g, n);
        let lo = Space::with_marks(g, (1..n).collect::<BTreeSet<u32>>());
        if !lo.is_stable() || lo.dim() < 0 {
            continue;
        }
        for _ in 0..2 {
            let a = random_divisor(&lo, &mut rng);
            let mut b = random_divisor(&hi, &mut rng);
            // bring b to complementary top degree
            for _ in 0..(hi.dim() - 2).max(0) {
                b = multiply(&b, &random_divisor(&hi, &mut rng));
            }
            let lhs = integrate(&multiply(&pullback_add(&a, n), &b));
            let rhs = integrate(&multiply(&a, &pushforward_forget(&b, n)));
            assert_eq!(lhs, rhs, "projection formula on ({},{})", g, n);
        }
    }
    // pullback then pushforward vanishes
    for (g, n) in [(0u32, 4u32), (1, 1), (2, 1)] {
        let space = Space::new(g, n);
        let a = random_divisor(&space, &mut rng);
        let up = pullback_add(&a, n + 1);
        assert!(pushforward_forget(&up, n + 1).is_zero());
    }
    // serialization round trips byte for byte
    for cls in [
        hyp_ct_formula(1),
        phigamma(2),
        standard_class(&Space::new(2, 2), StandardClass::Lambda),
    ] {
        let s1 = class_to_string(&cls);
        let back = class_from_string(&s1).unwrap();
        assert_eq!(class_to_string(&back), s1);
        assert_eq!(back, cls);
    }
    // graph record round trip
    let banana = StableGraph {
        genus: vec![1, 0],
        legs: vec![(1, 1), (2, 1)],
        edges: vec![(0, 1), (0, 1)],
    };
    let line = banana.record(2);
    let (parsed, aut) = StableGraph::parse_record(&line).unwrap();
    assert_eq!(parsed.canonicalize().graph, banana.canonicalize().graph);
    assert_eq!(aut, 2);
    // intersection-table persistence round trip
    let _ = psi_integral(2, &[0, 5]);
    let path = std::env::temp_dir().join("strata_acceptance_table.txt");
    table().save(&path).unwrap();
    let before = table().entries();
    table().clear();
    table().load(&path).unwrap();
    assert_eq!(before, table().entries());
    std::fs::remove_file(&path).ok();
    criterion(
        "A12",
        true,
        &format!("infrastructure properties in {:.1}s", start.elapsed().as_secs_f64()),
    );
}

#[test]
fn cross_checks_divisor_examples() {
    // the examples pinned by hand: boundary self-pairing and the one-point
    // class representation
    let sp5 = Space::new(0, 5);
    let d = boundary_divisor_split(&sp5, 0, &[1, 2].into_iter().collect());
    assert_eq!(strata::integrals::pair(&d, &d), rat_i64(-1));
    let seed = hyp_one();
    assert_eq!(seed.terms.len(), 3);
    let nct = suite_nct(2);
    for r in &nct {
        assert!(r.pass, "{}", r.line());
    }
}
