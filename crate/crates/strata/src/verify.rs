//! Equality verdicts by intersection pairing, and executable suites for the
//! identities the formulas are expected to satisfy. A difference of classes
//! is paired against every complementary-degree generator in canonical
//! order; genus 0 admits a definitive verdict, higher genus an honest
//! "numerically equivalent".

use crate::algebra::{multiply, pullback_add, Decoration, Space, Term, TautClass};
use crate::graphs::{
    rooted_trees, rooted_trees_b, rooted_trees_ne, root_flag, GraphFilter, StableGraph,
};
use crate::hyperelliptic::{
    hyp_ct_formula, hyp_one, hyp_recursive, hyp_rt_formula, hyp_tilde_formula, nct5_tail,
    nct_closed, nct_recursive, phigamma, pixton_exponential, push_and_relabel,
    spot_check_classes,
};
use crate::integrals::{
    complementary_generators, complementary_generators_filtered, integrate,
    pair_class_against_terms, pair_with_term,
};
use crate::par::map_collect;
use crate::rat::{factorial, rat_i64, rat_to_string, Rat};
use num_traits::Zero;
use std::collections::BTreeMap;
use std::time::Instant;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum VerdictStatus {
    EqualDefinitive,
    NumericallyEquivalent,
    Distinct,
    Skipped,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub status: VerdictStatus,
    /// first failing generator with the two pairing values
    pub witness: Option<(Term, Rat, Rat)>,
    pub seconds: f64,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(
            self.status,
            VerdictStatus::EqualDefinitive | VerdictStatus::NumericallyEquivalent
        )
    }
}

/// Pairs A - B against every complementary generator, in canonical order.
pub fn numerical_equal(a: &TautClass, b: &TautClass) -> Verdict {
    let start = Instant::now();
    assert_eq!(a.space, b.space, "ambient mismatch");
    let space = a.space.clone();
    let equal_status = if space.genus == 0 {
        VerdictStatus::EqualDefinitive
    } else {
        VerdictStatus::NumericallyEquivalent
    };
    let diff = a.sub(b);
    if diff.is_zero() {
        return Verdict {
            status: equal_status,
            witness: None,
            seconds: start.elapsed().as_secs_f64(),
        };
    }
    let degrees: Vec<i64> = {
        let mut ds: Vec<i64> = diff.terms.keys().map(|t| t.degree()).collect();
        ds.sort();
        ds.dedup();
        ds
    };
    for d in degrees {
        let gens = complementary_generators(&space, space.dim() - d);
        let part = diff.degree_part(d);
        let vals = pair_class_against_terms(&part, &gens);
        for (t, v) in gens.into_iter().zip(vals) {
            if !v.is_zero() {
                let va = pair_with_term(&a.degree_part(d), &t);
                let vb = pair_with_term(&b.degree_part(d), &t);
                return Verdict {
                    status: VerdictStatus::Distinct,
                    witness: Some((t, va, vb)),
                    seconds: start.elapsed().as_secs_f64(),
                };
            }
        }
    }
    Verdict {
        status: equal_status,
        witness: None,
        seconds: start.elapsed().as_secs_f64(),
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub suite: &'static str,
    pub id: String,
    pub pass: bool,
    pub seconds: f64,
    pub witness: Option<String>,
}

impl CheckResult {
    pub fn line(&self) -> String {
        let mut s = format!(
            "V {}/{} {} t={:.3}",
            self.suite,
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.seconds
        );
        if let Some(w) = &self.witness {
            s.push_str(&format!(" witness={}", w));
        }
        s
    }
}

fn check(suite: &'static str, id: String, start: Instant, pass: bool, witness: Option<String>) -> CheckResult {
    CheckResult {
        suite,
        id,
        pass,
        seconds: start.elapsed().as_secs_f64(),
        witness,
    }
}

fn verdict_check(suite: &'static str, id: String, v: &Verdict) -> CheckResult {
    CheckResult {
        suite,
        id,
        pass: v.passed(),
        seconds: v.seconds,
        witness: v.witness.as_ref().map(|(t, va, vb)| {
            format!(
                "{}<>{} on {}",
                rat_to_string(va),
                rat_to_string(vb),
                t.graph.record(t.graph.canonicalize().aut_count)
            )
        }),
    }
}

/// The class sum over a family of rooted trees of the per-vertex geometric
/// series 1/(psi_{h(v)} - 1) expanded to all degrees.
fn euler_tree_class(space: &Space, trees: &[StableGraph]) -> TautClass {
    let mut out = TautClass::zero(space);
    for t in trees {
        let nv = t.n_vertices();
        let sign = if nv % 2 == 1 { rat_i64(-1) } else { rat_i64(1) };
        let root_flags: Vec<crate::graphs::Flag> = (0..nv).map(|v| root_flag(t, v)).collect();
        let caps: Vec<i64> = (0..nv).map(|v| Space::vertex_dim(t, v)).collect();
        let mut stack: Vec<(usize, Decoration)> = vec![(0, Decoration::default())];
        while let Some((v, dec)) = stack.pop() {
            if v == nv {
                out.insert(t, dec, sign.clone());
                continue;
            }
            for k in 0..=caps[v].max(0) as u32 {
                let mut d2 = dec.clone();
                d2.add_psi(root_flags[v], k);
                stack.push((v + 1, d2));
            }
        }
    }
    out
}

fn tree_space(n: u32) -> Space {
    let mut marks: std::collections::BTreeSet<u32> = (1..=n).collect();
    marks.insert(crate::graphs::ROOT_MARK);
    Space::with_marks(0, marks)
}

pub fn suite_trees() -> Vec<CheckResult> {
    let mut out = Vec::new();
    // alternating edge-count sums
    for n in 2..=8u32 {
        let start = Instant::now();
        let mut total = rat_i64(0);
        for t in rooted_trees(n) {
            total += rat_i64(if t.edges.len() % 2 == 1 { -1 } else { 1 });
        }
        let expect = factorial(n - 1) * rat_i64(if n % 2 == 1 { -1 } else { 1 });
        out.push(check(
            "trees",
            format!("chi-n{}", n),
            start,
            total == expect,
            (total != expect).then(|| rat_to_string(&total)),
        ));
    }
    for n in 3..=8u32 {
        let start = Instant::now();
        let mut total = 0i64;
        for t in rooted_trees_ne(n) {
            total += if t.edges.len() % 2 == 1 { -1 } else { 1 };
        }
        out.push(check(
            "trees",
            format!("ne-n{}", n),
            start,
            total == 0,
            (total != 0).then(|| total.to_string()),
        ));
    }
    // the vanishing integral, with the per-tree value
    for n in 3..=6u32 {
        let start = Instant::now();
        let space = tree_space(n);
        let trees = rooted_trees_ne(n);
        let mut ok = true;
        let mut total = rat_i64(0);
        for t in &trees {
            let cls = euler_tree_class(&space, std::slice::from_ref(t));
            let v = integrate(&cls);
            let expect = rat_i64(if t.n_vertices() % 2 == 1 { -1 } else { 1 });
            if v != expect {
                ok = false;
            }
            total += v;
        }
        out.push(check(
            "trees",
            format!("euler-n{}", n),
            start,
            ok && total.is_zero(),
            (!total.is_zero()).then(|| rat_to_string(&total)),
        ));
    }
    // pullback identity as a definitive class identity
    for n in 3..=5u32 {
        let space_lo = tree_space(n - 1);
        let lhs = pullback_add(&euler_tree_class(&space_lo, &rooted_trees(n - 1)), n);
        let space_hi = tree_space(n);
        let rhs = euler_tree_class(&space_hi, &rooted_trees_ne(n));
        let v = numerical_equal(&lhs, &rhs);
        let mut r = verdict_check("trees", format!("pullback-n{}", n), &v);
        r.pass = v.status == VerdictStatus::EqualDefinitive;
        out.push(r);
    }
    // the recursive tree-family identity
    for n in 3..=5u32 {
        let space = tree_space(n);
        let lhs = euler_tree_class(&space, &rooted_trees_ne(n));
        let mut rhs = TautClass::zero(&space);
        for t in rooted_trees_b(n) {
            let sign = if t.n_vertices() % 2 == 1 {
                rat_i64(-1)
            } else {
                rat_i64(1)
            };
            rhs.insert(&t, Decoration::default(), sign);
        }
        let v = numerical_equal(&lhs, &rhs);
        let mut r = verdict_check("trees", format!("family-n{}", n), &v);
        r.pass = v.status == VerdictStatus::EqualDefinitive;
        out.push(r);
    }
    out
}

pub fn suite_pixton() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let cases = [(1u32, 1u32), (1, 2), (2, 1)];
    let coeffs: [(i64, i64, i64); 3] = [(3, -1, 1), (1, 1, 0), (2, 1, -1)];
    for &(g, n) in &cases {
        let space = Space::new(g, n);
        for &(a, c, b) in &coeffs {
            let start = Instant::now();
            let amap: BTreeMap<u32, Rat> = (1..=n).map(|i| (i, rat_i64(a))).collect();
            let kmax = 3i64.min(space.dim());
            let series = pixton_exponential(g, n, &amap, &rat_i64(c), &rat_i64(b), kmax);
            // the divisor itself
            let mut d = TautClass::zero(&space);
            for i in 1..=n {
                d = d.add(
                    &crate::algebra::standard_class(&space, crate::algebra::StandardClass::Psi(i))
                        .scale(&rat_i64(a)),
                );
            }
            d = d.add(
                &crate::algebra::standard_class(&space, crate::algebra::StandardClass::Lambda)
                    .scale(&rat_i64(c)),
            );
            d = d.sub(
                &crate::algebra::standard_class(
                    &space,
                    crate::algebra::StandardClass::DeltaTotal,
                )
                .scale(&rat_i64(b)),
            );
            let mut power = TautClass::one(&space);
            let mut ok = series.degree_part(0) == power;
            for k in 1..=kmax {
                power = multiply(&power, &d);
                let lhs = series.degree_part(k).scale(&factorial(k as u32));
                if lhs != power {
                    ok = false;
                    break;
                }
            }
            out.push(check(
                "pixton",
                format!("exp-g{}n{}-a{}c{}b{}", g, n, a, c, b),
                start,
                ok,
                None,
            ));
        }
    }
    out
}

pub fn suite_hyp(max_n: u32) -> Vec<CheckResult> {
    let mut out = Vec::new();
    // the one-point seed, term for term
    {
        let start = Instant::now();
        let ok = hyp_ct_formula(1) == hyp_one();
        out.push(check("hyp", "seed-n1".into(), start, ok, None));
    }
    for n in 2..=max_n.min(4) {
        let v = numerical_equal(&hyp_tilde_formula(n, false), &hyp_recursive(n));
        out.push(verdict_check("hyp", format!("main-n{}", n), &v));
    }
    // rational-tails variant agrees with the compact-type formula
    for n in 2..=max_n.min(3) {
        let v = numerical_equal(&hyp_rt_formula(n), &hyp_ct_formula(n));
        out.push(verdict_check("hyp", format!("rt-n{}", n), &v));
    }
    // pushforward drops one point with the expected multiplicity
    for n in 2..=max_n.min(4) {
        let down = crate::algebra::pushforward_forget(&hyp_recursive(n), n);
        let expect = hyp_recursive(n - 1).scale(&rat_i64(7 - n as i64));
        let v = numerical_equal(&down, &expect);
        out.push(verdict_check("hyp", format!("push-n{}", n), &v));
    }
    // symmetry of the recursion output under adjacent transpositions
    for n in 2..=max_n.min(4) {
        let h = hyp_recursive(n);
        for i in 1..n {
            let map: BTreeMap<u32, u32> = [(i, i + 1), (i + 1, i)].into_iter().collect();
            let v = numerical_equal(&h, &h.relabel(&map));
            out.push(verdict_check("hyp", format!("sym-n{}-s{}", n, i), &v));
        }
    }
    out
}

pub fn suite_nct(max_n: u32) -> Vec<CheckResult> {
    let mut out = Vec::new();
    {
        let start = Instant::now();
        let ok = nct_closed(2) == nct_recursive(2);
        out.push(check("nct", "closed-n2".into(), start, ok, None));
    }
    for n in 3..=max_n.min(4) {
        let v = numerical_equal(&nct_closed(n), &nct_recursive(n));
        out.push(verdict_check("nct", format!("closed-n{}", n), &v));
    }
    // pushforward of the correction class
    for n in 3..=max_n.min(5) {
        let lhs = push_and_relabel(&phigamma(n), n - 1, n);
        let rhs = phigamma(n - 1).scale(&rat_i64(8 - n as i64));
        let v = numerical_equal(&lhs, &rhs);
        out.push(verdict_check("nct", format!("phigamma-push-n{}", n), &v));
    }
    if max_n >= 5 {
        // the closing spot check on five points
        let start = Instant::now();
        let tail = nct5_tail();
        let (t1, t2) = spot_check_classes();
        let mut pass = true;
        let mut wit = None;
        for (name, t) in [("a", t1), ("b", t2)] {
            let mut v = rat_i64(0);
            for (tt, c) in &t.terms {
                v += c * pair_with_term(&tail, tt);
            }
            if !v.is_zero() {
                pass = false;
                wit = Some(format!("{}={}", name, rat_to_string(&v)));
            }
        }
        out.push(check("nct", "spot-n5".into(), start, pass, wit));
    }
    out
}

/// Compact-type vanishing proxy beyond six points: the compact-type
/// restriction of the formula on seven points pairs to zero against every
/// compact-type generator.
pub fn vanishing_proxy_n7() -> CheckResult {
    let start = Instant::now();
    let cls = hyp_ct_formula(7).restrict_compact_type();
    let space = Space::new(2, 7);
    let gens = complementary_generators_filtered(&space, space.dim() - 7, GraphFilter::CompactType);
    let vals = map_collect(gens, |t| {
        let v = pair_with_term(&cls, &t);
        (t, v)
    });
    for (t, v) in vals {
        if !v.is_zero() {
            return check(
                "hyp",
                "vanish-n7".into(),
                start,
                false,
                Some(format!(
                    "{} on {}",
                    rat_to_string(&v),
                    t.graph.record(t.graph.canonicalize().aut_count)
                )),
            );
        }
    }
    check("hyp", "vanish-n7".into(), start, true, None)
}

pub fn report(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        s.push_str(&r.line());
        s.push('\n');
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    s.push_str(&format!(
        "summary: {} checks, {} failed\n",
        results.len(),
        failed
    ));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{standard_class, StandardClass};

    #[test]
    fn definitive_verdicts_genus0() {
        let sp = Space::new(0, 4);
        let p1 = standard_class(&sp, StandardClass::Psi(1));
        let p2 = standard_class(&sp, StandardClass::Psi(2));
        let v = numerical_equal(&p1, &p2);
        assert_eq!(v.status, VerdictStatus::EqualDefinitive);
        assert!(v.witness.is_none());
    }

    #[test]
    fn distinct_carries_witness() {
        let sp = Space::new(2, 0);
        let d1 = standard_class(&sp, StandardClass::Delta1);
        let lam = standard_class(&sp, StandardClass::Lambda);
        let v = numerical_equal(&d1, &lam);
        assert_eq!(v.status, VerdictStatus::Distinct);
        assert!(v.witness.is_some());
    }

    #[test]
    fn trees_suite_passes() {
        let results = suite_trees();
        for r in &results {
            assert!(r.pass, "failed: {}", r.line());
        }
    }
}
