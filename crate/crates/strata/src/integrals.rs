//! Exact psi-intersection numbers via the Dijkgraaf-Verlinde-Verlinde
//! recursion, kappa conversion by adding marked points, top-degree evaluation
//! of classes, and the pairing engine used for numerical-equivalence checks.

use crate::algebra::{emit_at_site, refine_pairs, refinement_sites, Decoration, Space, Term, TautClass};
use crate::graphs::{enumerate_stable_graphs, Flag, GraphFilter, StableGraph};
use crate::rat::{factorial, odd_double_factorial, rat_from_str, rat_i64, rat_to_string, Rat};
use num_traits::Zero;
use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{OnceLock, RwLock};

/// Memoized Witten correlators: (genus, sorted exponents) -> value.
pub struct IntersectionTable {
    map: RwLock<HashMap<(u32, Vec<u32>), Rat>>,
    dirty: AtomicBool,
}

static TABLE: OnceLock<IntersectionTable> = OnceLock::new();

pub fn table() -> &'static IntersectionTable {
    TABLE.get_or_init(|| IntersectionTable {
        map: RwLock::new(HashMap::new()),
        dirty: AtomicBool::new(false),
    })
}

impl IntersectionTable {
    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty.load(Ordering::Relaxed)
    }

    pub fn entries(&self) -> Vec<((u32, Vec<u32>), Rat)> {
        let mut v: Vec<_> = self
            .map
            .read()
            .unwrap()
            .iter()
            .map(|(k, c)| (k.clone(), c.clone()))
            .collect();
        v.sort();
        v
    }

    pub fn clear(&self) {
        self.map.write().unwrap().clear();
        self.dirty.store(false, Ordering::Relaxed);
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for ((g, a), v) in self.entries() {
            let ais = a
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",");
            writeln!(f, "I g={} a={} v={}", g, ais, rat_to_string(&v))?;
        }
        self.dirty.store(false, Ordering::Relaxed);
        Ok(())
    }

    pub fn load(&self, path: &std::path::Path) -> std::io::Result<usize> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut n = 0;
        let mut guard = self.map.write().unwrap();
        for line in f.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut g = None;
            let mut a = None;
            let mut v = None;
            for tok in line.split_whitespace() {
                if tok == "I" {
                    continue;
                }
                if let Some((k, val)) = tok.split_once('=') {
                    match k {
                        "g" => g = val.parse::<u32>().ok(),
                        "a" => {
                            a = Some(if val.is_empty() {
                                Vec::new()
                            } else {
                                val.split(',')
                                    .map(|s| s.parse::<u32>().unwrap_or(0))
                                    .collect::<Vec<u32>>()
                            })
                        }
                        "v" => v = rat_from_str(val),
                        _ => {}
                    }
                }
            }
            if let (Some(g), Some(a), Some(v)) = (g, a, v) {
                guard.insert((g, a), v);
                n += 1;
            }
        }
        Ok(n)
    }
}

/// The correlator <tau_{a_1} ... tau_{a_n}>_g, zero off dimension.
pub fn psi_integral(genus: u32, exps: &[u32]) -> Rat {
    let n = exps.len() as i64;
    let total: i64 = exps.iter().map(|&a| a as i64).sum();
    if total != 3 * genus as i64 - 3 + n || 2 * genus as i64 - 2 + n <= 0 {
        return Rat::zero();
    }
    let mut key: Vec<u32> = exps.to_vec();
    key.sort();
    {
        let guard = table().map.read().unwrap();
        if let Some(v) = guard.get(&(genus, key.clone())) {
            return v.clone();
        }
    }
    let value = compute_correlator(genus, &key);
    table()
        .map
        .write()
        .unwrap()
        .insert((genus, key), value.clone());
    table().dirty.store(true, Ordering::Relaxed);
    value
}

fn compute_correlator(genus: u32, sorted: &[u32]) -> Rat {
    let n = sorted.len() as i64;
    // genus 0 closed form
    if genus == 0 {
        let mut v = factorial((n - 3) as u32);
        for &a in sorted {
            v /= factorial(a);
        }
        return v;
    }
    if genus == 1 && sorted == [1] {
        return crate::rat::rat(1, 24);
    }
    // string reduction
    if sorted[0] == 0 && n > 1 {
        let rest = &sorted[1..];
        let mut acc = Rat::zero();
        for j in 0..rest.len() {
            if rest[j] == 0 {
                continue;
            }
            let mut reduced = rest.to_vec();
            reduced[j] -= 1;
            acc += psi_integral(genus, &reduced);
        }
        return acc;
    }
    // dilaton reduction
    if sorted[0] == 1 && n > 1 {
        let rest = &sorted[1..];
        let factor = rat_i64(2 * genus as i64 - 2 + rest.len() as i64);
        return factor * psi_integral(genus, rest);
    }
    // DVV on the largest exponent
    let kp1 = *sorted.last().unwrap();
    assert!(kp1 >= 1, "no reducible exponent");
    let k = (kp1 - 1) as i64;
    let rest: Vec<u32> = sorted[..sorted.len() - 1].to_vec();
    let mut rhs = Rat::zero();
    // contact terms with the other insertions
    for j in 0..rest.len() {
        let aj = rest[j] as i64;
        let coef = odd_double_factorial(k + aj + 1) / odd_double_factorial(aj);
        let mut merged = rest.clone();
        merged[j] = (aj + k) as u32;
        rhs += coef * psi_integral(genus, &merged);
    }
    // boundary terms
    for a in 0..=k - 1 {
        let b = k - 1 - a;
        let coef = odd_double_factorial(a + 1) * odd_double_factorial(b + 1);
        // non-separating
        if genus >= 1 {
            let mut exps = rest.clone();
            exps.push(a as u32);
            exps.push(b as u32);
            rhs += coef.clone() * psi_integral(genus - 1, &exps) / rat_i64(2);
        }
        // separating
        for g1 in 0..=genus {
            let g2 = genus - g1;
            for mask in 0u64..(1u64 << rest.len()) {
                let mut left = vec![a as u32];
                let mut right = vec![b as u32];
                for (j, &x) in rest.iter().enumerate() {
                    if mask & (1 << j) != 0 {
                        left.push(x);
                    } else {
                        right.push(x);
                    }
                }
                rhs += coef.clone()
                    * psi_integral(g1, &left)
                    * psi_integral(g2, &right)
                    / rat_i64(2);
            }
        }
    }
    rhs / odd_double_factorial(k + 2)
}

/// Integral of a psi-kappa monomial on one vertex moduli. Kappa classes are
/// converted by adding marked points with inclusion-exclusion.
pub fn vertex_integral(genus: u32, psis: &[u32], kappas: &[(u32, u32)]) -> Rat {
    let kappa_list: Vec<u32> = kappas
        .iter()
        .flat_map(|&(a, m)| std::iter::repeat(a).take(m as usize))
        .collect();
    kappa_to_psi(genus, psis.to_vec(), kappa_list)
}

fn kappa_to_psi(genus: u32, psis: Vec<u32>, mut kappas: Vec<u32>) -> Rat {
    match kappas.pop() {
        None => psi_integral(genus, &psis),
        Some(c) => {
            let rest = kappas;
            let mut acc = Rat::zero();
            for mask in 0u64..(1u64 << rest.len()) {
                let mut kept = Vec::new();
                let mut merged = c + 1;
                let mut sign = 1i64;
                for (j, &t) in rest.iter().enumerate() {
                    if mask & (1 << j) != 0 {
                        merged += t;
                        sign = -sign;
                    } else {
                        kept.push(t);
                    }
                }
                let mut p = psis.clone();
                p.push(merged);
                acc += rat_i64(sign) * kappa_to_psi(genus, p, kept);
            }
            acc
        }
    }
}

/// Integral of a full class: vanishes except in top degree, where a stratum
/// integral factorizes over the vertices.
pub fn integrate(c: &TautClass) -> Rat {
    let dim = c.space.dim();
    let mut acc = Rat::zero();
    for (t, coeff) in &c.terms {
        if t.degree() != dim {
            continue;
        }
        acc += coeff.clone() * integrate_term(t);
    }
    acc
}

pub fn integrate_term(t: &Term) -> Rat {
    let mut acc = rat_i64(1);
    for v in 0..t.graph.n_vertices() {
        let psis: Vec<u32> = t
            .graph
            .vertex_flags(v)
            .iter()
            .map(|f| *t.dec.psi.get(f).unwrap_or(&0))
            .collect();
        let kappas: Vec<(u32, u32)> = t
            .dec
            .kappa
            .iter()
            .filter(|&(&(w, _), _)| w == v)
            .map(|(&(_, a), &e)| (a, e))
            .collect();
        let vi = vertex_integral(t.graph.genus[v], &psis, &kappas);
        if vi.is_zero() {
            return Rat::zero();
        }
        acc *= vi;
    }
    acc
}

// ---------------------------------------------------------------------------
// Pairing.

static PAIR_CACHE: OnceLock<RwLock<HashMap<(Term, Term), Rat>>> = OnceLock::new();

/// Integral of the product of two decorated strata, memoized on the pair of
/// canonical terms.
pub fn pair_terms(ta: &Term, tb: &Term) -> Rat {
    let key = if ta <= tb {
        (ta.clone(), tb.clone())
    } else {
        (tb.clone(), ta.clone())
    };
    let cache = PAIR_CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    {
        let guard = cache.read().unwrap();
        if let Some(v) = guard.get(&key) {
            return v.clone();
        }
    }
    let mut acc = Rat::zero();
    refine_pairs(&key.0, &key.1, |c, graph, dec| {
        let t = Term {
            graph: graph.clone(),
            dec: dec.clone(),
        };
        let val = integrate_term(&t);
        if !val.is_zero() {
            acc += c * val;
        }
    });
    cache.write().unwrap().insert(key, acc.clone());
    acc
}

/// Intersection pairing of two classes of complementary degree; degree
/// mismatches contribute zero.
pub fn pair(a: &TautClass, b: &TautClass) -> Rat {
    assert_eq!(a.space, b.space, "ambient mismatch");
    let dim = a.space.dim();
    let mut acc = Rat::zero();
    for (ta, ca) in &a.terms {
        for (tb, cb) in &b.terms {
            if ta.degree() + tb.degree() != dim {
                continue;
            }
            let v = pair_terms(ta, tb);
            if !v.is_zero() {
                acc += ca * cb * v;
            }
        }
    }
    acc
}

/// Pairs one class against many decorated strata at once: the degeneration
/// sites of each class term are enumerated once and dispatched to every
/// target stratum sharing the matched contraction graph. Returns one value
/// per target.
pub fn pair_class_against_terms(a: &TautClass, targets: &[Term]) -> Vec<Rat> {
    pair_class_against_terms_with(a, targets, cfg!(feature = "parallel"))
}

/// Same sweep with an explicit choice of worker strategy (used by the
/// benches to compare the two).
pub fn pair_class_against_terms_with(
    a: &TautClass,
    targets: &[Term],
    parallel: bool,
) -> Vec<Rat> {
    use std::collections::HashMap as Map;
    let dim = a.space.dim();
    let mut groups: Map<&StableGraph, Vec<usize>> = Map::new();
    let mut budget = 0usize;
    for (i, t) in targets.iter().enumerate() {
        groups.entry(&t.graph).or_default().push(i);
        budget = budget.max(t.graph.edges.len());
    }
    let term_list: Vec<(&Term, &Rat)> = a.terms.iter().collect();
    let worker = |(ta, ca): (&Term, &Rat)| {
        let mut acc = vec![Rat::zero(); targets.len()];
        refinement_sites(ta, budget, |site| {
            let Some(idxs) = groups.get(&site.k_canon.graph) else {
                return;
            };
            for &i in idxs {
                let tb = &targets[i];
                if ta.degree() + tb.degree() != dim {
                    continue;
                }
                let mut local = Rat::zero();
                emit_at_site(site, tb, &mut |c, graph, dec| {
                    let t = Term {
                        graph: graph.clone(),
                        dec: dec.clone(),
                    };
                    let v = integrate_term(&t);
                    if !v.is_zero() {
                        local += c * v;
                    }
                });
                if !local.is_zero() {
                    acc[i] += ca.clone() * local;
                }
            }
        });
        acc
    };
    #[cfg(feature = "parallel")]
    let partials = if parallel {
        crate::par::map_collect_par(term_list, worker)
    } else {
        crate::par::map_collect_seq(term_list, worker)
    };
    #[cfg(not(feature = "parallel"))]
    let partials = {
        let _ = parallel;
        crate::par::map_collect_seq(term_list, worker)
    };
    let mut out = vec![Rat::zero(); targets.len()];
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            if !v.is_zero() {
                *o += v;
            }
        }
    }
    out
}

/// Pairs one class against a single decorated stratum.
pub fn pair_with_term(a: &TautClass, t: &Term) -> Rat {
    let dim = a.space.dim();
    let mut acc = Rat::zero();
    for (ta, ca) in &a.terms {
        if ta.degree() + t.degree() != dim {
            continue;
        }
        let v = pair_terms(ta, t);
        if !v.is_zero() {
            acc += ca * v;
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Complementary generators.

/// All canonical single-stratum classes of the given degree: graphs with up
/// to `d` edges carrying psi and kappa decorations filling out the degree.
pub fn complementary_generators(space: &Space, d: i64) -> Vec<Term> {
    complementary_generators_filtered(space, d, GraphFilter::All)
}

static GEN_CACHE: OnceLock<RwLock<HashMap<(Space, i64, u8), Vec<Term>>>> = OnceLock::new();

pub fn complementary_generators_filtered(
    space: &Space,
    d: i64,
    filter: GraphFilter,
) -> Vec<Term> {
    let fkey = match filter {
        GraphFilter::All => 0u8,
        GraphFilter::CompactType => 1,
        GraphFilter::RationalTails => 2,
        GraphFilter::NoRationalTails => 3,
        GraphFilter::Extended => 4,
    };
    let cache = GEN_CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    {
        let guard = cache.read().unwrap();
        if let Some(v) = guard.get(&(space.clone(), d, fkey)) {
            return v.clone();
        }
    }
    let mut out: BTreeSet<Term> = BTreeSet::new();
    for graph in enumerate_stable_graphs(space.genus, &space.marks, filter) {
        let e = graph.edges.len() as i64;
        if e > d {
            continue;
        }
        let rem = (d - e) as u32;
        for dec in decorations_of_degree(&graph, rem) {
            out.insert(Term::canonical(&graph, &dec));
        }
    }
    let v: Vec<Term> = out.into_iter().collect();
    cache
        .write()
        .unwrap()
        .insert((space.clone(), d, fkey), v.clone());
    v
}

/// Every psi-kappa decoration of exact total degree `d` on the graph,
/// respecting vertex dimensions.
pub fn decorations_of_degree(graph: &StableGraph, d: u32) -> Vec<Decoration> {
    let flags: Vec<Flag> = graph.all_flags();
    let nv = graph.n_vertices();
    let vdim: Vec<i64> = (0..nv).map(|v| Space::vertex_dim(graph, v)).collect();
    let mut out = Vec::new();
    // distribute degree over flags, then kappa partitions per vertex
    fn rec(
        graph: &StableGraph,
        flags: &[Flag],
        i: usize,
        left: u32,
        cur: &mut Decoration,
        nv: usize,
        vdim: &[i64],
        out: &mut Vec<Decoration>,
    ) {
        if i == flags.len() {
            // kappa decorations on vertices with the remaining degree
            fn rec_kappa(
                v: usize,
                left: u32,
                cur: &mut Decoration,
                graph: &StableGraph,
                nv: usize,
                vdim: &[i64],
                out: &mut Vec<Decoration>,
            ) {
                if v == nv {
                    if left == 0 {
                        // vertex dimension check
                        for w in 0..nv {
                            if cur.degree_at(graph, w) > vdim[w] {
                                return;
                            }
                        }
                        out.push(cur.clone());
                    }
                    return;
                }
                // partitions of 0..=left placed as kappa at v
                fn partitions(max_part: u32, left: u32) -> Vec<Vec<(u32, u32)>> {
                    if left == 0 {
                        return vec![Vec::new()];
                    }
                    let mut res = Vec::new();
                    for a in (1..=max_part.min(left)).rev() {
                        for m in 1..=(left / a) {
                            for rest in partitions(a - 1, left - a * m) {
                                let mut p = vec![(a, m)];
                                p.extend(rest);
                                res.push(p);
                            }
                        }
                    }
                    res
                }
                for used in 0..=left {
                    for part in partitions(used.max(1), used) {
                        let before = cur.kappa.clone();
                        for &(a, m) in &part {
                            cur.add_kappa(v, a, m);
                        }
                        rec_kappa(v + 1, left - used, cur, graph, nv, vdim, out);
                        cur.kappa = before;
                    }
                }
            }
            rec_kappa(0, left, cur, graph, nv, vdim, out);
            return;
        }
        for e in 0..=left {
            if e > 0 {
                cur.add_psi(flags[i], e);
            }
            rec(graph, flags, i + 1, left - e, cur, nv, vdim, out);
            if e > 0 {
                cur.psi.remove(&flags[i]);
            }
        }
    }
    let mut cur = Decoration::default();
    rec(graph, &flags, 0, d, &mut cur, nv, &vdim, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{
        boundary_divisor_split, multiply, standard_class, StandardClass, TautClass,
    };
    use crate::rat::rat;

    #[test]
    fn base_correlators() {
        assert_eq!(psi_integral(0, &[0, 0, 0]), rat_i64(1));
        assert_eq!(psi_integral(1, &[1]), rat(1, 24));
        assert_eq!(psi_integral(0, &[1, 0, 0, 0]), rat_i64(1));
        // off-dimension input returns zero rather than an error
        assert_eq!(psi_integral(1, &[2]), rat_i64(0));
    }

    #[test]
    fn genus0_closed_form_via_recursion() {
        // check the closed form against explicit string reductions
        for n in 4..=7u32 {
            let d = n - 3;
            // all exponent vectors with sum d
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
            for v in vectors(n as usize, d) {
                let expect = {
                    let mut x = factorial(d);
                    for &a in &v {
                        x /= factorial(a);
                    }
                    x
                };
                assert_eq!(psi_integral(0, &v), expect);
            }
        }
    }

    #[test]
    fn known_higher_genus_values() {
        assert_eq!(psi_integral(1, &[0, 2]), rat(1, 24));
        assert_eq!(psi_integral(2, &[4]), rat(1, 1152));
        assert_eq!(psi_integral(2, &[0, 5]), rat(1, 1152) + rat(0, 1));
        // dilaton audit at genus two
        assert_eq!(
            psi_integral(2, &[1, 4]),
            rat_i64(2 * 2 - 2 + 1) * psi_integral(2, &[4])
        );
    }

    #[test]
    fn kappa_conversion() {
        // kappa_1 on the one-pointed genus-1 space
        assert_eq!(vertex_integral(1, &[0], &[(1, 1)]), rat(1, 24));
        // trivial integral
        assert_eq!(vertex_integral(0, &[0, 0, 0], &[]), rat_i64(1));
        // two-route check on (0,5): kappa_1^2 via conversion and via the
        // divisor expression kappa_1 = sum psi - delta
        let sp = Space::new(0, 5);
        let mut kk = TautClass::zero(&sp);
        {
            let mut dec = Decoration::default();
            dec.add_kappa(0, 1, 2);
            kk.insert(&StableGraph::smooth(0, &sp.marks), dec, rat_i64(1));
        }
        let route1 = integrate(&kk);
        let mut k1 = TautClass::zero(&sp);
        for i in 1..=5 {
            k1 = k1.add(&standard_class(&sp, StandardClass::Psi(i)));
        }
        k1 = k1.sub(&standard_class(&sp, StandardClass::DeltaTotal));
        let route2 = integrate(&multiply(&k1, &k1));
        assert_eq!(route1, route2);
        assert_eq!(route1, rat_i64(5));
    }

    #[test]
    fn genus2_boundary_ground_truths() {
        // delta_1^3 on the unmarked genus-2 space
        let sp = Space::new(2, 0);
        let d1 = standard_class(&sp, StandardClass::Delta1);
        let d1sq = multiply(&d1, &d1);
        let v = integrate(&multiply(&d1sq, &d1));
        assert_eq!(v, rat(1, 576));
        // lambda^3 = 1/2880
        let lam = standard_class(&sp, StandardClass::Lambda);
        let lam3 = multiply(&multiply(&lam, &lam), &lam);
        assert_eq!(integrate(&lam3), rat(1, 2880));
        // lambda^2 against the separating divisor: lambda restricts to
        // lambda x 1 + 1 x lambda, so the square contributes the cross term
        // twice over the half from the automorphism
        let v2 = integrate(&multiply(&multiply(&lam, &lam), &d1));
        assert_eq!(v2, rat(1, 576));
    }

    #[test]
    fn lambda_squared_vanishes_numerically_genus1() {
        // the genus-1 expansion of lambda^2 pairs to zero in every direction
        let sp = Space::new(1, 2);
        let lam = standard_class(&sp, StandardClass::Lambda);
        let lam2 = multiply(&lam, &lam);
        for t in complementary_generators(&sp, sp.dim() - 2) {
            assert!(pair_with_term(&lam2, &t).is_zero());
        }
    }

    #[test]
    fn divisor_pairing_examples() {
        let sp = Space::new(0, 4);
        let psi1 = standard_class(&sp, StandardClass::Psi(1));
        assert_eq!(integrate(&psi1), rat_i64(1));
        // self-pairing of a boundary divisor on (0,5)
        let sp5 = Space::new(0, 5);
        let d = boundary_divisor_split(&sp5, 0, &[1, 2].into_iter().collect());
        assert_eq!(pair(&d, &d), rat_i64(-1));
    }

    #[test]
    fn generator_count_small() {
        // degree-1 strata keys on (0,4): four psi decorations, kappa_1,
        // and three boundary points
        let sp = Space::new(0, 4);
        let gens = complementary_generators(&sp, 1);
        assert_eq!(gens.len(), 8);
    }

    #[test]
    fn table_round_trip() {
        let _ = psi_integral(2, &[4]);
        let _ = psi_integral(1, &[0, 2]);
        let dir = std::env::temp_dir().join("strata_table_test.txt");
        table().save(&dir).unwrap();
        let before = table().entries();
        table().clear();
        table().load(&dir).unwrap();
        let after = table().entries();
        assert_eq!(before, after);
        assert_eq!(psi_integral(2, &[4]), rat(1, 1152));
        std::fs::remove_file(&dir).ok();
    }

    #[test]
    fn delta_irr_pairing_on_1_2() {
        // the divisor of irreducible nodal curves against psi
        let sp = Space::new(1, 2);
        let irr = standard_class(&sp, StandardClass::DeltaIrr);
        let psi1 = standard_class(&sp, StandardClass::Psi(1));
        assert_eq!(pair(&irr, &psi1), rat(1, 2));
        // and its self-pairing vanishes (it is twelve lambda)
        assert_eq!(pair(&irr, &irr), rat_i64(0));
    }
}
