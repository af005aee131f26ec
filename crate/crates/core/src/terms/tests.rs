use super::*;
use proptest::prelude::*;

fn s(n: &str) -> Term {
    Term::scalar(n, Some(1))
}
fn e(n: &str) -> Term {
    Term::element(n, Some(1))
}

/// K as computed by one side: (PWE^{s_peer} * E_peer)^{r_own}.
fn k_view(pwe: &Term, r_own: &Term, r_peer: &Term, m_peer: &Term) -> Term {
    let s_peer = Term::add(r_peer, m_peer);
    let e_peer = Term::exp(pwe.clone(), &Term::neg(m_peer));
    Term::exp(Term::mul(vec![Term::exp(pwe.clone(), &s_peer), e_peer]), r_own)
}

#[test]
fn both_views_of_k_agree() {
    let pwe = e("PWE");
    let (rl, ml, rr, mr) = (s("r_L"), s("m_L"), s("r_R"), s("m_R"));
    let kl = normalize(&k_view(&pwe, &rl, &rr, &mr));
    let kr = normalize(&k_view(&pwe, &rr, &rl, &ml));
    assert_eq!(kl, kr);
    let expected = Term::exp_poly(pwe, Poly::atom(Atom::new("r_L", Sort::Scalar, Some(1))).mul(&Poly::atom(Atom::new(
        "r_R",
        Sort::Scalar,
        Some(1),
    ))));
    assert_eq!(kl, expected);
    assert!(equal(&kl, &kr));
}

#[test]
fn trivial_normal_forms() {
    let n = Term::data("n", Some(3));
    assert_eq!(normalize(&n), n);
    let (x, y) = (e("x"), e("y"));
    let t = Term::mul(vec![x.clone(), Term::exp_poly(y.clone(), Poly::one())]);
    assert_eq!(normalize(&t), normalize(&Term::mul(vec![x.clone(), y.clone()])));
    assert_eq!(normalize(&Term::exp_poly(x.clone(), Poly::zero())), Term::identity());
    assert_eq!(normalize(&Term::mul(vec![x.clone(), Term::identity()])), x);
}

#[test]
fn equality_examples() {
    let (a, b) = (e("a"), e("b"));
    assert!(equal(&Term::mul(vec![a.clone(), b.clone()]), &Term::mul(vec![b.clone(), a.clone()])));
    let (k, i) = (Term::data("k", Some(1)), Term::data("i", Some(1)));
    let h1 = Term::hash(HashTag::CN, vec![k.clone(), i.clone(), a.clone(), b.clone()]);
    let h2 = Term::hash(HashTag::CN, vec![k, i, b, a]);
    assert!(!equal(&h1, &h2));
}

#[test]
fn division_rules() {
    let (a, b) = (e("a"), e("b"));
    let (x, y) = (s("x"), s("y"));
    let lhs = Term::div(Term::exp(a.clone(), &Term::add(&x, &y)), Term::exp(a.clone(), &y));
    assert_eq!(normalize(&lhs), normalize(&Term::exp(a.clone(), &x)));
    let lhs = Term::div(a.clone(), Term::exp_poly(b.clone(), Poly::constant(-1)));
    assert_eq!(normalize(&lhs), normalize(&Term::mul(vec![a.clone(), b.clone()])));
    let lhs = Term::div(Term::mul(vec![a.clone(), b.clone()]), b);
    assert_eq!(normalize(&lhs), a);
}

#[test]
fn scalar_sum_cancels() {
    let (r, m) = (s("r"), s("m"));
    let t = Term::add(&Term::add(&r, &m), &Term::neg(&m));
    assert_eq!(normalize(&t), r);
}

#[test]
fn sexpr_shape() {
    let t = Term::exp(e("PWE"), &Term::add(&s("r"), &Term::neg(&s("m"))));
    assert_eq!(t.to_string(), "(exp @PWE#1 (- %m#1) (+ %r#1))");
    let h = Term::hash(HashTag::CN, vec![Term::data("k", Some(2)), Term::data("SAE", None)]);
    assert_eq!(h.to_string(), "(hash CN k#2 SAE)");
    assert_eq!(parse(&h.to_string()).unwrap(), h);
    assert!(parse("(exp").is_err());
    assert!(parse("(foo a)").is_err());
    assert!(parse("a b").is_err());
}

/// Every sequence of up to six unary wrappers, each normalised.
#[test]
fn unary_nestings_normalise_idempotently() {
    let wraps: Vec<Box<dyn Fn(Term) -> Term>> = vec![
        Box::new(|t| Term::exp(t, &s("x"))),
        Box::new(|t| Term::exp(t, &Term::neg(&s("x")))),
        Box::new(|t| Term::mul(vec![t, e("g")])),
        Box::new(|t| Term::mul(vec![t])),
        Box::new(|t| Term::exp_poly(t, Poly::zero())),
    ];
    let mut layer = vec![e("g")];
    for _ in 0..6 {
        let mut next = Vec::new();
        for t in &layer {
            for w in &wraps {
                let u = w(t.clone());
                let n = normalize(&u);
                assert_eq!(normalize(&n), n);
                next.push(u);
            }
        }
        layer = next;
    }
}

fn scalar_atom() -> impl Strategy<Value = Atom> {
    prop_oneof![Just("x"), Just("y"), Just("z")].prop_map(|n| Atom::new(n, Sort::Scalar, Some(1)))
}

fn poly() -> impl Strategy<Value = Poly> {
    prop::collection::vec((prop::collection::vec(scalar_atom(), 0..3), -2i64..3), 0..3).prop_map(Poly::from_terms)
}

fn element_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![Just("a"), Just("b"), Just("g")].prop_map(|n| Term::element(n, Some(1)));
    leaf.prop_recursive(6, 48, 3, |inner| {
        prop_oneof![
            (inner.clone(), poly()).prop_map(|(b, p)| Term::exp_poly(b, p)),
            prop::collection::vec(inner.clone(), 0..3).prop_map(Term::Mul),
            (inner.clone(), inner).prop_map(|(a, b)| Term::div(a, b)),
        ]
    })
}

fn any_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        element_term(),
        poly().prop_map(Term::Sum),
        Just(Term::data("SAE", None)),
        Just(Term::data("n", Some(4))),
    ];
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            (prop_oneof![Just(HashTag::H), Just(HashTag::CN), Just(HashTag::KCF), Just(HashTag::PMK)],
             prop::collection::vec(inner.clone(), 0..3))
                .prop_map(|(t, a)| Term::Hash(t, a)),
            (inner.clone(), inner).prop_map(|(a, b)| Term::pair(a, b)),
        ]
    })
}

fn env(a: &Atom) -> Value {
    let g = GroupParams::tiny23();
    match (a.sort, a.name.as_str()) {
        (Sort::Element, "a") => Value::Element(g.element(2).unwrap()),
        (Sort::Element, "b") => Value::Element(g.element(13).unwrap()),
        (Sort::Element, _) => Value::Element(g.generator()),
        (Sort::Scalar, "x") => Value::Scalar(g.scalar(3)),
        (Sort::Scalar, "y") => Value::Scalar(g.scalar(7)),
        (Sort::Scalar, _) => Value::Scalar(g.scalar(10)),
        (Sort::Data, n) => Value::Bytes(n.as_bytes().to_vec()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn normalize_is_idempotent(t in any_term()) {
        let n = normalize(&t);
        prop_assert_eq!(normalize(&n), n);
    }

    #[test]
    fn sexpr_round_trips(t in any_term()) {
        prop_assert_eq!(parse(&t.to_string()).unwrap(), t.clone());
        let n = normalize(&t);
        prop_assert_eq!(parse(&n.to_string()).unwrap(), n);
    }

    #[test]
    fn evaluation_survives_normalisation(t in any_term()) {
        let g = GroupParams::tiny23();
        prop_assert_eq!(eval(&t, &g, &env), eval(&normalize(&t), &g, &env));
    }

    #[test]
    fn mul_commutes(a in element_term(), b in element_term()) {
        prop_assert!(equal(&Term::mul(vec![a.clone(), b.clone()]), &Term::mul(vec![b, a])));
    }
}

// Closure engine.

struct Honest {
    observed: Vec<Term>,
    pwe: Term,
    r_l: Term,
    pmk: Term,
    s_l: Term,
}

fn honest() -> Honest {
    let pwe = Term::element("PWE", Some(0));
    let (rl, ml, rr, mr) = (s("r_L"), s("m_L"), s("r_R"), s("m_R"));
    let sl = Term::add(&rl, &ml);
    let sr = Term::add(&rr, &mr);
    let el = Term::exp(pwe.clone(), &Term::neg(&ml));
    let er = Term::exp(pwe.clone(), &Term::neg(&mr));
    let k = k_view(&pwe, &rl, &rr, &mr);
    let ks = Term::hash(HashTag::H, vec![Term::data("zero32", None), k]);
    let ss = Term::add(&sl, &sr);
    let kc = Term::hash(HashTag::KCF, vec![ks.clone(), Term::data("SAE", None), ss.clone()]);
    let pmk = Term::hash(HashTag::PMK, vec![ks, Term::data("SAE", None), ss]);
    let (il, ir) = (Term::data("i_L", Some(1)), Term::data("i_R", Some(1)));
    let hl = Term::hash(HashTag::CN, vec![kc.clone(), il.clone(), sl.clone(), el.clone(), sr.clone(), er.clone()]);
    let hr = Term::hash(HashTag::CN, vec![kc, ir.clone(), sr.clone(), er.clone(), sl.clone(), el.clone()]);
    let observed = vec![
        Term::pair(sl.clone(), el),
        Term::pair(sr, er),
        Term::pair(hl, il),
        Term::pair(hr, ir),
    ];
    Honest { observed, pwe, r_l: rl, pmk, s_l: sl }
}

#[test]
fn closure_of_public_only() {
    let k = closure(&KnowledgeSet::new(6), &[], 6);
    let g = Term::element("g", None);
    assert!(k.contains(&g));
    assert!(!k.contains(&Term::exp(g, &s("x"))));
}

#[test]
fn secrecy_and_pfs() {
    let h = honest();
    let empty = KnowledgeSet::new(6);
    assert!(check_secrecy(&empty, &h.observed, &h.pmk, 6).is_pass());
    assert!(check_secrecy(&empty, &h.observed, &h.pwe, 6).is_pass());
    let leaked = KnowledgeSet::with_terms([h.pwe.clone()], 6);
    assert!(check_secrecy(&leaked, &h.observed, &h.pmk, 6).is_pass());
    let both = KnowledgeSet::with_terms([h.pwe.clone(), h.r_l.clone()], 6);
    let r = check_secrecy(&both, &h.observed, &h.pmk, 6);
    assert!(!r.is_pass());
    assert!(!r.notes.is_empty());
}

#[test]
fn transmitted_scalar_is_one_step() {
    let h = honest();
    let r = check_secrecy(&KnowledgeSet::new(6), &h.observed, &h.s_l, 6);
    assert!(!r.is_pass());
    assert_eq!(r.notes.len(), 1);
    assert!(r.notes[0].contains("observed"));
}

#[test]
fn closure_is_monotone_in_depth_and_knowledge() {
    let h = honest();
    let both = KnowledgeSet::with_terms([h.pwe.clone(), h.r_l.clone()], 0);
    let goals = [h.pmk.clone(), h.pwe.clone(), h.s_l.clone()];
    for goal in &goals {
        let mut prev = false;
        for d in 0..=6 {
            let now = closure(&both, &h.observed, d).contains(goal);
            assert!(!prev || now, "lost {goal} at depth {d}");
            prev = now;
        }
    }
    for d in 0..=6 {
        let small = closure(&KnowledgeSet::new(d), &h.observed, d).contains(&h.pmk);
        let big = closure(&both, &h.observed, d).contains(&h.pmk);
        assert!(!small || big);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// A fresh atom seen only under a hash or only in an exponent stays secret.
    #[test]
    fn hidden_atoms_stay_hidden(p in poly(), extra in element_term(), under_hash in any::<bool>()) {
        let secret_scalar = Atom::new("w", Sort::Scalar, Some(9));
        let secret_elem = Term::element("v", Some(9));
        let exp_term = Term::exp_poly(Term::element("g", None), p.mul(&Poly::atom(secret_scalar.clone())));
        let observed = if under_hash {
            vec![Term::hash(HashTag::H, vec![secret_elem.clone(), Term::Atom(secret_scalar.clone())]), extra]
        } else {
            vec![exp_term, extra]
        };
        let k = closure(&KnowledgeSet::new(6), &observed, 6);
        prop_assert!(!k.contains(&Term::Atom(secret_scalar)));
        prop_assert!(!k.contains(&secret_elem));
    }
}
