//! Seeded property checks. Each check draws one case from `rng` and reports
//! the first discrepancy as an error string.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sitcon::inference::{compose, infer, possibility, FuzzyRelation, PremiseVector};
use sitcon::kb::{FuzzySet, KnowledgeBase, Situation};
use sitcon::reasoning::{
    combine_evidence, decide, replay_trace, select, Alternative, EvidenceBundle, Policy, ReasoningContext,
};
use sitcon::sim::{EnvironmentState, FullSituation};
use sitcon::situational::{explain, generalize, DecisionLog, SituationError, StepKind};

use super::{degree, mu_vec, oracle_combine, oracle_compose, oracle_infer, oracle_possibility, oracle_relation_product};
use super::{random_kb, random_premises, random_relation, random_set, LEVELS};

pub type Check = Result<(), String>;

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

/// Engine inference equals the enumeration oracle on a random KB, for the
/// aggregate rule set and for each level.
pub fn inference_matches_oracle(rng: &mut ChaCha8Rng) -> Check {
    let kb = random_kb(rng);
    let premises = random_premises(rng, &kb);
    let vector = premises.iter().fold(PremiseVector::new(), |v, (k, s)| v.with(k.clone(), s.clone()));
    for level in std::iter::once(None).chain(LEVELS.map(Some)) {
        let got = infer(&vector, &kb, level).map_err(|e| format!("infer failed: {e}"))?;
        let want = oracle_infer(&kb, &premises, level);
        let output: std::collections::BTreeMap<String, Vec<f64>> =
            got.output.iter().map(|(k, s)| (k.clone(), s.mu.clone())).collect();
        ensure(output == want.output, || format!("output {output:?} != oracle {:?} at {level:?}", want.output))?;
        ensure(got.rule_activations == want.activations, || {
            format!("activations {:?} != {:?}", got.rule_activations, want.activations)
        })?;
        ensure(got.defaulted == want.defaulted, || format!("defaulted {:?} != {:?}", got.defaulted, want.defaulted))?;
    }
    Ok(())
}

fn dims(rng: &mut ChaCha8Rng) -> usize {
    rng.gen_range(1..=6)
}

/// Composition with the identity relation returns its input, on both sides.
pub fn identity_relation(rng: &mut ChaCha8Rng) -> Check {
    let (n, m) = (dims(rng), dims(rng));
    let a = random_set(rng, "x", n);
    let id = FuzzyRelation::identity("x", n);
    let out = compose(&a, &id).map_err(|e| e.to_string())?;
    ensure(out == a, || format!("a o I = {out:?}, a = {a:?}"))?;
    let r = random_relation(rng, "x", "y", n, m);
    let left = id.then(&r).map_err(|e| e.to_string())?;
    let right = r.then(&FuzzyRelation::identity("y", m)).map_err(|e| e.to_string())?;
    ensure(left == r && right == r, || format!("identity product changed {r:?}"))
}

/// Enlarging the input set or the relation never shrinks the composition
/// or the possibility.
pub fn monotonicity(rng: &mut ChaCha8Rng) -> Check {
    let (n, m) = (dims(rng), dims(rng));
    let a = random_set(rng, "x", n);
    let bigger = a.union(&random_set(rng, "x", n));
    let r = random_relation(rng, "x", "y", n, m);
    let r_bigger = FuzzyRelation::new(
        "x",
        "y",
        r.matrix.iter().map(|row| row.iter().map(|v| v.max(degree(rng))).collect()).collect(),
    );
    let base = compose(&a, &r).map_err(|e| e.to_string())?;
    for (label, out) in [("set", compose(&bigger, &r)), ("relation", compose(&a, &r_bigger))] {
        let out = out.map_err(|e| e.to_string())?;
        ensure(base.mu.iter().zip(&out.mu).all(|(x, y)| x <= y), || format!("{label} monotonicity: {base:?} vs {out:?}"))?;
    }
    let b = random_set(rng, "x", n);
    let p = possibility(&a, &b).map_err(|e| e.to_string())?;
    let q = possibility(&bigger, &b).map_err(|e| e.to_string())?;
    ensure(p <= q, || format!("possibility {p} > {q} after enlarging"))
}

/// `(a o R) o S = a o (R o S)` and `(R o S) o T = R o (S o T)`, exactly,
/// and both agree with the enumeration oracle.
pub fn associativity(rng: &mut ChaCha8Rng) -> Check {
    let (n, m, k, l) = (dims(rng), dims(rng), dims(rng), dims(rng));
    let a = random_set(rng, "x", n);
    let r = random_relation(rng, "x", "y", n, m);
    let s = random_relation(rng, "y", "z", m, k);
    let t = random_relation(rng, "z", "w", k, l);
    let err = |e: sitcon::inference::InferenceError| e.to_string();

    let stepwise = compose(&compose(&a, &r).map_err(err)?, &s).map_err(err)?;
    let rs = r.then(&s).map_err(err)?;
    let joined = compose(&a, &rs).map_err(err)?;
    ensure(stepwise == joined, || format!("(aR)S = {stepwise:?}, a(RS) = {joined:?}"))?;
    ensure(joined.mu == oracle_compose(&a.mu, &oracle_relation_product(&r.matrix, &s.matrix)), || {
        "composition disagrees with oracle".into()
    })?;

    let left = rs.then(&t).map_err(err)?;
    let right = r.then(&s.then(&t).map_err(err)?).map_err(err)?;
    ensure(left == right, || format!("(RS)T = {:?}, R(ST) = {:?}", left.matrix, right.matrix))
}

/// Possibility is symmetric, bounded by [0, 1] and equals the oracle.
pub fn possibility_symmetry(rng: &mut ChaCha8Rng) -> Check {
    let n = dims(rng);
    let a = random_set(rng, "x", n);
    let b = random_set(rng, "x", n);
    let ab = possibility(&a, &b).map_err(|e| e.to_string())?;
    let ba = possibility(&b, &a).map_err(|e| e.to_string())?;
    ensure(ab == ba, || format!("Poss(a,b)={ab} Poss(b,a)={ba}"))?;
    ensure((0.0..=1.0).contains(&ab), || format!("Poss {ab} outside [0,1]"))?;
    ensure(ab == oracle_possibility(&a.mu, &b.mu), || format!("Poss {ab} != oracle"))
}

/// Evidence combination equals max over bundles of the bundle minimum.
pub fn combine_matches_oracle(rng: &mut ChaCha8Rng) -> Check {
    let raw: Vec<[f64; 4]> =
        (0..rng.gen_range(1..=6)).map(|_| [degree(rng), degree(rng), degree(rng), degree(rng)]).collect();
    let bundles: Vec<EvidenceBundle> = raw.iter().map(|b| EvidenceBundle::new(b[0], b[1], b[2], b[3])).collect();
    let got = combine_evidence(&bundles).map_err(|e| e.to_string())?;
    let want = oracle_combine(&raw);
    ensure(got == want, || format!("combine {got} != oracle {want} for {raw:?}"))
}

pub fn random_situation(rng: &mut ChaCha8Rng, kb: &KnowledgeBase) -> Situation {
    let mut s = Situation::new("probe");
    for name in ["stock", "demand"] {
        if rng.gen_bool(0.9) {
            let u = kb.variable_universe(name).expect("demo variable");
            s = s.with(name, FuzzySet::new(u.id.clone(), mu_vec(rng, u.len())));
        }
    }
    s
}

pub fn full(kb: &KnowledgeBase, situation: Situation) -> FullSituation {
    FullSituation { situation, environment: EnvironmentState::initial(&kb.plant), timestamp: 0 }
}

/// Decision selection is unchanged when every combined score goes through
/// the same strictly increasing map; the winner is the oracle argmax with
/// ties broken by id.
pub fn decide_invariance(rng: &mut ChaCha8Rng, base: &Alternative) -> Check {
    let ids = ["a0", "a1", "a2", "a3", "a4", "a5"];
    let alts: Vec<Alternative> = (0..rng.gen_range(1..=8))
        .map(|_| {
            let mut alt = base.clone();
            alt.decision.id = ids.choose(rng).expect("ids").to_string();
            alt.combined_score = rng.gen_range(0..=64) as f64 / 64.0;
            alt
        })
        .collect();
    let chosen = decide(&alts).map_err(|e| e.to_string())?.decision.id.clone();
    let best = alts.iter().map(|a| a.combined_score).fold(f64::NEG_INFINITY, f64::max);
    let oracle = alts.iter().filter(|a| a.combined_score == best).map(|a| a.decision.id.as_str()).min().expect("one");
    ensure(chosen == oracle, || format!("decide chose {chosen}, oracle {oracle}"))?;

    let transforms: [fn(f64) -> f64; 5] =
        [f64::sqrt, |x| x.powi(3), |x| (3.0 * x).exp(), |x| x / (1.0 + x), |x| 2.0 * x - 7.0];
    for f in transforms {
        let mapped: Vec<Alternative> = alts
            .iter()
            .map(|a| Alternative { combined_score: f(a.combined_score), ..a.clone() })
            .collect();
        let again = &decide(&mapped).map_err(|e| e.to_string())?.decision.id;
        ensure(*again == chosen, || format!("transformed decide chose {again}, expected {chosen}"))?;
    }
    Ok(())
}

/// Generalize then explain: the explanation lists the trace backwards and
/// replaying the trace yields the same decision id and score. The same holds
/// for decisions taken by policy selection.
pub fn explain_round_trip(rng: &mut ChaCha8Rng, kb: &KnowledgeBase) -> Check {
    let situation = random_situation(rng, kb);
    let threshold = rng.gen_range(0..=10) as f64 / 10.0;
    let mut entries = Vec::new();
    match generalize(&situation, kb, threshold) {
        Ok(g) => entries.push((g.decision, g.trace)),
        Err(SituationError::NoApplicableSituation) => {}
        Err(e) => return Err(format!("generalize failed: {e}")),
    }
    let policy = if rng.gen_bool(0.5) { Policy::Wisdom } else { Policy::Intuition };
    let ctx = ReasoningContext { mu_d: degree(rng), theta: threshold };
    if let Ok(alt) = select(policy, &full(kb, situation), kb, &ctx) {
        entries.push((alt.decision, alt.trace));
    }

    for (decision, trace) in entries {
        // a fresh log per entry, since both paths may pick the same id
        let mut log = DecisionLog::default();
        log.record(decision.clone(), trace.clone());
        let id = &decision.id;
        let explanation = explain(id, &log).map_err(|e| e.to_string())?;
        let forward: Vec<_> = explanation.steps.iter().rev().cloned().collect();
        ensure(forward == trace.steps, || format!("explanation of {id} is not the reversed trace"))?;
        ensure(explanation.steps.first().map(|s| s.kind) == Some(StepKind::Decision), || {
            format!("explanation of {id} does not start with the decision")
        })?;
        let replayed = replay_trace(&trace, kb).map_err(|e| format!("replay of {id}: {e}"))?;
        ensure(replayed.id == decision.id && replayed.score == decision.score, || {
            format!("replay gave {} {} for {} {}", replayed.id, replayed.score, id, decision.score)
        })?;
    }
    Ok(())
}
