//! Acceptance runner: one PASS/FAIL line per criterion, each checked against
//! its runtime budget. Exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::checks::{self, full, Check};
use sitcon::kb::Situation;
use sitcon::lp::{echo, parse_utterance, DialogAct, DialogContext, DialogKind, LAST_DECISION, SYNTH_LANGUAGES};
use sitcon::reasoning::{select, Policy, ReasoningContext};
use sitcon::service::{ResponseKind, Session, SessionConfig};
use sitcon::sim::{
    observe, observe_full, plant_model, run_closed_loop, trajectory_csv, DisturbanceProfile, EnvironmentState,
    LoopConfig,
};
use sitcon::situational::apply_elementary_act;

type Outcome = Result<String, String>;

fn repeat(cases: usize, seed: u64, mut check: impl FnMut(&mut ChaCha8Rng) -> Check) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for n in 0..cases {
        check(&mut rng).map_err(|e| format!("case {n}: {e}"))?;
    }
    Ok(cases)
}

fn inference_oracle() -> Outcome {
    let n = repeat(500, 0x0e02, checks::inference_matches_oracle)?;
    Ok(format!("{n} random KBs, all levels, exact match"))
}

fn algebra() -> Outcome {
    type Property = fn(&mut ChaCha8Rng) -> Check;
    let suite: [(&str, Property); 4] = [
        ("identity", checks::identity_relation),
        ("monotonicity", checks::monotonicity),
        ("associativity", checks::associativity),
        ("possibility symmetry/bounds", checks::possibility_symmetry),
    ];
    for (i, (name, check)) in suite.iter().enumerate() {
        repeat(1000, 0xa1 + i as u64, check).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok("4 properties x 1000 cases".into())
}

fn structural() -> Outcome {
    let kb = common::demo();
    repeat(1000, 0x35, |rng| checks::explain_round_trip(rng, &kb)).map_err(|e| format!("round trip: {e}"))?;
    repeat(1000, 0x36, checks::combine_matches_oracle).map_err(|e| format!("combine: {e}"))?;
    let probe = Situation::new("probe").with("stock", kb.term_set("stock", "low").unwrap().clone());
    let base = select(Policy::Wisdom, &full(&kb, probe), &kb, &ReasoningContext::default())
        .map_err(|e| e.to_string())?;
    repeat(1000, 0x37, |rng| checks::decide_invariance(rng, &base)).map_err(|e| format!("decide: {e}"))?;
    Ok("round trip, combine and decide invariance x 1000 cases".into())
}

fn commutation() -> Outcome {
    let kb = Arc::new(common::coarse());
    let plant = plant_model(&kb.plant).map_err(|e| e.to_string())?;
    let grid = kb.variable_universe("stock").ok_or("coarse kb lacks stock")?.points.clone();
    let mut worst = 0.0f64;
    for &s in &grid {
        let state = EnvironmentState::initial(&kb.plant).with("stock", s);
        let now = observe_full(&kb, &state).map_err(|e| e.to_string())?;
        let fired: Vec<_> = kb.acts.iter().filter_map(|a| apply_elementary_act(&now, &kb, &a.id, 1.0).ok()).collect();
        let [outcome] = fired.as_slice() else {
            return Err(format!("stock {s}: {} acts fire", fired.len()));
        };
        let next = plant.step(&state, &outcome.impacts, &BTreeMap::new()).map_err(|e| e.to_string())?;
        let read = observe(&kb, &next).map_err(|e| e.to_string())?;
        for (a, b) in read.assignments["stock"].mu.iter().zip(&outcome.target.assignments["stock"].mu) {
            worst = worst.max((a - b).abs());
        }
    }
    if worst > 1e-12 {
        return Err(format!("max deviation {worst:e}"));
    }
    Ok(format!("{} grid states, max deviation {worst:e}", grid.len()))
}

fn closed_loop() -> Outcome {
    let kb = common::demo_arc();
    let init = EnvironmentState::initial(&kb.plant).with("stock", 10.0).with("demand_actual", 5.0);
    let run = |config: &LoopConfig| run_closed_loop(kb.clone(), init.clone(), 100, config).map_err(|e| e.to_string());
    let t = run(&LoopConfig::default())?;
    let stock: Vec<f64> = t.states().map(|s| s.get("stock")).collect();
    let entry = stock.iter().position(|s| (40.0..=60.0).contains(s)).ok_or("never enters [40, 60]")?;
    if entry > 20 {
        return Err(format!("enters the band at tick {entry}"));
    }
    if let Some(k) = stock[entry..].iter().position(|s| !(40.0..=60.0).contains(s)) {
        return Err(format!("leaves the band at tick {}", entry + k));
    }
    let csv = trajectory_csv(&kb.plant, &t).map_err(|e| e.to_string())?;
    if csv != common::GOLDEN_TRAJECTORY {
        return Err("trajectory differs from the golden file".into());
    }
    let seeded = LoopConfig {
        disturbance: DisturbanceProfile::Seeded { seed: 11, bounds: [("stock".to_string(), (-2.0, 2.0))].into() },
        ..LoopConfig::default()
    };
    if run(&seeded)? != run(&seeded)? || run(&LoopConfig::default())? != t {
        return Err("rerun with the same seed differs".into());
    }
    Ok(format!("enters at tick {entry}, stays through tick 100, golden match"))
}

fn productions() -> Vec<DialogAct> {
    vec![
        DialogAct::new(DialogKind::Assert, "en").arg("variable", "stock").arg("term", "high"),
        DialogAct::new(DialogKind::Query, "en").arg("variable", "order"),
        DialogAct::new(DialogKind::Why, "en").arg("decision", LAST_DECISION),
        DialogAct::new(DialogKind::Why, "en").arg("decision", "hold_act"),
        DialogAct::new(DialogKind::Decide, "en"),
        DialogAct::new(DialogKind::Plan, "en").arg("horizon", "5"),
        DialogAct::new(DialogKind::Command, "en").arg("act", "trim_act"),
    ]
}

fn language() -> Outcome {
    let kb = common::demo_arc();
    let ctx = DialogContext::new("inventory");
    let mut round_trips = 0;
    for lang in SYNTH_LANGUAGES {
        for act in productions() {
            let text = echo(&act, lang, &kb).map_err(|e| e.to_string())?;
            let back = parse_utterance(&text, lang, &kb, &ctx).map_err(|e| format!("{lang} {text:?}: {e}"))?;
            if !back.same_meaning(&act) {
                return Err(format!("{lang}: {text:?} parsed as {back:?}"));
            }
            round_trips += 1;
        }
    }
    for (en, es) in common::PARALLEL {
        let a = parse_utterance(en, "en", &kb, &ctx).map_err(|e| format!("{en:?}: {e}"))?;
        let b = parse_utterance(es, "es", &kb, &ctx).map_err(|e| format!("{es:?}: {e}"))?;
        if !a.same_meaning(&b) {
            return Err(format!("{en:?} and {es:?} differ"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xf022);
    let mut crashes = 0;
    let inputs = 10_000;
    for n in 0..inputs {
        let lang = SYNTH_LANGUAGES[n % SYNTH_LANGUAGES.len()];
        let config = SessionConfig { language: lang.to_string(), ..SessionConfig::default() };
        let mut session = Session::new("fuzz", "demo", kb.clone(), config).map_err(|e| e.to_string())?;
        let bytes: Vec<u8> = (0..rng.gen_range(0..64)).map(|_| rng.gen()).collect();
        let input = String::from_utf8_lossy(&bytes).into_owned();
        match catch_unwind(AssertUnwindSafe(|| session.dialog_turn(&input))) {
            Ok(r) if r.kind == ResponseKind::Clarification && !r.text.is_empty() => {}
            Ok(r) => return Err(format!("{input:?} gave a {:?} response", r.kind)),
            Err(_) => crashes += 1,
        }
    }
    if crashes > 0 {
        return Err(format!("{crashes} crashes"));
    }
    Ok(format!(
        "{round_trips} round trips, {} parallel pairs, {inputs} fuzz inputs, 0 crashes",
        common::PARALLEL.len()
    ))
}

fn replay() -> Outcome {
    let golden: Vec<Value> = common::GOLDEN_TRANSCRIPT
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let run = || -> Result<Vec<String>, String> {
        let mut s = Session::new("replay", "demo", common::demo_arc(), SessionConfig::default())
            .map_err(|e| e.to_string())?;
        Ok(common::SCRIPT.iter().map(|u| serde_json::to_string(&s.dialog_turn(u)).expect("json")).collect())
    };
    let (first, second) = (run()?, run()?);
    if first != second {
        return Err("two fresh sessions disagree".into());
    }
    for ((line, recorded), utterance) in first.iter().zip(&golden).zip(common::SCRIPT) {
        let got: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if got["text"] != recorded["response"]["text"] || got != recorded["response"] {
            return Err(format!("{utterance:?} differs from the recorded transcript"));
        }
    }
    Ok(format!("{} turns byte-identical", first.len()))
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let secs = |s: u64| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { name: "rule inference equals enumeration oracle", budget: secs(10), run: inference_oracle },
        Criterion { name: "sup-min algebra properties", budget: secs(10), run: algebra },
        Criterion { name: "generalize/explain, combine and decide structure", budget: secs(5), run: structural },
        Criterion { name: "coarse plant commutation", budget: secs(1), run: commutation },
        Criterion { name: "closed-loop demo settles in [40, 60]", budget: secs(1), run: closed_loop },
        Criterion { name: "language round trip, invariance and fuzz", budget: secs(30), run: language },
        Criterion { name: "20-turn session replay", budget: None, run: replay },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(budget)) if elapsed > budget => Err(format!("took {elapsed:?}, budget {budget:?}")),
            (o, _) => o,
        };
        let budget = c.budget.map(|b| format!(" / {b:?}")).unwrap_or_default();
        match outcome {
            Ok(detail) => println!("PASS {} ({:.0?}{budget}): {detail}", c.name, elapsed),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} ({:.0?}{budget}): {detail}", c.name, elapsed);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
