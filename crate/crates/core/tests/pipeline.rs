use pbcn_reach::eval::{dp_max_reach, greedy_policy, mc_policy_eval, ErrorReference};
use pbcn_reach::horizon::HorizonSpec;
use pbcn_reach::learner::{train, ErrorLogging, LrVariant, ScheduleParams, TrainSpec};
use pbcn_reach::model::{builtin_lac_operon, parse_model, PackedState, LAC_OPERON_SOURCE};
use pbcn_reach::qstore::{QKey, QStore, StoreKind};

const TOY: &str = "nodes: 1\ninputs: 1\nnode 1:\n  0.8 :: u1\n  0.2 :: x1\n";

#[test]
fn model_text_round_trips() {
    let lac = parse_model(LAC_OPERON_SOURCE).unwrap();
    assert_eq!(lac, builtin_lac_operon());
    assert_eq!(parse_model(&lac.to_string()).unwrap(), lac);
    let toy = parse_model(TOY).unwrap();
    assert_eq!((toy.n(), toy.m(), toy.n_actions()), (1, 1, 2));
}

#[test]
fn optimal_policy_from_the_oracle_matches_its_value() {
    let toy = parse_model(TOY).unwrap();
    let (x0, xd) = (toy.state(0), toy.state(1));
    let h = HorizonSpec::Constant(2);
    let reach = dp_max_reach(&toy, xd, &h).unwrap();
    let policy = |s: pbcn_reach::env::TimeState| reach.best_action(s.state, s.t);
    let est = mc_policy_eval(&toy, policy, x0, xd, &h, 100_000, 3).unwrap();
    assert!((est.success_rate - 0.96).abs() < 0.004, "{est:?}");
    let never = mc_policy_eval(&toy, |_| toy.input(0), x0, xd, &h, 1000, 3).unwrap();
    assert_eq!(never.success_rate, 0.0);
}

#[test]
fn distributed_horizon_training_runs_and_improves() {
    let lac = builtin_lac_operon();
    let x0 = PackedState::from_bit_string("000000000", 9).unwrap();
    let xd = PackedState::from_bit_string("111111011", 9).unwrap();
    let h = HorizonSpec::discretize_normal(8.0, 1.0, 7, 2).unwrap();
    let reach = dp_max_reach(&lac, xd, &h).unwrap();
    let p_star = reach.p_star(x0, 0);
    assert!(p_star > 0.5 && p_star < 0.714, "{p_star}");

    let episodes = 100_000;
    let spec = TrainSpec {
        model: &lac,
        x0,
        xd,
        horizon: &h,
        schedule: ScheduleParams::new(LrVariant::HarmonicBeta, 0.54, 0.0008, episodes).unwrap(),
        store: StoreKind::Sparse,
        gamma: 1.0,
        seed: 4,
    };
    let exact = pbcn_reach::eval::exact_q_table(&lac, xd, &h).unwrap();
    let keys = pbcn_reach::eval::reachable_keys(&lac, x0, xd, &h).unwrap();
    let reference = ErrorReference::with_keys(&exact, keys);
    let (q, log) = train(
        &spec,
        None,
        Some(ErrorLogging {
            reference: &reference,
            every: 10_000,
        }),
    )
    .unwrap();
    assert_eq!(log.records.len(), episodes as usize);
    assert_eq!(log.errors.len(), 11);
    assert!(log.errors.last().unwrap().1 < log.errors[0].1);
    // Horizons 6..=9 are all drawn.
    let mut seen = [false; 10];
    for r in log.records.iter().filter(|r| !r.success) {
        seen[r.steps as usize] = true;
    }
    assert!(seen[6..=9].iter().all(|&s| s));

    let est = mc_policy_eval(&lac, greedy_policy(&q), x0, xd, &h, 20_000, 1).unwrap();
    assert!(
        (est.success_rate - p_star).abs() < 0.05,
        "{} vs {p_star}",
        est.success_rate
    );
}

#[test]
fn saved_tables_reload_in_either_layout() {
    let toy = parse_model(TOY).unwrap();
    let h = HorizonSpec::Constant(3);
    let spec = TrainSpec {
        model: &toy,
        x0: toy.state(0),
        xd: toy.state(1),
        horizon: &h,
        schedule: ScheduleParams::new(LrVariant::Harmonic3, 0.7, 0.001, 500).unwrap(),
        store: StoreKind::Dense,
        gamma: 1.0,
        seed: 8,
    };
    let (q, _) = train(&spec, None, None).unwrap();
    let mut bytes = Vec::new();
    q.save(&mut bytes).unwrap();
    for kind in [StoreKind::Dense, StoreKind::Sparse] {
        let back = QStore::load(bytes.as_slice(), kind).unwrap();
        let key = QKey::new(toy.state(0), 0);
        assert_eq!(back.row_of(key), q.row_of(key));
        assert_eq!(back.visits(key), 500);
        let mut again = Vec::new();
        back.save(&mut again).unwrap();
        assert_eq!(again, bytes);
    }
}
