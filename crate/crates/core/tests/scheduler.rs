use problem_replay::{
    Error, LearnerConfig, ProblemId, Reason, RolloutGroup, Scheduler, SchedulerConfig, Simulation,
    Status, Strategy,
};
use proptest::prelude::*;

fn group(id: ProblemId, k: usize) -> RolloutGroup {
    RolloutGroup::new(id, (0..8).map(|i| (i < k) as u8).collect()).unwrap()
}

fn config(strategy: Strategy, seed: u64) -> SchedulerConfig {
    SchedulerConfig {
        strategy,
        rng_seed: seed,
        ..SchedulerConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conservation_under_arbitrary_outcomes(
        seed in any::<u64>(),
        m in 4usize..40,
        outcomes in prop::collection::vec(0usize..=8, 50..200),
        tree in any::<bool>(),
    ) {
        let strategy = if tree { Strategy::SumTree } else { Strategy::MaxHeap };
        let mut sched = Scheduler::new(config(strategy, seed), m).unwrap();
        let mut ks = outcomes.iter().cycle();
        for i in 0..outcomes.len() as u64 {
            let plan = match sched.select_batch() {
                Ok(p) => p,
                Err(Error::NoTrainableProblems) => sched.select_retest_only().unwrap(),
                Err(e) => panic!("{e}"),
            };
            prop_assert_eq!(plan.step, i + 1);
            prop_assert!(sched.audit().is_ok());
            let groups: Vec<RolloutGroup> = plan.ids().map(|id| group(id, *ks.next().unwrap())).collect();
            let transitions = sched.report_results(&groups).unwrap();
            for t in &transitions {
                prop_assert!(t.from.has_edge_to(Status::Active) || t.from == Status::Active);
                prop_assert!(t.to == Status::Active || Status::Active.has_edge_to(t.to));
            }
            let audit = sched.audit();
            prop_assert!(audit.is_ok(), "{:?}", audit);
            prop_assert_eq!(sched.active().len() + sched.solved_pool().len() + sched.unsolved_pool().len(), m);
        }
    }

    #[test]
    fn pool_recency_matches_records(seed in any::<u64>(), steps in 20u64..120) {
        let mut sim = Simulation::new(
            config(Strategy::MaxHeap, seed),
            LearnerConfig { num_problems: 60, ..LearnerConfig::default() },
        ).unwrap();
        sim.run(steps).unwrap();
        let s = sim.scheduler();
        for pool in [s.solved_pool(), s.unsolved_pool()] {
            for (step, id) in pool.entries() {
                prop_assert_eq!(s.record(id).unwrap().last_eval_step, Some(step));
            }
        }
    }
}

#[test]
fn identical_seeds_identical_plans() {
    for strategy in [Strategy::MaxHeap, Strategy::SumTree] {
        let run = |seed| {
            let mut sim =
                Simulation::new(config(strategy, seed), LearnerConfig::default()).unwrap();
            (0..200)
                .map(|_| sim.step().unwrap().plan)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }
}

#[test]
fn retests_take_the_least_recently_evaluated() {
    let mut sim = Simulation::new(config(Strategy::MaxHeap, 3), LearnerConfig::default()).unwrap();
    for _ in 0..300 {
        let before: Vec<(u64, ProblemId)> = sim.scheduler().unsolved_pool().entries();
        let out = sim.step().unwrap();
        let picked: Vec<ProblemId> = out
            .plan
            .entries
            .iter()
            .filter(|e| e.1 == Reason::RetestUnsolved)
            .map(|e| e.0)
            .collect();
        let oldest: Vec<ProblemId> = before.iter().take(picked.len()).map(|e| e.1).collect();
        assert_eq!(picked, oldest, "step {}", out.plan.step);
    }
}

#[test]
fn checkpoint_file_resumes_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkpoint.txt");
    for strategy in [Strategy::MaxHeap, Strategy::SumTree] {
        let mut a = Scheduler::new(config(strategy, 9), 50).unwrap();
        let drive = |s: &mut Scheduler| {
            let plan = s.select_batch().unwrap();
            let groups: Vec<RolloutGroup> = plan
                .ids()
                .map(|id| group(id, (id.index() * 3 + plan.step as usize) % 7 + 1))
                .collect();
            s.report_results(&groups).unwrap();
            plan
        };
        for _ in 0..40 {
            drive(&mut a);
        }
        std::fs::write(&path, a.checkpoint_string()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut b = Scheduler::from_checkpoint_str(&text).unwrap();
        for _ in 0..40 {
            assert_eq!(drive(&mut a), drive(&mut b));
        }
        assert_eq!(a.checkpoint_string(), b.checkpoint_string());
    }
}
