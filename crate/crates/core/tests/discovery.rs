use std::sync::Mutex;

use eqswarm_core::discovery::{
    run, Ablation, AgentState, DiscoveryError, CollectiveKnowledge, Discovery, Hypothesis, ProblemSpec, RunConfig, RunResult,
    RunState, ScoreMode, UpdateDirection,
};
use eqswarm_core::fit;
use eqswarm_core::generators::{
    AnalystBackend, BackendError, GeneratorBackend, MutationBackend, ProposalRequest, StructuralAnalyst,
};
use eqswarm_core::metrics::wmape;
use eqswarm_core::{Dataset, Expression};

fn line(n: usize, offset: f64) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![offset + i as f64 * 0.1]).collect();
    let y = rows.iter().map(|r| 2.0 * r[0] + 1.0).collect();
    Dataset::from_rows(vec!["x".into()], "y", &rows, y).unwrap()
}

fn curve(n: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![0.1 + i as f64 * 0.05, 1.0 + (i % 7) as f64]).collect();
    let y = rows.iter().map(|r| r[0].sin() * r[1] + 0.5 * r[0] * r[0]).collect();
    Dataset::from_rows(vec!["x".into(), "z".into()], "y", &rows, y).unwrap()
}

fn spec_for(data: &Dataset) -> ProblemSpec {
    ProblemSpec {
        name: "toy".into(),
        var_names: data.input_names().to_vec(),
        output_name: "y".into(),
        description: "synthetic test problem".into(),
        domain_tag: "physics".into(),
    }
}

fn cfg(agents: usize, iterations: usize, seed: u64) -> RunConfig {
    RunConfig {
        agents,
        iterations,
        seed,
        ..RunConfig::default()
    }
}

fn mutation_run(c: RunConfig, data: &Dataset) -> RunResult {
    run(c, spec_for(data), Hypothesis::new("p0").unwrap(), data, &MutationBackend::new(), &StructuralAnalyst).unwrap()
}

fn strip_time(mut r: RunResult) -> RunResult {
    r.wall_time_secs = 0.0;
    r
}

#[test]
fn recovers_a_line() {
    let train = line(50, 0.0);
    let test = line(50, 0.05);
    let r = mutation_run(cfg(8, 200, 7), &train);
    let e = Expression::parse(&r.best.expr_text, &["x".to_string()]).unwrap();
    let pred = e.evaluate_batch(&test, &r.best.params).unwrap();
    assert!(wmape(test.target(), &pred).unwrap() < 1e-6, "{}", r.best.expr_text);
    assert!(r.best.sse < 1e-12);
    assert!(r.best.depth <= 3 && r.best.param_count <= 2);
}

#[test]
fn archive_never_regresses() {
    let data = curve(60);
    for seed in 0..20 {
        let r = mutation_run(cfg(4, 25, seed), &data);
        for w in r.per_iteration.windows(2) {
            assert!(w[1].best_score >= w[0].best_score, "seed {seed}");
        }
        let top = r.per_iteration.iter().map(|s| s.generation_best_score).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.best.score, top);
    }
}

#[test]
fn identical_inputs_give_identical_results() {
    let data = curve(40);
    let a = strip_time(mutation_run(cfg(6, 15, 11), &data));
    let b = strip_time(mutation_run(cfg(6, 15, 11), &data));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = strip_time(mutation_run(cfg(6, 15, 12), &data));
    assert_ne!(a.per_iteration, c.per_iteration);
}

#[test]
fn thread_count_does_not_change_results() {
    let data = curve(40);
    let in_pool = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| strip_time(mutation_run(cfg(8, 10, 3), &data)))
    };
    assert_eq!(in_pool(1), in_pool(4));
}

#[test]
fn resume_matches_straight_run() {
    let data = curve(40);
    let c = cfg(5, 20, 9);
    let straight = mutation_run(c.clone(), &data);

    let gen = MutationBackend::new();
    let spec = spec_for(&data);
    let hyp = Hypothesis::new("p0").unwrap();
    let mut d = Discovery::new(c, spec, hyp, &data, &gen, &StructuralAnalyst).unwrap();
    for _ in 0..8 {
        d.step().unwrap();
    }
    let saved = serde_json::to_string(d.state()).unwrap();
    drop(d);
    let state: RunState = serde_json::from_str(&saved).unwrap();
    let mut d = Discovery::from_state(state, &data, &gen, &StructuralAnalyst).unwrap();
    d.run_to_end().unwrap();
    let resumed = d.result().unwrap();
    assert_eq!(resumed.per_iteration, straight.per_iteration);
    assert_eq!(resumed.best, straight.best);
    assert_eq!(resumed.knowledge, straight.knowledge);
}

struct FlakyAnalyst {
    calls: std::sync::atomic::AtomicUsize,
    fail_at: usize,
}

impl AnalystBackend for FlakyAnalyst {
    fn analyze(&self, spec: &ProblemSpec, f_best_text: &str, domain_tag: &str) -> Result<String, BackendError> {
        let n = self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        if n == self.fail_at {
            return Err(BackendError::HttpStatus(503));
        }
        StructuralAnalyst.analyze(spec, f_best_text, domain_tag)
    }
}

#[test]
fn failed_step_leaves_state_untouched() {
    let data = curve(40);
    let c = cfg(5, 20, 9);
    let straight = mutation_run(c.clone(), &data);

    let gen = MutationBackend::new();
    let analyst = FlakyAnalyst {
        calls: 0.into(),
        fail_at: 3,
    };
    let mut d = Discovery::new(c, spec_for(&data), Hypothesis::new("p0").unwrap(), &data, &gen, &analyst).unwrap();
    let mut failed = false;
    while !d.is_done() {
        let before = d.state().clone();
        match d.step() {
            Ok(_) => {}
            Err(e) => {
                assert!(matches!(e, DiscoveryError::Backend(_)), "{e}");
                assert!(!failed);
                failed = true;
                let mut after = d.state().clone();
                after.elapsed_secs = before.elapsed_secs;
                assert_eq!(after, before);
            }
        }
    }
    assert!(failed);
    let r = d.result().unwrap();
    assert_eq!(r.per_iteration, straight.per_iteration);
    assert_eq!(r.knowledge, straight.knowledge);
    assert_eq!((r.knowledge_reads, r.knowledge_writes), (straight.knowledge_reads, straight.knowledge_writes));
}

#[test]
fn msi_has_no_knowledge_traffic() {
    let data = curve(30);
    let c = RunConfig {
        ablation: Ablation::Msi,
        ..cfg(8, 20, 1)
    };
    let r = mutation_run(c, &data);
    assert_eq!(r.knowledge_reads, 0);
    assert_eq!(r.knowledge_writes, 0);
    assert!(r.knowledge.is_none());
    assert!(r.per_iteration.iter().all(|s| s.agent_scores.len() == 1 && s.knowledge_iteration.is_none()));
}

#[test]
fn sse_only_scores_are_negated_sse() {
    let data = curve(30);
    let c = RunConfig {
        ablation: Ablation::NoAst,
        ..cfg(4, 10, 2)
    };
    let gen = MutationBackend::new();
    let mut d = Discovery::new(c, spec_for(&data), Hypothesis::new("p0").unwrap(), &data, &gen, &StructuralAnalyst).unwrap();
    assert_eq!(d.state().config.score_mode, ScoreMode::SseOnly);
    while !d.is_done() {
        d.step().unwrap();
        for a in &d.state().agents {
            let e = Expression::parse(&a.expr_text, data.input_names()).unwrap();
            let sse = fit::sse(&e, &data, &a.params).unwrap();
            if sse.is_finite() {
                assert_eq!(a.score, -sse);
            } else {
                assert_eq!(a.score, f64::NEG_INFINITY);
            }
        }
    }
}

/// Records which knowledge iteration each revise call observed.
struct Recorder {
    inner: MutationBackend,
    seen: Mutex<Vec<(usize, Option<usize>)>>,
}

impl GeneratorBackend for Recorder {
    fn initial(&self, req: &ProposalRequest<'_>, spec: &ProblemSpec, hyp: &Hypothesis) -> Result<String, BackendError> {
        self.seen.lock().unwrap().push((req.iteration, None));
        self.inner.initial(req, spec, hyp)
    }

    fn revise(
        &self,
        req: &ProposalRequest<'_>,
        spec: &ProblemSpec,
        state: &AgentState,
        ck: Option<&CollectiveKnowledge>,
        direction: UpdateDirection,
    ) -> Result<String, BackendError> {
        self.seen.lock().unwrap().push((req.iteration, ck.map(|c| c.iteration)));
        self.inner.revise(req, spec, state, ck, direction)
    }
}

#[test]
fn agents_only_see_previous_iteration_knowledge() {
    let data = curve(30);
    let rec = Recorder {
        inner: MutationBackend::new(),
        seen: Mutex::new(Vec::new()),
    };
    let r = run(cfg(6, 12, 5), spec_for(&data), Hypothesis::new("p0").unwrap(), &data, &rec, &StructuralAnalyst).unwrap();
    let seen = rec.seen.into_inner().unwrap();
    assert_eq!(seen.len(), 6 * 12);
    for (iteration, ck) in seen {
        if iteration == 1 {
            assert_eq!(ck, None);
        } else {
            assert_eq!(ck, Some(iteration - 1));
        }
    }
    assert_eq!(r.knowledge_reads, 6 * 11);
    assert_eq!(r.knowledge_writes, 12);
}

/// Emits garbage for agent 1 at every iteration after the first.
struct Garbler {
    inner: MutationBackend,
    calls: Mutex<usize>,
}

impl GeneratorBackend for Garbler {
    fn initial(&self, req: &ProposalRequest<'_>, spec: &ProblemSpec, hyp: &Hypothesis) -> Result<String, BackendError> {
        self.inner.initial(req, spec, hyp)
    }

    fn revise(
        &self,
        req: &ProposalRequest<'_>,
        spec: &ProblemSpec,
        state: &AgentState,
        ck: Option<&CollectiveKnowledge>,
        direction: UpdateDirection,
    ) -> Result<String, BackendError> {
        if req.agent_id == 1 {
            *self.calls.lock().unwrap() += 1;
            if req.attempt > 0 {
                assert!(req.feedback.is_some());
            }
            return Ok("p0 * (x".into());
        }
        self.inner.revise(req, spec, state, ck, direction)
    }
}

#[test]
fn unparseable_proposals_keep_previous_state() {
    let data = curve(30);
    let g = Garbler {
        inner: MutationBackend::new(),
        calls: Mutex::new(0),
    };
    let r = run(cfg(3, 5, 5), spec_for(&data), Hypothesis::new("p0").unwrap(), &data, &g, &StructuralAnalyst).unwrap();
    assert_eq!(*g.calls.lock().unwrap(), 4 * 4);
    let first = r.per_iteration[0].agent_exprs[1].clone();
    for s in &r.per_iteration[1..] {
        assert_eq!(s.agent_exprs[1], first);
        assert_eq!(s.proposal_failures, 1);
    }
}

struct Broken;

impl GeneratorBackend for Broken {
    fn health(&self) -> Result<(), BackendError> {
        Err(BackendError::Unhealthy("offline".into()))
    }

    fn initial(&self, _: &ProposalRequest<'_>, _: &ProblemSpec, _: &Hypothesis) -> Result<String, BackendError> {
        unreachable!("health check precedes generation")
    }

    fn revise(
        &self,
        _: &ProposalRequest<'_>,
        _: &ProblemSpec,
        _: &AgentState,
        _: Option<&CollectiveKnowledge>,
        _: UpdateDirection,
    ) -> Result<String, BackendError> {
        unreachable!("health check precedes generation")
    }
}

#[test]
fn unhealthy_backend_stops_before_first_iteration() {
    let data = curve(10);
    let err = run(cfg(2, 2, 0), spec_for(&data), Hypothesis::new("p0").unwrap(), &data, &Broken, &StructuralAnalyst);
    assert!(err.is_err());
}

#[test]
fn mismatched_dataset_rejected() {
    let data = curve(10);
    let mut spec = spec_for(&data);
    spec.var_names = vec!["a".into(), "b".into()];
    let res = run(cfg(2, 2, 0), spec, Hypothesis::new("p0").unwrap(), &data, &MutationBackend::new(), &StructuralAnalyst);
    assert!(res.is_err());
}
