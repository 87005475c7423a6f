//! Deterministic discrete-event simulation of a team of agents.
//!
//! All time is simulated. Message delays and planning durations are drawn
//! from seeded generators on separate streams, so a scenario and seed fully
//! determine the event log.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{boxes_collide, check_pair_collision_from, BoundaryBox};
use crate::planner::PlannerConfig;
use crate::protocol::{Agent, AgentConfig, AgentId, Effect, LogEvent, Message, Mode, Timer, TimerKind};
use crate::trajectory::{DynamicLimits, StopCriteria, Trajectory, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("deadlocked scenario at t = {0}")]
    Deadlocked(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Jitter {
    None,
    Uniform {
        a: f64,
        b: f64,
    },
    /// Exponential with the given mean, truncated at `cap`.
    Exponential {
        mean: f64,
        cap: f64,
    },
}

impl Jitter {
    pub fn cap(&self) -> f64 {
        match *self {
            Jitter::None => 0.0,
            Jitter::Uniform { b, .. } => b,
            Jitter::Exponential { cap, .. } => cap,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Jitter::None => 0.0,
            Jitter::Uniform { a, b } if a == b => a,
            Jitter::Uniform { a, b } => rng.random_range(a..=b),
            Jitter::Exponential { mean, cap } => {
                let exp = Exp::new(1.0 / mean).expect("validated mean");
                exp.sample(rng).min(cap)
            }
        }
    }

    /// Analytic quantile, `q` in [0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        match *self {
            Jitter::None => 0.0,
            Jitter::Uniform { a, b } => a + q * (b - a),
            Jitter::Exponential { mean, cap } => {
                if q >= 1.0 {
                    cap
                } else {
                    (-mean * (1.0 - q).ln()).min(cap)
                }
            }
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            Jitter::None => true,
            Jitter::Uniform { a, b } => a.is_finite() && b.is_finite() && 0.0 <= a && a <= b,
            Jitter::Exponential { mean, cap } => mean > 0.0 && cap.is_finite() && cap >= 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub delta_introd: f64,
    pub jitter: Jitter,
}

impl Default for DelayModel {
    fn default() -> Self {
        Self {
            delta_introd: 0.0,
            jitter: Jitter::Uniform { a: 0.0, b: 0.03 },
        }
    }
}

impl DelayModel {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.delta_introd + self.jitter.sample(rng)
    }

    /// Largest delay the model can produce.
    pub fn max_delay(&self) -> f64 {
        self.delta_introd + self.jitter.cap()
    }

    pub fn quantile(&self, q: f64) -> f64 {
        self.delta_introd + self.jitter.quantile(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanDuration {
    Fixed { value: f64 },
    Uniform { min: f64, max: f64 },
}

impl Default for PlanDuration {
    fn default() -> Self {
        PlanDuration::Uniform { min: 0.015, max: 0.060 }
    }
}

impl PlanDuration {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            PlanDuration::Fixed { value } => value,
            PlanDuration::Uniform { min, max } if min == max => min,
            PlanDuration::Uniform { min, max } => rng.random_range(min..=max),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PlanDuration::Fixed { value } => value,
            PlanDuration::Uniform { min, max } => 0.5 * (min + max),
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            PlanDuration::Fixed { value } => value.is_finite() && value > 0.0,
            PlanDuration::Uniform { min, max } => min.is_finite() && max.is_finite() && 0.0 < min && min <= max,
        }
    }
}

/// Seeded planning-duration generator, independent of the delay stream.
pub struct PlanDurationSampler {
    dist: PlanDuration,
    rng: ChaCha8Rng,
}

impl PlanDurationSampler {
    pub fn new(dist: PlanDuration, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Self { dist, rng }
    }

    pub fn next_duration(&mut self) -> f64 {
        self.dist.sample(&mut self.rng)
    }
}

/// Seeded per-recipient delay generator.
pub struct DelaySampler {
    model: DelayModel,
    rng: ChaCha8Rng,
}

impl DelaySampler {
    pub fn new(model: DelayModel, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        Self { model, rng }
    }

    pub fn next_delay(&mut self) -> f64 {
        self.model.sample(&mut self.rng)
    }
}

/// Every realized message delay of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub samples: Vec<f64>,
}

impl DelayStats {
    pub fn record(&mut self, d: f64) {
        self.samples.push(d);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min(&self) -> Option<f64> {
        self.samples.iter().copied().reduce(f64::min)
    }

    pub fn max(&self) -> Option<f64> {
        self.samples.iter().copied().reduce(f64::max)
    }

    pub fn merge(&mut self, other: &DelayStats) {
        self.samples.extend_from_slice(&other.samples);
    }

    /// Nearest-rank percentile, `p` in [0, 100].
    pub fn percentile(&self, p: f64) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        let mut sorted = self.samples.clone();
        sorted.sort_by(f64::total_cmp);
        let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
        Some(sorted[rank.clamp(1, sorted.len()) - 1])
    }

    /// Counts per bin `[k·width, (k+1)·width)`, from bin 0 to the last
    /// non-empty one.
    pub fn histogram(&self, width: f64) -> Vec<(f64, usize)> {
        let Some(max) = self.max() else {
            return Vec::new();
        };
        let bins = (max / width).floor() as usize + 1;
        let mut counts = vec![0usize; bins];
        for &d in &self.samples {
            counts[((d / width).floor() as usize).min(bins - 1)] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(k, c)| (k as f64 * width, c))
            .collect()
    }
}

fn default_horizon() -> f64 {
    60.0
}

/// Everything about a run except the agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub mode: Mode,
    pub delta_dc: f64,
    pub delay: DelayModel,
    pub plan_duration: PlanDuration,
    pub limits: DynamicLimits,
    #[serde(rename = "box")]
    pub bbox: BoundaryBox,
    pub seed: u64,
    /// Simulated time limit (s).
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub sample_dt: f64,
    pub check_duration: f64,
    pub recheck_duration: f64,
    /// Overrides the default switch-time budget.
    pub latency_budget: Option<f64>,
    pub max_commits: Option<u32>,
    pub startup_spacing: f64,
    pub goal_tolerance: f64,
    pub goal_speed: f64,
    pub planner: PlannerConfig,
    pub stops: StopCriteria,
    pub record_log: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            mode: Mode::Rmader,
            delta_dc: 0.035,
            delay: DelayModel::default(),
            plan_duration: PlanDuration::default(),
            limits: DynamicLimits::default(),
            bbox: BoundaryBox::default(),
            seed: 0,
            horizon: default_horizon(),
            sample_dt: 0.01,
            check_duration: 0.005,
            recheck_duration: 0.001,
            latency_budget: None,
            max_commits: None,
            startup_spacing: 0.25,
            goal_tolerance: 0.15,
            goal_speed: 0.05,
            planner: PlannerConfig::default(),
            stops: StopCriteria::default(),
            record_log: false,
        }
    }
}

impl SimParams {
    /// Switch-time budget: 150 % of the expected time from iteration start
    /// to commit (delay check only in the robust mode).
    pub fn effective_latency_budget(&self) -> f64 {
        self.latency_budget.unwrap_or_else(|| {
            let tail = match self.mode {
                Mode::Rmader => self.delta_dc,
                Mode::Mader => self.recheck_duration,
            };
            1.5 * (self.plan_duration.mean() + self.check_duration + tail)
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidScenario(m.to_string()));
        if !(self.delta_dc.is_finite() && self.delta_dc >= 0.0) {
            return bad("delta_dc must be non-negative");
        }
        if !(self.delay.delta_introd.is_finite() && self.delay.delta_introd >= 0.0) || !self.delay.jitter.is_valid() {
            return bad("invalid delay model");
        }
        if !self.plan_duration.is_valid() {
            return bad("invalid plan duration");
        }
        if !self.limits.is_valid() || !self.bbox.is_valid() {
            return bad("invalid limits or box");
        }
        if !(self.sample_dt > 0.0 && self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("sample_dt and horizon must be positive");
        }
        if !(self.check_duration >= 0.0 && self.recheck_duration >= 0.0) {
            return bad("phase durations must be non-negative");
        }
        if self.effective_latency_budget() <= 0.0 {
            return bad("latency budget must be positive");
        }
        if self.planner.num_segments < 2 {
            return bad("planner needs at least 2 segments");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub start: Vec3,
    pub goal: Vec3,
    /// Startup instant; defaults to index × startup_spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub startup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub agents: Vec<AgentSpec>,
    #[serde(flatten)]
    pub params: SimParams,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))
    }

    pub fn startup(&self, i: usize) -> f64 {
        self.agents[i].startup.unwrap_or(i as f64 * self.params.startup_spacing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentMetrics {
    pub id: AgentId,
    pub startup: f64,
    pub reached: bool,
    pub reach_time: Option<f64>,
    pub travel_time: f64,
    pub stops: usize,
    pub accel_integral: f64,
    pub jerk_integral: f64,
    pub iterations: u64,
    pub commits: u64,
    pub stale_messages: u64,
    pub discards: std::collections::BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditViolation {
    pub t: f64,
    pub agent: AgentId,
    pub peer: AgentId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub mode: Mode,
    /// Distinct colliding pairs seen by the ground-truth monitor.
    pub collisions: usize,
    pub colliding_pairs: Vec<(AgentId, AgentId)>,
    pub first_collision: Option<f64>,
    /// Commits that conflict with a peer's actual committed trajectory.
    pub audit_violations: Vec<AuditViolation>,
    /// All agents reached their goals before the horizon.
    pub finished: bool,
    pub end_time: f64,
    pub agents: Vec<AgentMetrics>,
    #[serde(skip)]
    pub delays: DelayStats,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub log: Vec<LogEvent>,
    /// Executed trajectory of every agent.
    pub executed: Vec<Trajectory>,
}

/// One JSON object per line.
pub fn log_to_jsonl(log: &[LogEvent]) -> String {
    let mut out = String::new();
    for e in log {
        out.push_str(&serde_json::to_string(e).expect("log events serialize"));
        out.push('\n');
    }
    out
}

enum EventKind {
    Start(AgentId),
    Deliver { to: AgentId, msg: Message },
    Timer { agent: AgentId, timer: Timer },
    Sample(u64),
}

struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Queue {
    heap: BinaryHeap<Event>,
    seq: u64,
    /// Events other than monitor samples.
    active: usize,
}

impl Queue {
    fn push(&mut self, time: f64, kind: EventKind) {
        if !matches!(kind, EventKind::Sample(_)) {
            self.active += 1;
        }
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<Event> {
        let e = self.heap.pop()?;
        if !matches!(e.kind, EventKind::Sample(_)) {
            self.active -= 1;
        }
        Some(e)
    }
}

struct Kernel {
    agents: Vec<Agent>,
    queue: Queue,
    delays: DelaySampler,
    plans: PlanDurationSampler,
    stats: DelayStats,
    log: Vec<LogEvent>,
    audit: Vec<AuditViolation>,
    bbox: BoundaryBox,
}

impl Kernel {
    fn apply(&mut self, now: f64, from: AgentId, effects: Vec<Effect>) {
        for e in effects {
            match e {
                Effect::Broadcast(msg) => {
                    for to in 0..self.agents.len() {
                        if to == from {
                            continue;
                        }
                        let d = self.delays.next_delay();
                        self.stats.record(d);
                        self.queue.push(now + d, EventKind::Deliver { to, msg: msg.clone() });
                    }
                }
                Effect::Timer(timer) => self.queue.push(timer.at, EventKind::Timer { agent: from, timer }),
                Effect::Commit(rec) => {
                    for (j, peer) in self.agents.iter().enumerate() {
                        if j == from {
                            continue;
                        }
                        let hit =
                            check_pair_collision_from(&rec.trajectory, peer.committed(), &self.bbox, rec.t_switch)
                                .unwrap_or(true);
                        if hit {
                            self.audit.push(AuditViolation {
                                t: now,
                                agent: from,
                                peer: j,
                            });
                        }
                    }
                }
                Effect::Log(ev) => self.log.push(ev),
            }
        }
    }

    fn try_start(&mut self, now: f64, i: AgentId) {
        if self.agents[i].can_start_iteration() {
            let d = self.plans.next_duration();
            let fx = self.agents[i].start_iteration(now, d);
            self.apply(now, i, fx);
        }
    }
}

fn agent_config(params: &SimParams, goal: Vec3) -> AgentConfig {
    AgentConfig {
        mode: params.mode,
        delta_dc: params.delta_dc,
        bbox: params.bbox,
        limits: params.limits,
        goal,
        latency_budget: params.effective_latency_budget(),
        check_duration: params.check_duration,
        recheck_duration: params.recheck_duration,
        max_commits: params.max_commits,
        planner: params.planner.clone(),
        record_log: params.record_log,
    }
}

/// Runs a scenario until every agent has reached its goal or the horizon.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    let p = &scenario.params;
    p.validate()?;
    if scenario.agents.is_empty() {
        return Err(SimError::InvalidScenario("no agents".into()));
    }
    let n = scenario.agents.len();
    let mut k = Kernel {
        agents: scenario
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| Agent::new(i, a.start, agent_config(p, a.goal)))
            .collect(),
        queue: Queue {
            heap: BinaryHeap::new(),
            seq: 0,
            active: 0,
        },
        delays: DelaySampler::new(p.delay, p.seed),
        plans: PlanDurationSampler::new(p.plan_duration, p.seed),
        stats: DelayStats::default(),
        log: Vec::new(),
        audit: Vec::new(),
        bbox: p.bbox,
    };
    for i in 0..n {
        let fx = k.agents[i].initial_broadcast(0.0);
        k.apply(0.0, i, fx);
        k.queue.push(scenario.startup(i), EventKind::Start(i));
    }
    k.queue.push(0.0, EventKind::Sample(0));

    let mut pairs: BTreeSet<(AgentId, AgentId)> = BTreeSet::new();
    let mut first_collision = None;
    let mut reach: Vec<Option<f64>> = vec![None; n];
    let mut now = 0.0;
    let mut finished = false;

    while let Some(ev) = k.queue.pop() {
        if ev.time > p.horizon {
            break;
        }
        debug_assert!(ev.time >= now);
        now = ev.time;
        match ev.kind {
            EventKind::Start(i) => k.try_start(now, i),
            EventKind::Timer { agent, timer } => {
                if timer.kind == TimerKind::IterationStart {
                    k.try_start(now, agent);
                } else {
                    let fx = k.agents[agent].on_timer(now, timer);
                    k.apply(now, agent, fx);
                }
            }
            EventKind::Deliver { to, msg } => {
                let fx = k.agents[to].on_message(now, &msg);
                k.apply(now, to, fx);
            }
            EventKind::Sample(step) => {
                let states: Vec<_> = k
                    .agents
                    .iter()
                    .map(|a| a.committed().evaluate(now).expect("committed covers now"))
                    .collect();
                for i in 0..n {
                    for j in i + 1..n {
                        if boxes_collide(&states[i].position, &states[j].position, &p.bbox) {
                            pairs.insert((i, j));
                            first_collision.get_or_insert(now);
                        }
                    }
                }
                for (i, a) in k.agents.iter_mut().enumerate() {
                    if reach[i].is_none()
                        && now >= scenario.startup(i)
                        && (states[i].position - a.config().goal).norm() <= p.goal_tolerance
                        && states[i].velocity.norm() < p.goal_speed
                    {
                        reach[i] = Some(now);
                        a.mark_done();
                    }
                }
                if reach.iter().all(Option::is_some) {
                    finished = true;
                    break;
                }
                if k.queue.active == 0 {
                    // nothing can change any more unless someone is still flying
                    if k.agents.iter().any(|a| !a.is_done() && a.can_start_iteration()) {
                        return Err(SimError::Deadlocked(now));
                    }
                    let last_motion = k.agents.iter().map(|a| a.committed().end_time()).fold(0.0, f64::max);
                    if now > last_motion + 1.0 {
                        break;
                    }
                }
                k.queue
                    .push((step + 1) as f64 * p.sample_dt, EventKind::Sample(step + 1));
            }
        }
    }

    let end_time = now;
    let agents = k
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let startup = scenario.startup(i).min(end_time);
            let stop = reach[i].unwrap_or(end_time);
            let flown = a.executed().window(startup, stop);
            let smooth = flown.smoothness_integrals();
            let st = a.stats();
            AgentMetrics {
                id: i,
                startup,
                reached: reach[i].is_some(),
                reach_time: reach[i],
                travel_time: (stop - startup).max(0.0),
                stops: flown.count_stops(&p.stops),
                accel_integral: smooth.accel_integral,
                jerk_integral: smooth.jerk_integral,
                iterations: st.iterations,
                commits: st.commits,
                stale_messages: st.stale_messages,
                discards: st.discards.clone(),
            }
        })
        .collect();
    let executed = k.agents.iter().map(|a| a.executed().clone()).collect();
    Ok(RunOutput {
        metrics: RunMetrics {
            seed: p.seed,
            mode: p.mode,
            collisions: pairs.len(),
            colliding_pairs: pairs.into_iter().collect(),
            first_collision,
            audit_violations: k.audit,
            finished,
            end_time,
            agents,
            delays: k.stats,
        },
        log: k.log,
        executed,
    })
}

/// Shared-ownership view used by callers that keep trajectories around.
pub fn executed_arcs(out: &RunOutput) -> Vec<Arc<Trajectory>> {
    out.executed.iter().cloned().map(Arc::new).collect()
}
