//! Per-agent deconfliction state machine and trajectory store.
//!
//! An [`Agent`] never touches a clock or a network. The simulation kernel
//! feeds it timer firings and message deliveries and executes the returned
//! [`Effect`]s. Planning is performed when an iteration starts; its result is
//! only acted on when the kernel fires the matching `PlanComplete` timer.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::geometry::{check_pair_collision_from, BoundaryBox};
use crate::planner::{plan, PeerTrajectory, PlanOutcome, PlanRequest, PlanResult, PlannerConfig};
use crate::trajectory::{DynamicLimits, StateSample, Trajectory, Vec3};

pub type AgentId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mader,
    Rmader,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Mader => "mader",
            Mode::Rmader => "rmader",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    New,
    Committed,
}

#[derive(Debug, Clone)]
pub struct Message {
    pub sender: AgentId,
    pub kind: MessageKind,
    pub trajectory: Arc<Trajectory>,
    pub t_send: f64,
    /// Per-sender counter; orders messages sent at the same instant.
    pub seq: u64,
}

#[derive(Debug, Clone, Default)]
pub struct PeerEntry {
    pub committed: Option<Arc<Trajectory>>,
    pub pending_new: Option<Arc<Trajectory>>,
    last_seq: Option<u64>,
}

/// Latest committed and pending trajectory of every peer heard from.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryStore {
    peers: BTreeMap<AgentId, PeerEntry>,
}

impl TrajectoryStore {
    /// Applies a message; returns `false` if it is older than what is stored.
    pub fn apply(&mut self, msg: &Message) -> bool {
        let entry = self.peers.entry(msg.sender).or_default();
        if entry.last_seq.is_some_and(|s| s >= msg.seq) {
            return false;
        }
        entry.last_seq = Some(msg.seq);
        match msg.kind {
            MessageKind::New => entry.pending_new = Some(msg.trajectory.clone()),
            MessageKind::Committed => {
                entry.committed = Some(msg.trajectory.clone());
                entry.pending_new = None;
            }
        }
        true
    }

    pub fn get(&self, id: AgentId) -> Option<&PeerEntry> {
        self.peers.get(&id)
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    /// Every stored trajectory, committed before pending, in peer order.
    pub fn trajectories(&self) -> impl Iterator<Item = (AgentId, &Arc<Trajectory>)> {
        self.peers
            .iter()
            .flat_map(|(id, e)| e.committed.iter().chain(e.pending_new.iter()).map(move |t| (*id, t)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub mode: Mode,
    pub delta_dc: f64,
    #[serde(rename = "box")]
    pub bbox: BoundaryBox,
    pub limits: DynamicLimits,
    pub goal: Vec3,
    /// Time from iteration start to the switch onto the new plan (s).
    pub latency_budget: f64,
    pub check_duration: f64,
    pub recheck_duration: f64,
    /// Stop iterating after this many commits.
    pub max_commits: Option<u32>,
    pub planner: PlannerConfig,
    pub record_log: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Optimizing,
    Checking,
    DelayChecking,
    Rechecking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerKind {
    IterationStart,
    PlanComplete,
    CheckComplete,
    DelayCheckComplete,
    RecheckComplete,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timer {
    pub at: f64,
    pub kind: TimerKind,
    pub iteration: u64,
}

/// Where in the iteration a candidate was given up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardStage {
    Optimization,
    Stale,
    Check,
    Recheck,
    DelayCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PhaseChange,
    Broadcast,
    Receive,
    DropStale,
    Commit,
    Discard,
}

#[derive(Debug, Clone, Serialize)]
pub struct LogEvent {
    pub t: f64,
    pub agent: AgentId,
    pub event: EventKind,
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct CommitRecord {
    pub t: f64,
    pub t_switch: f64,
    pub trajectory: Arc<Trajectory>,
}

#[derive(Debug, Clone)]
pub enum Effect {
    Broadcast(Message),
    Timer(Timer),
    Commit(CommitRecord),
    Log(LogEvent),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AgentStats {
    pub iterations: u64,
    pub commits: u64,
    pub discards: BTreeMap<String, u64>,
    pub stale_messages: u64,
}

/// 64-bit FNV-1a over the bit patterns of every time and control point.
pub fn trajectory_digest(traj: &Trajectory) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |x: f64| {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for s in traj.segments() {
        eat(s.t0);
        eat(s.t1);
        for p in &s.control_points {
            eat(p.x);
            eat(p.y);
            eat(p.z);
        }
    }
    h
}

struct Iteration {
    id: u64,
    t_switch: f64,
    outcome: Option<PlanOutcome>,
    candidate: Option<Arc<Trajectory>>,
    check_passed: bool,
    arrivals_in_check: bool,
}

pub struct Agent {
    id: AgentId,
    cfg: AgentConfig,
    committed: Arc<Trajectory>,
    executed: Trajectory,
    store: TrajectoryStore,
    phase: Phase,
    phase_since: f64,
    iteration: Iteration,
    next_seq: u64,
    done: bool,
    stats: AgentStats,
}

impl Agent {
    /// Agent hovering at `start` from t = 0.
    pub fn new(id: AgentId, start: Vec3, cfg: AgentConfig) -> Self {
        let hover = Trajectory::hold(start, 0.0);
        Self {
            id,
            cfg,
            committed: Arc::new(hover.clone()),
            executed: hover,
            store: TrajectoryStore::default(),
            phase: Phase::Idle,
            phase_since: 0.0,
            iteration: Iteration {
                id: 0,
                t_switch: 0.0,
                outcome: None,
                candidate: None,
                check_passed: false,
                arrivals_in_check: false,
            },
            next_seq: 0,
            done: false,
            stats: AgentStats::default(),
        }
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn phase_since(&self) -> f64 {
        self.phase_since
    }

    pub fn committed(&self) -> &Arc<Trajectory> {
        &self.committed
    }

    /// Everything flown so far followed by the current commitment.
    pub fn executed(&self) -> &Trajectory {
        &self.executed
    }

    pub fn store(&self) -> &TrajectoryStore {
        &self.store
    }

    pub fn stats(&self) -> &AgentStats {
        &self.stats
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn mark_done(&mut self) {
        self.done = true;
    }

    /// Candidate already announced as NEW and not yet resolved.
    pub fn announced_candidate(&self) -> Option<&Arc<Trajectory>> {
        match self.phase {
            Phase::DelayChecking => self.iteration.candidate.as_ref(),
            _ => None,
        }
    }

    pub fn can_start_iteration(&self) -> bool {
        self.phase == Phase::Idle
            && !self.done
            && self.cfg.max_commits.is_none_or(|m| self.stats.commits < u64::from(m))
    }

    /// Announces the initial hover as the committed trajectory.
    pub fn initial_broadcast(&mut self, now: f64) -> Vec<Effect> {
        let mut fx = Vec::new();
        let traj = Arc::new(self.committed.restrict_from(now));
        self.broadcast(now, MessageKind::Committed, traj, &mut fx);
        fx
    }

    fn log(&self, fx: &mut Vec<Effect>, t: f64, event: EventKind, payload: serde_json::Value) {
        if self.cfg.record_log {
            fx.push(Effect::Log(LogEvent {
                t,
                agent: self.id,
                event,
                payload,
            }));
        }
    }

    fn set_phase(&mut self, now: f64, phase: Phase, fx: &mut Vec<Effect>) {
        self.phase = phase;
        self.phase_since = now;
        self.log(
            fx,
            now,
            EventKind::PhaseChange,
            json!({ "phase": phase, "iteration": self.iteration.id }),
        );
    }

    fn broadcast(&mut self, now: f64, kind: MessageKind, traj: Arc<Trajectory>, fx: &mut Vec<Effect>) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.log(
            fx,
            now,
            EventKind::Broadcast,
            json!({ "kind": kind, "seq": seq, "digest": format!("{:016x}", trajectory_digest(&traj)) }),
        );
        fx.push(Effect::Broadcast(Message {
            sender: self.id,
            kind,
            trajectory: traj,
            t_send: now,
            seq,
        }));
    }

    fn timer(&self, at: f64, kind: TimerKind) -> Effect {
        Effect::Timer(Timer {
            at,
            kind,
            iteration: self.iteration.id,
        })
    }

    fn conflicts_with(&self, candidate: &Trajectory, other: &Trajectory) -> bool {
        // a trajectory not covering t_switch cannot be cleared
        check_pair_collision_from(candidate, other, &self.cfg.bbox, self.iteration.t_switch).unwrap_or(true)
    }

    fn conflicts_with_store(&self, candidate: &Trajectory) -> bool {
        self.store
            .trajectories()
            .any(|(_, t)| self.conflicts_with(candidate, t))
    }

    /// Begins Optimization. The plan is computed now and revealed when the
    /// `PlanComplete` timer fires `plan_duration` later.
    pub fn start_iteration(&mut self, now: f64, plan_duration: f64) -> Vec<Effect> {
        let mut fx = Vec::new();
        if !self.can_start_iteration() {
            return fx;
        }
        self.stats.iterations += 1;
        let t_switch = now + self.cfg.latency_budget;
        let s = self
            .committed
            .evaluate(t_switch)
            .unwrap_or_else(|_| StateSample::at_rest(t_switch, self.committed.position(t_switch)));
        let start = StateSample { t: t_switch, ..s };
        let constraints = self
            .store
            .trajectories()
            .map(|(id, t)| PeerTrajectory {
                id,
                trajectory: t.clone(),
            })
            .collect();
        let pc = &self.cfg.planner;
        let req = PlanRequest {
            start,
            goal: self.cfg.goal,
            t_switch,
            num_segments: pc.num_segments,
            segment_duration: pc.segment_duration(&start, &self.cfg.goal, &self.cfg.limits),
            limits: self.cfg.limits,
            bbox: self.cfg.bbox,
            constraints,
        };
        let outcome = plan(&req, pc).ok();
        self.iteration = Iteration {
            id: self.iteration.id + 1,
            t_switch,
            outcome,
            candidate: None,
            check_passed: false,
            arrivals_in_check: false,
        };
        self.set_phase(now, Phase::Optimizing, &mut fx);
        fx.push(self.timer(now + plan_duration, TimerKind::PlanComplete));
        fx
    }

    fn discard(&mut self, now: f64, stage: DiscardStage, fx: &mut Vec<Effect>) {
        *self
            .stats
            .discards
            .entry(serde_json::to_value(stage).unwrap().as_str().unwrap().to_string())
            .or_default() += 1;
        self.log(
            fx,
            now,
            EventKind::Discard,
            json!({ "stage": stage, "iteration": self.iteration.id }),
        );
        if self.phase == Phase::DelayChecking {
            // withdraw the announced candidate
            let prev = Arc::new(self.committed.restrict_from(now));
            self.broadcast(now, MessageKind::Committed, prev, fx);
        }
        self.iteration.candidate = None;
        self.set_phase(now, Phase::Idle, fx);
        fx.push(self.timer(now, TimerKind::IterationStart));
    }

    fn commit(&mut self, now: f64, fx: &mut Vec<Effect>) {
        let candidate = self.iteration.candidate.take().expect("commit needs a candidate");
        let t_switch = self.iteration.t_switch;
        self.executed = self
            .executed
            .splice(&candidate, t_switch)
            .expect("candidate covers the switch time");
        let traj = Arc::new(candidate.restrict_from(now));
        self.committed = traj.clone();
        self.stats.commits += 1;
        self.log(
            fx,
            now,
            EventKind::Commit,
            json!({ "iteration": self.iteration.id, "t_switch": t_switch }),
        );
        fx.push(Effect::Commit(CommitRecord {
            t: now,
            t_switch,
            trajectory: traj.clone(),
        }));
        self.broadcast(now, MessageKind::Committed, traj, fx);
        self.set_phase(now, Phase::Idle, fx);
        // idle until the switch onto the new plan
        fx.push(self.timer(t_switch.max(now), TimerKind::IterationStart));
    }

    pub fn on_timer(&mut self, now: f64, timer: Timer) -> Vec<Effect> {
        let mut fx = Vec::new();
        if timer.iteration != self.iteration.id {
            return fx;
        }
        match (timer.kind, self.phase) {
            (TimerKind::PlanComplete, Phase::Optimizing) => self.on_plan_complete(now, &mut fx),
            (TimerKind::CheckComplete, Phase::Checking) => self.on_check_complete(now, &mut fx),
            (TimerKind::RecheckComplete, Phase::Rechecking) => {
                if self.iteration.t_switch <= now {
                    self.discard(now, DiscardStage::Stale, &mut fx);
                } else {
                    self.commit(now, &mut fx);
                }
            }
            (TimerKind::DelayCheckComplete, Phase::DelayChecking) => {
                if self.iteration.t_switch <= now {
                    self.discard(now, DiscardStage::Stale, &mut fx);
                } else {
                    self.commit(now, &mut fx);
                }
            }
            _ => {}
        }
        fx
    }

    fn on_plan_complete(&mut self, now: f64, fx: &mut Vec<Effect>) {
        let plan: Option<PlanResult> = self.iteration.outcome.take().and_then(PlanOutcome::feasible);
        let Some(plan) = plan else {
            self.discard(now, DiscardStage::Optimization, fx);
            return;
        };
        if self.iteration.t_switch <= now {
            self.discard(now, DiscardStage::Stale, fx);
            return;
        }
        let candidate = match self.committed.splice(&plan.trajectory, self.iteration.t_switch) {
            Ok(c) => c.restrict_from(now),
            Err(_) => {
                self.discard(now, DiscardStage::Optimization, fx);
                return;
            }
        };
        // checked against the store as it stands when Check begins
        self.iteration.check_passed = !self.conflicts_with_store(&candidate);
        self.iteration.candidate = Some(Arc::new(candidate));
        self.iteration.arrivals_in_check = false;
        self.set_phase(now, Phase::Checking, fx);
        fx.push(self.timer(now + self.cfg.check_duration, TimerKind::CheckComplete));
    }

    fn on_check_complete(&mut self, now: f64, fx: &mut Vec<Effect>) {
        if !self.iteration.check_passed {
            self.discard(now, DiscardStage::Check, fx);
            return;
        }
        match self.cfg.mode {
            Mode::Mader => {
                if self.iteration.arrivals_in_check {
                    self.discard(now, DiscardStage::Recheck, fx);
                    return;
                }
                self.set_phase(now, Phase::Rechecking, fx);
                fx.push(self.timer(now + self.cfg.recheck_duration, TimerKind::RecheckComplete));
            }
            Mode::Rmader => {
                let candidate = self.iteration.candidate.clone().expect("checked candidate");
                self.broadcast(now, MessageKind::New, candidate.clone(), fx);
                self.set_phase(now, Phase::DelayChecking, fx);
                if self.conflicts_with_store(&candidate) {
                    self.discard(now, DiscardStage::DelayCheck, fx);
                    return;
                }
                fx.push(self.timer(now + self.cfg.delta_dc, TimerKind::DelayCheckComplete));
            }
        }
    }

    pub fn on_message(&mut self, now: f64, msg: &Message) -> Vec<Effect> {
        let mut fx = Vec::new();
        self.log(
            &mut fx,
            now,
            EventKind::Receive,
            json!({ "from": msg.sender, "kind": msg.kind, "seq": msg.seq }),
        );
        if !self.store.apply(msg) {
            self.stats.stale_messages += 1;
            self.log(
                &mut fx,
                now,
                EventKind::DropStale,
                json!({ "from": msg.sender, "seq": msg.seq }),
            );
            return fx;
        }
        match self.phase {
            Phase::Checking => self.iteration.arrivals_in_check = true,
            Phase::DelayChecking => {
                let candidate = self.iteration.candidate.clone().expect("delay check candidate");
                if self.conflicts_with(&candidate, &msg.trajectory) {
                    self.discard(now, DiscardStage::DelayCheck, &mut fx);
                }
            }
            _ => {}
        }
        fx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mode: Mode, goal: Vec3) -> AgentConfig {
        AgentConfig {
            mode,
            delta_dc: 0.1,
            bbox: BoundaryBox::default(),
            limits: DynamicLimits::default(),
            goal,
            latency_budget: 0.3,
            check_duration: 0.01,
            recheck_duration: 0.01,
            max_commits: None,
            planner: PlannerConfig::default(),
            record_log: true,
        }
    }

    fn msg(sender: AgentId, kind: MessageKind, traj: Trajectory, seq: u64) -> Message {
        Message {
            sender,
            kind,
            trajectory: Arc::new(traj),
            t_send: 0.0,
            seq,
        }
    }

    fn timers(fx: &[Effect]) -> Vec<Timer> {
        fx.iter()
            .filter_map(|e| match e {
                Effect::Timer(t) => Some(*t),
                _ => None,
            })
            .collect()
    }

    fn broadcasts(fx: &[Effect]) -> Vec<MessageKind> {
        fx.iter()
            .filter_map(|e| match e {
                Effect::Broadcast(m) => Some(m.kind),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn store_replaces_pending_on_commit() {
        let mut store = TrajectoryStore::default();
        let a = Trajectory::hold(Vec3::x(), 0.0);
        let b = Trajectory::hold(Vec3::y(), 0.0);
        assert!(store.apply(&msg(3, MessageKind::New, a.clone(), 0)));
        let e = store.get(3).unwrap();
        assert!(e.committed.is_none() && e.pending_new.is_some());
        assert!(store.apply(&msg(3, MessageKind::Committed, b.clone(), 1)));
        let e = store.get(3).unwrap();
        assert!(e.pending_new.is_none());
        assert_eq!(**e.committed.as_ref().unwrap(), b);
        // an older message delivered late is dropped
        assert!(!store.apply(&msg(3, MessageKind::Committed, a, 0)));
        assert_eq!(**store.get(3).unwrap().committed.as_ref().unwrap(), b);
        assert_eq!(store.trajectories().count(), 1);
    }

    /// Drives one agent with no peers through a full iteration.
    fn run_iteration(agent: &mut Agent) -> Vec<Effect> {
        let mut all = Vec::new();
        let mut fx = agent.start_iteration(0.0, 0.05);
        loop {
            all.extend(fx.iter().cloned());
            let next = timers(&fx).into_iter().find(|t| t.kind != TimerKind::IterationStart);
            let Some(t) = next else { break };
            fx = agent.on_timer(t.at, t);
        }
        all
    }

    #[test]
    fn rmader_iteration_broadcasts_new_then_committed() {
        let mut a = Agent::new(0, Vec3::zeros(), cfg(Mode::Rmader, Vec3::new(3.0, 0.0, 0.0)));
        let fx = run_iteration(&mut a);
        assert_eq!(broadcasts(&fx), vec![MessageKind::New, MessageKind::Committed]);
        assert_eq!(a.stats().commits, 1);
        assert_eq!(a.phase(), Phase::Idle);
        // resumes at the switch time
        let resume = timers(&fx).into_iter().last().unwrap();
        assert_eq!(resume.kind, TimerKind::IterationStart);
        assert!((resume.at - 0.3).abs() < 1e-12);
        assert!((a.committed().position(0.3 + 10.0) - Vec3::new(3.0, 0.0, 0.0)).norm() < 0.05);
    }

    #[test]
    fn mader_iteration_broadcasts_once() {
        let mut a = Agent::new(0, Vec3::zeros(), cfg(Mode::Mader, Vec3::new(3.0, 0.0, 0.0)));
        let fx = run_iteration(&mut a);
        assert_eq!(broadcasts(&fx), vec![MessageKind::Committed]);
        assert_eq!(a.stats().commits, 1);
    }

    #[test]
    fn delay_check_conflict_keeps_previous() {
        let mut a = Agent::new(0, Vec3::zeros(), cfg(Mode::Rmader, Vec3::new(4.0, 0.0, 0.0)));
        let fx = a.start_iteration(0.0, 0.05);
        let t = timers(&fx)[0];
        let fx = a.on_timer(t.at, t);
        let t = timers(&fx)[0];
        let fx = a.on_timer(t.at, t);
        assert_eq!(a.phase(), Phase::DelayChecking);
        let dc = timers(&fx)[0];
        // a peer parks on the candidate's path mid delay check
        let blocker = msg(1, MessageKind::New, Trajectory::hold(Vec3::new(2.0, 0.0, 0.0), 0.0), 0);
        let fx = a.on_message(0.1, &blocker);
        assert_eq!(broadcasts(&fx), vec![MessageKind::Committed]);
        assert_eq!(a.phase(), Phase::Idle);
        assert_eq!(a.stats().discards.get("delay_check"), Some(&1));
        assert_eq!(a.committed().terminal_hold(), Vec3::zeros());
        // the old delay-check timer is ignored
        assert!(a.on_timer(dc.at, dc).is_empty());
    }

    #[test]
    fn mader_recheck_fails_on_arrival_during_check() {
        let mut a = Agent::new(0, Vec3::zeros(), cfg(Mode::Mader, Vec3::new(4.0, 0.0, 0.0)));
        let fx = a.start_iteration(0.0, 0.05);
        let t = timers(&fx)[0];
        let fx = a.on_timer(t.at, t);
        assert_eq!(a.phase(), Phase::Checking);
        let far = msg(
            1,
            MessageKind::Committed,
            Trajectory::hold(Vec3::new(0.0, 50.0, 0.0), 0.0),
            0,
        );
        a.on_message(0.055, &far);
        let t = timers(&fx)[0];
        a.on_timer(t.at, t);
        assert_eq!(a.stats().discards.get("recheck"), Some(&1));
    }

    #[test]
    fn max_commits_stops_iterating() {
        let mut c = cfg(Mode::Rmader, Vec3::new(3.0, 0.0, 0.0));
        c.max_commits = Some(1);
        let mut a = Agent::new(0, Vec3::zeros(), c);
        run_iteration(&mut a);
        assert!(!a.can_start_iteration());
        assert!(a.start_iteration(1.0, 0.05).is_empty());
    }

    #[test]
    fn executed_history_is_kept() {
        let mut a = Agent::new(0, Vec3::new(1.0, 1.0, 1.0), cfg(Mode::Rmader, Vec3::new(3.0, 1.0, 1.0)));
        run_iteration(&mut a);
        assert_eq!(a.executed().start_time(), 0.0);
        assert_eq!(a.executed().position(0.1), Vec3::new(1.0, 1.0, 1.0));
        let late = a.committed().end_time() + 1.0;
        assert_eq!(a.executed().position(late), a.committed().position(late));
    }

    #[test]
    fn digest_changes_with_content() {
        let a = Trajectory::hold(Vec3::x(), 0.0);
        let b = Trajectory::hold(Vec3::y(), 0.0);
        assert_eq!(trajectory_digest(&a), trajectory_digest(&a.clone()));
        assert_ne!(trajectory_digest(&a), trajectory_digest(&b));
    }
}
