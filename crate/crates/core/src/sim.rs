//! Discrete-event simulation of an edge storage system, and the standalone
//! finite-buffer M/M/1 drop experiment.
//!
//! All times are in seconds. A run is single-threaded over one event heap
//! ordered by (time, sequence number); trace requests are merged in from a
//! cursor rather than pushed onto the heap up front.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::model::{ServingOption, StoragePlan};
use crate::seed::{derive_seed, rng_from};
use crate::workload::Trace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Routing {
    /// Queue lengths are snapshotted every `interval` seconds.
    Periodic { interval: f64 },
    /// Routing sees exact instantaneous queue lengths.
    Oracle,
}

impl Routing {
    pub fn label(&self) -> &'static str {
        match self {
            Routing::Periodic { .. } => "periodic",
            Routing::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub servers_per_node: usize,
    /// Maximum tasks at a node, including those in service. `None` is unbounded.
    pub queue_capacity: Option<usize>,
    /// Longest a task may wait before service. `None` disables the limit.
    pub queue_timeout: Option<f64>,
    /// Longest end-to-end time a request may take. `None` disables the limit.
    pub rtt_limit: Option<f64>,
    pub link_bandwidth_bps: f64,
    pub link_propagation: f64,
    pub user_link_delay: f64,
    pub object_size_bytes: f64,
    pub routing: Routing,
    /// Queue-length handicap added to recovery-set options, so requests go
    /// collaborative only once every direct holder is this much busier.
    pub collaborative_penalty: usize,
    /// In periodic mode, an access node corrects the last snapshot by the
    /// tasks it has sent, and had answered, since that snapshot.
    pub track_outstanding: bool,
    pub seed: u64,
    pub event_log: bool,
}

impl SimConfig {
    pub fn new(seed: u64) -> Self {
        SimConfig {
            servers_per_node: 1,
            queue_capacity: None,
            queue_timeout: Some(0.100),
            rtt_limit: Some(0.200),
            link_bandwidth_bps: 1e9,
            link_propagation: 0.001,
            user_link_delay: 0.010,
            object_size_bytes: 64.0 * 1024.0,
            routing: Routing::Periodic { interval: 0.100 },
            collaborative_penalty: 20,
            track_outstanding: true,
            seed,
            event_log: false,
        }
    }

    /// Time for one object or request to cross a node-to-node link.
    pub fn hop_delay(&self) -> f64 {
        self.link_propagation + self.object_size_bytes * 8.0 / self.link_bandwidth_bps
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        if self.servers_per_node == 0 {
            return Err(Error::InvalidArgument("servers_per_node must be >= 1".into()));
        }
        if self.queue_capacity == Some(0) {
            return Err(Error::InvalidArgument("queue_capacity must be >= 1".into()));
        }
        if let Some(t) = self.queue_timeout {
            positive("queue_timeout", t)?;
        }
        if let Some(t) = self.rtt_limit {
            positive("rtt_limit", t)?;
        }
        positive("link bandwidth", self.link_bandwidth_bps)?;
        positive("link propagation", self.link_propagation)?;
        positive("user link delay", self.user_link_delay)?;
        positive("object size", self.object_size_bytes)?;
        if let Routing::Periodic { interval } = self.routing {
            positive("state sync interval", interval)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ServiceMode {
    Local,
    Remote,
    Collaborative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats {
    pub served: u64,
    /// Time-averaged number of tasks at the node, waiting or in service.
    pub mean_queue: f64,
    pub peak_queue: usize,
    pub busy_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub completed: u64,
    pub dropped: u64,
    pub drop_fraction: f64,
    /// Seconds, over completed requests only.
    pub latency_mean: Option<f64>,
    pub latency_p50: Option<f64>,
    pub latency_p99: Option<f64>,
    pub nodes: Vec<NodeStats>,
    pub local: u64,
    pub remote: u64,
    pub collaborative: u64,
    pub event_log: Option<String>,
}

impl SimResult {
    pub fn total(&self) -> u64 {
        self.completed + self.dropped
    }

    pub fn csv_header() -> &'static str {
        "completed,dropped,drop_fraction,latency_mean_ms,latency_p50_ms,latency_p99_ms,local,remote,collaborative"
    }

    pub fn csv_row(&self) -> String {
        let ms = |v: Option<f64>| v.map(|s| format!("{:.6}", s * 1e3)).unwrap_or_default();
        format!(
            "{},{},{:.6},{},{},{},{},{},{}",
            self.completed,
            self.dropped,
            self.drop_fraction,
            ms(self.latency_mean),
            ms(self.latency_p50),
            ms(self.latency_p99),
            self.local,
            self.remote,
            self.collaborative
        )
    }

    pub fn nodes_csv(&self) -> String {
        let mut s = String::from("node,served,mean_queue,peak_queue,busy_fraction\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i},{},{:.6},{},{:.6}",
                n.served, n.mean_queue, n.peak_queue, n.busy_fraction
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let ms = |v: Option<f64>| v.map_or("n/a".to_string(), |s| format!("{:.3} ms", s * 1e3));
        let mut s = String::new();
        let _ = writeln!(s, "requests:      {}", self.total());
        let _ = writeln!(s, "completed:     {}", self.completed);
        let _ = writeln!(s, "dropped:       {} ({:.4}%)", self.dropped, 100.0 * self.drop_fraction);
        let _ = writeln!(
            s,
            "latency:       mean {}, p50 {}, p99 {}",
            ms(self.latency_mean),
            ms(self.latency_p50),
            ms(self.latency_p99)
        );
        let _ = writeln!(
            s,
            "service modes: local {}, remote {}, collaborative {}",
            self.local, self.remote, self.collaborative
        );
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(
                s,
                "node {i}: served {}, mean queue {:.3}, peak {}, busy {:.1}%",
                n.served,
                n.mean_queue,
                n.peak_queue,
                100.0 * n.busy_fraction
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    TaskArrive { req: usize, node: usize },
    Timeout { node: usize, task: u64 },
    ServiceDone { node: usize, req: usize },
    FetchArrive { req: usize, node: usize },
    Snapshot,
}

#[derive(Debug)]
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
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Waiting {
    task: u64,
    req: usize,
}

#[derive(Default)]
struct Node {
    waiting: VecDeque<Waiting>,
    busy: usize,
    in_system: usize,
    last_change: f64,
    queue_area: f64,
    busy_area: f64,
    peak: usize,
    served: u64,
}

impl Node {
    fn advance(&mut self, now: f64) {
        let dt = now - self.last_change;
        self.queue_area += self.in_system as f64 * dt;
        self.busy_area += self.busy as f64 * dt;
        self.last_change = now;
    }
}

struct Pending {
    emitted: f64,
    access: usize,
    outstanding: u8,
    failed: bool,
}

struct Sim<'a, R> {
    config: &'a SimConfig,
    hop: f64,
    exp: Exp<f64>,
    rng: R,
    now: f64,
    seq: u64,
    next_task: u64,
    heap: BinaryHeap<Event>,
    nodes: Vec<Node>,
    snapshot: Vec<usize>,
    /// Unanswered tasks from each access node at each node, now and at
    /// the last snapshot.
    outstanding: Vec<Vec<i64>>,
    outstanding_at_snapshot: Vec<Vec<i64>>,
    requests: Vec<Pending>,
    latencies: Vec<f64>,
    completed: u64,
    dropped: u64,
    modes: [u64; 3],
    log: Option<String>,
}

impl<R: Rng> Sim<'_, R> {
    fn schedule(&mut self, time: f64, kind: EventKind) {
        debug_assert!(time >= self.now, "event scheduled in the past");
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn log(&mut self, kind: &str, node: Option<usize>, req: Option<usize>) {
        if let Some(log) = &mut self.log {
            let node = node.map(|n| n.to_string()).unwrap_or_default();
            let req = req.map(|r| r.to_string()).unwrap_or_default();
            let _ = writeln!(log, "{},{kind},{node},{req}", (self.now * 1e6).round() as u64);
        }
    }

    fn queue_estimate(&self, access: usize, node: usize) -> usize {
        match self.config.routing {
            Routing::Oracle => self.nodes[node].in_system,
            Routing::Periodic { .. } if self.config.track_outstanding => {
                let drift = self.outstanding[access][node] - self.outstanding_at_snapshot[access][node];
                (self.snapshot[node] as i64 + drift).max(0) as usize
            }
            Routing::Periodic { .. } => self.snapshot[node],
        }
    }

    /// Least loaded option, judging a recovery set by its busiest member
    /// plus the collaborative penalty. Options arrive ordered by cost then
    /// node indices, so the first minimum already honours the tie-break order.
    fn pick<'o>(&self, access: usize, options: &'o [ServingOption]) -> &'o ServingOption {
        let load = |o: &ServingOption| {
            let busiest = o
                .nodes
                .iter()
                .map(|n| self.queue_estimate(access, n.index()))
                .max()
                .unwrap_or(0);
            busiest + self.config.collaborative_penalty * (o.nodes.len() - 1)
        };
        let mut best = &options[0];
        let mut best_load = load(best);
        for o in &options[1..] {
            let l = load(o);
            if l < best_load {
                best = o;
                best_load = l;
            }
        }
        best
    }

    fn user_arrival(&mut self, req: usize, options: &[ServingOption]) {
        let access = self.requests[req].access;
        self.log("arrive", Some(access), Some(req));
        let option = self.pick(access, options);
        for node in &option.nodes {
            self.outstanding[access][node.index()] += 1;
        }
        let mode = match option.nodes.as_slice() {
            [n] if n.index() == access => ServiceMode::Local,
            [_] => ServiceMode::Remote,
            _ => ServiceMode::Collaborative,
        };
        self.modes[mode as usize] += 1;
        self.requests[req].outstanding = option.nodes.len() as u8;
        let targets: Vec<usize> = option.nodes.iter().map(|n| n.index()).collect();
        for node in targets {
            if node == access {
                self.task_arrive(req, node);
            } else {
                self.schedule(self.now + self.hop, EventKind::TaskArrive { req, node });
            }
        }
    }

    fn task_arrive(&mut self, req: usize, node: usize) {
        if self
            .config
            .queue_capacity
            .is_some_and(|cap| self.nodes[node].in_system >= cap)
        {
            self.log("drop_full", Some(node), Some(req));
            self.task_failed(req, node);
            return;
        }
        let now = self.now;
        let n = &mut self.nodes[node];
        n.advance(now);
        n.in_system += 1;
        n.peak = n.peak.max(n.in_system);
        self.log("enqueue", Some(node), Some(req));
        if self.nodes[node].busy < self.config.servers_per_node {
            self.start_service(node, req);
        } else {
            let task = self.next_task;
            self.next_task += 1;
            self.nodes[node].waiting.push_back(Waiting { task, req });
            if let Some(t) = self.config.queue_timeout {
                self.schedule(now + t, EventKind::Timeout { node, task });
            }
        }
    }

    fn start_service(&mut self, node: usize, req: usize) {
        let now = self.now;
        self.nodes[node].advance(now);
        self.nodes[node].busy += 1;
        let s = self.exp.sample(&mut self.rng);
        self.log("start", Some(node), Some(req));
        self.schedule(now + s, EventKind::ServiceDone { node, req });
    }

    /// Every task waits the same timeout and queues are FIFO, so the task
    /// expiring now is at the head of its queue if it is still waiting.
    fn timeout(&mut self, node: usize, task: u64) {
        let n = &mut self.nodes[node];
        if n.waiting.front().is_some_and(|w| w.task == task) {
            let w = n.waiting.pop_front().expect("non-empty queue");
            n.advance(self.now);
            n.in_system -= 1;
            self.log("drop_timeout", Some(node), Some(w.req));
            self.task_failed(w.req, node);
        }
    }

    fn service_done(&mut self, node: usize, req: usize) {
        let now = self.now;
        let n = &mut self.nodes[node];
        n.advance(now);
        n.busy -= 1;
        n.in_system -= 1;
        n.served += 1;
        self.log("finish", Some(node), Some(req));
        if let Some(next) = self.nodes[node].waiting.pop_front() {
            self.start_service(node, next.req);
        }
        if node == self.requests[req].access {
            self.fetch_arrive(req, node);
        } else {
            self.schedule(now + self.hop, EventKind::FetchArrive { req, node });
        }
    }

    fn fetch_arrive(&mut self, req: usize, node: usize) {
        self.outstanding[self.requests[req].access][node] -= 1;
        let r = &mut self.requests[req];
        r.outstanding -= 1;
        if r.outstanding == 0 {
            self.finish(req);
        }
    }

    fn task_failed(&mut self, req: usize, node: usize) {
        self.outstanding[self.requests[req].access][node] -= 1;
        let r = &mut self.requests[req];
        r.failed = true;
        r.outstanding -= 1;
        if r.outstanding == 0 {
            self.finish(req);
        }
    }

    fn finish(&mut self, req: usize) {
        let r = &self.requests[req];
        let latency = self.now + self.config.user_link_delay - r.emitted;
        let late = self.config.rtt_limit.is_some_and(|limit| latency > limit);
        let access = r.access;
        if r.failed || late {
            self.dropped += 1;
            self.log("drop", Some(access), Some(req));
        } else {
            self.completed += 1;
            self.latencies.push(latency);
            self.log("complete", Some(access), Some(req));
        }
    }
}

fn check_inputs(trace: &Trace, plan: &StoragePlan) -> Result<()> {
    if trace.k != plan.k() || trace.n != plan.n() {
        return Err(Error::Mismatch(format!(
            "trace has k={} n={}, plan has k={} n={}",
            trace.k,
            trace.n,
            plan.k(),
            plan.n()
        )));
    }
    if let Some(u) = trace.users.iter().find(|u| u.index() >= plan.n()) {
        return Err(Error::Mismatch(format!("user bound to missing node {}", u.0)));
    }
    for r in &trace.requests {
        if r.object.index() >= plan.k() {
            return Err(Error::Mismatch(format!("request for missing object {}", r.object.0)));
        }
        if r.user.0 as usize >= trace.users.len() {
            return Err(Error::Mismatch(format!("request from unbound user {}", r.user.0)));
        }
    }
    Ok(())
}

pub fn simulate(trace: &Trace, plan: &StoragePlan, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    check_inputs(trace, plan)?;
    let options = plan.option_table();
    if let Some(o) = options.iter().position(Vec::is_empty) {
        return Err(Error::PlanInvariant(format!("object {o} has no serving option")));
    }
    let exp = Exp::new(plan.mu()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n = plan.n();
    let mut sim = Sim {
        config,
        hop: config.hop_delay(),
        exp,
        rng: rng_from(derive_seed(config.seed, &[0x5E71])),
        now: 0.0,
        seq: 0,
        next_task: 0,
        heap: BinaryHeap::new(),
        nodes: (0..n).map(|_| Node::default()).collect(),
        snapshot: vec![0; n],
        outstanding: vec![vec![0; n]; n],
        outstanding_at_snapshot: vec![vec![0; n]; n],
        requests: Vec::with_capacity(trace.requests.len()),
        latencies: Vec::with_capacity(trace.requests.len()),
        completed: 0,
        dropped: 0,
        modes: [0; 3],
        log: config.event_log.then(String::new),
    };
    if matches!(config.routing, Routing::Periodic { .. }) && !trace.requests.is_empty() {
        sim.schedule(0.0, EventKind::Snapshot);
    }

    let mut cursor = 0;
    loop {
        let next_user = trace
            .requests
            .get(cursor)
            .map(|r| r.timestamp_us as f64 / 1e6 + config.user_link_delay);
        let next_event = sim.heap.peek().map(|e| e.time);
        let user_first = match (next_user, next_event) {
            (None, None) => break,
            (Some(u), Some(e)) => u <= e,
            (u, _) => u.is_some(),
        };
        if user_first {
            let r = &trace.requests[cursor];
            sim.now = next_user.expect("pending trace request");
            sim.requests.push(Pending {
                emitted: r.timestamp_us as f64 / 1e6,
                access: trace.users[r.user.0 as usize].index(),
                outstanding: 0,
                failed: false,
            });
            sim.user_arrival(cursor, &options[r.object.index()]);
            cursor += 1;
            continue;
        }
        let event = sim.heap.pop().expect("pending event");
        debug_assert!(event.time >= sim.now);
        sim.now = event.time;
        match event.kind {
            EventKind::TaskArrive { req, node } => sim.task_arrive(req, node),
            EventKind::Timeout { node, task } => sim.timeout(node, task),
            EventKind::ServiceDone { node, req } => sim.service_done(node, req),
            EventKind::FetchArrive { req, node } => sim.fetch_arrive(req, node),
            EventKind::Snapshot => {
                for (s, node) in sim.snapshot.iter_mut().zip(&sim.nodes) {
                    *s = node.in_system;
                }
                sim.outstanding_at_snapshot.clone_from(&sim.outstanding);
                if let Routing::Periodic { interval } = config.routing {
                    if cursor < trace.requests.len() {
                        sim.schedule(sim.now + interval, EventKind::Snapshot);
                    }
                }
            }
        }
    }

    let horizon = sim.now;
    let nodes = sim
        .nodes
        .iter_mut()
        .map(|node| {
            node.advance(horizon);
            let avg = |area: f64| if horizon > 0.0 { area / horizon } else { 0.0 };
            NodeStats {
                served: node.served,
                mean_queue: avg(node.queue_area),
                peak_queue: node.peak,
                busy_fraction: avg(node.busy_area) / config.servers_per_node as f64,
            }
        })
        .collect();
    let mut lat = std::mem::take(&mut sim.latencies);
    lat.sort_by(f64::total_cmp);
    let percentile = |q: f64| {
        (!lat.is_empty()).then(|| {
            let rank = ((q * lat.len() as f64).ceil() as usize).clamp(1, lat.len());
            lat[rank - 1]
        })
    };
    let total = sim.completed + sim.dropped;
    debug_assert_eq!(total as usize, trace.requests.len());
    Ok(SimResult {
        completed: sim.completed,
        dropped: sim.dropped,
        drop_fraction: if total == 0 { 0.0 } else { sim.dropped as f64 / total as f64 },
        latency_mean: (!lat.is_empty()).then(|| lat.iter().sum::<f64>() / lat.len() as f64),
        latency_p50: percentile(0.5),
        latency_p99: percentile(0.99),
        nodes,
        local: sim.modes[ServiceMode::Local as usize],
        remote: sim.modes[ServiceMode::Remote as usize],
        collaborative: sim.modes[ServiceMode::Collaborative as usize],
        event_log: sim.log,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mm1Summary {
    pub mean_pct: f64,
    /// Sample standard deviation across repetitions.
    pub std_pct: f64,
    pub per_rep_pct: Vec<f64>,
}

/// Single FIFO queue with unit service rate and room for `buffer` requests
/// including the one in service. Each repetition counts `total` arrivals.
pub fn mm1_drop_experiment(
    lambda: f64,
    buffer: usize,
    total: usize,
    reps: usize,
    seed: u64,
) -> Result<Mm1Summary> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("arrival rate must be positive, got {lambda}")));
    }
    if buffer == 0 || total == 0 || reps == 0 {
        return Err(Error::InvalidArgument("buffer, total and reps must be >= 1".into()));
    }
    let arrivals = Exp::new(lambda).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let service = Exp::new(1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let per_rep_pct: Vec<f64> = (0..reps)
        .map(|rep| {
            let mut rng = rng_from(derive_seed(seed, &[rep as u64]));
            // Departure times of the requests currently in the system.
            let mut system: VecDeque<f64> = VecDeque::with_capacity(buffer);
            let (mut t, mut dropped) = (0.0, 0usize);
            for _ in 0..total {
                t += arrivals.sample(&mut rng);
                while system.front().is_some_and(|&d| d <= t) {
                    system.pop_front();
                }
                if system.len() >= buffer {
                    dropped += 1;
                    continue;
                }
                let start = system.back().map_or(t, |&d| d.max(t));
                system.push_back(start + service.sample(&mut rng));
            }
            100.0 * dropped as f64 / total as f64
        })
        .collect();
    let mean_pct = per_rep_pct.iter().sum::<f64>() / reps as f64;
    let std_pct = if reps > 1 {
        let ss: f64 = per_rep_pct.iter().map(|x| (x - mean_pct).powi(2)).sum();
        (ss / (reps - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Mm1Summary {
        mean_pct,
        std_pct,
        per_rep_pct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeId, ObjectId, Scheme, StoredItem};
    use crate::workload::{Request, UserId};

    fn toy() -> StoragePlan {
        let a = ObjectId(0);
        let b = ObjectId(1);
        StoragePlan::new(
            2,
            100.0,
            Scheme::XorCoding,
            vec![
                vec![StoredItem::Original(a)],
                vec![StoredItem::Original(b)],
                vec![StoredItem::parity(a, b).unwrap()],
            ],
        )
        .unwrap()
    }

    fn trace(requests: Vec<(u64, u32, u32)>, users: Vec<u32>) -> Trace {
        Trace {
            k: 2,
            n: 3,
            duration_s: requests.last().map_or(1.0, |r| r.0 as f64 / 1e6 + 1.0),
            users: users.into_iter().map(NodeId).collect(),
            requests: requests
                .into_iter()
                .map(|(t, u, o)| Request {
                    timestamp_us: t,
                    user: UserId(u),
                    object: ObjectId(o),
                })
                .collect(),
        }
    }

    #[test]
    fn empty_trace() {
        let r = simulate(&trace(vec![], vec![0]), &toy(), &SimConfig::new(1)).unwrap();
        assert_eq!((r.completed, r.dropped, r.drop_fraction), (0, 0, 0.0));
        assert!(r.latency_mean.is_none());
    }

    #[test]
    fn single_local_request_latency() {
        let cfg = SimConfig::new(3);
        let r = simulate(&trace(vec![(0, 0, 0)], vec![0]), &toy(), &cfg).unwrap();
        assert_eq!((r.completed, r.local), (1, 1));
        let service = r.latency_mean.unwrap() - 2.0 * cfg.user_link_delay;
        assert!(service > 0.0 && service < 0.2);
        assert_eq!(r.nodes[0].served, 1);
    }

    #[test]
    fn remote_and_collaborative_paths() {
        let mut cfg = SimConfig::new(3);
        cfg.routing = Routing::Oracle;
        // A user at node 2 wants a: node 0 is idle, so one hop each way.
        let r = simulate(&trace(vec![(0, 0, 0)], vec![2]), &toy(), &cfg).unwrap();
        assert_eq!(r.remote, 1);
        assert!(r.latency_mean.unwrap() > 2.0 * cfg.user_link_delay + 2.0 * cfg.hop_delay());

        // Node 0 is busy with a's first request, so without a penalty the
        // second goes to {1, 2}.
        cfg.collaborative_penalty = 0;
        let r = simulate(&trace(vec![(0, 0, 0), (0, 0, 0)], vec![0]), &toy(), &cfg).unwrap();
        assert_eq!((r.local, r.collaborative), (1, 1));
        assert_eq!(r.nodes[1].served + r.nodes[2].served, 2);

        // A penalty of 2 tolerates a queue of two at node 0 before the third.
        cfg.collaborative_penalty = 2;
        let reqs = (0..4).map(|_| (0, 0, 0)).collect();
        let r = simulate(&trace(reqs, vec![0]), &toy(), &cfg).unwrap();
        assert_eq!((r.local, r.collaborative), (3, 1));
    }

    #[test]
    fn outstanding_tracking_spreads_stale_routing() {
        let mut cfg = SimConfig::new(3);
        cfg.routing = Routing::Periodic { interval: 10.0 };
        cfg.collaborative_penalty = 0;
        cfg.queue_capacity = Some(1);
        let reqs: Vec<_> = (0..2).map(|_| (0, 0, 0)).collect();
        let r = simulate(&trace(reqs.clone(), vec![0]), &toy(), &cfg).unwrap();
        assert_eq!((r.local, r.collaborative, r.dropped), (1, 1, 0));
        cfg.track_outstanding = false;
        let r = simulate(&trace(reqs, vec![0]), &toy(), &cfg).unwrap();
        assert_eq!((r.local, r.dropped), (2, 1));
    }

    #[test]
    fn full_queue_drops() {
        let mut cfg = SimConfig::new(3);
        cfg.queue_capacity = Some(1);
        cfg.routing = Routing::Periodic { interval: 10.0 };
        cfg.track_outstanding = false;
        // Stale state keeps routing everything to node 0.
        let reqs = (0..5).map(|_| (0, 0, 0)).collect();
        let r = simulate(&trace(reqs, vec![0]), &toy(), &cfg).unwrap();
        assert_eq!((r.completed, r.dropped), (1, 4));
        assert_eq!(r.nodes[0].peak_queue, 1);
    }

    #[test]
    fn waiting_timeout_drops() {
        let mut cfg = SimConfig::new(3);
        cfg.routing = Routing::Periodic { interval: 10.0 };
        cfg.track_outstanding = false;
        cfg.queue_timeout = Some(1e-9);
        cfg.rtt_limit = None;
        let reqs = (0..3).map(|_| (0, 0, 0)).collect();
        let r = simulate(&trace(reqs, vec![0]), &toy(), &cfg).unwrap();
        assert_eq!((r.completed, r.dropped), (1, 2));
    }

    #[test]
    fn rtt_limit_drops_everything_when_tiny() {
        let mut cfg = SimConfig::new(3);
        cfg.rtt_limit = Some(0.015);
        let r = simulate(&trace(vec![(0, 0, 0), (5, 0, 1)], vec![0]), &toy(), &cfg).unwrap();
        assert_eq!((r.completed, r.dropped), (0, 2));
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let mut t = trace(vec![(0, 0, 0)], vec![0]);
        t.k = 3;
        assert!(matches!(simulate(&t, &toy(), &SimConfig::new(1)), Err(Error::Mismatch(_))));
        let t = trace(vec![(0, 0, 0)], vec![7]);
        assert!(simulate(&t, &toy(), &SimConfig::new(1)).is_err());
        let mut cfg = SimConfig::new(1);
        cfg.queue_timeout = Some(0.0);
        assert!(simulate(&trace(vec![], vec![0]), &toy(), &cfg).is_err());
    }

    #[test]
    fn event_log_lines() {
        let mut cfg = SimConfig::new(2);
        cfg.event_log = true;
        let r = simulate(&trace(vec![(0, 0, 0)], vec![1]), &toy(), &cfg).unwrap();
        let log = r.event_log.unwrap();
        assert!(log.starts_with("10000,arrive,1,0\n"));
        assert!(log.lines().last().unwrap().contains(",complete,1,0"));
    }

    #[test]
    fn mm1_trivial_cases() {
        let s = mm1_drop_experiment(1e-6, 1, 1000, 4, 1).unwrap();
        assert!(s.mean_pct < 0.5);
        let s = mm1_drop_experiment(0.5, 100, 10_000, 4, 1).unwrap();
        assert_eq!(s.mean_pct, 0.0);
        assert!(mm1_drop_experiment(0.0, 1, 10, 1, 0).is_err());
        assert!(mm1_drop_experiment(0.5, 0, 10, 1, 0).is_err());
    }
}
