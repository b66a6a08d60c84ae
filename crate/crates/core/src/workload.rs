//! Synthetic traces, trace files, and trace-to-demand conversion.
//!
//! Object popularity follows a Zipf law over a per-trace random rank
//! permutation; each user issues a Poisson stream whose rate is drawn from a
//! positive-truncated Normal.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::model::{DemandVector, NodeId, ObjectId, StoragePlan};
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Request {
    /// Microseconds since trace start.
    pub timestamp_us: u64,
    pub user: UserId,
    pub object: ObjectId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub k: usize,
    pub n: usize,
    pub duration_s: f64,
    /// Access node of each user, indexed by user id.
    pub users: Vec<NodeId>,
    pub requests: Vec<Request>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Behavior {
    /// Users request any object.
    Baseline,
    /// Users request only objects stored on their access node.
    Local,
    /// Local pools, but each user is bound to the next node over.
    Remote,
}

impl Behavior {
    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::Baseline => "baseline",
            Behavior::Local => "local",
            Behavior::Remote => "remote",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Behavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Behavior::Baseline),
            "local" => Ok(Behavior::Local),
            "remote" => Ok(Behavior::Remote),
            other => Err(Error::InvalidArgument(format!("unknown behavior {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub k: usize,
    pub users_per_node: usize,
    pub alpha: f64,
    /// Mean per-user request rate (requests/second).
    pub rate_mean: f64,
    pub rate_std: f64,
    pub duration_s: f64,
    pub behavior: Behavior,
    pub seed: u64,
}

impl WorkloadSpec {
    /// Per-user rates of `0.8 mu` and `0.2 mu`, one user per node.
    pub fn for_plan(plan: &StoragePlan, alpha: f64, duration_s: f64, seed: u64) -> Self {
        WorkloadSpec {
            k: plan.k(),
            users_per_node: 1,
            alpha,
            rate_mean: 0.8 * plan.mu(),
            rate_std: 0.2 * plan.mu(),
            duration_s,
            behavior: Behavior::Baseline,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.k == 0 || self.users_per_node == 0 {
            return bad("workload needs k >= 1 and users_per_node >= 1".into());
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.rate_mean.is_finite() && self.rate_mean > 0.0)
            || !(self.rate_std.is_finite() && self.rate_std >= 0.0)
        {
            return bad(format!(
                "rate parameters must be positive, got N({}, {}^2)",
                self.rate_mean, self.rate_std
            ));
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return bad(format!("duration must be >= 0, got {}", self.duration_s));
        }
        Ok(())
    }
}

/// Popularity of ranks `1..=k`: `p_i` proportional to `1 / i^alpha`.
pub fn zipf_popularity(k: usize, alpha: f64) -> Result<Vec<f64>> {
    if k == 0 || !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "zipf needs k >= 1 and alpha >= 0 (k={k}, alpha={alpha})"
        )));
    }
    let weights: Vec<f64> = (1..=k).map(|i| (i as f64).powf(-alpha)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Normal draw truncated to positive values by resampling.
pub fn truncated_normal<R: Rng>(mean: f64, std: f64, rng: &mut R) -> Result<f64> {
    if std == 0.0 {
        return if mean > 0.0 {
            Ok(mean)
        } else {
            Err(Error::InvalidArgument(format!("degenerate N+({mean}, 0) has no positive mass")))
        };
    }
    let normal = Normal::new(mean, std)
        .map_err(|e| Error::InvalidArgument(format!("normal({mean}, {std}): {e}")))?;
    // Give up only when the positive tail is vanishingly thin.
    for _ in 0..1_000_000 {
        let x = normal.sample(rng);
        if x > 0.0 {
            return Ok(x);
        }
    }
    Err(Error::InvalidArgument(format!("N+({mean}, {std}) rejected a million draws")))
}

/// Zipf probability of every object under a random rank permutation.
fn permuted_popularity<R: Rng>(k: usize, alpha: f64, rng: &mut R) -> Result<Vec<f64>> {
    let by_rank = zipf_popularity(k, alpha)?;
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    let mut p = vec![0.0; k];
    for (rank, &object) in perm.iter().enumerate() {
        p[object] = by_rank[rank];
    }
    Ok(p)
}

pub fn generate_trace(spec: &WorkloadSpec, plan: &StoragePlan) -> Result<Trace> {
    spec.validate()?;
    if spec.k != plan.k() {
        return Err(Error::Mismatch(format!("workload k = {} but plan k = {}", spec.k, plan.k())));
    }
    let n = plan.n();
    let mut rng = rng_from(spec.seed);
    let popularity = permuted_popularity(spec.k, spec.alpha, &mut rng)?;

    let user_count = n * spec.users_per_node;
    let mut users = Vec::with_capacity(user_count);
    let mut samplers = Vec::with_capacity(user_count);
    for u in 0..user_count {
        let home = NodeId((u / spec.users_per_node) as u32);
        let access = match spec.behavior {
            Behavior::Remote => NodeId(((home.index() + 1) % n) as u32),
            _ => home,
        };
        let pool: Vec<ObjectId> = match spec.behavior {
            Behavior::Baseline => (0..spec.k as u32).map(ObjectId).collect(),
            Behavior::Local => (0..spec.k as u32)
                .map(ObjectId)
                .filter(|&o| plan.stores_copy(home, o))
                .collect(),
            Behavior::Remote => (0..spec.k as u32)
                .map(ObjectId)
                .filter(|&o| plan.stores_copy(home, o) && !plan.stores_copy(access, o))
                .collect(),
        };
        let err = || Error::EmptyPool {
            user: u,
            node: access.index(),
        };
        if pool.is_empty() {
            return Err(err());
        }
        let weights: Vec<f64> = pool.iter().map(|o| popularity[o.index()]).collect();
        let index = WeightedIndex::new(&weights).map_err(|_| err())?;
        users.push(access);
        samplers.push((pool, index));
    }
    let rates = (0..user_count)
        .map(|_| truncated_normal(spec.rate_mean, spec.rate_std, &mut rng))
        .collect::<Result<Vec<_>>>()?;

    let mut requests = Vec::new();
    for (u, ((pool, index), &rate)) in samplers.iter().zip(&rates).enumerate() {
        let gap = Exp::new(rate).map_err(|e| Error::InvalidArgument(format!("rate {rate}: {e}")))?;
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut rng);
            if t >= spec.duration_s {
                break;
            }
            requests.push(Request {
                timestamp_us: (t * 1e6) as u64,
                user: UserId(u as u32),
                object: pool[index.sample(&mut rng)],
            });
        }
    }
    requests.sort_by_key(|r| (r.timestamp_us, r.user));
    Ok(Trace {
        k: spec.k,
        n,
        duration_s: spec.duration_s,
        users,
        requests,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Whole,
    Seconds(f64),
}

/// Per-object request rates over the whole trace or consecutive windows.
/// The last window may be shorter; its rates use its actual length.
pub fn trace_to_demand(trace: &Trace, k: usize, window: Window) -> Result<Vec<DemandVector>> {
    if let Some(r) = trace.requests.iter().find(|r| r.object.index() >= k) {
        return Err(Error::Mismatch(format!("request for object {} with k = {k}", r.object.0)));
    }
    let duration = trace.duration_s;
    let width = match window {
        Window::Seconds(w) if !(w.is_finite() && w > 0.0) => {
            return Err(Error::InvalidArgument(format!("window must be positive, got {w}")))
        }
        Window::Seconds(w) if w < duration => w,
        _ => {
            let mut counts = vec![0u64; k];
            for r in &trace.requests {
                counts[r.object.index()] += 1;
            }
            return Ok(vec![rates_from_counts(&counts, duration)?]);
        }
    };
    let windows = ((duration / width).ceil() as usize).max(1);
    let mut counts = vec![vec![0u64; k]; windows];
    for r in &trace.requests {
        let t = r.timestamp_us as f64 / 1e6;
        let w = ((t / width) as usize).min(windows - 1);
        counts[w][r.object.index()] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let start = j as f64 * width;
            let len = if j + 1 == windows { duration - start } else { width };
            rates_from_counts(c, len)
        })
        .collect()
}

fn rates_from_counts(counts: &[u64], len: f64) -> Result<DemandVector> {
    if len <= 0.0 {
        return Ok(DemandVector::zeros(counts.len()));
    }
    DemandVector::new(counts.iter().map(|&c| c as f64 / len).collect())
}

/// Normal parameters (mean, standard deviation) of a positive-truncated law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub std: f64,
}

/// Demand vectors `lambda * zipf(alpha)` over random rank permutations, with
/// `lambda` and `alpha` drawn from positive-truncated Normals.
pub fn sample_demands(
    k: usize,
    lambda: TruncatedNormal,
    alpha: TruncatedNormal,
    count: usize,
    seed: u64,
) -> Result<Vec<DemandVector>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    let mut rng = rng_from(seed);
    (0..count)
        .map(|_| {
            let total = truncated_normal(lambda.mean, lambda.std, &mut rng)?;
            let a = truncated_normal(alpha.mean, alpha.std, &mut rng)?;
            let p = permuted_popularity(k, a, &mut rng)?;
            DemandVector::new(p.into_iter().map(|x| x * total).collect())
        })
        .collect()
}

/// Groups each node's originals into aggregate objects of `group_size`,
/// rebuilds redundancy of the same scheme and overhead on the small object
/// set, and remaps every request to its group.
pub fn aggregate(
    trace: &Trace,
    plan: &StoragePlan,
    group_size: usize,
    seed: u64,
) -> Result<(Trace, StoragePlan)> {
    if group_size == 0 {
        return Err(Error::InvalidArgument("group size must be >= 1".into()));
    }
    if trace.k != plan.k() || trace.n != plan.n() {
        return Err(Error::Mismatch("trace and plan dimensions differ".into()));
    }
    if group_size == 1 {
        return Ok((trace.clone(), plan.clone()));
    }
    let mut group_of = vec![0u32; plan.k()];
    let mut small_originals = Vec::with_capacity(plan.n());
    let mut next = 0u32;
    for (node, items) in plan.nodes() {
        let originals: Vec<ObjectId> = items
            .iter()
            .filter_map(|it| match it {
                crate::model::StoredItem::Original(o) => Some(*o),
                _ => None,
            })
            .collect();
        if originals.len() % group_size != 0 {
            return Err(Error::InvalidArgument(format!(
                "node {} holds {} originals, not divisible by group size {group_size}",
                node.0,
                originals.len()
            )));
        }
        let mut groups = Vec::new();
        for chunk in originals.chunks(group_size) {
            for o in chunk {
                group_of[o.index()] = next;
            }
            groups.push(ObjectId(next));
            next += 1;
        }
        small_originals.push(groups);
    }
    let small_k = next as usize;
    let total = crate::model::total_items(small_k, plan.overhead())?;
    let small_plan = crate::model::place_redundancy(
        small_k,
        plan.mu(),
        plan.scheme(),
        small_originals,
        total - small_k,
        seed,
    )?;
    let requests = trace
        .requests
        .iter()
        .map(|r| Request {
            object: ObjectId(group_of[r.object.index()]),
            ..*r
        })
        .collect();
    let small_trace = Trace {
        k: small_k,
        requests,
        ..trace.clone()
    };
    Ok((small_trace, small_plan))
}

impl Trace {
    /// Text form: a `#trace` header line with dimensions and user bindings,
    /// a column header, then one `timestamp_us,user_id,object_id` row per request.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(16 * self.requests.len() + 64);
        let bindings: Vec<String> = self
            .users
            .iter()
            .enumerate()
            .map(|(u, nd)| format!("{u}:{}", nd.0))
            .collect();
        let _ = writeln!(
            s,
            "#trace k={} n={} duration_s={} bindings={}",
            self.k,
            self.n,
            self.duration_s,
            bindings.join(";")
        );
        s.push_str("timestamp_us,user_id,object_id\n");
        for r in &self.requests {
            let _ = writeln!(s, "{},{},{}", r.timestamp_us, r.user.0, r.object.0);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty trace file"))?;
        let fields = header
            .strip_prefix("#trace")
            .ok_or_else(|| Error::parse(1, "missing #trace header"))?;
        let (mut k, mut n, mut duration, mut users) = (None, None, None, None);
        for field in fields.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::parse(1, format!("bad header field {field:?}")))?;
            let bad = || Error::parse(1, format!("bad value for {key}: {value:?}"));
            match key {
                "k" => k = Some(value.parse::<usize>().map_err(|_| bad())?),
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
                "duration_s" => duration = Some(value.parse::<f64>().map_err(|_| bad())?),
                "bindings" => {
                    let mut bound = Vec::new();
                    for (pos, b) in value.split(';').filter(|b| !b.is_empty()).enumerate() {
                        let (u, node) = b.split_once(':').ok_or_else(bad)?;
                        if u.parse::<usize>().map_err(|_| bad())? != pos {
                            return Err(Error::parse(1, "user bindings must be listed in order"));
                        }
                        bound.push(NodeId(node.parse().map_err(|_| bad())?));
                    }
                    users = Some(bound);
                }
                _ => return Err(Error::parse(1, format!("unknown header field {key:?}"))),
            }
        }
        let missing = |w: &str| Error::parse(1, format!("header lacks {w}"));
        let k = k.ok_or_else(|| missing("k"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let duration_s = duration.ok_or_else(|| missing("duration_s"))?;
        let users = users.ok_or_else(|| missing("bindings"))?;
        if let Some(u) = users.iter().find(|u| u.index() >= n) {
            return Err(Error::parse(1, format!("user bound to node {} but n = {n}", u.0)));
        }
        let mut requests = Vec::new();
        let mut last = 0u64;
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with("timestamp_us") {
                continue;
            }
            let mut parts = line.split(',');
            let mut field = |what: &str| -> Result<u64> {
                parts
                    .next()
                    .and_then(|p| p.trim().parse::<u64>().ok())
                    .ok_or_else(|| Error::parse(line_no, format!("bad {what}")))
            };
            let timestamp_us = field("timestamp")?;
            let user = field("user id")? as usize;
            let object = field("object id")? as usize;
            if timestamp_us < last {
                return Err(Error::parse(line_no, "timestamps must be non-decreasing"));
            }
            if user >= users.len() {
                return Err(Error::parse(line_no, format!("user {user} has no access-node binding")));
            }
            if object >= k {
                return Err(Error::parse(line_no, format!("object {object} out of range")));
            }
            last = timestamp_us;
            requests.push(Request {
                timestamp_us,
                user: UserId(user as u32),
                object: ObjectId(object as u32),
            });
        }
        if (last as f64) / 1e6 > duration_s {
            return Err(Error::parse(0, "last request falls after the trace duration"));
        }
        Ok(Trace {
            k,
            n,
            duration_s,
            users,
            requests,
        })
    }
}

/// `lambda_1,...,lambda_k` rows, one per vector, under a matching header.
pub fn demands_csv(demands: &[DemandVector]) -> String {
    let k = demands.first().map_or(0, DemandVector::len);
    let mut s = (1..=k).map(|i| format!("lambda_{i}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for d in demands {
        let row: Vec<String> = d.rates().iter().map(f64::to_string).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn parse_demands_csv(text: &str) -> Result<Vec<DemandVector>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("lambda") {
            continue;
        }
        let rates = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(idx + 1, format!("bad rate {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(DemandVector::new(rates)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_plan, Scheme};

    #[test]
    fn zipf_examples() {
        let p = zipf_popularity(2, 1.0).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let p = zipf_popularity(3, 2.0).unwrap();
        for (got, want) in p.iter().zip([36.0 / 49.0, 9.0 / 49.0, 4.0 / 49.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        let p = zipf_popularity(7, 0.0).unwrap();
        assert!(p.iter().all(|&x| (x - 1.0 / 7.0).abs() < 1e-15));
        assert!(zipf_popularity(0, 1.0).is_err());
        assert!(zipf_popularity(3, -0.5).is_err());
    }

    fn plan() -> StoragePlan {
        build_plan(6, 60, 100.0, 1.5, Scheme::Replication, 5).unwrap()
    }

    #[test]
    fn zero_duration_gives_empty_trace() {
        let p = plan();
        let spec = WorkloadSpec::for_plan(&p, 1.0, 0.0, 1);
        let t = generate_trace(&spec, &p).unwrap();
        assert!(t.requests.is_empty());
        assert_eq!(t.users.len(), 6);
    }

    #[test]
    fn generation_is_deterministic() {
        let p = plan();
        let spec = WorkloadSpec::for_plan(&p, 1.0, 2.0, 99);
        let a = generate_trace(&spec, &p).unwrap().to_text();
        let b = generate_trace(&spec, &p).unwrap().to_text();
        assert_eq!(a, b);
        let other = generate_trace(&WorkloadSpec { seed: 100, ..spec }, &p).unwrap().to_text();
        assert_ne!(a, other);
    }

    #[test]
    fn remote_and_local_pools() {
        let p = plan();
        for behavior in [Behavior::Local, Behavior::Remote] {
            let spec = WorkloadSpec {
                behavior,
                ..WorkloadSpec::for_plan(&p, 1.0, 5.0, 3)
            };
            let t = generate_trace(&spec, &p).unwrap();
            assert!(!t.requests.is_empty());
            for r in &t.requests {
                let local = p.stores_copy(t.users[r.user.0 as usize], r.object);
                assert_eq!(local, behavior == Behavior::Local);
            }
        }
    }

    #[test]
    fn empty_local_pool_is_an_error() {
        // Node 2 only holds a parity.
        let p = build_plan(3, 2, 1.0, 1.5, Scheme::XorCoding, 0).unwrap();
        let spec = WorkloadSpec {
            behavior: Behavior::Local,
            ..WorkloadSpec::for_plan(&p, 1.0, 1.0, 0)
        };
        assert!(matches!(generate_trace(&spec, &p), Err(Error::EmptyPool { node: 2, .. })));
    }

    fn burst_trace() -> Trace {
        // 1000 requests for object 0, one per microsecond, in a 1 s trace.
        Trace {
            k: 3,
            n: 1,
            duration_s: 1.0,
            users: vec![NodeId(0)],
            requests: (0..1000)
                .map(|t| Request {
                    timestamp_us: t,
                    user: UserId(0),
                    object: ObjectId(0),
                })
                .collect(),
        }
    }

    #[test]
    fn whole_trace_and_windows() {
        let t = burst_trace();
        let whole = trace_to_demand(&t, 3, Window::Whole).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0].rates(), &[1000.0, 0.0, 0.0]);

        let fine = trace_to_demand(&t, 3, Window::Seconds(0.001)).unwrap();
        assert_eq!(fine.len(), 1000);
        assert!((fine[0].rate(ObjectId(0)) - 1e6).abs() < 1e-6);
        assert!(fine[1..].iter().all(|d| d.cumulative() == 0.0));

        let same = trace_to_demand(&t, 3, Window::Seconds(1.0)).unwrap();
        assert_eq!(same, whole);
    }

    #[test]
    fn empty_trace_gives_zero_vector() {
        let t = Trace {
            requests: vec![],
            ..burst_trace()
        };
        let d = trace_to_demand(&t, 3, Window::Whole).unwrap();
        assert_eq!(d, vec![DemandVector::zeros(3)]);
        assert!(trace_to_demand(&t, 3, Window::Seconds(0.0)).is_err());
    }

    #[test]
    fn window_counts_add_up() {
        let p = plan();
        let t = generate_trace(&WorkloadSpec::for_plan(&p, 1.0, 3.3, 8), &p).unwrap();
        let windows = trace_to_demand(&t, 60, Window::Seconds(0.5)).unwrap();
        assert_eq!(windows.len(), 7);
        let total: f64 = windows
            .iter()
            .enumerate()
            .map(|(j, d)| d.cumulative() * if j == 6 { 0.3 } else { 0.5 })
            .sum();
        assert!((total - t.requests.len() as f64).abs() < 1e-6);
    }

    #[test]
    fn trace_text_round_trip_and_errors() {
        let p = plan();
        let t = generate_trace(&WorkloadSpec::for_plan(&p, 0.75, 1.0, 4), &p).unwrap();
        assert_eq!(Trace::from_text(&t.to_text()).unwrap(), t);
        let bad = "#trace k=2 n=1 duration_s=1 bindings=0:0\ntimestamp_us,user_id,object_id\n5,0,0\n3,0,1\n";
        assert!(Trace::from_text(bad).is_err());
        let unbound = "#trace k=2 n=1 duration_s=1 bindings=0:0\n5,1,0\n";
        assert!(Trace::from_text(unbound).is_err());
    }

    #[test]
    fn sampled_demands() {
        let tn = |mean, std| TruncatedNormal { mean, std };
        let a = sample_demands(2, tn(1.5, 0.4), tn(1.0, 2.0), 50, 9).unwrap();
        let b = sample_demands(2, tn(1.5, 0.4), tn(1.0, 2.0), 50, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        let fixed = sample_demands(3, tn(2.0, 0.0), tn(1.0, 0.0), 20, 1).unwrap();
        let mut first = fixed[0].rates().to_vec();
        first.sort_by(f64::total_cmp);
        for d in &fixed {
            let mut r = d.rates().to_vec();
            r.sort_by(f64::total_cmp);
            assert_eq!(r, first);
        }
        assert!(sample_demands(2, tn(1.0, 0.1), tn(1.0, 0.1), 0, 1).is_err());
    }

    #[test]
    fn aggregation() {
        let big = build_plan(10, 1000, 50.0, 1.5, Scheme::XorCoding, 1).unwrap();
        let spec = WorkloadSpec::for_plan(&big, 1.0, 1.0, 2);
        let t = generate_trace(&spec, &big).unwrap();
        let (st, sp) = aggregate(&t, &big, 10, 3).unwrap();
        assert_eq!(sp.k(), 100);
        assert_eq!(st.k, 100);
        assert_eq!(sp.scheme(), Scheme::XorCoding);
        assert!((sp.overhead() - 1.5).abs() < 1e-12);
        assert_eq!(st.requests.len(), t.requests.len());
        for (a, b) in t.requests.iter().zip(&st.requests) {
            assert_eq!((a.timestamp_us, a.user), (b.timestamp_us, b.user));
            // the aggregate lives where its members' originals live
            assert_eq!(big.original_node(a.object), sp.original_node(b.object));
        }
        let (same_t, same_p) = aggregate(&t, &big, 1, 3).unwrap();
        assert_eq!((same_t, same_p), (t.clone(), big.clone()));
        assert!(aggregate(&t, &big, 7, 3).is_err());
    }
}
