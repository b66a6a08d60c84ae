//! Storage plans, serving options and demand vectors.
//!
//! A [`StoragePlan`] places `k` objects on `n` nodes, each with service rate
//! `mu`. Redundancy is either extra replicas or XOR parities of object pairs.
//! A request for an object can be served by any node holding a copy, or by a
//! two-node recovery set `{holder of b, holder of a+b}`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl ObjectId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StoredItem {
    Original(ObjectId),
    Replica(ObjectId),
    /// XOR of two distinct objects, smaller index first.
    Parity(ObjectId, ObjectId),
}

impl StoredItem {
    /// Canonical parity item; `None` when both sides name the same object.
    pub fn parity(a: ObjectId, b: ObjectId) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(StoredItem::Parity(a, b)),
            std::cmp::Ordering::Greater => Some(StoredItem::Parity(b, a)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn refers_to(&self, object: ObjectId) -> bool {
        match *self {
            StoredItem::Original(o) | StoredItem::Replica(o) => o == object,
            StoredItem::Parity(a, b) => a == object || b == object,
        }
    }

    /// Object whose full copy this item is, if any.
    pub fn copy_of(&self) -> Option<ObjectId> {
        match *self {
            StoredItem::Original(o) | StoredItem::Replica(o) => Some(o),
            StoredItem::Parity(..) => None,
        }
    }

    fn objects(&self) -> [Option<ObjectId>; 2] {
        match *self {
            StoredItem::Original(o) | StoredItem::Replica(o) => [Some(o), None],
            StoredItem::Parity(a, b) => [Some(a), Some(b)],
        }
    }
}

impl fmt::Display for StoredItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoredItem::Original(o) => write!(f, "O{}", o.0),
            StoredItem::Replica(o) => write!(f, "R{}", o.0),
            StoredItem::Parity(a, b) => write!(f, "P{}+{}", a.0, b.0),
        }
    }
}

impl FromStr for StoredItem {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let num = |t: &str| t.parse::<u32>().map_err(|_| format!("bad object index in {s:?}"));
        if let Some(rest) = s.strip_prefix('O') {
            Ok(StoredItem::Original(ObjectId(num(rest)?)))
        } else if let Some(rest) = s.strip_prefix('R') {
            Ok(StoredItem::Replica(ObjectId(num(rest)?)))
        } else if let Some(rest) = s.strip_prefix('P') {
            let (a, b) = rest
                .split_once('+')
                .ok_or_else(|| format!("parity item {s:?} lacks '+'"))?;
            StoredItem::parity(ObjectId(num(a)?), ObjectId(num(b)?))
                .ok_or_else(|| format!("parity item {s:?} pairs an object with itself"))
        } else {
            Err(format!("unknown item {s:?}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Replication,
    XorCoding,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Replication => "replication",
            Scheme::XorCoding => "xor",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "replication" | "rep" => Ok(Scheme::Replication),
            "xor" | "xorcoding" | "coding" => Ok(Scheme::XorCoding),
            other => Err(Error::InvalidArgument(format!("unknown scheme {other:?}"))),
        }
    }
}

/// One way of serving a request: a single holder, or a two-node recovery set.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ServingOption {
    pub object: ObjectId,
    /// Sorted, one or two nodes.
    pub nodes: Vec<NodeId>,
}

impl ServingOption {
    /// Number of object downloads incurred.
    pub fn cost(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoragePlan {
    n: usize,
    k: usize,
    mu: f64,
    scheme: Scheme,
    nodes: Vec<Vec<StoredItem>>,
}

impl StoragePlan {
    /// Builds a plan from an explicit layout, validating every plan invariant.
    pub fn new(
        k: usize,
        mu: f64,
        scheme: Scheme,
        mut nodes: Vec<Vec<StoredItem>>,
    ) -> Result<Self> {
        for items in &mut nodes {
            items.sort();
        }
        let plan = StoragePlan {
            n: nodes.len(),
            k,
            mu,
            scheme,
            nodes,
        };
        plan.validate()?;
        Ok(plan)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::PlanInvariant(m));
        if self.n == 0 || self.k == 0 {
            return bad("plan needs at least one node and one object".into());
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad(format!("service rate must be positive, got {}", self.mu));
        }
        let mut originals = vec![0usize; self.k];
        for (node, items) in self.nodes.iter().enumerate() {
            let mut seen = HashSet::new();
            for item in items {
                for o in item.objects().into_iter().flatten() {
                    if o.index() >= self.k {
                        return bad(format!("node {node} stores {item} but k = {}", self.k));
                    }
                    if !seen.insert(o) {
                        return bad(format!("node {node} stores two items referring to object {}", o.0));
                    }
                }
                match (item, self.scheme) {
                    (StoredItem::Original(o), _) => originals[o.index()] += 1,
                    (StoredItem::Replica(_), Scheme::XorCoding) => {
                        return bad(format!("xor plan stores replica {item} on node {node}"))
                    }
                    (StoredItem::Parity(..), Scheme::Replication) => {
                        return bad(format!("replication plan stores parity {item} on node {node}"))
                    }
                    _ => {}
                }
            }
        }
        if let Some(o) = originals.iter().position(|&c| c != 1) {
            return bad(format!("object {o} has {} originals, expected 1", originals[o]));
        }
        let counts = self.nodes.iter().map(Vec::len);
        let (lo, hi) = counts.fold((usize::MAX, 0), |(lo, hi), c| (lo.min(c), hi.max(c)));
        if hi - lo > 1 {
            return bad(format!("node storage counts range from {lo} to {hi}"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn items(&self, node: NodeId) -> &[StoredItem] {
        &self.nodes[node.index()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &[StoredItem])> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, items)| (NodeId(i as u32), items.as_slice()))
    }

    pub fn total_items(&self) -> usize {
        self.nodes.iter().map(Vec::len).sum()
    }

    pub fn overhead(&self) -> f64 {
        self.total_items() as f64 / self.k as f64
    }

    /// Nodes holding a full copy (original or replica) of `object`, sorted.
    pub fn holders(&self, object: ObjectId) -> Vec<NodeId> {
        self.nodes()
            .filter(|(_, items)| items.iter().any(|it| it.copy_of() == Some(object)))
            .map(|(id, _)| id)
            .collect()
    }

    /// Node storing the original of `object`.
    pub fn original_node(&self, object: ObjectId) -> Option<NodeId> {
        self.nodes()
            .find(|(_, items)| items.contains(&StoredItem::Original(object)))
            .map(|(id, _)| id)
    }

    /// Whether `node` holds a full copy of `object`.
    pub fn stores_copy(&self, node: NodeId, object: ObjectId) -> bool {
        self.nodes[node.index()]
            .iter()
            .any(|it| it.copy_of() == Some(object))
    }

    pub fn serving_options(&self, object: ObjectId) -> Result<Vec<ServingOption>> {
        if object.index() >= self.k {
            return Err(Error::InvalidArgument(format!(
                "object {} out of range for k = {}",
                object.0, self.k
            )));
        }
        Ok(self.option_table().swap_remove(object.index()))
    }

    /// Serving options for every object, indexed by object.
    pub fn option_table(&self) -> Vec<Vec<ServingOption>> {
        let mut holders: Vec<Vec<NodeId>> = vec![Vec::new(); self.k];
        let mut parities: Vec<Vec<(ObjectId, NodeId)>> = vec![Vec::new(); self.k];
        for (node, items) in self.nodes() {
            for item in items {
                match *item {
                    StoredItem::Original(o) | StoredItem::Replica(o) => holders[o.index()].push(node),
                    StoredItem::Parity(a, b) => {
                        parities[a.index()].push((b, node));
                        parities[b.index()].push((a, node));
                    }
                }
            }
        }
        (0..self.k)
            .map(|i| {
                let object = ObjectId(i as u32);
                let mut direct: Vec<ServingOption> = holders[i]
                    .iter()
                    .map(|&nd| ServingOption {
                        object,
                        nodes: vec![nd],
                    })
                    .collect();
                let mut sets: Vec<ServingOption> = Vec::new();
                for &(partner, parity_node) in &parities[i] {
                    for &h in &holders[partner.index()] {
                        let mut nodes = vec![h, parity_node];
                        nodes.sort();
                        let opt = ServingOption { object, nodes };
                        if !sets.contains(&opt) {
                            sets.push(opt);
                        }
                    }
                }
                sets.sort_by(|a, b| a.nodes.cmp(&b.nodes));
                direct.append(&mut sets);
                direct
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        text.parse()
    }
}

pub fn serving_options(plan: &StoragePlan, object: ObjectId) -> Result<Vec<ServingOption>> {
    let opts = plan.serving_options(object)?;
    if opts.is_empty() {
        return Err(Error::PlanInvariant(format!("object {} is not stored anywhere", object.0)));
    }
    Ok(opts)
}

impl fmt::Display for StoragePlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# edgecap storage plan")?;
        writeln!(f, "scheme={}", self.scheme)?;
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "k={}", self.k)?;
        writeln!(f, "mu={}", self.mu)?;
        for (i, items) in self.nodes.iter().enumerate() {
            write!(f, "node {i}:")?;
            for item in items {
                write!(f, " {item}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for StoragePlan {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut scheme = None;
        let mut n = None;
        let mut k = None;
        let mut mu = None;
        let mut nodes: Vec<Option<Vec<StoredItem>>> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("node ") {
                let (id, items) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::parse(line_no, "node record lacks ':'"))?;
                let id: usize = id
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad node index {id:?}")))?;
                let items = items
                    .split_whitespace()
                    .map(|t| t.parse::<StoredItem>().map_err(|m| Error::parse(line_no, m)))
                    .collect::<Result<Vec<_>>>()?;
                if nodes.len() <= id {
                    nodes.resize(id + 1, None);
                }
                if nodes[id].replace(items).is_some() {
                    return Err(Error::parse(line_no, format!("node {id} listed twice")));
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("unrecognized line {line:?}")))?;
            let value = value.trim();
            let bad = |what: &str| Error::parse(line_no, format!("bad {what} {value:?}"));
            match key.trim() {
                "scheme" => scheme = Some(value.parse::<Scheme>().map_err(|_| bad("scheme"))?),
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad("n"))?),
                "k" => k = Some(value.parse::<usize>().map_err(|_| bad("k"))?),
                "mu" => mu = Some(value.parse::<f64>().map_err(|_| bad("mu"))?),
                other => return Err(Error::parse(line_no, format!("unknown key {other:?}"))),
            }
        }
        let missing = |what: &str| Error::parse(0, format!("missing {what}"));
        let n = n.ok_or_else(|| missing("n"))?;
        let k = k.ok_or_else(|| missing("k"))?;
        let mu = mu.ok_or_else(|| missing("mu"))?;
        let scheme = scheme.ok_or_else(|| missing("scheme"))?;
        if nodes.len() != n {
            return Err(Error::parse(0, format!("expected {n} node records, found {}", nodes.len())));
        }
        let nodes = nodes
            .into_iter()
            .enumerate()
            .map(|(i, items)| items.ok_or_else(|| missing(&format!("node {i}"))))
            .collect::<Result<Vec<_>>>()?;
        StoragePlan::new(k, mu, scheme, nodes)
    }
}

/// Number of stored items for `k` objects at `overhead`, which must be integral.
pub fn total_items(k: usize, overhead: f64) -> Result<usize> {
    if !(overhead.is_finite() && overhead >= 1.0) {
        return Err(Error::InvalidArgument(format!("overhead must be >= 1, got {overhead}")));
    }
    let exact = overhead * k as f64;
    let total = exact.round();
    if (exact - total).abs() > 1e-9 * exact.max(1.0) {
        return Err(Error::InfeasibleGeometry(format!(
            "overhead {overhead} x k {k} = {exact} is not an integer item count"
        )));
    }
    Ok(total as usize)
}

/// Builds a plan with originals spread round-robin and randomly chosen
/// redundancy (which objects get replicas, which pairs form parities).
pub fn build_plan(
    n: usize,
    k: usize,
    mu: f64,
    overhead: f64,
    scheme: Scheme,
    seed: u64,
) -> Result<StoragePlan> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 nodes, got {n}")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("need at least 1 object".into()));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidArgument(format!("service rate must be positive, got {mu}")));
    }
    let total = total_items(k, overhead)?;
    let mut originals = vec![Vec::new(); n];
    for i in 0..k {
        originals[i % n].push(ObjectId(i as u32));
    }
    place_redundancy(k, mu, scheme, originals, total - k, seed)
}

const PLACEMENT_ATTEMPTS: usize = 200;

/// Adds `redundant` replicas or parities to fixed originals and places them.
pub(crate) fn place_redundancy(
    k: usize,
    mu: f64,
    scheme: Scheme,
    originals: Vec<Vec<ObjectId>>,
    redundant: usize,
    seed: u64,
) -> Result<StoragePlan> {
    let n = originals.len();
    let total = k + redundant;
    let (base, extra) = (total / n, total % n);
    // +1 slots go to the nodes holding the most originals.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(originals[i].len()));
    let mut capacity = vec![base; n];
    for &i in order.iter().take(extra) {
        capacity[i] += 1;
    }
    for (i, orig) in originals.iter().enumerate() {
        if orig.len() > capacity[i] {
            return Err(Error::InfeasibleGeometry(format!(
                "node {i} holds {} originals but only {} slots",
                orig.len(),
                capacity[i]
            )));
        }
    }
    match scheme {
        Scheme::Replication => {
            if redundant > 0 && k * (n - 1) < redundant {
                return Err(Error::InfeasibleGeometry(format!(
                    "{redundant} replicas of {k} objects cannot fit on distinct nodes of {n}"
                )));
            }
        }
        Scheme::XorCoding => {
            if redundant > k * k.saturating_sub(1) / 2 {
                return Err(Error::InfeasibleGeometry(format!(
                    "{redundant} parities exceed the {} distinct pairs of {k} objects",
                    k * k.saturating_sub(1) / 2
                )));
            }
        }
    }

    let mut home = vec![0usize; k];
    for (i, orig) in originals.iter().enumerate() {
        for o in orig {
            home[o.index()] = i;
        }
    }
    let mut rng = rng_from(seed);
    for _ in 0..PLACEMENT_ATTEMPTS {
        let items = match scheme {
            Scheme::Replication => draw_replicas(k, redundant, &mut rng),
            Scheme::XorCoding => match draw_parities(&home, redundant, &mut rng) {
                Some(p) => p,
                None => continue,
            },
        };
        if let Some(nodes) = try_place(&originals, &capacity, items, &mut rng) {
            return StoragePlan::new(k, mu, scheme, nodes);
        }
    }
    Err(Error::InfeasibleGeometry(format!(
        "could not place {redundant} redundant items on {n} nodes without conflicts"
    )))
}

fn draw_replicas<R: Rng>(k: usize, redundant: usize, rng: &mut R) -> Vec<StoredItem> {
    let mut objects: Vec<u32> = (0..k as u32).collect();
    objects.shuffle(rng);
    let (per, rem) = (redundant / k, redundant % k);
    let mut items = Vec::with_capacity(redundant);
    for (pos, &o) in objects.iter().enumerate() {
        let copies = per + usize::from(pos < rem);
        items.extend(std::iter::repeat_n(StoredItem::Replica(ObjectId(o)), copies));
    }
    items
}

/// Rounds of random matchings until `count` distinct pairs are drawn. Pairs
/// whose originals share a node (`home`) are skipped.
fn draw_parities<R: Rng>(home: &[usize], count: usize, rng: &mut R) -> Option<Vec<StoredItem>> {
    let k = home.len();
    let mut used = HashSet::new();
    let mut items = Vec::with_capacity(count);
    let mut stalls = 0;
    while items.len() < count {
        let mut objects: Vec<u32> = (0..k as u32).collect();
        objects.shuffle(rng);
        let before = items.len();
        for pair in objects.chunks_exact(2) {
            if items.len() == count {
                break;
            }
            if home[pair[0] as usize] == home[pair[1] as usize] {
                continue;
            }
            let item = StoredItem::parity(ObjectId(pair[0]), ObjectId(pair[1]))?;
            if used.insert(item) {
                items.push(item);
            }
        }
        if items.len() == before {
            stalls += 1;
            if stalls > 64 {
                return None;
            }
        }
    }
    Some(items)
}

fn try_place<R: Rng>(
    originals: &[Vec<ObjectId>],
    capacity: &[usize],
    mut items: Vec<StoredItem>,
    rng: &mut R,
) -> Option<Vec<Vec<StoredItem>>> {
    let mut nodes: Vec<Vec<StoredItem>> = originals
        .iter()
        .map(|objs| objs.iter().map(|&o| StoredItem::Original(o)).collect())
        .collect();
    items.shuffle(rng);
    for item in items {
        let conflicts = |node: &Vec<StoredItem>| {
            item.objects()
                .into_iter()
                .flatten()
                .any(|o| node.iter().any(|it| it.refers_to(o)))
        };
        let free = |i: usize| capacity[i] - nodes[i].len();
        let candidates: Vec<usize> = (0..nodes.len())
            .filter(|&i| free(i) > 0 && !conflicts(&nodes[i]))
            .collect();
        let most = candidates.iter().map(|&i| free(i)).max()?;
        let best: Vec<usize> = candidates.into_iter().filter(|&i| free(i) == most).collect();
        let pick = best[rng.random_range(0..best.len())];
        nodes[pick].push(item);
    }
    Some(nodes)
}

/// Per-object request rates (requests/second).
#[derive(Debug, Clone, PartialEq)]
pub struct DemandVector {
    rates: Vec<f64>,
    cumulative: f64,
}

impl DemandVector {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some((i, &r)) = rates
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r >= 0.0))
        {
            return Err(Error::InvalidRate { object: i, rate: r });
        }
        let cumulative = rates.iter().sum();
        Ok(DemandVector { rates, cumulative })
    }

    pub fn zeros(k: usize) -> Self {
        DemandVector {
            rates: vec![0.0; k],
            cumulative: 0.0,
        }
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate(&self, object: ObjectId) -> f64 {
        self.rates[object.index()]
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn cumulative(&self) -> f64 {
        self.cumulative
    }

    /// p_i = lambda_i / lambda; `None` for the zero demand.
    pub fn popularity(&self) -> Option<Vec<f64>> {
        (self.cumulative > 0.0).then(|| self.rates.iter().map(|r| r / self.cumulative).collect())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        DemandVector::new(self.rates.iter().map(|r| r * factor).collect())
    }
}
