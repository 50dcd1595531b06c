use super::{Plan, PlanError, PlanMethod};
use crate::env::{advance, ArmSpec, Instance};

/// Candidate `(rho, q)` pair with a link to its predecessor.
///
/// `parent` is an opaque id of the predecessor pair and `arm` the arm pulled to
/// reach this one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueStatePair {
    pub rho: f64,
    pub q: f64,
    pub parent: u32,
    pub arm: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PruneMode {
    /// Keep exactly the Pareto-maximal pairs under `(rho, q)`.
    Exact,
    /// Group by `floor(rho / unit)`, keep the max-`q` pair per level, then
    /// drop pairs dominated by a higher level.
    Grid { unit: f64 },
}

fn level(rho: f64, unit: f64) -> u64 {
    (rho / unit).floor() as u64
}

/// Removes dominated pairs. The result is ordered by decreasing `rho` (or grid
/// level). Exact duplicates and ties inside a level keep the earliest input.
pub fn dominance_prune(pairs: &[ValueStatePair], mode: PruneMode) -> Vec<ValueStatePair> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let by_q_then_rho =
        |a: &ValueStatePair, b: &ValueStatePair| b.q.total_cmp(&a.q).then(b.rho.total_cmp(&a.rho));
    match mode {
        PruneMode::Exact => order.sort_by(|&x, &y| {
            let (a, b) = (&pairs[x], &pairs[y]);
            b.rho.total_cmp(&a.rho).then(b.q.total_cmp(&a.q))
        }),
        PruneMode::Grid { unit } => order.sort_by(|&x, &y| {
            let (a, b) = (&pairs[x], &pairs[y]);
            level(b.rho, unit)
                .cmp(&level(a.rho, unit))
                .then_with(|| by_q_then_rho(a, b))
        }),
    }
    let mut kept = Vec::new();
    let mut best_q = f64::NEG_INFINITY;
    for i in order {
        if pairs[i].q > best_q {
            best_q = pairs[i].q;
            kept.push(pairs[i]);
        }
    }
    kept
}

/// Extends a pruned frontier by one round and prunes the result.
///
/// `frontier` must be ordered by decreasing `rho` with strictly increasing `q`,
/// which is what pruning produces. Since `q -> (1 - lambda) q + lambda b` is
/// monotone, each arm's candidates arrive sorted by `q` and can be
/// Pareto-filtered in one pass; a K-way merge by `rho` then feeds the grid
/// sweep. The surviving `(rho, q)` values are those of
/// `dominance_prune(all candidates, mode)` and keep the same order.
///
/// Exact `(rho, q)` ties go to the lexicographically smaller arm sequence.
fn extend(
    frontier: &[Entry],
    arena: &Arena,
    arms: &[ArmSpec],
    lambda: f64,
    mode: PruneMode,
    lists: &mut Vec<Vec<ValueStatePair>>,
    out: &mut Vec<ValueStatePair>,
) {
    let lex_less = |a: &ValueStatePair, b: &ValueStatePair| {
        arena.path_less(
            frontier[a.parent as usize].node,
            a.arm,
            frontier[b.parent as usize].node,
            b.arm,
        )
    };
    lists.resize_with(arms.len(), Vec::new);
    for (a, (arm, list)) in arms.iter().zip(lists.iter_mut()).enumerate() {
        list.clear();
        // Walk from the largest q down; keep rho strictly increasing.
        for (idx, e) in frontier.iter().enumerate().rev() {
            let cand = ValueStatePair {
                rho: e.rho + arm.r * e.q,
                q: advance(e.q, arm.b, lambda),
                parent: idx as u32,
                arm: a as u32,
            };
            match list.last() {
                Some(last) if cand.q == last.q => {
                    if cand.rho > last.rho || (cand.rho == last.rho && lex_less(&cand, last)) {
                        list.pop();
                        list.push(cand);
                    }
                }
                Some(last) if cand.rho <= last.rho => {}
                _ => list.push(cand),
            }
        }
    }

    out.clear();
    let mut heads: Vec<usize> = lists.iter().map(Vec::len).collect();
    let mut best_q = f64::NEG_INFINITY;
    let mut group: Option<(u64, ValueStatePair)> = None;
    loop {
        // Next candidate by decreasing rho, then q, then arm.
        let mut pick: Option<usize> = None;
        for a in 0..lists.len() {
            if heads[a] == 0 {
                continue;
            }
            let c = &lists[a][heads[a] - 1];
            let better = match pick {
                None => true,
                Some(b) => {
                    let p = &lists[b][heads[b] - 1];
                    c.rho > p.rho
                        || (c.rho == p.rho && (c.q > p.q || (c.q == p.q && lex_less(c, p))))
                }
            };
            if better {
                pick = Some(a);
            }
        }
        let Some(a) = pick else { break };
        heads[a] -= 1;
        let cand = lists[a][heads[a]];
        match mode {
            PruneMode::Exact => {
                if cand.q > best_q {
                    best_q = cand.q;
                    out.push(cand);
                }
            }
            PruneMode::Grid { unit } => {
                let lvl = level(cand.rho, unit);
                match group {
                    Some((g, ref mut top)) if g == lvl => {
                        if cand.q > top.q {
                            *top = cand;
                        }
                    }
                    _ => {
                        if let Some((_, top)) = group.take() {
                            if top.q > best_q {
                                best_q = top.q;
                                out.push(top);
                            }
                        }
                        group = Some((lvl, cand));
                    }
                }
            }
        }
    }
    if let Some((_, top)) = group {
        if top.q > best_q {
            out.push(top);
        }
    }
}

const ROOT: u32 = u32::MAX;

// Small in tests so collection actually runs.
const MIN_GC: usize = if cfg!(test) { 4096 } else { 1 << 20 };

/// Backpointer store. Parents always precede their children, which keeps
/// compaction a single forward pass.
struct Arena {
    parent: Vec<u32>,
    arm: Vec<u32>,
    next_gc: usize,
}

impl Arena {
    fn new() -> Self {
        Self {
            parent: Vec::new(),
            arm: Vec::new(),
            next_gc: MIN_GC,
        }
    }

    fn push(&mut self, parent: u32, arm: u32) -> u32 {
        self.parent.push(parent);
        self.arm.push(arm);
        (self.parent.len() - 1) as u32
    }

    /// Drops nodes unreachable from `live` and rewrites the ids in `live`.
    fn collect(&mut self, live: &mut [Entry]) {
        let n = self.parent.len();
        let mut marked = vec![false; n];
        for e in live.iter() {
            let mut node = e.node;
            while node != ROOT && !marked[node as usize] {
                marked[node as usize] = true;
                node = self.parent[node as usize];
            }
        }
        let mut remap = vec![ROOT; n];
        let mut next = 0usize;
        for old in 0..n {
            if marked[old] {
                let p = self.parent[old];
                self.parent[next] = if p == ROOT { ROOT } else { remap[p as usize] };
                self.arm[next] = self.arm[old];
                remap[old] = next as u32;
                next += 1;
            }
        }
        self.parent.truncate(next);
        self.arm.truncate(next);
        for e in live.iter_mut() {
            e.node = remap[e.node as usize];
        }
        self.next_gc = (4 * next).max(MIN_GC);
    }

    /// Whether the path `a` followed by `arm_a` precedes `b` followed by
    /// `arm_b`. Both paths must have the same length.
    fn path_less(&self, mut a: u32, mut arm_a: u32, mut b: u32, mut arm_b: u32) -> bool {
        // The first difference sits right below the common ancestor.
        while a != b {
            arm_a = self.arm[a as usize];
            arm_b = self.arm[b as usize];
            a = self.parent[a as usize];
            b = self.parent[b as usize];
        }
        arm_a < arm_b
    }

    fn sequence(&self, mut node: u32) -> Vec<usize> {
        let mut seq = Vec::new();
        while node != ROOT {
            seq.push(self.arm[node as usize] as usize);
            node = self.parent[node as usize];
        }
        seq.reverse();
        seq
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    rho: f64,
    q: f64,
    node: u32,
}

/// Diagnostics of one FPTAS run.
#[derive(Debug, Clone, PartialEq)]
pub struct FptasStats {
    /// Frontier size after pruning, one entry per round.
    pub frontier_sizes: Vec<usize>,
    /// Reward grid width; zero when the exact Pareto mode was used.
    pub unit: f64,
    /// Lower bound on OPT used to scale the grid.
    pub lower_bound: f64,
}

/// Value of pulling arm `(r, b)` for `n` rounds starting from state `q`.
fn repeat_value(q: f64, r: f64, b: f64, lambda: f64, n: usize) -> f64 {
    let n_f = n as f64;
    let geometric = if lambda == 0.0 {
        n_f
    } else {
        (1.0 - (1.0 - lambda).powf(n_f)) / lambda
    };
    r * (n_f * b + (q - b) * geometric)
}

/// Lower bound on OPT: the best single-arm repetition, or one priming pull of
/// `j` followed by repeating `i`. Positive exactly when OPT is.
pub fn opt_lower_bound(instance: &Instance) -> f64 {
    let arms = instance.arms();
    let (q0, lambda, t) = (instance.q0(), instance.lambda(), instance.horizon());
    let mut best: f64 = 0.0;
    for i in arms {
        best = best.max(repeat_value(q0, i.r, i.b, lambda, t));
        if t >= 2 {
            for j in arms {
                let q1 = advance(q0, j.b, lambda);
                best = best.max(j.r * q0 + repeat_value(q1, i.r, i.b, lambda, t - 1));
            }
        }
    }
    best
}

/// FPTAS over `(rho, q)` frontiers.
///
/// Rewards are grouped on a grid of width `epsilon * LB / T`, where `LB` is
/// [`opt_lower_bound`]; each round loses at most one grid width, so the result
/// is within a factor `1 - epsilon` of OPT. `q` and `rho` themselves stay exact.
pub fn fptas_dp(instance: &Instance, epsilon: f64) -> Result<Plan, PlanError> {
    fptas_dp_with_stats(instance, epsilon).map(|(plan, _)| plan)
}

pub fn fptas_dp_with_stats(
    instance: &Instance,
    epsilon: f64,
) -> Result<(Plan, FptasStats), PlanError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(PlanError::InvalidEpsilon(epsilon));
    }
    let t = instance.horizon();
    let lambda = instance.lambda();
    let arms = instance.arms();
    let method = PlanMethod::Fptas { epsilon };

    let lower_bound = opt_lower_bound(instance);
    if lower_bound <= 0.0 {
        // OPT is zero; every sequence is optimal.
        let plan = Plan::from_sequence(instance, vec![0; t])?.with_method(method);
        let stats = FptasStats {
            frontier_sizes: vec![1; t],
            unit: 0.0,
            lower_bound,
        };
        return Ok((plan, stats));
    }
    let mut unit = epsilon * lower_bound / t as f64;
    // Levels must stay exactly representable; otherwise prune exactly.
    if t as f64 / unit > 1e15 {
        unit = 0.0;
    }

    let mut arena = Arena::new();
    let mut frontier = vec![Entry {
        rho: 0.0,
        q: instance.q0(),
        node: ROOT,
    }];
    let mode = if unit > 0.0 {
        PruneMode::Grid { unit }
    } else {
        PruneMode::Exact
    };
    let mut lists = Vec::new();
    let mut pruned = Vec::new();
    let mut frontier_sizes = Vec::with_capacity(t);

    for _ in 0..t {
        extend(
            &frontier,
            &arena,
            arms,
            lambda,
            mode,
            &mut lists,
            &mut pruned,
        );
        let next: Vec<Entry> = pruned
            .iter()
            .map(|p| Entry {
                rho: p.rho,
                q: p.q,
                node: arena.push(frontier[p.parent as usize].node, p.arm),
            })
            .collect();
        frontier = next;
        frontier_sizes.push(frontier.len());
        if arena.parent.len() > arena.next_gc {
            arena.collect(&mut frontier);
        }
    }

    let mut best = &frontier[0];
    for e in &frontier[1..] {
        let tie_first = e.rho == best.rho && arena.path_less(e.node, 0, best.node, 0);
        if e.rho > best.rho || tie_first {
            best = e;
        }
    }
    let sequence = arena.sequence(best.node);
    debug_assert_eq!(sequence.len(), t);
    let plan = Plan::from_sequence(instance, sequence)?.with_method(method);
    Ok((
        plan,
        FptasStats {
            frontier_sizes,
            unit,
            lower_bound,
        },
    ))
}
