//! Bundled branch-and-bound solver.
//!
//! Every node is an LP relaxation solved by the dual simplex in `microlp`;
//! branching fixes one fractional binary to 0 or 1 and re-optimizes warm from
//! the parent basis. Until a first incumbent exists the search dives
//! depth-first towards the rounded LP point; afterwards nodes are processed in
//! best-bound order, plunging into the child on the rounded side after each
//! branching.

use std::fmt;
use std::time::{Duration, Instant};

use log::debug;
use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};
use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::model::{MilpModel, Sense, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    #[default]
    Bundled,
    Export,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BranchingRule {
    /// Pseudocost scores, initialized by strong branching until each side of
    /// a variable has been observed.
    #[default]
    Reliability,
    /// Fractional value closest to 0.5 among the highest-priority family.
    MostFractional,
    /// Lowest-index fractional variable among the highest-priority family.
    FirstFractional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub mode: SolverMode,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub time_limit_s: Option<f64>,
    pub node_limit: Option<usize>,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub branching: BranchingRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mode: SolverMode::Bundled,
            abs_gap: 1e-6,
            rel_gap: 0.0,
            time_limit_s: None,
            node_limit: None,
            feasibility_tol: 1e-6,
            integrality_tol: 1e-6,
            branching: BranchingRule::Reliability,
        }
    }
}

const OBJECTIVE_NOISE: f64 = 1e-9;
/// Strong-branching probes per node.
const STRONG_CANDIDATES: usize = 8;
/// Observations per side after which a pseudocost is trusted.
const RELIABLE_AFTER: u32 = 1;

impl SolverOptions {
    fn time_limit(&self) -> Option<Duration> {
        self.time_limit_s.map(Duration::from_secs_f64)
    }

    /// Pruning slack: the configured gap, floored at the round-off level of
    /// LP objective values.
    fn gap_tolerance(&self, incumbent: f64) -> f64 {
        self.abs_gap
            .max(self.rel_gap * incumbent.abs())
            .max(OBJECTIVE_NOISE * incumbent.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
}

/// One progress record; `Display` renders `node_count,bound,incumbent,gap`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLine {
    pub nodes: usize,
    pub bound: f64,
    pub incumbent: f64,
    pub gap: f64,
}

impl fmt::Display for LogLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{:.6},{:.6},{:.6e}",
            self.nodes, self.bound, self.incumbent, self.gap
        )
    }
}

#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub best_bound: f64,
    /// Absolute gap between incumbent and best bound.
    pub gap: f64,
    pub values: Vec<f64>,
    pub nodes: usize,
    pub lp_solves: usize,
    pub log: Vec<LogLine>,
}

impl MilpSolution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }
}

const WARM_NODE_CAP: usize = 256;

struct Node {
    id: u64,
    depth: u32,
    bound: f64,
    preferred: bool,
    fixings: Vec<(usize, f64)>,
    lp: Option<Box<microlp::Solution>>,
}

struct Incumbent {
    objective: f64,
    values: Vec<f64>,
}

/// Solves `model` to optimality within the configured gap.
pub fn solve(model: &MilpModel, options: &SolverOptions) -> Result<MilpSolution, SolveError> {
    if options.mode == SolverMode::Export {
        return Err(SolveError::ExportOnly);
    }
    model.validate()?;
    BranchAndBound::new(model, options).run()
}

struct BranchAndBound<'a> {
    model: &'a MilpModel,
    options: &'a SolverOptions,
    started: Instant,
    binaries: Vec<(usize, u8)>,
    handles: Vec<microlp::Variable>,
    lp_solves: usize,
    nodes: usize,
    next_id: u64,
    log: Vec<LogLine>,
    /// Per variable: (sum of down gains per unit change, count, same for up).
    pseudo: Vec<Pseudocost>,
}

#[derive(Clone, Copy, Debug, Default)]
struct Pseudocost {
    down: f64,
    down_n: u32,
    up: f64,
    up_n: u32,
}

impl Pseudocost {
    fn reliable(&self) -> bool {
        self.down_n >= RELIABLE_AFTER && self.up_n >= RELIABLE_AFTER
    }
}

fn product_score(down: f64, up: f64) -> f64 {
    down.max(1e-6) * up.max(1e-6)
}

impl<'a> BranchAndBound<'a> {
    fn new(model: &'a MilpModel, options: &'a SolverOptions) -> Self {
        let binaries = model
            .binaries()
            .map(|v| (v.0, model.priority_of(v)))
            .collect();
        Self {
            model,
            options,
            started: Instant::now(),
            binaries,
            handles: Vec::new(),
            lp_solves: 0,
            nodes: 0,
            next_id: 0,
            log: Vec::new(),
            pseudo: vec![Pseudocost::default(); model.vars.len()],
        }
    }

    fn out_of_time(&self) -> bool {
        self.options
            .time_limit()
            .is_some_and(|limit| self.started.elapsed() >= limit)
    }

    fn run(mut self) -> Result<MilpSolution, SolveError> {
        let (root_problem, handles) = relaxation(self.model, &[], None)?;
        self.handles = handles;
        self.lp_solves += 1;
        let root = match root_problem.solve() {
            Ok(outcome) => into_solution(outcome)?,
            Err(microlp::Error::Infeasible) => {
                return Err(SolveError::Infeasible {
                    families: infeasibility_hint(self.model),
                })
            }
            Err(microlp::Error::Unbounded) => return Err(SolveError::Unbounded),
            Err(e) => return Err(SolveError::Numerical(e.to_string())),
        };
        let offset = self.model.objective_offset;
        let root_bound = root.objective() + offset;

        let mut incumbent: Option<Incumbent> = None;
        if let Some(candidate) = self.rounding_heuristic(&root)? {
            self.accept(&mut incumbent, candidate, root_bound);
        }

        let mut open = vec![Node {
            id: self.bump_id(),
            depth: 0,
            bound: root_bound,
            preferred: true,
            fixings: Vec::new(),
            lp: Some(Box::new(root.clone())),
        }];
        let root = Box::new(root);
        let mut status = SolveStatus::Optimal;
        let mut plunge: Option<u64> = None;

        while !open.is_empty() {
            let best_open = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
            if let Some(inc) = &incumbent {
                if best_open >= inc.objective - self.options.gap_tolerance(inc.objective) {
                    open.clear();
                    break;
                }
            }
            if self.out_of_time() {
                status = SolveStatus::TimeLimit;
                break;
            }
            if self.options.node_limit.is_some_and(|l| self.nodes >= l) {
                status = SolveStatus::NodeLimit;
                break;
            }

            let pick = plunge
                .take()
                .and_then(|id| open.iter().position(|n| n.id == id))
                .unwrap_or_else(|| select(&open, incumbent.is_some()));
            let node = open.swap_remove(pick);
            self.nodes += 1;

            if let Some(inc) = &incumbent {
                if node.bound >= inc.objective - self.options.gap_tolerance(inc.objective) {
                    continue;
                }
            }
            let lp = match node.lp {
                Some(lp) => lp,
                None => match self.reconstruct(&root, &open, &node.fixings)? {
                    Some(lp) => Box::new(lp),
                    None => continue,
                },
            };
            let values: Vec<f64> = (0..self.model.vars.len())
                .map(|i| lp.var_value_raw(self.handles[i]))
                .collect();

            let cutoff = incumbent
                .as_ref()
                .map(|inc| inc.objective - self.options.gap_tolerance(inc.objective));
            let Some(branch_var) = self.choose_branch(&lp, &values, node.bound, cutoff)? else {
                let candidate = self.finalize(&values, lp.objective() + offset)?;
                let bound = open.iter().map(|n| n.bound).fold(node.bound, f64::min);
                self.accept(&mut incumbent, candidate, bound);
                continue;
            };

            let rounded = values[branch_var].round();
            let warm_nodes = open.iter().filter(|n| n.lp.is_some()).count();
            let mut parent = Some(lp);
            for value in [0.0, 1.0] {
                let base = if value == 0.0 {
                    parent.as_ref().map(|p| (**p).clone())
                } else {
                    parent.take().map(|p| *p)
                };
                let Some(base) = base else { break };
                self.lp_solves += 1;
                let child = match base.fix_var(self.handles[branch_var], value) {
                    Ok(outcome) => match outcome {
                        SolveOutcome::Solution(s) => s,
                        SolveOutcome::Interrupted(_) => continue,
                    },
                    Err(microlp::Error::Infeasible) => continue,
                    Err(microlp::Error::Unbounded) => return Err(SolveError::Unbounded),
                    Err(e) => return Err(SolveError::Numerical(e.to_string())),
                };
                let bound = child.objective() + offset;
                self.observe(branch_var, values[branch_var], value, bound - node.bound);
                if let Some(inc) = &incumbent {
                    if bound >= inc.objective - self.options.gap_tolerance(inc.objective) {
                        continue;
                    }
                }
                let mut fixings = node.fixings.clone();
                fixings.push((branch_var, value));
                let keep_warm = warm_nodes < WARM_NODE_CAP || release_worse_warm(&mut open, bound);
                let id = self.bump_id();
                if value == rounded {
                    plunge = Some(id);
                }
                open.push(Node {
                    id,
                    depth: node.depth + 1,
                    bound,
                    preferred: value == rounded,
                    fixings,
                    lp: keep_warm.then(|| Box::new(child)),
                });
            }
        }

        let Some(inc) = incumbent else {
            return match status {
                SolveStatus::TimeLimit => Err(SolveError::NoIncumbent("time")),
                SolveStatus::NodeLimit => Err(SolveError::NoIncumbent("node")),
                SolveStatus::Optimal => Err(SolveError::Infeasible {
                    families: vec!["integrality".to_string()],
                }),
            };
        };
        let best_bound = open
            .iter()
            .map(|n| n.bound)
            .fold(inc.objective, f64::min)
            .min(inc.objective);
        let gap = (inc.objective - best_bound).max(0.0);
        let line = LogLine {
            nodes: self.nodes,
            bound: best_bound,
            incumbent: inc.objective,
            gap,
        };
        debug!("{line}");
        self.log.push(line);
        Ok(MilpSolution {
            status,
            objective: inc.objective,
            best_bound,
            gap,
            values: inc.values,
            nodes: self.nodes,
            lp_solves: self.lp_solves,
            log: self.log,
        })
    }

    fn bump_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn accept(&mut self, incumbent: &mut Option<Incumbent>, mut candidate: Incumbent, bound: f64) {
        candidate.objective = self.model.objective_value(&candidate.values);
        if incumbent
            .as_ref()
            .is_some_and(|inc| inc.objective <= candidate.objective)
        {
            return;
        }
        let line = LogLine {
            nodes: self.nodes,
            bound,
            incumbent: candidate.objective,
            gap: (candidate.objective - bound).max(0.0),
        };
        debug!("{line}");
        self.log.push(line);
        *incumbent = Some(candidate);
    }

    fn observe(&mut self, var: usize, x: f64, side: f64, gain: f64) {
        if !gain.is_finite() {
            return;
        }
        let gain = gain.max(0.0);
        let pc = &mut self.pseudo[var];
        if side == 0.0 {
            let f = x - x.floor();
            if f > 0.0 {
                pc.down += gain / f;
                pc.down_n += 1;
            }
        } else {
            let f = x.ceil() - x;
            if f > 0.0 {
                pc.up += gain / f;
                pc.up_n += 1;
            }
        }
    }

    /// Objective increase of fixing `var` to `value`; infinite when that side
    /// is infeasible or cut off, `None` when the LP gave up.
    fn probe(
        &mut self,
        lp: &microlp::Solution,
        var: usize,
        value: f64,
        parent: f64,
        cutoff: Option<f64>,
    ) -> Result<Option<f64>, SolveError> {
        self.lp_solves += 1;
        match lp.clone().fix_var(self.handles[var], value) {
            Ok(SolveOutcome::Solution(s)) => {
                let bound = s.objective() + self.model.objective_offset;
                if cutoff.is_some_and(|c| bound >= c) {
                    return Ok(Some(f64::INFINITY));
                }
                Ok(Some(bound - parent))
            }
            Ok(SolveOutcome::Interrupted(_)) => Ok(None),
            Err(microlp::Error::Infeasible) => Ok(Some(f64::INFINITY)),
            Err(microlp::Error::Unbounded) => Err(SolveError::Unbounded),
            Err(e) => Err(SolveError::Numerical(e.to_string())),
        }
    }

    fn choose_branch(
        &mut self,
        lp: &microlp::Solution,
        values: &[f64],
        parent: f64,
        cutoff: Option<f64>,
    ) -> Result<Option<usize>, SolveError> {
        if self.options.branching != BranchingRule::Reliability {
            return Ok(self.branching_candidate(values));
        }
        let tol = self.options.integrality_tol;
        let fractional: Vec<(usize, u8, f64)> = self
            .binaries
            .iter()
            .filter_map(|&(i, p)| {
                let x = values[i];
                let frac = (x - x.floor()).min(x.ceil() - x);
                (frac > tol).then_some((i, p, frac))
            })
            .collect();
        let Some(level) = fractional.iter().map(|c| c.1).min() else {
            return Ok(None);
        };
        let mut candidates: Vec<(usize, f64)> = fractional
            .iter()
            .filter(|c| c.1 == level)
            .map(|c| (c.0, c.2))
            .collect();
        if candidates.len() == 1 {
            return Ok(Some(candidates[0].0));
        }
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

        let (mut sum_d, mut n_d, mut sum_u, mut n_u) = (0.0, 0u32, 0.0, 0u32);
        for pc in &self.pseudo {
            sum_d += pc.down;
            n_d += pc.down_n;
            sum_u += pc.up;
            n_u += pc.up_n;
        }
        let avg_d = if n_d > 0 { sum_d / n_d as f64 } else { 1.0 };
        let avg_u = if n_u > 0 { sum_u / n_u as f64 } else { 1.0 };

        let mut best: Option<(f64, usize)> = None;
        let mut probes = 0;
        for &(var, _) in &candidates {
            let x = values[var];
            let (fd, fu) = (x - x.floor(), x.ceil() - x);
            let pc = self.pseudo[var];
            let score = if !pc.reliable() && probes < STRONG_CANDIDATES {
                probes += 1;
                let down = self.probe(lp, var, 0.0, parent, cutoff)?;
                let up = self.probe(lp, var, 1.0, parent, cutoff)?;
                if let Some(d) = down {
                    self.observe(var, x, 0.0, d);
                }
                if let Some(u) = up {
                    self.observe(var, x, 1.0, u);
                }
                match (down, up) {
                    (Some(d), Some(u)) if d.is_infinite() || u.is_infinite() => f64::INFINITY,
                    (Some(d), Some(u)) => product_score(d, u),
                    _ => product_score(avg_d * fd, avg_u * fu),
                }
            } else {
                let d = if pc.down_n > 0 { pc.down / pc.down_n as f64 } else { avg_d };
                let u = if pc.up_n > 0 { pc.up / pc.up_n as f64 } else { avg_u };
                product_score(d * fd, u * fu)
            };
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, var));
            }
            if score.is_infinite() {
                break;
            }
        }
        Ok(best.map(|(_, v)| v))
    }

    fn branching_candidate(&self, values: &[f64]) -> Option<usize> {
        let tol = self.options.integrality_tol;
        let mut best: Option<(u8, f64, usize)> = None;
        for &(idx, priority) in &self.binaries {
            let x = values[idx];
            let frac = (x - x.floor()).min(x.ceil() - x);
            if frac <= tol {
                continue;
            }
            let score = match self.options.branching {
                BranchingRule::FirstFractional => 0.0,
                _ => -frac,
            };
            let better = match best {
                None => true,
                Some((p, s, _)) => priority < p || (priority == p && score < s),
            };
            if better {
                best = Some((priority, score, idx));
            }
        }
        best.map(|(_, _, idx)| idx)
    }

    /// Rounds binaries of an integral LP point; re-solves the continuous part
    /// with binaries pinned when rounding moved any of them noticeably.
    fn finalize(&mut self, values: &[f64], objective: f64) -> Result<Incumbent, SolveError> {
        let drift = self
            .binaries
            .iter()
            .map(|&(i, _)| (values[i] - values[i].round()).abs())
            .fold(0.0, f64::max);
        if drift <= 1e-9 {
            let mut values = values.to_vec();
            for &(i, _) in &self.binaries {
                values[i] = values[i].round();
            }
            return Ok(Incumbent { objective, values });
        }
        let pinned: Vec<(usize, f64)> = self
            .binaries
            .iter()
            .map(|&(i, _)| (i, values[i].round()))
            .collect();
        match self.solve_pinned(&pinned)? {
            Some(inc) => Ok(inc),
            None => {
                let mut values = values.to_vec();
                for &(i, v) in &pinned {
                    values[i] = v;
                }
                Ok(Incumbent { objective, values })
            }
        }
    }

    /// Dives through the priority levels of the root point: each level's
    /// binaries are pinned by rounding up, to nearest, or down (first LP
    /// feasible choice wins) and the relaxation is re-solved before moving on.
    fn rounding_heuristic(
        &mut self,
        root: &microlp::Solution,
    ) -> Result<Option<Incumbent>, SolveError> {
        if self.binaries.is_empty() {
            return Ok(None);
        }
        let mut levels: Vec<u8> = self.binaries.iter().map(|&(_, p)| p).collect();
        levels.sort_unstable();
        levels.dedup();
        let mut values: Vec<f64> = (0..self.model.vars.len())
            .map(|i| root.var_value_raw(self.handles[i]))
            .collect();
        let mut pinned: Vec<(usize, f64)> = Vec::with_capacity(self.binaries.len());
        let mut last = None;
        for level in levels {
            let members: Vec<usize> = self
                .binaries
                .iter()
                .filter(|&&(_, p)| p == level)
                .map(|&(i, _)| i)
                .collect();
            let mut found = None;
            for round in [f64::ceil, f64::round, f64::floor] {
                let mut trial = pinned.clone();
                trial.extend(members.iter().map(|&i| {
                    let x = values[i].clamp(0.0, 1.0);
                    let snapped = if (x - x.round()).abs() <= self.options.integrality_tol {
                        x.round()
                    } else {
                        round(x)
                    };
                    (i, snapped)
                }));
                if let Some(inc) = self.solve_pinned(&trial)? {
                    found = Some((trial, inc));
                    break;
                }
            }
            let Some((trial, inc)) = found else {
                return Ok(None);
            };
            pinned = trial;
            values.clone_from(&inc.values);
            last = Some(inc);
        }
        Ok(last)
    }

    fn solve_pinned(&mut self, pinned: &[(usize, f64)]) -> Result<Option<Incumbent>, SolveError> {
        let (problem, _) = relaxation(self.model, pinned, None)?;
        self.lp_solves += 1;
        match problem.solve() {
            Ok(outcome) => {
                let sol = into_solution(outcome)?;
                let mut values: Vec<f64> = (0..self.model.vars.len())
                    .map(|i| sol.var_value_raw(self.handles[i]))
                    .collect();
                for &(i, v) in pinned {
                    values[i] = v;
                }
                Ok(Some(Incumbent {
                    objective: sol.objective() + self.model.objective_offset,
                    values,
                }))
            }
            Err(microlp::Error::Infeasible) => Ok(None),
            Err(microlp::Error::Unbounded) => Err(SolveError::Unbounded),
            Err(e) => Err(SolveError::Numerical(e.to_string())),
        }
    }

    /// LP of a cold node: starts from the stored LP needing the fewest bound
    /// changes (an open node sharing a fixing prefix, or the root), releases
    /// that node's own fixings past the shared prefix and applies the rest.
    fn reconstruct(
        &mut self,
        root: &microlp::Solution,
        open: &[Node],
        fixings: &[(usize, f64)],
    ) -> Result<Option<microlp::Solution>, SolveError> {
        let mut best: Option<(&Node, usize)> = None;
        let mut best_cost = fixings.len();
        for n in open.iter().filter(|n| n.lp.is_some()) {
            let shared = n.fixings.iter().zip(fixings).take_while(|(a, b)| a == b).count();
            let cost = n.fixings.len() - shared + fixings.len() - shared;
            if cost < best_cost {
                best_cost = cost;
                best = Some((n, shared));
            }
        }
        let (mut lp, shared) = match best {
            Some((n, shared)) => {
                let mut lp = n.lp.as_deref().expect("warm node").clone();
                for &(var, _) in &n.fixings[shared..] {
                    self.lp_solves += 1;
                    lp = match lp.unfix_var(self.handles[var]) {
                        Ok((SolveOutcome::Solution(s), _)) => s,
                        Ok((SolveOutcome::Interrupted(_), _)) => return Ok(None),
                        Err(e) => return Err(SolveError::Numerical(e.to_string())),
                    };
                }
                (lp, shared)
            }
            None => (root.clone(), 0),
        };
        for &(var, value) in &fixings[shared..] {
            self.lp_solves += 1;
            lp = match lp.fix_var(self.handles[var], value) {
                Ok(SolveOutcome::Solution(s)) => s,
                Ok(SolveOutcome::Interrupted(_)) => return Ok(None),
                Err(microlp::Error::Infeasible) => return Ok(None),
                Err(e) => return Err(SolveError::Numerical(e.to_string())),
            };
        }
        Ok(Some(lp))
    }
}

/// Drops the stored LP of the open node with the weakest bound if that bound
/// is worse than `bound`, so warm starts go to the nodes picked first.
fn release_worse_warm(open: &mut [Node], bound: f64) -> bool {
    let worst = open
        .iter_mut()
        .filter(|n| n.lp.is_some())
        .max_by(|a, b| a.bound.total_cmp(&b.bound).then(a.id.cmp(&b.id)));
    match worst {
        Some(node) if node.bound > bound => {
            node.lp = None;
            true
        }
        _ => false,
    }
}

fn select(open: &[Node], have_incumbent: bool) -> usize {
    let mut best = 0;
    for (i, n) in open.iter().enumerate().skip(1) {
        let b = &open[best];
        let better = if have_incumbent {
            (n.bound, std::cmp::Reverse(n.depth), n.id) < (b.bound, std::cmp::Reverse(b.depth), b.id)
        } else {
            (n.depth, n.preferred, n.id) > (b.depth, b.preferred, b.id)
        };
        if better {
            best = i;
        }
    }
    best
}

fn into_solution(outcome: SolveOutcome) -> Result<microlp::Solution, SolveError> {
    match outcome {
        SolveOutcome::Solution(s) => Ok(s),
        SolveOutcome::Interrupted(_) => Err(SolveError::NoIncumbent("time")),
    }
}

/// Builds the continuous relaxation, optionally pinning some variables and
/// leaving out one constraint family.
fn relaxation(
    model: &MilpModel,
    pinned: &[(usize, f64)],
    skip_family: Option<&str>,
) -> Result<(Problem, Vec<microlp::Variable>), SolveError> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let mut bounds: Vec<(f64, f64)> = model.vars.iter().map(|v| (v.lower, v.upper)).collect();
    for &(i, v) in pinned {
        bounds[i] = (v, v);
    }
    let vars: Vec<microlp::Variable> = model
        .vars
        .iter()
        .zip(&bounds)
        .map(|(v, &b)| problem.add_var(v.cost, b))
        .collect();
    for c in &model.constraints {
        if skip_family.is_some_and(|f| c.family() == f) {
            continue;
        }
        if c.terms.is_empty() {
            let ok = match c.sense {
                Sense::Le => 0.0 <= c.rhs,
                Sense::Ge => 0.0 >= c.rhs,
                Sense::Eq => c.rhs == 0.0,
            };
            if !ok && skip_family.is_none() {
                return Err(SolveError::Infeasible {
                    families: vec![c.family().to_string()],
                });
            }
            continue;
        }
        let op = match c.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Eq => ComparisonOp::Eq,
            Sense::Ge => ComparisonOp::Ge,
        };
        problem.add_constraint(
            c.terms.iter().map(|(v, coef)| (vars[v.0], *coef)).collect::<Vec<_>>().as_slice(),
            op,
            c.rhs,
        );
    }
    Ok((problem, vars))
}

/// Constraint families whose removal alone makes the LP relaxation feasible.
fn infeasibility_hint(model: &MilpModel) -> Vec<String> {
    let mut families: Vec<&str> = model.constraints.iter().map(|c| c.family()).collect();
    families.sort_unstable();
    families.dedup();
    let mut implicated = Vec::new();
    for family in &families {
        let Ok((problem, _)) = relaxation(model, &[], Some(family)) else {
            continue;
        };
        if problem.solve().is_ok() {
            implicated.push(family.to_string());
        }
    }
    if implicated.is_empty() {
        implicated.push(format!("multiple ({})", families.join(", ")));
    }
    implicated
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sense;

    #[test]
    fn lp_minimize_x_with_lower_row() {
        let mut m = MilpModel::new("lp");
        let x = m.add_var("x", 0.0, f64::INFINITY, 1.0);
        m.add_constraint("c_x_1", [(x, 1.0)], Sense::Ge, 3.0);
        let s = solve(&m, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.value(x) - 3.0).abs() < 1e-9);
        assert!((s.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn small_knapsack() {
        // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 5  (min the negation)
        let mut m = MilpModel::new("knap");
        let a = m.add_binary("x_a", -5.0);
        let b = m.add_binary("x_b", -4.0);
        let c = m.add_binary("x_c", -3.0);
        m.add_constraint("cap", [(a, 2.0), (b, 3.0), (c, 1.0)], Sense::Le, 5.0);
        let s = solve(&m, &SolverOptions::default()).unwrap();
        assert!((s.objective + 9.0).abs() < 1e-9, "{}", s.objective);
        assert_eq!(s.value(a), 1.0);
        assert_eq!(s.value(b), 1.0);
        assert_eq!(s.value(c), 0.0);
    }

    #[test]
    fn infeasible_reports_family() {
        let mut m = MilpModel::new("inf");
        let x = m.add_var("x", 0.0, 10.0, 1.0);
        let y = m.add_binary("y", 0.0);
        m.add_constraint("lo_x_1", [(x, 1.0)], Sense::Ge, 5.0);
        m.add_constraint("hi_x_1", [(x, 1.0), (y, 1.0)], Sense::Le, 2.0);
        m.add_constraint("other_y_1", [(y, 1.0)], Sense::Le, 1.0);
        match solve(&m, &SolverOptions::default()) {
            Err(SolveError::Infeasible { families }) => {
                assert!(families.contains(&"lo".to_string()));
                assert!(families.contains(&"hi".to_string()));
                assert!(!families.contains(&"other".to_string()));
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_is_an_error() {
        let mut m = MilpModel::new("unb");
        let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        m.add_constraint("c", [(x, 1.0)], Sense::Le, 3.0);
        assert!(matches!(
            solve(&m, &SolverOptions::default()),
            Err(SolveError::Unbounded)
        ));
    }

    #[test]
    fn export_mode_refuses_to_solve() {
        let m = MilpModel::new("e");
        let opts = SolverOptions {
            mode: SolverMode::Export,
            ..SolverOptions::default()
        };
        assert!(matches!(solve(&m, &opts), Err(SolveError::ExportOnly)));
    }

    #[test]
    fn log_line_is_comma_separated() {
        let line = LogLine {
            nodes: 3,
            bound: 1.5,
            incumbent: 2.0,
            gap: 0.5,
        };
        let text = line.to_string();
        assert_eq!(text.split(',').count(), 4);
        assert!(text.starts_with("3,1.500000,2.000000,"));
    }
}
