//! Independent oracles shared by integration and acceptance tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use elcc_core::grid::{Bus, PowerSystem, ThermalGenerator, TransmissionLine};
use elcc_core::resources::ForPolynomial;
use elcc_core::uc::HourlyInputs;
use elcc_milp::{MilpModel, Sense, VarKind};

/// Dense Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// DC power flow by solving for bus angles; the slack absorbs the mismatch.
/// `injections` follow the order of `system.buses`.
pub fn dc_power_flow(system: &PowerSystem, injections: &[f64]) -> Vec<f64> {
    let pos: HashMap<u32, usize> = system.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let slack = pos[&system.slack_bus];
    let others: Vec<usize> = (0..system.buses.len()).filter(|&i| i != slack).collect();
    let reduced: HashMap<usize, usize> = others.iter().enumerate().map(|(r, &i)| (i, r)).collect();
    let m = others.len();
    let mut a = vec![vec![0.0; m]; m];
    for l in &system.lines {
        let (f, t) = (pos[&l.from_bus], pos[&l.to_bus]);
        let y = 1.0 / l.reactance;
        for (p, q) in [(f, t), (t, f)] {
            if let Some(&rp) = reduced.get(&p) {
                a[rp][rp] += y;
                if let Some(&rq) = reduced.get(&q) {
                    a[rp][rq] -= y;
                }
            }
        }
    }
    let rhs: Vec<f64> = others.iter().map(|&i| injections[i]).collect();
    let sol = gauss_solve(a, rhs);
    let mut theta = vec![0.0; system.buses.len()];
    for (r, &i) in others.iter().enumerate() {
        theta[i] = sol[r];
    }
    system
        .lines
        .iter()
        .map(|l| (theta[pos[&l.from_bus]] - theta[pos[&l.to_bus]]) / l.reactance)
        .collect()
}

/// Connected network: a random spanning tree plus extra edges.
pub fn random_network(rng: &mut ChaCha8Rng, buses: usize) -> PowerSystem {
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for b in 2..=buses as u32 {
        let parent = rng.random_range(1..b);
        edges.push((parent, b));
    }
    for f in 1..=buses as u32 {
        for t in f + 1..=buses as u32 {
            if !edges.contains(&(f, t)) && rng.random_bool(0.25) {
                edges.push((f, t));
            }
        }
    }
    PowerSystem {
        slack_bus: rng.random_range(1..=buses as u32),
        buses: (1..=buses as u32)
            .map(|id| Bus {
                id,
                load_weight: 1.0 / buses as f64,
            })
            .collect(),
        lines: edges
            .iter()
            .enumerate()
            .map(|(i, &(f, t))| TransmissionLine {
                id: i as u32 + 1,
                from_bus: f,
                to_bus: t,
                reactance: rng.random_range(0.01..0.5),
                capacity: 100.0,
                aar_table: vec![(f64::INFINITY, 1.0)],
            })
            .collect(),
        thermal: vec![],
        solar: vec![],
        wind: vec![],
        storage: vec![],
    }
}

/// Random MILP over binaries and at most one continuous variable (last).
pub fn random_small_milp(rng: &mut ChaCha8Rng, n_bin: usize, continuous: bool, n_rows: usize) -> MilpModel {
    let mut m = MilpModel::new("acceptance");
    let mut vars = Vec::new();
    for i in 0..n_bin {
        vars.push(m.add_binary(format!("x_b{i}_1"), rng.random_range(-10..=10) as f64));
    }
    if continuous {
        let ub = rng.random_range(1..=10) as f64;
        vars.push(m.add_var("y_c_1", 0.0, ub, rng.random_range(-5..=5) as f64 * 0.5));
    }
    for r in 0..n_rows {
        let mut terms = Vec::new();
        for &v in &vars {
            if rng.random_bool(0.6) {
                terms.push((v, rng.random_range(-6..=6) as f64));
            }
        }
        let sense = if rng.random_bool(0.3) { Sense::Ge } else { Sense::Le };
        let rhs = rng.random_range(-4..=(2 * n_bin as i32 + 8)) as f64;
        m.add_constraint(format!("row_r{r}_1"), terms, sense, rhs);
    }
    m
}

/// Exhaustive enumeration of the binaries; the continuous variable, if any,
/// is placed at the cheaper end of its feasible interval.
pub fn enumerate_small_milp(model: &MilpModel) -> Option<f64> {
    let bins: Vec<usize> = (0..model.vars.len())
        .filter(|&i| model.vars[i].kind == VarKind::Binary)
        .collect();
    let cont = (0..model.vars.len()).find(|&i| model.vars[i].kind == VarKind::Continuous);
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; model.vars.len()];
    for mask in 0u64..(1u64 << bins.len()) {
        for (k, &i) in bins.iter().enumerate() {
            x[i] = ((mask >> k) & 1) as f64;
        }
        let (mut lo, mut hi) = cont.map_or((0.0, 0.0), |c| (model.vars[c].lower, model.vars[c].upper));
        let mut ok = true;
        for row in &model.constraints {
            let mut fixed = 0.0;
            let mut b = 0.0;
            for &(v, a) in &row.terms {
                if Some(v.0) == cont {
                    b += a;
                } else {
                    fixed += a * x[v.0];
                }
            }
            let r = row.rhs - fixed;
            let le = |lo: &mut f64, hi: &mut f64, b: f64, r: f64| -> bool {
                if b > 0.0 {
                    *hi = hi.min(r / b);
                } else if b < 0.0 {
                    *lo = lo.max(r / b);
                } else if r < -1e-9 {
                    return false;
                }
                true
            };
            ok &= match row.sense {
                Sense::Le => le(&mut lo, &mut hi, b, r),
                Sense::Ge => le(&mut lo, &mut hi, -b, -r),
                Sense::Eq => le(&mut lo, &mut hi, b, r) && le(&mut lo, &mut hi, -b, -r),
            };
            if !ok {
                break;
            }
        }
        if !ok || lo > hi + 1e-9 {
            continue;
        }
        let mut obj: f64 = bins.iter().map(|&i| model.vars[i].cost * x[i]).sum();
        if let Some(c) = cont {
            let cost = model.vars[c].cost;
            obj += cost * if cost >= 0.0 { lo } else { hi };
        }
        obj += model.objective_offset;
        if best.is_none_or(|b| obj < b) {
            best = Some(obj);
        }
    }
    best
}

fn unit(id: &str, bus: u32, g: (f64, f64), up_down: (u32, u32), su_sd: (f64, f64), curve: Vec<(f64, f64)>) -> ThermalGenerator {
    ThermalGenerator {
        id: id.into(),
        bus,
        g_min: g.0,
        g_max: g.1,
        min_up: up_down.0,
        min_down: up_down.1,
        startup_cost: su_sd.0,
        shutdown_cost: su_sd.1,
        cost_curve: curve,
        forced_outage: ForPolynomial::default(),
    }
}

pub const TWO_BUS_DEMAND: [f64; 24] = [
    90.0, 80.0, 70.0, 65.0, 70.0, 85.0, 110.0, 140.0, 160.0, 175.0, 185.0, 190.0, 195.0, 200.0, 205.0, 215.0,
    230.0, 250.0, 290.0, 265.0, 220.0, 170.0, 130.0, 100.0,
];

/// Two buses, a cheap slow unit at bus 1 and a dear flexible one at bus 2,
/// one 70 MW line, 24 hours with a derated hour for each of G1 and the line.
pub fn two_bus_uc() -> (PowerSystem, HourlyInputs) {
    let system = PowerSystem {
        slack_bus: 1,
        buses: vec![
            Bus { id: 1, load_weight: 0.3 },
            Bus { id: 2, load_weight: 0.7 },
        ],
        lines: vec![TransmissionLine {
            id: 1,
            from_bus: 1,
            to_bus: 2,
            reactance: 0.1,
            capacity: 70.0,
            aar_table: vec![(f64::INFINITY, 1.0)],
        }],
        thermal: vec![
            unit("G1", 1, (30.0, 150.0), (3, 2), (600.0, 50.0), vec![(80.0, 12.0), (150.0, 18.0)]),
            unit("G2", 2, (20.0, 120.0), (2, 3), (250.0, 20.0), vec![(60.0, 35.0), (120.0, 45.0)]),
        ],
        solar: vec![],
        wind: vec![],
        storage: vec![],
    };
    let mut avail = vec![vec![150.0; 24], vec![120.0; 24]];
    avail[0][11] = 120.0;
    let mut rating = vec![70.0; 24];
    rating[17] = 60.0;
    let inputs = HourlyInputs {
        demand: TWO_BUS_DEMAND.to_vec(),
        thermal_avail: avail,
        pv_max: vec![],
        wind_max: vec![],
        line_rating: vec![rating],
        hurricane: vec![false; 24],
    };
    (system, inputs)
}

fn pwl_cost(curve: &[(f64, f64)], g: f64) -> f64 {
    let mut prev = 0.0;
    let mut total = 0.0;
    for &(bp, slope) in curve {
        total += slope * (g.min(bp) - prev).max(0.0);
        prev = bp;
    }
    total
}

/// Cheapest dispatch of the two-bus system for one hour and commitment,
/// by enumerating vertices of the (g1, shed) arrangement.
fn two_bus_dispatch(system: &PowerSystem, inputs: &HourlyInputs, hour: usize, on: [bool; 2], voll: f64) -> Option<f64> {
    let d = inputs.demand[hour];
    let w1 = system.buses[0].load_weight;
    let f = inputs.line_rating[0][hour];
    let g = &system.thermal;
    let lo = |u: usize| if on[u] { g[u].g_min } else { 0.0 };
    let hi = |u: usize| if on[u] { inputs.thermal_avail[u][hour] } else { 0.0 };
    // a_g·g1 + a_s·s <= r
    let rows = [
        (-1.0, 0.0, -lo(0)),
        (1.0, 0.0, hi(0)),
        (1.0, 1.0, d - lo(1)),
        (-1.0, -1.0, hi(1) - d),
        (0.0, -1.0, 0.0),
        (0.0, 1.0, d),
        (1.0, w1, f + w1 * d),
        (-1.0, -w1, f - w1 * d),
    ];
    let mut lines: Vec<(f64, f64, f64)> = rows.to_vec();
    for &(bp, _) in &g[0].cost_curve {
        lines.push((1.0, 0.0, bp));
    }
    for &(bp, _) in &g[1].cost_curve {
        lines.push((1.0, 1.0, d - bp));
    }
    let mut best: Option<f64> = None;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (a1, b1, c1) = lines[i];
            let (a2, b2, c2) = lines[j];
            let det = a1 * b2 - a2 * b1;
            if det.abs() < 1e-12 {
                continue;
            }
            let g1 = (c1 * b2 - c2 * b1) / det;
            let s = (a1 * c2 - a2 * c1) / det;
            if rows.iter().any(|&(a, b, r)| a * g1 + b * s > r + 1e-7) {
                continue;
            }
            let g2 = d - s - g1;
            let cost = pwl_cost(&g[0].cost_curve, g1) + pwl_cost(&g[1].cost_curve, g2) + voll * s;
            if best.is_none_or(|b| cost < b) {
                best = Some(cost);
            }
        }
    }
    best
}

/// Optimal two-unit commitment cost by dynamic programming over
/// (on/off, hours in state) for each unit, starting from a cold history.
pub fn two_bus_commitment_oracle(system: &PowerSystem, inputs: &HourlyInputs, voll: f64) -> f64 {
    let g = &system.thermal;
    let cap: Vec<u32> = g.iter().map(|u| u.min_up.max(u.min_down)).collect();
    type State = [(bool, u32); 2];
    let mut frontier: HashMap<State, f64> = HashMap::new();
    frontier.insert([(false, cap[0]), (false, cap[1])], 0.0);
    for hour in 0..inputs.demand.len() {
        let mut dispatch: HashMap<[bool; 2], Option<f64>> = HashMap::new();
        let mut next: HashMap<State, f64> = HashMap::new();
        for (state, cost) in &frontier {
            for mask in 0..4u8 {
                let on = [mask & 1 == 1, mask & 2 == 2];
                let mut new_state = *state;
                let mut trans = 0.0;
                let mut allowed = true;
                for u in 0..2 {
                    let (was, run) = state[u];
                    if was == on[u] {
                        new_state[u] = (was, (run + 1).min(cap[u]));
                    } else {
                        let need = if was { g[u].min_up } else { g[u].min_down };
                        allowed &= run >= need;
                        trans += if was { g[u].shutdown_cost } else { g[u].startup_cost };
                        new_state[u] = (on[u], 1);
                    }
                }
                if !allowed {
                    continue;
                }
                let Some(disp) = *dispatch
                    .entry(on)
                    .or_insert_with(|| two_bus_dispatch(system, inputs, hour, on, voll))
                else {
                    continue;
                };
                let total = cost + trans + disp;
                let slot = next.entry(new_state).or_insert(f64::INFINITY);
                if total < *slot {
                    *slot = total;
                }
            }
        }
        frontier = next;
    }
    frontier.values().copied().fold(f64::INFINITY, f64::min)
}
