use elcc_milp::{MilpModel, MilpSolution, Sense, VarId};

use super::inputs::UcWindow;
use super::{RenewableSchedule, StorageSchedule, ThermalSchedule, UcError, UcParams, UcSolution};
use crate::grid::{PowerSystem, PtdfMatrix};

struct ThermalVars {
    u: Vec<VarId>,
    su: Vec<VarId>,
    sd: Vec<VarId>,
    /// `[hour][block]`.
    blocks: Vec<Vec<VarId>>,
}

struct RenewableVars {
    output: Vec<VarId>,
    curtailment: Vec<VarId>,
}

struct StorageVars {
    charge: Vec<VarId>,
    discharge: Vec<VarId>,
    soc: Vec<VarId>,
    charging: Vec<VarId>,
    discharging: Vec<VarId>,
}

/// A built window model together with the handles needed to read a solution
/// back into schedules.
pub struct UcModel {
    pub model: MilpModel,
    pub first_hour: usize,
    demand: Vec<f64>,
    thermal: Vec<ThermalVars>,
    solar: Vec<RenewableVars>,
    wind: Vec<RenewableVars>,
    storage: Vec<StorageVars>,
    shed: Vec<VarId>,
    gate: Vec<VarId>,
}

/// `(width, slope)` of each incremental block, clipped at `g_max`.
pub(crate) fn cost_blocks(curve: &[(f64, f64)], g_max: f64) -> Vec<(f64, f64)> {
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(curve.len());
    for &(bp, slope) in curve {
        let top = bp.min(g_max);
        if top > prev {
            out.push((top - prev, slope));
            prev = top;
        }
    }
    if out.is_empty() {
        out.push((0.0, curve.first().map_or(0.0, |c| c.1)));
    }
    out
}

/// Builds the window MILP. Variables and rows are named
/// `{family}_{entity}_{hour}` with the 1-based hour of the month.
pub fn build_uc_model(
    system: &PowerSystem,
    ptdf: &PtdfMatrix,
    window: &UcWindow,
    params: &UcParams,
) -> Result<UcModel, UcError> {
    window.inputs.verify(system, window.first_hour)?;
    window.initial.verify(system)?;
    if ptdf.bus_ids.len() != system.buses.len() || ptdf.line_ids.len() != system.lines.len() {
        return Err(UcError::BadParams("PTDF does not match the system".into()));
    }
    let hours = window.hours();
    let h0 = window.first_hour;
    let demand = window.effective_demand();
    let weights = system.weights();
    let bus_of = system.bus_index();
    let inputs = &window.inputs;

    let mut m = MilpModel::new(format!("uc_h{h0}"));
    m.set_priority("u", 0);
    m.set_priority("chon", 1);
    m.set_priority("dison", 1);
    m.set_priority("ls", 2);

    let blocks: Vec<Vec<(f64, f64)>> = system
        .thermal
        .iter()
        .map(|g| cost_blocks(&g.cost_curve, g.g_max))
        .collect();
    let mut thermal: Vec<ThermalVars> = system
        .thermal
        .iter()
        .map(|_| ThermalVars {
            u: Vec::with_capacity(hours),
            su: Vec::with_capacity(hours),
            sd: Vec::with_capacity(hours),
            blocks: Vec::with_capacity(hours),
        })
        .collect();
    let new_res = |n: usize| {
        (0..n)
            .map(|_| RenewableVars {
                output: Vec::with_capacity(hours),
                curtailment: Vec::with_capacity(hours),
            })
            .collect::<Vec<_>>()
    };
    let mut solar = new_res(system.solar.len());
    let mut wind = new_res(system.wind.len());
    let mut storage: Vec<StorageVars> = system
        .storage
        .iter()
        .map(|_| StorageVars {
            charge: Vec::with_capacity(hours),
            discharge: Vec::with_capacity(hours),
            soc: Vec::with_capacity(hours),
            charging: Vec::with_capacity(hours),
            discharging: Vec::with_capacity(hours),
        })
        .collect();
    let mut shed = Vec::with_capacity(hours);
    let mut gate = Vec::with_capacity(hours);

    for k in 0..hours {
        let h = h0 + k;
        for (i, g) in system.thermal.iter().enumerate() {
            let v = &mut thermal[i];
            v.u.push(m.add_binary(format!("u_{}_{h}", g.id), 0.0));
            v.su.push(m.add_var(format!("su_{}_{h}", g.id), 0.0, 1.0, g.startup_cost));
            v.sd.push(m.add_var(format!("sd_{}_{h}", g.id), 0.0, 1.0, g.shutdown_cost));
            let row = blocks[i]
                .iter()
                .enumerate()
                .map(|(b, &(width, slope))| m.add_var(format!("gb_{}.{}_{h}", g.id, b + 1), 0.0, width, slope))
                .collect();
            v.blocks.push(row);
        }
        for (j, s) in system.solar.iter().enumerate() {
            solar[j].output.push(m.add_var(format!("gs_{}_{h}", s.id), 0.0, f64::INFINITY, s.cost));
            solar[j].curtailment.push(m.add_var(
                format!("scurt_{}_{h}", s.id),
                0.0,
                f64::INFINITY,
                params.curtailment_multiplier * s.cost,
            ));
        }
        for (j, w) in system.wind.iter().enumerate() {
            wind[j].output.push(m.add_var(format!("gw_{}_{h}", w.id), 0.0, f64::INFINITY, w.cost));
            wind[j].curtailment.push(m.add_var(
                format!("wcurt_{}_{h}", w.id),
                0.0,
                f64::INFINITY,
                params.curtailment_multiplier * w.cost,
            ));
        }
        for (j, b) in system.storage.iter().enumerate() {
            let v = &mut storage[j];
            v.charge.push(m.add_var(format!("pch_{}_{h}", b.id), 0.0, b.charge_max, b.charge_cost));
            v.discharge.push(m.add_var(format!("pdis_{}_{h}", b.id), 0.0, b.discharge_max, 0.0));
            v.soc.push(m.add_var(format!("soc_{}_{h}", b.id), b.soc_min, b.soc_max, 0.0));
            v.charging.push(m.add_binary(format!("chon_{}_{h}", b.id), 0.0));
            v.discharging.push(m.add_binary(format!("dison_{}_{h}", b.id), 0.0));
        }
        shed.push(m.add_var(format!("shed_sys_{h}"), 0.0, f64::INFINITY, params.voll));
        gate.push(m.add_binary(format!("ls_sys_{h}"), 0.0));
    }

    for k in 0..hours {
        let h = h0 + k;
        let d = demand[k];

        // Nodal injections as (bus index, var, coefficient).
        let mut inj: Vec<(usize, VarId, f64)> = Vec::new();
        for (i, g) in system.thermal.iter().enumerate() {
            let n = bus_of[&g.bus];
            inj.extend(thermal[i].blocks[k].iter().map(|&v| (n, v, 1.0)));
        }
        for (j, s) in system.solar.iter().enumerate() {
            inj.push((bus_of[&s.bus], solar[j].output[k], 1.0));
        }
        for (j, w) in system.wind.iter().enumerate() {
            inj.push((bus_of[&w.bus], wind[j].output[k], 1.0));
        }
        for (j, b) in system.storage.iter().enumerate() {
            let n = bus_of[&b.bus];
            inj.push((n, storage[j].discharge[k], 1.0));
            inj.push((n, storage[j].charge[k], -1.0));
        }

        let mut balance: Vec<(VarId, f64)> = inj.iter().map(|&(_, v, c)| (v, c)).collect();
        balance.push((shed[k], 1.0));
        m.add_constraint(format!("bal_sys_{h}"), balance, Sense::Eq, d);
        m.add_constraint(
            format!("lsgate_sys_{h}"),
            [(shed[k], 1.0), (gate[k], -d)],
            Sense::Le,
            0.0,
        );

        for (l, line) in system.lines.iter().enumerate() {
            let mut terms: Vec<(VarId, f64)> = inj
                .iter()
                .map(|&(n, v, c)| (v, ptdf.factor(l, n) * c))
                .collect();
            // Shed at bus n is ω_n·LS_sys, a positive injection.
            let shed_coef: f64 = (0..weights.len()).map(|n| ptdf.factor(l, n) * weights[n]).sum();
            terms.push((shed[k], shed_coef));
            let load_flow = shed_coef * d;
            let rating = inputs.line_rating[l][k];
            m.add_constraint(format!("flowmax_{}_{h}", line.id), terms.clone(), Sense::Le, rating + load_flow);
            m.add_constraint(format!("flowmin_{}_{h}", line.id), terms, Sense::Ge, -rating + load_flow);
        }

        for (i, g) in system.thermal.iter().enumerate() {
            let v = &thermal[i];
            let total: Vec<(VarId, f64)> = v.blocks[k].iter().map(|&b| (b, 1.0)).collect();
            let avail = inputs.thermal_avail[i][k];
            let mut upper = total.clone();
            upper.push((v.u[k], -avail));
            m.add_constraint(format!("tmax_{}_{h}", g.id), upper, Sense::Le, 0.0);
            if g.g_min > 0.0 {
                let mut lower = total;
                lower.push((v.u[k], -g.g_min));
                m.add_constraint(format!("tmin_{}_{h}", g.id), lower, Sense::Ge, 0.0);
            }

            let mut trans = vec![(v.u[k], 1.0), (v.su[k], -1.0), (v.sd[k], 1.0)];
            let mut rhs = 0.0;
            if k == 0 {
                rhs = f64::from(u8::from(window.initial.last_on(i)));
            } else {
                trans.push((v.u[k - 1], -1.0));
            }
            m.add_constraint(format!("trans_{}_{h}", g.id), trans, Sense::Eq, rhs);
            m.add_constraint(format!("trex_{}_{h}", g.id), [(v.su[k], 1.0), (v.sd[k], 1.0)], Sense::Le, 1.0);

            let ut = g.min_up as usize;
            if ut > 1 {
                let (terms, past) = window_sum(&v.su, k, ut, |back| window.initial.history_transition(i, back, true));
                let mut terms = terms;
                terms.push((v.u[k], -1.0));
                m.add_constraint(format!("minup_{}_{h}", g.id), terms, Sense::Le, -past);
            }
            let dt = g.min_down as usize;
            if dt > 1 {
                let (terms, past) = window_sum(&v.sd, k, dt, |back| window.initial.history_transition(i, back, false));
                let mut terms = terms;
                terms.push((v.u[k], 1.0));
                m.add_constraint(format!("mindn_{}_{h}", g.id), terms, Sense::Le, 1.0 - past);
            }
        }

        for (j, s) in system.solar.iter().enumerate() {
            m.add_constraint(
                format!("savail_{}_{h}", s.id),
                [(solar[j].output[k], 1.0), (solar[j].curtailment[k], 1.0)],
                Sense::Eq,
                inputs.pv_max[j][k],
            );
        }
        for (j, w) in system.wind.iter().enumerate() {
            m.add_constraint(
                format!("wavail_{}_{h}", w.id),
                [(wind[j].output[k], 1.0), (wind[j].curtailment[k], 1.0)],
                Sense::Eq,
                inputs.wind_max[j][k],
            );
        }

        for (j, b) in system.storage.iter().enumerate() {
            let v = &storage[j];
            m.add_constraint(
                format!("chlim_{}_{h}", b.id),
                [(v.charge[k], 1.0), (v.charging[k], -b.charge_max)],
                Sense::Le,
                0.0,
            );
            m.add_constraint(
                format!("dislim_{}_{h}", b.id),
                [(v.discharge[k], 1.0), (v.discharging[k], -b.discharge_max)],
                Sense::Le,
                0.0,
            );
            m.add_constraint(
                format!("excl_{}_{h}", b.id),
                [(v.charging[k], 1.0), (v.discharging[k], 1.0)],
                Sense::Le,
                1.0,
            );
            let mut dyn_terms = vec![
                (v.soc[k], b.energy_mwh),
                (v.charge[k], -b.eta_charge),
                (v.discharge[k], 1.0 / b.eta_discharge),
            ];
            let mut rhs = 0.0;
            if k == 0 {
                rhs = b.energy_mwh * window.initial.soc[j];
            } else {
                dyn_terms.push((v.soc[k - 1], -b.energy_mwh));
            }
            m.add_constraint(format!("socdyn_{}_{h}", b.id), dyn_terms, Sense::Eq, rhs);
        }
    }

    Ok(UcModel {
        model: m,
        first_hour: h0,
        demand,
        thermal,
        solar,
        wind,
        storage,
        shed,
        gate,
    })
}

/// Terms for `Σ_{τ=t−span+1}^{t} x_τ` split into in-window variables and the
/// count of transitions already in the history.
fn window_sum(
    vars: &[VarId],
    k: usize,
    span: usize,
    history: impl Fn(usize) -> bool,
) -> (Vec<(VarId, f64)>, f64) {
    let first = k as isize - span as isize + 1;
    let mut terms = Vec::new();
    let mut past = 0.0;
    for tau in first..=k as isize {
        if tau >= 0 {
            terms.push((vars[tau as usize], 1.0));
        } else if history((-tau) as usize) {
            past += 1.0;
        }
    }
    (terms, past)
}

impl UcModel {
    /// Turns solver values into schedules. Binaries are rounded; startups and
    /// shutdowns are recomputed from the commitment path.
    pub fn extract(
        &self,
        system: &PowerSystem,
        ptdf: &PtdfMatrix,
        window: &UcWindow,
        solution: &MilpSolution,
    ) -> UcSolution {
        let x = |v: VarId| solution.values[v.0];
        let pos = |v: VarId| solution.values[v.0].max(0.0);
        let bit = |v: VarId| solution.values[v.0] > 0.5;
        let hours = self.demand.len();

        let thermal: Vec<ThermalSchedule> = system
            .thermal
            .iter()
            .zip(&self.thermal)
            .enumerate()
            .map(|(i, (g, v))| {
                let on: Vec<bool> = v.u.iter().map(|&u| bit(u)).collect();
                let mut prev = window.initial.last_on(i);
                let mut startup = Vec::with_capacity(hours);
                let mut shutdown = Vec::with_capacity(hours);
                for &o in &on {
                    startup.push(o && !prev);
                    shutdown.push(!o && prev);
                    prev = o;
                }
                ThermalSchedule {
                    id: g.id.clone(),
                    output: v.blocks.iter().map(|b| b.iter().map(|&bv| pos(bv)).sum()).collect(),
                    on,
                    startup,
                    shutdown,
                }
            })
            .collect();
        let res = |ids: Vec<String>, vars: &[RenewableVars]| -> Vec<RenewableSchedule> {
            ids.into_iter()
                .zip(vars)
                .map(|(id, v)| RenewableSchedule {
                    id,
                    output: v.output.iter().map(|&o| pos(o)).collect(),
                    curtailment: v.curtailment.iter().map(|&c| pos(c)).collect(),
                })
                .collect()
        };
        let solar = res(system.solar.iter().map(|s| s.id.clone()).collect(), &self.solar);
        let wind = res(system.wind.iter().map(|w| w.id.clone()).collect(), &self.wind);
        let storage: Vec<StorageSchedule> = system
            .storage
            .iter()
            .zip(&self.storage)
            .map(|(b, v)| StorageSchedule {
                id: b.id.clone(),
                charge: v.charge.iter().map(|&c| pos(c)).collect(),
                discharge: v.discharge.iter().map(|&d| pos(d)).collect(),
                soc: v.soc.iter().map(|&s| x(s)).collect(),
                charging: v.charging.iter().map(|&c| bit(c)).collect(),
                discharging: v.discharging.iter().map(|&d| bit(d)).collect(),
            })
            .collect();
        let shed_system: Vec<f64> = self.shed.iter().map(|&s| pos(s)).collect();
        let shed_flag: Vec<bool> = self.gate.iter().map(|&g| bit(g)).collect();
        let weights = system.weights();
        let shed_nodal = weights
            .iter()
            .map(|w| shed_system.iter().map(|s| w * s).collect())
            .collect();

        let mut sol = UcSolution {
            first_hour: self.first_hour,
            demand: self.demand.clone(),
            thermal,
            solar,
            wind,
            storage,
            shed_system,
            shed_nodal,
            shed_flag,
            flows: Vec::new(),
            objective: solution.objective,
            status: solution.status,
            gap: solution.gap,
        };
        sol.flows = line_flows(system, ptdf, &sol);
        sol
    }
}

/// Net injection at every bus for hour `k` of `sol`.
pub(crate) fn injections(system: &PowerSystem, sol: &UcSolution, k: usize) -> Vec<f64> {
    let bus_of = system.bus_index();
    let mut inj: Vec<f64> = system
        .weights()
        .iter()
        .map(|w| -w * (sol.demand[k] - sol.shed_system[k]))
        .collect();
    for (g, s) in system.thermal.iter().zip(&sol.thermal) {
        inj[bus_of[&g.bus]] += s.output[k];
    }
    for (f, s) in system.solar.iter().zip(&sol.solar) {
        inj[bus_of[&f.bus]] += s.output[k];
    }
    for (f, s) in system.wind.iter().zip(&sol.wind) {
        inj[bus_of[&f.bus]] += s.output[k];
    }
    for (b, s) in system.storage.iter().zip(&sol.storage) {
        inj[bus_of[&b.bus]] += s.discharge[k] - s.charge[k];
    }
    inj
}

pub(crate) fn line_flows(system: &PowerSystem, ptdf: &PtdfMatrix, sol: &UcSolution) -> Vec<Vec<f64>> {
    let mut flows = vec![Vec::with_capacity(sol.hours()); system.lines.len()];
    for k in 0..sol.hours() {
        for (l, f) in ptdf.flows(&injections(system, sol, k)).into_iter().enumerate() {
            flows[l].push(f);
        }
    }
    flows
}
