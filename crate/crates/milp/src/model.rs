//! Solver-independent representation of a mixed-integer linear program.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Index of a variable inside a [`MilpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    /// Objective coefficient (the model always minimizes).
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violates this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    /// Magnitude used to scale feasibility tolerances for this row.
    pub fn scale(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(v, c)| (c * values[v.0]).abs())
            .fold(self.rhs.abs().max(1.0), f64::max)
    }

    /// Family prefix of the row name, i.e. everything before the first `_`.
    pub fn family(&self) -> &str {
        family_of(&self.name)
    }
}

pub(crate) fn family_of(name: &str) -> &str {
    name.split('_').next().unwrap_or(name)
}

/// A minimization MILP with named variables and rows.
///
/// Names follow the `{family}_{entity}_{index}` convention; the family prefix
/// drives branching priorities and infeasibility hints.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective_offset: f64,
    /// Branching priority per variable family; lower values branch first.
    /// Families not listed get priority `u8::MAX`.
    pub branch_priority: BTreeMap<String, u8>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.push_var(Variable {
            name: name.into(),
            lower,
            upper,
            kind: VarKind::Continuous,
            cost,
        })
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        self.push_var(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            kind: VarKind::Binary,
            cost,
        })
    }

    fn push_var(&mut self, var: Variable) -> VarId {
        self.vars.push(var);
        VarId(self.vars.len() - 1)
    }

    /// Adds a row. Terms with a zero coefficient are dropped and repeated
    /// variables are merged.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, c) in terms {
            if c == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some((_, acc)) => *acc += c,
                None => merged.push((v, c)),
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        self.constraints.push(Constraint {
            name: name.into(),
            terms: merged,
            sense,
            rhs,
        });
    }

    pub fn set_priority(&mut self, family: impl Into<String>, priority: u8) {
        self.branch_priority.insert(family.into(), priority);
    }

    pub fn priority_of(&self, var: VarId) -> u8 {
        self.branch_priority
            .get(family_of(&self.vars[var.0].name))
            .copied()
            .unwrap_or(u8::MAX)
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarId(i))
    }

    pub fn var_index(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_offset
            + self
                .vars
                .iter()
                .zip(values)
                .map(|(v, x)| v.cost * x)
                .sum::<f64>()
    }

    /// Checks structural invariants: references, bounds and name uniqueness.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut names = HashSet::with_capacity(self.vars.len());
        for v in &self.vars {
            if !names.insert(v.name.as_str()) {
                return Err(ModelError::DuplicateName(v.name.clone()));
            }
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(ModelError::BadBounds(v.name.clone()));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ModelError::BadBounds(v.name.clone()));
            }
            if !v.cost.is_finite() {
                return Err(ModelError::NonFinite(v.name.clone()));
            }
        }
        let mut rows = HashSet::with_capacity(self.constraints.len());
        for c in &self.constraints {
            if !rows.insert(c.name.as_str()) {
                return Err(ModelError::DuplicateName(c.name.clone()));
            }
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite(c.name.clone()));
            }
            for (v, coef) in &c.terms {
                if v.0 >= self.vars.len() {
                    return Err(ModelError::UnknownVariable {
                        row: c.name.clone(),
                        index: v.0,
                    });
                }
                if !coef.is_finite() {
                    return Err(ModelError::NonFinite(c.name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Largest scaled violation of any row or bound, together with the name of
    /// the offending row or variable.
    pub fn max_violation(&self, values: &[f64]) -> (f64, Option<String>) {
        let mut worst = (0.0, None);
        for c in &self.constraints {
            let v = c.violation(values) / c.scale(values);
            if v > worst.0 {
                worst = (v, Some(c.name.clone()));
            }
        }
        for (var, x) in self.vars.iter().zip(values) {
            let v = (var.lower - x).max(x - var.upper).max(0.0) / x.abs().max(1.0);
            if v > worst.0 {
                worst = (v, Some(var.name.clone()));
            }
        }
        worst
    }
}

impl fmt::Display for MilpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} vars ({} binary), {} rows",
            self.name,
            self.vars.len(),
            self.num_binaries(),
            self.constraints.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_constraint_merges_duplicates() {
        let mut m = MilpModel::new("t");
        let x = m.add_var("x_a_1", 0.0, 1.0, 1.0);
        let y = m.add_var("y_a_1", 0.0, 1.0, 1.0);
        m.add_constraint("c_a_1", [(x, 1.0), (y, 2.0), (x, -1.0)], Sense::Le, 1.0);
        assert_eq!(m.constraints[0].terms, vec![(y, 2.0)]);
    }

    #[test]
    fn validate_rejects_duplicate_names() {
        let mut m = MilpModel::new("t");
        m.add_var("x", 0.0, 1.0, 0.0);
        m.add_var("x", 0.0, 1.0, 0.0);
        assert!(matches!(m.validate(), Err(ModelError::DuplicateName(_))));
    }

    #[test]
    fn validate_rejects_dangling_reference() {
        let mut m = MilpModel::new("t");
        m.add_var("x", 0.0, 1.0, 0.0);
        m.constraints.push(Constraint {
            name: "c".into(),
            terms: vec![(VarId(3), 1.0)],
            sense: Sense::Le,
            rhs: 0.0,
        });
        assert!(matches!(m.validate(), Err(ModelError::UnknownVariable { .. })));
    }

    #[test]
    fn family_is_name_prefix() {
        let mut m = MilpModel::new("t");
        let u = m.add_binary("u_G1_4", 0.0);
        m.set_priority("u", 0);
        assert_eq!(m.priority_of(u), 0);
        let x = m.add_var("gen_G1_4", 0.0, 1.0, 0.0);
        assert_eq!(m.priority_of(x), u8::MAX);
    }
}
