use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{Column, ColumnKey, PanelDataset, RoleKind, Status, VariableRole};
use crate::{Error, Result};

/// A column as read from the source: `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub key: ColumnKey,
    pub values: Vec<Option<f64>>,
}

/// Assembles a [`PanelDataset`], applying the missing-data conventions:
///
/// * baseline covariates: mean substitution plus a `<name>_missing`
///   indicator column;
/// * time-varying variables: last observation carried forward along the
///   series (the i-th column of a role at `t` continues the i-th column of
///   the same role at `t - 1`);
/// * statuses are absorbing: the first non-active marker is carried to the
///   end of follow-up.
#[derive(Debug, Clone, Default)]
pub struct PanelBuilder {
    tau: usize,
    columns: Vec<RawColumn>,
    mediator_support: Vec<Vec<f64>>,
    treatment_support: Vec<Vec<f64>>,
    status: Option<Vec<Vec<Status>>>,
    weights: Option<Vec<f64>>,
}

impl PanelBuilder {
    pub fn new(tau: usize) -> Self {
        PanelBuilder { tau, ..Default::default() }
    }

    pub fn column(mut self, kind: RoleKind, time: usize, name: &str, values: Vec<Option<f64>>) -> Self {
        self.columns.push(RawColumn {
            key: ColumnKey { role: VariableRole::new(kind, time), name: name.to_string() },
            values,
        });
        self
    }

    /// Fully observed column.
    pub fn observed(self, kind: RoleKind, time: usize, name: &str, values: &[f64]) -> Self {
        self.column(kind, time, name, values.iter().map(|v| Some(*v)).collect())
    }

    pub fn raw_column(mut self, column: RawColumn) -> Self {
        self.columns.push(column);
        self
    }

    /// Same mediator support at every timepoint.
    pub fn mediator_support(mut self, support: &[f64]) -> Self {
        self.mediator_support = vec![support.to_vec(); self.tau];
        self
    }

    pub fn mediator_support_per_time(mut self, support: Vec<Vec<f64>>) -> Self {
        self.mediator_support = support;
        self
    }

    /// Declared treatment support (same at every timepoint). When omitted the
    /// support is the set of observed values.
    pub fn treatment_support(mut self, support: &[f64]) -> Self {
        self.treatment_support = vec![support.to_vec(); self.tau];
        self
    }

    /// Per-unit, per-time statuses (`status[unit][t - 1]`).
    pub fn status(mut self, status: Vec<Vec<Status>>) -> Self {
        self.status = Some(status);
        self
    }

    pub fn weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn build(self) -> Result<PanelDataset> {
        let tau = self.tau;
        if tau == 0 {
            return Err(Error::Schema("tau must be at least 1".into()));
        }
        let n = self.columns.first().map_or(0, |c| c.values.len());
        if n == 0 {
            return Err(Error::EmptyData);
        }
        if let Some(c) = self.columns.iter().find(|c| c.values.len() != n) {
            return Err(Error::Data(format!(
                "ragged unit records: column '{}' has {} rows, expected {n}",
                c.key.name,
                c.values.len()
            )));
        }
        validate_roles(&self.columns, tau)?;

        let status = absorbing_status(self.status, n, tau)?;
        let status_at = |unit: usize, t: usize| status[unit * tau + t - 1];
        let observed_through = |unit: usize, t: usize| status_at(unit, t) != Status::Censored;
        let in_observed_period = |role: VariableRole, unit: usize| -> bool {
            match role.kind {
                RoleKind::BaselineCovariate => true,
                RoleKind::TimeCovariate | RoleKind::Treatment | RoleKind::CensorIndicator => {
                    role.time == 1 || observed_through(unit, role.time - 1)
                }
                RoleKind::IntermediateConfounder | RoleKind::Mediator => observed_through(unit, role.time),
                RoleKind::Outcome => observed_through(unit, tau),
            }
        };

        let mediator_support = normalize_supports(self.mediator_support, tau, "mediator")?;
        let treatment_support = if self.treatment_support.is_empty() {
            infer_treatment_support(&self.columns, tau)?
        } else {
            normalize_supports(self.treatment_support, tau, "treatment")?
        };

        // Series index of each column within its (kind, time) group.
        let mut series_of = Vec::with_capacity(self.columns.len());
        for (i, c) in self.columns.iter().enumerate() {
            let idx = self.columns[..i].iter().filter(|o| o.key.role == c.key.role).count();
            series_of.push(idx);
        }

        let mut filled: Vec<Column> = Vec::with_capacity(self.columns.len() + 4);
        // Process in time order so carried-forward values are already filled.
        let mut order: Vec<usize> = (0..self.columns.len()).collect();
        order.sort_by_key(|&i| self.columns[i].key.role.position());
        let mut done: Vec<Option<Vec<f64>>> = vec![None; self.columns.len()];
        let mut indicators: Vec<(usize, Column)> = Vec::new();

        for &ci in &order {
            let raw = &self.columns[ci];
            let role = raw.key.role;
            let observed: Vec<f64> = raw.values.iter().flatten().copied().collect();
            if observed.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("column '{}' has non-finite values", raw.key.name)));
            }
            let values = match role.kind {
                RoleKind::BaselineCovariate => {
                    if observed.is_empty() {
                        return Err(Error::Data(format!("baseline column '{}' is entirely missing", raw.key.name)));
                    }
                    let fill = observed.iter().sum::<f64>() / observed.len() as f64;
                    if observed.len() < n {
                        let flag = raw.values.iter().map(|v| if v.is_none() { 1.0 } else { 0.0 }).collect();
                        indicators.push((
                            ci,
                            Column {
                                key: ColumnKey { role, name: format!("{}_missing", raw.key.name) },
                                values: flag,
                            },
                        ));
                    }
                    raw.values.iter().map(|v| v.unwrap_or(fill)).collect()
                }
                RoleKind::Outcome => {
                    let mut out = Vec::with_capacity(n);
                    for (u, v) in raw.values.iter().enumerate() {
                        match v {
                            Some(x) => out.push(*x),
                            None if in_observed_period(role, u) => {
                                return Err(Error::Data(format!("outcome missing for uncensored unit {u}")))
                            }
                            None => out.push(0.0),
                        }
                    }
                    out
                }
                _ => {
                    let prev = (1..role.time).next_back().and_then(|pt| {
                        let prev_role = VariableRole::new(role.kind, pt);
                        (0..self.columns.len())
                            .find(|&j| self.columns[j].key.role == prev_role && series_of[j] == series_of[ci])
                    });
                    let prev_vals = prev.and_then(|j| done[j].as_ref());
                    let col_mean = if observed.is_empty() {
                        None
                    } else {
                        Some(observed.iter().sum::<f64>() / observed.len() as f64)
                    };
                    let categorical = matches!(role.kind, RoleKind::Treatment | RoleKind::Mediator);
                    let mut out = Vec::with_capacity(n);
                    for (u, v) in raw.values.iter().enumerate() {
                        let x = match (v, prev_vals) {
                            (Some(x), _) => *x,
                            (None, Some(p)) => p[u],
                            (None, None) if !in_observed_period(role, u) => {
                                if categorical {
                                    support_for(role, &treatment_support, &mediator_support)[0]
                                } else {
                                    col_mean.unwrap_or(0.0)
                                }
                            }
                            (None, None) => {
                                if categorical || col_mean.is_none() {
                                    return Err(Error::Data(format!(
                                        "column '{}' missing for unit {u} with no earlier observation to carry forward",
                                        raw.key.name
                                    )));
                                }
                                col_mean.unwrap_or(0.0)
                            }
                        };
                        out.push(x);
                    }
                    if categorical {
                        let support = support_for(role, &treatment_support, &mediator_support);
                        for (u, x) in out.iter().enumerate() {
                            if in_observed_period(role, u) && !support.contains(x) {
                                return Err(Error::Data(format!(
                                    "column '{}' unit {u}: value {x} outside declared support",
                                    raw.key.name
                                )));
                            }
                        }
                    }
                    out
                }
            };
            done[ci] = Some(values);
        }

        for (ci, raw) in self.columns.into_iter().enumerate() {
            filled.push(Column { key: raw.key, values: done[ci].take().unwrap_or_default() });
            for (_, ind) in indicators.iter().filter(|(p, _)| *p == ci) {
                filled.push(ind.clone());
            }
        }

        if status.contains(&Status::Deceased) {
            for t in 2..=tau {
                let name = format!("deceased_{t}");
                if filled.iter().any(|c| c.key.name == name) {
                    return Err(Error::Schema(format!("column name '{name}' is reserved")));
                }
                let values = (0..n)
                    .map(|u| if status_at(u, t - 1) == Status::Deceased { 1.0 } else { 0.0 })
                    .collect();
                filled.push(Column {
                    key: ColumnKey { role: VariableRole::new(RoleKind::TimeCovariate, t), name },
                    values,
                });
            }
        }

        // Stable: declaration order survives within a (role, time) group.
        filled.sort_by_key(|c| c.key.role.position());

        if let Some(w) = &self.weights {
            if w.len() != n || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::Data("weights must be finite, nonnegative, one per unit".into()));
            }
        }

        let find = |kind: RoleKind, time: usize| {
            filled.iter().position(|c| c.key.role == VariableRole::new(kind, time)).unwrap()
        };
        let treatment_idx = (1..=tau).map(|t| find(RoleKind::Treatment, t)).collect();
        let mediator_idx = (1..=tau).map(|t| find(RoleKind::Mediator, t)).collect();
        let outcome_idx = find(RoleKind::Outcome, tau + 1);

        Ok(PanelDataset {
            n,
            tau,
            columns: filled,
            treatment_support,
            mediator_support,
            status,
            weights: self.weights,
            treatment_idx,
            mediator_idx,
            outcome_idx,
        })
    }
}

fn support_for<'a>(role: VariableRole, treatment: &'a [Vec<f64>], mediator: &'a [Vec<f64>]) -> &'a [f64] {
    match role.kind {
        RoleKind::Treatment => &treatment[role.time - 1],
        _ => &mediator[role.time - 1],
    }
}

fn validate_roles(columns: &[RawColumn], tau: usize) -> Result<()> {
    let mut keys = BTreeSet::new();
    let mut names = BTreeSet::new();
    for c in columns {
        if !keys.insert(c.key.clone()) || !names.insert(c.key.name.clone()) {
            return Err(Error::Schema(format!("duplicate column '{}'", c.key.name)));
        }
        let t = c.key.role.time;
        let ok = match c.key.role.kind {
            RoleKind::BaselineCovariate => t == 1,
            RoleKind::TimeCovariate => (2..=tau).contains(&t),
            RoleKind::Treatment | RoleKind::IntermediateConfounder | RoleKind::Mediator => (1..=tau).contains(&t),
            RoleKind::Outcome => t == tau + 1,
            RoleKind::CensorIndicator => {
                return Err(Error::Schema(format!(
                    "column '{}': censoring is supplied through the status channel",
                    c.key.name
                )))
            }
        };
        if !ok {
            return Err(Error::Schema(format!(
                "column '{}': role {:?} cannot occur at time {t} with tau = {tau}",
                c.key.name, c.key.role.kind
            )));
        }
    }
    for kind in [RoleKind::Treatment, RoleKind::Mediator] {
        for t in 1..=tau {
            let count = columns.iter().filter(|c| c.key.role == VariableRole::new(kind, t)).count();
            if count != 1 {
                return Err(Error::Schema(format!(
                    "time gap: expected exactly one {kind:?} column at time {t}, found {count}"
                )));
            }
        }
    }
    let outcomes = columns.iter().filter(|c| c.key.role.kind == RoleKind::Outcome).count();
    if outcomes != 1 {
        return Err(Error::Schema(format!("expected exactly one outcome column, found {outcomes}")));
    }
    Ok(())
}

fn normalize_supports(supports: Vec<Vec<f64>>, tau: usize, what: &str) -> Result<Vec<Vec<f64>>> {
    if supports.len() != tau {
        return Err(Error::Schema(format!("{what} support must be declared for all {tau} timepoints")));
    }
    supports
        .into_iter()
        .map(|mut s| {
            if s.is_empty() || s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("{what} support must be a non-empty set of finite values")));
            }
            s.sort_by(|a, b| a.total_cmp(b));
            s.dedup();
            Ok(s)
        })
        .collect()
}

fn infer_treatment_support(columns: &[RawColumn], tau: usize) -> Result<Vec<Vec<f64>>> {
    let per_time = (1..=tau)
        .map(|t| {
            let col = columns
                .iter()
                .find(|c| c.key.role == VariableRole::new(RoleKind::Treatment, t))
                .expect("validated");
            col.values.iter().flatten().copied().collect::<Vec<f64>>()
        })
        .collect();
    normalize_supports(per_time, tau, "treatment")
}

fn absorbing_status(status: Option<Vec<Vec<Status>>>, n: usize, tau: usize) -> Result<Vec<Status>> {
    let Some(rows) = status else {
        return Ok(vec![Status::Active; n * tau]);
    };
    if rows.len() != n || rows.iter().any(|r| r.len() != tau) {
        return Err(Error::Data(String::from("status channel must hold one marker per unit and timepoint")));
    }
    let mut out = Vec::with_capacity(n * tau);
    for row in rows {
        let mut current = Status::Active;
        for s in row {
            if current == Status::Active {
                current = s;
            }
            out.push(current);
        }
    }
    Ok(out)
}
