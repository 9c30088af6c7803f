//! Longitudinal panel data: `n` units observed over `tau` timepoints, with
//! variables ordered `L_t ≺ A_t ≺ Z_t ≺ M_t ≺ L_{t+1}` and the outcome last.
//!
//! Censoring follows a status channel. A unit whose status at `t` is
//! `Censored` had `L_t` and `A_t` recorded, then left follow-up: `Z_t`, `M_t`
//! and everything later are unobserved. `Deceased` units stay in the risk
//! set; their later values are carried forward and a derived `deceased`
//! indicator enters the covariates from the next timepoint on.

mod builder;
mod design;
mod folds;
mod history;
mod paths;

pub use builder::{PanelBuilder, RawColumn};
pub use design::Design;
pub use folds::{assign_folds, FoldAssignment, Splitting};
pub use history::{history, HistoryEntry, HistoryView};
pub use paths::{enumerate_mediator_paths, MediatorPath, PathMode, DEFAULT_PATH_CAP};

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleKind {
    BaselineCovariate,
    TimeCovariate,
    Treatment,
    /// Right-after-treatment censoring node; carries no column of its own.
    CensorIndicator,
    IntermediateConfounder,
    Mediator,
    Outcome,
}

impl RoleKind {
    fn rank(self) -> u8 {
        match self {
            RoleKind::BaselineCovariate | RoleKind::TimeCovariate | RoleKind::Outcome => 0,
            RoleKind::Treatment => 1,
            RoleKind::CensorIndicator => 2,
            RoleKind::IntermediateConfounder => 3,
            RoleKind::Mediator => 4,
        }
    }
}

/// A role at a time. The outcome sits at `tau + 1`; baseline covariates at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VariableRole {
    pub kind: RoleKind,
    pub time: usize,
}

impl VariableRole {
    pub fn new(kind: RoleKind, time: usize) -> Self {
        VariableRole { kind, time }
    }

    pub fn position(&self) -> Position {
        Position { time: self.time, rank: self.kind.rank() }
    }
}

/// Place of a variable in the global time ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub time: usize,
    pub rank: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColumnKey {
    pub role: VariableRole,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub key: ColumnKey,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Censored,
    Deceased,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Active => "active",
            Status::Censored => "censored",
            Status::Deceased => "deceased",
        }
    }
}

/// Immutable panel. Columns are kept in global order.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    n: usize,
    tau: usize,
    columns: Vec<Column>,
    treatment_support: Vec<Vec<f64>>,
    mediator_support: Vec<Vec<f64>>,
    status: Vec<Status>,
    weights: Option<Vec<f64>>,
    treatment_idx: Vec<usize>,
    mediator_idx: Vec<usize>,
    outcome_idx: usize,
}

impl PanelDataset {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.key.name == name)
    }

    /// Observed (or carried-forward) treatment values at `t` (1-based).
    pub fn treatment(&self, t: usize) -> &[f64] {
        &self.columns[self.treatment_idx[t - 1]].values
    }

    pub fn mediator(&self, t: usize) -> &[f64] {
        &self.columns[self.mediator_idx[t - 1]].values
    }

    pub fn outcome(&self) -> &[f64] {
        &self.columns[self.outcome_idx].values
    }

    /// Global column index of `A_t`.
    pub fn treatment_index(&self, t: usize) -> usize {
        self.treatment_idx[t - 1]
    }

    pub fn mediator_index(&self, t: usize) -> usize {
        self.mediator_idx[t - 1]
    }

    pub fn treatment_column(&self, t: usize) -> &Column {
        &self.columns[self.treatment_idx[t - 1]]
    }

    pub fn mediator_column(&self, t: usize) -> &Column {
        &self.columns[self.mediator_idx[t - 1]]
    }

    pub fn outcome_column(&self) -> &Column {
        &self.columns[self.outcome_idx]
    }

    pub fn treatment_support(&self, t: usize) -> &[f64] {
        &self.treatment_support[t - 1]
    }

    pub fn mediator_support(&self, t: usize) -> &[f64] {
        &self.mediator_support[t - 1]
    }

    pub fn status(&self, unit: usize, t: usize) -> Status {
        self.status[unit * self.tau + t - 1]
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// `Z_t`, `M_t` and the next timepoint's `L`, `A` are observed.
    pub fn observed_through(&self, unit: usize, t: usize) -> bool {
        self.status(unit, t) != Status::Censored
    }

    /// `L_t` and `A_t` are observed (the unit was not censored before `t`).
    pub fn at_risk(&self, unit: usize, t: usize) -> bool {
        t == 1 || self.observed_through(unit, t - 1)
    }

    pub fn outcome_observed(&self, unit: usize) -> bool {
        self.observed_through(unit, self.tau)
    }

    pub fn any_censored(&self) -> bool {
        self.status.contains(&Status::Censored)
    }

    /// Columns whose position precedes `pos`, in global order.
    pub fn columns_before(&self, pos: Position) -> impl Iterator<Item = (usize, &Column)> {
        self.columns
            .iter()
            .enumerate()
            .take_while(move |(_, c)| c.key.role.position() < pos)
    }

    /// Baseline covariates (time 1, covariate roles).
    pub fn baseline_columns(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.key.role.kind == RoleKind::BaselineCovariate)
    }

    /// Copy of this dataset with the outcome replaced.
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Self {
        assert_eq!(outcome.len(), self.n);
        let mut out = self.clone();
        out.columns[self.outcome_idx].values = outcome;
        out
    }

    /// Copy of this dataset carrying unit weights (e.g. population
    /// probabilities for an enumerated distribution).
    pub fn with_weights(&self, weights: Vec<f64>) -> crate::Result<Self> {
        if weights.len() != self.n || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(crate::Error::Data("weights must be finite, nonnegative, one per unit".into()));
        }
        let mut out = self.clone();
        out.weights = Some(weights);
        Ok(out)
    }
}
