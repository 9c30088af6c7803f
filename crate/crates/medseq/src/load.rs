//! Wide-format CSV panels described by a schema document.

use std::collections::BTreeSet;
use std::io::Read;

use medseq_core::panel::{PanelBuilder, PanelDataset, RoleKind, Status};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// One support for every timepoint, or one per timepoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Support {
    Shared(Vec<f64>),
    PerTime(Vec<Vec<f64>>),
}

impl Support {
    fn per_time(&self, tau: usize) -> Vec<Vec<f64>> {
        match self {
            Support::Shared(s) => vec![s.clone(); tau],
            Support::PerTime(s) => s.clone(),
        }
    }
}

/// Column names per role. `L[0]` holds baseline covariates, `L[t - 1]` the
/// covariates measured at the start of period `t`; `Z[t - 1]` the
/// intermediate confounders of period `t`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct NodeColumns {
    #[serde(default)]
    pub L: Vec<Vec<String>>,
    pub A: Vec<String>,
    #[serde(default)]
    pub Z: Vec<Vec<String>>,
    pub M: Vec<String>,
    pub Y: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub tau: usize,
    pub nodes: NodeColumns,
    pub mediator_support: Support,
    /// Inferred from the data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treatment_support: Option<Support>,
    /// Status columns, one per timepoint, holding `active`, `censored` or
    /// `deceased`. Defaults to `status_1 … status_tau` when all are present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censor_columns: Option<Vec<String>>,
    /// Column of nonnegative observation weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    /// Columns present in the file but not used.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ignore: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<char>,
}

impl Schema {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("schema: {e}")))
    }

    fn validate(&self) -> CliResult<()> {
        let tau = self.tau;
        if tau == 0 {
            return Err(CliError::Config("schema: tau must be at least 1".into()));
        }
        let n = &self.nodes;
        for (what, len) in [("A", n.A.len()), ("M", n.M.len())] {
            if len != tau {
                return Err(CliError::Config(format!(
                    "schema: time gap in nodes.{what}: {len} column(s) declared for tau = {tau}"
                )));
            }
        }
        if n.L.len() > tau || n.Z.len() > tau {
            return Err(CliError::Config(format!("schema: nodes.L and nodes.Z may list at most {tau} timepoints")));
        }
        let supports = self.mediator_support.per_time(tau);
        if supports.len() != tau {
            return Err(CliError::Config(format!("schema: mediator_support must cover {tau} timepoints")));
        }
        if supports.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CliError::Config("schema: mediator support values must be finite".into()));
        }
        Ok(())
    }

    /// `(kind, time, name)` of every declared variable in schema order.
    fn roles(&self) -> Vec<(RoleKind, usize, String)> {
        let n = &self.nodes;
        let mut out = Vec::new();
        for (i, names) in n.L.iter().enumerate() {
            let kind = if i == 0 { RoleKind::BaselineCovariate } else { RoleKind::TimeCovariate };
            out.extend(names.iter().map(|c| (kind, i + 1, c.clone())));
        }
        for (i, c) in n.A.iter().enumerate() {
            out.push((RoleKind::Treatment, i + 1, c.clone()));
        }
        for (i, names) in n.Z.iter().enumerate() {
            out.extend(names.iter().map(|c| (RoleKind::IntermediateConfounder, i + 1, c.clone())));
        }
        for (i, c) in n.M.iter().enumerate() {
            out.push((RoleKind::Mediator, i + 1, c.clone()));
        }
        out.push((RoleKind::Outcome, self.tau + 1, n.Y.clone()));
        out
    }
}

fn parse_status(text: &str, column: &str, row: usize) -> CliResult<Status> {
    match text.trim() {
        "" | "active" => Ok(Status::Active),
        "censored" => Ok(Status::Censored),
        "deceased" => Ok(Status::Deceased),
        other => Err(CliError::Data(format!("row {row}, column '{column}': unknown status '{other}'"))),
    }
}

/// Reads a panel. Empty cells are missing values; every header must be
/// declared by the schema (as a role, status, weight or ignored column).
pub fn load_panel<R: Read>(source: R, schema: &Schema) -> CliResult<PanelDataset> {
    schema.validate()?;
    let tau = schema.tau;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter.unwrap_or(',') as u8)
        .has_headers(true)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read header row: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let position = |name: &str| headers.iter().position(|h| h == name);

    let roles = schema.roles();
    let default_status: Vec<String> = (1..=tau).map(|t| format!("status_{t}")).collect();
    let status_columns = match &schema.censor_columns {
        Some(cols) if cols.len() != tau => {
            return Err(CliError::Config(format!("schema: censor_columns must list {tau} columns")));
        }
        Some(cols) => Some(cols.clone()),
        None if default_status.iter().all(|c| position(c).is_some()) => Some(default_status),
        None => None,
    };

    let mut known: BTreeSet<&str> = roles.iter().map(|(_, _, n)| n.as_str()).collect();
    known.extend(schema.ignore.iter().map(String::as_str));
    known.extend(status_columns.iter().flatten().map(String::as_str));
    known.extend(schema.weights.iter().map(String::as_str));
    if let Some(h) = headers.iter().find(|h| !known.contains(h.as_str())) {
        return Err(CliError::Config(format!("column '{h}' has no declared role")));
    }
    let role_idx: Vec<usize> = roles
        .iter()
        .map(|(_, _, name)| position(name).ok_or_else(|| CliError::Config(format!("declared column '{name}' is not in the data"))))
        .collect::<CliResult<_>>()?;
    let status_idx: Option<Vec<usize>> = status_columns
        .as_ref()
        .map(|cols| {
            cols.iter()
                .map(|c| position(c).ok_or_else(|| CliError::Config(format!("status column '{c}' is not in the data"))))
                .collect::<CliResult<_>>()
        })
        .transpose()?;
    let weight_idx = schema
        .weights
        .as_ref()
        .map(|w| position(w).ok_or_else(|| CliError::Config(format!("weight column '{w}' is not in the data"))))
        .transpose()?;

    let mut values: Vec<Vec<Option<f64>>> = vec![Vec::new(); roles.len()];
    let mut statuses: Vec<Vec<Status>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 2;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => CliError::Data(format!("ragged unit records at line {row}")),
            _ => CliError::Data(format!("line {row}: {e}")),
        })?;
        for (k, &ci) in role_idx.iter().enumerate() {
            let cell = record[ci].trim();
            let v = if cell.is_empty() {
                None
            } else {
                let parsed: f64 = cell
                    .parse()
                    .map_err(|_| CliError::Data(format!("line {row}, column '{}': '{cell}' is not a number", headers[ci])))?;
                if !parsed.is_finite() {
                    return Err(CliError::Data(format!("line {row}, column '{}': non-finite value", headers[ci])));
                }
                Some(parsed)
            };
            values[k].push(v);
        }
        if let Some(idx) = &status_idx {
            statuses.push(idx.iter().map(|&ci| parse_status(&record[ci], &headers[ci], row)).collect::<CliResult<_>>()?);
        }
        if let Some(ci) = weight_idx {
            let w: f64 = record[ci]
                .trim()
                .parse()
                .map_err(|_| CliError::Data(format!("line {row}: weight '{}' is not a number", &record[ci])))?;
            weights.push(w);
        }
    }

    let mut builder = PanelBuilder::new(tau).mediator_support_per_time(schema.mediator_support.per_time(tau));
    if let Some(s) = &schema.treatment_support {
        let per_time = s.per_time(tau);
        if per_time.windows(2).any(|w| w[0] != w[1]) {
            return Err(CliError::Config("schema: treatment_support must be the same at every timepoint".into()));
        }
        builder = builder.treatment_support(&per_time[0]);
    }
    for ((kind, time, name), column) in roles.iter().zip(values) {
        builder = builder.column(*kind, *time, name, column);
    }
    if status_idx.is_some() {
        builder = builder.status(statuses);
    }
    if weight_idx.is_some() {
        builder = builder.weights(weights);
    }
    Ok(builder.build()?)
}

/// Writes a dataset back to CSV with a matching schema. Derived columns
/// (missingness indicators and `deceased_t` flags) are written as ordinary
/// covariates and recreated only when the source still has gaps.
pub fn write_panel(dataset: &PanelDataset) -> CliResult<(String, Schema)> {
    let tau = dataset.tau();
    let any_deceased = (0..dataset.n()).any(|u| (1..=tau).any(|t| dataset.status(u, t) == Status::Deceased));
    let any_status = (0..dataset.n()).any(|u| (1..=tau).any(|t| dataset.status(u, t) != Status::Active));
    let derived = |name: &str| any_deceased && (2..=tau).any(|t| name == format!("deceased_{t}"));

    let mut nodes = NodeColumns { L: vec![Vec::new(); 1], Z: vec![Vec::new(); tau], ..Default::default() };
    let mut columns = Vec::new();
    for c in dataset.columns() {
        let name = c.key.name.clone();
        if derived(&name) {
            continue;
        }
        let t = c.key.role.time;
        match c.key.role.kind {
            RoleKind::BaselineCovariate | RoleKind::TimeCovariate => {
                if nodes.L.len() < t {
                    nodes.L.resize(t, Vec::new());
                }
                nodes.L[t - 1].push(name);
            }
            RoleKind::Treatment => nodes.A.push(name),
            RoleKind::IntermediateConfounder => nodes.Z[t - 1].push(name),
            RoleKind::Mediator => nodes.M.push(name),
            RoleKind::Outcome => nodes.Y = name,
            RoleKind::CensorIndicator => continue,
        }
        columns.push(c);
    }
    while nodes.Z.last().is_some_and(Vec::is_empty) {
        nodes.Z.pop();
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = columns.iter().map(|c| c.key.name.clone()).collect();
    let status_names: Vec<String> = (1..=tau).map(|t| format!("status_{t}")).collect();
    if any_status {
        header.extend(status_names.iter().cloned());
    }
    if dataset.weights().is_some() {
        header.push("weight".into());
    }
    let write_err = |e: csv::Error| CliError::Data(format!("cannot write panel: {e}"));
    writer.write_record(&header).map_err(write_err)?;
    for u in 0..dataset.n() {
        let mut row: Vec<String> = columns
            .iter()
            .map(|c| {
                let observed = match c.key.role.kind {
                    RoleKind::BaselineCovariate => true,
                    RoleKind::TimeCovariate | RoleKind::Treatment => dataset.at_risk(u, c.key.role.time),
                    RoleKind::Outcome => dataset.outcome_observed(u),
                    _ => dataset.observed_through(u, c.key.role.time),
                };
                if observed {
                    format!("{}", c.values[u])
                } else {
                    String::new()
                }
            })
            .collect();
        if any_status {
            row.extend((1..=tau).map(|t| dataset.status(u, t).as_str().to_string()));
        }
        if let Some(w) = dataset.weights() {
            row.push(format!("{}", w[u]));
        }
        writer.write_record(&row).map_err(write_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Data(format!("cannot write panel: {e}")))?;
    let csv = String::from_utf8(bytes).map_err(|e| CliError::Data(e.to_string()))?;
    let schema = Schema {
        tau,
        nodes,
        mediator_support: Support::PerTime((1..=tau).map(|t| dataset.mediator_support(t).to_vec()).collect()),
        treatment_support: Some(Support::Shared(dataset.treatment_support(1).to_vec())),
        censor_columns: any_status.then_some(status_names),
        weights: dataset.weights().map(|_| "weight".to_string()),
        ignore: Vec::new(),
        delimiter: None,
    };
    Ok((csv, schema))
}
