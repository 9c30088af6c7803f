use alloc::format;
use alloc::vec::Vec;

use super::{ColumnKey, PanelDataset, RoleKind, VariableRole};
use crate::{Error, Result};

/// Everything recorded before an anchor position, in global order.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryView<'a> {
    pub unit: usize,
    pub anchor: VariableRole,
    keys: Vec<&'a ColumnKey>,
    values: Vec<f64>,
}

/// One variable of a history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry<'a> {
    pub key: &'a ColumnKey,
    pub value: f64,
}

impl<'a> HistoryView<'a> {
    /// Builds a view from parallel key/value lists. Keys must precede the
    /// anchor; this is checked in debug builds.
    pub fn new(unit: usize, anchor: VariableRole, keys: Vec<&'a ColumnKey>, values: Vec<f64>) -> Self {
        debug_assert_eq!(keys.len(), values.len());
        debug_assert!(keys.iter().all(|k| k.role.position() < anchor.position()));
        HistoryView { unit, anchor, keys, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.keys.iter().position(|k| k.name == name).map(|i| self.values[i])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn entries(&self) -> impl Iterator<Item = HistoryEntry<'a>> + '_ {
        self.keys.iter().zip(&self.values).map(|(k, v)| HistoryEntry { key: k, value: *v })
    }

    /// Earlier treatment values `a_1, …, a_{t-1}`.
    pub fn treatments(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries().filter(|e| e.key.role.kind == RoleKind::Treatment).map(|e| e.value)
    }
}

/// History of `unit` strictly before `anchor`. The anchor must be a role
/// registered in the dataset.
pub fn history(dataset: &PanelDataset, unit: usize, anchor: VariableRole) -> Result<HistoryView<'_>> {
    if !dataset.columns().iter().any(|c| c.key.role == anchor) {
        return Err(Error::UnknownAnchor(format!("{:?} at time {}", anchor.kind, anchor.time)));
    }
    if unit >= dataset.n() {
        return Err(Error::InvalidParameter(format!("unit {unit} out of range")));
    }
    let (keys, values) = dataset
        .columns_before(anchor.position())
        .map(|(_, c)| (&c.key, c.values[unit]))
        .unzip();
    Ok(HistoryView::new(unit, anchor, keys, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelBuilder;
    use crate::panel::RoleKind::*;
    use alloc::vec;

    fn two_period() -> PanelDataset {
        PanelBuilder::new(2)
            .observed(BaselineCovariate, 1, "L1", &[0.1])
            .observed(Treatment, 1, "A1", &[1.0])
            .observed(IntermediateConfounder, 1, "Z1", &[2.0])
            .observed(Mediator, 1, "M1", &[0.0])
            .observed(TimeCovariate, 2, "L2", &[3.0])
            .observed(Treatment, 2, "A2", &[0.0])
            .observed(IntermediateConfounder, 2, "Z2", &[4.0])
            .observed(Mediator, 2, "M2", &[1.0])
            .observed(Outcome, 3, "Y", &[5.0])
            .mediator_support(&[0.0, 1.0])
            .build()
            .unwrap()
    }

    fn names(h: &HistoryView) -> Vec<alloc::string::String> {
        h.entries().map(|e| e.key.name.clone()).collect()
    }

    #[test]
    fn anchors_select_prefixes() {
        let d = two_period();
        let h = history(&d, 0, VariableRole::new(Treatment, 1)).unwrap();
        assert_eq!(names(&h), ["L1"]);
        let h = history(&d, 0, VariableRole::new(Mediator, 1)).unwrap();
        assert_eq!(names(&h), ["L1", "A1", "Z1"]);
        let h = history(&d, 0, VariableRole::new(Treatment, 2)).unwrap();
        assert_eq!(names(&h), ["L1", "A1", "Z1", "M1", "L2"]);
        assert_eq!(h.values(), &[0.1, 1.0, 2.0, 0.0, 3.0]);
        assert_eq!(h.get("Z1"), Some(2.0));
        assert_eq!(h.treatments().collect::<Vec<_>>(), vec![1.0]);
    }

    #[test]
    fn histories_are_nested() {
        let d = two_period();
        let anchors = [
            VariableRole::new(Treatment, 1),
            VariableRole::new(IntermediateConfounder, 1),
            VariableRole::new(Mediator, 1),
            VariableRole::new(Treatment, 2),
            VariableRole::new(Mediator, 2),
            VariableRole::new(Outcome, 3),
        ];
        for w in anchors.windows(2) {
            let a = history(&d, 0, w[0]).unwrap();
            let b = history(&d, 0, w[1]).unwrap();
            assert!(a.len() < b.len());
            assert_eq!(a.values(), &b.values()[..a.len()]);
        }
    }

    #[test]
    fn unknown_anchor_is_rejected() {
        let d = two_period();
        let err = history(&d, 0, VariableRole::new(Treatment, 3)).unwrap_err();
        assert!(matches!(err, Error::UnknownAnchor(_)));
    }
}
