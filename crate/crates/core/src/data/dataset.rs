use std::sync::Arc;

use super::schema::{AttrKind, Schema};
use crate::error::{Error, Result};

/// Values of one attribute. Binary and continuous attributes share the
/// numeric representation; categoricals are dictionary encoded with levels in
/// order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical { codes: Vec<u32>, levels: Vec<String> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match self {
            Column::Numeric(v) => Some(v),
            Column::Categorical { .. } => None,
        }
    }

    pub fn level_code(&self, value: &str) -> Option<u32> {
        match self {
            Column::Categorical { levels, .. } => {
                levels.iter().position(|l| l == value).map(|p| p as u32)
            }
            Column::Numeric(_) => None,
        }
    }

    /// Builds a categorical column from raw string values.
    pub fn categorical_from<S: AsRef<str>>(values: &[S]) -> Column {
        let mut levels: Vec<String> = Vec::new();
        let mut lookup = std::collections::HashMap::new();
        let codes = values
            .iter()
            .map(|v| {
                let v = v.as_ref();
                *lookup.entry(v.to_owned()).or_insert_with(|| {
                    levels.push(v.to_owned());
                    (levels.len() - 1) as u32
                })
            })
            .collect();
        Column::Categorical { codes, levels }
    }

    pub(crate) fn display(&self, row: usize) -> String {
        match self {
            Column::Numeric(v) => format_number(v[row]),
            Column::Categorical { codes, levels } => levels[codes[row] as usize].clone(),
        }
    }
}

pub(crate) fn format_number(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[derive(Debug)]
struct Table {
    schema: Schema,
    columns: Vec<Column>,
    n: usize,
}

/// An immutable column-oriented table plus a deletion mask.
///
/// Tuple indices are stable: deleting never compacts the table, so index `i`
/// always names the `i`-th row of the source. Clones share the column storage
/// and copy only the mask.
#[derive(Debug, Clone)]
pub struct Dataset {
    table: Arc<Table>,
    alive: Vec<bool>,
    alive_count: usize,
}

/// Proof of a [`Dataset::delete`] call; pass it back to [`Dataset::undo`].
#[derive(Debug, Clone, PartialEq, Eq)]
#[must_use = "a deletion receipt is the only way to undo the deletion"]
pub struct DeletionReceipt {
    ids: Vec<usize>,
}

impl DeletionReceipt {
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }
}

impl Dataset {
    pub fn from_columns(schema: Schema, columns: Vec<Column>) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::Config(format!(
                "schema has {} attributes but {} columns were supplied",
                schema.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Column::len);
        for (i, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Config(format!(
                    "column `{}` has length {}, expected {n}",
                    schema.name(i),
                    col.len()
                )));
            }
            let kind = schema.kind(i);
            match (kind, col) {
                (AttrKind::Categorical, Column::Categorical { .. }) => {}
                (AttrKind::NumericBinary, Column::Numeric(v)) => {
                    if let Some(row) = v.iter().position(|&x| x != 0.0 && x != 1.0) {
                        return Err(Error::UnparseableValue {
                            row,
                            column: schema.name(i).to_owned(),
                            value: format_number(v[row]),
                        });
                    }
                }
                (AttrKind::NumericContinuous, Column::Numeric(_)) => {}
                _ => {
                    return Err(Error::Config(format!(
                        "column `{}` storage does not match kind {kind:?}",
                        schema.name(i)
                    )))
                }
            }
        }
        Ok(Self {
            table: Arc::new(Table { schema, columns, n }),
            alive: vec![true; n],
            alive_count: n,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.table.schema
    }

    pub fn columns(&self) -> &[Column] {
        &self.table.columns
    }

    pub fn column(&self, index: usize) -> &Column {
        &self.table.columns[index]
    }

    pub fn column_by_name(&self, name: &str) -> Result<&Column> {
        Ok(self.column(self.schema().require(name)?))
    }

    /// Total number of rows, deleted or not.
    pub fn n(&self) -> usize {
        self.table.n
    }

    pub fn alive_count(&self) -> usize {
        self.alive_count
    }

    pub fn is_alive(&self, id: usize) -> bool {
        self.alive.get(id).copied().unwrap_or(false)
    }

    pub fn alive_mask(&self) -> &[bool] {
        &self.alive
    }

    pub fn alive_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.alive
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
    }

    /// Alive rows minus a set of pretend-deleted ids (a private overlay).
    pub fn alive_excluding(&self, excluded: &[usize]) -> Vec<usize> {
        if excluded.is_empty() {
            return self.alive_ids().collect();
        }
        let mut mask = self.alive.clone();
        for &i in excluded {
            if i < mask.len() {
                mask[i] = false;
            }
        }
        mask.iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
            .collect()
    }

    pub fn value_string(&self, row: usize, col: usize) -> String {
        self.column(col).display(row)
    }

    /// Marks `ids` deleted. Fails without side effects if any id is not alive.
    pub fn delete(&mut self, ids: &[usize]) -> Result<DeletionReceipt> {
        let mut seen = std::collections::HashSet::with_capacity(ids.len());
        for &id in ids {
            if id >= self.n() {
                return Err(Error::OutOfRange(id));
            }
            if !self.alive[id] || !seen.insert(id) {
                return Err(Error::AlreadyDeleted(id));
            }
        }
        for &id in ids {
            self.alive[id] = false;
        }
        self.alive_count -= ids.len();
        Ok(DeletionReceipt { ids: ids.to_vec() })
    }

    pub fn undo(&mut self, receipt: DeletionReceipt) {
        for &id in &receipt.ids {
            debug_assert!(!self.alive[id]);
            self.alive[id] = true;
        }
        self.alive_count += receipt.ids.len();
    }

    /// Same table with the alive set replaced by `rows`.
    pub fn with_alive(&self, rows: &[usize]) -> Dataset {
        let mut alive = vec![false; self.n()];
        for &r in rows {
            alive[r] = true;
        }
        let alive_count = alive.iter().filter(|&&a| a).count();
        Dataset {
            table: Arc::clone(&self.table),
            alive,
            alive_count,
        }
    }

    /// A fresh dataset holding only `rows` (in that order), all alive.
    pub fn restrict(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns()
            .iter()
            .map(|c| match c {
                Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
                Column::Categorical { codes, levels } => Column::Categorical {
                    codes: rows.iter().map(|&r| codes[r]).collect(),
                    levels: levels.clone(),
                },
            })
            .collect();
        Dataset::from_columns(self.schema().clone(), columns)
            .expect("restriction preserves column invariants")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::Attribute;

    fn tiny() -> Dataset {
        let schema = Schema::new(vec![
            Attribute {
                name: "T".into(),
                kind: AttrKind::NumericBinary,
            },
            Attribute {
                name: "O".into(),
                kind: AttrKind::NumericContinuous,
            },
        ])
        .unwrap();
        Dataset::from_columns(
            schema,
            vec![
                Column::Numeric(vec![1.0, 1.0, 0.0]),
                Column::Numeric(vec![2.0, 3.0, 4.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn delete_rejects_dead_and_repeated_ids() {
        let mut ds = tiny();
        let r = ds.delete(&[1]).unwrap();
        assert!(matches!(ds.delete(&[1]), Err(Error::AlreadyDeleted(1))));
        assert!(matches!(ds.delete(&[0, 0]), Err(Error::AlreadyDeleted(0))));
        assert_eq!(ds.alive_count(), 2);
        ds.undo(r);
        assert_eq!(ds.alive_count(), 3);
        assert!(matches!(ds.delete(&[7]), Err(Error::OutOfRange(7))));
    }

    #[test]
    fn empty_delete_is_a_no_op() {
        let mut ds = tiny();
        let before = ds.alive_mask().to_vec();
        let r = ds.delete(&[]).unwrap();
        assert_eq!(ds.alive_mask(), &before[..]);
        ds.undo(r);
        assert_eq!(ds.alive_mask(), &before[..]);
    }

    #[test]
    fn binary_column_rejects_other_values() {
        let schema = Schema::new(vec![Attribute {
            name: "T".into(),
            kind: AttrKind::NumericBinary,
        }])
        .unwrap();
        let err = Dataset::from_columns(schema, vec![Column::Numeric(vec![0.0, 2.0])]);
        assert!(matches!(err, Err(Error::UnparseableValue { row: 1, .. })));
    }

    #[test]
    fn overlay_does_not_touch_mask() {
        let ds = tiny();
        assert_eq!(ds.alive_excluding(&[0]), vec![1, 2]);
        assert_eq!(ds.alive_count(), 3);
    }
}
