//! Small tables with known answers.

use crate::data::{AttrKind, Attribute, CausalQuery, Column, Dataset, Schema};

/// Two-column `(T, O)` table encoding a subset-sum instance: one treated row
/// per value, one control row with outcome 0 per value, and a treated row
/// with outcome `-k`. The query asks for an effect of exactly 0.
pub fn subset_sum_instance(values: &[f64], k: f64) -> (Dataset, CausalQuery) {
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
    .expect("distinct names");
    let mut t = Vec::new();
    let mut o = Vec::new();
    for &x in values {
        t.push(1.0);
        o.push(x);
    }
    t.push(1.0);
    o.push(-k);
    for _ in values {
        t.push(0.0);
        o.push(0.0);
    }
    let data = Dataset::from_columns(schema, vec![Column::Numeric(t), Column::Numeric(o)])
        .expect("columns match the schema");
    (data, CausalQuery::new("T", "O", Vec::<String>::new(), 0.0, 0.0))
}

/// The instance for `{1, 3, 5}` and `k = 4`. Rows are `t₁¹, t₃¹, t₅¹, t,
/// t₁², t₃², t₅²`; the effect is 1.25 and deleting row 2 brings it to 0.
pub fn subset_sum() -> (Dataset, CausalQuery) {
    subset_sum_instance(&[1.0, 3.0, 5.0], 4.0)
}

/// Adds one binary column `S{i}` per row, set to 1 on row `i` only, so that
/// every subset of rows is the match set of some pattern over the `S`
/// columns.
pub fn identifier_augmentation(data: &Dataset) -> Dataset {
    let n = data.n();
    let mut attrs: Vec<Attribute> = (1..=n)
        .map(|i| Attribute {
            name: format!("S{i}"),
            kind: AttrKind::NumericBinary,
        })
        .collect();
    attrs.extend(data.schema().attributes().iter().cloned());
    let mut cols: Vec<Column> = (0..n)
        .map(|i| Column::Numeric((0..n).map(|r| if r == i { 1.0 } else { 0.0 }).collect()))
        .collect();
    cols.extend(data.columns().iter().cloned());
    Dataset::from_columns(Schema::new(attrs).expect("fresh names"), cols).expect("columns match the schema")
}

/// Four treated rows with outcomes 10, 8, 6, 3, and their identifier
/// augmentation.
pub fn four_treated() -> (Dataset, Dataset) {
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
    .expect("distinct names");
    let data = Dataset::from_columns(
        schema,
        vec![Column::Numeric(vec![1.0; 4]), Column::Numeric(vec![10.0, 8.0, 6.0, 3.0])],
    )
    .expect("columns match the schema");
    let augmented = identifier_augmentation(&data);
    (data, augmented)
}
