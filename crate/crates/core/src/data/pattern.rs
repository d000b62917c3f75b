use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::dataset::{Column, Dataset};
use super::query::CausalQuery;
use super::schema::AttrKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Predicate {
    pub attribute: String,
    pub value: String,
}

/// A conjunction of `attribute = value` predicates, at most one per
/// attribute. Predicates are kept sorted by attribute name, so two patterns
/// are equal exactly when they denote the same conjunction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Predicate>", into = "Vec<Predicate>")]
pub struct Pattern {
    predicates: Vec<Predicate>,
}

impl Pattern {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new<A, V>(predicates: impl IntoIterator<Item = (A, V)>) -> Result<Self>
    where
        A: Into<String>,
        V: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (a, v) in predicates {
            let a = a.into();
            if map.insert(a.clone(), v.into()).is_some() {
                return Err(Error::InvalidPattern(format!(
                    "attribute `{a}` appears in two predicates"
                )));
            }
        }
        Ok(Self {
            predicates: map
                .into_iter()
                .map(|(attribute, value)| Predicate { attribute, value })
                .collect(),
        })
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn references(&self, attribute: &str) -> bool {
        self.predicates.iter().any(|p| p.attribute == attribute)
    }

    /// The pattern with the predicate on `attribute` dropped.
    pub fn without(&self, attribute: &str) -> Pattern {
        Pattern {
            predicates: self
                .predicates
                .iter()
                .filter(|p| p.attribute != attribute)
                .cloned()
                .collect(),
        }
    }

    /// Checks the pattern against a query: it may not mention the outcome and,
    /// unless `allow_treatment`, not the treatment either.
    pub fn validate_for(&self, query: &CausalQuery, allow_treatment: bool) -> Result<()> {
        if self.references(&query.outcome) {
            return Err(Error::InvalidPattern(format!(
                "pattern references the outcome `{}`",
                query.outcome
            )));
        }
        if !allow_treatment && self.references(&query.treatment) {
            return Err(Error::InvalidPattern(format!(
                "pattern references the treatment `{}`",
                query.treatment
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<Predicate>> for Pattern {
    type Error = Error;

    fn try_from(v: Vec<Predicate>) -> Result<Self> {
        Pattern::new(v.into_iter().map(|p| (p.attribute, p.value)))
    }
}

impl From<Pattern> for Vec<Predicate> {
    fn from(p: Pattern) -> Self {
        p.predicates
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.predicates.is_empty() {
            return f.write_str("(empty)");
        }
        for (i, p) in self.predicates.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{}={}", p.attribute, p.value)?;
        }
        Ok(())
    }
}

enum Matcher {
    Code(u32),
    Number(f64),
    Never,
}

/// All alive tuples matching every predicate of `pattern`, in index order.
/// The empty pattern matches every alive tuple.
pub fn satisfies(pattern: &Pattern, dataset: &Dataset) -> Result<Vec<usize>> {
    let mut compiled = Vec::with_capacity(pattern.len());
    for p in pattern.predicates() {
        let col = dataset.schema().require(&p.attribute)?;
        let matcher = match dataset.column(col) {
            Column::Categorical { .. } => dataset
                .column(col)
                .level_code(&p.value)
                .map_or(Matcher::Never, Matcher::Code),
            Column::Numeric(_) => p
                .value
                .trim()
                .parse::<f64>()
                .map_or(Matcher::Never, Matcher::Number),
        };
        compiled.push((col, matcher));
    }
    if compiled.iter().any(|(_, m)| matches!(m, Matcher::Never)) {
        return Ok(Vec::new());
    }
    Ok(dataset
        .alive_ids()
        .filter(|&row| {
            compiled.iter().all(|(col, m)| match (dataset.column(*col), m) {
                (Column::Categorical { codes, .. }, Matcher::Code(c)) => codes[row] == *c,
                (Column::Numeric(v), Matcher::Number(x)) => v[row] == *x,
                _ => false,
            })
        })
        .collect())
}

/// Dense discrete codes for an attribute that may appear in the pattern
/// search space, or `None` for continuous attributes.
pub(crate) fn discrete_codes(dataset: &Dataset, col: usize) -> Option<Vec<u32>> {
    match (dataset.schema().kind(col), dataset.column(col)) {
        (AttrKind::Categorical, Column::Categorical { codes, .. }) => Some(codes.clone()),
        (AttrKind::NumericBinary, Column::Numeric(v)) => {
            Some(v.iter().map(|&x| x as u32).collect())
        }
        _ => None,
    }
}

/// Number of distinct codes [`discrete_codes`] can produce for `col`.
pub(crate) fn domain_size(dataset: &Dataset, col: usize) -> usize {
    match dataset.column(col) {
        Column::Categorical { levels, .. } => levels.len(),
        Column::Numeric(_) => 2,
    }
}

pub(crate) fn code_label(dataset: &Dataset, col: usize, code: u32) -> String {
    match dataset.column(col) {
        Column::Categorical { levels, .. } => levels[code as usize].clone(),
        Column::Numeric(_) => code.to_string(),
    }
}
