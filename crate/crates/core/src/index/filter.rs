use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IndexError;
use crate::model::ExemplarMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterField {
    TargetType,
    Serial,
    Condition,
    SourceTag,
    DepressionDeg,
    AzimuthDeg,
}

impl FilterField {
    pub fn is_numeric(self) -> bool {
        matches!(self, FilterField::DepressionDeg | FilterField::AzimuthDeg)
    }

    pub fn name(self) -> &'static str {
        match self {
            FilterField::TargetType => "target_type",
            FilterField::Serial => "serial",
            FilterField::Condition => "condition",
            FilterField::SourceTag => "source_tag",
            FilterField::DepressionDeg => "depression_deg",
            FilterField::AzimuthDeg => "azimuth_deg",
        }
    }
}

impl FromStr for FilterField {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "target_type" => FilterField::TargetType,
            "serial" => FilterField::Serial,
            "condition" => FilterField::Condition,
            "source_tag" => FilterField::SourceTag,
            "depression_deg" => FilterField::DepressionDeg,
            "azimuth_deg" => FilterField::AzimuthDeg,
            other => return Err(IndexError::InvalidFilter(format!("unknown field {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterOp {
    Eq,
    Ge,
    Le,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FilterValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterClause {
    pub field: FilterField,
    pub op: FilterOp,
    pub value: FilterValue,
}

impl FilterClause {
    pub fn new(field: FilterField, op: FilterOp, value: FilterValue) -> Result<Self, IndexError> {
        let clause = Self { field, op, value };
        clause.validate()?;
        Ok(clause)
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        match (&self.value, self.field.is_numeric()) {
            (FilterValue::Number(v), true) if v.is_finite() => Ok(()),
            (FilterValue::Text(_), false) if self.op == FilterOp::Eq => Ok(()),
            (FilterValue::Text(_), false) => Err(IndexError::InvalidFilter(format!(
                "{} is a text field and only supports eq",
                self.field.name()
            ))),
            _ => Err(IndexError::InvalidFilter(format!(
                "value {:?} does not fit field {}",
                self.value,
                self.field.name()
            ))),
        }
    }

    pub fn matches(&self, meta: &ExemplarMeta) -> bool {
        let text = |s: Option<&str>| match (&self.value, s) {
            (FilterValue::Text(want), Some(have)) => want == have,
            _ => false,
        };
        let number = |have: f64| match self.value {
            FilterValue::Number(want) => match self.op {
                FilterOp::Eq => have == want,
                FilterOp::Ge => have >= want,
                FilterOp::Le => have <= want,
            },
            FilterValue::Text(_) => false,
        };
        match self.field {
            FilterField::TargetType => text(Some(&meta.target_type)),
            FilterField::Serial => text(meta.serial.as_deref()),
            FilterField::Condition => text(meta.condition.as_deref()),
            FilterField::SourceTag => text(meta.source_tag.as_deref()),
            FilterField::DepressionDeg => number(meta.depression_deg),
            FilterField::AzimuthDeg => number(meta.azimuth_deg),
        }
    }
}

impl fmt::Display for FilterClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            FilterOp::Eq => "=",
            FilterOp::Ge => ">=",
            FilterOp::Le => "<=",
        };
        match &self.value {
            FilterValue::Number(v) => write!(f, "{}{op}{v}", self.field.name()),
            FilterValue::Text(v) => write!(f, "{}{op}{v}", self.field.name()),
        }
    }
}

/// Parses `field=value`, `field>=value` or `field<=value`.
impl FromStr for FilterClause {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (field, op, value) = if let Some((f, v)) = s.split_once(">=") {
            (f, FilterOp::Ge, v)
        } else if let Some((f, v)) = s.split_once("<=") {
            (f, FilterOp::Le, v)
        } else if let Some((f, v)) = s.split_once('=') {
            (f, FilterOp::Eq, v)
        } else {
            return Err(IndexError::InvalidFilter(format!(
                "expected field=value, field>=value or field<=value, got {s:?}"
            )));
        };
        let field: FilterField = field.trim().parse()?;
        let value = value.trim();
        let value = if field.is_numeric() {
            FilterValue::Number(value.parse().map_err(|_| {
                IndexError::InvalidFilter(format!("{} expects a number, got {value:?}", field.name()))
            })?)
        } else {
            FilterValue::Text(value.to_string())
        };
        FilterClause::new(field, op, value)
    }
}

/// Conjunction of clauses. Empty matches everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetadataFilter {
    pub clauses: Vec<FilterClause>,
}

impl MetadataFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn new(clauses: Vec<FilterClause>) -> Result<Self, IndexError> {
        let f = Self { clauses };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        self.clauses.iter().try_for_each(FilterClause::validate)
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn matches(&self, meta: &ExemplarMeta) -> bool {
        self.clauses.iter().all(|c| c.matches(meta))
    }

    pub fn and(mut self, clause: FilterClause) -> Self {
        self.clauses.push(clause);
        self
    }
}

/// Comma-separated clauses, e.g. `depression_deg=15,target_type=T-72`.
impl FromStr for MetadataFilter {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let clauses = s
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { clauses })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> ExemplarMeta {
        ExemplarMeta {
            id: "a".into(),
            target_type: "T-72".into(),
            serial: Some("132".into()),
            depression_deg: 15.0,
            azimuth_deg: 120.5,
            condition: None,
            source_tag: None,
        }
    }

    #[test]
    fn parses_and_matches() {
        let f: MetadataFilter = "depression_deg=15, azimuth_deg>=100,target_type=T-72"
            .parse()
            .unwrap();
        assert_eq!(f.clauses.len(), 3);
        assert!(f.matches(&meta()));
        let f: MetadataFilter = "azimuth_deg<=100".parse().unwrap();
        assert!(!f.matches(&meta()));
        assert!(MetadataFilter::all().matches(&meta()));
    }

    #[test]
    fn absent_optional_never_matches() {
        let f: MetadataFilter = "condition=clean".parse().unwrap();
        assert!(!f.matches(&meta()));
        let f: MetadataFilter = "serial=132".parse().unwrap();
        assert!(f.matches(&meta()));
    }

    #[test]
    fn rejects_ordering_on_text_fields() {
        assert!("target_type>=A".parse::<FilterClause>().is_err());
        assert!("depression_deg=abc".parse::<FilterClause>().is_err());
        assert!("elevation=15".parse::<FilterClause>().is_err());
        assert!("depression_deg".parse::<FilterClause>().is_err());
    }

    #[test]
    fn json_shape() {
        let f: MetadataFilter = serde_json::from_str(
            r#"[{"field":"depression_deg","op":"ge","value":15},{"field":"serial","op":"eq","value":"132"}]"#,
        )
        .unwrap();
        f.validate().unwrap();
        assert!(f.matches(&meta()));
    }
}
