//! Schemas, instances and dataset ingestion.

mod arff;
mod csv;
mod synth;

use std::fmt::Write as _;

pub use self::arff::{parse_arff, ArffRecords};
pub use self::csv::{parse_csv, CsvRecords};
pub use self::synth::{synthetic_drift_stream, synthetic_schema, DriftStream, NO_DRIFT};

use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttributeKind {
    Nominal(Vec<String>),
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
}

impl AttributeSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }

    /// Nominal attribute; the value list must be non-empty and free of duplicates.
    pub fn nominal<I, T>(name: impl Into<String>, values: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let name = name.into();
        let values: Vec<String> = values.into_iter().map(Into::into).collect();
        if values.is_empty() {
            return Err(Error::Config(format!("nominal attribute `{name}` has no values")));
        }
        for (i, v) in values.iter().enumerate() {
            if values[..i].contains(v) {
                return Err(Error::Config(format!(
                    "nominal attribute `{name}` repeats value `{v}`"
                )));
            }
        }
        Ok(Self {
            name,
            kind: AttributeKind::Nominal(values),
        })
    }

    pub fn is_nominal(&self) -> bool {
        matches!(self.kind, AttributeKind::Nominal(_))
    }
}

/// What a learner needs to know about one input feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Numeric,
    /// Nominal with the given number of values.
    Nominal(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    relation: String,
    attributes: Vec<AttributeSpec>,
    class_index: usize,
    feature_attributes: Vec<usize>,
    feature_kinds: Vec<FeatureKind>,
}

impl Schema {
    pub fn new(
        relation: impl Into<String>,
        attributes: Vec<AttributeSpec>,
        class_index: usize,
    ) -> Result<Self> {
        let class = attributes
            .get(class_index)
            .ok_or_else(|| Error::Config(format!("class index {class_index} out of range")))?;
        if !class.is_nominal() {
            return Err(Error::Config(format!(
                "class attribute `{}` must be nominal",
                class.name
            )));
        }
        if attributes.len() < 2 {
            return Err(Error::Config("schema needs at least one feature".into()));
        }
        let feature_attributes: Vec<usize> =
            (0..attributes.len()).filter(|&i| i != class_index).collect();
        let feature_kinds = feature_attributes
            .iter()
            .map(|&i| match &attributes[i].kind {
                AttributeKind::Numeric => FeatureKind::Numeric,
                AttributeKind::Nominal(v) => FeatureKind::Nominal(v.len()),
            })
            .collect();
        Ok(Self {
            relation: relation.into(),
            attributes,
            class_index,
            feature_attributes,
            feature_kinds,
        })
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn attributes(&self) -> &[AttributeSpec] {
        &self.attributes
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn class_attribute(&self) -> &AttributeSpec {
        &self.attributes[self.class_index]
    }

    pub fn class_values(&self) -> &[String] {
        match &self.class_attribute().kind {
            AttributeKind::Nominal(v) => v,
            AttributeKind::Numeric => unreachable!("class attribute is nominal"),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_values().len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_kinds.len()
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    pub fn feature_attribute(&self, feature: usize) -> &AttributeSpec {
        &self.attributes[self.feature_attributes[feature]]
    }

    /// Checks every schema invariant an instance must satisfy.
    pub fn validate<S: Scalar>(&self, instance: &Instance<S>) -> Result<()> {
        if instance.values.len() != self.num_features() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} feature values, got {}",
                self.num_features(),
                instance.values.len()
            )));
        }
        if instance.class_index >= self.num_classes() {
            return Err(Error::SchemaMismatch(format!(
                "class index {} outside [0, {})",
                instance.class_index,
                self.num_classes()
            )));
        }
        if !(instance.weight >= S::zero()) {
            return Err(Error::SchemaMismatch("negative weight".into()));
        }
        for (i, (v, kind)) in instance.values.iter().zip(&self.feature_kinds).enumerate() {
            let ok = match kind {
                FeatureKind::Numeric => v.is_finite(),
                FeatureKind::Nominal(n) => {
                    v.fract() == S::zero() && *v >= S::zero() && v.as_f64() < *n as f64
                }
            };
            if !ok {
                return Err(Error::SchemaMismatch(format!(
                    "value {v} invalid for attribute `{}`",
                    self.feature_attribute(i).name
                )));
            }
        }
        Ok(())
    }

    /// ARFF header through the `@data` line.
    pub fn header_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "@relation {}", quote(&self.relation));
        for attr in &self.attributes {
            match &attr.kind {
                AttributeKind::Numeric => {
                    let _ = writeln!(out, "@attribute {} numeric", quote(&attr.name));
                }
                AttributeKind::Nominal(values) => {
                    let joined: Vec<String> = values.iter().map(|v| quote(v)).collect();
                    let _ = writeln!(out, "@attribute {} {{{}}}", quote(&attr.name), joined.join(","));
                }
            }
        }
        out.push_str("@data\n");
        out
    }

    /// One data row in attribute order, without a trailing newline.
    pub fn format_row<S: Scalar>(&self, instance: &Instance<S>) -> String {
        let mut out = String::new();
        let mut feature = 0;
        for (i, attr) in self.attributes.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            if i == self.class_index {
                out.push_str(&quote(&self.class_values()[instance.class_index]));
                continue;
            }
            let v = instance.values[feature];
            feature += 1;
            match &attr.kind {
                AttributeKind::Numeric => {
                    let _ = write!(out, "{v}");
                }
                AttributeKind::Nominal(values) => {
                    let idx = v.to_usize().unwrap_or(0);
                    out.push_str(&quote(&values[idx]));
                }
            }
        }
        out
    }

    /// Whole dataset as ARFF text.
    pub fn to_arff<S: Scalar>(&self, instances: &[Instance<S>]) -> String {
        let mut out = self.header_text();
        for inst in instances {
            out.push_str(&self.format_row(inst));
            out.push('\n');
        }
        out
    }

    /// Maps the comma-separated tokens of one row onto an instance.
    /// Parses one comma-separated data row; `line` is reported in errors.
    pub fn parse_row<S: Scalar>(&self, row: &str, line: usize) -> Result<Instance<S>> {
        self.parse_tokens(&split_row(row), line)
    }

    pub(crate) fn parse_tokens<S: Scalar>(&self, tokens: &[String], line: usize) -> Result<Instance<S>> {
        if tokens.len() != self.attributes.len() {
            return Err(Error::Arity {
                row: line,
                expected: self.attributes.len(),
                found: tokens.len(),
            });
        }
        let mut values = Vec::with_capacity(self.num_features());
        let mut class_index = 0;
        for (i, (tok, attr)) in tokens.iter().zip(&self.attributes).enumerate() {
            let tok = tok.as_str();
            if tok == "?" {
                return Err(record_error(line, attr, "missing values are not supported"));
            }
            match &attr.kind {
                AttributeKind::Numeric => {
                    let v = S::from_str_radix(tok, 10)
                        .ok()
                        .filter(|v: &S| v.is_finite())
                        .ok_or_else(|| record_error(line, attr, &format!("`{tok}` is not a number")))?;
                    values.push(v);
                }
                AttributeKind::Nominal(list) => {
                    let idx = list.iter().position(|v| v == tok).ok_or_else(|| {
                        record_error(line, attr, &format!("`{tok}` is not a declared value"))
                    })?;
                    if i == self.class_index {
                        class_index = idx;
                    } else {
                        values.push(S::from_usize(idx).expect("index fits scalar"));
                    }
                }
            }
        }
        Ok(Instance::new(values, class_index))
    }
}

fn record_error(line: usize, attr: &AttributeSpec, message: &str) -> Error {
    Error::Record {
        line,
        attribute: attr.name.clone(),
        message: message.to_string(),
    }
}

fn quote(s: &str) -> String {
    if s.is_empty() || s.contains([' ', ',', '{', '}', '\'', '"', '%', '\t']) {
        format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
    } else {
        s.to_string()
    }
}

/// Splits a comma-separated line, honouring single/double quotes and backslash escapes.
/// Tokens come back trimmed and unquoted.
pub(crate) fn split_row(line: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut was_quoted = false;
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        match quote {
            Some(q) => {
                if c == '\\' {
                    if let Some(next) = chars.next() {
                        current.push(next);
                    }
                } else if c == q {
                    quote = None;
                } else {
                    current.push(c);
                }
            }
            None => match c {
                '\'' | '"' if current.trim().is_empty() => {
                    current.clear();
                    quote = Some(c);
                    was_quoted = true;
                }
                ',' => {
                    tokens.push(finish_token(&mut current, was_quoted));
                    was_quoted = false;
                }
                _ => current.push(c),
            },
        }
    }
    tokens.push(finish_token(&mut current, was_quoted));
    tokens
}

fn finish_token(current: &mut String, was_quoted: bool) -> String {
    let tok = std::mem::take(current);
    if was_quoted {
        tok
    } else {
        tok.trim().to_string()
    }
}

/// One labelled record. Nominal feature values hold their value-list index.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<S> {
    pub values: Vec<S>,
    pub class_index: usize,
    pub weight: S,
}

impl<S: Scalar> Instance<S> {
    pub fn new(values: Vec<S>, class_index: usize) -> Self {
        Self {
            values,
            class_index,
            weight: S::one(),
        }
    }
}

/// An instance as seen by the processor, with transport timestamps in nanoseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord<S> {
    pub seq: u64,
    pub instance: Instance<S>,
    pub sent_at: u64,
    pub received_at: u64,
}

impl<S: Scalar> StreamRecord<S> {
    /// Record read locally: sent and received at the same instant.
    pub fn local(seq: u64, instance: Instance<S>) -> Self {
        let now = crate::clock::now_ns();
        Self {
            seq,
            instance,
            sent_at: now,
            received_at: now,
        }
    }
}
