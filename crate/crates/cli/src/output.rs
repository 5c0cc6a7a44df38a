//! Tabular output shared by every subcommand.
//!
//! CSV floats carry 17 significant digits in scientific notation, with
//! `inf` and `nan` for non-finite values. JSON rows keep the column order;
//! unbounded values serialize as `null`.

use ehsense_core::{Capacity, ExtendedReal};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Extended(ExtendedReal),
    Capacity(Capacity),
    Text(String),
    Flag(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => float(*v),
            Cell::Extended(ExtendedReal::Finite(v)) => float(*v),
            Cell::Extended(ExtendedReal::Infinite) => "inf".into(),
            Cell::Capacity(c) => c.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            // from_f64 maps non-finite values to null
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Extended(v) => serde_json::to_value(v).unwrap_or(Value::Null),
            Cell::Capacity(c) => serde_json::to_value(c).unwrap_or(Value::Null),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Flag(b) => Value::from(*b),
        }
    }
}

pub fn float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(CliError::output)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))
                .map_err(CliError::output)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::output(e.into_error()))?;
        String::from_utf8(bytes).map_err(CliError::output)
    }

    pub fn to_json_value(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let map: Map<String, Value> = self
                        .header
                        .iter()
                        .zip(row)
                        .map(|(k, c)| (k.to_string(), c.json()))
                        .collect();
                    Value::Object(map)
                })
                .collect(),
        )
    }
}

pub fn pretty(value: &Value) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(CliError::output)?;
    s.push('\n');
    Ok(s)
}
