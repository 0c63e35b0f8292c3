//! Shared JSON report schema and a formatter printing every float with 17
//! significant digits.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Pretty-printing formatter that writes floats as `{:.16e}`, which
/// round-trips every f64 exactly.
pub struct FullPrecision<'a> {
    inner: PrettyFormatter<'a>,
}

impl Default for FullPrecision<'_> {
    fn default() -> Self {
        Self { inner: PrettyFormatter::with_indent(b"  ") }
    }
}

impl Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FullPrecision::default());
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// Common envelope for every report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub schema_version: u32,
    pub code_version: String,
    pub inputs: Value,
    pub values: Value,
    pub pass: bool,
    pub tolerances: Value,
}

impl Report {
    pub fn new(name: &str, inputs: Value, values: Value, pass: bool, tolerances: Value) -> Self {
        Self {
            name: name.to_string(),
            schema_version: SCHEMA_VERSION,
            code_version: CODE_VERSION.to_string(),
            inputs,
            values,
            pass,
            tolerances,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }
}

/// One named number with units and provenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalarReport {
    pub name: String,
    pub value: f64,
    pub units: String,
    pub provenance: Value,
}

impl ScalarReport {
    pub fn new(name: &str, value: f64, units: &str, provenance: Value) -> Result<Self> {
        if !value.is_finite() {
            return Err(crate::error::Error::DegenerateGeometry(format!("{name} is not finite")));
        }
        Ok(Self { name: name.to_string(), value, units: units.to_string(), provenance })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_bit_for_bit() {
        let values = vec![0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300, -2.5e17, 0.0, f64::MIN_POSITIVE];
        let text = to_json_string(&values).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(text.contains("3.3333333333333331e-1"));
    }

    #[test]
    fn non_finite_values_become_null() {
        let text = to_json_string(&vec![f64::NAN]).unwrap();
        assert!(text.contains("null"));
    }
}
