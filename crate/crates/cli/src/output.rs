//! Deterministic serialization: every `f64` is written with 17 significant
//! digits, struct fields keep declaration order.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// Pretty JSON with `{:.16e}` floats.
pub struct FixedFloatFormatter<'a>(PrettyFormatter<'a>);

impl Default for FixedFloatFormatter<'_> {
    fn default() -> Self {
        Self(PrettyFormatter::with_indent(b"  "))
    }
}

impl Formatter for FixedFloatFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloatFormatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// RFC 4180 CSV from a header and rows of preformatted cells.
pub fn to_csv(header: &[&str], rows: &[Vec<String>]) -> csv::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if !header.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("cells are UTF-8"))
}

/// Cell text for a float: 17 significant digits, `inf` for `+∞`.
pub fn cell(x: f64) -> String {
    codivergence::extreal::format_f64(x).replace('"', "")
}

#[cfg(test)]
mod tests {
    use super::*;
    use codivergence::ExtReal;

    #[derive(Serialize)]
    struct Sample {
        b: f64,
        a: ExtReal,
        c: Vec<f64>,
    }

    #[test]
    fn floats_are_fixed_width_and_keys_ordered() {
        let s = to_json(&Sample { b: 0.1, a: ExtReal::PosInf, c: vec![1.0, -2.5e-300] }).unwrap();
        assert!(s.find("\"b\"").unwrap() < s.find("\"a\"").unwrap());
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("\"inf\""));
        assert!(s.contains("-2.5000000000000000e-300"));
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn csv_quotes_when_needed() {
        let s = to_csv(&["name", "value"], &[vec!["a,b".into(), cell(f64::INFINITY)]]).unwrap();
        assert_eq!(s, "name,value\n\"a,b\",inf\n");
    }
}
