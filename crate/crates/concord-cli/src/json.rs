//! JSON rendering with a deterministic byte layout: struct fields serialize
//! in declaration order, and every finite float is written at 17 significant
//! digits, so identical inputs give byte-identical reports.

use std::io;

use serde::Serialize;

pub fn to_json_string<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SignificantDigits);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf)?)
}

/// Compact JSON formatter that renders floats as `d.dddddddddddddddde±x`
/// (17 significant digits, enough to round-trip any f64 exactly).
struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{:.16e}", f64::from(value))
    }
}
