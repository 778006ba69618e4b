//! Canonical JSON: sorted keys, no whitespace, every float written with 17
//! significant digits, non-finite floats as `null`.

use crate::error::{Error, Result};
use serde::Serialize;
use serde_json::ser::Formatter;
use std::io;

struct FixedFloat;

impl Formatter for FixedFloat {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", format_f64(value))
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Scientific notation with 17 significant digits, which round-trips every `f64`.
pub fn format_f64(value: f64) -> String {
    if value.is_nan() {
        "NaN".into()
    } else if value.is_infinite() {
        if value > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{value:.16e}")
    }
}

pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // Going through `Value` sorts object keys and turns non-finite floats into null.
    let tree = serde_json::to_value(value).map_err(|e| Error::Config(format!("serialization: {e}")))?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloat);
    tree.serialize(&mut ser)
        .map_err(|e| Error::Config(format!("serialization: {e}")))?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}
