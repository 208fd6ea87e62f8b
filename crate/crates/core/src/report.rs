//! JSON and CSV emission for result records.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// Version tag written into every JSON report.
pub const SCHEMA: &str = "dirichlet-ball/1";

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    kind: &'a str,
    result: &'a T,
}

/// Pretty JSON `{"schema", "kind", "result"}` with a trailing newline.
pub fn to_json<T: Serialize>(kind: &str, result: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        schema: SCHEMA,
        kind,
        result,
    })?;
    s.push('\n');
    Ok(s)
}

/// CSV with a header row taken from the field names of `T`.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
