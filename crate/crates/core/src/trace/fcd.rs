//! SUMO floating-car-data (`--fcd-output`) adapter.
//!
//! Reads `<timestep time=".."><vehicle id=".." x=".." y=".."/></timestep>`
//! and emits the plain trace CSV.

use std::fmt::Write as _;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::MobilityTrace;
use crate::error::TraceError;

fn attr(e: &BytesStart<'_>, name: &[u8]) -> Result<Option<String>, TraceError> {
    for a in e.attributes() {
        let a = a.map_err(|err| TraceError::Xml(err.to_string()))?;
        if a.key.as_ref() == name {
            let v = a.unescape_value().map_err(|err| TraceError::Xml(err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn parse_num(e: &BytesStart<'_>, name: &str, pos: u64) -> Result<f64, TraceError> {
    let raw = attr(e, name.as_bytes())?
        .ok_or_else(|| TraceError::Xml(format!("byte {pos}: missing attribute {name}")))?;
    raw.parse().map_err(|_| TraceError::Xml(format!("byte {pos}: bad {name} {raw:?}")))
}

fn fcd_rows(xml: &str) -> Result<Vec<(f64, String, f64, f64)>, TraceError> {
    let mut reader = Reader::from_str(xml);
    let mut time: Option<f64> = None;
    let mut rows = Vec::new();
    loop {
        let pos = reader.buffer_position();
        match reader.read_event().map_err(|e| TraceError::Xml(e.to_string()))? {
            Event::Start(e) | Event::Empty(e) => match e.name().as_ref() {
                b"timestep" => time = Some(parse_num(&e, "time", pos)?),
                b"vehicle" => {
                    let t = time.ok_or_else(|| TraceError::Xml(format!("byte {pos}: vehicle outside timestep")))?;
                    let id = attr(&e, b"id")?
                        .ok_or_else(|| TraceError::Xml(format!("byte {pos}: vehicle without id")))?;
                    rows.push((t, id, parse_num(&e, "x", pos)?, parse_num(&e, "y", pos)?));
                }
                _ => {}
            },
            Event::End(e) if e.name().as_ref() == b"timestep" => time = None,
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(rows)
}

pub fn load_fcd(xml: &str) -> Result<MobilityTrace, TraceError> {
    MobilityTrace::from_rows(fcd_rows(xml)?)
}

pub fn fcd_to_csv(xml: &str) -> Result<String, TraceError> {
    let mut out = String::new();
    for (t, id, x, y) in fcd_rows(xml)? {
        let _ = writeln!(out, "{t},{id},{x},{y}");
    }
    Ok(out)
}
