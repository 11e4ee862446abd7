//! Flat binary container: an 8-byte little-endian header length, a JSON
//! header, then each array as little-endian f64 values. Array lengths are
//! recorded in the header under `"arrays"`.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub fn write_arrays<W: Write, H: Serialize>(
    mut w: W,
    header: &H,
    arrays: &[&[f64]],
) -> std::io::Result<()> {
    let mut value = serde_json::to_value(header).map_err(std::io::Error::other)?;
    let lens: Vec<usize> = arrays.iter().map(|a| a.len()).collect();
    match value {
        Value::Object(ref mut map) => {
            map.insert("arrays".into(), serde_json::json!(lens));
        }
        _ => {
            return Err(std::io::Error::other(
                "header must serialize to a JSON object",
            ))
        }
    }
    let text = serde_json::to_vec(&value).map_err(std::io::Error::other)?;
    w.write_all(&(text.len() as u64).to_le_bytes())?;
    w.write_all(&text)?;
    for a in arrays {
        for x in a.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_arrays<R: Read, H: DeserializeOwned>(mut r: R) -> Result<(H, Vec<Vec<f64>>)> {
    let io = |e| Error::io("<parameters>", e);
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(io)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 24 {
        return Err(Error::Format(format!("implausible header length {len}")));
    }
    let mut text = vec![0u8; len];
    r.read_exact(&mut text).map_err(io)?;
    let value: Value = serde_json::from_slice(&text).map_err(|e| Error::Format(e.to_string()))?;
    let lens: Vec<usize> = value
        .get("arrays")
        .cloned()
        .ok_or_else(|| Error::Format("header lacks array lengths".into()))
        .and_then(|v| serde_json::from_value(v).map_err(|e| Error::Format(e.to_string())))?;
    let header: H = serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
    let mut arrays = Vec::with_capacity(lens.len());
    let mut buf = [0u8; 8];
    for n in lens {
        let mut a = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut buf).map_err(io)?;
            a.push(f64::from_le_bytes(buf));
        }
        arrays.push(a);
    }
    Ok((header, arrays))
}
