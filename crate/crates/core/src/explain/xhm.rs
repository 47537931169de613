//! Raw heatmap files: header line `XHM1 H W method`, then the values as
//! little-endian `f64`. The `ensemble-vec` method carries `3 * H * W`
//! values (the ensemble feature vector), all others `H * W`.

use std::path::Path;

use crate::error::{Error, Result};

pub const ENSEMBLE_VECTOR: &str = "ensemble-vec";
const METHODS: [&str; 5] = ["saliency", "cam", "gradcam", "ensemble", ENSEMBLE_VECTOR];

#[derive(Debug, Clone, PartialEq)]
pub struct XhmRecord {
    pub height: usize,
    pub width: usize,
    pub method: String,
    pub values: Vec<f64>,
}

impl XhmRecord {
    pub fn new(height: usize, width: usize, method: &str, values: Vec<f64>) -> Result<Self> {
        if !METHODS.contains(&method) {
            return Err(Error::format("xhm", format!("unknown method {method:?}")));
        }
        if height == 0 || width == 0 {
            return Err(Error::format("xhm", format!("degenerate dimensions {height}x{width}")));
        }
        let expected = expected_len(height, width, method);
        if values.len() != expected {
            return Err(Error::format("xhm", format!("{method} {height}x{width} needs {expected} values, got {}", values.len())));
        }
        Ok(XhmRecord { height, width, method: method.to_string(), values })
    }

    pub fn from_map(map: &super::Heatmap) -> Self {
        XhmRecord {
            height: map.height(),
            width: map.width(),
            method: map.method().as_str().to_string(),
            values: map.values().to_vec(),
        }
    }
}

fn expected_len(height: usize, width: usize, method: &str) -> usize {
    let plane = height * width;
    if method == ENSEMBLE_VECTOR {
        3 * plane
    } else {
        plane
    }
}

pub fn encode_xhm(record: &XhmRecord) -> Vec<u8> {
    let mut out = format!("XHM1 {} {} {}\n", record.height, record.width, record.method).into_bytes();
    for v in &record.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_xhm(bytes: &[u8]) -> Result<XhmRecord> {
    let eol = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format("xhm", "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..eol]).map_err(|_| Error::format("xhm", "header is not UTF-8"))?;
    let fields: Vec<&str> = header.split(' ').collect();
    let ["XHM1", h, w, method] = fields[..] else {
        return Err(Error::format("xhm", format!("bad header {header:?}")));
    };
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::format("xhm", format!("bad dimension {s:?}")));
    let (height, width) = (parse(h)?, parse(w)?);
    if !METHODS.contains(&method) {
        return Err(Error::format("xhm", format!("unknown method {method:?}")));
    }
    let payload = &bytes[eol + 1..];
    let need = 8 * expected_len(height, width, method);
    if payload.len() != need {
        if payload.len() < need {
            return Err(Error::Truncated { format: "xhm", expected: need, actual: payload.len() });
        }
        return Err(Error::format("xhm", format!("{} trailing bytes", payload.len() - need)));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    XhmRecord::new(height, width, method, values)
}

pub fn write_xhm(path: &Path, record: &XhmRecord) -> Result<()> {
    std::fs::write(path, encode_xhm(record)).map_err(|e| Error::io(path, e))
}

pub fn read_xhm(path: &Path) -> Result<XhmRecord> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_xhm(&bytes)
}
