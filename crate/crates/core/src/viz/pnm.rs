//! Binary Netpbm: P5 (grayscale) and P6 (RGB), maxval 255.
//!
//! Encoders emit `P<n>\n<width> <height>\n255\n` followed by raw samples.
//! Decoders accept any whitespace between header tokens and `#` comments,
//! with exactly one whitespace byte before the payload.

use std::path::Path;

use super::image::{GrayImage, RgbImage};
use crate::error::{Error, Result};

fn encode(magic: &str, width: usize, height: usize, payload: &[u8]) -> Vec<u8> {
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(payload);
    out
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    encode("P6", image.width(), image.height(), image.pixels())
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    encode("P5", image.width(), image.height(), image.pixels())
}

struct Header<'a> {
    width: usize,
    height: usize,
    payload: &'a [u8],
}

fn parse_header<'a>(bytes: &'a [u8], magic: &[u8], format: &'static str) -> Result<Header<'a>> {
    let mut rest = bytes
        .strip_prefix(magic)
        .ok_or_else(|| Error::format(format, format!("missing {} magic", String::from_utf8_lossy(magic))))?;

    let mut tokens = [0usize; 3];
    for (i, slot) in tokens.iter_mut().enumerate() {
        // skip whitespace and comments before the token
        loop {
            match rest.first() {
                Some(b) if b.is_ascii_whitespace() => rest = &rest[1..],
                Some(b'#') => {
                    let eol = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
                    rest = &rest[eol..];
                }
                _ => break,
            }
        }
        let len = rest.iter().take_while(|b| b.is_ascii_digit()).count();
        if len == 0 {
            return Err(Error::format(format, format!("expected header field {} to be a number", i + 1)));
        }
        let text = std::str::from_utf8(&rest[..len]).expect("ascii digits");
        *slot = text
            .parse()
            .map_err(|_| Error::format(format, format!("header value {text} out of range")))?;
        rest = &rest[len..];
    }
    match rest.first() {
        Some(b) if b.is_ascii_whitespace() => rest = &rest[1..],
        _ => return Err(Error::format(format, "missing whitespace after maxval")),
    }
    let [width, height, maxval] = tokens;
    if maxval != 255 {
        return Err(Error::format(format, format!("maxval must be 255, got {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(format, format!("degenerate dimensions {width}x{height}")));
    }
    Ok(Header { width, height, payload: rest })
}

fn take_payload<'a>(header: &Header<'a>, channels: usize, format: &'static str) -> Result<&'a [u8]> {
    let expected = header.width * header.height * channels;
    if header.payload.len() < expected {
        return Err(Error::Truncated { format, expected, actual: header.payload.len() });
    }
    Ok(&header.payload[..expected])
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let header = parse_header(bytes, b"P6", "ppm")?;
    let payload = take_payload(&header, 3, "ppm")?;
    RgbImage::new(header.height, header.width, payload.to_vec())
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let header = parse_header(bytes, b"P5", "pgm")?;
    let payload = take_payload(&header, 1, "pgm")?;
    GrayImage::new(header.height, header.width, payload.to_vec())
}

pub fn write_ppm(path: &Path, image: &RgbImage) -> Result<()> {
    std::fs::write(path, encode_ppm(image)).map_err(|e| Error::io(path, e))
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    std::fs::write(path, encode_pgm(image)).map_err(|e| Error::io(path, e))
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}
