//! File formats: binary PGM masks, CSV tables for discs, bodies and
//! support vectors, and small JSON helpers.

use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, Disc, Point, SupportVector};
use crate::pointproc::RasterMask;
use std::fs;
use std::path::Path;

/// Encode a mask as binary PGM: `P5`, maxval 255, foreground 255,
/// background 0.
pub fn pgm_bytes(mask: &RasterMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(
        mask.bits()
            .iter()
            .map(|&b| if b { 255u8 } else { 0u8 }),
    );
    out
}

pub fn write_pgm(mask: &RasterMask, path: &Path) -> Result<()> {
    fs::write(path, pgm_bytes(mask)).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parse P5 (binary) or P2 (ASCII) PGM; any nonzero sample is foreground.
pub fn parse_pgm(bytes: &[u8]) -> Result<RasterMask> {
    let mut pos = 0usize;

    fn skip_ws_and_comments(bytes: &[u8], pos: &mut usize) {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn token(bytes: &[u8], pos: &mut usize) -> Result<String> {
        skip_ws_and_comments(bytes, pos);
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::MalformedPgm("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    }

    let magic = token(bytes, &mut pos)?;
    if magic != "P5" && magic != "P2" {
        return Err(Error::MalformedPgm(format!(
            "unsupported magic {magic:?}, expected P5 or P2"
        )));
    }
    let parse_num = |tok: String| -> Result<usize> {
        tok.parse::<usize>()
            .map_err(|_| Error::MalformedPgm(format!("bad header number {tok:?}")))
    };
    let width = parse_num(token(bytes, &mut pos)?)?;
    let height = parse_num(token(bytes, &mut pos)?)?;
    let maxval = parse_num(token(bytes, &mut pos)?)?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedPgm("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::MalformedPgm(format!(
            "unsupported maxval {maxval}, expected 1..=255"
        )));
    }

    let n = width * height;
    let bits = if magic == "P5" {
        // Exactly one whitespace byte separates the header from the raster.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(Error::MalformedPgm("missing raster separator".into()));
        }
        pos += 1;
        if bytes.len() < pos + n {
            return Err(Error::MalformedPgm(format!(
                "raster truncated: need {n} bytes, have {}",
                bytes.len() - pos
            )));
        }
        bytes[pos..pos + n].iter().map(|&b| b != 0).collect()
    } else {
        let mut bits = Vec::with_capacity(n);
        for _ in 0..n {
            let v = parse_num(token(bytes, &mut pos)?)?;
            bits.push(v != 0);
        }
        bits
    };
    RasterMask::from_bits(width, height, bits)
}

pub fn read_pgm(path: &Path) -> Result<RasterMask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_pgm(&bytes)
}

/// One `cx,cy,r` row per disc, with a header line.
pub fn discs_to_csv(discs: &[Disc]) -> String {
    let mut out = String::from("cx,cy,r\n");
    for d in discs {
        out.push_str(&format!("{},{},{}\n", d.center.x, d.center.y, d.radius));
    }
    out
}

pub fn parse_discs_csv(text: &str) -> Result<Vec<Disc>> {
    let mut discs = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line == "cx,cy,r" {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedPgm(format!("bad disc row {line:?}")));
        }
        let nums: Vec<f64> = fields
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::MalformedPgm(format!("bad disc row {line:?}")))?;
        discs.push(Disc::new(Point::new(nums[0], nums[1]), nums[2])?);
    }
    Ok(discs)
}

/// Bodies as `x,y` vertex rows with blank-line separators.
pub fn bodies_to_csv(bodies: &[ConvexBody]) -> String {
    let mut out = String::new();
    for (i, body) in bodies.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for v in body.vertices() {
            out.push_str(&format!("{},{}\n", v.x, v.y));
        }
    }
    out
}

pub fn parse_bodies_csv(text: &str) -> Result<Vec<ConvexBody>> {
    let mut bodies = Vec::new();
    let mut current: Vec<Point> = Vec::new();
    for line in text.lines().chain(std::iter::once("")) {
        let line = line.trim();
        if line.is_empty() {
            if !current.is_empty() {
                bodies.push(ConvexBody::new(std::mem::take(&mut current))?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::MalformedPgm(format!("bad vertex row {line:?}")));
        }
        let x = fields[0].trim().parse::<f64>();
        let y = fields[1].trim().parse::<f64>();
        match (x, y) {
            (Ok(x), Ok(y)) => current.push(Point::new(x, y)),
            _ => return Err(Error::MalformedPgm(format!("bad vertex row {line:?}"))),
        }
    }
    Ok(bodies)
}

/// One row of n support values per vector.
pub fn support_to_csv(vectors: &[SupportVector]) -> String {
    let mut out = String::new();
    for v in vectors {
        let row: Vec<String> = v.values().iter().map(|x| x.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_support_csv(text: &str) -> Result<Vec<SupportVector>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::MalformedPgm(format!("bad support row {line:?}")))?;
        out.push(SupportVector::new(values)?);
    }
    Ok(out)
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}
