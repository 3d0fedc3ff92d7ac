//! File formats: 8-bit PNG class masks and gray images, 16-bit PNG instance
//! maps, the fragment CSV table, section map files and fixed-precision JSON.

use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::InstanceMap;
use crate::raster::{ClassMask, GrayImage};
use crate::shape::Fragment;

/// Significant digits used for every float written to CSV or JSON.
pub const SIG_DIGITS: usize = 6;

fn open_luma8(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let img = image::open(path)?;
    if !matches!(img.color(), image::ColorType::L8) {
        return Err(Error::invalid(format!(
            "{}: expected single-channel 8-bit image, found {:?}",
            path.display(),
            img.color()
        )));
    }
    let buf = img.into_luma8();
    Ok((buf.width() as usize, buf.height() as usize, buf.into_raw()))
}

pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let (w, h, raw) = open_luma8(path)?;
    GrayImage::new(w, h, raw)
}

pub fn write_gray(img: &GrayImage, path: &Path) -> Result<()> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.as_slice().to_vec())
            .ok_or_else(|| Error::invalid("image buffer size mismatch"))?;
    buf.save(path)?;
    Ok(())
}

/// Reads a three-class mask; any pixel value other than 0, 1 or 2 is rejected.
pub fn read_class_mask(path: &Path) -> Result<ClassMask> {
    let (w, h, raw) = open_luma8(path)?;
    ClassMask::from_raw(w, h, &raw)
}

pub fn write_class_mask(mask: &ClassMask, path: &Path) -> Result<()> {
    let gray = GrayImage::new(mask.width(), mask.height(), mask.to_raw())?;
    write_gray(&gray, path)
}

pub fn read_instance_map(path: &Path) -> Result<InstanceMap> {
    let img = image::open(path)?;
    if !matches!(img.color(), image::ColorType::L16 | image::ColorType::L8) {
        return Err(Error::invalid(format!(
            "{}: expected single-channel 16-bit image, found {:?}",
            path.display(),
            img.color()
        )));
    }
    let buf = img.into_luma16();
    let (w, h) = (buf.width() as usize, buf.height() as usize);
    InstanceMap::new(w, h, buf.into_raw().into_iter().map(u32::from).collect())
}

pub fn write_instance_map(map: &InstanceMap, path: &Path) -> Result<()> {
    if map.instance_count() > u16::MAX as u32 {
        return Err(Error::invalid(format!(
            "{} instances do not fit a 16-bit map",
            map.instance_count()
        )));
    }
    let data: Vec<u16> = map.ids().iter().map(|&v| v as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(map.width() as u32, map.height() as u32, data)
        .ok_or_else(|| Error::invalid("instance buffer size mismatch"))?;
    buf.save(path)?;
    Ok(())
}

/// Formats `v` with `SIG_DIGITS` significant digits in positional notation.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (SIG_DIGITS as i32 - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding can carry into a new leading digit (9.999995 -> 10.00000)
    if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > SIG_DIGITS && decimals > 0 {
        format!("{v:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

/// Rounds to `SIG_DIGITS` significant digits.
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.prec$e}", prec = SIG_DIGITS - 1).parse().unwrap_or(v)
}

fn round_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                        *n = r;
                    }
                }
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_json),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to `SIG_DIGITS` significant digits.
pub fn to_json_fixed<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_json_fixed(value)?).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub const FRAGMENT_COLUMNS: [&str; 11] = [
    "image_id",
    "fragment_id",
    "pixel_area",
    "centroid_x_px",
    "centroid_y_px",
    "a_cm",
    "b_cm",
    "orientation_rad",
    "d_cm",
    "volume_cm3",
    "touches_border",
];

#[derive(Debug, Serialize, Deserialize)]
struct FragmentRecord {
    image_id: String,
    fragment_id: u32,
    pixel_area: u64,
    centroid_x_px: f64,
    centroid_y_px: f64,
    a_cm: f64,
    b_cm: f64,
    orientation_rad: f64,
    d_cm: f64,
    volume_cm3: f64,
    touches_border: bool,
}

pub fn fragments_to_csv(image_id: &str, fragments: &[Fragment]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(FRAGMENT_COLUMNS)?;
    for f in fragments {
        w.write_record([
            image_id.to_string(),
            f.id.to_string(),
            f.pixel_area.to_string(),
            fmt_sig(f.centroid.0),
            fmt_sig(f.centroid.1),
            fmt_sig(f.a),
            fmt_sig(f.b),
            fmt_sig(f.orientation),
            fmt_sig(f.d),
            fmt_sig(f.volume),
            f.touches_border.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_fragments_csv(image_id: &str, fragments: &[Fragment], path: &Path) -> Result<()> {
    fs::write(path, fragments_to_csv(image_id, fragments)?).map_err(|e| Error::io(path, e))
}

/// Parses a fragment table into `(image_id, fragment)` rows.
pub fn parse_fragments_csv(text: &str) -> Result<Vec<(String, Fragment)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != FRAGMENT_COLUMNS {
        return Err(Error::Parse(format!(
            "unexpected fragment table columns: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize::<FragmentRecord>()
        .map(|rec| {
            let rec = rec?;
            Ok((
                rec.image_id,
                Fragment {
                    id: rec.fragment_id,
                    pixel_area: rec.pixel_area,
                    centroid: (rec.centroid_x_px, rec.centroid_y_px),
                    a: rec.a_cm,
                    b: rec.b_cm,
                    orientation: rec.orientation_rad,
                    d: rec.d_cm,
                    volume: rec.volume_cm3,
                    touches_border: rec.touches_border,
                },
            ))
        })
        .collect()
}

pub fn read_fragments_csv(path: &Path) -> Result<Vec<(String, Fragment)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fragments_csv(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionAssignment {
    pub image_id: String,
    pub section_id: String,
    pub depth_range: (f64, f64),
}

/// Section map: one `image_id section_id depth_from depth_to` row per line,
/// whitespace separated; `#` starts a comment.
pub fn parse_section_map(text: &str) -> Result<Vec<SectionAssignment>> {
    let mut out: Vec<SectionAssignment> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(Error::Parse(format!(
                "section map line {}: expected 4 columns, got {}",
                lineno + 1,
                cols.len()
            )));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("section map line {}: {s:?}: {e}", lineno + 1)))
        };
        let entry = SectionAssignment {
            image_id: cols[0].to_string(),
            section_id: cols[1].to_string(),
            depth_range: (num(cols[2])?, num(cols[3])?),
        };
        if out.iter().any(|e| e.image_id == entry.image_id) {
            return Err(Error::Parse(format!(
                "section map line {}: image {} listed twice",
                lineno + 1,
                entry.image_id
            )));
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn read_section_map(path: &Path) -> Result<Vec<SectionAssignment>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_section_map(&text)
}
