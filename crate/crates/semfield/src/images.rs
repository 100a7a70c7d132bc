//! PNG reading and writing for the image kinds used on disk.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

fn encoder(
    path: &Path,
    writer: BufWriter<File>,
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
) -> Result<png::Writer<BufWriter<File>>> {
    let mut enc = png::Encoder::new(writer, width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    enc.write_header()
        .map_err(|e| Error::format(path, e.to_string()))
}

fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: &[u8],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = encoder(path, BufWriter::new(file), width, height, color, depth)?;
    w.write_image_data(data)
        .map_err(|e| Error::format(path, e.to_string()))?;
    w.finish().map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_rgb8(path: &Path, width: usize, height: usize, pixels: &[[u8; 3]]) -> Result<()> {
    let data: Vec<u8> = pixels.iter().flatten().copied().collect();
    write_png(
        path,
        width,
        height,
        png::ColorType::Rgb,
        png::BitDepth::Eight,
        &data,
    )
}

pub fn write_gray8(path: &Path, width: usize, height: usize, values: &[u8]) -> Result<()> {
    write_png(
        path,
        width,
        height,
        png::ColorType::Grayscale,
        png::BitDepth::Eight,
        values,
    )
}

pub fn write_gray16(path: &Path, width: usize, height: usize, values: &[u16]) -> Result<()> {
    let data: Vec<u8> = values.iter().flat_map(|v| v.to_be_bytes()).collect();
    write_png(
        path,
        width,
        height,
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        &data,
    )
}

struct Decoded {
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: Vec<u8>,
}

fn read_png(path: &Path) -> Result<Decoded> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::format(path, "file not found")
        } else {
            Error::io(path, e)
        }
    })?;
    let mut reader = png::Decoder::new(BufReader::new(file))
        .read_info()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut data = vec![
        0;
        reader
            .output_buffer_size()
            .ok_or_else(|| Error::format(path, "image too large"))?
    ];
    let info = reader
        .next_frame(&mut data)
        .map_err(|e| Error::format(path, e.to_string()))?;
    data.truncate(info.buffer_size());
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        data,
    })
}

/// `(width, height, pixels)` of an 8-bit RGB PNG.
pub fn read_rgb8(path: &Path) -> Result<(usize, usize, Vec<[u8; 3]>)> {
    let d = read_png(path)?;
    if d.color != png::ColorType::Rgb || d.depth != png::BitDepth::Eight {
        return Err(Error::format(
            path,
            format!("expected 8-bit RGB, found {:?} {:?}", d.color, d.depth),
        ));
    }
    let px = d.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok((d.width, d.height, px))
}

/// `(width, height, values)` of an 8-bit single-channel PNG.
pub fn read_gray8(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let d = read_png(path)?;
    if d.color != png::ColorType::Grayscale || d.depth != png::BitDepth::Eight {
        return Err(Error::format(
            path,
            format!(
                "expected 8-bit grayscale, found {:?} {:?}",
                d.color, d.depth
            ),
        ));
    }
    Ok((d.width, d.height, d.data))
}

/// `(width, height, values)` of a 16-bit single-channel PNG.
pub fn read_gray16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let d = read_png(path)?;
    if d.color != png::ColorType::Grayscale || d.depth != png::BitDepth::Sixteen {
        return Err(Error::format(
            path,
            format!(
                "expected 16-bit grayscale, found {:?} {:?}",
                d.color, d.depth
            ),
        ));
    }
    Ok((
        d.width,
        d.height,
        d.data
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]))
            .collect(),
    ))
}

/// `[0, 1]` float color to 8 bits, rounding to nearest.
pub fn quantize(c: [f32; 3]) -> [u8; 3] {
    c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
}

/// Depth to 16 bits: 0 means nothing was hit, `1..=65535` spans
/// `[t_near, t_far]` linearly.
pub fn encode_depth(depth: f32, t_near: f64, t_far: f64) -> u16 {
    if !depth.is_finite() {
        return 0;
    }
    let u = ((depth as f64 - t_near) / (t_far - t_near)).clamp(0.0, 1.0);
    1 + (u * 65534.0).round() as u16
}

/// Inverse of [`encode_depth`] up to quantization.
pub fn decode_depth(v: u16, t_near: f64, t_far: f64) -> f64 {
    if v == 0 {
        f64::INFINITY
    } else {
        t_near + (v - 1) as f64 / 65534.0 * (t_far - t_near)
    }
}
