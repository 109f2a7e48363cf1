//! 8-bit PNG boundary. Quantization is round-half-up: `v8 = ⌊v·255 + ½⌋`.

use std::fs;
use std::path::Path;

use super::RgbImage;
use crate::error::{Error, Result};

pub fn quantize_u8(v: f32) -> u8 {
    (f64::from(v) * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn encode_png8(img: &RgbImage) -> Result<Vec<u8>> {
    if img.is_empty() {
        return Err(Error::Shape("cannot encode an empty image".into()));
    }
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize_u8(v)).collect();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Format(format!("png header: {e}")))?;
        writer
            .write_image_data(&bytes)
            .map_err(|e| Error::Format(format!("png data: {e}")))?;
    }
    Ok(out)
}

/// Decodes an 8-bit RGB, RGBA (alpha dropped) or grayscale PNG.
pub fn decode_png8(bytes: &[u8]) -> Result<RgbImage> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "expected 8-bit PNG, found {:?}",
            info.bit_depth
        )));
    }
    let color = info.color_type;
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let raw = &buf[..frame.buffer_size()];
    let to_f = |b: u8| f32::from(b) / 255.0;
    let data: Vec<f32> = match color {
        png::ColorType::Rgb => raw.iter().map(|&b| to_f(b)).collect(),
        png::ColorType::Rgba => raw
            .chunks_exact(4)
            .flat_map(|p| [to_f(p[0]), to_f(p[1]), to_f(p[2])])
            .collect(),
        png::ColorType::Grayscale => raw.iter().flat_map(|&b| [to_f(b); 3]).collect(),
        other => {
            return Err(Error::Format(format!("unsupported PNG color type {other:?}")));
        }
    };
    RgbImage::new(width, height, data)
}

pub fn read_png8(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png8(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_png8(path: &Path, img: &RgbImage) -> Result<()> {
    let bytes = encode_png8(img)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
