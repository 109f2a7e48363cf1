//! 16-bit grayscale PNG depth files: `q = ⌊v·65535 + ½⌋`, decoded as `q / 65535`.

use std::fs;
use std::path::Path;

use super::DepthMap;
use crate::error::{Error, Result};

pub fn quantize_u16(v: f32) -> Result<u16> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Format(format!("depth value {v} outside [0, 1]")));
    }
    Ok((f64::from(v) * 65535.0 + 0.5).floor() as u16)
}

pub fn encode_depth_png16(d: &DepthMap) -> Result<Vec<u8>> {
    if d.data().is_empty() {
        return Err(Error::Shape("cannot encode an empty depth map".into()));
    }
    let mut raw = Vec::with_capacity(d.data().len() * 2);
    for &v in d.data() {
        raw.extend_from_slice(&quantize_u16(v)?.to_be_bytes());
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, d.width() as u32, d.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Format(format!("png header: {e}")))?;
        writer
            .write_image_data(&raw)
            .map_err(|e| Error::Format(format!("png data: {e}")))?;
    }
    Ok(out)
}

pub fn decode_depth_png16(bytes: &[u8]) -> Result<DepthMap> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Sixteen {
        return Err(Error::Format(format!(
            "depth PNG must be 16-bit, found {:?}",
            info.bit_depth
        )));
    }
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::Format(format!(
            "depth PNG must be single-channel grayscale, found {:?}",
            info.color_type
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("png: {e}")))?;
    let data = buf[..frame.buffer_size()]
        .chunks_exact(2)
        .map(|b| (f64::from(u16::from_be_bytes([b[0], b[1]])) / 65535.0) as f32)
        .collect();
    DepthMap::new(width, height, data)
}

pub fn read_depth_png16(path: &Path) -> Result<DepthMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_depth_png16(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_depth_png16(path: &Path, d: &DepthMap) -> Result<()> {
    let bytes = encode_depth_png16(d)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
