//! PNG rendering: one pixel per module, black on white, with a light border.

use std::io::Cursor;

use super::{QrError, QrMatrix};

/// Light border width in modules.
pub const QUIET_ZONE: usize = 4;

const DARK: u8 = 0;
const LIGHT: u8 = 255;

fn image_err(e: impl std::fmt::Display) -> QrError {
    QrError::Image(e.to_string())
}

/// 8-bit greyscale PNG of the symbol.
pub fn encode_png(m: &QrMatrix) -> Vec<u8> {
    let side = m.size() + 2 * QUIET_ZONE;
    let mut pixels = vec![LIGHT; side * side];
    for y in 0..m.size() {
        for x in 0..m.size() {
            if m.get(x, y) {
                pixels[(y + QUIET_ZONE) * side + x + QUIET_ZONE] = DARK;
            }
        }
    }
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, side as u32, side as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    // Writing to a Vec with a valid header cannot fail.
    let mut writer = encoder.write_header().expect("png header");
    writer.write_image_data(&pixels).expect("png data");
    writer.finish().expect("png finish");
    out
}

/// Greyscale view of an arbitrary PNG.
fn luma(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), QrError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(image_err)?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| image_err("image too large"))?];
    let info = reader.next_frame(&mut buf).map_err(image_err)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = info.color_type.samples();
    let row = info.line_size;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let px = &buf[y * row + x * channels..][..channels];
            let v = match channels {
                1 | 2 => px[0],
                _ => ((u32::from(px[0]) * 299 + u32::from(px[1]) * 587 + u32::from(px[2]) * 114) / 1000) as u8,
            };
            // transparent pixels read as background
            let v = if channels == 2 && px[1] < 128 || channels == 4 && px[3] < 128 { LIGHT } else { v };
            out.push(v);
        }
    }
    Ok((w, h, out))
}

/// Reads the module grid back from an axis-aligned rendering at any integer scale.
pub fn decode_png(bytes: &[u8]) -> Result<QrMatrix, QrError> {
    let (w, h, pixels) = luma(bytes)?;
    let dark = |x: usize, y: usize| pixels[y * w + x] < 128;

    let (mut min_x, mut min_y, mut max_x, mut max_y) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..h {
        for x in 0..w {
            if dark(x, y) {
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);
            }
        }
    }
    if min_x == usize::MAX {
        return Err(QrError::MissingFinder);
    }
    // The top-left finder's outer ring is a 7-module dark run along the first row.
    let run = (min_x..=max_x).take_while(|&x| dark(x, min_y)).count();
    if run < 7 || run % 7 != 0 {
        return Err(QrError::MissingFinder);
    }
    let scale = run / 7;
    let (width, height) = (max_x - min_x + 1, max_y - min_y + 1);
    if width != height || width % scale != 0 {
        return Err(QrError::InvalidSize(width / scale));
    }
    let size = width / scale;
    let mut modules = Vec::with_capacity(size * size);
    for my in 0..size {
        for mx in 0..size {
            modules.push(dark(min_x + mx * scale + scale / 2, min_y + my * scale + scale / 2));
        }
    }
    QrMatrix::from_modules(size, modules)
}
