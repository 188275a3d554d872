use super::encode::{format_bits, mask_bit, version_bits, Canvas};
use super::gf;
use super::tables;
use super::{EcLevel, QrError, QrMatrix};

const ALPHANUMERIC: &[u8; 45] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ $%*+-./:";
const MAX_FORMAT_DISTANCE: u32 = 3;

fn finder_ok(m: &QrMatrix, cx: usize, cy: usize) -> bool {
    for dy in -3i32..=3 {
        for dx in -3i32..=3 {
            let expected = dx.abs().max(dy.abs()) != 2;
            if m.get((cx as i32 + dx) as usize, (cy as i32 + dy) as usize) != expected {
                return false;
            }
        }
    }
    true
}

/// Nearest valid word to `read` among `candidates`, within the given distance.
fn nearest<T: Copy>(read: &[u32], candidates: impl Iterator<Item = (u32, T)>, max: u32) -> Option<T> {
    let mut best: Option<(u32, T)> = None;
    for (word, value) in candidates {
        for &r in read {
            let d = (word ^ r).count_ones();
            if d <= max && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, value));
            }
        }
    }
    best.map(|(_, v)| v)
}

fn read_format(m: &QrMatrix) -> Result<(EcLevel, u8), QrError> {
    let size = m.size();
    let mut first = 0u32;
    let mut second = 0u32;
    let bit = |dark: bool| u32::from(dark);
    for i in 0..6 {
        first |= bit(m.get(8, i)) << i;
    }
    first |= bit(m.get(8, 7)) << 6;
    first |= bit(m.get(8, 8)) << 7;
    first |= bit(m.get(7, 8)) << 8;
    for i in 9..15 {
        first |= bit(m.get(14 - i, 8)) << i;
    }
    for i in 0..8 {
        second |= bit(m.get(size - 1 - i, 8)) << i;
    }
    for i in 8..15 {
        second |= bit(m.get(8, size - 15 + i)) << i;
    }
    let levels = [EcLevel::Low, EcLevel::Medium, EcLevel::Quartile, EcLevel::High];
    let candidates = levels.into_iter().flat_map(|ecl| (0..8u8).map(move |mask| (format_bits(ecl, mask), (ecl, mask))));
    nearest(&[first, second], candidates, MAX_FORMAT_DISTANCE).ok_or(QrError::Format)
}

fn check_version(m: &QrMatrix) -> Result<(), QrError> {
    let version = m.version();
    if version < 7 {
        return Ok(());
    }
    let size = m.size();
    let mut bottom_left = 0u32;
    let mut top_right = 0u32;
    for i in 0..18 {
        let a = size - 11 + i % 3;
        let c = i / 3;
        bottom_left |= u32::from(m.get(c, a)) << i;
        top_right |= u32::from(m.get(a, c)) << i;
    }
    let candidates = (7..=tables::MAX_VERSION).map(|v| (version_bits(v), v));
    match nearest(&[bottom_left, top_right], candidates, MAX_FORMAT_DISTANCE) {
        Some(v) if v == version => Ok(()),
        _ => Err(QrError::VersionInfo),
    }
}

fn read_codewords(m: &QrMatrix, canvas: &Canvas, mask: u8) -> Vec<u8> {
    let positions = canvas.data_positions();
    let count = tables::raw_codewords(m.version());
    let mut out = vec![0u8; count];
    for (i, &(x, y)) in positions.iter().enumerate().take(count * 8) {
        if m.get(x, y) ^ mask_bit(mask, x, y) {
            out[i >> 3] |= 0x80 >> (i & 7);
        }
    }
    out
}

/// Splits interleaved codewords into blocks, corrects each and returns the data bytes.
fn deinterleave_and_correct(codewords: &[u8], version: u8, ecl: EcLevel) -> Result<Vec<u8>, QrError> {
    let blocks_n = tables::num_blocks(version, ecl);
    let ecc_len = tables::ecc_per_block(version, ecl);
    let raw = tables::raw_codewords(version);
    let short_n = blocks_n - raw % blocks_n;
    let short_len = raw / blocks_n;

    let mut blocks: Vec<Vec<u8>> = (0..blocks_n).map(|j| Vec::with_capacity(short_len + usize::from(j >= short_n))).collect();
    let mut k = 0;
    for i in 0..=short_len {
        for (j, block) in blocks.iter_mut().enumerate() {
            if i != short_len - ecc_len || j >= short_n {
                block.push(codewords[k]);
                k += 1;
            }
        }
    }

    let mut data = Vec::with_capacity(tables::data_codewords(version, ecl));
    for (j, block) in blocks.iter_mut().enumerate() {
        gf::correct(block, ecc_len).ok_or(QrError::Uncorrectable(j))?;
        data.extend_from_slice(&block[..block.len() - ecc_len]);
    }
    Ok(data)
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    fn remaining(&self) -> usize {
        self.bytes.len() * 8 - self.pos
    }

    fn read(&mut self, len: usize) -> Result<u32, QrError> {
        if len > self.remaining() {
            return Err(QrError::Segment("truncated segment".into()));
        }
        let mut v = 0u32;
        for _ in 0..len {
            let b = (self.bytes[self.pos >> 3] >> (7 - (self.pos & 7))) & 1;
            v = v << 1 | u32::from(b);
            self.pos += 1;
        }
        Ok(v)
    }
}

fn count_bits(mode: u32, version: u8) -> usize {
    let band = match version {
        1..=9 => 0,
        10..=26 => 1,
        _ => 2,
    };
    match mode {
        1 => [10, 12, 14][band],
        2 => [9, 11, 13][band],
        _ => [8, 16, 16][band],
    }
}

fn parse_segments(data: &[u8], version: u8) -> Result<Vec<u8>, QrError> {
    let mut r = BitReader { bytes: data, pos: 0 };
    let mut out = Vec::new();
    while r.remaining() >= 4 {
        let mode = r.read(4)?;
        match mode {
            0 => break,
            1 => {
                let mut n = r.read(count_bits(1, version))? as usize;
                while n > 0 {
                    let digits = n.min(3);
                    let v = r.read([0, 4, 7, 10][digits])?;
                    let text = format!("{v:0digits$}");
                    if text.len() != digits {
                        return Err(QrError::Segment(format!("numeric group {v} too large")));
                    }
                    out.extend_from_slice(text.as_bytes());
                    n -= digits;
                }
            }
            2 => {
                let mut n = r.read(count_bits(2, version))? as usize;
                let ch = |i: u32| {
                    ALPHANUMERIC.get(i as usize).copied().ok_or_else(|| QrError::Segment(format!("alphanumeric value {i}")))
                };
                while n >= 2 {
                    let v = r.read(11)?;
                    out.push(ch(v / 45)?);
                    out.push(ch(v % 45)?);
                    n -= 2;
                }
                if n == 1 {
                    out.push(ch(r.read(6)?)?);
                }
            }
            4 => {
                let n = r.read(count_bits(4, version))?;
                for _ in 0..n {
                    out.push(r.read(8)? as u8);
                }
            }
            7 => {
                // ECI designator; the payload is passed through as bytes.
                let first = r.read(8)?;
                if first & 0x80 != 0 {
                    r.read(if first & 0x40 != 0 { 16 } else { 8 })?;
                }
            }
            other => return Err(QrError::Segment(format!("unsupported mode {other:04b}"))),
        }
    }
    Ok(out)
}

/// Decodes a module matrix to its raw payload bytes.
pub fn decode_bytes(m: &QrMatrix) -> Result<Vec<u8>, QrError> {
    let size = m.size();
    if !(finder_ok(m, 3, 3) && finder_ok(m, size - 4, 3) && finder_ok(m, 3, size - 4)) {
        return Err(QrError::MissingFinder);
    }
    let (ecl, mask) = read_format(m)?;
    check_version(m)?;
    let canvas = Canvas::new(m.version(), ecl);
    let codewords = read_codewords(m, &canvas, mask);
    let data = deinterleave_and_correct(&codewords, m.version(), ecl)?;
    parse_segments(&data, m.version())
}

/// Decodes a module matrix to UTF-8 text.
pub fn qr_decode(m: &QrMatrix) -> Result<String, QrError> {
    String::from_utf8(decode_bytes(m)?).map_err(|_| QrError::NotUtf8)
}

#[cfg(test)]
mod tests {
    use super::super::{encode_bytes, qr_encode};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_each_mask_and_level() {
        let text = "SUCCESS: atm-042 Zq81LmP0";
        for ecl in [EcLevel::Low, EcLevel::Medium, EcLevel::Quartile, EcLevel::High] {
            for mask in 0..8 {
                let m = encode_bytes(text.as_bytes(), ecl, Some(mask)).unwrap();
                assert_eq!(read_format(&m).unwrap(), (ecl, mask));
                assert_eq!(qr_decode(&m).unwrap(), text);
            }
        }
    }

    #[test]
    fn large_versions_round_trip() {
        for len in [154, 155, 271, 272, 1000, 2953] {
            let text: String = (0..len).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
            let m = qr_encode(&text).unwrap();
            assert_eq!(qr_decode(&m).unwrap(), text, "length {len}");
        }
    }

    fn flip(m: &QrMatrix, x: usize, y: usize) -> QrMatrix {
        let mut modules = m.modules().to_vec();
        modules[y * m.size() + x] ^= true;
        QrMatrix::from_modules(m.size(), modules).unwrap()
    }

    #[test]
    fn repairs_damaged_modules() {
        let m = qr_encode("FAIL: no ATM within range").unwrap();
        let canvas = Canvas::new(m.version(), EcLevel::Low);
        let positions = canvas.data_positions();
        // two codewords of a single 2-L block (ecc 10) damaged
        let damaged = flip(&flip(&m, positions[0].0, positions[0].1), positions[20].0, positions[20].1);
        assert_eq!(qr_decode(&damaged).unwrap(), "FAIL: no ATM within range");
        // one format bit flipped
        assert_eq!(qr_decode(&flip(&m, 8, 0)).unwrap(), "FAIL: no ATM within range");
    }

    #[test]
    fn rejects_non_symbols() {
        let blank = QrMatrix::from_modules(21, vec![false; 441]).unwrap();
        assert_eq!(qr_decode(&blank), Err(QrError::MissingFinder));
        let bytes = encode_bytes(&[0xFF, 0xFE], EcLevel::Low, None).unwrap();
        assert_eq!(qr_decode(&bytes), Err(QrError::NotUtf8));
        assert_eq!(decode_bytes(&bytes).unwrap(), vec![0xFF, 0xFE]);
    }

    #[test]
    fn numeric_and_alphanumeric_segments() {
        // 0001 0000001000 0000001100 0101011001 1000011 : "01234567", version 1-M
        let data = [0x10, 0x20, 0x0C, 0x56, 0x61, 0x80, 0xEC, 0x11];
        assert_eq!(parse_segments(&data, 1).unwrap(), b"01234567");
        // 0010 000000101 00111001110 011100111 00010 : "AC-42"
        let data = [0x20, 0x29, 0xCE, 0xE7, 0x21, 0x00];
        assert_eq!(parse_segments(&data, 1).unwrap(), b"AC-42");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn any_text_round_trips(text in "\\PC{0,120}") {
            let m = qr_encode(&text).unwrap();
            prop_assert_eq!(qr_decode(&m).unwrap(), text);
        }
    }
}
