use super::gf;
use super::tables::{self, alignment_positions};
use super::{min_version, EcLevel, QrError, QrMatrix};

const PENALTY_N1: i32 = 3;
const PENALTY_N2: i32 = 3;
const PENALTY_N3: i32 = 40;
const PENALTY_N4: i32 = 10;

const MODE_BYTE: u32 = 0b0100;

fn bit(value: u32, i: usize) -> bool {
    (value >> i) & 1 != 0
}

/// Symbol under construction plus the map of function modules.
pub(super) struct Canvas {
    pub matrix: QrMatrix,
    pub function: Vec<bool>,
    ecl: EcLevel,
}

impl Canvas {
    /// Blank symbol with every function pattern drawn and format bits reserved.
    pub fn new(version: u8, ecl: EcLevel) -> Self {
        let matrix = QrMatrix::blank(version);
        let n = matrix.size() * matrix.size();
        let mut canvas = Canvas { matrix, function: vec![false; n], ecl };
        canvas.draw_function_patterns();
        canvas
    }

    fn size(&self) -> usize {
        self.matrix.size()
    }

    pub fn is_function(&self, x: usize, y: usize) -> bool {
        self.function[y * self.size() + x]
    }

    fn set_function(&mut self, x: usize, y: usize, dark: bool) {
        self.matrix.set(x, y, dark);
        let size = self.size();
        self.function[y * size + x] = true;
    }

    fn draw_function_patterns(&mut self) {
        let size = self.size();
        for i in 0..size {
            self.set_function(6, i, i % 2 == 0);
            self.set_function(i, 6, i % 2 == 0);
        }
        self.draw_finder(3, 3);
        self.draw_finder(size - 4, 3);
        self.draw_finder(3, size - 4);

        let centres = alignment_positions(self.matrix.version());
        let last = centres.len().saturating_sub(1);
        for (i, &cx) in centres.iter().enumerate() {
            for (j, &cy) in centres.iter().enumerate() {
                let on_finder = (i == 0 && j == 0) || (i == 0 && j == last) || (i == last && j == 0);
                if !on_finder {
                    self.draw_alignment(cx, cy);
                }
            }
        }
        self.draw_format_bits(0);
        self.draw_version();
    }

    fn draw_finder(&mut self, cx: usize, cy: usize) {
        let size = self.size() as i32;
        for dy in -4i32..=4 {
            for dx in -4i32..=4 {
                let (x, y) = (cx as i32 + dx, cy as i32 + dy);
                if (0..size).contains(&x) && (0..size).contains(&y) {
                    let dist = dx.abs().max(dy.abs());
                    self.set_function(x as usize, y as usize, dist != 2 && dist != 4);
                }
            }
        }
    }

    fn draw_alignment(&mut self, cx: usize, cy: usize) {
        for dy in -2i32..=2 {
            for dx in -2i32..=2 {
                let (x, y) = ((cx as i32 + dx) as usize, (cy as i32 + dy) as usize);
                self.set_function(x, y, dx.abs().max(dy.abs()) != 1);
            }
        }
    }

    pub fn draw_format_bits(&mut self, mask: u8) {
        let bits = format_bits(self.ecl, mask);
        let size = self.size();
        for i in 0..6 {
            self.set_function(8, i, bit(bits, i));
        }
        self.set_function(8, 7, bit(bits, 6));
        self.set_function(8, 8, bit(bits, 7));
        self.set_function(7, 8, bit(bits, 8));
        for i in 9..15 {
            self.set_function(14 - i, 8, bit(bits, i));
        }
        for i in 0..8 {
            self.set_function(size - 1 - i, 8, bit(bits, i));
        }
        for i in 8..15 {
            self.set_function(8, size - 15 + i, bit(bits, i));
        }
        self.set_function(8, size - 8, true);
    }

    fn draw_version(&mut self) {
        let version = self.matrix.version();
        if version < 7 {
            return;
        }
        let bits = version_bits(version);
        let size = self.size();
        for i in 0..18 {
            let b = bit(bits, i);
            let a = size - 11 + i % 3;
            let c = i / 3;
            self.set_function(a, c, b);
            self.set_function(c, a, b);
        }
    }

    /// Data-module coordinates in placement order: two-column strips from
    /// the right edge, alternating upward and downward, skipping column 6.
    pub fn data_positions(&self) -> Vec<(usize, usize)> {
        let size = self.size();
        let mut out = Vec::with_capacity(tables::raw_data_modules(self.matrix.version()));
        let mut right = size as i32 - 1;
        while right >= 1 {
            if right == 6 {
                right = 5;
            }
            let upward = (right + 1) & 2 == 0;
            for vert in 0..size {
                for j in 0..2 {
                    let x = (right - j) as usize;
                    let y = if upward { size - 1 - vert } else { vert };
                    if !self.is_function(x, y) {
                        out.push((x, y));
                    }
                }
            }
            right -= 2;
        }
        out
    }

    fn draw_codewords(&mut self, codewords: &[u8]) {
        let positions = self.data_positions();
        for (i, &(x, y)) in positions.iter().enumerate().take(codewords.len() * 8) {
            let dark = (codewords[i >> 3] >> (7 - (i & 7))) & 1 != 0;
            self.matrix.set(x, y, dark);
        }
    }

    pub fn apply_mask(&mut self, mask: u8) {
        let size = self.size();
        for y in 0..size {
            for x in 0..size {
                if !self.is_function(x, y) && mask_bit(mask, x, y) {
                    let v = self.matrix.get(x, y);
                    self.matrix.set(x, y, !v);
                }
            }
        }
    }
}

pub(super) fn format_bits(ecl: EcLevel, mask: u8) -> u32 {
    let data = ecl.format_bits() << 3 | u32::from(mask);
    let mut rem = data;
    for _ in 0..10 {
        rem = (rem << 1) ^ ((rem >> 9) * 0x537);
    }
    (data << 10 | rem) ^ 0x5412
}

pub(super) fn version_bits(version: u8) -> u32 {
    let data = u32::from(version);
    let mut rem = data;
    for _ in 0..12 {
        rem = (rem << 1) ^ ((rem >> 11) * 0x1F25);
    }
    data << 12 | rem
}

pub(super) fn mask_bit(mask: u8, x: usize, y: usize) -> bool {
    match mask {
        0 => (x + y) % 2 == 0,
        1 => y % 2 == 0,
        2 => x % 3 == 0,
        3 => (x + y) % 3 == 0,
        4 => (x / 3 + y / 2) % 2 == 0,
        5 => x * y % 2 + x * y % 3 == 0,
        6 => (x * y % 2 + x * y % 3) % 2 == 0,
        7 => ((x + y) % 2 + x * y % 3) % 2 == 0,
        _ => unreachable!("mask out of range"),
    }
}

struct BitWriter {
    bits: Vec<bool>,
}

impl BitWriter {
    fn push(&mut self, value: u32, len: usize) {
        self.bits.extend((0..len).rev().map(|i| bit(value, i)));
    }
}

/// Data codewords for a single byte-mode segment, padded to capacity.
fn data_codewords(data: &[u8], version: u8, ecl: EcLevel) -> Vec<u8> {
    let capacity_bits = tables::data_codewords(version, ecl) * 8;
    let mut w = BitWriter { bits: Vec::with_capacity(capacity_bits) };
    w.push(MODE_BYTE, 4);
    w.push(data.len() as u32, tables::byte_count_bits(version));
    for &b in data {
        w.push(u32::from(b), 8);
    }
    let terminator = (capacity_bits - w.bits.len()).min(4);
    w.push(0, terminator);
    let pad = (8 - w.bits.len() % 8) % 8;
    w.push(0, pad);
    for pad_byte in [0xEC, 0x11].iter().cycle() {
        if w.bits.len() >= capacity_bits {
            break;
        }
        w.push(*pad_byte, 8);
    }
    w.bits.chunks(8).map(|c| c.iter().fold(0u8, |acc, &b| acc << 1 | u8::from(b))).collect()
}

/// Splits data into blocks, appends check bytes and interleaves.
fn add_ecc_and_interleave(data: &[u8], version: u8, ecl: EcLevel) -> Vec<u8> {
    let blocks_n = tables::num_blocks(version, ecl);
    let ecc_len = tables::ecc_per_block(version, ecl);
    let raw = tables::raw_codewords(version);
    let short_n = blocks_n - raw % blocks_n;
    let short_len = raw / blocks_n;
    let generator = gf::generator(ecc_len);

    let mut blocks: Vec<Vec<u8>> = Vec::with_capacity(blocks_n);
    let mut k = 0;
    for i in 0..blocks_n {
        let data_len = short_len - ecc_len + usize::from(i >= short_n);
        let mut block = data[k..k + data_len].to_vec();
        k += data_len;
        let ecc = gf::remainder(&block, &generator);
        if i < short_n {
            block.push(0);
        }
        block.extend(ecc);
        blocks.push(block);
    }

    let mut out = Vec::with_capacity(raw);
    for i in 0..=short_len {
        for (j, block) in blocks.iter().enumerate() {
            if i != short_len - ecc_len || j >= short_n {
                out.push(block[i]);
            }
        }
    }
    out
}

fn penalty(m: &QrMatrix) -> i32 {
    let size = m.size();
    let mut result = 0;
    for horizontal in [true, false] {
        for a in 0..size {
            let at = |b: usize| if horizontal { m.get(b, a) } else { m.get(a, b) };
            let mut run_color = false;
            let mut run_len = 0i32;
            let mut history = FinderPenalty::new(size as i32);
            for b in 0..size {
                if at(b) == run_color {
                    run_len += 1;
                    if run_len == 5 {
                        result += PENALTY_N1;
                    } else if run_len > 5 {
                        result += 1;
                    }
                } else {
                    history.add(run_len);
                    if !run_color {
                        result += history.count_patterns() * PENALTY_N3;
                    }
                    run_color = at(b);
                    run_len = 1;
                }
            }
            result += history.terminate_and_count(run_color, run_len) * PENALTY_N3;
        }
    }
    for y in 0..size - 1 {
        for x in 0..size - 1 {
            let c = m.get(x, y);
            if c == m.get(x + 1, y) && c == m.get(x, y + 1) && c == m.get(x + 1, y + 1) {
                result += PENALTY_N2;
            }
        }
    }
    let dark = m.modules().iter().filter(|&&d| d).count() as i32;
    let total = (size * size) as i32;
    // smallest k with (45 - 5k)% <= dark/total <= (55 + 5k)%
    let k = ((dark * 20 - total * 10).abs() + total - 1) / total - 1;
    result + k * PENALTY_N4
}

/// Run-length history for spotting 1:1:3:1:1 finder-like sequences.
struct FinderPenalty {
    size: i32,
    history: [i32; 7],
}

impl FinderPenalty {
    fn new(size: i32) -> Self {
        FinderPenalty { size, history: [0; 7] }
    }

    fn add(&mut self, mut run: i32) {
        if self.history[0] == 0 {
            run += self.size; // light border before the first run
        }
        self.history.copy_within(0..6, 1);
        self.history[0] = run;
    }

    fn count_patterns(&self) -> i32 {
        let h = &self.history;
        let n = h[1];
        let core = n > 0 && h[2] == n && h[3] == n * 3 && h[4] == n && h[5] == n;
        i32::from(core && h[0] >= n * 4 && h[6] >= n) + i32::from(core && h[6] >= n * 4 && h[0] >= n)
    }

    fn terminate_and_count(mut self, color: bool, mut run: i32) -> i32 {
        if color {
            self.add(run);
            run = 0;
        }
        run += self.size;
        self.add(run);
        self.count_patterns()
    }
}

/// Encodes `data` as one byte-mode segment in the smallest version that fits.
///
/// `mask` forces a mask pattern; `None` picks the lowest-penalty one.
pub fn encode_bytes(data: &[u8], ecl: EcLevel, mask: Option<u8>) -> Result<QrMatrix, QrError> {
    if let Some(m) = mask.filter(|&m| m > 7) {
        return Err(QrError::InvalidMask(m));
    }
    let version = min_version(data.len(), ecl)?;
    let codewords = add_ecc_and_interleave(&data_codewords(data, version, ecl), version, ecl);
    let mut canvas = Canvas::new(version, ecl);
    canvas.draw_codewords(&codewords);

    let chosen = match mask {
        Some(m) => m,
        None => {
            let mut best = (i32::MAX, 0u8);
            for m in 0..8u8 {
                canvas.apply_mask(m);
                canvas.draw_format_bits(m);
                let score = penalty(&canvas.matrix);
                if score < best.0 {
                    best = (score, m);
                }
                canvas.apply_mask(m);
            }
            best.1
        }
    };
    canvas.apply_mask(chosen);
    canvas.draw_format_bits(chosen);
    Ok(canvas.matrix)
}

/// Encodes UTF-8 text at error-correction level L.
pub fn qr_encode(text: &str) -> Result<QrMatrix, QrError> {
    encode_bytes(text.as_bytes(), EcLevel::Low, None)
}
