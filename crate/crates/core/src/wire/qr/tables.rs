//! Per-version block structure.

use super::EcLevel;

// Index 0 is padding; columns are versions 1..=40.
#[rustfmt::skip]
const ECC_CODEWORDS_PER_BLOCK: [[i8; 41]; 4] = [
    [-1,  7, 10, 15, 20, 26, 18, 20, 24, 30, 18, 20, 24, 26, 30, 22, 24, 28, 30, 28, 28, 28, 28, 30, 30, 26, 28, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30],
    [-1, 10, 16, 26, 18, 24, 16, 18, 22, 22, 26, 30, 22, 22, 24, 24, 28, 28, 26, 26, 26, 26, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28, 28],
    [-1, 13, 22, 18, 26, 18, 24, 18, 22, 20, 24, 28, 26, 24, 20, 30, 24, 28, 28, 26, 30, 28, 30, 30, 30, 30, 28, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30],
    [-1, 17, 28, 22, 16, 22, 28, 26, 26, 24, 28, 24, 28, 22, 24, 24, 30, 28, 28, 26, 28, 30, 24, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30],
];

#[rustfmt::skip]
const NUM_ERROR_CORRECTION_BLOCKS: [[i8; 41]; 4] = [
    [-1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 4,  4,  4,  4,  4,  6,  6,  6,  6,  7,  8,  8,  9,  9, 10, 12, 12, 12, 13, 14, 15, 16, 17, 18, 19, 19, 20, 21, 22, 24, 25],
    [-1, 1, 1, 1, 2, 2, 4, 4, 4, 5, 5,  5,  8,  9,  9, 10, 10, 11, 13, 14, 16, 17, 17, 18, 20, 21, 23, 25, 26, 28, 29, 31, 33, 35, 37, 38, 40, 43, 45, 47, 49],
    [-1, 1, 1, 2, 2, 4, 4, 6, 6, 8, 8,  8, 10, 12, 16, 12, 17, 16, 18, 21, 20, 23, 23, 25, 27, 29, 34, 34, 35, 38, 40, 43, 45, 48, 51, 53, 56, 59, 62, 65, 68],
    [-1, 1, 1, 2, 4, 4, 4, 5, 6, 8, 8, 11, 11, 16, 16, 18, 16, 19, 21, 25, 25, 25, 34, 30, 32, 35, 37, 40, 42, 45, 48, 51, 54, 57, 60, 63, 66, 70, 74, 77, 81],
];

pub const MIN_VERSION: u8 = 1;
pub const MAX_VERSION: u8 = 40;

fn row(ecl: EcLevel) -> usize {
    match ecl {
        EcLevel::Low => 0,
        EcLevel::Medium => 1,
        EcLevel::Quartile => 2,
        EcLevel::High => 3,
    }
}

pub fn ecc_per_block(version: u8, ecl: EcLevel) -> usize {
    ECC_CODEWORDS_PER_BLOCK[row(ecl)][usize::from(version)] as usize
}

pub fn num_blocks(version: u8, ecl: EcLevel) -> usize {
    NUM_ERROR_CORRECTION_BLOCKS[row(ecl)][usize::from(version)] as usize
}

/// Modules left for codewords after function patterns, remainder bits included.
pub fn raw_data_modules(version: u8) -> usize {
    let v = usize::from(version);
    let mut result = (16 * v + 128) * v + 64;
    if v >= 2 {
        let align = v / 7 + 2;
        result -= (25 * align - 10) * align - 55;
        if v >= 7 {
            result -= 36;
        }
    }
    result
}

pub fn raw_codewords(version: u8) -> usize {
    raw_data_modules(version) / 8
}

pub fn data_codewords(version: u8, ecl: EcLevel) -> usize {
    raw_codewords(version) - ecc_per_block(version, ecl) * num_blocks(version, ecl)
}

/// Width of the character-count field for byte mode.
pub fn byte_count_bits(version: u8) -> usize {
    if version <= 9 {
        8
    } else {
        16
    }
}

/// Largest byte-mode payload that fits `version` at `ecl`.
pub fn byte_capacity(version: u8, ecl: EcLevel) -> usize {
    (data_codewords(version, ecl) * 8 - 4 - byte_count_bits(version)) / 8
}

pub fn alignment_positions(version: u8) -> Vec<usize> {
    if version == 1 {
        return Vec::new();
    }
    let v = i32::from(version);
    let size = v * 4 + 17;
    let count = v / 7 + 2;
    let step = if v == 32 { 26 } else { (v * 4 + count * 2 + 1) / (count * 2 - 2) * 2 };
    let mut result: Vec<usize> = (0..count - 1).map(|i| (size - 7 - i * step) as usize).collect();
    result.push(6);
    result.reverse();
    result
}
