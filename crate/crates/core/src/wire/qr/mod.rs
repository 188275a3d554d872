//! QR Model 2 codec for byte-mode payloads.
//!
//! Responses are encoded at error-correction level L in the smallest version
//! whose byte capacity holds the text, so the symbol grows only when the
//! message crosses a capacity threshold. The decoder reads a clean module
//! matrix (or a PNG of one), repairs codeword errors with Reed-Solomon and
//! accepts numeric, alphanumeric and byte segments.

mod decode;
mod encode;
mod gf;
mod png;
mod tables;

use std::fmt;

use thiserror::Error;

pub use decode::{decode_bytes, qr_decode};
pub use encode::{encode_bytes, qr_encode};
pub use png::{decode_png, encode_png, QUIET_ZONE};
pub use tables::{byte_capacity, MAX_VERSION, MIN_VERSION};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QrError {
    #[error("{len} bytes exceed the {max}-byte capacity of a version-40 symbol")]
    DataTooLong { len: usize, max: usize },
    #[error("invalid mask {0}")]
    InvalidMask(u8),
    #[error("{0}x{0} is not a QR symbol size")]
    InvalidSize(usize),
    #[error("finder patterns not found")]
    MissingFinder,
    #[error("format information unreadable")]
    Format,
    #[error("version information unreadable")]
    VersionInfo,
    #[error("too many codeword errors in block {0}")]
    Uncorrectable(usize),
    #[error("bad data segment: {0}")]
    Segment(String),
    #[error("payload is not UTF-8")]
    NotUtf8,
    #[error("image: {0}")]
    Image(String),
}

/// Error-correction level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EcLevel {
    Low,
    Medium,
    Quartile,
    High,
}

impl EcLevel {
    pub(crate) fn format_bits(self) -> u32 {
        match self {
            EcLevel::Low => 1,
            EcLevel::Medium => 0,
            EcLevel::Quartile => 3,
            EcLevel::High => 2,
        }
    }
}

/// Smallest version whose byte-mode capacity at `ecl` holds `len` bytes.
pub fn min_version(len: usize, ecl: EcLevel) -> Result<u8, QrError> {
    (MIN_VERSION..=MAX_VERSION)
        .find(|&v| byte_capacity(v, ecl) >= len)
        .ok_or(QrError::DataTooLong { len, max: byte_capacity(MAX_VERSION, ecl) })
}

/// Square grid of modules; `true` is dark.
#[derive(Clone, PartialEq, Eq)]
pub struct QrMatrix {
    size: usize,
    modules: Vec<bool>,
}

impl QrMatrix {
    /// Wraps a row-major grid. The side must be `17 + 4 * version`.
    pub fn from_modules(size: usize, modules: Vec<bool>) -> Result<Self, QrError> {
        if !(21..=177).contains(&size) || (size - 17) % 4 != 0 || modules.len() != size * size {
            return Err(QrError::InvalidSize(size));
        }
        Ok(QrMatrix { size, modules })
    }

    pub(crate) fn blank(version: u8) -> Self {
        let size = usize::from(version) * 4 + 17;
        QrMatrix { size, modules: vec![false; size * size] }
    }

    /// Side length in modules.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn version(&self) -> u8 {
        ((self.size - 17) / 4) as u8
    }

    /// Module at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.modules[y * self.size + x]
    }

    pub(crate) fn set(&mut self, x: usize, y: usize, dark: bool) {
        self.modules[y * self.size + x] = dark;
    }

    pub fn modules(&self) -> &[bool] {
        &self.modules
    }

    /// One line per row, `#` for dark and `.` for light.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.size * (self.size + 1));
        for y in 0..self.size {
            out.extend((0..self.size).map(|x| if self.get(x, y) { '#' } else { '.' }));
            out.push('\n');
        }
        out
    }

    /// Inverse of [`QrMatrix::to_text`].
    pub fn from_text(text: &str) -> Result<Self, QrError> {
        let rows: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        let size = rows.len();
        let mut modules = Vec::with_capacity(size * size);
        for row in &rows {
            if row.chars().count() != size {
                return Err(QrError::InvalidSize(size));
            }
            modules.extend(row.chars().map(|c| c == '#'));
        }
        QrMatrix::from_modules(size, modules)
    }
}

impl fmt::Debug for QrMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "QrMatrix {}x{}", self.size, self.size)?;
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Byte-mode capacities from the ISO/IEC 18004 capacity table.
    const LOW: [(u8, usize); 12] = [
        (1, 17), (2, 32), (3, 53), (4, 78), (5, 106), (6, 134),
        (7, 154), (8, 192), (9, 230), (10, 271), (27, 1465), (40, 2953),
    ];
    const OTHERS: [(u8, EcLevel, usize); 6] = [
        (1, EcLevel::Medium, 14), (1, EcLevel::Quartile, 11), (1, EcLevel::High, 7),
        (40, EcLevel::Medium, 2331), (40, EcLevel::Quartile, 1663), (40, EcLevel::High, 1273),
    ];

    #[test]
    fn capacity_table() {
        for (v, cap) in LOW {
            assert_eq!(byte_capacity(v, EcLevel::Low), cap, "version {v}");
        }
        for (v, ecl, cap) in OTHERS {
            assert_eq!(byte_capacity(v, ecl), cap, "version {v} {ecl:?}");
        }
    }

    #[test]
    fn version_selection() {
        assert_eq!(min_version(0, EcLevel::Low), Ok(1));
        assert_eq!(min_version(17, EcLevel::Low), Ok(1));
        assert_eq!(min_version(18, EcLevel::Low), Ok(2));
        assert_eq!(min_version(22, EcLevel::Low), Ok(2));
        assert_eq!(min_version(50, EcLevel::Low), Ok(3));
        assert_eq!(min_version(53, EcLevel::Low), Ok(3));
        assert_eq!(min_version(54, EcLevel::Low), Ok(4));
        assert_eq!(min_version(2953, EcLevel::Low), Ok(40));
        assert_eq!(min_version(2954, EcLevel::Low), Err(QrError::DataTooLong { len: 2954, max: 2953 }));
    }

    #[test]
    fn raw_module_counts() {
        // 208 data modules in version 1, 29648 in version 40
        assert_eq!(tables::raw_data_modules(1), 208);
        assert_eq!(tables::raw_data_modules(40), 29648);
        assert_eq!(tables::raw_codewords(7), 196);
    }

    #[test]
    fn alignment_positions_match_reference_table() {
        // Row per version from the ISO/IEC 18004 Annex E table.
        let text = include_str!("../../../tests/fixtures/alignment_positions.txt");
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            let mut nums = line.split_whitespace().map(|n| n.parse::<usize>().unwrap());
            let v = nums.next().unwrap() as u8;
            let expected: Vec<usize> = nums.collect();
            assert_eq!(tables::alignment_positions(v), expected, "version {v}");
        }
    }

    #[test]
    fn matrix_text_round_trip() {
        let m = qr_encode("hi").unwrap();
        assert_eq!(QrMatrix::from_text(&m.to_text()).unwrap(), m);
        assert!(QrMatrix::from_modules(22, vec![false; 484]).is_err());
    }
}
