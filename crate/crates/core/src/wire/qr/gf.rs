//! GF(2^8) arithmetic over the QR polynomial 0x11D and Reed-Solomon coding.
//!
//! Codeword polynomials are stored highest power first, the way the bytes
//! appear in a block. The generator has roots 2^0 .. 2^(t-1).

const PRIMITIVE: u16 = 0x11D;

struct Tables {
    exp: [u8; 512],
    log: [u8; 256],
}

const TABLES: Tables = {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= PRIMITIVE;
        }
        i += 1;
    }
    while i < 512 {
        exp[i] = exp[i - 255];
        i += 1;
    }
    Tables { exp, log }
};

pub fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    TABLES.exp[TABLES.log[a as usize] as usize + TABLES.log[b as usize] as usize]
}

pub fn div(a: u8, b: u8) -> u8 {
    assert!(b != 0, "division by zero in GF(256)");
    if a == 0 {
        return 0;
    }
    TABLES.exp[TABLES.log[a as usize] as usize + 255 - TABLES.log[b as usize] as usize]
}

/// 2^power.
pub fn pow2(power: usize) -> u8 {
    TABLES.exp[power % 255]
}

fn inv(a: u8) -> u8 {
    div(1, a)
}

/// Generator polynomial of the given degree without its leading 1.
pub fn generator(degree: usize) -> Vec<u8> {
    assert!((1..=255).contains(&degree));
    let mut result = vec![0u8; degree];
    result[degree - 1] = 1;
    let mut root = 1u8;
    for _ in 0..degree {
        for j in 0..degree {
            result[j] = mul(result[j], root);
            if j + 1 < degree {
                result[j] ^= result[j + 1];
            }
        }
        root = mul(root, 2);
    }
    result
}

/// Error-correction bytes for `data` under `generator`.
pub fn remainder(data: &[u8], generator: &[u8]) -> Vec<u8> {
    let mut result = vec![0u8; generator.len()];
    for &b in data {
        let factor = b ^ result[0];
        result.rotate_left(1);
        let last = result.len() - 1;
        result[last] = 0;
        for (r, &g) in result.iter_mut().zip(generator) {
            *r ^= mul(g, factor);
        }
    }
    result
}

/// Evaluates a highest-power-first polynomial at `x`.
fn eval_high_first(poly: &[u8], x: u8) -> u8 {
    poly.iter().fold(0u8, |acc, &c| mul(acc, x) ^ c)
}

/// Evaluates a lowest-power-first polynomial at `x`.
fn eval_low_first(poly: &[u8], x: u8) -> u8 {
    poly.iter().rev().fold(0u8, |acc, &c| mul(acc, x) ^ c)
}

fn syndromes(block: &[u8], ecc_len: usize) -> Vec<u8> {
    (0..ecc_len).map(|j| eval_high_first(block, pow2(j))).collect()
}

/// Corrects `block` (data followed by `ecc_len` check bytes) in place.
///
/// Returns the number of corrected bytes, or `None` when the errors exceed
/// what the check bytes can repair.
pub fn correct(block: &mut [u8], ecc_len: usize) -> Option<usize> {
    let synd = syndromes(block, ecc_len);
    if synd.iter().all(|&s| s == 0) {
        return Some(0);
    }

    // Berlekamp-Massey; polynomials lowest power first.
    let mut locator = vec![1u8];
    let mut prev = vec![1u8];
    let mut errors = 0usize;
    let mut shift = 1usize;
    let mut prev_disc = 1u8;
    for n in 0..ecc_len {
        let mut disc = synd[n];
        for i in 1..=errors.min(locator.len() - 1) {
            disc ^= mul(locator[i], synd[n - i]);
        }
        if disc == 0 {
            shift += 1;
            continue;
        }
        let coef = div(disc, prev_disc);
        let mut next = locator.clone();
        if next.len() < prev.len() + shift {
            next.resize(prev.len() + shift, 0);
        }
        for (i, &p) in prev.iter().enumerate() {
            next[i + shift] ^= mul(coef, p);
        }
        if 2 * errors <= n {
            prev = std::mem::replace(&mut locator, next);
            errors = n + 1 - errors;
            prev_disc = disc;
            shift = 1;
        } else {
            locator = next;
            shift += 1;
        }
    }
    while locator.len() > 1 && *locator.last().unwrap() == 0 {
        locator.pop();
    }
    if errors != locator.len() - 1 || 2 * errors > ecc_len {
        return None;
    }

    // Chien search over byte positions; power p is position len-1-p.
    let n = block.len();
    let positions: Vec<usize> = (0..n).filter(|&p| eval_low_first(&locator, inv(pow2(p))) == 0).collect();
    if positions.len() != errors {
        return None;
    }

    // Forney: omega = S(x) * locator(x) mod x^t; derivative keeps odd terms.
    let mut omega = vec![0u8; ecc_len];
    for (i, &s) in synd.iter().enumerate() {
        for (j, &l) in locator.iter().enumerate() {
            if i + j < ecc_len {
                omega[i + j] ^= mul(s, l);
            }
        }
    }
    let derivative: Vec<u8> =
        locator.iter().enumerate().skip(1).map(|(i, &c)| if i % 2 == 1 { c } else { 0 }).collect();
    for &p in &positions {
        let x = pow2(p);
        let x_inv = inv(x);
        let denom = eval_low_first(&derivative, x_inv);
        if denom == 0 {
            return None;
        }
        let magnitude = mul(x, div(eval_low_first(&omega, x_inv), denom));
        block[n - 1 - p] ^= magnitude;
    }

    if syndromes(block, ecc_len).iter().any(|&s| s != 0) {
        return None;
    }
    Some(errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference multiplication without tables (shift-and-add, reduce by 0x11D).
    fn slow_mul(mut a: u8, mut b: u8) -> u8 {
        let mut out = 0u8;
        while b != 0 {
            if b & 1 != 0 {
                out ^= a;
            }
            let carry = a & 0x80 != 0;
            a <<= 1;
            if carry {
                a ^= 0x1D;
            }
            b >>= 1;
        }
        out
    }

    #[test]
    fn table_multiplication_matches_reference() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(mul(a, b), slow_mul(a, b));
            }
        }
        for a in 1..=255u8 {
            assert_eq!(mul(a, inv(a)), 1);
        }
    }

    #[test]
    fn known_generator() {
        // Degree-7 generator for version 1-L: x^7 + a^87 x^6 + a^229 x^5 + a^146 x^4
        //   + a^149 x^3 + a^238 x^2 + a^102 x + a^21
        let expected: Vec<u8> = [87, 229, 146, 149, 238, 102, 21].iter().map(|&e| pow2(e)).collect();
        assert_eq!(generator(7), expected);
    }

    #[test]
    fn known_ecc_bytes() {
        // Version 1-M "01234567" example codewords (ISO/IEC 18004 Annex I).
        let data = [0x10, 0x20, 0x0C, 0x56, 0x61, 0x80, 0xEC, 0x11, 0xEC, 0x11, 0xEC, 0x11, 0xEC, 0x11, 0xEC, 0x11];
        let ecc = remainder(&data, &generator(10));
        assert_eq!(ecc, [0xA5, 0x24, 0xD4, 0xC1, 0xED, 0x36, 0xC7, 0x87, 0x2C, 0x55]);
    }

    #[test]
    fn corrects_up_to_half_the_check_bytes() {
        let data: Vec<u8> = (0u8..40).map(|i| i.wrapping_mul(37).wrapping_add(5)).collect();
        let ecc_len = 16;
        let mut block = data.clone();
        block.extend(remainder(&data, &generator(ecc_len)));
        let clean = block.clone();

        assert_eq!(correct(&mut block.clone(), ecc_len), Some(0));

        for count in 1..=ecc_len / 2 {
            let mut damaged = clean.clone();
            for k in 0..count {
                let at = (k * 7 + 3) % damaged.len();
                damaged[at] ^= 0x5A ^ (k as u8);
            }
            assert_eq!(correct(&mut damaged, ecc_len), Some(count), "{count} errors");
            assert_eq!(damaged, clean);
        }

        let mut wrecked = clean.clone();
        for b in wrecked.iter_mut().take(12) {
            *b ^= 0xFF;
        }
        let result = correct(&mut wrecked, ecc_len);
        assert!(result.is_none() || wrecked != clean);
    }
}
