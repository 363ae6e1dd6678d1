//! LSD radix sort of Gaussian-tile pairs on the composite key
//! `(tile, depth, gaussian)`.

use super::TilePair;

/// Order-preserving map from `f32` to `u32` (negative values flip all bits,
/// non-negative values flip the sign bit).
#[inline]
pub fn depth_key(depth: f32) -> u32 {
    let bits = depth.to_bits();
    if bits & 0x8000_0000 != 0 {
        !bits
    } else {
        bits | 0x8000_0000
    }
}

#[inline]
fn word(p: &TilePair, w: usize) -> u32 {
    match w {
        0 => p.gaussian,
        1 => depth_key(p.depth),
        _ => p.tile,
    }
}

/// Sort ascending by tile, then depth, then Gaussian index.
///
/// Twelve 8-bit passes from the least significant byte of the Gaussian index
/// to the most significant byte of the tile id; passes whose digit is
/// constant across the input are skipped.
pub fn sort_pairs(pairs: &[TilePair]) -> Vec<TilePair> {
    let n = pairs.len();
    let mut src = pairs.to_vec();
    if n < 2 {
        return src;
    }
    let mut dst = vec![TilePair::default(); n];
    let mut counts = [0usize; 256];
    for w in 0..3 {
        for shift in [0u32, 8, 16, 24] {
            counts.fill(0);
            for p in &src {
                counts[((word(p, w) >> shift) & 0xff) as usize] += 1;
            }
            if counts.contains(&n) {
                continue;
            }
            let mut sum = 0;
            for c in counts.iter_mut() {
                let here = *c;
                *c = sum;
                sum += here;
            }
            for p in &src {
                let d = ((word(p, w) >> shift) & 0xff) as usize;
                dst[counts[d]] = *p;
                counts[d] += 1;
            }
            std::mem::swap(&mut src, &mut dst);
        }
    }
    src
}
