//! Binary portable graymap (P5) images for bitmaps and heatmaps.

use xaifuzz_core::digit::Bitmap;
use xaifuzz_core::xai::Heatmap;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("not a binary graymap")]
    BadMagic,
    #[error("malformed header")]
    Header,
    #[error("only 8-bit graymaps are supported")]
    Depth,
    #[error("pixel data truncated")]
    Truncated,
}

fn encode(width: usize, height: usize, values: impl Iterator<Item = f64>) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn encode_bitmap(b: &Bitmap) -> Vec<u8> {
    encode(b.width, b.height, b.pixels.iter().map(|&p| p as f64))
}

pub fn encode_heatmap(h: &Heatmap) -> Vec<u8> {
    encode(h.width(), h.height(), h.values().iter().copied())
}

/// Reads a P5 graymap back into `[0, 1]` intensities.
pub fn decode(bytes: &[u8]) -> Result<Bitmap, PgmError> {
    if !bytes.starts_with(b"P5") {
        return Err(PgmError::BadMagic);
    }
    let mut fields = Vec::new();
    let mut pos = 2;
    while fields.len() < 3 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        let n: usize = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PgmError::Header)?;
        fields.push(n);
    }
    if fields[2] != 255 {
        return Err(PgmError::Depth);
    }
    // Exactly one whitespace byte separates the header from the pixels.
    pos += 1;
    let (w, h) = (fields[0], fields[1]);
    let data = bytes.get(pos..pos + w * h).ok_or(PgmError::Truncated)?;
    let pixels = data.iter().map(|&b| b as f32 / 255.0).collect();
    Bitmap::new(w, h, pixels).map_err(|_| PgmError::Truncated)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitmap_round_trip_at_8_bits() {
        let px: Vec<f32> = (0..12).map(|i| i as f32 / 11.0).collect();
        let b = Bitmap::new(4, 3, px).unwrap();
        let bytes = encode_bitmap(&b);
        assert!(bytes.starts_with(b"P5\n4 3\n255\n"));
        let back = decode(&bytes).unwrap();
        assert_eq!((back.width, back.height), (4, 3));
        for (a, b) in back.pixels.iter().zip(&b.pixels) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([0, 255]);
        assert_eq!(decode(&bytes).unwrap().pixels, vec![0.0, 1.0]);
        assert_eq!(decode(b"P2\n1 1\n255\n0"), Err(PgmError::BadMagic));
        assert_eq!(decode(b"P5\n2 2\n255\n\x00"), Err(PgmError::Truncated));
        assert_eq!(decode(b"P5\n1 1\n65535\n\x00\x00"), Err(PgmError::Depth));
    }

    #[test]
    fn heatmaps_use_full_range() {
        let h = Heatmap::from_normalized(1, 3, vec![0.0, 0.5, 1.0]);
        assert_eq!(&encode_heatmap(&h)[11..], &[0, 128, 255]);
    }
}
