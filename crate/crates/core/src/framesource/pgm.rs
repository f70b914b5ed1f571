//! Binary PGM (`P5`, maxval 255) reading and writing.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Decodes a `P5` image with maxval 255 into an 8-bit grid.
pub fn decode(bytes: &[u8]) -> Result<Grid<u8>> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::Format(format!(
            "bad PGM magic {:?}, expected P5",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = parse_uint(next_token(bytes, &mut pos)?, "width")?;
    let height = parse_uint(next_token(bytes, &mut pos)?, "height")?;
    let maxval = parse_uint(next_token(bytes, &mut pos)?, "maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Format("PGM header not terminated by whitespace".into())),
    }
    let len = width * height;
    let raster = bytes
        .get(pos..pos + len)
        .ok_or_else(|| Error::Format(format!("PGM raster truncated: need {len} bytes")))?;
    Ok(Grid::from_vec(width, height, raster.to_vec()).expect("length checked"))
}

pub fn encode(image: &Grid<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.as_slice());
    out
}

pub fn read(path: &Path) -> Result<Grid<u8>> {
    let bytes = fs::read(path).map_err(|source| Error::Ingestion {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write(path: &Path, image: &Grid<u8>) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode(image)).map_err(|e| Error::io(path, e))
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Format("PGM header truncated".into())),
        }
    }
    let start = *pos;
    while let Some(&b) = bytes.get(*pos) {
        if b.is_ascii_whitespace() || b == b'#' {
            break;
        }
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn parse_uint(token: &[u8], what: &str) -> Result<usize> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            Error::Format(format!(
                "bad PGM {what} {:?}",
                String::from_utf8_lossy(token)
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 # inline\n2\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4]);
        let img = decode(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.as_slice(), &[1, 2, 3, 4]);
    }

    #[test]
    fn rejects_ascii_pgm_and_16_bit() {
        assert!(matches!(decode(b"P2\n1 1\n255\n0"), Err(Error::Format(_))));
        assert!(matches!(
            decode(b"P5\n1 1\n65535\n\0\0"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn truncated_raster_is_a_format_error() {
        assert!(matches!(decode(b"P5\n4 4\n255\n\x01\x02"), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(w in 1usize..24, h in 1usize..24, seed in any::<u64>()) {
            let img = Grid::from_fn(w, h, |x, y| (seed.wrapping_mul(31).wrapping_add((x * 7 + y * 13) as u64) % 256) as u8);
            prop_assert_eq!(decode(&encode(&img)).unwrap(), img);
        }
    }
}
