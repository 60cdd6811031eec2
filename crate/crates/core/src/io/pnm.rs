//! Portable float map (HDR) and binary portable pixmap (LDR) files.
//!
//! PFM: `PF\n{w} {h}\n-1.0\n`, then little-endian `f32` RGB rows from the
//! bottom row up. PPM: `P6\n{w} {h}\n255\n`, then 8-bit RGB rows from the
//! top.

use std::fs;
use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::Rgb;

pub fn encode_pfm(img: &Image<Rgb>) -> Vec<u8> {
    let mut out = format!("PF\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    let header = out.len();
    out.resize(header + img.len() * 12, 0);
    let mut k = header;
    for y in (0..img.height).rev() {
        for x in 0..img.width {
            for c in img.get(x, y).iter() {
                LittleEndian::write_f32(&mut out[k..k + 4], *c as f32);
                k += 4;
            }
        }
    }
    out
}

pub fn encode_ppm(img: &Image<[u8; 3]>) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().flatten());
    out
}

/// Splits `count` whitespace-separated header tokens off the front of
/// `bytes`; the body starts after the single whitespace byte that ends the
/// last token.
fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i || i >= bytes.len() {
            return Err(Error::Image("truncated header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    Ok((tokens, i + 1))
}

fn dims(w: &str, h: &str) -> Result<(usize, usize)> {
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Image(format!("bad dimension `{s}`")));
    Ok((parse(w)?, parse(h)?))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Image<Rgb>> {
    let (t, body) = header_tokens(bytes, 4)?;
    if t[0] != "PF" {
        return Err(Error::Image(format!("expected `PF` magic, found `{}`", t[0])));
    }
    let (w, h) = dims(&t[1], &t[2])?;
    let scale: f64 = t[3].parse().map_err(|_| Error::Image(format!("bad scale `{}`", t[3])))?;
    if scale >= 0.0 {
        return Err(Error::Image("big-endian float maps are not supported".into()));
    }
    let need = w * h * 12;
    let data = bytes.get(body..body + need).ok_or_else(|| {
        Error::Image(format!("truncated float map: need {need} bytes, have {}", bytes.len().saturating_sub(body)))
    })?;
    let mut img = Image::new(w, h, Rgb::zeros());
    for (k, px) in data.chunks_exact(12).enumerate() {
        let (x, y) = (k % w, h - 1 - k / w);
        *img.get_mut(x, y) = Rgb::from_fn(|c, _| LittleEndian::read_f32(&px[4 * c..]) as f64);
    }
    Ok(img)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Image<[u8; 3]>> {
    let (t, body) = header_tokens(bytes, 4)?;
    if t[0] != "P6" {
        return Err(Error::Image(format!("expected `P6` magic, found `{}`", t[0])));
    }
    if t[3] != "255" {
        return Err(Error::Image(format!("unsupported maxval `{}`", t[3])));
    }
    let (w, h) = dims(&t[1], &t[2])?;
    let need = w * h * 3;
    let data = bytes
        .get(body..body + need)
        .ok_or_else(|| Error::Image(format!("truncated pixmap: need {need} bytes")))?;
    let px = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok(Image::from_vec(w, h, px))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_pfm(path: impl AsRef<Path>, img: &Image<Rgb>) -> Result<()> {
    write(path.as_ref(), &encode_pfm(img))
}

pub fn write_ppm(path: impl AsRef<Path>, img: &Image<[u8; 3]>) -> Result<()> {
    write(path.as_ref(), &encode_ppm(img))
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Image<Rgb>> {
    let path = path.as_ref();
    decode_pfm(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Image<[u8; 3]>> {
    let path = path.as_ref();
    decode_ppm(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// `{prefix}_{frame:04}{suffix}.{ext}`.
pub fn frame_path(prefix: &str, frame: u64, suffix: &str, ext: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_{frame:04}{suffix}.{ext}"))
}

/// Writes `{prefix}_{frame:04}.pfm` and `.ppm`; returns both paths.
pub fn write_images(hdr: &Image<Rgb>, ldr: &Image<[u8; 3]>, prefix: &str, frame: u64) -> Result<(PathBuf, PathBuf)> {
    let (p, q) = (frame_path(prefix, frame, "", "pfm"), frame_path(prefix, frame, "", "ppm"));
    write_pfm(&p, hdr)?;
    write_ppm(&q, ldr)?;
    Ok((p, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{tonemap, to_ldr};

    #[test]
    fn black_pixel_float_map() {
        let bytes = encode_pfm(&Image::new(1, 1, Rgb::zeros()));
        let header = b"PF\n1 1\n-1.0\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0u8; 12]);
    }

    #[test]
    fn float_map_rows_are_bottom_up() {
        let mut img = Image::new(2, 2, Rgb::zeros());
        *img.get_mut(0, 0) = Rgb::new(1.0, 2.0, 3.0);
        let bytes = encode_pfm(&img);
        let body = &bytes[bytes.len() - 48..];
        // Top-left pixel is the first pixel of the last stored row.
        assert_eq!(LittleEndian::read_f32(&body[24..]), 1.0);
        assert_eq!(LittleEndian::read_f32(&body[32..]), 3.0);
        assert_eq!(decode_pfm(&bytes).unwrap(), img);
    }

    #[test]
    fn pixmap_layout_and_round_trip() {
        let img = Image::from_vec(2, 1, vec![[1, 2, 3], [250, 251, 252]]);
        let bytes = encode_ppm(&img);
        assert_eq!(bytes, b"P6\n2 1\n255\n\x01\x02\x03\xfa\xfb\xfc");
        assert_eq!(decode_ppm(&bytes).unwrap(), img);
    }

    #[test]
    fn files_round_trip_and_ldr_is_tonemapped_hdr() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("sub/frame");
        let hdr = Image::from_vec(3, 2, (0..6).map(|i| Rgb::new(i as f64 * 0.25, 0.125, 10.0)).collect());
        let ldr = to_ldr(&hdr);
        let (p, q) = write_images(&hdr, &ldr, prefix.to_str().unwrap(), 7).unwrap();
        assert!(p.ends_with("frame_0007.pfm"));
        assert_eq!(read_pfm(&p).unwrap(), hdr);
        let back = read_ppm(&q).unwrap();
        assert_eq!(back, ldr);
        for (h, l) in hdr.data.iter().zip(&back.data) {
            for c in 0..3 {
                assert!((tonemap(h[c]) * 255.0 - l[c] as f64).abs() <= 0.5);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_pfm(b"P6\n1 1\n255\n\0\0\0").is_err());
        assert!(decode_pfm(b"PF\n1 1\n1.0\n").is_err());
        assert!(decode_pfm(b"PF\n2 2\n-1.0\n\0\0").is_err());
        assert!(decode_ppm(b"P6\n1 1\n65535\n").is_err());
    }
}
