//! PNG input/output for 8- and 16-bit RGB images normalised to `[0, 1]`.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

fn image_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads a PNG as a 3-channel map. 8-bit data is divided by 255, 16-bit data
/// by 65535; grey or alpha images are converted to RGB.
pub fn read_png(path: &Path) -> Result<FeatureMap> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    let sixteen = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    );
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = if sixteen {
        img.to_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect()
    } else {
        img.to_rgb8().into_raw().into_iter().map(|v| v as f64 / 255.0).collect()
    };
    FeatureMap::new(h, w, 3, data).map_err(|e| image_err(path, e))
}

/// Writes a 1- or 3-channel map with values in `[0, 1]` as 8- or 16-bit PNG.
pub fn write_png(path: &Path, map: &FeatureMap, sixteen_bit: bool) -> Result<()> {
    let (w, h) = (map.width() as u32, map.height() as u32);
    let q = |v: f64, max: f64| (v.clamp(0.0, 1.0) * max).round();
    let result = match (map.depth(), sixteen_bit) {
        (3, false) => {
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, map.data().iter().map(|&v| q(v, 255.0) as u8).collect())
                .map(DynamicImage::ImageRgb8)
        }
        (3, true) => {
            ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, map.data().iter().map(|&v| q(v, 65535.0) as u16).collect())
                .map(DynamicImage::ImageRgb16)
        }
        (1, false) => {
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, map.data().iter().map(|&v| q(v, 255.0) as u8).collect())
                .map(DynamicImage::ImageLuma8)
        }
        (1, true) => {
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, map.data().iter().map(|&v| q(v, 65535.0) as u16).collect())
                .map(DynamicImage::ImageLuma16)
        }
        (d, _) => return Err(Error::contract(format!("cannot write a {d}-channel image as PNG"))),
    };
    let img = result.ok_or_else(|| image_err(path, "buffer size mismatch"))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_8_and_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let map = FeatureMap::from_fn(5, 7, 3, |y, x, c| ((y * 7 + x) * 3 + c) as f64 / 104.0);
        for sixteen in [false, true] {
            let p = dir.path().join(format!("img{sixteen}.png"));
            write_png(&p, &map, sixteen).unwrap();
            let back = read_png(&p).unwrap();
            let tol = if sixteen { 1.0 / 65535.0 } else { 1.0 / 255.0 };
            assert_eq!((back.height(), back.width(), back.depth()), (5, 7, 3));
            for (a, b) in back.data().iter().zip(map.data()) {
                assert!((a - b).abs() <= tol / 2.0 + 1e-12);
            }
        }
    }

    #[test]
    fn grey_png_is_expanded_to_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        write_png(&p, &FeatureMap::filled(2, 3, 1, 1.0), false).unwrap();
        let back = read_png(&p).unwrap();
        assert_eq!(back.depth(), 3);
        assert!(back.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn unreadable_file_is_an_image_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.png");
        std::fs::write(&p, b"not a png").unwrap();
        assert!(matches!(read_png(&p), Err(Error::Image { .. })));
    }
}
