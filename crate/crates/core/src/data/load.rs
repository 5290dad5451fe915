use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use super::{read_xyz_file, MultimodalSample, SampleInfo};
use crate::{Error, Result};

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })
}

/// Loads a PNG image, a CFMX coordinate raster and an optional PNG mask.
///
/// RGB values are rescaled to `[0, 1]` whatever the PNG bit depth; any
/// nonzero mask pixel counts as anomalous.
pub fn load_sample(
    info: SampleInfo,
    rgb_path: impl AsRef<Path>,
    xyz_path: impl AsRef<Path>,
    gt_path: Option<&Path>,
) -> Result<MultimodalSample> {
    let rgb = open_image(rgb_path.as_ref())?.to_rgb32f();
    let xyz = read_xyz_file(xyz_path.as_ref())?;
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    if (xyz.height, xyz.width) != (h, w) {
        return Err(Error::Registration(format!(
            "rgb is {h}x{w} but xyz is {}x{}",
            xyz.height, xyz.width
        )));
    }
    let gt = match gt_path {
        Some(p) => {
            let mask = open_image(p)?.to_luma8();
            if (mask.height() as usize, mask.width() as usize) != (h, w) {
                return Err(Error::Registration(format!(
                    "gt mask is {}x{} but rgb is {h}x{w}",
                    mask.height(),
                    mask.width()
                )));
            }
            Some(mask.pixels().map(|p| p.0[0] > 0).collect())
        }
        None => None,
    };
    let rgb = rgb.into_raw().into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    MultimodalSample::new(info, h, w, rgb, xyz.data, gt)
}

pub fn write_rgb_png(path: impl AsRef<Path>, height: usize, width: usize, rgb: &[f32]) -> Result<()> {
    let path = path.as_ref();
    let img: RgbImage = ImageBuffer::from_fn(width as u32, height as u32, |x, y| {
        let i = (y as usize * width + x as usize) * 3;
        Rgb([0, 1, 2].map(|c| (rgb[i + c].clamp(0.0, 1.0) * 255.0).round() as u8))
    });
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_mask_png(path: impl AsRef<Path>, height: usize, width: usize, mask: &[bool]) -> Result<()> {
    let path = path.as_ref();
    let img: GrayImage = ImageBuffer::from_fn(width as u32, height as u32, |x, y| {
        Luma([if mask[y as usize * width + x as usize] { 255 } else { 0 }])
    });
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{write_xyz_file, Label, XyzRaster};

    fn info() -> SampleInfo {
        SampleInfo::new("a", "c", "test", Label::Anomalous)
    }

    #[test]
    fn loads_png_and_xyz() {
        let dir = tempfile::tempdir().unwrap();
        let rgb: Vec<f32> = (0..48).map(|i| (i * 5) as f32 / 255.0).collect();
        write_rgb_png(dir.path().join("rgb.png"), 4, 4, &rgb).unwrap();
        let mut xyz = vec![1.0f32; 48];
        xyz[6] = f32::NAN;
        write_xyz_file(&XyzRaster { height: 4, width: 4, data: xyz }, dir.path().join("xyz.cfmx")).unwrap();
        let mut mask = vec![false; 16];
        mask[3] = true;
        write_mask_png(dir.path().join("gt.png"), 4, 4, &mask).unwrap();

        let gt = dir.path().join("gt.png");
        let s = load_sample(info(), dir.path().join("rgb.png"), dir.path().join("xyz.cfmx"), Some(gt.as_path())).unwrap();
        assert_eq!(s.valid_count(), 15);
        assert_eq!(s.gt_mask().unwrap(), mask.as_slice());
        for (a, b) in s.rgb().iter().zip(&rgb) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn size_mismatch_is_a_registration_error() {
        let dir = tempfile::tempdir().unwrap();
        write_rgb_png(dir.path().join("rgb.png"), 4, 4, &[0.2; 48]).unwrap();
        write_xyz_file(
            &XyzRaster {
                height: 5,
                width: 5,
                data: vec![1.0; 75],
            },
            dir.path().join("xyz.cfmx"),
        )
        .unwrap();
        let err = load_sample(info(), dir.path().join("rgb.png"), dir.path().join("xyz.cfmx"), None).unwrap_err();
        assert!(matches!(err, Error::Registration(_)));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_sample(info(), dir.path().join("nope.png"), dir.path().join("x.cfmx"), None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
