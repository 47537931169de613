use crate::error::{Error, Result};
use crate::resample;
use crate::tensor::Tensor;
use crate::viz::RgbImage;

const MIN_RESOLUTION: usize = 8;

fn planes(image: &RgbImage) -> [Vec<f64>; 3] {
    let mut out: [Vec<f64>; 3] = Default::default();
    for px in image.pixels().chunks_exact(3) {
        for (plane, &v) in out.iter_mut().zip(px) {
            plane.push(f64::from(v));
        }
    }
    out
}

/// `1 x 3 x H x W` tensor of `pixel / 255`, channel-first.
pub fn image_to_tensor(image: &RgbImage) -> Tensor {
    let data = planes(image).concat().into_iter().map(|v| v / 255.0).collect();
    Tensor::new(vec![1, 3, image.height(), image.width()], data).expect("image dimensions are positive")
}

/// Bilinear resize to `resolution x resolution`, scaled to [0, 1].
pub fn preprocess(image: &RgbImage, resolution: usize) -> Result<Tensor> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!("resolution {resolution} is below {MIN_RESOLUTION}")));
    }
    let (h, w) = (image.height(), image.width());
    let data: Vec<f64> = planes(image)
        .iter()
        .flat_map(|p| resample::bilinear(p, h, w, resolution, resolution))
        .map(|v| v / 255.0)
        .collect();
    Tensor::new(vec![1, 3, resolution, resolution], data)
}

/// Bilinear resize of the bytes themselves, rounded back to 8 bits.
pub fn resize_image(image: &RgbImage, height: usize, width: usize) -> Result<RgbImage> {
    if (height, width) == (image.height(), image.width()) {
        return Ok(image.clone());
    }
    let (h, w) = (image.height(), image.width());
    let resized: Vec<Vec<f64>> = planes(image).iter().map(|p| resample::bilinear(p, h, w, height, width)).collect();
    let pixels = (0..height * width)
        .flat_map(|i| resized.iter().map(move |p| p[i].round().clamp(0.0, 255.0) as u8))
        .collect();
    RgbImage::new(height, width, pixels)
}
