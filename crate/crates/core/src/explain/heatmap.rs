use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::resample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Saliency,
    Cam,
    GradCam,
    Ensemble,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Saliency => "saliency",
            Method::Cam => "cam",
            Method::GradCam => "gradcam",
            Method::Ensemble => "ensemble",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saliency" => Ok(Method::Saliency),
            "cam" => Ok(Method::Cam),
            "gradcam" => Ok(Method::GradCam),
            "ensemble" => Ok(Method::Ensemble),
            other => Err(Error::InvalidArgument(format!("unknown heatmap method {other:?}"))),
        }
    }
}

/// Single-channel spatial explanation map.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    method: Method,
    normalized: bool,
    target_class: usize,
}

impl Heatmap {
    pub fn new(height: usize, width: usize, values: Vec<f64>, method: Method, target_class: usize) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::shape("heatmap", format!("{height}x{width} with {} values", values.len())));
        }
        Ok(Heatmap { height, width, values, method, normalized: false, target_class })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn target_class(&self) -> usize {
        self.target_class
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Min-max rescale to [0, 1]; a constant map becomes all zeros.
    pub fn normalized(&self) -> Heatmap {
        let (lo, hi) = (self.min(), self.max());
        let values = if hi > lo {
            let span = hi - lo;
            self.values.iter().map(|v| (v - lo) / span).collect()
        } else {
            vec![0.0; self.values.len()]
        };
        Heatmap { values, normalized: true, ..self.clone() }
    }

    /// Bilinear, corner-aligned enlargement. Normalization state is
    /// dropped unless the map is already at the target size.
    pub fn upsample(&self, height: usize, width: usize) -> Result<Heatmap> {
        if height < self.height || width < self.width {
            return Err(Error::InvalidArgument(format!(
                "upsample target {height}x{width} is smaller than source {}x{}",
                self.height, self.width
            )));
        }
        if (height, width) == (self.height, self.width) {
            return Ok(self.clone());
        }
        let values = resample::bilinear(&self.values, self.height, self.width, height, width);
        Ok(Heatmap { height, width, values, normalized: false, ..self.clone() })
    }
}

pub fn normalize_map(map: &Heatmap) -> Heatmap {
    map.normalized()
}

pub fn upsample(map: &Heatmap, height: usize, width: usize) -> Result<Heatmap> {
    map.upsample(height, width)
}
