//! Image buffers, Netpbm codecs, heatmap colorization and overlays.

mod colormap;
mod image;
mod pnm;

pub use colormap::{colorize, colorize_value, superimpose, DEFAULT_OVERLAY_ALPHA};
pub use image::{GrayImage, RgbImage};
pub use pnm::{decode_pgm, decode_ppm, encode_pgm, encode_ppm, read_ppm, write_pgm, write_ppm};
