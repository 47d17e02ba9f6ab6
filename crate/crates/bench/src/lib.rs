//! Fixture builders shared by the benchmark targets.

use speckle_core::{generate_speckle, GrayImage, SampleWindow, SpeckleParams};

/// A deterministic speckle image at the preset mean level.
pub fn speckle_image(side: u32, contrast: f64, grain_radius: f64, seed: u64) -> GrayImage {
    generate_speckle(&SpeckleParams {
        width: side,
        height: side,
        target_contrast: contrast,
        grain_radius,
        mean_level: 30.0,
        seed,
    })
    .expect("valid parameters")
    .image
}

/// Cut a size x size window out of the image's top-left corner.
pub fn corner_window(img: &GrayImage, size: u32) -> SampleWindow {
    SampleWindow::cut(img, 0, 0, size, "bench", 0).expect("window fits")
}
