//! Minimal bar charts written as PNG.

use std::path::Path;

use image::{Rgb, RgbImage};

const MARGIN: u32 = 8;
const PALETTE: [Rgb<u8>; 4] = [Rgb([31, 119, 180]), Rgb([214, 39, 40]), Rgb([44, 160, 44]), Rgb([148, 103, 189])];

/// Grouped bars: bin `i` of every series is drawn side by side, series in
/// palette order. Heights share one linear scale starting at 0.
pub fn bar_chart(series: &[&[f64]], plot_height: u32, bar_width: u32) -> RgbImage {
    let bins = series.iter().map(|s| s.len()).max().unwrap_or(0) as u32;
    let group = bar_width * series.len().max(1) as u32;
    let width = 2 * MARGIN + bins * group;
    let height = 2 * MARGIN + plot_height;
    let mut img = RgbImage::from_pixel(width.max(1), height, Rgb([255, 255, 255]));
    let top = series.iter().flat_map(|s| s.iter()).copied().filter(|v| v.is_finite()).fold(0.0f64, f64::max);
    let base = MARGIN + plot_height;
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for (i, &v) in s.iter().enumerate() {
            if !(v > 0.0 && top > 0.0) {
                continue;
            }
            let h = ((v / top) * f64::from(plot_height)).round().max(1.0) as u32;
            let x0 = MARGIN + i as u32 * group + k as u32 * bar_width;
            for x in x0..x0 + bar_width {
                for y in base - h..base {
                    img.put_pixel(x, y, color);
                }
            }
        }
    }
    for x in MARGIN - 1..width - MARGIN + 1 {
        img.put_pixel(x, base, Rgb([0, 0, 0]));
    }
    img
}

pub fn save_bar_chart(path: &Path, series: &[&[f64]], plot_height: u32, bar_width: u32) -> Result<(), image::ImageError> {
    bar_chart(series, plot_height, bar_width).save_with_format(path, image::ImageFormat::Png)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tallest_bar_fills_the_plot() {
        let img = bar_chart(&[&[1.0, 2.0], &[0.0, 0.5]], 20, 3);
        assert_eq!(img.dimensions(), (2 * MARGIN + 12, 2 * MARGIN + 20));
        // Bar for series 0, bin 1 reaches the top row of the plot area.
        assert_eq!(*img.get_pixel(MARGIN + 6, MARGIN), PALETTE[0]);
        // A zero value draws nothing.
        assert_eq!(*img.get_pixel(MARGIN + 3, MARGIN + 19), Rgb([255, 255, 255]));
    }
}
