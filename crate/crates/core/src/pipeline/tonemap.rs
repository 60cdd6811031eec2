use crate::image::Image;
use crate::math::Rgb;

pub const GAMMA: f64 = 2.2;

/// Reinhard `x / (1 + x)` followed by display gamma. Negative and NaN
/// input map to 0.
pub fn tonemap(x: f64) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    (x / (1.0 + x)).powf(1.0 / GAMMA)
}

pub fn tonemap_image(hdr: &Image<Rgb>) -> Image<Rgb> {
    hdr.map(|c| c.map(tonemap))
}

/// 8-bit display values, rounded to nearest.
pub fn to_ldr(hdr: &Image<Rgb>) -> Image<[u8; 3]> {
    hdr.map(|c| std::array::from_fn(|i| (tonemap(c[i]) * 255.0 + 0.5).floor().min(255.0) as u8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn closed_form_points() {
        assert_eq!(tonemap(0.0), 0.0);
        assert!((tonemap(1.0) - 0.5f64.powf(1.0 / 2.2)).abs() < 1e-12);
        assert!((tonemap(1.0) - 0.7297).abs() < 1e-4);
    }

    #[test]
    fn monotone_and_bounded() {
        let mut rng = seeded(4);
        for _ in 0..10_000 {
            let a: f64 = rng.random_range(0.0..100.0);
            let b: f64 = rng.random_range(0.0..100.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            assert!(tonemap(lo) <= tonemap(hi));
            assert!((0.0..1.0).contains(&tonemap(hi)));
        }
        assert_eq!(tonemap(-1.0), 0.0);
        assert_eq!(tonemap(f64::NAN), 0.0);
    }

    #[test]
    fn ldr_rounds_tonemapped_value() {
        let hdr = Image::new(1, 1, Rgb::new(0.0, 1.0, 1e9));
        let ldr = to_ldr(&hdr);
        assert_eq!(ldr.data[0], [0, 186, 255]);
    }
}
