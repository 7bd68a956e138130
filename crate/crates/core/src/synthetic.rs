//! Seeded Mondrian scenes: piecewise-constant reflectance times smooth grey
//! shading, with both ground-truth layers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imgcore::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MondrianConfig {
    pub width: usize,
    pub height: usize,
    pub min_colours: usize,
    pub max_colours: usize,
    pub rectangles: usize,
    pub bumps: usize,
    /// Shading floor before the bumps are added.
    pub ambient: f64,
}

impl Default for MondrianConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            min_colours: 3,
            max_colours: 6,
            rectangles: 9,
            bumps: 3,
            ambient: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MondrianScene {
    pub image: ImageBuffer,
    pub reflectance: ImageBuffer,
    /// One channel, peak 1.
    pub shading: ImageBuffer,
    /// Palette index per pixel.
    pub labels: Vec<usize>,
    pub colours: usize,
}

fn palette(rng: &mut ChaCha8Rng, count: usize) -> Vec<[f64; 3]> {
    let mut out: Vec<[f64; 3]> = Vec::with_capacity(count);
    while out.len() < count {
        let c = [0.0; 3].map(|_| rng.gen_range(0.15..0.9));
        let distinct = out
            .iter()
            .all(|o| o.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) >= 0.2);
        if distinct {
            out.push(c);
        }
    }
    out
}

fn labels(rng: &mut ChaCha8Rng, cfg: &MondrianConfig, colours: usize) -> Vec<usize> {
    let (w, h) = (cfg.width, cfg.height);
    loop {
        let mut lab = vec![0; w * h];
        for r in 0..cfg.rectangles {
            let colour = if r + 1 < colours { r + 1 } else { rng.gen_range(0..colours) };
            let (rw, rh) = (rng.gen_range(w / 5..=w / 2), rng.gen_range(h / 5..=h / 2));
            let (x0, y0) = (rng.gen_range(0..=w - rw), rng.gen_range(0..=h - rh));
            for y in y0..y0 + rh {
                lab[y * w + x0..y * w + x0 + rw].fill(colour);
            }
        }
        // Every colour must keep a visible region after overdraw.
        let mut area = vec![0usize; colours];
        for &l in &lab {
            area[l] += 1;
        }
        if area.iter().all(|&a| a >= 16) {
            return lab;
        }
    }
}

fn shading(rng: &mut ChaCha8Rng, cfg: &MondrianConfig) -> Vec<f64> {
    let (w, h) = (cfg.width, cfg.height);
    let diag = ((w * w + h * h) as f64).sqrt();
    let bumps: Vec<(f64, f64, f64, f64)> = (0..cfg.bumps)
        .map(|_| {
            (
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(0.15..0.35) * diag,
                rng.gen_range(0.4..1.0),
            )
        })
        .collect();
    let mut s: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            cfg.ambient
                + bumps
                    .iter()
                    .map(|&(cx, cy, r, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * r * r)).exp())
                    .sum::<f64>()
        })
        .collect();
    let hi = s.iter().copied().fold(0.0, f64::max);
    s.iter_mut().for_each(|v| *v /= hi);
    s
}

/// Generates one scene. The same seed and config always give the same scene.
pub fn mondrian(seed: u64, cfg: &MondrianConfig) -> Result<MondrianScene> {
    let (w, h) = (cfg.width, cfg.height);
    if w < 10 || h < 10 {
        return Err(Error::Dimension(format!("Mondrian scenes need at least 10x10, got {w}x{h}")));
    }
    if cfg.min_colours < 2 || cfg.min_colours > cfg.max_colours || cfg.rectangles + 1 < cfg.max_colours {
        return Err(Error::Param("inconsistent Mondrian colour counts".into()));
    }
    if !(cfg.ambient > 0.0) {
        return Err(Error::Param("ambient shading must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let colours = rng.gen_range(cfg.min_colours..=cfg.max_colours);
    let pal = palette(&mut rng, colours);
    let lab = labels(&mut rng, cfg, colours);
    let shade = shading(&mut rng, cfg);

    let reflectance = ImageBuffer::from_fn(w, h, 3, |x, y, c| pal[lab[y * w + x]][c])?;
    let shading = ImageBuffer::from_fn(w, h, 1, |x, y, _| shade[y * w + x])?;
    let image = ImageBuffer::from_fn(w, h, 3, |x, y, c| pal[lab[y * w + x]][c] * shade[y * w + x])?;
    Ok(MondrianScene {
        image,
        reflectance,
        shading,
        labels: lab,
        colours,
    })
}

/// `count` scenes seeded `base_seed`, `base_seed + 1`, ...
pub fn mondrian_suite(count: usize, base_seed: u64, cfg: &MondrianConfig) -> Result<Vec<MondrianScene>> {
    (0..count as u64).map(|k| mondrian(base_seed + k, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_multiply() {
        let s = mondrian(3, &MondrianConfig::default()).unwrap();
        for i in 0..64 * 64 {
            for c in 0..3 {
                let want = s.reflectance.pixel(i)[c] * s.shading.pixel(i)[0];
                assert_eq!(s.image.pixel(i)[c], want);
            }
        }
    }

    #[test]
    fn colour_count_in_range() {
        let cfg = MondrianConfig::default();
        for seed in 0..20 {
            let s = mondrian(seed, &cfg).unwrap();
            assert!((3..=6).contains(&s.colours));
            let mut seen = vec![false; s.colours];
            s.labels.iter().for_each(|&l| seen[l] = true);
            assert!(seen.iter().all(|&b| b));
        }
    }

    #[test]
    fn shading_is_smooth_and_bounded() {
        let s = mondrian(11, &MondrianConfig::default()).unwrap();
        let (lo, hi) = s.shading.min_max();
        assert!((hi - 1.0).abs() < 1e-12);
        assert!(lo > 0.2);
        for y in 0..64 {
            for x in 1..64 {
                assert!((s.shading.get(x, y, 0) - s.shading.get(x - 1, y, 0)).abs() < 0.1);
            }
        }
    }

    #[test]
    fn seeded() {
        let cfg = MondrianConfig::default();
        assert_eq!(mondrian(5, &cfg).unwrap().image, mondrian(5, &cfg).unwrap().image);
        assert_ne!(mondrian(5, &cfg).unwrap().image, mondrian(6, &cfg).unwrap().image);
    }
}
