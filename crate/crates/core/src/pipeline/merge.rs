use crate::error::{Error, Result};
use crate::imgcore::{distance_transform, gaussian_filter, lab_to_linear_rgb, linear_rgb_to_lab, Domain, ImageBuffer};

/// Linear-domain outputs of both stages for one image.
#[derive(Debug, Clone, Copy)]
pub struct StageComponents<'a> {
    pub image: &'a ImageBuffer,
    /// Stage-2 reflectance.
    pub reflectance: &'a ImageBuffer,
    /// Stage-2 shading `I / R`, 3 channels.
    pub shading: &'a ImageBuffer,
    /// Stage-1 reflectance `exp(rho)`, 3 channels.
    pub rho: &'a ImageBuffer,
    /// Stage-1 shading `exp(sigma)`, 1 or 3 channels.
    pub sigma: &'a ImageBuffer,
}

impl StageComponents<'_> {
    fn check(&self) -> Result<ImageBuffer> {
        let sigma = self.sigma.broadcast3();
        for other in [self.reflectance, self.shading, self.rho, &sigma] {
            self.image.check_same_shape(other)?;
        }
        if self.image.channels() != 3 {
            return Err(Error::Contract("merging needs 3-channel components".into()));
        }
        Ok(sigma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedComponents {
    pub reflectance: ImageBuffer,
    pub shading: ImageBuffer,
    /// Smoothed fractional residue `C`.
    pub illumination: ImageBuffer,
}

fn zip3(a: &ImageBuffer, b: &ImageBuffer, c: &ImageBuffer, f: impl Fn(f64, f64, f64) -> f64) -> Result<ImageBuffer> {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .zip(c.data())
        .map(|((x, y), z)| f(*x, *y, *z))
        .collect();
    a.with_data(data)
}

/// Combines both stages through their fractional residues.
///
/// `C1 = I / (R sigma)`, `C2 = I / (rho S)`, `C = G((C1 + C2) / 2)`; the merged
/// shading is the mean of `S / C` and `sigma C`, and the merged reflectance is
/// `I` divided by it. Denominators are clamped at `eps`.
pub fn merge_components(parts: &StageComponents<'_>, blur: f64, eps: f64) -> Result<MergedComponents> {
    let sigma = parts.check()?;
    let img = parts.image;
    let c1 = zip3(img, parts.reflectance, &sigma, |i, r, s| i / (r * s).max(eps))?;
    let c2 = zip3(img, parts.rho, parts.shading, |i, r, s| i / (r * s).max(eps))?;
    let mean = c1.zip_map(&c2, |a, b| 0.5 * (a + b))?;
    let illumination = gaussian_filter(&mean, blur);
    let shading = zip3(parts.shading, &sigma, &illumination, |s, sg, c| 0.5 * (s / c.max(eps) + sg * c))?;
    let reflectance = img.zip_map(&shading, |i, s| i / s.max(eps))?;
    Ok(MergedComponents {
        reflectance,
        shading,
        illumination,
    })
}

/// Global min-max rescale to `[0, 1]`; a flat image maps to 0.5.
pub fn rescale_unit(img: &ImageBuffer) -> Result<ImageBuffer> {
    let (lo, hi) = img.min_max();
    if hi > lo {
        img.map(|v| (v - lo) / (hi - lo))
    } else {
        img.map(|_| 0.5)
    }
}

/// Intensity relighting from the disagreement of the two stages.
///
/// `E1 = mean(rho - R, S - sigma)`, `E2 = mean(rho / R, S / sigma)`, output
/// `rescale(I + G(E1) + scale G(E2))`.
pub fn relight_intensity(parts: &StageComponents<'_>, blur: f64, scale: f64, eps: f64) -> Result<ImageBuffer> {
    let sigma = parts.check()?;
    let additive = {
        let a = parts.rho.zip_map(parts.reflectance, |p, r| p - r)?;
        let b = parts.shading.zip_map(&sigma, |s, g| s - g)?;
        a.zip_map(&b, |x, y| 0.5 * (x + y))?
    };
    let multiplicative = {
        let a = parts.rho.zip_map(parts.reflectance, |p, r| p / r.max(eps))?;
        let b = parts.shading.zip_map(&sigma, |s, g| s / g.max(eps))?;
        a.zip_map(&b, |x, y| 0.5 * (x + y))?
    };
    let e1 = gaussian_filter(&additive, blur);
    let e2 = gaussian_filter(&multiplicative, blur);
    let sum = zip3(parts.image, &e1, &e2, |i, a, m| i + a + scale * m)?;
    rescale_unit(&sum)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recolored {
    pub image: ImageBuffer,
    /// Per-pixel shift strength in `[0, 1]`.
    pub strength: Vec<f64>,
    pub warnings: Vec<String>,
}

fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((p / 100.0) * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Tints the illumination near the brightest shading regions.
///
/// Pixels whose shading luminance reaches the `percentile` form the light
/// source mask. Each pixel's shading chroma `(a, b)` is offset by
/// `s * shift_ab` with `s = min(L / L_p, 1) * exp(-dist / (decay * diagonal))`,
/// `dist` the distance to the mask, then recombined with the reflectance.
pub fn recolor_illumination(merged: &MergedComponents, shift_ab: [f64; 2], pct: f64, decay: f64) -> Result<Recolored> {
    if !(pct > 0.0 && pct < 100.0) {
        return Err(Error::Param(format!("percentile must lie in (0, 100), got {pct}")));
    }
    if !(decay > 0.0) {
        return Err(Error::Param(format!("decay fraction must be positive, got {decay}")));
    }
    let shading = &merged.shading;
    merged.reflectance.check_same_shape(shading)?;
    if shading.channels() != 3 {
        return Err(Error::Contract("recolouring needs 3-channel shading".into()));
    }
    let (w, h) = (shading.width(), shading.height());
    let lum = shading.luminance().into_data();
    let threshold = percentile(&lum, pct);
    let mask: Vec<bool> = lum.iter().map(|&l| l >= threshold).collect();
    let mut warnings = Vec::new();
    let strength: Vec<f64> = if mask.iter().any(|&m| m) {
        let dist = distance_transform(&mask, w, h);
        let length = decay * ((w * w + h * h) as f64).sqrt();
        lum.iter()
            .zip(&dist)
            .map(|(&l, &d)| {
                let intensity = if threshold > 0.0 { (l / threshold).clamp(0.0, 1.0) } else { 1.0 };
                intensity * (-d / length).exp()
            })
            .collect()
    } else {
        let msg = "empty light-source mask; applying a global tint".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
        vec![1.0; w * h]
    };

    let scale = shading.min_max().1.max(f64::MIN_POSITIVE);
    let mut out = Vec::with_capacity(3 * w * h);
    for (i, s) in strength.iter().enumerate() {
        let px = shading.pixel(i);
        let (da, db) = (s * shift_ab[0], s * shift_ab[1]);
        let tinted = if da == 0.0 && db == 0.0 {
            [px[0], px[1], px[2]]
        } else {
            let mut lab = linear_rgb_to_lab([px[0] / scale, px[1] / scale, px[2] / scale]);
            lab[1] += da;
            lab[2] += db;
            lab_to_linear_rgb(lab).map(|v| v.max(0.0) * scale)
        };
        let r = merged.reflectance.pixel(i);
        out.extend((0..3).map(|c| (r[c] * tinted[c]).clamp(0.0, 1.0)));
    }
    Ok(Recolored {
        image: ImageBuffer::new(w, h, 3, out, Domain::Linear)?,
        strength,
        warnings,
    })
}
