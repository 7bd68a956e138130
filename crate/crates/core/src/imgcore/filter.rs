use super::ImageBuffer;

/// Normalized 1-D Gaussian taps of radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

// Half-sample symmetric extension: ... c b a | a b c ... | c b a ...
fn reflect(idx: isize, len: usize) -> usize {
    let period = 2 * len as isize;
    let m = idx.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

fn convolve_line(src: &[f64], dst: &mut [f64], taps: &[f64]) {
    let radius = (taps.len() / 2) as isize;
    let len = src.len();
    for (i, out) in dst.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (t, w) in taps.iter().enumerate() {
            acc += w * src[reflect(i as isize + t as isize - radius, len)];
        }
        *out = acc;
    }
}

/// Separable Gaussian blur with kernel radius `ceil(3 sigma)`.
///
/// Borders use symmetric reflection, which makes the blur operator doubly
/// stochastic, so the image mean is preserved. `sigma == 0` is the identity.
pub fn gaussian_filter(img: &ImageBuffer, sigma: f64) -> ImageBuffer {
    if sigma <= 0.0 {
        return img.clone();
    }
    let taps = gaussian_kernel(sigma);
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut planes = img.planes();
    let mut line = Vec::new();
    let mut out = Vec::new();
    for plane in &mut planes {
        for y in 0..h {
            line.clear();
            line.extend_from_slice(&plane[y * w..(y + 1) * w]);
            out.resize(w, 0.0);
            convolve_line(&line, &mut out, &taps);
            plane[y * w..(y + 1) * w].copy_from_slice(&out);
        }
        for x in 0..w {
            line.clear();
            line.extend((0..h).map(|y| plane[y * w + x]));
            out.resize(h, 0.0);
            convolve_line(&line, &mut out, &taps);
            for y in 0..h {
                plane[y * w + x] = out[y];
            }
        }
    }
    debug_assert_eq!(planes.len(), ch);
    ImageBuffer::from_planes(w, h, &planes, img.domain()).expect("blur preserves shape")
}

// Squared distance transform of a sampled function along one line
// (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let mut started = false;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        if !started {
            v[0] = q;
            started = true;
            continue;
        }
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            // z[0] is -inf, so this never underflows k
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    if !started {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Exact Euclidean distance from every pixel to the nearest `true` pixel of
/// `mask`. Returns `f64::INFINITY` everywhere when the mask is empty.
pub fn distance_transform(mask: &[bool], width: usize, height: usize) -> Vec<f64> {
    assert_eq!(mask.len(), width * height);
    let mut grid: Vec<f64> = mask
        .iter()
        .map(|&m| if m { 0.0 } else { f64::INFINITY })
        .collect();
    let mut col = vec![0.0; height];
    let mut col_out = vec![0.0; height];
    for x in 0..width {
        for y in 0..height {
            col[y] = grid[y * width + x];
        }
        edt_1d(&col, &mut col_out);
        for y in 0..height {
            grid[y * width + x] = col_out[y];
        }
    }
    let mut row_out = vec![0.0; width];
    for y in 0..height {
        edt_1d(&grid[y * width..(y + 1) * width], &mut row_out);
        grid[y * width..(y + 1) * width].copy_from_slice(&row_out);
    }
    grid.into_iter().map(f64::sqrt).collect()
}
