use rayon::prelude::*;

use super::project::ScreenSplat;
use super::TRANSMITTANCE_MIN;

const TILE: u32 = 16;

/// Linear RGB framebuffer with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Framebuffer {
    pub width: u32,
    pub height: u32,
    /// Row-major, three channels per pixel.
    pub rgb: Vec<f32>,
    pub accumulated_alpha: Vec<f32>,
}

impl Framebuffer {
    pub fn filled(width: u32, height: u32, color: [f64; 3]) -> Self {
        let n = width as usize * height as usize;
        let rgb = (0..n).flat_map(|_| color.map(|c| c as f32)).collect();
        Self {
            width,
            height,
            rgb,
            accumulated_alpha: vec![0.0; n],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    /// Quantizes to 8-bit RGB, row-major.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.rgb
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn to_image(&self) -> image::RgbImage {
        image::RgbImage::from_raw(self.width, self.height, self.to_rgb8())
            .expect("buffer matches dimensions")
    }
}

/// Indices of `splats` in stable ascending depth order.
pub fn depth_order(splats: &[ScreenSplat]) -> Vec<u32> {
    // Order-preserving integer image of the depth in the high half, the
    // index in the low half, so the unstable sort is stable.
    let key = |d: f64| {
        let bits = d.to_bits();
        if bits >> 63 == 0 {
            bits | (1 << 63)
        } else {
            !bits
        }
    };
    let mut keys: Vec<u128> = splats
        .iter()
        .enumerate()
        .map(|(i, s)| (u128::from(key(s.depth)) << 32) | i as u128)
        .collect();
    keys.sort_unstable();
    keys.into_iter().map(|k| k as u32).collect()
}

/// Stable ascending sort by depth.
pub fn sort_splats(splats: &mut Vec<ScreenSplat>) {
    let sorted = depth_order(splats).into_iter().map(|i| splats[i as usize]).collect();
    *splats = sorted;
}

/// Splats handed to the tiles per binning round. Tiles that saturate in
/// one round receive nothing from later ones.
const CHUNK: usize = 2048;

/// Accumulation state of one tile, composited front to back.
struct Tile {
    rect: (u32, u32, u32, u32),
    color: Vec<[f64; 3]>,
    trans: Vec<f64>,
    /// Pixels per row still above [`TRANSMITTANCE_MIN`].
    row_active: Vec<usize>,
    active: usize,
}

impl Tile {
    fn new(rect: (u32, u32, u32, u32)) -> Self {
        let (px0, py0, px1, py1) = rect;
        let tw = (px1 - px0) as usize;
        let th = (py1 - py0) as usize;
        Self {
            rect,
            color: vec![[0.0; 3]; tw * th],
            trans: vec![1.0; tw * th],
            row_active: vec![tw; th],
            active: tw * th,
        }
    }

    /// Splat-major: each splat only visits the pixels inside its bounding
    /// box. Every pixel still sees the splats in depth order and stops once
    /// its transmittance falls below [`TRANSMITTANCE_MIN`], as a per-pixel
    /// loop would.
    fn shade(&mut self, splats: &[ScreenSplat], order: &[u32], bounds: &[(u32, u32, u32, u32)], ids: &[u32]) {
        let (px0, py0, px1, py1) = self.rect;
        let tw = (px1 - px0) as usize;
        for &id in ids {
            if self.active == 0 {
                return;
            }
            let s = &splats[order[id as usize] as usize];
            let (x0, y0, x1, y1) = bounds[id as usize];
            let (x0, x1) = (x0.max(px0), x1.min(px1 - 1));
            let (y0, y1) = (y0.max(py0), y1.min(py1 - 1));
            for y in y0..=y1 {
                let ry = (y - py0) as usize;
                if self.row_active[ry] == 0 {
                    continue;
                }
                let Some(span) = s.row(f64::from(y)) else {
                    continue;
                };
                let row = ry * tw;
                for x in x0.max(span.x0)..=x1.min(span.x1) {
                    let p = row + (x - px0) as usize;
                    let t = self.trans[p];
                    if t < TRANSMITTANCE_MIN {
                        continue;
                    }
                    let alpha = span.alpha_at(f64::from(x));
                    if alpha == 0.0 {
                        continue;
                    }
                    let w = t * alpha;
                    let c = &mut self.color[p];
                    for k in 0..3 {
                        c[k] += w * s.color[k];
                    }
                    let t = t * (1.0 - alpha);
                    self.trans[p] = t;
                    if t < TRANSMITTANCE_MIN {
                        self.active -= 1;
                        self.row_active[ry] -= 1;
                    }
                }
            }
        }
    }

    fn write(&self, fb: &mut Framebuffer, background: [f64; 3]) {
        let (px0, py0, px1, _) = self.rect;
        let tw = px1 - px0;
        for (j, (c, &t)) in self.color.iter().zip(&self.trans).enumerate() {
            let x = px0 + j as u32 % tw;
            let y = py0 + j as u32 / tw;
            let p = y as usize * fb.width as usize + x as usize;
            for k in 0..3 {
                fb.rgb[p * 3 + k] = (c[k] + t * background[k]) as f32;
            }
            fb.accumulated_alpha[p] = (1.0 - t) as f32;
        }
    }
}

/// Tile rasterizer. `splats` must already be depth-sorted.
pub fn rasterize(splats: &[ScreenSplat], width: u32, height: u32, background: [f64; 3]) -> Framebuffer {
    let order: Vec<u32> = (0..splats.len() as u32).collect();
    rasterize_ordered(splats, &order, width, height, background)
}

/// Tile rasterizer drawing `splats` front to back in the sequence given by
/// `order`, typically [`depth_order`].
///
/// Splats are binned into the 16×16 tiles their extent touches, a chunk at
/// a time in depth order; within a chunk tiles are shaded in parallel and
/// independently, so the output does not depend on thread scheduling.
pub fn rasterize_ordered(
    splats: &[ScreenSplat],
    order: &[u32],
    width: u32,
    height: u32,
    background: [f64; 3],
) -> Framebuffer {
    let mut fb = Framebuffer::filled(width, height, background);
    if width == 0 || height == 0 || order.is_empty() {
        return fb;
    }
    let tiles_x = width.div_ceil(TILE);
    let tiles_y = height.div_ceil(TILE);
    let n_tiles = (tiles_x * tiles_y) as usize;
    let mut tiles: Vec<Tile> = (0..n_tiles as u32)
        .map(|t| {
            let (px0, py0) = ((t % tiles_x) * TILE, (t / tiles_x) * TILE);
            Tile::new((px0, py0, (px0 + TILE).min(width), (py0 + TILE).min(height)))
        })
        .collect();
    let tiles_of = move |&(x0, y0, x1, y1): &(u32, u32, u32, u32)| {
        (y0 / TILE..=y1 / TILE).flat_map(move |ty| (x0 / TILE..=x1 / TILE).map(move |tx| (ty * tiles_x + tx) as usize))
    };

    let mut start = vec![0usize; n_tiles + 1];
    let mut ids = Vec::new();
    for chunk in order.chunks(CHUNK) {
        // Off-image splats get an empty box and are never binned.
        let bounds: Vec<(u32, u32, u32, u32)> = chunk
            .iter()
            .map(|&i| splats[i as usize].pixel_bounds(width, height).unwrap_or((1, 1, 0, 0)))
            .collect();
        // Counting sort of (tile, splat) pairs over tiles still accepting
        // splats; splats stay in depth order within each tile.
        start.fill(0);
        for b in bounds.iter().filter(|b| b.0 <= b.2) {
            for t in tiles_of(b).filter(|&t| tiles[t].active > 0) {
                start[t + 1] += 1;
            }
        }
        for t in 0..n_tiles {
            start[t + 1] += start[t];
        }
        let mut fill = start.clone();
        ids.clear();
        ids.resize(start[n_tiles], 0u32);
        for (i, b) in bounds.iter().enumerate().filter(|(_, b)| b.0 <= b.2) {
            for t in tiles_of(b).filter(|&t| tiles[t].active > 0) {
                ids[fill[t]] = i as u32;
                fill[t] += 1;
            }
        }
        tiles
            .par_iter_mut()
            .enumerate()
            .filter(|(t, _)| start[*t] < start[t + 1])
            .for_each(|(t, tile)| tile.shade(splats, chunk, &bounds, &ids[start[t]..start[t + 1]]));
        if tiles.iter().all(|t| t.active == 0) {
            break;
        }
    }
    for tile in &tiles {
        tile.write(&mut fb, background);
    }
    fb
}
