//! Tile binning and per-tile depth sorting.

use rayon::prelude::*;

use super::project::ProjectedSplat;
use crate::real::Real;

pub const TILE_SIZE: usize = 16;

/// Inclusive integer pixel bounds of a splat's 3σ box, clipped to the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelBox {
    pub x0: u32,
    pub x1: u32,
    pub y0: u32,
    pub y1: u32,
}

impl PixelBox {
    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// The pixels a splat may touch: pixel centers within `radius` of the center
/// along each axis. `None` when that set misses the image.
pub fn pixel_box<T: Real>(s: &ProjectedSplat<T>, width: usize, height: usize) -> Option<PixelBox> {
    let lo_x = (s.center[0] - s.radius).ceil().to_f64();
    let hi_x = (s.center[0] + s.radius).floor().to_f64();
    let lo_y = (s.center[1] - s.radius).ceil().to_f64();
    let hi_y = (s.center[1] + s.radius).floor().to_f64();
    let (wmax, hmax) = ((width - 1) as f64, (height - 1) as f64);
    if !(lo_x <= hi_x && lo_y <= hi_y && hi_x >= 0.0 && hi_y >= 0.0 && lo_x <= wmax && lo_y <= hmax) {
        return None;
    }
    Some(PixelBox {
        x0: lo_x.max(0.0) as u32,
        x1: hi_x.min(wmax) as u32,
        y0: lo_y.max(0.0) as u32,
        y1: hi_y.min(hmax) as u32,
    })
}

/// Splat-to-tile assignment: `lists[t]` holds indices into the splat slice,
/// sorted front to back.
#[derive(Debug, Clone, PartialEq)]
pub struct TileBins {
    pub tile_size: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub width: usize,
    pub height: usize,
    pub lists: Vec<Vec<u32>>,
    pub boxes: Vec<Option<PixelBox>>,
}

impl TileBins {
    pub fn tile_count(&self) -> usize {
        self.tiles_x * self.tiles_y
    }

    /// Pixel bounds `[x0, x1) × [y0, y1)` of tile `t`.
    pub fn tile_bounds(&self, t: usize) -> (usize, usize, usize, usize) {
        let (tx, ty) = (t % self.tiles_x, t / self.tiles_x);
        let x0 = tx * self.tile_size;
        let y0 = ty * self.tile_size;
        (
            x0,
            (x0 + self.tile_size).min(self.width),
            y0,
            (y0 + self.tile_size).min(self.height),
        )
    }
}

/// Front-to-back order: ascending view depth, ties by source index.
#[inline]
pub fn depth_order<T: Real>(a: &ProjectedSplat<T>, b: &ProjectedSplat<T>) -> std::cmp::Ordering {
    a.view_depth
        .total_cmp(&b.view_depth)
        .then(a.source_index.cmp(&b.source_index))
}

pub fn bin_and_sort<T: Real>(
    splats: &[ProjectedSplat<T>],
    width: usize,
    height: usize,
    tile_size: usize,
) -> TileBins {
    assert!(tile_size > 0);
    let tiles_x = width.div_ceil(tile_size);
    let tiles_y = height.div_ceil(tile_size);
    let boxes: Vec<Option<PixelBox>> = splats.iter().map(|s| pixel_box(s, width, height)).collect();
    let mut lists = vec![Vec::new(); tiles_x * tiles_y];
    for (i, b) in boxes.iter().enumerate() {
        if let Some(b) = b {
            let ts = tile_size as u32;
            for ty in b.y0 / ts..=b.y1 / ts {
                for tx in b.x0 / ts..=b.x1 / ts {
                    lists[ty as usize * tiles_x + tx as usize].push(i as u32);
                }
            }
        }
    }
    lists
        .par_iter_mut()
        .for_each(|l| l.sort_unstable_by(|&a, &b| depth_order(&splats[a as usize], &splats[b as usize])));
    TileBins {
        tile_size,
        tiles_x,
        tiles_y,
        width,
        height,
        lists,
        boxes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn splat(cx: f64, cy: f64, r: f64, depth: f64, idx: usize) -> ProjectedSplat<f64> {
        ProjectedSplat {
            center: [cx, cy],
            conic: [1.0, 0.0, 1.0],
            view_depth: depth,
            radius: r,
            opacity: 0.5,
            color: [1.0; 3],
            source_index: idx,
        }
    }

    #[test]
    fn small_splat_lands_in_one_tile() {
        let bins = bin_and_sort(&[splat(20.0, 20.0, 1.0, 1.0, 0)], 64, 64, 16);
        let hits: Vec<usize> = (0..bins.tile_count()).filter(|&t| !bins.lists[t].is_empty()).collect();
        assert_eq!(hits, vec![1 + 4]);
    }

    #[test]
    fn corner_splat_lands_in_four_tiles() {
        let bins = bin_and_sort(&[splat(15.5, 15.5, 2.0, 1.0, 0)], 64, 64, 16);
        let hits: Vec<usize> = (0..bins.tile_count()).filter(|&t| !bins.lists[t].is_empty()).collect();
        assert_eq!(hits, vec![0, 1, 4, 5]);
    }

    #[test]
    fn lists_are_depth_sorted_with_index_tiebreak() {
        let splats = vec![
            splat(8.0, 8.0, 3.0, 2.0, 0),
            splat(8.0, 8.0, 3.0, 1.0, 1),
            splat(8.0, 8.0, 3.0, 2.0, 2),
            splat(8.0, 8.0, 3.0, 0.5, 3),
        ];
        let bins = bin_and_sort(&splats, 16, 16, 16);
        assert_eq!(bins.lists[0], vec![3, 1, 0, 2]);
    }

    #[test]
    fn offscreen_splat_has_no_box() {
        assert!(pixel_box(&splat(-10.0, 5.0, 3.0, 1.0, 0), 16, 16).is_none());
        assert!(pixel_box(&splat(5.0, 30.0, 3.0, 1.0, 0), 16, 16).is_none());
        let b = pixel_box(&splat(-1.0, 5.0, 3.0, 1.0, 0), 16, 16).unwrap();
        assert_eq!((b.x0, b.x1, b.y0, b.y1), (0, 2, 2, 8));
    }
}
