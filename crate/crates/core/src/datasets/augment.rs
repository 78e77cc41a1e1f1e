use rand::Rng as _;

use super::Corpus;
use crate::numerics::Image;
use crate::rng::Rng;

/// Rotate counter-clockwise by 90 degrees.
pub fn rot90(img: &Image) -> Image {
    let n = img.n();
    let px = img.pixels();
    Image::from_raw(n, (0..n * n).map(|i| px[(i % n) * n + (n - 1 - i / n)]).collect())
}

/// Each image at 0, 90, 180 and 270 degrees, grouped per source image.
pub fn augment_rot90(corpus: &Corpus) -> Corpus {
    let mut images = Vec::with_capacity(4 * corpus.images.len());
    let mut ids = Vec::with_capacity(4 * corpus.images.len());
    for (img, id) in corpus.images.iter().zip(&corpus.ids) {
        let mut cur = img.clone();
        for quarter in 0..4 {
            ids.push(format!("{id}/rot{}", 90 * quarter));
            let next = rot90(&cur);
            images.push(cur);
            cur = next;
        }
    }
    Corpus {
        n: corpus.n,
        images,
        ids,
        provenance: format!("{}+rot90", corpus.provenance),
        normalization_scale: corpus.normalization_scale,
    }
}

/// Crop the `n x n` window at `(oy, ox)` from the mirror tiling
/// `[img, fliplr; flipud, fliplr(flipud)]`; offsets range over `0..=n`.
pub fn tile_crop_at(img: &Image, oy: usize, ox: usize) -> Image {
    let n = img.n();
    assert!(oy <= n && ox <= n, "offset beyond the tiling");
    let px = img.pixels();
    let fold = |t: usize| if t < n { t } else { 2 * n - 1 - t };
    let out = (0..n * n)
        .map(|i| {
            let (r, c) = (fold(i / n + oy), fold(i % n + ox));
            px[r * n + c]
        })
        .collect();
    Image::from_raw(n, out)
}

pub fn augment_tile_crop(img: &Image, rng: &mut Rng) -> Image {
    let n = img.n();
    let oy = rng.random_range(0..=n);
    let ox = rng.random_range(0..=n);
    tile_crop_at(img, oy, ox)
}
