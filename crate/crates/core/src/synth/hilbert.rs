use crate::store::StreetImage;

const ORDER: u32 = 16;

/// Distance along a Hilbert curve filling a `2^16 × 2^16` grid.
pub fn hilbert_index(mut x: u32, mut y: u32) -> u64 {
    let n: u32 = 1 << ORDER;
    let mut d: u64 = 0;
    let mut s = n / 2;
    while s > 0 {
        let rx = u32::from(x & s > 0);
        let ry = u32::from(y & s > 0);
        d += u64::from(s) * u64::from(s) * u64::from((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

/// Sorts images along a Hilbert curve laid over their bounding box.
/// Ties (identical cells) fall back to image id.
pub fn hilbert_sort(images: &mut [&StreetImage]) {
    if images.is_empty() {
        return;
    }
    let (mut min_lat, mut max_lat, mut min_lon, mut max_lon) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for img in images.iter() {
        min_lat = min_lat.min(img.lat);
        max_lat = max_lat.max(img.lat);
        min_lon = min_lon.min(img.lon);
        max_lon = max_lon.max(img.lon);
    }
    let cells = f64::from((1u32 << ORDER) - 1);
    let cell = |v: f64, lo: f64, hi: f64| -> u32 {
        if hi > lo {
            ((v - lo) / (hi - lo) * cells).round() as u32
        } else {
            0
        }
    };
    images.sort_by_cached_key(|img| {
        let x = cell(img.lon, min_lon, max_lon);
        let y = cell(img.lat, min_lat, max_lat);
        (hilbert_index(x, y), img.image_id.clone())
    });
}
