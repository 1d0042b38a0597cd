use serde::{Deserialize, Serialize};

use super::{median, SemanticClass, SemanticStixel, StixelError, StixelSet};
use crate::frames::CameraIntrinsics;
use crate::raster::{DisparityImage, LabelImage, PixelClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StixelParams {
    /// Columns per stixel band.
    pub stixel_width: u32,
    /// A row joins the current segment while its disparity stays within this
    /// fraction of the segment's running median.
    pub disparity_tolerance: f64,
    /// Segments shorter than this many rows are dropped.
    pub min_height: u32,
}

impl Default for StixelParams {
    fn default() -> Self {
        Self {
            stixel_width: 5,
            disparity_tolerance: 0.1,
            min_height: 3,
        }
    }
}

struct Segment {
    label: SemanticClass,
    top: u32,
    bottom: u32,
    // kept sorted so the running median is an index lookup
    sorted: Vec<f64>,
}

impl Segment {
    fn running_median(&self) -> f64 {
        let n = self.sorted.len();
        if n % 2 == 1 {
            self.sorted[n / 2]
        } else {
            0.5 * (self.sorted[n / 2 - 1] + self.sorted[n / 2])
        }
    }

    fn push(&mut self, row: u32, d: f64) {
        let at = self.sorted.partition_point(|x| *x < d);
        self.sorted.insert(at, d);
        self.bottom = row;
    }
}

/// Column-band segmentation of a disparity + label image pair.
///
/// Each band of `stixel_width` columns is reduced to one value per row: the
/// majority pixel class (ties go to the lower class code) and the median
/// disparity of the pixels carrying it. Maximal runs of obstacle rows that
/// share a class and stay within `disparity_tolerance` of their running
/// median become stixels; ground, sky and zero-disparity rows break runs.
pub fn extract_stixels(
    disparity: &DisparityImage,
    labels: &LabelImage,
    cam: &CameraIntrinsics,
    params: &StixelParams,
    timestamp: f64,
) -> Result<StixelSet, StixelError> {
    let dims = (disparity.width, disparity.height);
    if dims != (labels.width, labels.height) || dims != (cam.width, cam.height) {
        return Err(StixelError::DimensionMismatch {
            disparity: dims,
            labels: (labels.width, labels.height),
            camera: (cam.width, cam.height),
        });
    }
    let w = params.stixel_width.max(1);
    let mut stixels = Vec::new();
    let mut band_start = 0;
    while band_start < disparity.width {
        let band_end = (band_start + w).min(disparity.width);
        let u_center = band_start as f64 + (band_end - band_start - 1) as f64 / 2.0;
        extract_band(disparity, labels, band_start, band_end, params, |seg| {
            let mut ds = seg.sorted.clone();
            stixels.push(SemanticStixel {
                u: u_center,
                v_b: seg.bottom as f64,
                v_t: seg.top as f64,
                d: median(&mut ds),
                label: seg.label,
            });
        });
        band_start = band_end;
    }
    Ok(StixelSet { timestamp, stixels })
}

fn extract_band(
    disparity: &DisparityImage,
    labels: &LabelImage,
    start: u32,
    end: u32,
    params: &StixelParams,
    mut emit: impl FnMut(Segment),
) {
    let mut current: Option<Segment> = None;
    let close = |seg: Option<Segment>, emit: &mut dyn FnMut(Segment)| {
        if let Some(seg) = seg {
            if seg.bottom - seg.top + 1 >= params.min_height {
                emit(seg);
            }
        }
    };
    let mut counts = [0u32; 6];
    let mut ds = Vec::with_capacity((end - start) as usize);
    for v in 0..disparity.height {
        counts.fill(0);
        for u in start..end {
            counts[labels.get(u, v) as usize] += 1;
        }
        let majority = (0..counts.len())
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
            .map(|code| PixelClass::from_code(code as u8))
            .unwrap_or(PixelClass::Sky);

        let row = majority.semantic().and_then(|class| {
            ds.clear();
            ds.extend(
                (start..end)
                    .filter(|&u| labels.get(u, v) == majority)
                    .map(|u| disparity.get(u, v) as f64)
                    .filter(|d| *d > 0.0),
            );
            (!ds.is_empty()).then(|| (class, median(&mut ds)))
        });

        match row {
            None => close(current.take(), &mut emit),
            Some((class, d)) => {
                let continues = current.as_ref().is_some_and(|seg| {
                    let m = seg.running_median();
                    seg.label == class && (d - m).abs() <= params.disparity_tolerance * m
                });
                if continues {
                    current.as_mut().unwrap().push(v, d);
                } else {
                    close(current.take(), &mut emit);
                    current = Some(Segment {
                        label: class,
                        top: v,
                        bottom: v,
                        sorted: vec![d],
                    });
                }
            }
        }
    }
    close(current.take(), &mut emit);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(w: u32, h: u32) -> CameraIntrinsics {
        CameraIntrinsics {
            f_u: 500.0,
            b_prime: 0.4,
            c_u: w as f64 / 2.0,
            c_v: h as f64 / 2.0,
            width: w,
            height: h,
        }
    }

    fn scene(w: u32, h: u32) -> (DisparityImage, LabelImage) {
        let mut disp = DisparityImage::new(w, h);
        let mut lab = LabelImage::new(w, h);
        for v in h / 2..h {
            for u in 0..w {
                lab.set(u, v, PixelClass::Ground);
                disp.set(u, v, 1.0 + (v - h / 2) as f32 * 0.1);
            }
        }
        (disp, lab)
    }

    #[test]
    fn single_vehicle_band_gives_one_stixel() {
        let (mut disp, mut lab) = scene(5, 480);
        for v in 300..=400 {
            for u in 0..5 {
                lab.set(u, v, PixelClass::Vehicle);
                let jitter = if (u + v) % 2 == 0 { 0.1 } else { -0.1 };
                disp.set(u, v, 20.0 + jitter);
            }
        }
        let out =
            extract_stixels(&disp, &lab, &cam(5, 480), &StixelParams::default(), 0.0).unwrap();
        assert_eq!(out.stixels.len(), 1);
        let s = out.stixels[0];
        assert_eq!((s.v_t, s.v_b, s.u), (300.0, 400.0, 2.0));
        assert!((s.d - 20.0).abs() < 0.11);
        assert_eq!(s.label, SemanticClass::Vehicle);
    }

    #[test]
    fn free_space_only_gives_nothing() {
        let (disp, lab) = scene(20, 60);
        let out =
            extract_stixels(&disp, &lab, &cam(20, 60), &StixelParams::default(), 0.0).unwrap();
        assert!(out.stixels.is_empty());
    }

    #[test]
    fn zero_disparity_gives_nothing() {
        let w = 20;
        let disp = DisparityImage::new(w, 60);
        let mut lab = LabelImage::new(w, 60);
        for v in 10..50 {
            for u in 0..w {
                lab.set(u, v, PixelClass::Building);
            }
        }
        let out = extract_stixels(&disp, &lab, &cam(w, 60), &StixelParams::default(), 0.0).unwrap();
        assert!(out.stixels.is_empty());
    }

    #[test]
    fn disparity_jump_splits_segment_and_label_change_splits_too() {
        let (mut disp, mut lab) = scene(5, 100);
        for v in 10..20 {
            for u in 0..5 {
                lab.set(u, v, PixelClass::Building);
                disp.set(u, v, 5.0);
            }
        }
        for v in 20..30 {
            for u in 0..5 {
                lab.set(u, v, PixelClass::Building);
                disp.set(u, v, 8.0);
            }
        }
        for v in 30..40 {
            for u in 0..5 {
                lab.set(u, v, PixelClass::Pedestrian);
                disp.set(u, v, 8.0);
            }
        }
        let out =
            extract_stixels(&disp, &lab, &cam(5, 100), &StixelParams::default(), 1.5).unwrap();
        let got: Vec<_> = out
            .stixels
            .iter()
            .map(|s| (s.v_t, s.v_b, s.label))
            .collect();
        assert_eq!(
            got,
            vec![
                (10.0, 19.0, SemanticClass::Building),
                (20.0, 29.0, SemanticClass::Building),
                (30.0, 39.0, SemanticClass::Pedestrian),
            ]
        );
        assert_eq!(out.timestamp, 1.5);
    }

    #[test]
    fn short_segments_are_dropped() {
        let (mut disp, mut lab) = scene(5, 100);
        for v in 10..12 {
            for u in 0..5 {
                lab.set(u, v, PixelClass::Other);
                disp.set(u, v, 5.0);
            }
        }
        let out =
            extract_stixels(&disp, &lab, &cam(5, 100), &StixelParams::default(), 0.0).unwrap();
        assert!(out.stixels.is_empty());
    }

    #[test]
    fn bands_cover_the_image_and_last_band_may_be_narrow() {
        let (mut disp, mut lab) = scene(12, 40);
        for v in 5..15 {
            for u in 0..12 {
                lab.set(u, v, PixelClass::Building);
                disp.set(u, v, 4.0);
            }
        }
        let out =
            extract_stixels(&disp, &lab, &cam(12, 40), &StixelParams::default(), 0.0).unwrap();
        let us: Vec<f64> = out.stixels.iter().map(|s| s.u).collect();
        assert_eq!(us, vec![2.0, 7.0, 10.5]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (disp, _) = scene(10, 10);
        let lab = LabelImage::new(10, 11);
        assert!(matches!(
            extract_stixels(&disp, &lab, &cam(10, 10), &StixelParams::default(), 0.0),
            Err(StixelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn extraction_is_deterministic() {
        let (mut disp, mut lab) = scene(40, 60);
        for v in 5..25 {
            for u in 3..30 {
                lab.set(
                    u,
                    v,
                    if u < 17 {
                        PixelClass::Vehicle
                    } else {
                        PixelClass::Building
                    },
                );
                disp.set(u, v, 3.0 + (u as f32) * 0.05);
            }
        }
        let c = cam(40, 60);
        let a = extract_stixels(&disp, &lab, &c, &StixelParams::default(), 0.0).unwrap();
        let b = extract_stixels(&disp, &lab, &c, &StixelParams::default(), 0.0).unwrap();
        assert_eq!(a, b);
        assert!(a.stixels.len() <= 40usize.div_ceil(5) * 4);
    }
}
