//! Normalized boxes, L1 distance, IoU and generalized IoU.
//!
//! Boxes are stored in center-size form `(cx, cy, w, h)` in image-normalized
//! units. Overlap measures work on the corner form internally.

use serde::{Deserialize, Serialize};

/// A box in image-normalized center-size coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

/// Corner form `(x1, y1, x2, y2)`.
pub type Corners = [f64; 4];

impl NormBox {
    pub const fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    /// The all-zero box, used as the "no object" sentinel.
    pub const EMPTY: NormBox = NormBox::new(0.0, 0.0, 0.0, 0.0);

    pub fn from_corners(c: Corners) -> Self {
        let [x1, y1, x2, y2] = c;
        Self {
            cx: 0.5 * (x1 + x2),
            cy: 0.5 * (y1 + y2),
            w: x2 - x1,
            h: y2 - y1,
        }
    }

    pub fn to_corners(&self) -> Corners {
        [
            self.cx - 0.5 * self.w,
            self.cy - 0.5 * self.h,
            self.cx + 0.5 * self.w,
            self.cy + 0.5 * self.h,
        ]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn is_empty_sentinel(&self) -> bool {
        self.to_corners().iter().all(|&v| v == 0.0)
    }

    /// True when every coordinate lies in `[0, 1]`.
    pub fn is_normalized(&self) -> bool {
        self.to_array().iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.cx + dx, self.cy + dy, self.w, self.h)
    }
}

/// Sum of absolute coordinate differences in center-size form.
pub fn l1(a: &NormBox, b: &NormBox) -> f64 {
    (a.cx - b.cx).abs() + (a.cy - b.cy).abs() + (a.w - b.w).abs() + (a.h - b.h).abs()
}

fn corner_area(c: &Corners) -> f64 {
    (c[2] - c[0]).max(0.0) * (c[3] - c[1]).max(0.0)
}

fn intersection(a: &Corners, b: &Corners) -> f64 {
    let iw = a[2].min(b[2]) - a[0].max(b[0]);
    let ih = a[3].min(b[3]) - a[1].max(b[1]);
    if iw > 0.0 && ih > 0.0 {
        iw * ih
    } else {
        0.0
    }
}

fn hull(a: &Corners, b: &Corners) -> f64 {
    (a[2].max(b[2]) - a[0].min(b[0])) * (a[3].max(b[3]) - a[1].min(b[1]))
}

/// Intersection over union. Zero when either box has zero area.
pub fn iou(a: &NormBox, b: &NormBox) -> f64 {
    let (ca, cb) = (a.to_corners(), b.to_corners());
    let (area_a, area_b) = (corner_area(&ca), corner_area(&cb));
    if area_a == 0.0 || area_b == 0.0 {
        return 0.0;
    }
    let inter = intersection(&ca, &cb);
    inter / (area_a + area_b - inter)
}

/// Generalized IoU: `iou - (hull - union) / hull`.
///
/// Two identical zero-area boxes have GIoU 1; any other `0/0` ratio is 0.
pub fn giou(a: &NormBox, b: &NormBox) -> f64 {
    let (ca, cb) = (a.to_corners(), b.to_corners());
    let (area_a, area_b) = (corner_area(&ca), corner_area(&cb));
    if area_a == 0.0 && area_b == 0.0 && ca == cb {
        return 1.0;
    }
    let inter = intersection(&ca, &cb);
    let union = area_a + area_b - inter;
    let iou = if union > 0.0 { inter / union } else { 0.0 };
    let c = hull(&ca, &cb);
    let penalty = if c > 0.0 { (c - union) / c } else { 0.0 };
    iou - penalty
}

/// GIoU together with its gradient with respect to the second box's
/// center-size coordinates. Degenerate (zero union or hull) cases get a zero
/// gradient.
pub fn giou_with_grad(gt: &NormBox, pred: &NormBox) -> (f64, [f64; 4]) {
    let value = giou(gt, pred);
    let a = gt.to_corners();
    let b = pred.to_corners();
    let area_a = corner_area(&a);
    let bw = b[2] - b[0];
    let bh = b[3] - b[1];
    if bw <= 0.0 || bh <= 0.0 {
        return (value, [0.0; 4]);
    }
    let area_b = bw * bh;

    let iw = a[2].min(b[2]) - a[0].max(b[0]);
    let ih = a[3].min(b[3]) - a[1].max(b[1]);
    let overlapping = iw > 0.0 && ih > 0.0;
    let inter = if overlapping { iw * ih } else { 0.0 };
    let union = area_a + area_b - inter;
    let cw = a[2].max(b[2]) - a[0].min(b[0]);
    let ch = a[3].max(b[3]) - a[1].min(b[1]);
    let c = cw * ch;
    if union <= 0.0 || c <= 0.0 {
        return (value, [0.0; 4]);
    }

    // d(inter) / d(corners of b)
    let mut d_inter = [0.0; 4];
    if overlapping {
        if b[0] > a[0] {
            d_inter[0] = -ih;
        }
        if b[2] < a[2] {
            d_inter[2] = ih;
        }
        if b[1] > a[1] {
            d_inter[1] = -iw;
        }
        if b[3] < a[3] {
            d_inter[3] = iw;
        }
    }
    let d_area_b = [-bh, -bw, bh, bw];
    let mut d_hull = [0.0; 4];
    if b[0] < a[0] {
        d_hull[0] = -ch;
    }
    if b[2] > a[2] {
        d_hull[2] = ch;
    }
    if b[1] < a[1] {
        d_hull[1] = -cw;
    }
    if b[3] > a[3] {
        d_hull[3] = cw;
    }

    // giou = inter/union - 1 + union/hull, with union = area_a + area_b - inter
    let g_inter = 1.0 / union;
    let g_union = -inter / (union * union) + 1.0 / c;
    let g_hull = -union / (c * c);
    let mut g_corner = [0.0; 4];
    for k in 0..4 {
        g_corner[k] = g_inter * d_inter[k] + g_union * (d_area_b[k] - d_inter[k]) + g_hull * d_hull[k];
    }
    // corners = (cx - w/2, cy - h/2, cx + w/2, cy + h/2)
    let grad = [
        g_corner[0] + g_corner[2],
        g_corner[1] + g_corner[3],
        0.5 * (g_corner[2] - g_corner[0]),
        0.5 * (g_corner[3] - g_corner[1]),
    ];
    (value, grad)
}

/// Euclidean distance between box centers.
pub fn center_distance(a: &NormBox, b: &NormBox) -> f64 {
    ((a.cx - b.cx).powi(2) + (a.cy - b.cy).powi(2)).sqrt()
}
