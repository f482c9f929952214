//! Icon candidate detection: class-name substring filter, shape filter and
//! crop rectangles in screenshot space.

use alloc::string::String;
use alloc::vec::Vec;

use crate::vh::{Bounds, NodePath, Screen, UiNode};

/// Class-name substrings (matched case-insensitively) that mark icon widgets.
pub const ICON_CLASS_MARKERS: [&str; 2] = ["IMAGEBUTTON", "IMAGEVIEW"];

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("shape filter thresholds must be positive and max_aspect >= 1")]
    InvalidThresholds,
}

/// Thresholds that reject abnormally large or narrow elements.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeFilterConfig {
    /// Largest allowed side, as a fraction of the matching screen side.
    pub max_side_frac: f64,
    /// Largest allowed area, as a fraction of the screen area.
    pub max_area_frac: f64,
    /// Largest allowed long-side / short-side ratio.
    pub max_aspect: f64,
    /// Smallest allowed side in view-hierarchy pixels.
    pub min_side_px: f64,
}

impl Default for ShapeFilterConfig {
    fn default() -> Self {
        ShapeFilterConfig {
            max_side_frac: 0.75,
            max_area_frac: 0.25,
            max_aspect: 4.0,
            min_side_px: 8.0,
        }
    }
}

impl ShapeFilterConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            self.max_side_frac,
            self.max_area_frac,
            self.max_aspect,
            self.min_side_px,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if positive && self.max_aspect >= 1.0 {
            Ok(())
        } else {
            Err(ConfigError::InvalidThresholds)
        }
    }

    /// Scales every threshold by a single looseness factor: `s > 1` accepts
    /// more shapes, `s < 1` fewer. Used by [`calibrate_shape_filter`].
    pub fn scaled(&self, s: f64) -> Self {
        ShapeFilterConfig {
            max_side_frac: self.max_side_frac * s,
            max_area_frac: self.max_area_frac * s * s,
            max_aspect: (self.max_aspect * s).max(1.0),
            min_side_px: self.min_side_px / s,
        }
    }
}

/// True when the class name marks an icon widget.
pub fn is_icon_class(class_name: &str) -> bool {
    let upper = class_name.to_ascii_uppercase();
    ICON_CLASS_MARKERS.iter().any(|m| upper.contains(m))
}

/// Shape predicate. Degenerate (zero-sized) elements fail.
pub fn shape_ok(b: &Bounds, screen_dims: (u32, u32), cfg: &ShapeFilterConfig) -> bool {
    let (w, h) = (b.width() as f64, b.height() as f64);
    if w <= 0.0 || h <= 0.0 {
        return false;
    }
    let (sw, sh) = (f64::from(screen_dims.0), f64::from(screen_dims.1));
    let too_large = w > cfg.max_side_frac * sw
        || h > cfg.max_side_frac * sh
        || w * h > cfg.max_area_frac * sw * sh;
    let narrow = w.max(h) / w.min(h) > cfg.max_aspect;
    let tiny = w.min(h) < cfg.min_side_px;
    !(too_large || narrow || tiny)
}

/// Crop rectangle in screenshot pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CropError {
    #[error("crop region is empty after clamping to the screenshot")]
    EmptyCrop,
    #[error("screen and screenshot dimensions must be positive")]
    InvalidDims,
}

/// `round(n / d)` with halves rounded away from zero; `d > 0`.
fn div_round(n: i128, d: i128) -> i128 {
    let q = (2 * n.abs() + d) / (2 * d);
    if n < 0 {
        -q
    } else {
        q
    }
}

/// Maps view-hierarchy bounds into screenshot pixels: scale each edge,
/// round half away from zero, then clamp into the image.
pub fn crop_rect_for(
    b: &Bounds,
    screen_dims: (u32, u32),
    screenshot_dims: (u32, u32),
) -> Result<CropRect, CropError> {
    let (sw, sh) = (i128::from(screen_dims.0), i128::from(screen_dims.1));
    let (iw, ih) = (i128::from(screenshot_dims.0), i128::from(screenshot_dims.1));
    if sw == 0 || sh == 0 || iw == 0 || ih == 0 {
        return Err(CropError::InvalidDims);
    }
    let sx = |v: i64| div_round(i128::from(v) * iw, sw).clamp(0, iw);
    let sy = |v: i64| div_round(i128::from(v) * ih, sh).clamp(0, ih);
    let (x0, x1) = (sx(b.left()), sx(b.right()));
    let (y0, y1) = (sy(b.top()), sy(b.bottom()));
    if x1 <= x0 || y1 <= y0 {
        return Err(CropError::EmptyCrop);
    }
    // All four values lie in [0, u32::MAX] after clamping.
    Ok(CropRect {
        x: x0 as u32,
        y: y0 as u32,
        w: (x1 - x0) as u32,
        h: (y1 - y0) as u32,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IconCandidate<'a> {
    pub node: &'a UiNode,
    pub screen_id: String,
    pub node_path: NodePath,
    pub bounds: Bounds,
    pub crop_rect: CropRect,
}

/// Outcome of running the filters over one screen.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Detection<'a> {
    pub candidates: Vec<IconCandidate<'a>>,
    /// Nodes whose class matched but whose shape was rejected.
    pub rejected_by_shape: usize,
    /// Nodes that passed both filters but whose crop was empty.
    pub empty_crops: usize,
}

impl Detection<'_> {
    pub fn class_matches(&self) -> usize {
        self.candidates.len() + self.rejected_by_shape + self.empty_crops
    }
}

/// Returns every icon-class node that passes [`shape_ok`], in pre-order.
/// Crops assume a screenshot in the view-hierarchy coordinate space; use
/// [`detect_icons_in`] when the screenshot size differs.
pub fn detect_icons<'a>(screen: &'a Screen, cfg: &ShapeFilterConfig) -> Vec<IconCandidate<'a>> {
    detect_icons_in(screen, cfg, screen.screen_dims).candidates
}

pub fn detect_icons_in<'a>(
    screen: &'a Screen,
    cfg: &ShapeFilterConfig,
    screenshot_dims: (u32, u32),
) -> Detection<'a> {
    let mut out = Detection::default();
    walk(screen, &screen.root, NodePath::root(), cfg, screenshot_dims, &mut out);
    out
}

fn walk<'a>(
    screen: &'a Screen,
    node: &'a UiNode,
    path: NodePath,
    cfg: &ShapeFilterConfig,
    screenshot_dims: (u32, u32),
    out: &mut Detection<'a>,
) {
    if is_icon_class(&node.class_name) {
        if !shape_ok(&node.bounds, screen.screen_dims, cfg) {
            out.rejected_by_shape += 1;
        } else {
            match crop_rect_for(&node.bounds, screen.screen_dims, screenshot_dims) {
                Ok(crop_rect) => out.candidates.push(IconCandidate {
                    node,
                    screen_id: screen.screen_id.clone(),
                    node_path: path.clone(),
                    bounds: node.bounds,
                    crop_rect,
                }),
                Err(_) => out.empty_crops += 1,
            }
        }
    }
    for (i, child) in node.children.iter().enumerate() {
        walk(screen, child, path.child(i), cfg, screenshot_dims, out);
    }
}

/// Share of icon-class elements (given by bounds and screen size) that the
/// shape filter rejects.
pub fn removal_fraction(pool: &[(Bounds, (u32, u32))], cfg: &ShapeFilterConfig) -> f64 {
    if pool.is_empty() {
        return 0.0;
    }
    let removed = pool
        .iter()
        .filter(|(b, dims)| !shape_ok(b, *dims, cfg))
        .count();
    removed as f64 / pool.len() as f64
}

/// Result of [`calibrate_shape_filter`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub config: ShapeFilterConfig,
    pub scale: f64,
    pub removal_fraction: f64,
}

/// Searches the looseness factor of [`ShapeFilterConfig::scaled`] for the
/// setting whose removal fraction is closest to `target`. Removal is
/// non-increasing in the factor, so a bisection over `[1/16, 16]` suffices.
pub fn calibrate_shape_filter(
    pool: &[(Bounds, (u32, u32))],
    base: &ShapeFilterConfig,
    target: f64,
) -> Calibration {
    let eval = |s: f64| {
        let config = base.scaled(s);
        Calibration {
            config,
            scale: s,
            removal_fraction: removal_fraction(pool, &config),
        }
    };
    let (mut lo, mut hi) = (libm::log(1.0 / 16.0), libm::log(16.0));
    let mut best = eval(1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let cand = eval(libm::exp(mid));
        if (cand.removal_fraction - target).abs() < (best.removal_fraction - target).abs() {
            best = cand;
        }
        if cand.removal_fraction > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vh::parse_screen;
    use alloc::string::ToString;

    const SCREEN: (u32, u32) = (1440, 2560);

    #[test]
    fn strobe_icon_shape() {
        let b = Bounds::new(957, 878, 1202, 1123);
        assert!(shape_ok(&b, SCREEN, &ShapeFilterConfig::default()));
    }

    #[test]
    fn full_screen_and_divider_rejected() {
        let cfg = ShapeFilterConfig::default();
        assert!(!shape_ok(&Bounds::new(0, 0, 1440, 2560), SCREEN, &cfg));
        assert!(!shape_ok(&Bounds::new(0, 100, 1440, 108), SCREEN, &cfg));
        assert!(!shape_ok(&Bounds::new(5, 5, 5, 50), SCREEN, &cfg));
        assert!(!shape_ok(&Bounds::new(0, 0, 7, 7), SCREEN, &cfg));
    }

    #[test]
    fn crop_identity_and_half_scale() {
        let b = Bounds::new(957, 878, 1202, 1123);
        assert_eq!(
            crop_rect_for(&b, SCREEN, SCREEN).unwrap(),
            CropRect { x: 957, y: 878, w: 245, h: 245 }
        );
        // 478.5 -> 479, 439, 601, 561.5 -> 562
        assert_eq!(
            crop_rect_for(&b, SCREEN, (720, 1280)).unwrap(),
            CropRect { x: 479, y: 439, w: 122, h: 123 }
        );
    }

    #[test]
    fn crop_clamps_and_rejects_offscreen() {
        let off = Bounds::new(1500, 100, 1600, 200);
        assert_eq!(crop_rect_for(&off, SCREEN, SCREEN), Err(CropError::EmptyCrop));
        let neg = Bounds::new(-300, -300, -10, -10);
        assert_eq!(crop_rect_for(&neg, SCREEN, SCREEN), Err(CropError::EmptyCrop));
        let partial = Bounds::new(1400, -20, 1500, 60);
        assert_eq!(
            crop_rect_for(&partial, SCREEN, SCREEN).unwrap(),
            CropRect { x: 1400, y: 0, w: 40, h: 60 }
        );
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(div_round(5, 2), 3);
        assert_eq!(div_round(-5, 2), -3);
        assert_eq!(div_round(4, 3), 1);
        assert_eq!(div_round(-4, 3), -1);
    }

    #[test]
    fn class_filter() {
        assert!(is_icon_class("android.widget.ImageButton"));
        assert!(is_icon_class("AppCompatImageView"));
        assert!(!is_icon_class("TextView"));
        let screen = parse_screen(
            r#"{"activity": {"root": {"class": "FrameLayout", "bounds": [0,0,1440,2560],
                "children": [
                  {"class": "TextView", "bounds": [10, 10, 110, 110]},
                  {"class": "ImageButton", "bounds": [10, 10, 110, 110]},
                  {"class": "ImageView", "bounds": [0, 0, 1440, 2000]}
                ]}}}"#,
            "s",
        )
        .unwrap();
        let found = detect_icons_in(&screen, &ShapeFilterConfig::default(), SCREEN);
        assert_eq!(found.candidates.len(), 1);
        assert_eq!(found.candidates[0].node_path.to_string(), "0.1");
        assert_eq!(found.rejected_by_shape, 1);
        assert_eq!(found.class_matches(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(ShapeFilterConfig::default().validate().is_ok());
        let bad = ShapeFilterConfig {
            max_aspect: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn calibration_hits_target_on_graded_pool() {
        // Aspect ratios 1.0, 1.1, ..., 10.9: removal is controlled by the aspect cap.
        let pool: Vec<_> = (0..100)
            .map(|i| (Bounds::new(0, 0, 100 + 10 * i, 100), SCREEN))
            .collect();
        let cal = calibrate_shape_filter(&pool, &ShapeFilterConfig::default(), 0.17);
        assert!((cal.removal_fraction - 0.17).abs() <= 0.02, "{cal:?}");
    }
}
