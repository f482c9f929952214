//! A small on-disk corpus: three screens with screenshots, one broken
//! screen, and fixture tables that make the Strobe icon come out as
//! "turn on the music".

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use alttext::config::PipelineConfig;
use alttext::imageio;
use alttext::providers::{image_digest, prompt_digest, Fixtures, OcrItem};
use alttext_core::icon::detect_icons_in;
use alttext_core::raster::Rgba;
use alttext_core::{build_prompt, extract_context, parse_screen, serialize_context, ShapeFilterConfig};

pub const STROBE: &str = r#"{
  "activity_name": "com.ape.apps.strobe/com.ape.apps.strobe.StrobeActivity",
  "activity": {"root": {
    "class": "FrameLayout", "bounds": [0, 0, 1440, 2560],
    "children": [{
      "class": "LinearLayout", "bounds": [957, 878, 1440, 1300],
      "children": [
        {"class": "AppCompatImageView", "resource-id": "com.ape.apps.strobe:id/ivTechnoPower",
         "content-desc": "power", "bounds": [957, 878, 1202, 1123]},
        {"class": "AppCompatTextView", "resource-id": "com.ape.apps.strobe:id/tvTechno",
         "text": "Music", "bounds": [957, 1123, 1202, 1200]}
      ]
    }]
  }}
}"#;

const LOGIN: &str = r#"{
  "activity_name": "com.example.notes/.LoginActivity",
  "activity": {"root": {
    "class": "RelativeLayout", "bounds": [0, 0, 1440, 2560],
    "children": [
      {"class": "android.widget.ImageButton", "resource-id": "com.example.notes:id/back",
       "bounds": [0, 0, 168, 168]},
      {"class": "android.widget.EditText", "resource-id": "com.example.notes:id/email",
       "text": "name@example.com", "bounds": [100, 400, 1340, 560]},
      {"class": "android.widget.ImageView", "resource-id": "com.example.notes:id/banner",
       "bounds": [0, 600, 1440, 900]},
      {"class": "android.widget.ImageButton", "resource-id": "com.example.notes:id/show",
       "bounds": [1200, 400, 1340, 540]},
      {"class": "android.widget.ImageView", "bounds": [1500, 100, 1600, 200]}
    ]
  }}
}"#;

const TOOLBAR: &str = r#"{
  "activity_name": "com.example.notes/com.example.notes.ListActivity",
  "activity": {"root": {
    "class": "LinearLayout", "bounds": [0, 0, 1440, 2560],
    "children": [{
      "class": "Toolbar", "resource-id": "com.example.notes:id/toolbar", "bounds": [0, 0, 1440, 200],
      "children": [
        {"class": "android.widget.ImageButton", "resource-id": "com.example.notes:id/menu", "bounds": [20, 20, 180, 180]},
        {"class": "android.widget.TextView", "text": "Notes", "bounds": [200, 20, 900, 180]},
        {"class": "android.widget.ImageButton", "resource-id": "com.example.notes:id/search", "bounds": [1080, 20, 1240, 180]},
        {"class": "android.widget.ImageButton", "content-desc": "More options", "bounds": [1260, 20, 1420, 180]}
      ]
    }]
  }}
}"#;

/// Screenshots are a tenth of the view-hierarchy resolution.
pub const SHOT: (u32, u32) = (144, 256);

pub const STROBE_LABEL: &str = "speaker";
pub const STROBE_ALT: &str = "turn on the music";
pub const STROBE_ICON: &str = "strobe/0.0.0";

fn screenshot(seed: u32) -> Rgba {
    let (w, h) = SHOT;
    let mut data = Vec::with_capacity((w * h * 4) as usize);
    for y in 0..h {
        for x in 0..w {
            let v = x.wrapping_mul(7).wrapping_add(y.wrapping_mul(13)).wrapping_add(seed * 41);
            data.extend_from_slice(&[(v % 251) as u8, ((v / 3) % 253) as u8, (seed * 60) as u8, 255]);
        }
    }
    Rgba::new(w, h, data).unwrap()
}

pub struct Corpus {
    pub root: PathBuf,
    pub cfg: PipelineConfig,
}

impl Corpus {
    /// Writes screens, screenshots and fixtures under `root` and returns a
    /// mock-mode configuration pointing at them.
    pub fn create(root: &Path) -> Corpus {
        let screens = root.join("screens");
        let shots = root.join("screenshots");
        std::fs::create_dir_all(&screens).unwrap();
        std::fs::create_dir_all(&shots).unwrap();
        let docs = [("strobe", STROBE), ("login", LOGIN), ("toolbar", TOOLBAR)];
        let mut fixtures = Fixtures::default();
        for (i, (id, doc)) in docs.iter().enumerate() {
            std::fs::write(screens.join(format!("{id}.json")), doc).unwrap();
            let shot = screenshot(i as u32 + 1);
            imageio::save_png(&shot, &shots.join(format!("{id}.png"))).unwrap();
            if *id == "strobe" {
                let screen = parse_screen(doc, id).unwrap();
                let det = detect_icons_in(&screen, &ShapeFilterConfig::default(), SHOT);
                let icon = &det.candidates[0];
                let pixels = shot.crop(&icon.crop_rect).unwrap().to_icon_size();
                let key = image_digest(&pixels);
                fixtures.labels.insert(key.clone(), STROBE_LABEL.into());
                fixtures.ocr.insert(
                    key,
                    vec![
                        OcrItem { text: "d)".into(), confidence: 0.91 },
                        OcrItem { text: "~".into(), confidence: 0.05 },
                    ],
                );
                let (ctx, _) = extract_context(&screen, icon.node, &["d)".to_string()]).unwrap();
                let prompt = build_prompt(STROBE_LABEL, &serialize_context(&ctx)).unwrap();
                fixtures.alttext.insert(prompt_digest(&prompt), STROBE_ALT.into());
            }
        }
        std::fs::write(screens.join("broken.json"), "{\"activity\": ").unwrap();
        let fixtures_path = root.join("fixtures.json");
        fixtures.save(&fixtures_path).unwrap();

        let mut cfg = PipelineConfig::default();
        cfg.paths.screens_dir = screens;
        cfg.paths.screenshots_dir = shots;
        cfg.paths.cache_dir = root.join("cache");
        cfg.paths.output_dir = root.join("out");
        cfg.paths.fixtures = Some(fixtures_path);
        cfg.paths.data_dir = root.join("data");
        cfg.annotate.mock = true;
        Corpus { root: root.to_path_buf(), cfg }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.cfg.output(name)
    }

    pub fn read(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.out(name)).unwrap()
    }

    /// Drops cached responses and outputs, keeping the inputs.
    pub fn clean(&self) {
        let _ = std::fs::remove_dir_all(&self.cfg.paths.cache_dir);
        let _ = std::fs::remove_dir_all(&self.cfg.paths.output_dir);
    }
}
