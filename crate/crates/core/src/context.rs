//! Icon context: the activity name, the icon's own properties plus OCR text,
//! and a summary of its parent and siblings. Missing or blank properties are
//! left out entirely, and the icon's developer alt-text (`content-desc`) is
//! never included.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::vh::{Bounds, Screen, UiNode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("icon node is not part of screen {0}")]
    NotInScreen(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextWarning {
    /// The icon is the root node: no parent, no siblings.
    OrphanIcon,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementInfo {
    pub class_name: String,
    pub resource_id: Option<String>,
    pub bounds: Bounds,
    /// On-screen text of the icon itself, when the hierarchy carries one.
    pub text: Option<String>,
    /// Never `Some(empty)`.
    pub ocr_texts: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NeighborInfo {
    pub class_name: String,
    pub resource_id: Option<String>,
    pub text: Option<String>,
}

impl NeighborInfo {
    pub fn of(node: &UiNode) -> Self {
        NeighborInfo {
            class_name: node.class_name.clone(),
            resource_id: node.resource_id.as_deref().and_then(clean_resource_id),
            text: non_blank(node.text.as_deref()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IconContext {
    pub activity_name: String,
    pub element: ElementInfo,
    pub parent: Option<NeighborInfo>,
    pub siblings: Vec<NeighborInfo>,
}

/// Strips the package qualifier: everything up to the last `/`.
pub fn normalize_resource_id(raw: &str) -> &str {
    match raw.rfind('/') {
        Some(i) => &raw[i + 1..],
        None => raw,
    }
}

fn clean_resource_id(raw: &str) -> Option<String> {
    non_blank(Some(normalize_resource_id(raw.trim())))
}

fn non_blank(s: Option<&str>) -> Option<String> {
    s.filter(|s| !s.trim().is_empty()).map(str::to_string)
}

/// Builds the context for `icon`, which must be a node of `screen`
/// (matched by address). OCR strings that are blank are dropped.
pub fn extract_context(
    screen: &Screen,
    icon: &UiNode,
    ocr_texts: &[String],
) -> Result<(IconContext, Option<ContextWarning>), ContextError> {
    let visit = screen
        .iter_nodes()
        .find(|v| core::ptr::eq(v.node, icon))
        .ok_or_else(|| ContextError::NotInScreen(screen.screen_id.clone()))?;

    let ocr: Vec<String> = ocr_texts
        .iter()
        .filter(|t| !t.trim().is_empty())
        .cloned()
        .collect();
    let element = ElementInfo {
        class_name: icon.class_name.clone(),
        resource_id: icon.resource_id.as_deref().and_then(clean_resource_id),
        bounds: icon.bounds,
        text: non_blank(icon.text.as_deref()),
        ocr_texts: (!ocr.is_empty()).then_some(ocr),
    };

    let (parent, siblings, warning) = match visit.parent {
        None => (None, Vec::new(), Some(ContextWarning::OrphanIcon)),
        Some(parent) => {
            let mut siblings: Vec<NeighborInfo> = Vec::new();
            for (i, sib) in parent.children.iter().enumerate() {
                if i == visit.index {
                    continue;
                }
                let info = NeighborInfo::of(sib);
                if !siblings.contains(&info) {
                    siblings.push(info);
                }
            }
            (Some(NeighborInfo::of(parent)), siblings, None)
        }
    };

    Ok((
        IconContext {
            activity_name: screen.activity_name.clone(),
            element,
            parent,
            siblings,
        },
        warning,
    ))
}

/// JSON string literal (double quotes, JSON escapes).
fn json_str(s: &str) -> String {
    serde_json::to_string(s).unwrap_or_default()
}

/// Single-quoted string literal in the style of a Python list repr, as used
/// for the OCR list.
fn repr_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out.push('\'');
    out
}

fn push_neighbor(out: &mut String, info: &NeighborInfo, indent: &str) {
    let mut fields: Vec<String> = Vec::with_capacity(3);
    if let Some(id) = &info.resource_id {
        fields.push(alloc::format!("\"resource_id\": {}", json_str(id)));
    }
    if let Some(text) = &info.text {
        fields.push(alloc::format!("\"text\": {}", json_str(text)));
    }
    fields.push(alloc::format!("\"class\": {}", json_str(&info.class_name)));
    out.push_str("{\n");
    for (i, f) in fields.iter().enumerate() {
        out.push_str(indent);
        out.push_str("  ");
        out.push_str(f);
        if i + 1 < fields.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str(indent);
    out.push('}');
}

/// Canonical text rendering. Keys appear in a fixed order and absent values
/// produce no key, so equal contexts serialize to identical bytes.
pub fn serialize_context(ctx: &IconContext) -> String {
    let e = &ctx.element;
    let mut element_fields: Vec<String> = Vec::with_capacity(5);
    element_fields.push(alloc::format!("\"class_name\": {}", json_str(&e.class_name)));
    if let Some(id) = &e.resource_id {
        element_fields.push(alloc::format!("\"resource_id\": {}", json_str(id)));
    }
    element_fields.push(alloc::format!("\"bounds\": {}", e.bounds));
    if let Some(text) = &e.text {
        element_fields.push(alloc::format!("\"text\": {}", json_str(text)));
    }
    if let Some(ocr) = e.ocr_texts.as_ref().filter(|o| !o.is_empty()) {
        let items: Vec<String> = ocr.iter().map(|t| repr_str(t)).collect();
        element_fields.push(alloc::format!("\"OCR detected text\": [{}]", items.join(", ")));
    }

    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"app activity name\": {},", json_str(&ctx.activity_name));
    out.push_str("  \"UI element info\": {\n");
    for (i, f) in element_fields.iter().enumerate() {
        out.push_str("    ");
        out.push_str(f);
        if i + 1 < element_fields.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("  }");

    if let Some(parent) = &ctx.parent {
        out.push_str(",\n  \"parent node\": ");
        push_neighbor(&mut out, parent, "  ");
    }
    if !ctx.siblings.is_empty() {
        out.push_str(",\n  \"sibling nodes\": [\n");
        for (i, sib) in ctx.siblings.iter().enumerate() {
            out.push_str("    ");
            push_neighbor(&mut out, sib, "    ");
            if i + 1 < ctx.siblings.len() {
                out.push(',');
            }
            out.push('\n');
        }
        out.push_str("  ]");
    }
    out.push_str("\n}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vh::{parse_screen, NodePath};
    use alloc::vec;

    const STROBE: &str = r#"{
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

    const GOLDEN: &str = r#"{
  "app activity name": "com.ape.apps.strobe.StrobeActivity",
  "UI element info": {
    "class_name": "AppCompatImageView",
    "resource_id": "ivTechnoPower",
    "bounds": [957, 878, 1202, 1123],
    "OCR detected text": ['d)']
  },
  "parent node": {
    "class": "LinearLayout"
  },
  "sibling nodes": [
    {
      "resource_id": "tvTechno",
      "text": "Music",
      "class": "AppCompatTextView"
    }
  ]
}"#;

    #[test]
    fn resource_id_forms() {
        assert_eq!(
            normalize_resource_id("com.ape.apps.strobe:id/ivTechnoPower"),
            "ivTechnoPower"
        );
        assert_eq!(normalize_resource_id("ivTechnoPower"), "ivTechnoPower");
        assert_eq!(normalize_resource_id("a:id/b/c"), "c");
        let once = normalize_resource_id("a:id/b/c");
        assert_eq!(normalize_resource_id(once), once);
    }

    #[test]
    fn strobe_context_matches_golden() {
        let screen = parse_screen(STROBE, "strobe").unwrap();
        let icon = screen.node_at(&NodePath::parse("0.0.0").unwrap()).unwrap();
        let (ctx, warn) = extract_context(&screen, icon, &[String::from("d)")]).unwrap();
        assert!(warn.is_none());
        let text = serialize_context(&ctx);
        assert_eq!(text, GOLDEN);
        assert!(!text.contains("power\""), "content-desc must not leak");
        assert_eq!(text, serialize_context(&ctx.clone()));
    }

    #[test]
    fn minimal_context_has_two_keys() {
        let screen = parse_screen(
            r#"{"activity_name": "a/.B", "activity": {"root": {"class": "ImageView", "bounds": [0,0,10,10]}}}"#,
            "s",
        )
        .unwrap();
        let (ctx, warn) = extract_context(&screen, &screen.root, &[String::from("  ")]).unwrap();
        assert_eq!(warn, Some(ContextWarning::OrphanIcon));
        let text = serialize_context(&ctx);
        assert_eq!(
            text,
            "{\n  \"app activity name\": \"a.B\",\n  \"UI element info\": {\n    \"class_name\": \"ImageView\",\n    \"bounds\": [0, 0, 10, 10]\n  }\n}"
        );
    }

    #[test]
    fn only_child_has_parent_without_siblings() {
        let screen = parse_screen(
            r#"{"activity": {"root": {"class": "FrameLayout", "resource-id": "x:id/frame", "bounds": [0,0,10,10],
                "children": [{"class": "ImageView", "bounds": [0,0,10,10]}]}}}"#,
            "s",
        )
        .unwrap();
        let icon = &screen.root.children[0];
        let (ctx, _) = extract_context(&screen, icon, &[]).unwrap();
        assert_eq!(
            ctx.parent,
            Some(NeighborInfo {
                class_name: "FrameLayout".into(),
                resource_id: Some("frame".into()),
                text: None
            })
        );
        assert!(ctx.siblings.is_empty());
        assert!(ctx.element.ocr_texts.is_none());
    }

    #[test]
    fn duplicate_siblings_keep_first() {
        let screen = parse_screen(
            r#"{"activity": {"root": {"class": "RelativeLayout", "bounds": [0,0,10,10],
                "children": [
                  {"class": "EditText", "resource-id": "p:id/nickname_input", "text": "Raphael Tan", "bounds": [0,0,5,5]},
                  {"class": "ImageView", "resource-id": "p:id/nickname_check", "bounds": [5,0,10,5]},
                  {"class": "EditText", "resource-id": "p:id/nickname_input", "text": "Raphael Tan", "bounds": [0,5,5,10]},
                  {"class": "View", "bounds": [0,5,5,10]}
                ]}}}"#,
            "s",
        )
        .unwrap();
        let icon = &screen.root.children[1];
        let (ctx, _) = extract_context(&screen, icon, &[]).unwrap();
        assert_eq!(ctx.siblings.len(), 2);
        assert_eq!(ctx.siblings[0].resource_id.as_deref(), Some("nickname_input"));
        assert_eq!(ctx.siblings[0].text.as_deref(), Some("Raphael Tan"));
        assert_eq!(ctx.siblings[1].class_name, "View");
    }

    #[test]
    fn foreign_node_is_rejected() {
        let screen = parse_screen(STROBE, "strobe").unwrap();
        let stray = UiNode::new("ImageView", Bounds::new(0, 0, 1, 1));
        assert!(extract_context(&screen, &stray, &[]).is_err());
    }

    #[test]
    fn strings_are_escaped() {
        assert_eq!(repr_str("it's"), "'it\\'s'");
        assert_eq!(json_str("say \"hi\""), "\"say \\\"hi\\\"\"");
        let ctx = IconContext {
            activity_name: "A".into(),
            element: ElementInfo {
                class_name: "ImageView".into(),
                resource_id: None,
                bounds: Bounds::new(0, 0, 1, 1),
                text: None,
                ocr_texts: Some(vec!["a'b".into()]),
            },
            parent: None,
            siblings: vec![],
        };
        assert!(serialize_context(&ctx).contains("\"OCR detected text\": ['a\\'b']"));
    }
}
