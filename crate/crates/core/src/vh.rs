//! Typed view-hierarchy trees parsed from Rico-style screen documents.
//!
//! A Rico document is a JSON object carrying an `activity_name` and an
//! `activity` wrapper whose `root` member is the top node. Every node has a
//! `class`, a `bounds` array `[left, top, right, bottom]` and optional
//! `resource-id`, `text`, `content-desc`, `clickable` and `children`
//! members. Unknown members are ignored.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde_json::{Map, Value};

/// Coordinate space used by Rico captures unless a document says otherwise.
pub const RICO_SCREEN_DIMS: (u32, u32) = (1440, 2560);

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("document has no root node object")]
    MissingRoot,
    #[error("invalid bounds at node {path}: {reason}")]
    InvalidBounds { path: String, reason: String },
}

/// Axis-aligned rectangle in view-hierarchy pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Bounds {
    left: i64,
    top: i64,
    right: i64,
    bottom: i64,
}

impl Bounds {
    /// Builds bounds, collapsing inverted edges so that `right >= left` and
    /// `bottom >= top` always hold.
    pub fn new(left: i64, top: i64, right: i64, bottom: i64) -> Self {
        Bounds {
            left,
            top,
            right: right.max(left),
            bottom: bottom.max(top),
        }
    }

    pub fn left(&self) -> i64 {
        self.left
    }

    pub fn top(&self) -> i64 {
        self.top
    }

    pub fn right(&self) -> i64 {
        self.right
    }

    pub fn bottom(&self) -> i64 {
        self.bottom
    }

    pub fn width(&self) -> i64 {
        self.right - self.left
    }

    pub fn height(&self) -> i64 {
        self.bottom - self.top
    }

    pub fn as_array(&self) -> [i64; 4] {
        [self.left, self.top, self.right, self.bottom]
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}, {}, {}]",
            self.left, self.top, self.right, self.bottom
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UiNode {
    pub class_name: String,
    pub resource_id: Option<String>,
    pub text: Option<String>,
    pub content_desc: Option<String>,
    pub bounds: Bounds,
    pub clickable: Option<bool>,
    pub children: Vec<UiNode>,
}

impl UiNode {
    pub fn new(class_name: impl Into<String>, bounds: Bounds) -> Self {
        UiNode {
            class_name: class_name.into(),
            resource_id: None,
            text: None,
            content_desc: None,
            bounds,
            clickable: None,
            children: Vec::new(),
        }
    }

    /// Number of nodes in the subtree rooted here, including this node.
    pub fn subtree_len(&self) -> usize {
        1 + self.children.iter().map(UiNode::subtree_len).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Screen {
    pub screen_id: String,
    pub activity_name: String,
    pub root: UiNode,
    pub screen_dims: (u32, u32),
    pub screenshot_ref: Option<String>,
}

/// Index path from the root to a node, rendered `0.2.1` (the root is `0`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodePath(Vec<usize>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(vec![0])
    }

    pub fn child(&self, index: usize) -> Self {
        let mut steps = self.0.clone();
        steps.push(index);
        NodePath(steps)
    }

    pub fn steps(&self) -> &[usize] {
        &self.0
    }

    pub fn parse(raw: &str) -> Option<Self> {
        let steps = raw
            .trim()
            .split('.')
            .map(|s| s.parse::<usize>().ok())
            .collect::<Option<Vec<_>>>()?;
        if steps.first() != Some(&0) {
            return None;
        }
        Some(NodePath(steps))
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{step}")?;
        }
        Ok(())
    }
}

/// One node visited by [`Screen::iter_nodes`].
#[derive(Debug, Clone, Copy)]
pub struct Visit<'a> {
    pub node: &'a UiNode,
    pub parent: Option<&'a UiNode>,
    /// Position of `node` within `parent.children`.
    pub index: usize,
    pub depth: usize,
}

/// Depth-first pre-order walk yielding every node with its parent.
pub struct NodeIter<'a> {
    stack: Vec<Visit<'a>>,
}

impl<'a> Iterator for NodeIter<'a> {
    type Item = Visit<'a>;

    fn next(&mut self) -> Option<Self::Item> {
        let visit = self.stack.pop()?;
        for (index, child) in visit.node.children.iter().enumerate().rev() {
            self.stack.push(Visit {
                node: child,
                parent: Some(visit.node),
                index,
                depth: visit.depth + 1,
            });
        }
        Some(visit)
    }
}

impl Screen {
    pub fn iter_nodes(&self) -> NodeIter<'_> {
        NodeIter {
            stack: vec![Visit {
                node: &self.root,
                parent: None,
                index: 0,
                depth: 0,
            }],
        }
    }

    pub fn node_count(&self) -> usize {
        self.root.subtree_len()
    }

    pub fn node_at(&self, path: &NodePath) -> Option<&UiNode> {
        let (first, rest) = path.steps().split_first()?;
        if *first != 0 {
            return None;
        }
        rest.iter()
            .try_fold(&self.root, |node, &i| node.children.get(i))
    }

    /// Path of `target`, matched by address, not by value.
    pub fn path_of(&self, target: &UiNode) -> Option<NodePath> {
        fn walk(node: &UiNode, target: &UiNode, path: NodePath) -> Option<NodePath> {
            if core::ptr::eq(node, target) {
                return Some(path);
            }
            node.children
                .iter()
                .enumerate()
                .find_map(|(i, child)| walk(child, target, path.child(i)))
        }
        walk(&self.root, target, NodePath::root())
    }

    /// Parent of `target` (matched by address).
    pub fn parent_of(&self, target: &UiNode) -> Option<&UiNode> {
        self.iter_nodes()
            .find(|v| core::ptr::eq(v.node, target))
            .and_then(|v| v.parent)
    }

    /// Re-emits the screen in the Rico document schema. Absent optionals are
    /// left out, so parsing the output reproduces this screen.
    pub fn to_document(&self) -> Value {
        let mut doc = Map::new();
        doc.insert(
            "activity_name".to_owned(),
            Value::String(self.activity_name.clone()),
        );
        let mut activity = Map::new();
        activity.insert("root".to_owned(), node_to_value(&self.root));
        doc.insert("activity".to_owned(), Value::Object(activity));
        if self.screen_dims != RICO_SCREEN_DIMS {
            doc.insert(
                "screen_dims".to_owned(),
                Value::Array(vec![self.screen_dims.0.into(), self.screen_dims.1.into()]),
            );
        }
        Value::Object(doc)
    }

    /// Condensed HTML rendering of the full tree. Debug aid for comparing
    /// against whole-hierarchy prompting; not used by the pipeline.
    pub fn to_condensed_html(&self) -> String {
        let mut out = String::new();
        html_node(&self.root, &mut out);
        out
    }
}

fn html_node(node: &UiNode, out: &mut String) {
    let tag = simple_class_name(&node.class_name);
    out.push('<');
    out.push_str(tag);
    if let Some(id) = &node.resource_id {
        out.push_str(" id=\"");
        out.push_str(&html_escape(id));
        out.push('"');
    }
    out.push('>');
    if let Some(text) = &node.text {
        out.push_str(&html_escape(text));
    }
    for child in &node.children {
        html_node(child, out);
    }
    out.push_str("</");
    out.push_str(tag);
    out.push('>');
}

fn html_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// `android.widget.ImageView` -> `ImageView`.
pub fn simple_class_name(class_name: &str) -> &str {
    class_name.rsplit('.').next().unwrap_or(class_name)
}

fn node_to_value(node: &UiNode) -> Value {
    let mut obj = Map::new();
    obj.insert("class".to_owned(), Value::String(node.class_name.clone()));
    if let Some(id) = &node.resource_id {
        obj.insert("resource-id".to_owned(), Value::String(id.clone()));
    }
    if let Some(text) = &node.text {
        obj.insert("text".to_owned(), Value::String(text.clone()));
    }
    if let Some(desc) = &node.content_desc {
        obj.insert("content-desc".to_owned(), Value::String(desc.clone()));
    }
    obj.insert(
        "bounds".to_owned(),
        Value::Array(node.bounds.as_array().iter().map(|&v| v.into()).collect()),
    );
    if let Some(clickable) = node.clickable {
        obj.insert("clickable".to_owned(), Value::Bool(clickable));
    }
    if !node.children.is_empty() {
        obj.insert(
            "children".to_owned(),
            Value::Array(node.children.iter().map(node_to_value).collect()),
        );
    }
    Value::Object(obj)
}

/// Parses one Rico view-hierarchy document.
pub fn parse_screen(raw_document: &str, screen_id: &str) -> Result<Screen, ParseError> {
    let doc: Value = serde_json::from_str(raw_document)
        .map_err(|e| ParseError::MalformedDocument(e.to_string()))?;
    screen_from_value(&doc, screen_id)
}

/// Same as [`parse_screen`] for an already-decoded document.
pub fn screen_from_value(doc: &Value, screen_id: &str) -> Result<Screen, ParseError> {
    let obj = doc
        .as_object()
        .ok_or_else(|| ParseError::MalformedDocument("top level is not an object".to_owned()))?;

    let root_value = obj
        .get("activity")
        .and_then(|a| a.get("root"))
        .or_else(|| obj.get("root"))
        .filter(|r| r.is_object())
        .ok_or(ParseError::MissingRoot)?;

    let activity_name = obj
        .get("activity_name")
        .and_then(Value::as_str)
        .map(normalize_activity_name)
        .unwrap_or_default();

    let screen_dims = match obj.get("screen_dims") {
        None | Some(Value::Null) => RICO_SCREEN_DIMS,
        Some(v) => parse_dims(v).ok_or_else(|| {
            ParseError::MalformedDocument("screen_dims must be two positive integers".to_owned())
        })?,
    };

    let root = parse_node(root_value, &NodePath::root())?;
    Ok(Screen {
        screen_id: screen_id.to_owned(),
        activity_name,
        root,
        screen_dims,
        screenshot_ref: None,
    })
}

fn parse_dims(v: &Value) -> Option<(u32, u32)> {
    let arr = v.as_array()?;
    if arr.len() != 2 {
        return None;
    }
    let w = u32::try_from(arr[0].as_u64()?).ok()?;
    let h = u32::try_from(arr[1].as_u64()?).ok()?;
    (w > 0 && h > 0).then_some((w, h))
}

/// Rico stores `package/activity`, sometimes with a package-relative
/// `.Activity`; this returns the fully qualified activity class.
pub fn normalize_activity_name(raw: &str) -> String {
    let raw = raw.trim();
    match raw.split_once('/') {
        Some((package, activity)) if activity.starts_with('.') => {
            let mut out = String::from(package);
            out.push_str(activity);
            out
        }
        Some((_, activity)) => activity.to_owned(),
        None => raw.to_owned(),
    }
}

fn parse_node(value: &Value, path: &NodePath) -> Result<UiNode, ParseError> {
    let obj = value.as_object().ok_or_else(|| {
        ParseError::MalformedDocument(alloc::format!("node {path} is not an object"))
    })?;

    let class_name = string_prop(obj.get("class")).ok_or_else(|| {
        ParseError::MalformedDocument(alloc::format!("node {path} has no class"))
    })?;
    let bounds = parse_bounds(obj.get("bounds"), path)?;

    let mut children = Vec::new();
    if let Some(kids) = obj.get("children") {
        match kids {
            Value::Array(items) => {
                for item in items.iter().filter(|v| !v.is_null()) {
                    let child_path = path.child(children.len());
                    children.push(parse_node(item, &child_path)?);
                }
            }
            Value::Null => {}
            _ => {
                return Err(ParseError::MalformedDocument(alloc::format!(
                    "children of node {path} is not an array"
                )))
            }
        }
    }

    Ok(UiNode {
        class_name,
        resource_id: string_prop(obj.get("resource-id")),
        text: string_prop(obj.get("text")),
        content_desc: string_prop(obj.get("content-desc")),
        bounds,
        clickable: obj.get("clickable").and_then(Value::as_bool),
        children,
    })
}

/// Non-blank string value. Rico sometimes wraps strings in a list (e.g.
/// `"content-desc": [null]`); the first non-blank entry wins.
fn string_prop(value: Option<&Value>) -> Option<String> {
    match value? {
        Value::String(s) if !s.trim().is_empty() => Some(s.clone()),
        Value::Array(items) => items.iter().find_map(|v| string_prop(Some(v))),
        _ => None,
    }
}

fn parse_bounds(value: Option<&Value>, path: &NodePath) -> Result<Bounds, ParseError> {
    let invalid = |reason: &str| ParseError::InvalidBounds {
        path: path.to_string(),
        reason: reason.to_owned(),
    };
    let arr = value
        .ok_or_else(|| invalid("missing"))?
        .as_array()
        .ok_or_else(|| invalid("not an array"))?;
    if arr.len() != 4 {
        return Err(invalid("expected four values"));
    }
    let mut edges = [0i64; 4];
    for (slot, v) in edges.iter_mut().zip(arr) {
        *slot = v.as_i64().ok_or_else(|| invalid("non-integer value"))?;
    }
    Ok(Bounds::new(edges[0], edges[1], edges[2], edges[3]))
}
