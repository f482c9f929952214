//! The four provider operations: typed requests and response parsing on
//! top of [`ProviderClient`].

use alttext_core::prompt::{split_prompt, ICON_LABEL_PROMPT};
use alttext_core::raster::{Rgba, ICON_SIDE};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{CallRecord, ProviderClient, ProviderError, Response};
use crate::imageio;

pub const DEFAULT_OCR_MIN_CONFIDENCE: f64 = 0.3;
const LABEL_MAX_TOKENS: u32 = 16;
const ALTTEXT_MAX_TOKENS: u32 = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrItem {
    pub text: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OcrResult {
    pub items: Vec<OcrItem>,
}

impl OcrResult {
    pub fn texts(&self) -> Vec<String> {
        self.items.iter().map(|i| i.text.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IconLabel {
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltText {
    pub text: String,
    pub record: CallRecord,
}

/// Reduces a model reply to a bare phrase: drops code fences and blank
/// lines, keeps the first remaining line, strips markdown emphasis,
/// surrounding quotes and a trailing period.
pub fn normalize_reply(raw: &str) -> String {
    let line = raw
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with("```"))
        .unwrap_or("");
    let mut s = line.trim_start_matches('#').trim();
    loop {
        let before = s;
        for (open, close) in [("**", "**"), ("__", "__"), ("\"", "\""), ("'", "'"), ("`", "`"), ("\u{201c}", "\u{201d}"), ("\u{2018}", "\u{2019}")] {
            if s.len() >= open.len() + close.len() && s.starts_with(open) && s.ends_with(close) {
                s = s[open.len()..s.len() - close.len()].trim();
            }
        }
        if let Some(t) = s.strip_suffix('.') {
            s = t.trim_end();
        }
        if s == before {
            break;
        }
    }
    s.to_string()
}

fn chat_content(resp: &Response, kind: &'static str) -> Result<String, ProviderError> {
    let content = resp
        .body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ProviderError::BadResponse {
            kind,
            reason: "no choices[0].message.content".into(),
        })?;
    let text = normalize_reply(content);
    if text.is_empty() {
        return Err(ProviderError::EmptyResponse(kind));
    }
    Ok(text)
}

/// Resamples to 128x128, remotely when a client is given, else by nearest
/// neighbor.
pub fn upscale_icon(
    client: Option<&ProviderClient>,
    crop: &Rgba,
) -> Result<(Rgba, Option<CallRecord>), ProviderError> {
    let Some(client) = client else {
        return Ok((crop.to_icon_size(), None));
    };
    let payload = json!({
        "model": client.model(),
        "image_base64": imageio::encode_png_base64(crop),
        "width": ICON_SIDE,
        "height": ICON_SIDE,
    });
    let decode = |resp: &Response| -> Result<Rgba, ProviderError> {
        let b64 = resp
            .body
            .get("image_base64")
            .and_then(Value::as_str)
            .ok_or(ProviderError::EmptyResponse("upscaler"))?;
        imageio::decode_base64(b64).map_err(|e| ProviderError::DecodeError(e.to_string()))
    };
    let (resp, rec) = client.request_checked(&payload, |r| decode(r).map(|_| ()))?;
    let img = decode(&resp)?;
    let img = if (img.width(), img.height()) == (ICON_SIDE, ICON_SIDE) {
        img
    } else {
        log::warn!("upscaler returned {}x{}; resampling", img.width(), img.height());
        img.to_icon_size()
    };
    Ok((img, Some(rec)))
}

fn parse_ocr(body: &Value) -> Result<Vec<OcrItem>, ProviderError> {
    let bad = |reason: String| ProviderError::BadResponse { kind: "ocr", reason };
    let items = body
        .get("items")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("no items array".into()))?;
    items
        .iter()
        .map(|it| {
            let text = it.get("text").and_then(Value::as_str).ok_or_else(|| bad("item without text".into()))?;
            let confidence = it
                .get("confidence")
                .and_then(Value::as_f64)
                .ok_or_else(|| bad("item without confidence".into()))?;
            if !(0.0..=1.0).contains(&confidence) {
                return Err(bad(format!("confidence {confidence} outside [0, 1]")));
            }
            Ok(OcrItem { text: text.to_string(), confidence })
        })
        .collect()
}

/// Text found in the icon, keeping items at or above `min_confidence`.
pub fn ocr_icon(
    client: &ProviderClient,
    icon: &Rgba,
    min_confidence: f64,
) -> Result<(OcrResult, CallRecord), ProviderError> {
    let payload = json!({
        "model": client.model(),
        "image_base64": imageio::encode_png_base64(icon),
    });
    let (resp, rec) = client.request_checked(&payload, |r| parse_ocr(&r.body).map(|_| ()))?;
    let items = parse_ocr(&resp.body)?
        .into_iter()
        .filter(|i| i.confidence >= min_confidence)
        .filter_map(|i| {
            let text = i.text.trim();
            (!text.is_empty()).then(|| OcrItem { text: text.to_string(), confidence: i.confidence })
        })
        .collect();
    Ok((OcrResult { items }, rec))
}

/// Zero-shot class label for an upscaled icon.
pub fn label_icon(client: &ProviderClient, icon: &Rgba) -> Result<(IconLabel, CallRecord), ProviderError> {
    let url = format!("data:image/png;base64,{}", imageio::encode_png_base64(icon));
    let payload = json!({
        "model": client.model(),
        "messages": [{
            "role": "user",
            "content": [
                { "type": "text", "text": ICON_LABEL_PROMPT },
                { "type": "image_url", "image_url": { "url": url } },
            ],
        }],
        "max_tokens": client.config().max_tokens.unwrap_or(LABEL_MAX_TOKENS),
        "temperature": 0,
    });
    let (resp, rec) =
        client.request_checked(&payload, |r| chat_content(r, "vision_labeler").map(|_| ()))?;
    let label = chat_content(&resp, "vision_labeler")?;
    Ok((IconLabel { label }, rec))
}

/// Alt-text for an assembled prompt. The first sentence goes out as the
/// system message, the rest as the user message.
pub fn generate_alttext(client: &ProviderClient, prompt: &str) -> Result<AltText, ProviderError> {
    let (system, user) = split_prompt(prompt).map_err(|e| ProviderError::BadResponse {
        kind: "chat_llm",
        reason: e.to_string(),
    })?;
    let payload = json!({
        "model": client.model(),
        "messages": [
            { "role": "system", "content": system },
            { "role": "user", "content": user },
        ],
        "max_tokens": client.config().max_tokens.unwrap_or(ALTTEXT_MAX_TOKENS),
        "temperature": 0,
    });
    let (resp, record) = client.request_checked(&payload, |r| chat_content(r, "chat_llm").map(|_| ()))?;
    Ok(AltText {
        text: chat_content(&resp, "chat_llm")?,
        record,
    })
}
