//! Object caption refinement.
//!
//! Raw object captions come from a captioner run on a background-blurred
//! frame, so they often open with artifacts like "A blurry photo of". The
//! refiner backend (an instruction-following LLM) rewrites them against the
//! frame-level description. Without a backend, [`fallback_refine`] strips
//! those artifact prefixes and nothing else.

use crate::backends::{BackendError, Refiner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Provenance string recorded when only the fallback refiner ran.
pub const FALLBACK_VERSION: &str = "fallback";

const ARTIFACT_PREFIXES: [&str; 5] = [
    "a blurry image of",
    "a blurry photo of",
    "a close up of",
    "a picture of",
    "an image of",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefineError {
    #[error("refinement failed: {0}")]
    RefinementFailed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRequest {
    pub frame_caption: String,
    /// Labels of every kept object in the frame, in document order.
    pub scene_labels: Vec<String>,
    pub raw_object_caption: String,
    pub position_phrase: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementSource {
    Backend,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refined {
    pub text: String,
    pub source: RefinementSource,
}

/// The refinement prompt: the fixed instruction with the frame description
/// and scene labels substituted, then the raw caption on its own line.
pub fn build_prompt(req: &RefinementRequest) -> String {
    format!(
        "Given the following visual-scene description {} and objects in the scene {}, \
         refine the following object-level description to make sure: \
         1. The object is reasonable to exist in this scene. \
         2. The description style is natural and easy to understand. \
         3. Include relevant information from the visual-scene description.\n{}",
        req.frame_caption,
        req.scene_labels.join(", "),
        req.raw_object_caption
    )
}

fn strip_prefix_ci<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    let head = text.get(..prefix.len())?;
    if !head.eq_ignore_ascii_case(prefix) {
        return None;
    }
    let rest = &text[prefix.len()..];
    // whole-word match only
    if rest.is_empty() || rest.starts_with(char::is_whitespace) {
        Some(rest.trim_start())
    } else {
        None
    }
}

fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Strips leading captioner artifacts ("A close up of", "A blurry photo of",
/// ...) case-insensitively and re-capitalizes. Repeated prefixes are all
/// removed so the function is idempotent. If nothing would remain, the raw
/// caption comes back unchanged.
pub fn fallback_refine(req: &RefinementRequest) -> Result<String, RefineError> {
    let raw = req.raw_object_caption.trim();
    if raw.is_empty() {
        return Err(RefineError::RefinementFailed("empty raw object caption".into()));
    }
    let mut rest = raw;
    let mut stripped = false;
    while let Some(next) = ARTIFACT_PREFIXES.iter().find_map(|p| strip_prefix_ci(rest, p)) {
        rest = next;
        stripped = true;
    }
    if !stripped || rest.is_empty() {
        return Ok(req.raw_object_caption.clone());
    }
    Ok(capitalize(rest))
}

/// Reduces backend output to one line of text: trims, drops wrapping
/// quotes, keeps the first non-empty paragraph and collapses whitespace.
pub fn normalize_output(text: &str) -> String {
    let first = text
        .split("\n\n")
        .map(str::trim)
        .find(|p| !p.is_empty())
        .unwrap_or("");
    let unquoted = first
        .strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .unwrap_or(first);
    unquoted.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Refines through `backend`, retrying once if it is unavailable. Any
/// backend failure or empty answer falls back to [`fallback_refine`].
pub fn refine(req: &RefinementRequest, backend: Option<&dyn Refiner>) -> Result<Refined, RefineError> {
    if let Some(backend) = backend {
        let prompt = build_prompt(req);
        let mut answer = backend.refine(&prompt, req);
        if matches!(answer, Err(BackendError::Unavailable { .. })) {
            answer = backend.refine(&prompt, req);
        }
        if let Ok(text) = answer {
            let text = normalize_output(&text);
            if !text.is_empty() {
                return Ok(Refined {
                    text,
                    source: RefinementSource::Backend,
                });
            }
        }
    }
    Ok(Refined {
        text: fallback_refine(req)?,
        source: RefinementSource::Fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::fixture::EchoRefiner;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn req(raw: &str) -> RefinementRequest {
        RefinementRequest {
            frame_caption: "A man on a street".into(),
            scene_labels: vec!["person".into(), "car".into()],
            raw_object_caption: raw.into(),
            position_phrase: "center".into(),
        }
    }

    #[test]
    fn prompt_matches_template() {
        let p = build_prompt(&req("a car parked"));
        assert_eq!(
            p,
            "Given the following visual-scene description A man on a street and objects in the \
             scene person, car, refine the following object-level description to make sure: \
             1. The object is reasonable to exist in this scene. 2. The description style is \
             natural and easy to understand. 3. Include relevant information from the \
             visual-scene description.\na car parked"
        );
        assert_eq!(p, build_prompt(&req("a car parked")));
    }

    #[test]
    fn prompt_with_no_labels_is_well_formed() {
        let mut r = req("a car parked");
        r.scene_labels.clear();
        let p = build_prompt(&r);
        assert!(p.contains("objects in the scene , refine"));
        assert!(p.ends_with("\na car parked"));
    }

    #[test]
    fn fallback_examples() {
        let f = |s: &str| fallback_refine(&req(s)).unwrap();
        assert_eq!(
            f("A close up of a car is parking by the street."),
            "A car is parking by the street."
        );
        assert_eq!(
            f("A blurry image of a bus driving down the snowy street."),
            "A bus driving down the snowy street."
        );
        assert_eq!(f("A blurry photo of a large black suitcase"), "A large black suitcase");
        assert_eq!(f("A BLURRY PHOTO OF a large black suitcase"), "A large black suitcase");
        assert_eq!(f("A man in a black shirt strolling."), "A man in a black shirt strolling.");
        assert_eq!(f("A close up of"), "A close up of");
        assert_eq!(f("A close upofficial"), "A close upofficial");
        assert!(fallback_refine(&req("  ")).is_err());
    }

    struct Down(AtomicUsize);

    impl Refiner for Down {
        fn version(&self) -> String {
            "down".into()
        }
        fn refine(&self, _: &str, _: &RefinementRequest) -> Result<String, BackendError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Err(BackendError::Unavailable { backend: "refiner".into(), reason: "down".into() })
        }
    }

    struct Chatty;

    impl Refiner for Chatty {
        fn version(&self) -> String {
            "chatty".into()
        }
        fn refine(&self, _: &str, _: &RefinementRequest) -> Result<String, BackendError> {
            Ok("  \"A white   sedan\nparked.\"\n\nHope this helps!".into())
        }
    }

    #[test]
    fn echo_backend_returns_raw_caption() {
        let out = refine(&req("A man in a black shirt strolling."), Some(&EchoRefiner)).unwrap();
        assert_eq!(out.text, "A man in a black shirt strolling.");
        assert_eq!(out.source, RefinementSource::Backend);
    }

    #[test]
    fn unavailable_backend_retries_once_then_falls_back() {
        let down = Down(AtomicUsize::new(0));
        let out = refine(
            &req("A blurry image of a bus driving down the snowy street."),
            Some(&down),
        )
        .unwrap();
        assert_eq!(out.text, "A bus driving down the snowy street.");
        assert_eq!(out.source, RefinementSource::Fallback);
        assert_eq!(down.0.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn backend_output_is_reduced_to_one_line() {
        let out = refine(&req("a car"), Some(&Chatty)).unwrap();
        assert_eq!(out.text, "A white sedan parked.");
    }

    proptest! {
        #[test]
        fn fallback_is_idempotent_and_nonempty(
            prefix in proptest::sample::select(vec!["", "A close up of ", "a blurry photo of ", "AN IMAGE OF ", "A close up of a picture of "]),
            body in "[a-zA-Z ]{0,30}",
        ) {
            let raw = format!("{prefix}{body}");
            prop_assume!(!raw.trim().is_empty());
            let once = fallback_refine(&req(&raw)).unwrap();
            prop_assert!(!once.trim().is_empty());
            let twice = fallback_refine(&req(&once)).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn prompt_contains_both_captions(frame in "[a-zA-Z ,.]{1,40}", raw in "[a-zA-Z ,.]{1,40}") {
            let mut r = req(&raw);
            r.frame_caption = frame.clone();
            let p = build_prompt(&r);
            prop_assert!(p.contains(&frame));
            prop_assert!(p.contains(&raw));
        }
    }
}
