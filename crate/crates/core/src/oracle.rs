//! Client side of the external render oracle.
//!
//! The oracle is a separate process speaking newline-delimited JSON over
//! stdio: one [`MeasureRequest`] per line in, one [`MeasureResponse`] per
//! line out. It only measures; scoring stays here.

use crate::geom::Rect;
use crate::plan::{Canvas, LayoutPlan};
use crate::svg::{Shape, SvgElement};
use crate::text::{TextBox, TextMeasurer};
use crate::verifier::{check_exec, score_scene, RewardBreakdown, Verification, VerifierConfig};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::{Duration, Instant};

pub const PROTOCOL_VERSION: &str = "v1";
pub const DEFAULT_TIMEOUT_MS: u64 = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCanvas {
    pub width: f64,
    pub height: f64,
}

impl From<Canvas> for OracleCanvas {
    fn from(c: Canvas) -> Self {
        OracleCanvas {
            width: c.width,
            height: c.height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRequest {
    pub id: String,
    pub svg: String,
    pub canvas: OracleCanvas,
    pub timeout_ms: u64,
}

impl MeasureRequest {
    pub fn new(id: impl Into<String>, svg: impl Into<String>, canvas: Canvas) -> MeasureRequest {
        MeasureRequest {
            id: id.into(),
            svg: svg.into(),
            canvas: canvas.into(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<WireBox> for Rect {
    fn from(b: WireBox) -> Rect {
        Rect::new(b.x, b.y, b.w, b.h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredElement {
    /// Pre-order index among all element descendants of the root.
    pub index: usize,
    pub kind: String,
    pub bbox: WireBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_bbox: Option<WireBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureResponse {
    pub version: String,
    pub id: String,
    pub ok: bool,
    #[serde(default)]
    pub elements: Vec<MeasuredElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub font_family: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("could not start oracle `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("oracle i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("oracle did not answer {id} within {ms} ms")]
    Timeout { id: String, ms: u64 },
    #[error("oracle closed its output")]
    Closed,
    #[error("malformed oracle response: {0}")]
    Malformed(String),
    #[error("response id {got} does not match request {expected}")]
    IdMismatch { expected: String, got: String },
    #[error("unsupported protocol version {0:?}")]
    Version(String),
}

/// Checks the protocol invariants of a decoded response.
pub fn validate_response(resp: &MeasureResponse) -> Result<(), OracleError> {
    if resp.version != PROTOCOL_VERSION {
        return Err(OracleError::Version(resp.version.clone()));
    }
    if !resp.ok && resp.error.as_deref().unwrap_or("").is_empty() {
        return Err(OracleError::Malformed(format!("{}: ok=false without error", resp.id)));
    }
    Ok(())
}

/// One oracle process with a single request in flight.
pub struct OracleClient {
    command: String,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    abandoned: HashSet<String>,
}

impl OracleClient {
    /// Starts `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<OracleClient, OracleError> {
        let spawn_err = |source| OracleError::Spawn {
            command: command.to_string(),
            source,
        };
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(spawn_err)?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(OracleClient {
            command: command.to_string(),
            child,
            stdin,
            lines: rx,
            abandoned: HashSet::new(),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Sends one request and waits up to its timeout for the matching line.
    /// Late answers to requests that already timed out are discarded.
    pub fn measure(&mut self, req: &MeasureRequest) -> Result<MeasureResponse, OracleError> {
        let mut line = serde_json::to_string(req).expect("plain data");
        line.push('\n');
        self.stdin.write_all(line.as_bytes())?;
        self.stdin.flush()?;
        let deadline = Instant::now() + Duration::from_millis(req.timeout_ms);
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let text = match self.lines.recv_timeout(left) {
                Ok(r) => r?,
                Err(RecvTimeoutError::Timeout) => {
                    self.abandoned.insert(req.id.clone());
                    return Err(OracleError::Timeout {
                        id: req.id.clone(),
                        ms: req.timeout_ms,
                    });
                }
                Err(RecvTimeoutError::Disconnected) => return Err(OracleError::Closed),
            };
            let resp: MeasureResponse =
                serde_json::from_str(&text).map_err(|e| OracleError::Malformed(e.to_string()))?;
            if resp.id != req.id && self.abandoned.remove(&resp.id) {
                continue;
            }
            validate_response(&resp)?;
            if resp.id != req.id {
                return Err(OracleError::IdMismatch {
                    expected: req.id.clone(),
                    got: resp.id,
                });
            }
            return Ok(resp);
        }
    }
}

impl Drop for OracleClient {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A fixed set of oracle processes; requests are spread round-robin.
pub struct OraclePool {
    workers: Vec<Mutex<OracleClient>>,
}

impl OraclePool {
    pub fn spawn(command: &str, workers: usize) -> Result<OraclePool, OracleError> {
        let workers = (0..workers.max(1))
            .map(|_| OracleClient::spawn(command).map(Mutex::new))
            .collect::<Result<_, _>>()?;
        Ok(OraclePool { workers })
    }

    pub fn len(&self) -> usize {
        self.workers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workers.is_empty()
    }

    /// Results in request order.
    pub fn measure_batch(&self, reqs: &[MeasureRequest]) -> Vec<Result<MeasureResponse, OracleError>> {
        let n = self.workers.len();
        let mut slots: Vec<Option<Result<MeasureResponse, OracleError>>> = (0..reqs.len()).map(|_| None).collect();
        let per_worker: Vec<Vec<(usize, Result<MeasureResponse, OracleError>)>> = std::thread::scope(|s| {
            let handles: Vec<_> = self
                .workers
                .iter()
                .enumerate()
                .map(|(w, worker)| {
                    s.spawn(move || {
                        let mut client = worker.lock().unwrap_or_else(|e| e.into_inner());
                        (w..reqs.len())
                            .step_by(n)
                            .map(|i| (i, client.measure(&reqs[i])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("oracle worker")).collect()
        });
        for (i, r) in per_worker.into_iter().flatten() {
            slots[i] = Some(r);
        }
        slots.into_iter().map(|s| s.expect("every request answered")).collect()
    }
}

/// Text boxes taken from one oracle response.
#[derive(Debug, Clone, Default)]
pub struct OracleMeasurer {
    text_boxes: HashMap<usize, Rect>,
}

impl OracleMeasurer {
    pub fn from_response(resp: &MeasureResponse) -> OracleMeasurer {
        OracleMeasurer {
            text_boxes: resp
                .elements
                .iter()
                .filter_map(|e| e.text_bbox.map(|b| (e.index, b.into())))
                .collect(),
        }
    }
}

impl TextMeasurer for OracleMeasurer {
    fn text_box(&self, element: &SvgElement) -> Option<TextBox> {
        let Shape::Text(span) = &element.shape else {
            return None;
        };
        let bbox = *self.text_boxes.get(&element.doc_index)?;
        Some(TextBox {
            bbox,
            baseline_y: element.transform.apply(span.origin).y,
            anchor_mode: span.anchor,
        })
    }
}

/// Verification with text boxes supplied by the oracle. A failed or
/// timed-out render is an execution failure.
pub fn verify_with_oracle(
    client: &mut OracleClient,
    id: &str,
    svg: &str,
    plan: &LayoutPlan,
    cfg: &VerifierConfig,
) -> Verification {
    let failed = |scene, diagnostics| Verification {
        breakdown: RewardBreakdown::failed(cfg.weights),
        scene,
        report: None,
        anchors: None,
        texts: None,
        diagnostics,
    };
    let exec = check_exec(svg);
    let scene = match exec.scene {
        Some(scene) if exec.valid => scene,
        scene => return failed(scene, exec.diagnostics),
    };
    match client.measure(&MeasureRequest::new(id, svg, plan.canvas)) {
        Ok(resp) if resp.ok => {
            let measurer = OracleMeasurer::from_response(&resp);
            score_scene(scene, plan, cfg, &cfg.weights, &measurer)
        }
        Ok(resp) => failed(Some(scene), vec![format!("oracle: {}", resp.error.unwrap_or_default())]),
        Err(e) => failed(Some(scene), vec![format!("oracle: {e}")]),
    }
}

/// Outcome of the protocol self-test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheckReport {
    pub requests: usize,
    pub answered: usize,
    pub ids_matched: usize,
    pub max_rect_error: Option<f64>,
    pub text_deterministic: bool,
    pub truncated_rejected: bool,
    pub max_latency_ms: f64,
    pub font_family: Option<String>,
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Rect with a known box, a text run and a truncated document, cycled over
/// `n` requests.
pub fn oracle_check(client: &mut OracleClient, n: usize) -> OracleCheckReport {
    const RECT: &str = r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600"><rect x="10" y="20" width="100" height="50"/></svg>"#;
    const TEXT: &str = r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600"><text x="100" y="100" font-size="16" font-family="Arial">AB</text></svg>"#;
    const TRUNCATED: &str =
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600"><rect x="10" y="20" width"#;
    let canvas = Canvas::default();
    let mut rep = OracleCheckReport {
        requests: n,
        answered: 0,
        ids_matched: 0,
        max_rect_error: None,
        text_deterministic: true,
        truncated_rejected: true,
        max_latency_ms: 0.0,
        font_family: None,
        failures: Vec::new(),
        passed: false,
    };
    let mut first_text: Option<Vec<MeasuredElement>> = None;
    let want = Rect::new(10.0, 20.0, 100.0, 50.0);
    for i in 0..n {
        let (kind, svg) = [("rect", RECT), ("text", TEXT), ("truncated", TRUNCATED)][i % 3];
        let req = MeasureRequest::new(format!("check-{i}"), svg, canvas);
        let t = Instant::now();
        let resp = client.measure(&req);
        let ms = t.elapsed().as_secs_f64() * 1000.0;
        rep.max_latency_ms = rep.max_latency_ms.max(ms);
        let resp = match resp {
            Ok(r) => r,
            Err(OracleError::IdMismatch { expected, got }) => {
                rep.answered += 1;
                rep.failures.push(format!("{expected}: answered as {got}"));
                continue;
            }
            Err(e) => {
                rep.failures.push(format!("{}: {e}", req.id));
                if matches!(e, OracleError::Closed | OracleError::Io(_)) {
                    break;
                }
                continue;
            }
        };
        rep.answered += 1;
        rep.ids_matched += 1;
        if rep.font_family.is_none() {
            rep.font_family = resp.font_family.clone();
        }
        match kind {
            "rect" => match resp.elements.iter().find(|e| e.kind == "rect") {
                Some(e) if resp.ok => {
                    let got: Rect = e.bbox.into();
                    let err = [got.x - want.x, got.y - want.y, got.w - want.w, got.h - want.h]
                        .iter()
                        .fold(0.0f64, |m, d| m.max(d.abs()));
                    rep.max_rect_error = Some(rep.max_rect_error.unwrap_or(0.0).max(err));
                }
                _ => rep.failures.push(format!("{}: rect not measured", req.id)),
            },
            "text" => {
                let ok_width = resp.ok
                    && resp
                        .elements
                        .iter()
                        .any(|e| e.kind == "text" && e.text_bbox.is_some_and(|b| b.w > 0.0));
                if !ok_width {
                    rep.failures.push(format!("{}: text box missing or empty", req.id));
                }
                match &first_text {
                    None => first_text = Some(resp.elements.clone()),
                    Some(prev) if *prev != resp.elements => rep.text_deterministic = false,
                    Some(_) => {}
                }
            }
            _ => {
                if resp.ok {
                    rep.truncated_rejected = false;
                }
            }
        }
    }
    if rep.max_rect_error.is_some_and(|e| e > 0.5) {
        rep.failures
            .push(format!("rect error {:.3} px exceeds 0.5", rep.max_rect_error.unwrap()));
    }
    if !rep.text_deterministic {
        rep.failures.push("text boxes differ across identical requests".into());
    }
    if !rep.truncated_rejected {
        rep.failures.push("truncated document reported ok".into());
    }
    if rep.max_latency_ms >= DEFAULT_TIMEOUT_MS as f64 {
        rep.failures
            .push(format!("latency {:.0} ms reaches the timeout", rep.max_latency_ms));
    }
    rep.passed = rep.failures.is_empty() && rep.ids_matched == n;
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_format() {
        let req = MeasureRequest::new("a", "<svg/>", Canvas::default());
        let v: serde_json::Value = serde_json::to_value(&req).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"id": "a", "svg": "<svg/>", "canvas": {"width": 800.0, "height": 600.0}, "timeout_ms": 5000})
        );
    }

    #[test]
    fn response_roundtrip() {
        let line = r#"{"version":"v1","id":"x","ok":true,"elements":[{"index":0,"kind":"text","bbox":{"x":1,"y":2,"w":3,"h":4},"text_bbox":{"x":1,"y":2,"w":3,"h":4}}]}"#;
        let r: MeasureResponse = serde_json::from_str(line).unwrap();
        validate_response(&r).unwrap();
        let again: MeasureResponse = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(again, r);
    }

    #[test]
    fn invariants_enforced() {
        let mut r = MeasureResponse {
            version: "v2".into(),
            id: "x".into(),
            ok: true,
            elements: vec![],
            error: None,
            font_family: None,
        };
        assert!(matches!(validate_response(&r), Err(OracleError::Version(_))));
        r.version = PROTOCOL_VERSION.into();
        r.ok = false;
        assert!(matches!(validate_response(&r), Err(OracleError::Malformed(_))));
        r.error = Some("timeout".into());
        assert!(validate_response(&r).is_ok());
    }
}
