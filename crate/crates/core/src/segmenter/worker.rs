use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use base64::Engine as _;

use super::protocol::{self, Hello, HelloReply, Request, Response, WireMask};
use super::{ImageInput, Segmenter};
use crate::error::{Error, Result};
use crate::mask::io;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerOptions {
    pub protocol: u32,
    pub name: String,
    /// Responses remembered for answering repeated ids.
    pub remember: usize,
}

impl Default for WorkerOptions {
    fn default() -> Self {
        WorkerOptions {
            protocol: protocol::PROTOCOL_VERSION,
            name: format!("samstar-builtin {}", env!("CARGO_PKG_VERSION")),
            remember: 256,
        }
    }
}

fn load(req: &Request) -> Result<ImageInput> {
    match (&req.image_path, &req.image_b64) {
        (Some(p), _) => ImageInput::load(Path::new(p)),
        (None, Some(b64)) => {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(b64)
                .map_err(|e| Error::Protocol(format!("image_b64: {e}")))?;
            Ok(ImageInput::from_grid(io::decode_png(&bytes)?))
        }
        (None, None) => Err(Error::Protocol("request carries neither image_path nor image_b64".into())),
    }
}

fn answer(seg: &dyn Segmenter, line: &str) -> Response {
    let req: Request = match protocol::decode(line) {
        Ok(r) => r,
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|i| i.as_u64()))
                .unwrap_or(0);
            return Response::failure(id, e.to_string());
        }
    };
    let start = Instant::now();
    let result = load(&req).and_then(|img| seg.segment_params(&img, &req.params, req.seed.unwrap_or(0)));
    match result {
        Ok(set) => Response {
            id: req.id,
            masks: set.masks().iter().map(WireMask::from_mask).collect(),
            elapsed_ms: start.elapsed().as_millis() as u64,
            error: None,
        },
        Err(e) => Response::failure(req.id, e.to_string()),
    }
}

/// Serves one session: handshake, then one response line per request line
/// until the input ends. Repeated request ids get the remembered response.
pub fn serve<R: BufRead, W: Write>(mut input: R, mut output: W, seg: &dyn Segmenter, opts: &WorkerOptions) -> Result<()> {
    let io_err = |e| Error::io("worker stream", e);
    let write_line =|out: &mut W, line: &str| -> Result<()> {
        out.write_all(line.as_bytes()).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)?;
        out.flush().map_err(io_err)
    };
    let mut first = String::new();
    if input.read_line(&mut first).map_err(io_err)? == 0 {
        return Ok(());
    }
    let refuse = |msg: String| HelloReply {
        protocol: opts.protocol,
        worker: opts.name.clone(),
        error: Some(msg),
    };
    match protocol::decode::<Hello>(&first) {
        Err(e) => {
            write_line(&mut output, &protocol::encode(&refuse(e.to_string())))?;
            return Err(e);
        }
        Ok(hello) if hello.protocol != opts.protocol => {
            let msg = format!(
                "protocol version mismatch: worker speaks {}, client `{}` speaks {}",
                opts.protocol, hello.client, hello.protocol
            );
            write_line(&mut output, &protocol::encode(&refuse(msg.clone())))?;
            return Err(Error::Protocol(msg));
        }
        Ok(_) => write_line(
            &mut output,
            &protocol::encode(&HelloReply {
                protocol: opts.protocol,
                worker: opts.name.clone(),
                error: None,
            }),
        )?,
    }

    let mut remembered: HashMap<u64, String> = HashMap::new();
    let mut order: VecDeque<u64> = VecDeque::new();
    let mut line = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line).map_err(io_err)? == 0 {
            return Ok(());
        }
        if line.trim().is_empty() {
            continue;
        }
        let id = serde_json::from_str::<serde_json::Value>(&line)
            .ok()
            .and_then(|v| v.get("id").and_then(|i| i.as_u64()));
        if let Some(cached) = id.and_then(|i| remembered.get(&i)) {
            write_line(&mut output, cached)?;
            continue;
        }
        let resp = answer(seg, &line);
        let encoded = protocol::encode(&resp);
        write_line(&mut output, &encoded)?;
        if let Some(i) = id.filter(|&i| i == resp.id) {
            remembered.insert(i, encoded);
            order.push_back(i);
            if order.len() > opts.remember {
                if let Some(old) = order.pop_front() {
                    remembered.remove(&old);
                }
            }
        }
    }
}

/// Accepts connections forever, one session thread each.
pub fn serve_tcp(listener: TcpListener, seg: Arc<dyn Segmenter>, opts: WorkerOptions) -> Result<()> {
    for stream in listener.incoming() {
        let stream = stream.map_err(|e| Error::io("accepting connection", e))?;
        let seg = Arc::clone(&seg);
        let opts = opts.clone();
        thread::spawn(move || {
            let reader = match stream.try_clone() {
                Ok(r) => BufReader::new(r),
                Err(e) => {
                    log::warn!("connection setup failed: {e}");
                    return;
                }
            };
            if let Err(e) = serve(reader, stream, seg.as_ref(), &opts) {
                log::warn!("session ended: {e}");
            }
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmenter::BuiltinSegmenter;
    use crate::synth;
    use std::collections::BTreeMap;

    fn session(lines: &[String], opts: &WorkerOptions) -> (Result<()>, Vec<String>) {
        let input = lines.join("\n") + "\n";
        let mut out = Vec::new();
        let r = serve(input.as_bytes(), &mut out, &BuiltinSegmenter, opts);
        (r, String::from_utf8(out).unwrap().lines().map(String::from).collect())
    }

    fn hello(v: u32) -> String {
        protocol::encode(&Hello { protocol: v, client: "test".into() })
    }

    #[test]
    fn answers_inline_images_and_repeats_ids_verbatim() {
        let scene = synth::single_disk(40, 8.0, 30000, 4000).unwrap();
        let b64 = base64::engine::general_purpose::STANDARD.encode(io::encode_png(&scene.image).unwrap());
        let mut params = BTreeMap::new();
        params.insert("points_per_side".to_string(), crate::space::ParamValue::Int(16));
        params.insert("crop_n_layers".to_string(), crate::space::ParamValue::Int(0));
        let req = protocol::encode(&Request { id: 5, image_path: None, image_b64: Some(b64), params, seed: None });
        let (r, out) = session(&[hello(1), req.clone(), req], &WorkerOptions::default());
        r.unwrap();
        assert_eq!(out.len(), 3);
        let reply: HelloReply = protocol::decode(&out[0]).unwrap();
        assert!(reply.error.is_none());
        let resp: Response = protocol::decode(&out[1]).unwrap();
        assert_eq!(resp.id, 5);
        let set = resp.mask_set(40, 40).unwrap();
        assert_eq!(set.masks(), &[scene.instances[0].mask.clone()]);
        assert_eq!(out[1], out[2]);
    }

    #[test]
    fn version_skew_is_refused() {
        let (r, out) = session(&[hello(2)], &WorkerOptions::default());
        assert!(matches!(r, Err(Error::Protocol(_))));
        let reply: HelloReply = protocol::decode(&out[0]).unwrap();
        let msg = reply.error.unwrap();
        assert!(msg.contains('1') && msg.contains('2'), "{msg}");
    }

    #[test]
    fn bad_requests_get_error_responses() {
        let unknown = r#"{"id":9,"image_path":"/nonexistent.png","params":{"bogus":1}}"#.to_string();
        let (r, out) = session(&[hello(1), "{oops".into(), unknown], &WorkerOptions::default());
        r.unwrap();
        let a: Response = protocol::decode(&out[1]).unwrap();
        assert_eq!(a.id, 0);
        assert!(a.error.is_some());
        let b: Response = protocol::decode(&out[2]).unwrap();
        assert_eq!(b.id, 9);
        assert!(b.error.is_some());
    }
}
