use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use samstar::mask::io;
use samstar::segmenter::builtin::{self, BuiltinParams};
use samstar::segmenter::protocol::{self, Hello, HelloReply, Request, Response, WireMask};
use samstar::segmenter::{
    segment, serve_tcp, BuiltinSegmenter, ExternalOptions, ExternalSegmenter, ImageInput, Segmenter, SegmenterSpec,
    WorkerOptions,
};
use samstar::space::{AreaGate, ParamValue, SearchSpace};
use samstar::synth::{self, OverlapScene};
use samstar::{Error, ImageGrid};

fn permissive() -> BuiltinParams {
    BuiltinParams {
        pred_iou_thresh: 0.95,
        stability_score_thresh: 0.9,
        box_nms_thresh: 0.7,
        points_per_side: 48,
        crop_n_layers: 0,
        ..Default::default()
    }
}

#[test]
fn five_disjoint_disks_give_five_masks_of_the_right_area() {
    let scene = synth::disjoint_disks(4, 250.0).unwrap();
    let masks = builtin::segment(&scene.image, &permissive());
    assert_eq!(masks.len(), 5);
    for (k, inst) in scene.instances.iter().enumerate() {
        let r = 12.0 + 2.0 * k as f64;
        let expected = PI * r * r;
        let found = masks
            .iter()
            .find(|m| m.iou(&inst.mask).unwrap() > 0.5)
            .unwrap_or_else(|| panic!("disk {k} not found"));
        let rel = (found.area() as f64 - expected).abs() / expected;
        assert!(rel <= 0.05, "disk {k}: area {} vs {expected:.1}", found.area());
    }
}

#[test]
fn overlapping_pair_splits_or_merges_with_tolerance() {
    let scene = OverlapScene {
        pairs: 1,
        columns: 1,
        ..Default::default()
    }
    .build()
    .unwrap();
    let tolerant = builtin::segment(&scene.image, &permissive());
    assert_eq!(tolerant.len(), 2);
    for inst in &scene.instances {
        assert!(tolerant.iter().any(|m| m.iou(&inst.mask).unwrap() > 0.9));
    }
    let coarse = builtin::segment(&scene.image, &BuiltinParams { pred_iou_thresh: 0.85, ..permissive() });
    assert_eq!(coarse.len(), 1);
    let union = scene.truth().masks().iter().map(|m| m.area()).sum::<u64>()
        - scene.instances[0].mask.intersection_area(&scene.instances[1].mask);
    assert!(coarse[0].area().abs_diff(union) as f64 <= 0.05 * union as f64);
}

#[test]
fn zero_box_threshold_leaves_no_overlap() {
    let scene = OverlapScene::default().build().unwrap();
    let masks = builtin::segment(&scene.image, &BuiltinParams { box_nms_thresh: 0.0, ..permissive() });
    assert!(!masks.is_empty());
    for (i, a) in masks.iter().enumerate() {
        for b in &masks[i + 1..] {
            assert_eq!(a.intersection_area(b), 0);
        }
    }
}

fn disk_input() -> (ImageInput, samstar::Mask) {
    let scene = synth::single_disk(48, 9.0, 30000, 4000).unwrap();
    (ImageInput::from_grid(scene.image), scene.instances[0].mask.clone())
}

fn params() -> BTreeMap<String, ParamValue> {
    let mut p = BTreeMap::new();
    p.insert("points_per_side".to_string(), ParamValue::Int(16));
    p.insert("crop_n_layers".to_string(), ParamValue::Int(0));
    p
}

fn spawn_worker(protocol: u32) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let opts = WorkerOptions {
        protocol,
        ..Default::default()
    };
    thread::spawn(move || serve_tcp(listener, Arc::new(BuiltinSegmenter), opts));
    addr
}

fn client(spec: &str, timeout: Duration, retries: u32) -> ExternalSegmenter {
    ExternalSegmenter::new(
        spec.parse().unwrap(),
        ExternalOptions {
            timeout,
            retries,
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn tcp_worker_matches_builtin() {
    let addr = spawn_worker(protocol::PROTOCOL_VERSION);
    let ext = client(&format!("tcp:{addr}"), Duration::from_secs(20), 0);
    assert!(ext.handshake().unwrap().starts_with("samstar-builtin"));
    let (img, disk) = disk_input();
    let remote = ext.segment_params(&img, &params(), 0).unwrap();
    let local = BuiltinSegmenter.segment_params(&img, &params(), 0).unwrap();
    assert_eq!(remote, local);
    assert_eq!(remote.masks(), &[disk]);

    let space = SearchSpace::standard(AreaGate::fallback(48 * 48));
    let v = space.midpoint();
    let tagged = segment(&ext, &img, &v, 1).unwrap();
    assert_eq!(tagged.provenance().unwrap().genome_hash, v.hash().to_string());
    assert_eq!(tagged.provenance().unwrap().segmenter, format!("tcp:{addr}"));
}

#[test]
fn images_on_disk_travel_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth::single_disk(40, 8.0, 30000, 4000).unwrap();
    let path = dir.path().join("disk.png");
    io::write_image(&path, &scene.image).unwrap();
    let addr = spawn_worker(protocol::PROTOCOL_VERSION);
    let ext = client(&format!("tcp:{addr}"), Duration::from_secs(20), 0);
    let set = ext.segment_params(&ImageInput::load(&path).unwrap(), &params(), 0).unwrap();
    assert_eq!(set.masks(), &[scene.instances[0].mask.clone()]);
}

#[test]
fn version_skew_names_both_versions() {
    let addr = spawn_worker(7);
    let ext = client(&format!("tcp:{addr}"), Duration::from_secs(20), 0);
    match ext.handshake() {
        Err(Error::Protocol(msg)) => assert!(msg.contains('1') && msg.contains('7'), "{msg}"),
        other => panic!("expected a protocol error, got {other:?}"),
    }
}

#[test]
fn dead_endpoint_is_worker_down() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let ext = client(&format!("tcp:127.0.0.1:{port}"), Duration::from_millis(500), 1);
    assert!(matches!(ext.handshake(), Err(Error::WorkerDown(_))));
    let (img, _) = disk_input();
    assert!(matches!(ext.segment_params(&img, &params(), 0), Err(Error::WorkerDown(_))));
    let cmd = client("cmd:/nonexistent/worker --device cpu", Duration::from_millis(500), 0);
    assert!(matches!(cmd.handshake(), Err(Error::WorkerDown(_))));
}

/// A worker that handshakes and then never answers.
fn silent_worker() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let stream = stream.unwrap();
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut w = stream;
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let reply = HelloReply { protocol: 1, worker: "silent".into(), error: None };
                writeln!(w, "{}", protocol::encode(&reply)).unwrap();
                while reader.read_line(&mut line).map(|n| n > 0).unwrap_or(false) {}
            });
        }
    });
    addr
}

#[test]
fn unanswered_requests_time_out() {
    let addr = silent_worker();
    let ext = client(&format!("tcp:{addr}"), Duration::from_millis(300), 0);
    let (img, _) = disk_input();
    let start = Instant::now();
    assert!(matches!(ext.segment_params(&img, &params(), 0), Err(Error::SegmenterTimeout(300))));
    assert!(start.elapsed() < Duration::from_secs(5));
}

/// First connection: answers with a stale id, then hangs up. Later
/// connections: answers properly. Records every request id it sees.
fn flaky_worker(seen: Arc<std::sync::Mutex<Vec<u64>>>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        for (n, stream) in listener.incoming().enumerate() {
            let stream: TcpStream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut w = stream;
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let _: Hello = protocol::decode(&line).unwrap();
            let reply = HelloReply { protocol: 1, worker: "flaky".into(), error: None };
            writeln!(w, "{}", protocol::encode(&reply)).unwrap();
            line.clear();
            if reader.read_line(&mut line).unwrap() == 0 {
                continue;
            }
            let req: Request = protocol::decode(&line).unwrap();
            seen.lock().unwrap().push(req.id);
            if n == 0 {
                let stale = Response::failure(req.id + 1000, "stale");
                writeln!(w, "{}", protocol::encode(&stale)).unwrap();
                continue;
            }
            let grid = io::decode_png(&base64_decode(req.image_b64.as_deref().unwrap())).unwrap();
            let set = BuiltinSegmenter.segment_params(&ImageInput::from_grid(grid), &req.params, 0).unwrap();
            let resp = Response {
                id: req.id,
                masks: set.masks().iter().map(WireMask::from_mask).collect(),
                elapsed_ms: 0,
                error: None,
            };
            writeln!(w, "{}", protocol::encode(&resp)).unwrap();
        }
    });
    addr
}

fn base64_decode(s: &str) -> Vec<u8> {
    use base64::Engine as _;
    base64::engine::general_purpose::STANDARD.decode(s).unwrap()
}

#[test]
fn retries_resend_the_same_id_on_a_fresh_connection() {
    let seen = Arc::new(std::sync::Mutex::new(Vec::new()));
    let addr = flaky_worker(Arc::clone(&seen));
    let ext = client(&format!("tcp:{addr}"), Duration::from_secs(20), 2);
    let (img, disk) = disk_input();
    let set = ext.segment_params(&img, &params(), 0).unwrap();
    assert_eq!(set.masks(), &[disk]);
    let ids = seen.lock().unwrap().clone();
    assert_eq!(ids.len(), 2);
    assert_eq!(ids[0], ids[1]);
}

#[test]
fn command_worker_over_stdio() {
    let spec = format!("cmd:{} worker", env!("CARGO_BIN_EXE_samstar"));
    let ext = client(&spec, Duration::from_secs(60), 0);
    assert!(ext.handshake().unwrap().starts_with("samstar-builtin"));
    let (img, disk) = disk_input();
    assert_eq!(ext.segment_params(&img, &params(), 0).unwrap().masks(), &[disk.clone()]);
    // Second request reuses the pooled process.
    assert_eq!(ext.segment_params(&img, &params(), 0).unwrap().masks(), &[disk]);

    let skewed = format!("cmd:{} worker --protocol-version 9", env!("CARGO_BIN_EXE_samstar"));
    let ext = client(&skewed, Duration::from_secs(60), 0);
    match ext.handshake() {
        Err(Error::Protocol(msg)) => assert!(msg.contains('9'), "{msg}"),
        other => panic!("expected a protocol error, got {other:?}"),
    }
}

#[test]
fn worker_errors_surface_as_protocol_errors() {
    let addr = spawn_worker(protocol::PROTOCOL_VERSION);
    let ext = client(&format!("tcp:{addr}"), Duration::from_secs(20), 0);
    let mut bad = params();
    bad.insert("no_such_knob".into(), ParamValue::Int(1));
    let (img, _) = disk_input();
    match ext.segment_params(&img, &bad, 0) {
        Err(Error::Protocol(msg)) => assert!(msg.contains("no_such_knob"), "{msg}"),
        other => panic!("expected a protocol error, got {other:?}"),
    }
}

#[test]
fn spec_open_builds_the_right_segmenter() {
    let seg = SegmenterSpec::Builtin.open(ExternalOptions::default()).unwrap();
    assert_eq!(seg.id(), "builtin");
    let blank = ImageInput::from_grid(ImageGrid::filled(32, 32, 500).unwrap());
    assert!(seg.segment_params(&blank, &params(), 0).unwrap().is_empty());
    let zero = ExternalOptions {
        timeout: Duration::ZERO,
        ..Default::default()
    };
    assert!(matches!(
        "tcp:127.0.0.1:1".parse::<SegmenterSpec>().unwrap().open(zero),
        Err(Error::Config(_))
    ));
}
