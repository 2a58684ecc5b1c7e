//! Serve the builtin segmenter over TCP and call it through the external
//! client, the same path a model-backed worker uses.
//!
//! cargo run --release --example worker_protocol

use std::net::TcpListener;
use std::sync::Arc;
use std::time::Duration;

use samstar::segmenter::{
    segment, serve_tcp, BuiltinSegmenter, ExternalOptions, ExternalSegmenter, ImageInput, SegmenterSpec,
    WorkerOptions,
};
use samstar::space::{AreaGate, SearchSpace};
use samstar::synth;

fn main() -> samstar::Result<()> {
    let listener = TcpListener::bind("127.0.0.1:0").map_err(|e| samstar::Error::io("binding", e))?;
    let addr = listener.local_addr().map_err(|e| samstar::Error::io("local address", e))?;
    std::thread::spawn(move || serve_tcp(listener, Arc::new(BuiltinSegmenter), WorkerOptions::default()));

    let spec: SegmenterSpec = format!("tcp:{addr}").parse()?;
    let client = ExternalSegmenter::new(
        spec,
        ExternalOptions { timeout: Duration::from_secs(30), ..Default::default() },
    )?;
    println!("connected to {}", client.handshake()?);

    let scene = synth::disjoint_disks(2, 250.0)?;
    let image = ImageInput::from_grid(scene.image.clone());
    let space = SearchSpace::standard(AreaGate::fallback(scene.image.area()));
    let v = space.midpoint();
    let remote = segment(&client, &image, &v, 0)?;
    let local = segment(&BuiltinSegmenter, &image, &v, 0)?;
    println!("remote {} masks, local {} masks, identical: {}", remote.len(), local.len(), remote.masks() == local.masks());
    let p = remote.provenance().expect("tagged");
    println!("provenance: segmenter {}, genome {}", p.segmenter, p.genome_hash);
    Ok(())
}
