use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use cs3_core::raster::{rle_encode, BinaryMask, RasterImage};
use cs3_core::segmenter::wire::{encode_response, WireResponse};
use cs3_core::segmenter::{RemoteSegmenter, Segmenter, SegmenterError};

struct Captured {
    request_line: String,
    content_type: Option<String>,
    body: Vec<u8>,
}

/// Serves one request with a canned reply and hands back what it received.
fn stub(status: u16, reply: Vec<u8>) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut request_line = String::new();
        reader.read_line(&mut request_line).unwrap();
        let (mut len, mut content_type) = (0usize, None);
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            let (k, v) = line.split_once(':').unwrap();
            match k.to_ascii_lowercase().as_str() {
                "content-length" => len = v.trim().parse().unwrap(),
                "content-type" => content_type = Some(v.trim().to_owned()),
                _ => {}
            }
        }
        let mut body = vec![0; len];
        reader.read_exact(&mut body).unwrap();
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
            reply.len()
        )
        .unwrap();
        stream.write_all(&reply).unwrap();
        stream.flush().unwrap();
        tx.send(Captured { request_line, content_type, body }).unwrap();
    });
    (format!("http://{addr}"), rx)
}

fn client(url: &str) -> RemoteSegmenter {
    RemoteSegmenter::new(url, Duration::from_secs(5))
}

fn image(w: u32, h: u32) -> RasterImage {
    let mut img = RasterImage::filled(w, h, [250, 250, 250]).unwrap();
    img.set(1, 1, [120, 60, 140]);
    img
}

fn json(resp: &WireResponse) -> Vec<u8> {
    serde_json::to_vec(resp).unwrap()
}

#[test]
fn zero_masks() {
    let (url, rx) = stub(200, json(&encode_response(8, 6, &[])));
    let img = image(8, 6);
    assert!(client(&url).segment(&img).unwrap().is_empty());
    let got = rx.recv().unwrap();
    assert!(got.request_line.starts_with("POST /segment "), "{}", got.request_line);
    assert_eq!(got.content_type.as_deref(), Some("image/png"));
    assert_eq!(RasterImage::decode_png(&got.body).unwrap(), img);
}

#[test]
fn full_frame_mask() {
    let full = BinaryMask::full(8, 6).unwrap();
    let (url, _rx) = stub(200, json(&encode_response(8, 6, &[full])));
    let masks = client(&format!("{url}/")).segment(&image(8, 6)).unwrap();
    assert_eq!(masks.len(), 1);
    assert_eq!(masks[0].area(), 48);
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/wire").join(name)
}

#[test]
fn golden_response_decodes_byte_exact() {
    let body = std::fs::read(fixture("response.json")).unwrap();
    let (url, _rx) = stub(200, body.clone());
    let req = RasterImage::read_png(fixture("request.png")).unwrap();
    let masks = client(&url).segment(&req).unwrap();
    let parsed: WireResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(masks.len(), parsed.masks.len());
    for (i, (m, wire)) in masks.iter().zip(&parsed.masks).enumerate() {
        let expected = BinaryMask::read_png(fixture(&format!("mask_{i}.png"))).unwrap();
        assert_eq!(m, &expected, "mask {i}");
        // our encoder reproduces the fixture's bytes exactly
        assert_eq!(STANDARD.encode(rle_encode(m)), wire.rle, "mask {i}");
    }
}

#[test]
fn unready_model_is_unavailable() {
    let (url, _rx) = stub(503, b"{\"detail\":\"loading\"}".to_vec());
    assert!(matches!(client(&url).segment(&image(4, 4)), Err(SegmenterError::RemoteUnavailable(_))));
}

#[test]
fn bad_request_is_rejected() {
    let (url, _rx) = stub(400, b"{\"detail\":\"undecodable image\"}".to_vec());
    match client(&url).segment(&image(4, 4)) {
        Err(SegmenterError::Rejected { status, body }) => {
            assert_eq!(status, 400);
            assert!(body.contains("undecodable"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn dimension_mismatch_is_malformed() {
    let (url, _rx) = stub(200, json(&encode_response(5, 4, &[BinaryMask::full(5, 4).unwrap()])));
    assert!(matches!(client(&url).segment(&image(4, 4)), Err(SegmenterError::MalformedResponse(_))));
}

#[test]
fn out_of_bounds_mask_is_malformed() {
    // envelope claims 4x4 but the mask header says 4x8
    let mask = BinaryMask::full(4, 8).unwrap();
    let mut resp = encode_response(4, 4, &[]);
    resp.masks.push(encode_response(4, 8, &[mask]).masks.remove(0));
    let (url, _rx) = stub(200, json(&resp));
    assert!(matches!(client(&url).segment(&image(4, 4)), Err(SegmenterError::MalformedResponse(_))));
}

#[test]
fn refused_connection_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let c = client(&format!("http://127.0.0.1:{port}"));
    assert!(matches!(c.segment(&image(4, 4)), Err(SegmenterError::RemoteUnavailable(_))));
}

#[test]
fn silent_server_times_out() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hold = thread::spawn(move || {
        let (s, _) = listener.accept().unwrap();
        thread::sleep(Duration::from_millis(1500));
        drop(s);
    });
    let c = RemoteSegmenter::new(format!("http://{addr}"), Duration::from_millis(300));
    assert!(matches!(c.segment(&image(4, 4)), Err(SegmenterError::Timeout)));
    hold.join().unwrap();
}
