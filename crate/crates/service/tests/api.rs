use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Duration, TimeZone, Utc};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use perceptmap_core::store::{read_votes, Corpus, DataPaths, StreetImage, Vote, VoteCode, VoteSource};
use perceptmap_service::api::{router, ApiConfig, AppState};

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2018, 6, 4, 9, 0, 0).unwrap()
}

/// `n` images 100 m apart along a meridian in zone "z".
fn write_corpus(dir: &Path, n: usize) -> Corpus {
    let mut c = Corpus::new();
    for i in 0..n {
        let img = StreetImage::new(format!("img{i:02}"), 4.65 + 0.0009 * i as f64, -74.06, "z")
            .with_uri(format!("images/img{i:02}.jpg"));
        c.put_image(img).unwrap();
    }
    c.save(&DataPaths::in_dir(dir)).unwrap();
    c
}

struct Harness {
    app: Router,
    now: Arc<Mutex<DateTime<Utc>>>,
}

fn harness(dir: &Path) -> Harness {
    let now = Arc::new(Mutex::new(t0()));
    let clock = now.clone();
    let mut cfg = ApiConfig::new(dir);
    cfg.seed = 5;
    let state = AppState::open(&cfg).unwrap().with_clock(Arc::new(move || *clock.lock().unwrap()));
    Harness { app: router(state, None), now }
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Option<String>, Value) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let ctype = res.headers().get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_owned());
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let body = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).expect("response is JSON") };
    (status, ctype, body)
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

fn post_json(uri: &str, body: impl Into<Body>) -> Request<Body> {
    Request::post(uri).header(header::CONTENT_TYPE, "application/json").body(body.into()).unwrap()
}

fn vote_body(session: &str, click: &str) -> String {
    json!({"session_id": session, "click": click}).to_string()
}

#[tokio::test]
async fn ten_images_serve_a_pair() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 10);
    let h = harness(dir.path());
    let (status, _, body) = call(&h.app, get("/api/pair")).await;
    assert_eq!(status, StatusCode::OK);
    let (l, r) = (body["left"]["image_id"].as_str().unwrap(), body["right"]["image_id"].as_str().unwrap());
    assert_ne!(l, r);
    assert_eq!(body["left"]["image_url"], format!("/media/images/{l}.jpg"));
    assert!(!body["session_id"].as_str().unwrap().is_empty());
}

#[tokio::test]
async fn one_image_is_exhausted() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 1);
    let h = harness(dir.path());
    let (status, _, body) = call(&h.app, get("/api/pair")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "exhausted");
}

#[tokio::test]
async fn rapid_requests_get_distinct_sessions_and_pairs() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 10);
    let h = harness(dir.path());
    let (_, _, a) = call(&h.app, get("/api/pair")).await;
    let (_, _, b) = call(&h.app, get("/api/pair")).await;
    assert_ne!(a["session_id"], b["session_id"]);
    let key = |v: &Value| {
        let mut ids = [v["left"]["image_id"].as_str().unwrap(), v["right"]["image_id"].as_str().unwrap()];
        ids.sort_unstable();
        ids.map(str::to_owned)
    };
    assert_ne!(key(&a), key(&b));
}

#[tokio::test]
async fn click_coding_and_double_submit() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 10);
    let h = harness(dir.path());
    for (click, code) in [("left", 1), ("equal", 0), ("right", 2)] {
        let (_, _, pair) = call(&h.app, get("/api/pair")).await;
        let session = pair["session_id"].as_str().unwrap();
        let (status, _, body) = call(&h.app, post_json("/api/vote", vote_body(session, click))).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        assert_eq!(body["code"], code);
        assert_eq!(body["vote_id"], format!("v-{session}"));

        let (again, _, err) = call(&h.app, post_json("/api/vote", vote_body(session, click))).await;
        assert_eq!(again, StatusCode::CONFLICT);
        assert_eq!(err["error"], "already_voted");
    }
}

#[tokio::test]
async fn unknown_and_expired_sessions_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 10);
    let h = harness(dir.path());
    let (status, _, body) = call(&h.app, post_json("/api/vote", vote_body("nope", "left"))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_session");

    let (_, _, pair) = call(&h.app, get("/api/pair")).await;
    *h.now.lock().unwrap() = t0() + Duration::seconds(601);
    let (status, _, body) =
        call(&h.app, post_json("/api/vote", vote_body(pair["session_id"].as_str().unwrap(), "left"))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "expired_session");
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 10);
    let h = harness(dir.path());
    let (_, _, pair) = call(&h.app, get("/api/pair")).await;
    let session = pair["session_id"].as_str().unwrap();
    for body in [
        "{not json".to_owned(),
        json!({"session_id": session}).to_string(),
        json!({"session_id": session, "click": "up"}).to_string(),
        json!({"session_id": session, "click": 1}).to_string(),
    ] {
        let (status, _, err) = call(&h.app, post_json("/api/vote", body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(err["error"], "malformed_body");
    }
    let no_type = Request::post("/api/vote").body(Body::from(vote_body(session, "left"))).unwrap();
    assert_eq!(call(&h.app, no_type).await.0, StatusCode::BAD_REQUEST);
    // the session is still usable after the rejected attempts
    let (status, _, _) = call(&h.app, post_json("/api/vote", vote_body(session, "left"))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn vote_is_on_disk_before_the_response() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 10);
    let h = harness(dir.path());
    let (_, _, pair) = call(&h.app, get("/api/pair")).await;
    let session = pair["session_id"].as_str().unwrap();
    let (_, _, body) = call(&h.app, post_json("/api/vote", vote_body(session, "right"))).await;

    let logged = read_votes(&DataPaths::in_dir(dir.path()).votes).unwrap();
    assert_eq!(logged.len(), 1);
    assert_eq!(logged[0].vote_id, body["vote_id"].as_str().unwrap());
    assert_eq!(logged[0].code, VoteCode::Right);
    assert_eq!(logged[0].left_id, pair["left"]["image_id"].as_str().unwrap());
    assert_eq!(logged[0].timestamp, t0());
}

#[tokio::test]
async fn restart_keeps_votes_and_pairs_taken() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 3);
    let mut voted = Vec::new();
    {
        let h = harness(dir.path());
        loop {
            let (status, _, pair) = call(&h.app, get("/api/pair")).await;
            if status != StatusCode::OK {
                break;
            }
            let s = pair["session_id"].as_str().unwrap().to_owned();
            call(&h.app, post_json("/api/vote", vote_body(&s, "left"))).await;
            voted.push(s);
        }
    }
    assert_eq!(voted.len(), 3);
    let h = harness(dir.path());
    let (_, _, stats) = call(&h.app, get("/api/stats")).await;
    assert_eq!(stats["by_code"]["1"], 3);
    assert_eq!(call(&h.app, get("/api/pair")).await.0, StatusCode::CONFLICT);
    let (status, _, _) = call(&h.app, post_json("/api/vote", vote_body(&voted[0], "left"))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn stats_count_codes_sources_and_images() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 10);
    let h = harness(dir.path());
    let (status, _, empty) = call(&h.app, get("/api/stats")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(empty, json!({
        "by_code": {"0": 0, "1": 0, "2": 0},
        "by_source": {"human": 0, "synthetic": 0},
        "images": {"total": 10, "with_features": 0},
    }));
    for click in ["equal", "left", "right"] {
        let (_, _, pair) = call(&h.app, get("/api/pair")).await;
        call(&h.app, post_json("/api/vote", vote_body(pair["session_id"].as_str().unwrap(), click))).await;
    }
    let (_, _, stats) = call(&h.app, get("/api/stats")).await;
    assert_eq!(stats["by_code"], json!({"0": 1, "1": 1, "2": 1}));
    assert_eq!(stats["by_source"]["human"], 3);
}

#[tokio::test]
async fn get_requests_do_not_touch_the_store() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 10);
    let paths = DataPaths::in_dir(dir.path());
    let before = [std::fs::read(&paths.images).unwrap(), std::fs::read(&paths.votes).unwrap()];
    let h = harness(dir.path());
    for uri in ["/api/pair", "/api/pair", "/api/stats", "/api/map/z", "/api/map/nowhere"] {
        call(&h.app, get(uri)).await;
    }
    let after = [std::fs::read(&paths.images).unwrap(), std::fs::read(&paths.votes).unwrap()];
    assert_eq!(before, after);
}

fn synthetic(id: &str, l: &str, r: &str, code: VoteCode) -> Vote {
    Vote {
        vote_id: id.into(),
        left_id: l.into(),
        right_id: r.into(),
        code,
        source: VoteSource::Synthetic,
        session_id: "syn-z".into(),
        timestamp: t0(),
    }
}

fn assert_feature_collection(map: &Value, n: usize) {
    assert_eq!(map["type"], "FeatureCollection");
    let features = map["features"].as_array().unwrap();
    assert_eq!(features.len(), n);
    for f in features {
        assert_eq!(f["type"], "Feature");
        assert_eq!(f["geometry"]["type"], "Point");
        let c = f["geometry"]["coordinates"].as_array().unwrap();
        assert!(c.len() == 2 && c.iter().all(Value::is_f64));
        let p = f["properties"].as_object().unwrap();
        let mut keys: Vec<&str> = p.keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["color", "image_id", "negative_pct", "positive_pct"]);
        let color = p["color"].as_str().unwrap();
        assert!(color.len() == 7 && color.starts_with('#'));
    }
}

#[tokio::test]
async fn map_of_a_scored_zone() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 10);
    let h = harness(dir.path());
    let (status, _, _) = call(&h.app, get("/api/map/z")).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "a zone without votes has no scores");

    for _ in 0..3 {
        let (_, _, pair) = call(&h.app, get("/api/pair")).await;
        call(&h.app, post_json("/api/vote", vote_body(pair["session_id"].as_str().unwrap(), "left"))).await;
    }
    let (status, ctype, map) = call(&h.app, get("/api/map/z")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype.as_deref(), Some("application/geo+json"));
    assert_feature_collection(&map, 6);

    let (status, _, body) = call(&h.app, get("/api/map/nowhere")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_zone");
    assert_eq!(call(&h.app, get("/api/map/z?source=robots")).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn synthetic_only_map_has_the_human_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = write_corpus(dir.path(), 10);
    c.record_vote(synthetic("s1", "img00", "img05", VoteCode::Left)).unwrap();
    c.record_vote(synthetic("s2", "img01", "img06", VoteCode::Right)).unwrap();
    c.record_vote(synthetic("s3", "img02", "img07", VoteCode::Tie)).unwrap();
    c.save(&DataPaths::in_dir(dir.path())).unwrap();
    let h = harness(dir.path());

    let (status, _, synth) = call(&h.app, get("/api/map/z?source=synthetic")).await;
    assert_eq!(status, StatusCode::OK);
    // the tied pair has no charged neighbors, so each half of its neutral count is split evenly
    assert_feature_collection(&synth, 6);
    assert_eq!(call(&h.app, get("/api/map/z?source=human")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn cors_preflight_is_allowed() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 10);
    let h = harness(dir.path());
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/api/vote")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .header(header::ACCESS_CONTROL_REQUEST_HEADERS, "content-type")
        .body(Body::empty())
        .unwrap();
    let res = h.app.clone().oneshot(req).await.unwrap();
    assert!(res.status().is_success());
    assert_eq!(res.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");
}

#[tokio::test]
async fn static_ui_and_media_are_served() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 10);
    std::fs::create_dir_all(dir.path().join("images")).unwrap();
    std::fs::write(dir.path().join("images/img00.jpg"), b"jpeg bytes").unwrap();
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<html>survey</html>").unwrap();
    let state = AppState::open(&ApiConfig::new(dir.path())).unwrap();
    let app = router(state, Some(ui.path()));

    let res = app.clone().oneshot(get("/media/images/img00.jpg")).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(&res.into_body().collect().await.unwrap().to_bytes()[..], b"jpeg bytes");
    let res = app.clone().oneshot(get("/index.html")).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
}

#[test]
fn missing_data_directory_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(AppState::open(&ApiConfig::new(dir.path().join("absent"))).is_err());
}
