use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sheetaudit_service::{router, AppState};
use tower::ServiceExt;

const S1: &str = "1,2,=A1+B1\n3,4,=A2+B2\n,,=C1+C2\n";
const S2: &str = "1,,\n2,,\n=A1+A2,=A3*2,=A3+1\n";

async fn call(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("origin", "http://localhost:5173")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, "GET", uri, "").await;
    (s, serde_json::from_str(&b).unwrap())
}

async fn post(app: &Router, uri: &str, body: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, "POST", uri, body).await;
    (s, serde_json::from_str(&b).unwrap())
}

async fn open(app: &Router, workbook: &str) -> String {
    let (status, body) = post(app, "/sessions", workbook).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

fn app() -> Router {
    router(AppState::default())
}

#[tokio::test]
async fn curation_round_trip_on_s2() {
    let app = app();
    let id = open(&app, S2).await;

    let (s, sinks) = get(&app, &format!("/sessions/{id}/sinks")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(sinks["result"]["active"], json!(["B3", "C3"]));
    assert_eq!(sinks["result"]["excluded"], json!([]));

    let (s, after) = post(&app, &format!("/sessions/{id}/sinks/exclude"), r#"{"cell":"B3"}"#).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(after["result"]["active"], json!(["C3"]));

    let (_, m) = get(&app, &format!("/sessions/{id}/modules")).await;
    assert_eq!(m["result"]["results"], json!(["C3"]));
    assert_eq!(m["result"]["modules"][0]["members"], json!(["A1", "A2", "A3", "C3"]));

    // excluding it again is a stale request
    let (s, err) = post(&app, &format!("/sessions/{id}/sinks/exclude"), r#"{"cell":"B3"}"#).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "NotASink");

    let (s, back) = post(&app, &format!("/sessions/{id}/sinks/restore"), r#"{"cell":"B3"}"#).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(back, sinks);
    let (_, m) = get(&app, &format!("/sessions/{id}/modules")).await;
    assert_eq!(m["result"]["modules"].as_array().unwrap().len(), 3);

    let (s, err) = post(&app, &format!("/sessions/{id}/sinks/restore"), r#"{"cell":"B3"}"#).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "NotExcluded");
}

#[tokio::test]
async fn restore_blocked_by_a_later_exclusion() {
    let app = app();
    let id = open(&app, S2).await;
    for cell in ["B3", "C3", "A3"] {
        let (s, _) = post(
            &app,
            &format!("/sessions/{id}/sinks/exclude"),
            &format!(r#"{{"cell":"{cell}"}}"#),
        )
        .await;
        assert_eq!(s, StatusCode::OK);
    }
    let (s, err) = post(&app, &format!("/sessions/{id}/sinks/restore"), r#"{"cell":"B3"}"#).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "RestoreBlocked");
}

#[tokio::test]
async fn trace_and_srg() {
    let app = app();
    let id = open(&app, S2).await;
    let (s, t) = get(&app, &format!("/sessions/{id}/trace?module=B3-module")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(t["result"], json!([{ "module": "A3-module", "result": "A3" }]));

    let (s, err) = get(&app, &format!("/sessions/{id}/trace?module=Q9-module")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "UnknownModule");

    let (_, srg) = get(&app, &format!("/sessions/{id}/srg?mode=modules")).await;
    let edges: Vec<(&str, &str)> = srg["result"]["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["from"].as_str().unwrap(), e["to"].as_str().unwrap()))
        .collect();
    assert_eq!(edges, [("A3-module", "B3-module"), ("A3-module", "C3-module")]);

    let (_, fish) = get(&app, &format!("/sessions/{id}/srg?mode=modules&fisheye=A3-module")).await;
    assert_eq!(fish["result"]["expanded"], json!(["A3-module"]));
    assert_eq!(fish["parameters"]["fisheye"], json!(["A3-module"]));

    let (s, dot) = call(
        &app,
        "GET",
        &format!("/sessions/{id}/srg?mode=modules&format=dot&style=plain"),
        "",
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert!(dot.starts_with("digraph srg {"));
    assert!(dot.contains("\"A3-module\" -> \"B3-module\";"));

    let (s, err) = get(&app, &format!("/sessions/{id}/srg?mode=modules&fisheye=B7")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["code"], "UnknownModule");
}

#[tokio::test]
async fn classes_carry_a_highlight_map() {
    let app = app();
    let id = open(&app, S1).await;
    let (s, c) = get(
        &app,
        &format!("/sessions/{id}/classes?dh=1&dv=0&eqStart=copy&eqRest=copy"),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let k1: Vec<&str> = c["result"]["highlight"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|h| h["class"] == "K1")
        .map(|h| h["cell"].as_str().unwrap())
        .collect();
    assert_eq!(k1, ["C1", "C2"]);
    assert_eq!(
        c["parameters"],
        json!({ "d_h": 1, "d_v": 0, "d_man": 1, "eq_start": "copy", "eq_rest": "copy" })
    );
}

#[tokio::test]
async fn grid_areas_diff_and_constants() {
    let app = app();
    let id = open(&app, S1).await;
    let (_, g) = get(&app, &format!("/sessions/{id}/grid")).await;
    assert_eq!(
        g["result"]["cells"][2],
        json!({ "cell": "C1", "kind": "formula", "value": "=A1+B1" })
    );
    let (_, a) = get(&app, &format!("/sessions/{id}/areas?level=copy")).await;
    assert_eq!(a["result"]["areas"][0]["members"], json!(["C1", "C2"]));
    let (s, d) = get(&app, &format!("/sessions/{id}/diff?fine=copy&coarse=structural")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(d["parameters"], json!({ "fine": "copy", "coarse": "structural" }));
    let (s, c) = get(&app, &format!("/sessions/{id}/constants")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(c["result"], json!([]));
    let (s, r) = get(&app, &format!("/sessions/{id}/report")).await;
    assert_eq!(s, StatusCode::OK);
    assert!(r["timings"].is_object());
}

#[tokio::test]
async fn json_workbooks_are_sniffed() {
    let app = app();
    let body = json!({ "name": "Budget", "cells": { "A1": "1", "B1": "=A1*2" } }).to_string();
    let (s, summary) = post(&app, "/sessions", &body).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(summary["input"]["name"], "Budget");
    assert_eq!(summary["sheet"]["formulas"], 1);
}

#[tokio::test]
async fn error_statuses() {
    let app = app();
    let (s, e) = post(&app, "/sessions", "\"unbalanced,1\n").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["error"]["code"], "MalformedWorkbook");

    let two = json!({ "sheets": [{ "name": "a", "cells": {} }, { "name": "b", "cells": {} }] }).to_string();
    let (s, e) = post(&app, "/sessions", &two).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["error"]["code"], "MultipleSheets");

    let (s, e) = get(&app, "/sessions/nope/sinks").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(e["error"]["code"], "UnknownSession");

    let id = open(&app, S1).await;
    for uri in [
        format!("/sessions/{id}/areas?level=Copy"),
        format!("/sessions/{id}/classes?dh=1&dv=0&dman=3"),
        format!("/sessions/{id}/classes?dh=-1"),
        format!("/sessions/{id}/diff?fine=structural&coarse=copy"),
        format!("/sessions/{id}/srg?mode=cells"),
        format!("/sessions/{id}/trace"),
    ] {
        let (s, e) = get(&app, &uri).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{uri}: {e}");
        assert!(e["error"]["code"].is_string());
    }
    let (s, e) = post(&app, &format!("/sessions/{id}/sinks/exclude"), r#"{"cell":"1A"}"#).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["error"]["code"], "MalformedAddress");
    let (s, _) = post(&app, &format!("/sessions/{id}/sinks/exclude"), "not json").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn cyclic_sheets_refuse_modules_but_still_inspect() {
    let app = app();
    let id = open(&app, "=B1,=A1\n").await;
    let (s, i) = get(&app, &format!("/sessions/{id}/inspect")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(i["diagnostics"][0]["code"], "CyclicDDG");
    assert_eq!(i["diagnostics"][0]["cells"], json!(["A1", "B1", "A1"]));
    let (s, e) = get(&app, &format!("/sessions/{id}/modules")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(e["error"]["code"], "CyclicDDG");
    let (s, _) = get(&app, &format!("/sessions/{id}/srg?mode=units")).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn sessions_are_isolated_and_expire() {
    let state = AppState::with_idle_timeout(Duration::from_millis(50));
    let app = router(state.clone());
    let a = open(&app, S2).await;
    let b = open(&app, S2).await;
    post(&app, &format!("/sessions/{a}/sinks/exclude"), r#"{"cell":"B3"}"#).await;
    let (_, sb) = get(&app, &format!("/sessions/{b}/sinks")).await;
    assert_eq!(sb["result"]["active"], json!(["B3", "C3"]));
    assert_eq!(state.session_count(), 2);
    tokio::time::sleep(Duration::from_millis(120)).await;
    let (s, _) = get(&app, &format!("/sessions/{a}/sinks")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(state.session_count(), 0);
}

#[tokio::test]
async fn delete_and_cors() {
    let app = app();
    let id = open(&app, S1).await;
    let req = Request::builder()
        .uri(format!("/sessions/{id}"))
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));
    let (s, _) = call(&app, "DELETE", &format!("/sessions/{id}"), "").await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, _) = get(&app, &format!("/sessions/{id}/grid")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}
