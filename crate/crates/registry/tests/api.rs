use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use sawmatch_registry::{router, AppState, FetchConfig, Registry};
use serde_json::{json, Value};
use tower::ServiceExt;

const BOUNDARY: &str = "sawmatch-test-boundary";
const BOOKS: &str = "http://127.0.0.1/ontology/books.owl#";

fn fixture(rel: &str) -> Vec<u8> {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(rel);
    std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn app(dir: &std::path::Path) -> (Router, Arc<Registry>) {
    let registry = Arc::new(Registry::open(dir).unwrap());
    let state = AppState {
        registry: registry.clone(),
        fetch: FetchConfig::default(),
    };
    (router(state), registry)
}

fn multipart(file_name: &str, bytes: &[u8]) -> Request<Body> {
    let mut body = format!(
        "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{file_name}\"\r\nContent-Type: application/xml\r\n\r\n"
    )
    .into_bytes();
    body.extend_from_slice(bytes);
    body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
    Request::builder()
        .method(Method::POST)
        .header(
            header::CONTENT_TYPE,
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(Body::from(body))
        .unwrap()
}

async fn send(app: &Router, mut req: Request<Body>, uri: &str) -> (StatusCode, Vec<u8>) {
    *req.uri_mut() = uri.parse().unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .header(header::CONTENT_TYPE, "application/json")
        .body(body.map_or(Body::empty(), |b| Body::from(b.to_string())))
        .unwrap();
    let (status, bytes) = send(app, req, uri).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn upload(app: &Router, uri: &str, name: &str, bytes: &[u8]) -> (StatusCode, Value) {
    let (status, body) = send(app, multipart(name, bytes), uri).await;
    (status, serde_json::from_slice(&body).unwrap())
}

async fn new_collection(app: &Router, name: &str) -> String {
    let (status, body) = call(
        app,
        Method::POST,
        "/collections",
        Some(json!({ "name": name, "uploader": "tests" })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    body["id"].as_str().unwrap().to_string()
}

/// A collection holding every fixture service, plus all fixture ontologies.
async fn seeded(app: &Router) -> String {
    for name in [
        "books.owl",
        "travel.owl",
        "HealthInsuranceOntology.owl",
        "extendedCamera.owl",
    ] {
        let (status, _) = upload(app, "/ontologies", name, &fixture(&format!("ontologies/{name}"))).await;
        assert_eq!(status, StatusCode::CREATED);
    }
    let cid = new_collection(app, "fixtures").await;
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/services");
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for n in names {
        let n = n.to_string_lossy();
        let (status, body) = upload(
            app,
            &format!("/collections/{cid}/services"),
            &n,
            &fixture(&format!("services/{n}")),
        )
        .await;
        assert_eq!(status, StatusCode::CREATED, "{n}: {body}");
    }
    cid
}

#[tokio::test]
async fn healthz_answers() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let (status, body) = call(&app, Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn collections_are_created_and_listed() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let id = new_collection(&app, "books").await;
    let (status, list) = call(&app, Method::GET, "/collections", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list[0]["id"], id.as_str());
    assert_eq!(list[0]["name"], "books");
    assert_eq!(list[0]["uploader"], "tests");
    assert_eq!(list[0]["service_count"], 0);

    let (status, err) = call(&app, Method::POST, "/collections", Some(json!({ "name": "  " }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["field"], "name");
}

#[tokio::test]
async fn service_upload_duplicates_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let cid = new_collection(&app, "c").await;
    let uri = format!("/collections/{cid}/services");
    let doc = fixture("services/book_price_service.wsdl");

    let (status, body) = upload(&app, &uri, "book_price_service.wsdl", &doc).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["service_name"], "book_price_service");

    let (status, body) = upload(&app, &uri, "again.wsdl", &doc).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");

    let (status, body) = upload(&app, &uri, "broken.wsdl", b"<definitions><portType>").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field"], "file");
    assert!(body["message"].as_str().unwrap().contains("broken.wsdl"));

    let (status, _) = upload(&app, "/collections/nope/services", "x.wsdl", &doc).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    // a plain WSDL without annotations is accepted
    let (status, _) = upload(
        &app,
        &uri,
        "plain.wsdl",
        &fixture("services/plain_book_title_service.wsdl"),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);

    let (_, services) = call(&app, Method::GET, &uri, None).await;
    let services = services.as_array().unwrap();
    assert_eq!(services.len(), 2);
    assert_eq!(services[0]["source"], "book_price_service.wsdl");
    assert_eq!(services[0]["operations"][0]["operation"], "get_PRICE");
}

fn flatten(nodes: &Value) -> Vec<String> {
    let mut out = Vec::new();
    for n in nodes.as_array().unwrap() {
        out.push(n["name"].as_str().unwrap().to_string());
        out.extend(flatten(&n["children"]));
    }
    out
}

#[tokio::test]
async fn stored_document_round_trips_and_tree_is_nested() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let cid = new_collection(&app, "c").await;
    let doc = fixture("services/genre_lookup_service.wsdl");
    let (_, body) = upload(
        &app,
        &format!("/collections/{cid}/services"),
        "genre_lookup_service.wsdl",
        &doc,
    )
    .await;
    let sid = body["id"].as_str().unwrap().to_string();

    let req = Request::builder().body(Body::empty()).unwrap();
    let (status, bytes) = send(&app, req, &format!("/services/{sid}/document")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(bytes, doc);

    let (status, tree) = call(&app, Method::GET, &format!("/services/{sid}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(tree["service_name"], "genre_lookup_service");
    let op = &tree["interfaces"][0]["operations"][0];
    assert_eq!(op["name"], "lookupGenre");
    assert_eq!(op["input"][0]["kind"], "input");
    let names = flatten(&op["input"]);
    let req = names
        .iter()
        .position(|n| n == "LookupRequest")
        .expect("request element in tree");
    let title = names
        .iter()
        .position(|n| n == "bookTitle")
        .expect("nested element in tree");
    assert!(req < title, "{names:?}");

    let (status, _) = call(&app, Method::GET, "/services/unknown", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn ontology_upload_and_class_tree() {
    let dir = tempfile::tempdir().unwrap();
    let (app, registry) = app(dir.path());
    let chain = br##"<rdf:RDF xmlns:rdf="http://www.w3.org/1999/02/22-rdf-syntax-ns#"
  xmlns:rdfs="http://www.w3.org/2000/01/rdf-schema#" xmlns:owl="http://www.w3.org/2002/07/owl#"
  xml:base="http://chain/o.owl">
  <owl:Class rdf:about="#A"/>
  <owl:Class rdf:about="#B"><rdfs:subClassOf rdf:resource="#A"/></owl:Class>
  <owl:Class rdf:about="#C"><rdfs:subClassOf rdf:resource="#B"/></owl:Class>
</rdf:RDF>"##;
    let (status, body) = upload(&app, "/ontologies", "chain.owl", chain).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["class_count"], 3);
    let id = body["id"].as_str().unwrap().to_string();

    let (status, tree) = call(&app, Method::GET, &format!("/ontologies/{id}/classes"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(tree.as_array().unwrap().len(), 1);
    assert_eq!(tree[0]["name"], "A");
    assert_eq!(tree[0]["children"][0]["name"], "B");
    assert_eq!(tree[0]["children"][0]["children"][0]["name"], "C");
    assert_eq!(tree[0]["children"][0]["children"][0]["children"], json!([]));

    let before = registry.graph();
    let (status, again) = upload(&app, "/ontologies", "copy.owl", chain).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["id"], id.as_str());
    assert_eq!(again["created"], false);
    assert_eq!(registry.graph().axioms(), before.axioms());

    let (_, list) = call(&app, Method::GET, "/ontologies", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);

    let (status, body) = upload(&app, "/ontologies", "bad.owl", b"<rdf:RDF").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
}

#[tokio::test]
async fn match_returns_justified_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let cid = seeded(&app).await;
    let req = json!({
        "collection_id": cid,
        "strategy": "hybrid",
        "sim_algorithm": "monge-elkan",
        "inputs": [],
        "outputs": [format!("{BOOKS}Genre")],
        "weight": 0.5,
        "rating_threshold": 0.5,
    });
    let (status, rows) = call(&app, Method::POST, "/match", Some(req.clone())).await;
    assert_eq!(status, StatusCode::OK, "{rows}");
    let rows = rows.as_array().unwrap();
    let top = rows
        .iter()
        .find(|r| r["operation"] == "get_AUTHOR_GENRE")
        .expect("novel/author/genre service is ranked");
    assert_eq!(top["rating"], 1.0);
    assert_eq!(top["service"], "novel_authorgenre_service");
    assert_eq!(top["interface"], "NovelAuthorgenreSoap");
    assert_eq!(top["justifications"][0]["requested_concept"], format!("{BOOKS}Genre"));
    assert_eq!(top["justifications"][0]["pair_rating"], 1.0);
    for r in rows {
        assert!(r["rating"].as_f64().unwrap() >= 0.5, "{r}");
    }
    let ratings: Vec<f64> = rows.iter().map(|r| r["rating"].as_f64().unwrap()).collect();
    assert!(ratings.windows(2).all(|w| w[0] >= w[1]));

    // identical requests give identical responses
    let (_, again) = call(&app, Method::POST, "/match", Some(req)).await;
    assert_eq!(Value::Array(rows.clone()), again);
}

#[tokio::test]
async fn match_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let cid = new_collection(&app, "c").await;
    let (status, err) = call(
        &app,
        Method::POST,
        "/match",
        Some(json!({ "collection_id": cid, "inputs": [], "outputs": [] })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["field"], "inputs");

    let (status, err) = call(
        &app,
        Method::POST,
        "/match",
        Some(json!({ "collection_id": cid, "strategy": "magic", "inputs": ["http://x#A"] })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["field"], "strategy");

    let (status, _) = call(
        &app,
        Method::POST,
        "/match",
        Some(json!({ "collection_id": "missing", "inputs": ["http://x#A"] })),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, err) = call(&app, Method::POST, "/match", Some(json!({ "inputs": 3 }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["field"], "body");
}

#[tokio::test]
async fn threshold_is_clamped_into_api_range() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let cid = seeded(&app).await;
    let body = |t: f64| json!({ "collection_id": cid, "strategy": "logic", "outputs": [format!("{BOOKS}Genre")], "rating_threshold": t });
    // 0 is raised to 0.1, so operations rated 0 disappear
    let (_, rows) = call(&app, Method::POST, "/match", Some(body(0.0))).await;
    assert!(rows
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["rating"].as_f64().unwrap() >= 0.1));
    // 1 is lowered to 0.9, so exact matches remain
    let (_, rows) = call(&app, Method::POST, "/match", Some(body(1.0))).await;
    assert!(!rows.as_array().unwrap().is_empty());
}

#[tokio::test]
async fn equivalence_from_a_later_ontology_changes_ratings() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let onto = |base: &str, body: &str| {
        format!(
            r#"<rdf:RDF xmlns:rdf="http://www.w3.org/1999/02/22-rdf-syntax-ns#"
  xmlns:owl="http://www.w3.org/2002/07/owl#" xml:base="{base}">{body}</rdf:RDF>"#
        )
    };
    upload(
        &app,
        "/ontologies",
        "a.owl",
        onto("http://a/o.owl", r##"<owl:Class rdf:about="#Auto"/>"##).as_bytes(),
    )
    .await;
    upload(
        &app,
        "/ontologies",
        "b.owl",
        onto("http://b/o.owl", r##"<owl:Class rdf:about="#Car"/>"##).as_bytes(),
    )
    .await;

    let cid = new_collection(&app, "cars").await;
    let service = r#"<definitions xmlns="http://schemas.xmlsoap.org/wsdl/" xmlns:sawsdl="http://www.w3.org/ns/sawsdl"
  xmlns:xsd="http://www.w3.org/2001/XMLSchema" xmlns:tns="urn:c">
  <types><xsd:schema><xsd:element name="_X" type="xsd:string" sawsdl:modelReference="http://a/o.owl#Auto"/></xsd:schema></types>
  <message name="Out"><part name="p" element="tns:_X"/></message>
  <portType name="P"><operation name="get"><output message="tns:Out"/></operation></portType>
  <service name="s"/>
</definitions>"#;
    upload(
        &app,
        &format!("/collections/{cid}/services"),
        "s.wsdl",
        service.as_bytes(),
    )
    .await;

    let q = json!({ "collection_id": cid, "strategy": "logic", "outputs": ["http://b/o.owl#Car"], "rating_threshold": 0.1 });
    let (_, rows) = call(&app, Method::POST, "/match", Some(q.clone())).await;
    assert_eq!(rows, json!([]));

    let bridge = onto(
        "http://bridge/o.owl",
        r#"<owl:Class rdf:about="http://a/o.owl#Auto"><owl:equivalentClass rdf:resource="http://b/o.owl#Car"/></owl:Class>"#,
    );
    let (status, _) = upload(&app, "/ontologies", "bridge.owl", bridge.as_bytes()).await;
    assert_eq!(status, StatusCode::CREATED);
    let (_, rows) = call(&app, Method::POST, "/match", Some(q)).await;
    assert_eq!(rows[0]["rating"], 1.0);
}

#[tokio::test]
async fn state_survives_restart_and_index_rebuild_matches_cache() {
    let dir = tempfile::tempdir().unwrap();
    let query = |cid: &str| json!({ "collection_id": cid, "inputs": [format!("{BOOKS}Book")], "outputs": [format!("{BOOKS}Price")] });
    let (cid, first) = {
        let (app, registry) = app(dir.path());
        let cid = seeded(&app).await;
        let (_, rows) = call(&app, Method::POST, "/match", Some(query(&cid))).await;
        assert_eq!(registry.rebuild_index(&cid).unwrap(), *registry.index(&cid).unwrap());
        (cid, rows)
    };

    let (app, registry) = app(dir.path());
    let (_, list) = call(&app, Method::GET, "/collections", None).await;
    assert_eq!(list[0]["id"], cid.as_str());
    assert_eq!(list[0]["service_count"], 12);
    let (_, rows) = call(&app, Method::POST, "/match", Some(query(&cid))).await;
    assert_eq!(rows, first);
    assert_eq!(registry.rebuild_index(&cid).unwrap(), *registry.index(&cid).unwrap());
    let (_, onts) = call(&app, Method::GET, "/ontologies", None).await;
    assert_eq!(onts.as_array().unwrap().len(), 4);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_matches_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let cid = seeded(&app).await;
    let req =
        json!({ "collection_id": cid, "inputs": [format!("{BOOKS}Novel")], "outputs": [format!("{BOOKS}Author")] });
    let mut tasks = Vec::new();
    for _ in 0..16 {
        let (app, req) = (app.clone(), req.clone());
        tasks.push(tokio::spawn(async move {
            call(&app, Method::POST, "/match", Some(req)).await.1
        }));
    }
    let mut results = Vec::new();
    for t in tasks {
        results.push(t.await.unwrap());
    }
    assert!(results.windows(2).all(|w| w[0] == w[1]));
    assert!(!results[0].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn url_sources_are_fetched_and_stored() {
    let doc = fixture("services/city_hotel_service.wsdl");
    let served = doc.clone();
    let origin = Router::new().route(
        "/svc/city_hotel_service.wsdl",
        axum::routing::get(move || {
            let d = served.clone();
            async move { d }
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, origin).await.unwrap() });

    let dir = tempfile::tempdir().unwrap();
    let (app, _) = app(dir.path());
    let cid = new_collection(&app, "remote").await;
    let url = format!("http://{addr}/svc/city_hotel_service.wsdl");
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/collections/{cid}/services"),
        Some(json!({ "url": url })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let sid = body["id"].as_str().unwrap();
    let req = Request::builder().body(Body::empty()).unwrap();
    let (_, bytes) = send(&app, req, &format!("/services/{sid}/document")).await;
    assert_eq!(bytes, doc);

    let missing = format!("http://{addr}/svc/missing.wsdl");
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/collections/{cid}/services"),
        Some(json!({ "url": missing })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_GATEWAY, "{body}");
    assert_eq!(body["field"], "url");
}
