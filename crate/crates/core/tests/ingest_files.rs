use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::thread;

use gravpanel_core::ingest::{
    assemble_gravity_panel, fetch_indicators_with, read_indicator_file, read_membership_file,
    read_pair_static_file, read_trade_file, HttpGet, HttpResponse, IngestData, IngestError,
    Organization, ReqwestTransport, Variant,
};
use gravpanel_core::panel::{CountryCode, YearWindow};

fn study_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/study")
}

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/worldbank")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

fn study_data() -> IngestData {
    let dir = study_dir();
    IngestData {
        flows: read_trade_file(&dir.join("trade.csv")).unwrap(),
        indicators: read_indicator_file(&dir.join("indicators.csv")).unwrap(),
        statics: read_pair_static_file(&dir.join("statics.csv")).unwrap(),
        memberships: read_membership_file(&dir.join("memberships.csv")).unwrap(),
    }
}

#[test]
fn reads_the_study_files() {
    let data = study_data();
    assert_eq!(data.flows.len(), 22 * 12);
    assert_eq!(data.statics.len(), 22);
    assert!(data
        .memberships
        .iter()
        .any(|m| m.organization == Organization::Mercosur));
    assert!(data.indicators.iter().all(|r| r.value.is_finite()));
}

#[test]
fn missing_file_error_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("absent_trade.csv");
    let err = read_trade_file(&path).unwrap_err();
    assert!(matches!(err, IngestError::Io { .. }));
    assert!(err.to_string().contains("absent_trade.csv"), "{err}");
}

#[test]
fn malformed_copy_reports_path_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trade.csv");
    let mut body = std::fs::read_to_string(study_dir().join("trade.csv")).unwrap();
    body.push_str("PER,ARG,20x6,100\n");
    std::fs::write(&path, body).unwrap();
    let msg = read_trade_file(&path).unwrap_err().to_string();
    assert!(msg.contains("trade.csv"), "{msg}");
    assert!(msg.contains(&format!("line {}", 22 * 12 + 2)), "{msg}");
}

#[test]
fn assembled_rows_are_complete_or_absent() {
    let a =
        assemble_gravity_panel(&study_data(), YearWindow::new(2006, 2015), Variant::Gmp).unwrap();
    let ds = &a.panel;
    let names: Vec<String> = ds.variable_names().map(str::to_string).collect();
    let mut absent = 0;
    for e in ds.entities() {
        for &y in ds.times() {
            let present = names.iter().filter(|v| ds.value(v, e, y).is_some()).count();
            assert!(
                present == 0 || present == names.len(),
                "{e:?} {y}: {present} of {}",
                names.len()
            );
            absent += usize::from(present == 0);
        }
    }
    assert_eq!(absent, 1);
    assert!(a
        .warnings
        .iter()
        .any(|w| w.code == "incomplete_row" && w.detail.contains("VEN 2013")));
}

#[test]
fn membership_dummies_never_switch_off() {
    let a =
        assemble_gravity_panel(&study_data(), YearWindow::new(1994, 2015), Variant::Gmp).unwrap();
    let ds = &a.panel;
    for dummy in ["apec", "can", "mercosur"] {
        for e in ds.entities() {
            let mut on = false;
            for &y in ds.times() {
                if let Some(v) = ds.value(dummy, e, y) {
                    assert!(v == 0.0 || v == 1.0);
                    assert!(!(on && v == 0.0), "{dummy} for {e:?} switched off in {y}");
                    on |= v == 1.0;
                }
            }
        }
    }
}

#[test]
fn regional_panel_keeps_only_mercosur_partners() {
    let a =
        assemble_gravity_panel(&study_data(), YearWindow::new(2006, 2015), Variant::Rtp).unwrap();
    let partners: Vec<String> = a
        .panel
        .entities()
        .iter()
        .map(|e| e.partner().as_str().to_string())
        .collect();
    for p in &partners {
        assert!(
            ["ARG", "BRA", "URY", "PRY", "VEN", "CHL", "BOL", "COL", "ECU"].contains(&p.as_str()),
            "{p}"
        );
    }
    assert!(partners.iter().any(|p| p == "ARG"));
    assert!(!partners.iter().any(|p| p == "USA"));
}

/// Serves the recorded pages by their `page=` query parameter.
struct Recorded;

impl HttpGet for Recorded {
    fn get(&self, url: &str) -> Result<HttpResponse, String> {
        let page = url.rsplit("page=").next().unwrap();
        Ok(HttpResponse {
            status: 200,
            body: fixture(&format!("gdp_page{page}.json")),
        })
    }
}

fn countries() -> Vec<CountryCode> {
    vec![
        CountryCode::new("PER").unwrap(),
        CountryCode::new("CHL").unwrap(),
    ]
}

#[test]
fn fetch_is_idempotent_and_sorted() {
    let window = YearWindow::new(2013, 2015);
    let first = fetch_indicators_with(
        &Recorded,
        "http://wb",
        &["NY.GDP.MKTP.CD"],
        &countries(),
        window,
        4,
    )
    .unwrap();
    let second = fetch_indicators_with(
        &Recorded,
        "http://wb",
        &["NY.GDP.MKTP.CD"],
        &countries(),
        window,
        4,
    )
    .unwrap();
    assert_eq!(first, second);
    // the null 2013 value for Peru is skipped
    assert_eq!(first.len(), 5);
    let keys: Vec<(String, i32)> = first
        .iter()
        .map(|r| (r.country.as_str().to_string(), r.year))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

/// One-thread HTTP/1.1 server answering `responses` in order, then exiting.
fn serve(responses: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            seen.push(request_line.trim().to_string());
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        seen
    });
    (base, handle)
}

#[test]
fn reqwest_transport_follows_pages_over_http() {
    let (base, server) = serve(vec![
        (200, fixture("gdp_page1.json")),
        (200, fixture("gdp_page2.json")),
    ]);
    let transport = ReqwestTransport::new().unwrap();
    let got = fetch_indicators_with(
        &transport,
        &format!("{base}/v2"),
        &["NY.GDP.MKTP.CD"],
        &countries(),
        YearWindow::new(2013, 2015),
        4,
    )
    .unwrap();
    let seen = server.join().unwrap();
    assert_eq!(got.len(), 5);
    assert_eq!(seen.len(), 2);
    assert!(seen[0].starts_with("GET /v2/country/PER;CHL/indicator/NY.GDP.MKTP.CD?date=2013:2015"));
    assert!(seen[1].contains("page=2"));
    let offline = fetch_indicators_with(
        &Recorded,
        "http://wb",
        &["NY.GDP.MKTP.CD"],
        &countries(),
        YearWindow::new(2013, 2015),
        4,
    )
    .unwrap();
    assert_eq!(got, offline);
}

#[test]
fn http_error_status_is_reported() {
    let (base, server) = serve(vec![(503, "unavailable".into())]);
    let transport = ReqwestTransport::new().unwrap();
    let err = fetch_indicators_with(
        &transport,
        &base,
        &["NY.GDP.MKTP.CD"],
        &countries(),
        YearWindow::new(2013, 2015),
        4,
    )
    .unwrap_err();
    server.join().unwrap();
    assert!(
        matches!(err, IngestError::Http { status: 503, .. }),
        "{err}"
    );
}
