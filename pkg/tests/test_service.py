"""HTTP API contracts over a planted corpus, via the in-process test client."""
import json

import pytest
from fastapi.testclient import TestClient

from narrex.coherence import build_graph, temporal_node_order
from narrex.extract import ExtractionParams, extract_map
from narrex.service import create_app


@pytest.fixture(scope="module")
def client(planted_corpus):
    corpus, _, cfg = planted_corpus
    return TestClient(create_app(corpus, cfg))


@pytest.fixture(scope="module")
def endpoints(planted_corpus):
    corpus, _, _ = planted_corpus
    order = temporal_node_order(corpus)
    ids = [corpus.records[r].id for r in order]
    return ids[0], ids[-1]


def test_images_paging(client):
    resp = client.get("/api/images", params={"page": 1, "page_size": 10})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["page"] == 1 and doc["page_size"] == 10 and doc["total"] == 80
    assert len(doc["records"]) == 10
    rec = doc["records"][0]
    assert set(rec) == {"id", "date", "category", "location", "expert_labeled",
                        "thumbnail"}
    assert rec["date"] is not None and rec["category"] is not None
    assert rec["thumbnail"] == f"/api/images/{rec['id']}/file"
    last = client.get("/api/images", params={"page": 9, "page_size": 10}).json()
    assert last["records"] == []


def test_images_filters(client, planted_corpus):
    corpus, _, _ = planted_corpus
    category = corpus.effective_categories()[0]
    doc = client.get("/api/images", params={"category": category,
                                            "page_size": 500}).json()
    want = sum(1 for r in corpus.records if r.effective_category == category)
    assert doc["total"] == want
    assert all(r["category"] == category for r in doc["records"])

    location = corpus.locations[0]
    doc = client.get("/api/images", params={"location": location,
                                            "page_size": 500}).json()
    assert all(r["location"] == location for r in doc["records"])
    assert doc["total"] == sum(1 for r in corpus.records if r.location_tag == location)


def test_images_bad_paging(client):
    resp = client.get("/api/images", params={"page": 0})
    assert resp.status_code == 400
    assert resp.json()["code"] == "validation"


def test_image_file_missing(client):
    # records carry file refs but the app was started without a corpus root
    resp = client.get("/api/images/syn-0000/file")
    assert resp.status_code == 404
    assert resp.json()["code"] == "not-found"
    assert client.get("/api/images/nope/file").status_code == 400


def test_image_file_served(planted_corpus, tmp_path):
    corpus, _, cfg = planted_corpus
    rec = corpus.records[0]
    target = tmp_path / rec.file_ref
    target.parent.mkdir(parents=True)
    target.write_bytes(b"\xff\xd8fakejpeg")
    local = TestClient(create_app(corpus, cfg, corpus_root=tmp_path))
    resp = local.get(f"/api/images/{rec.id}/file")
    assert resp.status_code == 200
    assert resp.content == b"\xff\xd8fakejpeg"
    other = corpus.records[1]
    assert local.get(f"/api/images/{other.id}/file").status_code == 404


def test_clusters_summary(client, planted_corpus):
    corpus, _, _ = planted_corpus
    doc = client.get("/api/clusters").json()
    assert doc["categories"] == corpus.categories
    assert sum(doc["counts"].values()) == corpus.n
    assert len(doc["images"]) == corpus.n
    for img in doc["images"]:
        assert img["top_category"] in corpus.categories
        assert 0.0 < img["top_probability"] <= 1.0
    row = {r.id: i for i, r in enumerate(corpus.records)}
    f = corpus.cluster_matrix
    for img in doc["images"][:10]:
        assert img["top_category"] == corpus.categories[int(f[row[img["id"]]].argmax())]


def test_graph_endpoint_and_cache(client, planted_corpus):
    corpus, _, _ = planted_corpus
    resp = client.get("/api/graph", params={"space": "high"})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["space"] == "high"
    assert len(doc["node_order"]) == corpus.n
    assert doc["edges"]
    again = client.get("/api/graph", params={"space": "high"})
    assert again.text == resp.text  # cache returns the identical document
    assert client.get("/api/graph", params={"space": "nope"}).status_code == 400


def test_graph_itf_variant(client):
    plain = client.get("/api/graph", params={"space": "high"}).json()
    itf = client.get("/api/graph", params={"space": "high", "itf": "true"}).json()
    def coh_map(doc):
        return {(e["source"], e["target"]): e["coherence"] for e in doc["edges"]}
    a, b = coh_map(plain), coh_map(itf)
    assert set(a) == set(b)
    assert all(b[k] <= a[k] + 1e-12 for k in a)  # down-weighting only


def test_extract_matches_library(client, planted_corpus, endpoints):
    corpus, _, cfg = planted_corpus
    source, target = endpoints
    body = {"source_id": source, "target_id": target, "K": 5, "mincover": 0.2}
    resp = client.post("/api/extract", json=body)
    assert resp.status_code == 200
    doc = resp.json()

    g = build_graph(corpus, corpus.embeddings["high"], corpus.cluster_matrix,
                    window=cfg.window, top_k_out=cfg.top_k_out,
                    mode=cfg.coherence_mode)
    params = ExtractionParams(source_id=source, target_id=target, K=5, mincover=0.2)
    want = extract_map(g, corpus, params, time_limit=cfg.timeout)
    assert doc["main_route"] == want.main_route
    assert doc["mu_star"] == want.mu_star
    assert doc["covered_clusters"] == want.covered_clusters

    again = client.post("/api/extract", json=body)
    assert again.text == resp.text  # deterministic end to end


def test_extract_validation_errors(client, endpoints):
    source, target = endpoints
    bad_id = client.post("/api/extract", json={"source_id": "nope", "target_id": target})
    assert bad_id.status_code == 400 and bad_id.json()["code"] == "validation"
    bad_k = client.post("/api/extract",
                        json={"source_id": source, "target_id": target, "K": 1})
    assert bad_k.status_code == 400
    assert "K" in bad_k.json()["message"]
    missing = client.post("/api/extract", json={"source_id": source})
    assert missing.status_code == 400
    assert missing.json()["code"] == "validation"
    assert missing.json()["detail"]  # pydantic error list


def test_extract_infeasible(client, endpoints):
    source, target = endpoints
    resp = client.post("/api/extract",
                       json={"source_id": source, "target_id": target, "K": 200})
    assert resp.status_code == 422
    doc = resp.json()
    assert doc["code"] == "infeasible"
    assert doc["detail"]["failed_families"]


def test_feasibility_endpoint(client, endpoints):
    source, target = endpoints
    ok = client.post("/api/feasibility",
                     json={"source_id": source, "target_id": target, "K": 5})
    assert ok.status_code == 200
    doc = ok.json()
    assert doc["feasible"] is True and doc["k_feasible"] is True
    assert set(doc) >= {"feasible", "k_feasible", "coverage_feasible",
                        "max_path_length", "required_coverage"}
    bad = client.post("/api/feasibility",
                      json={"source_id": source, "target_id": target, "K": 200})
    assert bad.status_code == 200
    assert bad.json()["feasible"] is False


def test_evaluate_endpoint(client, planted_corpus, endpoints):
    corpus, _, _ = planted_corpus
    ids = [r.id for r in corpus.records]
    resp = client.post("/api/evaluate",
                       json={"timeline": ids[:4], "baseline": ids[2:8]})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["distance"] >= 0
    assert doc["path"][0] == [0, 0] and doc["path"][-1] == [3, 5]
    assert -1.0 <= doc["mean_similarity"] <= 1.0

    short = client.post("/api/evaluate", json={"timeline": ids[:1], "baseline": ids[:3]})
    assert short.status_code == 400
    wrong_space = client.post("/api/evaluate",
                              json={"timeline": ids[:3], "baseline": ids[:3],
                                    "space": "low"})
    assert wrong_space.status_code == 400


def test_history_appends(planted_corpus, endpoints):
    corpus, _, cfg = planted_corpus
    fresh = TestClient(create_app(corpus, cfg))
    assert fresh.get("/api/history").json() == {"extractions": []}
    source, target = endpoints
    fresh.post("/api/extract", json={"source_id": source, "target_id": target, "K": 4})
    fresh.post("/api/extract", json={"source_id": source, "target_id": target, "K": 200})
    entries = fresh.get("/api/history").json()["extractions"]
    assert len(entries) == 1  # failures are not recorded
    entry = entries[0]
    assert set(entry) == {"params", "route", "mu_star", "covered_clusters"}
    assert entry["params"]["K"] == 4 and len(entry["route"]) == 4


def test_no_corpus_app(planted_corpus):
    _, _, cfg = planted_corpus
    empty = TestClient(create_app(None, cfg))
    resp = empty.get("/api/images")
    assert resp.status_code == 500
    assert resp.json()["code"] == "no-corpus"
    assert empty.post("/api/extract",
                      json={"source_id": "a", "target_id": "b"}).status_code == 500


def test_cors_headers(client):
    resp = client.get("/api/images", headers={"Origin": "http://localhost:5173"})
    assert resp.headers.get("access-control-allow-origin") == "*"
