import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient
from planting import corpus_sentences, plant_corpus

from synsearch import engine
from synsearch.corpus import Corpus, save_corpus
from synsearch.project import Project
from synsearch.server import create_app

FIXTURES = Path(__file__).parent / "fixtures"

FOUNDED_RAW = "<>e2:[e=PER]Mary t:[w]founded <>e1:[e=ORG]Microsoft ."
FOUNDED_CONLLU = """\
1\tMary\tMary\tNNP\t_\t_\t2\tnsubj\t_\tNER=B-PER
2\tfounded\tfound\tVBD\t_\t_\t0\troot\t_\t_
3\tMicrosoft\tMicrosoft\tNNP\t_\t_\t2\tdobj\t_\tNER=B-ORG
4\t.\t.\t.\t_\t_\t2\tpunct\t_\t_
"""


@pytest.fixture(scope="module")
def project_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("project")
    positives, negatives = plant_corpus(18, 60, seed=11)
    corpus = Corpus(corpus_sentences(positives, negatives))
    store = base / "store.jsonl"
    save_corpus(corpus, store)
    index = engine.build_index(corpus)
    engine.save_index(index, base / "idx", store_path="../store.jsonl")
    root = base / "proj"
    Project.init(root, store_path=store, index_path=base / "idx")
    return root


@pytest.fixture()
def client(project_dir):
    return TestClient(create_app(Project(project_dir)))


def register_founded(client, qid="founded-2"):
    resp = client.post("/queries", json={
        "id": qid, "raw": FOUNDED_RAW, "conllu": FOUNDED_CONLLU})
    assert resp.status_code == 200, resp.text
    return resp.json()


def test_corpus_stats(client):
    stats = client.get("/corpus/stats").json()
    assert stats["sentences"] == 78
    assert stats["entity_types"]["ORG"] > 0


def test_dry_run_parse(client):
    resp = client.post("/queries", json={"raw": FOUNDED_RAW, "dry_run": True})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["stripped"] == "Mary founded Microsoft ."
    assert [el["role"] for el in doc["elements"]] == \
        ["capture", "capture", "capture", "context"]


def test_register_malformed_query_400(client):
    resp = client.post("/queries", json={"id": "bad", "raw": "e1:[zz=PER]John"})
    assert resp.status_code == 400
    detail = resp.json()["detail"]
    assert "unknown constraint key" in detail["message"]
    assert "position" in detail


def test_register_and_search(client):
    record = register_founded(client)
    assert record["compile"]["status"] == "ok"
    assert record["pattern"]["signature"] == {"e1": ["ORG"], "e2": ["PER"]}

    resp = client.post("/queries/founded-2/search", params={"limit": 2})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["total"] >= 4
    assert len(doc["matches"]) == 2
    first = doc["matches"][0]
    assert set(first["bindings"]) == {"e1", "e2", "t"}
    assert first["tokens"]  # sentence text for highlighting

    resp = client.post("/queries/founded-2/search", params={"limit": 0})
    assert resp.json()["matches"] == []
    assert resp.json()["total"] == doc["total"]


def test_search_unknown_query_404(client):
    assert client.post("/queries/nope/search").status_code == 404


def test_compile_error_recorded_not_400(client):
    # grammar is fine but no parse is available -> registered with error status
    resp = client.post("/queries", json={"id": "noparse", "raw": FOUNDED_RAW})
    assert resp.status_code == 200
    assert resp.json()["compile"]["status"] == "error"
    assert "no parse available" in resp.json()["compile"]["message"]
    listed = client.get("/queries").json()["queries"]
    assert any(q["id"] == "noparse" and q["compile"]["status"] == "error"
               for q in listed)
    # searching it is a 404 (no compiled pattern)
    assert client.post("/queries/noparse/search").status_code == 404


def test_sample_and_labels_excluded(client):
    register_founded(client)
    resp = client.post("/queries/founded-2/sample", params={"n": 4, "seed": 3})
    assert resp.status_code == 200
    doc = resp.json()
    assert len(doc["matches"]) == 4
    assert doc["verdict"] == "pending"

    resp = client.post("/queries/founded-2/labels",
                       json={"labels": ["yes", "yes", "no", "no"]})
    assert resp.status_code == 200
    assert resp.json()["verdict"] == "excluded"


def test_labels_kept_boundary(client):
    register_founded(client, qid="founded-2b")
    client.post("/queries/founded-2b/sample", params={"n": 5, "seed": 1})
    resp = client.post("/queries/founded-2b/labels",
                       json={"labels": ["yes", "yes", "yes", "yes", "no"]})
    assert resp.json()["verdict"] == "kept"


def test_labels_without_sample_400(client):
    register_founded(client, qid="founded-2c")
    resp = client.post("/queries/founded-2c/labels",
                       json={"labels": ["yes"] * 5})
    assert resp.status_code == 400


def test_dataset_pending_409_then_build(client, project_dir):
    register_founded(client, qid="founded-2d")
    body = {"id": "ds1", "relation": "founded_by", "query_ids": ["founded-2d"],
            "max_positives": 100, "neg_ratio": 2, "seed": 5}
    resp = client.post("/datasets", json=body)
    assert resp.status_code == 409  # no labels yet -> pending verdict

    resp = client.post("/datasets", params={"include_pending": "true"}, json=body)
    assert resp.status_code == 200, resp.text
    info = resp.json()
    assert info["status"] == "done"
    assert info["stats"]["positives"] == 6  # active construction instances
    assert info["stats"]["negatives"] == 12

    # idempotent re-post with identical config
    resp = client.post("/datasets", params={"include_pending": "true"}, json=body)
    assert resp.status_code == 200
    # same id, different config -> conflict
    other = dict(body, seed=6)
    resp = client.post("/datasets", params={"include_pending": "true"}, json=other)
    assert resp.status_code == 409

    info = client.get("/datasets/ds1").json()
    assert info["downloads"]["jsonl"] == "/datasets/ds1/download/jsonl"
    assert client.get("/datasets/ds1/status").json() == {"id": "ds1", "status": "done"}

    resp = client.get("/datasets/ds1/download/jsonl")
    assert resp.status_code == 200
    assert "attachment" in resp.headers["content-disposition"]
    lines = [json.loads(l) for l in resp.text.splitlines()]
    assert len(lines) == 18
    jsonl_on_disk = (project_dir / "datasets" / "ds1" / "dataset.jsonl").read_bytes()
    assert resp.content == jsonl_on_disk

    resp = client.get("/datasets/ds1/download/markers")
    assert resp.status_code == 200
    assert resp.text.splitlines()[0].endswith("\tpositive")


def test_dataset_unknown_404(client):
    assert client.get("/datasets/missing").status_code == 404
    assert client.post("/datasets", json={
        "id": "x", "relation": "r", "query_ids": ["ghost"]}).status_code == 404


def test_labeled_build_after_keep(client):
    register_founded(client, qid="founded-2e")
    client.post("/queries/founded-2e/sample", params={"n": 5, "seed": 1})
    client.post("/queries/founded-2e/labels", json={"labels": ["yes"] * 5})
    resp = client.post("/datasets", json={
        "id": "ds-kept", "relation": "founded_by", "query_ids": ["founded-2e"],
        "neg_ratio": 0, "seed": 0})
    assert resp.status_code == 200, resp.text


def test_restart_reproduces_state(project_dir):
    client_a = TestClient(create_app(Project(project_dir)))
    register_founded(client_a, qid="persist-1")
    before = client_a.get("/queries").json()
    ds_before = client_a.get("/datasets").json()

    client_b = TestClient(create_app(Project(project_dir)))
    assert client_b.get("/queries").json() == before
    assert client_b.get("/datasets").json() == ds_before
    assert client_b.get("/queries/persist-1").json()["compile"]["status"] == "ok"


def test_http_build_byte_equals_cli(client, project_dir, tmp_path, capsys):
    register_founded(client, qid="parity-q")
    body = {"id": "parity-ds", "relation": "founded_by", "query_ids": ["parity-q"],
            "max_positives": 100, "neg_ratio": 2, "seed": 5}
    resp = client.post("/datasets", params={"include_pending": "true"}, json=body)
    assert resp.status_code == 200, resp.text
    http_bytes = client.get("/datasets/parity-ds/download/jsonl").content

    # same artifacts via the CLI path
    from synsearch.cli import main
    pattern_doc = client.get("/queries/parity-q").json()["pattern"]
    pats = tmp_path / "pats.json"
    pats.write_text(json.dumps([pattern_doc]))
    config = {
        "relation": "founded_by", "query_ids": ["parity-q"],
        "max_positives": 100, "neg_ratio": 2, "seed": 5,
        "index": str(project_dir / "index"), "store": str(project_dir / "store.jsonl"),
        "patterns": str(pats), "out_dir": str(tmp_path / "out"),
    }
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config))
    assert main(["dataset", "build", str(cfg)]) == 0
    capsys.readouterr()
    cli_bytes = (tmp_path / "out" / "dataset.jsonl").read_bytes()
    assert cli_bytes == http_bytes
