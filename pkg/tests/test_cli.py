import json
import subprocess
import sys

import pytest

from opinionqa.cli import main, parse_args


def test_parse_defaults():
    a = parse_args(["train", "--mode", "binary", "--corpus", "d/", "--out", "m.bin"])
    assert (a.k, a.f, a.epochs, a.negatives, a.l2) == (5, 5000, 10, 10, 1e-3)
    a = parse_args(["train", "--mode", "open", "--corpus", "d/", "--out", "m", "--k", "5"])
    assert a.k == 5


@pytest.mark.parametrize("argv", [["train"], [], ["train", "--mode", "binary", "--corpus", "d", "--out", "m",
                                                   "--bogus", "1"], ["query", "--model", "m"]])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as e:
        parse_args(argv)
    assert e.value.code != 0


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--questions", "200", "--mode", "binary", "--seed", "2", "--out", str(d / "syn")]) == 0
    assert main(["train", "--mode", "binary", "--corpus", str(d / "syn"), "--f", "200", "--k", "2",
                 "--out", str(d / "bin.model")]) == 0
    assert main(["train", "--mode", "open", "--corpus", str(d / "syn"), "--f", "200", "--k", "2", "--epochs", "1",
                 "--max-iters", "20", "--out", str(d / "open.model")]) == 0
    return d


def test_query_binary_format(pipeline, capsys):
    capsys.readouterr()
    assert main(["query", "--model", str(pipeline / "bin.model"), "--product", "P0003",
                 "--question", "is qt0w1 nice", "--top", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4
    assert lines[-1].startswith("Response: yes (p=") or lines[-1].startswith("Response: no (p=")
    rank, prob, vote, text = lines[0].split("\t")
    assert rank == "1" and 0 <= float(prob) <= 1


def test_query_open_has_no_verdict(pipeline, capsys):
    capsys.readouterr()
    assert main(["query", "--model", str(pipeline / "open.model"), "--product", "P0003",
                 "--question", "what qt0w1", "--top", "10"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 5 and not any(x.startswith("Response") for x in lines)
    assert all(len(x.split("\t")) == 3 for x in lines)


def test_query_json_and_stdin(pipeline, capsys, monkeypatch):
    import io
    monkeypatch.setattr(sys, "stdin", io.StringIO("is it good\n\ndoes it fit\n"))
    capsys.readouterr()
    assert main(["query", "--model", str(pipeline / "bin.model"), "--product", "P0001", "--json"]) == 0
    rows = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert [r["question"] for r in rows] == ["is it good", "does it fit"]
    assert rows[0]["response"] in ("yes", "no") and len(rows[0]["opinions"]) == 5


def test_query_errors(pipeline, tmp_path, capsys):
    assert main(["query", "--model", str(pipeline / "bin.model"), "--product", "nope", "--question", "x"]) == 2
    assert "unknown product" in capsys.readouterr().err
    bad = tmp_path / "bad.model"
    bad.write_bytes((pipeline / "bin.model").read_bytes()[:50])
    assert main(["query", "--model", str(bad), "--product", "P0001", "--question", "x"]) == 3


def test_single_review_product(tmp_path, capsys):
    write_jsonl(tmp_path / "r.jsonl", [{"product_id": "a", "text": "Solid frame."},
                                       {"product_id": "b", "text": "Big. Heavy. Loud."}])
    qa = [{"product_id": p, "question": f"is it {w}", "answer": w, "label": lab}
          for p, w, lab in [("a", "yes", "yes"), ("b", "no", "no"), ("a", "yes ok", "yes"), ("b", "no way", "no"),
                            ("b", "yes sure", "yes"), ("a", "nope no", "no")]]
    write_jsonl(tmp_path / "q.jsonl", qa)
    assert main(["ingest", "--reviews", str(tmp_path / "r.jsonl"), "--qa", str(tmp_path / "q.jsonl"),
                 "--out", str(tmp_path / "c"), "--fractions", "0.5", "0.25", "0.25"]) == 0
    assert main(["train", "--mode", "binary", "--corpus", str(tmp_path / "c"), "--k", "1", "--f", "12",
                 "--out", str(tmp_path / "m")]) == 0
    capsys.readouterr()
    assert main(["query", "--model", str(tmp_path / "m"), "--product", "a", "--question", "is it solid"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2 and out[0].split("\t")[1] == "1.000"


def test_label_and_eval(pipeline, tmp_path, capsys):
    assert main(["label", "--corpus", str(pipeline / "syn"), "--keep", "0.5", "--out", str(tmp_path / "lab")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("detected=200 labeled=100 skipped=0")
    assert main(["eval", "--model", str(pipeline / "bin.model"), "--corpus", str(pipeline / "syn"),
                 "--baseline", "moqa", "--out", str(tmp_path / "r.csv")]) == 0
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0] == "metric,baseline,dataset,value,n" and rows[1].startswith("accuracy@0.5,moqa,syn,")
    assert main(["eval", "--corpus", str(pipeline / "syn"), "--baseline", "c", "--mode", "binary"]) == 1
    assert "cannot answer" in capsys.readouterr().err


def test_console_script_exit_status(tmp_path):
    r = subprocess.run([sys.executable, "-m", "opinionqa.cli", "query", "--model", str(tmp_path / "missing"),
                        "--product", "a", "--question", "x"], capture_output=True, text=True)
    assert r.returncode == 3 and r.stdout == "" and "cannot load model" in r.stderr
