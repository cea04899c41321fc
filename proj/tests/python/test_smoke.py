import json
import math
import os
import subprocess
from pathlib import Path

import pytest

import untangle

DATA = Path(os.environ.get("UNTANGLE_TEST_DATA", Path(__file__).resolve().parents[1]))


def git(repo, *args, date=None):
    env = dict(os.environ)
    if date is not None:
        env["GIT_AUTHOR_DATE"] = env["GIT_COMMITTER_DATE"] = f"@{date} +0000"
    subprocess.run(["git", "-C", str(repo), *args], check=True, env=env, capture_output=True)


CALC = """package demo;

public class Calc {{
    public int div(int a, int b) {{
{div}    }}

    public int add(int a, int b) {{
{add}    }}

    public int mul(int a, int b) {{
        return a * b;
    }}
}}
"""


@pytest.fixture()
def repo(tmp_path):
    r = tmp_path / "repo"
    r.mkdir()
    git(r, "init", "-q")
    git(r, "config", "user.name", "Fixture")
    git(r, "config", "user.email", "fixture@example.com")
    day = 86400
    steps = [
        ("Initial import", "        return a / b;\n", "        return a + b;\n", 0),
        ("Fix bug 7: division by zero", "        if (b == 0) {\n            return 0;\n        }\n        return a / b;\n",
         "        return a + b;\n", 800 * day),
        ("Fix bug 8: overflow and rename",
         "        if (b == 0) {\n            return 0;\n        }\n        int q = a / b;\n        return q;\n",
         "        return Math.addExact(a, b);\n", 900 * day),
    ]
    t0 = 1500000000
    for message, div, add, offset in steps:
        (r / "Calc.java").write_text(CALC.format(div=div, add=add))
        git(r, "add", "-A")
        git(r, "commit", "-q", "-m", message, date=t0 + offset)
    return r


def test_mine_and_gold_set(repo):
    mined = untangle.mine(str(repo))
    assert mined["commits"] == 3
    sigs = {(c["message"][:9], c["signature"]) for c in mined["changes"]}
    assert ("Fix bug 7", "Calc.div(int,int)") in sigs
    assert sum(1 for c in mined["changes"] if c["message"].startswith("Fix bug 8")) == 2
    gold = untangle.gold_set(mined["changes"], cap=10, seed=1)
    labels = {(g["signature"], g["label"]) for g in gold}
    assert ("Calc.div(int,int)", "Buggy") in labels
    assert ("Calc.mul(int,int)", "NotBuggy") in labels
    assert all(g["label"] == "NotBuggy" or g["methods_in_commit"] == 1 for g in gold)


def test_denoise_with_verdicts(repo):
    changes = untangle.mine(str(repo))["changes"]
    verdicts = {c["change_id"]: ("Buggy" if c["signature"].startswith("Calc.add") else "NotBuggy")
                for c in changes if c["is_bugfix"]}
    ps = untangle.denoise(changes, verdicts, project="demo")
    div = "demo/Calc.java::Calc.div(int,int)"
    add = "demo/Calc.java::Calc.add(int,int)"
    assert set(ps["noisy_buggy"]) == {div, add}
    assert set(ps["less_noisy_buggy"]) == {div, add}
    assert ps["verdict_queries"] == 2


def test_prompt_golden_and_sentinel(repo):
    change = untangle.mine(str(repo))["changes"][-1]
    text = untangle.render_prompt("diff-message", change)
    assert change["diff"] in text and change["message"] in text
    change["message"] = "Fix SENTINEL-7f3a"
    assert "SENTINEL-7f3a" not in untangle.render_prompt("diff-only", change)
    for v in untangle.VARIANTS:
        golden = DATA / "golden" / f"{v}.txt"
        assert golden.exists()


def test_verdict_parsing():
    assert untangle.parse_verdict("Buggy") == ("Buggy", None)
    assert untangle.parse_verdict("not buggy.")[0] == "NotBuggy"
    label, reasoning = untangle.parse_verdict("The rename is cosmetic.\nFinal answer: NotBuggy", reasoning=True)
    assert label == "NotBuggy" and reasoning
    assert untangle.parse_verdict("maybe")[0] == "Unparseable"


def test_metrics_and_statistics():
    m = untangle.classification_metrics(9, 1, 2, 8)
    assert m["precision"] == pytest.approx(0.9)
    assert m["f1"] == pytest.approx(18 / 21)
    assert m["mcc"] == pytest.approx(70 / math.sqrt(9900))
    r = untangle.rank_sum_test([1, 2, 3], [4, 5, 6])
    assert r["p_two_sided"] == 0.1 and r["method"] == "exact"
    d = untangle.cliffs_delta([1, 2, 3], [4, 5, 6])
    assert d["delta"] == -1.0 and d["category"] == "Large"
    k = untangle.cohens_kappa(["Buggy"] * 40 + ["Buggy"] * 10 + ["NotBuggy"] * 10 + ["NotBuggy"] * 40,
                              ["Buggy"] * 40 + ["NotBuggy"] * 10 + ["Buggy"] * 10 + ["NotBuggy"] * 40)
    assert k["kappa"] == 0.6


def test_code_metrics():
    src = "int f(int a) {\n    if (a > 0) {\n        return g(a);\n    }\n    return 0;\n}\n"
    m = untangle.code_metrics(src)
    assert m["size"] == 6
    assert m["mccabe"] == 2
    assert m["fan_out"] == 1
    assert 0 < m["readability"] < 1


def test_embedding_and_classifier():
    v = untangle.embed("Fix null check", "@@ -1 +1 @@\n-a\n+b\n")
    assert len(v) == 768
    assert math.isclose(math.sqrt(sum(x * x for x in v)), 1.0, rel_tol=1e-9)
    assert v == untangle.embed("Fix null check", "@@ -1 +1 @@\n-a\n+b\n")
    feats = [[1.0 + 0.1 * i, 0.0] for i in range(5)] + [[-1.0 - 0.1 * i, 0.0] for i in range(5)]
    labels = ["Buggy"] * 5 + ["NotBuggy"] * 5
    r = untangle.evaluate(feats, labels, protocol="loo", model="logistic", epochs=100, learning_rate=0.05, batch_size=4)
    assert r["protocol"] == "loo" and r["n"] == 10
    assert r["metrics"]["accuracy"] == 1.0
    assert untangle.gradient_check("mlp", [0.3, -1.2, 0.8, 0.1], "Buggy") <= 1e-4
    assert untangle.gradient_check("logistic", [0.3, -1.2, 0.8, 0.1], "NotBuggy") <= 1e-6


def test_errors_and_cli(tmp_path):
    with pytest.raises(untangle.UntangleError, match="InvalidLabel"):
        untangle.cohens_kappa(["Maybe"], ["Buggy"])
    with pytest.raises(untangle.UntangleError, match="EmptyInput"):
        untangle.rank_sum_test([], [1.0])
    with pytest.raises(ValueError):
        untangle.render_prompt("zero", {})
    code, out, err = untangle.run_cli(["--version"])
    assert code == 0 and out.strip() == untangle.__version__
    code, _, err = untangle.run_cli(["goldset", "--in", str(tmp_path / "missing.jsonl"), "--out", "x"])
    assert code == 1 and err
