"""Record advisor service responses as JSON fixtures for frontend tests.

Builds a small artifact bundle from synthetic blobs, drives one scripted
tree-model session through the in-process app, and writes every response
payload to disk.  The frontend renders these verbatim in its component
tests, which is what keeps it honest about not recomputing anything.
"""

import argparse
import json
import os
import sys
import tempfile

from fastapi.testclient import TestClient

from frugalnn import advisor, cli, data, synthetic


def build_artifacts(root: str) -> str:
    raw = os.path.join(root, "raw.csv")
    ds, _ = synthetic.blobs_with_noise(n_per_cluster=12, n_clusters=5,
                                       n_informative=2, n_noise=2, seed=5)
    data.save_dataset_csv(ds, raw)
    out = os.path.join(root, "artifacts")
    # tau 3 grows a deeper tree so the scripted session sees at least two
    # suggestion rounds before reaching a leaf
    for step in (["prepare", "--dataset", raw, "--out-dir", out],
                 ["cluster", "--out-dir", out],
                 ["build-tree", "--out-dir", out, "--tau", "3"],
                 ["train-dqn", "--out-dir", out, "--episodes", "30",
                  "--hidden", "8,8"]):
        rc = cli.main(step)
        if rc != 0:
            raise SystemExit(f"pipeline step {step[0]} failed: exit {rc}")
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="frontend/tests/fixtures")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    def dump(name, payload):
        path = os.path.join(args.out, f"{name}.json")
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}")

    with tempfile.TemporaryDirectory() as root:
        artifacts = build_artifacts(root)
        client = TestClient(advisor.create_app(artifacts))

        dump("meta", client.get("/meta").json())

        created = client.post("/sessions",
                              json={"model": "tree", "budget": 0.8})
        dump("session_created", created.json())
        sid = created.json()["session_id"]

        first = created.json()["suggestion"]["feature"]
        r = client.post(f"/sessions/{sid}/reveal",
                        json={"feature": first, "value": 0.42})
        dump("after_first_reveal", r.json())

        nxt = r.json()["suggestion"]
        if nxt["action"] == "reveal":
            r = client.post(f"/sessions/{sid}/reveal",
                            json={"feature": nxt["feature"], "value": 0.17})
            dump("after_second_reveal", r.json())

        dump("after_terminate",
             client.post(f"/sessions/{sid}/terminate").json())

        bad = client.post(f"/sessions/{sid}/reveal",
                          json={"feature": first, "value": 0.5})
        dump("error_session_done", bad.json())

        tiny = client.post("/sessions", json={"model": "tree", "budget": 0.3})
        tiny_sid = tiny.json()["session_id"]
        suggested = tiny.json()["suggestion"]["feature"]
        client.post(f"/sessions/{tiny_sid}/reveal",
                    json={"feature": suggested, "value": 0.9})
        blocked = client.post(
            f"/sessions/{tiny_sid}/reveal",
            json={"feature": [f["name"] for f in tiny.json()["features"]
                              if f["name"] != suggested][0],
                  "value": 0.1})
        dump("error_unaffordable", blocked.json())
    return 0


if __name__ == "__main__":
    sys.exit(main())
