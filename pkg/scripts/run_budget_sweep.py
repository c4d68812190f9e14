"""Reproduce the headline budget-sweep experiment on synthetic data.

Generates the 8-feature blob dataset (4 informative features spread over a
latin grid of 5 cluster centers, 4 uniform noise features), runs the full
pipeline, and sweeps random / dqn / tree agents over a budget grid.  The
final table reports the mean sum of true distances per agent and budget,
with the exact-knn floor for context.

Full fidelity (4000 episodes per DQN cell) takes a few minutes per seed and
budget; --quick drops to 200 episodes for a fast smoke run.
"""

import argparse
import os
import sys
from collections import defaultdict

from frugalnn import cli, data, evaluate, synthetic


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="artifacts/sweep")
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--budgets", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    ap.add_argument("--agents", default="random,dqn,tree")
    ap.add_argument("--episodes", type=int, default=4000)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--quick", action="store_true",
                    help="200 episodes and a reduced grid, for smoke runs")
    ap.add_argument("--gen-seed", type=int, default=7,
                    help="dataset generation seed")
    return ap.parse_args()


def main():
    args = parse_args()
    if args.quick:
        args.episodes = 200
        args.budgets = "0.3,0.5,0.7"
        args.seeds = "0"

    os.makedirs(args.out_dir, exist_ok=True)
    raw_path = os.path.join(args.out_dir, "raw.csv")
    ds, _ = synthetic.blobs_with_noise(n_per_cluster=60, n_clusters=5,
                                       n_informative=4, n_noise=4,
                                       cluster_std=0.04, centers="latin",
                                       seed=args.gen_seed)
    data.save_dataset_csv(ds, raw_path)

    steps = [
        ["prepare", "--dataset", raw_path, "--out-dir", args.out_dir,
         "--seed", str(args.gen_seed)],
        ["cluster", "--out-dir", args.out_dir, "--seed", "0"],
        ["build-tree", "--out-dir", args.out_dir],
        ["sweep", "--out-dir", args.out_dir, "--agents", args.agents,
         "--budgets", args.budgets, "--seeds", args.seeds,
         "--episodes", str(args.episodes), "--jobs", str(args.jobs)],
    ]
    for step in steps:
        rc = cli.main(step)
        if rc != 0:
            print(f"step {step[0]} failed with exit code {rc}", file=sys.stderr)
            return rc

    rows = evaluate.read_report_csv(os.path.join(args.out_dir, "report.csv"))
    by_cell = defaultdict(list)
    for r in rows:
        by_cell[(r.agent, r.budget)].append(r.mean_sum_true_distance)

    train = data.load_dataset(os.path.join(args.out_dir, "train.csv"))
    test = data.load_dataset(os.path.join(args.out_dir, "test.csv"))
    floor = evaluate.full_reveal_bound(train.rows, test.rows, k=5)

    agents = sorted({r.agent for r in rows})
    budgets = sorted({r.budget for r in rows})
    print(f"\nmean sum of true distances over {len(rows) // (len(agents) * len(budgets))} "
          f"seed(s); exact-knn floor = {floor:.3f}")
    print("budget  " + "".join(f"{a:>10s}" for a in agents))
    for b in budgets:
        cells = "".join(f"{sum(by_cell[(a, b)]) / len(by_cell[(a, b)]):10.3f}"
                        for a in agents)
        print(f"{b:6.1f}  {cells}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
