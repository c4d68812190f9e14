"""Command-line pipeline: prepare, cluster, build-tree, train-dqn, sweep,
print-tree, serve.

Every run is driven by one RunConfig assembled with precedence
flag > config file > FRUGALNN_SEED (seed only) > default, and every artifact
embeds the config hash so outputs can be traced to the exact settings that
produced them.  Exit codes: 0 ok, 1 usage, 2 bad data, 3 diverged training.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from frugalnn import cbctree, cluster, data, dqn, evaluate
from frugalnn.errors import DataError, TrainingDiverged

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3


@dataclass(frozen=True)
class RunConfig:
    dataset: str | None = None
    costs: str | None = None
    out_dir: str = "artifacts"
    mode: str = "minmax"
    train_fraction: float = 0.8
    n_clusters: int = 5
    knn_k: int = 5
    alpha: float = 1.0
    tau: int = 10
    ell: int = 20
    budget: float = 0.5
    budgets: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    seeds: tuple[int, ...] = (0,)
    agents: tuple[str, ...] = ("random", "dqn", "tree")
    episodes: int = 4000
    lr: float = 0.01
    gamma: float = 0.8
    eps0: float = 1.0
    eps_decay: float = 0.999
    hidden: tuple[int, ...] = (128, 256)
    batch_size: int = 64
    sync_interval: int = 100
    buffer_capacity: int = 50_000
    seed: int = 0
    jobs: int = 1
    trace: bool = False
    tree_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    ui_dir: str | None = None
    ttl: float = 3600.0

    def hyper(self, seed: int | None = None) -> dqn.DqnHyper:
        return dqn.DqnHyper(
            episodes=self.episodes, lr=self.lr, gamma=self.gamma,
            eps0=self.eps0, eps_decay=self.eps_decay, hidden=self.hidden,
            buffer_capacity=self.buffer_capacity, batch_size=self.batch_size,
            sync_interval=self.sync_interval,
            seed=self.seed if seed is None else seed)


def config_hash(cfg: RunConfig) -> str:
    doc = json.dumps(asdict(cfg), sort_keys=True, default=list)
    return hashlib.sha256(doc.encode()).hexdigest()[:12]


_TUPLE_FIELDS = {
    "budgets": float,
    "seeds": int,
    "agents": str,
    "hidden": int,
}


def _parse_tuple(text, elem):
    if isinstance(text, (list, tuple)):
        return tuple(elem(v) for v in text)
    return tuple(elem(part) for part in str(text).split(",") if part != "")


def merge_config(args: argparse.Namespace) -> RunConfig:
    values = {f.name: f.default for f in fields(RunConfig)}
    if "FRUGALNN_SEED" in os.environ:
        values["seed"] = int(os.environ["FRUGALNN_SEED"])
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - set(values)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(file_values)
    for name in values:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    for name, elem in _TUPLE_FIELDS.items():
        values[name] = _parse_tuple(values[name], elem)
    return RunConfig(**values)


def _artifact(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, name)


def _require(path: str, hint: str) -> str:
    if not os.path.exists(path):
        raise ValueError(f"missing artifact {path}; run `{hint}` first")
    return path


def _load_stats(cfg: RunConfig) -> dict:
    with open(_require(_artifact(cfg, "stats.json"), "prepare")) as fh:
        return json.load(fh)


def _load_split(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray, dict]:
    meta = _load_stats(cfg)
    names = meta["feature_names"]
    train = data.load_dataset(_require(_artifact(cfg, "train.csv"), "prepare"))
    test = data.load_dataset(_require(_artifact(cfg, "test.csv"), "prepare"))
    if train.feature_names != names or test.feature_names != names:
        raise DataError("prepared files disagree with stats.json feature names")
    return train.rows, test.rows, meta


def _load_schedule(cfg: RunConfig, n_features: int) -> data.CostSchedule:
    path = _artifact(cfg, "schedule.json")
    if os.path.exists(path):
        return data.load_cost_schedule(path, n_features)
    return data.uniform_schedule(n_features)


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_prepare(cfg: RunConfig) -> int:
    if not cfg.dataset:
        raise ValueError("prepare requires --dataset (or `dataset` in the config file)")
    h = config_hash(cfg)
    raw = data.load_dataset(cfg.dataset)
    spec = data.SplitSpec(train_fraction=cfg.train_fraction, seed=cfg.seed)
    train, test = data.split(raw, spec, mode=cfg.mode)
    schedule = (data.load_cost_schedule(cfg.costs, raw.n_features)
                if cfg.costs else data.uniform_schedule(raw.n_features))
    os.makedirs(cfg.out_dir, exist_ok=True)
    data.save_dataset_csv(train, _artifact(cfg, "train.csv"))
    data.save_dataset_csv(test, _artifact(cfg, "test.csv"))
    _write_json(_artifact(cfg, "stats.json"), {
        "feature_names": train.feature_names,
        "mode": cfg.mode,
        "stats": train.stats.to_dict(),
        "n_train": len(train), "n_test": len(test),
        "seed": cfg.seed, "config_hash": h,
    })
    _write_json(_artifact(cfg, "schedule.json"),
                {**schedule.to_dict(), "config_hash": h})
    print(f"prepared {len(train)} train / {len(test)} test rows -> {cfg.out_dir}")
    return EXIT_OK


def cmd_cluster(cfg: RunConfig) -> int:
    train_rows, _, _ = _load_split(cfg)
    cl = cluster.kmeans(train_rows, cfg.n_clusters, seed=cfg.seed)
    cluster.save_clustering(cl, _artifact(cfg, "clustering.json"),
                            extra={"config_hash": config_hash(cfg)})
    print(f"k-means: {cfg.n_clusters} centroids over {train_rows.shape[0]} rows "
          f"(hash {cluster.clustering_hash(cl)})")
    return EXIT_OK


def cmd_build_tree(cfg: RunConfig) -> int:
    train_rows, _, _ = _load_split(cfg)
    schedule = _load_schedule(cfg, train_rows.shape[1])
    params = cbctree.TreeParams(tau=cfg.tau, alpha=cfg.alpha, ell=cfg.ell)
    tree = cbctree.build(train_rows, schedule, params)
    cbctree.save_tree(tree, _artifact(cfg, "tree.json"),
                      extra={"config_hash": config_hash(cfg)})
    print(f"tree: {len(tree.leaves())} leaves over {train_rows.shape[0]} rows")
    return EXIT_OK


def _load_clustering(cfg: RunConfig, rows: np.ndarray) -> cluster.Clustering:
    return cluster.load_clustering(
        _require(_artifact(cfg, "clustering.json"), "cluster"), rows)


def cmd_train_dqn(cfg: RunConfig) -> int:
    train_rows, _, meta = _load_split(cfg)
    schedule = _load_schedule(cfg, train_rows.shape[1])
    cl = _load_clustering(cfg, train_rows)
    env = evaluate.Environment(train_rows, cl, schedule, alpha=cfg.alpha)
    result = dqn.train(env, cfg.budget, cfg.hyper())
    dqn.save_model(_artifact(cfg, "model.npz"), result.network, cfg.hyper(),
                   meta={"config_hash": config_hash(cfg), "budget": cfg.budget,
                         "alpha": cfg.alpha,
                         "feature_names": meta["feature_names"],
                         "stats": meta["stats"], "mode": meta["mode"],
                         "clustering_hash": cluster.clustering_hash(cl)})
    with open(_artifact(cfg, "reward_trace.csv"), "w") as fh:
        fh.write("episode_bucket,avg_reward\n")
        for episode, avg in result.reward_trace:
            fh.write(f"{episode},{avg!r}\n")
    last = result.reward_trace[-1][1] if result.reward_trace else float("nan")
    print(f"trained {cfg.episodes} episodes at budget {cfg.budget}; "
          f"final bucket avg reward {last:.4f}, epsilon {result.final_epsilon:.4f}")
    return EXIT_OK


def _sweep_cell_job(payload: dict) -> tuple:
    """One (agent, budget, seed) cell from artifact paths; pool-safe."""
    cfg = RunConfig(**payload["config"])
    train_rows, test_rows, _ = _load_split(cfg)
    schedule = _load_schedule(cfg, train_rows.shape[1])
    cl = _load_clustering(cfg, train_rows)
    name, budget, seed = payload["agent"], payload["budget"], payload["seed"]
    if name == "random":
        agent = evaluate.RandomAgent(seed)
    elif name == "dqn":
        env = evaluate.Environment(train_rows, cl, schedule, alpha=cfg.alpha)
        result = dqn.train(env, budget, cfg.hyper(seed))
        agent = evaluate.DqnAgent(result.network)
    elif name == "tree":
        tree = cbctree.load_tree(
            _require(_artifact(cfg, "tree.json"), "build-tree"), train_rows)
        agent = evaluate.TreeAgent(tree, schedule)
    else:
        raise ValueError(f"unknown agent {name!r}")
    row, traces = evaluate.evaluate_cell(
        agent, name, train_rows, test_rows, cl, schedule, budget, seed,
        k=cfg.knn_k, alpha=cfg.alpha, collect_trace=cfg.trace)
    return row, traces


def cmd_sweep(cfg: RunConfig) -> int:
    train_rows, test_rows, _ = _load_split(cfg)
    _load_schedule(cfg, train_rows.shape[1])
    _load_clustering(cfg, train_rows)
    if "tree" in cfg.agents:
        _require(_artifact(cfg, "tree.json"), "build-tree")
    payloads = [{"config": asdict(cfg), "agent": name, "budget": b, "seed": s}
                for name in sorted(cfg.agents)
                for b in cfg.budgets
                for s in cfg.seeds]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_sweep_cell_job, payloads))
    else:
        results = [_sweep_cell_job(p) for p in payloads]
    report = evaluate.SweepReport(rows=[r for r, _ in results])
    for _, traces in results:
        report.traces.extend(traces)
    evaluate.write_report_csv(report, _artifact(cfg, "report.csv"),
                              comments=[f"config_hash={config_hash(cfg)}"])
    if cfg.trace:
        evaluate.write_trace_csv(report, _artifact(cfg, "trace.csv"))
    print(f"sweep: {len(report.rows)} rows -> {_artifact(cfg, 'report.csv')}")
    return EXIT_OK


def cmd_print_tree(cfg: RunConfig) -> int:
    train_rows, _, meta = _load_split(cfg)
    path = cfg.tree_path or _require(_artifact(cfg, "tree.json"), "build-tree")
    tree = cbctree.load_tree(path, train_rows)
    print(cbctree.format_tree(tree, meta["feature_names"]))
    return EXIT_OK


def cmd_serve(cfg: RunConfig) -> int:
    import uvicorn

    from frugalnn import advisor
    app = advisor.create_app(cfg.out_dir, knn_k=cfg.knn_k, ttl=cfg.ttl,
                             ui_dir=cfg.ui_dir)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> _Parser:
    top = _Parser(prog="frugalnn",
                  description="budgeted feature acquisition pipeline")
    sub = top.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--seed", type=int)
        return p

    p = add("prepare", cmd_prepare, "normalize, split, write cost schedule")
    p.add_argument("--dataset")
    p.add_argument("--costs")
    p.add_argument("--mode", choices=data.NORMALIZATION_MODES)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)

    p = add("cluster", cmd_cluster, "k-means over the training rows")
    p.add_argument("--n-clusters", dest="n_clusters", type=int)

    p = add("build-tree", cmd_build_tree, "grow the cost-balancing tree")
    p.add_argument("--tau", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--ell", type=int)

    p = add("train-dqn", cmd_train_dqn, "train the Q-network at one budget")
    p.add_argument("--budget", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--episodes", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eps0", type=float)
    p.add_argument("--eps-decay", dest="eps_decay", type=float)
    p.add_argument("--hidden")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--sync-interval", dest="sync_interval", type=int)
    p.add_argument("--buffer-capacity", dest="buffer_capacity", type=int)

    p = add("sweep", cmd_sweep, "evaluate agents over a budget grid")
    p.add_argument("--agents")
    p.add_argument("--budgets")
    p.add_argument("--seeds")
    p.add_argument("--knn-k", dest="knn_k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--jobs", type=int)
    p.add_argument("--trace", action="store_true", default=None)
    p.add_argument("--episodes", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eps0", type=float)
    p.add_argument("--eps-decay", dest="eps_decay", type=float)
    p.add_argument("--hidden")

    p = add("print-tree", cmd_print_tree, "render a stored tree as text")
    p.add_argument("--tree", dest="tree_path")

    p = add("serve", cmd_serve, "run the interactive advisor service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--ui-dir", dest="ui_dir")
    p.add_argument("--ttl", type=float)
    p.add_argument("--knn-k", dest="knn_k", type=int)

    return top


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = merge_config(args)
        return args.func(cfg)
    except SystemExit as e:
        return int(e.code or 0)
    except TrainingDiverged as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
