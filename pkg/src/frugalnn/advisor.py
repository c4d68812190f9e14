"""Interactive acquisition service: reveal feature values one at a time over
HTTP and get back the policy's next suggestion, cluster ranking, predicted
cluster, and nearest candidates.

Unlike batch evaluation, feature values come from the caller, so a group
reveal marks the other members cost-free but each still needs a user-supplied
value before it enters any distance computation; those members are surfaced
in `awaiting_value` and suggested first (they cost nothing).  Raw values are
clamped into the training range and normalized with the stored stats.  All
advice is produced by the same library calls the batch path uses; handlers
only translate between JSON and those calls.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from frugalnn import cbctree, data, dqn
from frugalnn.cluster import Clustering, load_clustering, partial_distances, rank_clusters
from frugalnn.evaluate import knn_retrieve


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass(frozen=True)
class Bundle:
    """Immutable artifacts shared by every session."""

    feature_names: list[str]
    stats: data.FeatureStats
    mode: str
    train_rows: np.ndarray
    schedule: data.CostSchedule
    clustering: Clustering
    tree: cbctree.CBCTree | None
    network: dqn.QNetwork | None
    knn_k: int

    @property
    def models(self) -> list[str]:
        out = []
        if self.tree is not None:
            out.append("tree")
        if self.network is not None:
            out.append("dqn")
        return out

    def feature_id(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise ApiError(400, "unknown_feature",
                           f"no feature named {name!r}") from None


def load_bundle(artifacts_dir: str, knn_k: int = 5) -> Bundle:
    def path(name):
        return os.path.join(artifacts_dir, name)

    with open(path("stats.json")) as fh:
        meta = json.load(fh)
    names = meta["feature_names"]
    stats = data.FeatureStats.from_dict(meta["stats"])
    train = data.load_dataset(path("train.csv"))
    if train.feature_names != names:
        raise ValueError("train.csv and stats.json disagree on feature names")
    schedule = (data.load_cost_schedule(path("schedule.json"), len(names))
                if os.path.exists(path("schedule.json"))
                else data.uniform_schedule(len(names)))
    clustering = load_clustering(path("clustering.json"), train.rows)
    tree = (cbctree.load_tree(path("tree.json"), train.rows)
            if os.path.exists(path("tree.json")) else None)
    network = (dqn.load_model(path("model.npz"))[0]
               if os.path.exists(path("model.npz")) else None)
    return Bundle(feature_names=names, stats=stats, mode=meta["mode"],
                  train_rows=train.rows, schedule=schedule,
                  clustering=clustering, tree=tree, network=network,
                  knn_k=knn_k)


@dataclass
class Session:
    id: str
    policy: str
    budget: float
    values: dict[int, float] = field(default_factory=dict)   # normalized
    raw_values: dict[int, float] = field(default_factory=dict)
    pending: set[int] = field(default_factory=set)            # free, unvalued
    accrued: float = 0.0
    done: bool = False
    history: list[dict] = field(default_factory=list)
    last_access: float = 0.0
    advice: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def reveal_in_session(bundle: Bundle, session: Session, feature: int,
                      raw_value: float) -> None:
    """Charge, normalize, store, and expand the feature's group."""
    if session.done:
        raise ApiError(409, "session_done", "session already terminated")
    if feature in session.values:
        name = bundle.feature_names[feature]
        raise ApiError(409, "already_revealed", f"{name!r} already has a value")
    if not np.isfinite(raw_value):
        raise ApiError(400, "invalid_value", f"value must be finite, got {raw_value!r}")
    charge = 0.0 if feature in session.pending else float(bundle.schedule.costs[feature])
    if session.accrued + charge > session.budget:
        name = bundle.feature_names[feature]
        raise ApiError(409, "unaffordable",
                       f"{name!r} costs {charge} with "
                       f"{session.budget - session.accrued} budget left")
    session.values[feature] = data.clamp_to_train_range(
        raw_value, feature, bundle.stats, bundle.mode)
    session.raw_values[feature] = float(raw_value)
    session.pending.discard(feature)
    session.pending |= (bundle.schedule.group_of(feature)
                        - set(session.values))
    session.accrued += charge
    session.history.append({"op": "reveal",
                            "feature": bundle.feature_names[feature],
                            "value": float(raw_value), "charged": charge})


def terminate_session(session: Session) -> None:
    if not session.done:
        session.done = True
        session.history.append({"op": "terminate"})


def replay_history(bundle: Bundle, policy: str, budget: float,
                   history: list[dict]) -> Session:
    """Rebuild a session by pushing its event log through the same transitions."""
    session = Session(id="replay", policy=policy, budget=budget)
    for event in history:
        if event["op"] == "reveal":
            reveal_in_session(bundle, session,
                              bundle.feature_id(event["feature"]),
                              event["value"])
        elif event["op"] == "terminate":
            terminate_session(session)
        else:
            raise ValueError(f"unknown history op {event['op']!r}")
    return session


def _partial_point(bundle: Bundle, session: Session) -> np.ndarray:
    p = np.zeros(len(bundle.feature_names))
    for f, v in session.values.items():
        p[f] = v
    return p


def _suggest(bundle: Bundle, session: Session, p: np.ndarray,
             valued: np.ndarray) -> dict:
    if session.done:
        return {"action": "terminate"}
    if session.pending:
        f = min(session.pending)
        return {"action": "reveal", "feature": bundle.feature_names[f],
                "cost": 0.0}
    left = session.budget - session.accrued
    if session.policy == "tree":
        action = cbctree.suggest(bundle.tree, p, valued, bundle.schedule, left)
        if action.is_terminate:
            return {"action": "terminate"}
        f = action.feature
    else:
        n = len(bundle.feature_names)
        enc = np.zeros(n + 1)
        enc[valued] = 1.0
        enc[n] = session.accrued
        mask = np.zeros(n + 1, dtype=bool)
        for j in range(n):
            if j not in session.values and \
                    session.accrued + bundle.schedule.costs[j] <= session.budget:
                mask[j] = True
        mask[n] = True
        idx = dqn.act(bundle.network, enc, mask, eps=0.0)
        if idx == n:
            return {"action": "terminate"}
        f = idx
    return {"action": "reveal", "feature": bundle.feature_names[f],
            "cost": float(bundle.schedule.costs[f])}


def compute_advice(bundle: Bundle, session: Session) -> dict:
    p = _partial_point(bundle, session)
    valued = np.asarray(sorted(session.values), dtype=int)
    ranks = rank_clusters(p, valued, bundle.clustering)
    ranking = [int(c) for c in np.argsort(ranks, kind="stable")]

    if session.policy == "tree":
        leaf = cbctree.predict_cluster(bundle.tree, p, valued)
        predicted = {"kind": "leaf", "id": leaf.node_id, "size": leaf.size}
        restriction = np.asarray(leaf.point_indices, dtype=int)
    else:
        top = ranking[0]
        size = int((bundle.clustering.assignment == top).sum())
        predicted = {"kind": "centroid", "id": top, "size": size}
        restriction = None

    ids = knn_retrieve(bundle.train_rows, p, valued, bundle.knn_k, restriction)
    dists = partial_distances(p, bundle.train_rows[ids], valued)
    neighbors = [{"id": int(i), "distance": float(d)}
                 for i, d in zip(ids, dists)]

    revealed = [{"feature": e["feature"], "value": e["value"],
                 "charged": e["charged"]}
                for e in session.history if e["op"] == "reveal"]
    return {
        "session_id": session.id,
        "model": session.policy,
        "budget": session.budget,
        "remaining_budget": session.budget - session.accrued,
        "revealed": revealed,
        "awaiting_value": sorted(bundle.feature_names[f] for f in session.pending),
        "suggestion": _suggest(bundle, session, p, valued),
        "cluster_ranking": ranking,
        "predicted_cluster": predicted,
        "neighbors": neighbors,
        "done": session.done,
    }


class SessionStore:
    """In-memory map with last-access TTL eviction."""

    def __init__(self, ttl: float, clock=time.monotonic):
        self.ttl = ttl
        self.clock = clock
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def _sweep(self, now: float) -> None:
        dead = [sid for sid, s in self._sessions.items()
                if now - s.last_access > self.ttl]
        for sid in dead:
            del self._sessions[sid]

    def add(self, session: Session) -> None:
        with self._lock:
            now = self.clock()
            self._sweep(now)
            session.last_access = now
            self._sessions[session.id] = session

    def get(self, sid: str) -> Session:
        with self._lock:
            now = self.clock()
            self._sweep(now)
            session = self._sessions.get(sid)
            if session is None:
                raise ApiError(404, "unknown_session", f"no session {sid!r}")
            session.last_access = now
            return session

    def delete(self, sid: str) -> None:
        with self._lock:
            if sid not in self._sessions:
                raise ApiError(404, "unknown_session", f"no session {sid!r}")
            del self._sessions[sid]

    def __len__(self) -> int:
        return len(self._sessions)


class CreateSessionBody(BaseModel):
    model: str
    budget: float


class RevealBody(BaseModel):
    feature: str
    value: float


def _feature_catalog(bundle: Bundle) -> list[dict]:
    out = []
    for j, name in enumerate(bundle.feature_names):
        group = sorted(bundle.schedule.group_of(j))
        out.append({"name": name, "cost": float(bundle.schedule.costs[j]),
                    "group": [bundle.feature_names[g] for g in group]
                             if len(group) > 1 else None})
    return out


def create_app(artifacts_dir: str, knn_k: int = 5, ttl: float = 3600.0,
               ui_dir: str | None = None, clock=time.monotonic) -> FastAPI:
    bundle = load_bundle(artifacts_dir, knn_k=knn_k)
    store = SessionStore(ttl=ttl, clock=clock)
    app = FastAPI(title="feature acquisition advisor")

    @app.exception_handler(ApiError)
    def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"code": "invalid_request",
                                     "message": str(exc)})

    @app.get("/meta")
    def meta():
        return {"features": _feature_catalog(bundle),
                "models": bundle.models,
                "n_clusters": bundle.clustering.n_clusters,
                "k": bundle.knn_k,
                "mode": bundle.mode}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        if body.model not in bundle.models:
            raise ApiError(400, "unknown_model",
                           f"model must be one of {bundle.models}, got {body.model!r}")
        if not body.budget > 0:
            raise ApiError(400, "invalid_budget",
                           f"budget must be positive, got {body.budget}")
        session = Session(id=uuid.uuid4().hex, policy=body.model,
                          budget=float(body.budget))
        session.advice = compute_advice(bundle, session)
        store.add(session)
        return {**session.advice, "features": _feature_catalog(bundle)}

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        session = store.get(sid)
        with session.lock:
            return session.advice

    @app.post("/sessions/{sid}/reveal")
    def reveal(sid: str, body: RevealBody):
        session = store.get(sid)
        with session.lock:
            reveal_in_session(bundle, session, bundle.feature_id(body.feature),
                              body.value)
            session.advice = compute_advice(bundle, session)
            return session.advice

    @app.post("/sessions/{sid}/terminate")
    def terminate(sid: str):
        session = store.get(sid)
        with session.lock:
            terminate_session(session)
            session.advice = compute_advice(bundle, session)
            return session.advice

    @app.delete("/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        store.delete(sid)
        return Response(status_code=204)

    if ui_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    app.state.bundle = bundle
    app.state.store = store
    return app
