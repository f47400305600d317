"""JSON files for instances, deployments and experiment configs.

Instance files (``format_version`` 1)::

    {"format_version": 1,
     "units": {...},
     "servers": [{"id", "cpu_GHz", "storage_MB", "cloud_bw_MBps"}],
     "layers": [{"id", "size_MB"}],
     "apps": [{"id", "source_server", "ingress_KB",
               "microservices": [{"idx", "cpu_GHz", "layers"}],   # idx 1..A
               "traffic": [{"src", "dst", "KB"}]}],
     "adjacency": [[0, 1, ...], ...]}

``hops`` replaces ``adjacency`` for instances built from a hop matrix alone.
Virtual sources are never written; loading returns an un-augmented instance.

Deployment files carry ``placements`` as ``{app: {idx: server}}`` (virtual
sources included, as idx 0) and the derived ``layer_pulls`` as one layer list
per server.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidInstance
from .model import Application, Deployment, HopMatrix, Instance, Layer, Microservice, Server, build_hop_matrix

__all__ = [
    "FORMAT_VERSION",
    "UNITS",
    "instance_to_dict",
    "instance_from_dict",
    "save_instance",
    "load_instance",
    "deployment_to_dict",
    "deployment_from_dict",
    "save_deployment",
    "load_deployment",
    "load_json",
    "dump_json",
]

FORMAT_VERSION = 1
UNITS = {
    "cpu": "GHz",
    "storage": "MB",
    "bandwidth": "MB/s",
    "layer_size": "MB",
    "traffic": "KB",
    "hops": "hop",
}


def dump_json(data, path):
    text = json.dumps(data, indent=2, sort_keys=False) + "\n"
    Path(path).write_text(text)


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInstance(f"{path}: not valid JSON ({exc})") from None


def _check_version(data, kind):
    if not isinstance(data, dict):
        raise InvalidInstance(f"{kind} file must hold a JSON object")
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise InvalidInstance(f"{kind} format_version {version!r} is not supported (expected {FORMAT_VERSION})")


def _real_part(app):
    """Real microservices, traffic and ingress of a possibly augmented app."""
    if not app.augmented:
        return app.microservices, app.traffic, app.ingress
    return app.microservices[1:], app.traffic[1:, 1:], float(app.traffic[0, 1]) if len(app) > 1 else app.ingress


def instance_to_dict(instance: Instance) -> dict:
    apps = []
    for app in instance.apps:
        mss, w, ingress = _real_part(app)
        src, dst = np.nonzero(w)
        apps.append({
            "id": app.id,
            "name": app.name,
            "source_server": app.source_server,
            "ingress_KB": float(ingress),
            "microservices": [
                {"idx": ms.idx, "name": ms.name, "cpu_GHz": ms.cpu_demand, "layers": sorted(ms.layers)}
                for ms in mss
            ],
            "traffic": [
                {"src": int(a) + 1, "dst": int(b) + 1, "KB": float(w[a, b])} for a, b in zip(src, dst)
            ],
        })
    out = {
        "format_version": FORMAT_VERSION,
        "units": dict(UNITS),
        "servers": [
            {"id": s.id, "name": s.name, "cpu_GHz": s.cpu, "storage_MB": s.storage, "cloud_bw_MBps": s.cloud_bw}
            for s in instance.servers
        ],
        "layers": [{"id": l.id, "size_MB": l.size} for l in instance.layers],
        "apps": apps,
    }
    if instance.adjacency is not None:
        out["adjacency"] = instance.adjacency.astype(int).tolist()
    else:
        out["hops"] = instance.hops.d.astype(int).tolist()
    return out


def instance_from_dict(data: dict) -> Instance:
    _check_version(data, "instance")
    try:
        servers = [
            Server(int(s["id"]), float(s["cpu_GHz"]), float(s["storage_MB"]), float(s["cloud_bw_MBps"]),
                   s.get("name", ""))
            for s in data["servers"]
        ]
        layers = [Layer(int(l["id"]), float(l["size_MB"])) for l in data["layers"]]
        apps = []
        for a in data["apps"]:
            k = int(a["id"])
            mss = tuple(
                Microservice(k, int(m["idx"]), float(m["cpu_GHz"]), frozenset(int(l) for l in m["layers"]),
                             name=m.get("name", ""))
                for m in a["microservices"]
            )
            w = np.zeros((len(mss), len(mss)))
            for e in a.get("traffic", []):
                src, dst = int(e["src"]), int(e["dst"])
                if not (1 <= src <= len(mss) and 1 <= dst <= len(mss)):
                    raise InvalidInstance(f"app {k}: traffic edge {src}->{dst} names an unknown microservice")
                w[src - 1, dst - 1] = float(e["KB"])
            apps.append(Application(k, mss, w, int(a["source_server"]), float(a.get("ingress_KB", 0.0)),
                                    a.get("name", "")))
        if "adjacency" in data:
            adjacency = np.asarray(data["adjacency"], dtype=np.int8)
            hops = build_hop_matrix(adjacency)
        elif "hops" in data:
            adjacency, hops = None, HopMatrix(np.asarray(data["hops"]))
        else:
            raise InvalidInstance("instance needs an adjacency or a hops matrix")
    except (KeyError, TypeError) as exc:
        raise InvalidInstance(f"malformed instance file: missing or wrong field {exc}") from None
    return Instance(servers, layers, apps, hops, adjacency=adjacency)


def save_instance(instance: Instance, path):
    dump_json(instance_to_dict(instance), path)


def load_instance(path) -> Instance:
    return instance_from_dict(load_json(path))


def deployment_to_dict(dep: Deployment, meta: dict | None = None) -> dict:
    placements = {}
    for (k, i), s in sorted(dep.placements.items()):
        placements.setdefault(str(k), {})[str(i)] = int(s)
    out = {
        "format_version": FORMAT_VERSION,
        "placements": placements,
        "n_layers": int(dep.pulls.shape[1]),
        "layer_pulls": [np.flatnonzero(row).tolist() for row in dep.pulls],
    }
    if meta:
        out["meta"] = meta
    return out


def deployment_from_dict(data: dict) -> Deployment:
    _check_version(data, "deployment")
    try:
        placements = {
            (int(k), int(i)): int(s) for k, inner in data["placements"].items() for i, s in inner.items()
        }
        rows = data["layer_pulls"]
        pulls = np.zeros((len(rows), int(data["n_layers"])), dtype=np.int8)
        for n, row in enumerate(rows):
            pulls[n, row] = 1
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InvalidInstance(f"malformed deployment file: {exc}") from None
    return Deployment(placements, pulls)


def save_deployment(dep: Deployment, path, meta: dict | None = None):
    dump_json(deployment_to_dict(dep, meta), path)


def load_deployment(path) -> Deployment:
    return deployment_from_dict(load_json(path))
