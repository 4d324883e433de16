"""Problem instances: random geometric generation, SteinLib parsing, dataset files."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from itertools import permutations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CorruptFile, DisconnectedGraph, GenerationFailed, ParseError, VersionMismatch
from .graph import Graph, is_connected

log = logging.getLogger(__name__)

STEINER = "steiner"
MULT_SPANNER = "mult_spanner"
ADD_SPANNER = "add_spanner"
KINDS = (STEINER, MULT_SPANNER, ADD_SPANNER)

DATASET_VERSION = 1
STP_MAGIC = "33D32945"


@dataclass(frozen=True)
class Instance:
    graph: Graph
    terminals: tuple
    kind: str = STEINER
    alpha: float | None = None
    beta_w: float | None = None  # additive stretch as a multiple of the max edge weight
    positions: tuple | None = None
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        terms = tuple(sorted(set(int(t) for t in self.terminals)))
        object.__setattr__(self, "terminals", terms)
        n = self.graph.n
        if not 2 <= len(terms) <= n:
            raise ValueError(f"need 2 <= |T| <= n, got |T|={len(terms)}, n={n}")
        if terms[0] < 0 or terms[-1] >= n:
            raise ValueError("terminal id out of range")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if (self.alpha is not None) != (self.kind == MULT_SPANNER):
            raise ValueError("alpha must be given exactly for mult_spanner instances")
        if (self.beta_w is not None) != (self.kind == ADD_SPANNER):
            raise ValueError("beta_w must be given exactly for add_spanner instances")
        if self.alpha is not None and self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.beta_w is not None and self.beta_w < 0:
            raise ValueError("beta_w must be >= 0")
        if self.positions is not None:
            pos = tuple((float(x), float(y)) for x, y in self.positions)
            if len(pos) != n:
                raise ValueError("positions length does not match node count")
            object.__setattr__(self, "positions", pos)
        if not is_connected(self.graph):
            raise DisconnectedGraph("instance graph must be connected")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def beta(self) -> float | None:
        """Absolute additive stretch, ``beta_w * W``."""
        if self.beta_w is None:
            return None
        return self.beta_w * self.graph.max_weight

    def with_kind(self, kind: str, alpha=None, beta_w=None) -> "Instance":
        return Instance(self.graph, self.terminals, kind, alpha, beta_w, self.positions, self.seed, self.name)

    def to_dict(self) -> dict:
        d = {
            "n": self.graph.n,
            "edges": [[u, v, _num(w)] for u, v, w in self.graph.edges],
            "terminals": list(self.terminals),
            "kind": self.kind,
            "seed": self.seed,
        }
        if self.alpha is not None:
            d["alpha"] = _num(self.alpha)
        if self.beta_w is not None:
            d["beta_w"] = _num(self.beta_w)
        if self.positions is not None:
            d["positions"] = [list(p) for p in self.positions]
        if self.name:
            d["name"] = self.name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        return cls(
            graph=Graph(d["n"], d["edges"]),
            terminals=tuple(d["terminals"]),
            kind=d["kind"],
            alpha=d.get("alpha"),
            beta_w=d.get("beta_w"),
            positions=d.get("positions"),
            seed=d.get("seed", 0),
            name=d.get("name", ""),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _num(x):
    x = float(x)
    return int(x) if x.is_integer() else x


# -- random geometric instances ------------------------------------------------


def geometric_radius(n: int) -> float:
    return math.sqrt(2.0 * math.log(n) / (math.pi * n))


def generate_geometric(
    n: int,
    seed: int,
    kind: str = STEINER,
    alpha: float | None = None,
    beta_w: float | None = None,
    max_retries: int = 1000,
    return_attempts: bool = False,
):
    """Random geometric graph in the unit square with integer weights in 1..10.

    Half the nodes (rounded down) become terminals. Disconnected draws are
    discarded and redrawn from a seed derived from ``(seed, attempt)``.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    if kind == MULT_SPANNER and alpha is None:
        alpha = 2.0
    if kind == ADD_SPANNER and beta_w is None:
        beta_w = 2.0
    r = geometric_radius(n)
    for attempt in range(max_retries):
        rng = np.random.default_rng([seed, attempt])
        pts = rng.random((n, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        close = np.sqrt((diff**2).sum(-1)) <= r
        iu, ju = np.nonzero(np.triu(close, k=1))
        weights = rng.integers(1, 11, size=len(iu))
        terminals = np.sort(rng.choice(n, size=n // 2, replace=False))
        g = Graph(n, zip(iu.tolist(), ju.tolist(), weights.tolist()))
        if not is_connected(g):
            continue
        inst = Instance(
            g,
            tuple(terminals.tolist()),
            kind,
            alpha if kind == MULT_SPANNER else None,
            beta_w if kind == ADD_SPANNER else None,
            positions=pts.tolist(),
            seed=seed,
        )
        return (inst, attempt + 1) if return_attempts else inst
    raise GenerationFailed(f"no connected geometric graph for n={n}, seed={seed} after {max_retries} tries")


# -- training labels -------------------------------------------------------------


@dataclass(frozen=True)
class LabeledSample:
    instance: int  # index into the owning instance list
    current_set: tuple
    target: int

    def __post_init__(self):
        if self.target in self.current_set:
            raise ValueError("target already in current set")


def make_labeled_samples(
    inst: Instance,
    optimal_nodes: Iterable[int],
    max_perms: int = 100,
    seed: int = 0,
    instance_index: int = 0,
) -> list[LabeledSample]:
    """One sample per prefix of up to ``max_perms`` distinct random orderings
    of the non-terminal solution nodes."""
    terms = set(inst.terminals)
    optimal = set(int(v) for v in optimal_nodes)
    if not terms <= optimal:
        raise ValueError("optimal node set must contain all terminals")
    extra = sorted(optimal - terms)
    if not extra:
        return []
    rng = np.random.default_rng(seed)
    k = len(extra)
    if math.factorial(k) <= max_perms:
        perms = list(permutations(extra))
        order = rng.permutation(len(perms))
        perms = [perms[i] for i in order]
    else:
        seen = set()
        perms = []
        while len(perms) < max_perms:
            p = tuple(extra[i] for i in rng.permutation(k))
            if p not in seen:
                seen.add(p)
                perms.append(p)
    base = tuple(inst.terminals)
    samples = []
    for p in perms:
        for j, target in enumerate(p):
            samples.append(LabeledSample(instance_index, base + p[:j], target))
    return samples


# -- SteinLib STP ----------------------------------------------------------------


def parse_stp(text, name: str = "") -> Instance:
    """Parse a SteinLib ``.stp`` file (Graph, Terminals and Coordinates sections)."""
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8", errors="replace")
    lines = text.splitlines()
    if not lines or not lines[0].strip().upper().startswith(STP_MAGIC):
        raise ParseError("missing 33D32945 magic header", 1)
    n = None
    edges: dict[tuple[int, int], float] = {}
    terminals = []
    coords: dict[int, tuple[float, float]] = {}
    section = None
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        head = tok[0].upper()
        if head == "EOF":
            break
        if head == "SECTION":
            if len(tok) < 2:
                raise ParseError("SECTION without a name", lineno)
            section = tok[1].lower()
            continue
        if head == "END":
            section = None
            continue
        try:
            if section == "comment":
                if head == "NAME" and not name:
                    name = line.split(None, 1)[1].strip().strip('"') if len(tok) > 1 else ""
            elif section == "graph":
                if head == "NODES":
                    n = int(tok[1])
                elif head == "E":
                    u, v, w = int(tok[1]) - 1, int(tok[2]) - 1, float(tok[3])
                    if u == v:
                        raise ParseError(f"self-loop on node {u + 1}", lineno)
                    key = (min(u, v), max(u, v))
                    if key in edges:
                        log.warning("duplicate edge %d-%d at line %d; keeping the lighter", u + 1, v + 1, lineno)
                        w = min(w, edges[key])
                    edges[key] = w
            elif section == "terminals":
                if head == "T":
                    terminals.append(int(tok[1]) - 1)
            elif section == "coordinates":
                if head.startswith("D") and len(tok) >= 4:
                    coords[int(tok[1]) - 1] = (float(tok[2]), float(tok[3]))
        except (IndexError, ValueError) as exc:
            raise ParseError(f"malformed line {line!r}", lineno) from exc
    if n is None:
        raise ParseError("Graph section lacks a Nodes line")
    try:
        g = Graph(n, [(u, v, w) for (u, v), w in edges.items()])
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    positions = None
    if coords:
        if len(coords) != n:
            raise ParseError("Coordinates section does not cover every node")
        positions = _unit_square([coords[i] for i in range(n)])
    return Instance(g, tuple(terminals), STEINER, positions=positions, name=name)


def _unit_square(points: Sequence) -> list:
    arr = np.asarray(points, dtype=float)
    lo = arr.min(axis=0)
    span = (arr.max(axis=0) - lo).max()
    if span == 0:
        return np.full_like(arr, 0.5).tolist()
    return ((arr - lo) / span).tolist()


def write_stp(inst: Instance) -> str:
    out = [f"{STP_MAGIC} STP File, STP Format Version 1.0", "", "SECTION Comment"]
    out.append(f'Name    "{inst.name or "instance"}"')
    out += ["END", "", "SECTION Graph", f"Nodes {inst.n}", f"Edges {inst.graph.m}"]
    out += [f"E {u + 1} {v + 1} {_num(w)}" for u, v, w in inst.graph.edges]
    out += ["END", "", "SECTION Terminals", f"Terminals {len(inst.terminals)}"]
    out += [f"T {t + 1}" for t in inst.terminals]
    out += ["END", "", "EOF", ""]
    return "\n".join(out)


def load_stp(path) -> Instance:
    path = Path(path)
    return parse_stp(path.read_bytes(), name=path.stem)


# -- dataset files ---------------------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":")) + "\n"


def _read_versioned(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise CorruptFile(f"{path}: no version header")
    if doc["version"] != DATASET_VERSION:
        raise VersionMismatch(f"{path}: version {doc['version']!r}, expected {DATASET_VERSION}")
    return doc


def dumps_dataset(instances: Sequence[Instance]) -> str:
    return _dump({"version": DATASET_VERSION, "instances": [i.to_dict() for i in instances]})


def save_dataset(path, instances: Sequence[Instance]) -> None:
    Path(path).write_text(dumps_dataset(instances))


def load_dataset(path) -> list[Instance]:
    doc = _read_versioned(path)
    try:
        return [Instance.from_dict(d) for d in doc["instances"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc


def save_samples(path, instances: Sequence[Instance], samples: Sequence[LabeledSample]) -> None:
    doc = {
        "version": DATASET_VERSION,
        "instances": [i.to_dict() for i in instances],
        "samples": [[s.instance, list(s.current_set), s.target] for s in samples],
    }
    Path(path).write_text(_dump(doc))


def load_samples(path) -> tuple[list[Instance], list[LabeledSample]]:
    doc = _read_versioned(path)
    try:
        instances = [Instance.from_dict(d) for d in doc["instances"]]
        samples = [LabeledSample(int(i), tuple(s), int(t)) for i, s, t in doc["samples"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    return instances, samples
