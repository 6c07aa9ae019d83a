"""Finite turn-based stochastic game graphs.

A game is an ordered collection of :class:`Vertex` records.  Successor lists
are ordered and that order is the tie-breaking order used everywhere else.
Algorithms work on integer indices; :class:`Game` exposes cached numpy views
of the graph for that purpose.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

PROB_TOL = 1e-9


class Owner(str, Enum):
    MAX = "max"
    MIN = "min"
    CHANCE = "chance"


class GameError(ValueError):
    """Invalid game or invalid operation on a game."""


class ParseError(GameError):
    pass


@dataclass(frozen=True)
class Vertex:
    id: str
    owner: Owner
    reward: float
    succ: Tuple[str, ...]
    dist: Optional[Tuple[float, ...]] = None


class Game:
    """Immutable game graph.  Construction does not validate; see :func:`validate`."""

    def __init__(self, vertices: Iterable[Vertex]):
        self.vertices: Tuple[Vertex, ...] = tuple(vertices)
        self.ids: Tuple[str, ...] = tuple(v.id for v in self.vertices)
        self.index: Dict[str, int] = {vid: i for i, vid in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __getitem__(self, vid: str) -> Vertex:
        return self.vertices[self.index[vid]]

    def __contains__(self, vid) -> bool:
        return vid in self.index

    def __eq__(self, other) -> bool:
        if not isinstance(other, Game) or len(self) != len(other):
            return False
        for a, b in zip(self.vertices, other.vertices):
            if (a.id, a.owner, a.reward, a.succ) != (b.id, b.owner, b.reward, b.succ):
                return False
            if (a.dist is None) != (b.dist is None):
                return False
            if a.dist is not None and any(abs(x - y) > 1e-12 for x, y in zip(a.dist, b.dist)):
                return False
        return True

    __hash__ = None

    def __repr__(self) -> str:
        return f"Game({len(self)} vertices)"

    def owned(self, owner: Owner) -> List[str]:
        return [v.id for v in self.vertices if v.owner == owner]

    def check_vertex(self, vid: str) -> int:
        try:
            return self.index[vid]
        except KeyError:
            raise GameError(f"unknown vertex {vid!r}") from None

    # -- index views -------------------------------------------------------

    @cached_property
    def rewards(self) -> np.ndarray:
        r = np.array([v.reward for v in self.vertices], dtype=float)
        r.flags.writeable = False
        return r

    @cached_property
    def owner_codes(self) -> np.ndarray:
        codes = {Owner.MAX: 0, Owner.MIN: 1, Owner.CHANCE: 2}
        return np.array([codes[v.owner] for v in self.vertices], dtype=np.int8)

    @cached_property
    def succ_idx(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(tuple(self.index[s] for s in v.succ) for v in self.vertices)

    @cached_property
    def padded(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(succ, mask, weight)`` matrices of shape ``(n, max_degree)``.

        Padding slots point at vertex 0 and are masked out; ``weight`` holds
        chance probabilities and is zero elsewhere.
        """
        n = len(self)
        width = max((len(s) for s in self.succ_idx), default=1)
        succ = np.zeros((n, width), dtype=np.intp)
        mask = np.zeros((n, width), dtype=bool)
        weight = np.zeros((n, width))
        for i, (v, s) in enumerate(zip(self.vertices, self.succ_idx)):
            succ[i, : len(s)] = s
            mask[i, : len(s)] = True
            if v.owner == Owner.CHANCE:
                weight[i, : len(s)] = v.dist
        return succ, mask, weight

    def vector(self, values: Mapping[str, float], default: Optional[float] = None) -> np.ndarray:
        out = np.empty(len(self))
        for i, vid in enumerate(self.ids):
            if vid in values:
                out[i] = values[vid]
            elif default is not None:
                out[i] = default
            else:
                raise GameError(f"no value for vertex {vid!r}")
        return out

    def as_dict(self, x: Sequence[float]) -> Dict[str, float]:
        return {vid: float(x[i]) for i, vid in enumerate(self.ids)}


def validate(game: Game) -> List[str]:
    """Return a list of human-readable violations; empty iff the game is valid."""
    problems = []
    seen = set()
    for v in game.vertices:
        if not isinstance(v.id, str) or not v.id:
            problems.append(f"{v.id!r}: ids must be non-empty strings")
        if v.id in seen:
            problems.append(f"{v.id}: duplicate id")
        seen.add(v.id)
    for v in game.vertices:
        if not isinstance(v.owner, Owner):
            problems.append(f"{v.id}: unknown owner {v.owner!r}")
        r = v.reward
        if not isinstance(r, (int, float)) or math.isnan(r) or math.isinf(r) or r < 0:
            problems.append(f"{v.id}: reward must be finite and >= 0, got {r!r}")
        if not v.succ:
            problems.append(f"{v.id}: totality violated, no successors")
        if len(set(v.succ)) != len(v.succ):
            problems.append(f"{v.id}: duplicate successor")
        for s in v.succ:
            if s not in game.index:
                problems.append(f"{v.id}: unknown successor {s!r}")
        if v.owner == Owner.CHANCE:
            if v.dist is None:
                problems.append(f"{v.id}: chance vertex without distribution")
            elif len(v.dist) != len(v.succ):
                problems.append(f"{v.id}: distribution does not match successor list")
            else:
                if any(not p > 0 for p in v.dist):
                    problems.append(f"{v.id}: probabilities must be strictly positive")
                total = sum(v.dist)
                if abs(total - 1.0) > PROB_TOL:
                    problems.append(f"{v.id}: probabilities sum to {total!r}, not 1")
        elif v.dist is not None:
            problems.append(f"{v.id}: only chance vertices carry a distribution")
    return problems


def require_valid(game: Game) -> Game:
    problems = validate(game)
    if problems:
        raise GameError("invalid game: " + "; ".join(problems))
    return game


# -- serialization ----------------------------------------------------------

_FIELDS = {"id", "owner", "reward", "succ", "dist"}


def _parse_vertex(obj, k: int) -> Vertex:
    where = f"vertices[{k}]"
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    extra = set(obj) - _FIELDS
    if extra:
        raise ParseError(f"{where}: unknown field(s) {sorted(extra)}")
    for key in ("id", "owner", "succ"):
        if key not in obj:
            raise ParseError(f"{where}: missing field {key!r}")
    vid = obj["id"]
    if not isinstance(vid, str) or not vid:
        raise ParseError(f"{where}.id: expected a non-empty string")
    try:
        owner = Owner(obj["owner"])
    except ValueError:
        raise ParseError(f"{where}.owner: unknown owner {obj['owner']!r}") from None
    reward = obj.get("reward", 0.0)
    if isinstance(reward, bool) or not isinstance(reward, (int, float)):
        raise ParseError(f"{where}.reward: expected a number")
    succ = obj["succ"]
    if not isinstance(succ, list) or not all(isinstance(s, str) for s in succ):
        raise ParseError(f"{where}.succ: expected a list of ids")
    dist = obj.get("dist")
    if owner == Owner.CHANCE:
        if dist is None:
            raise ParseError(f"{where}.dist: required for chance vertices")
        if not isinstance(dist, list) or not all(
            isinstance(p, (int, float)) and not isinstance(p, bool) for p in dist
        ):
            raise ParseError(f"{where}.dist: expected a list of numbers")
        dist = tuple(float(p) for p in dist)
    elif dist is not None:
        raise ParseError(f"{where}.dist: only allowed for chance vertices")
    return Vertex(vid, owner, float(reward), tuple(succ), dist)


def from_dict(doc) -> Game:
    if not isinstance(doc, dict):
        raise ParseError("top level: expected an object")
    extra = set(doc) - {"vertices"}
    if extra:
        raise ParseError(f"top level: unknown field(s) {sorted(extra)}")
    if not isinstance(doc.get("vertices"), list):
        raise ParseError("top level: 'vertices' must be a list")
    game = Game(_parse_vertex(obj, k) for k, obj in enumerate(doc["vertices"]))
    require_valid(game)
    # renormalize so text rounding never leaks into fixed-point iteration
    return Game(
        Vertex(v.id, v.owner, v.reward, v.succ, tuple(p / math.fsum(v.dist) for p in v.dist))
        if v.dist is not None
        else v
        for v in game.vertices
    )


def load(document: str) -> Game:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return from_dict(doc)


def to_dict(game: Game) -> dict:
    out = []
    for v in game.vertices:
        rec = {"id": v.id, "owner": v.owner.value, "reward": v.reward, "succ": list(v.succ)}
        if v.dist is not None:
            rec["dist"] = list(v.dist)
        out.append(rec)
    return {"vertices": out}


def save(game: Game) -> str:
    require_valid(game)
    return json.dumps(to_dict(game), indent=1)


def load_file(path) -> Game:
    with open(path) as fh:
        return load(fh.read())


def save_file(game: Game, path) -> None:
    with open(path, "w") as fh:
        fh.write(save(game) + "\n")


# -- transformations --------------------------------------------------------


def _fresh(game: Game, base: str, taken=()) -> str:
    name, k = base, 0
    while name in game.index or name in taken:
        k += 1
        name = f"{base}{k}"
    return name


def reach_to_acc(game: Game, targets: Iterable[str]) -> Game:
    """Encode "visit a target" as total reward.

    Every target gets reward 1 and a single edge to a fresh zero-reward
    absorbing sink; all other rewards become 0.  Targets are turned into
    chance vertices so strategies of the original game remain applicable.
    """
    require_valid(game)
    targets = set(targets)
    for t in targets:
        game.check_vertex(t)
    sink = _fresh(game, "__sink__")
    out = []
    for v in game.vertices:
        if v.id in targets:
            out.append(Vertex(v.id, Owner.CHANCE, 1.0, (sink,), (1.0,)))
        else:
            out.append(Vertex(v.id, v.owner, 0.0, v.succ, v.dist))
    out.append(Vertex(sink, Owner.CHANCE, 0.0, (sink,), (1.0,)))
    return Game(out)


def normalize_rewards(game: Game) -> Tuple[Game, Dict[str, str]]:
    """Split every vertex with reward above 1 into a chain of ceil(r) vertices.

    The last vertex of the chain keeps the original id, owner and successors,
    so memoryless strategies transfer unchanged.  Edges into the vertex are
    redirected to the head of its chain.  Returns the new game and the map
    from each original id to its entry vertex.
    """
    require_valid(game)
    entry: Dict[str, str] = {}
    prefix: Dict[str, List[str]] = {}
    taken = set()
    for v in game.vertices:
        k = math.ceil(v.reward) if v.reward > 1 else 1
        names = []
        for i in range(k - 1):
            name = _fresh(game, f"{v.id}~{i}", taken)
            taken.add(name)
            names.append(name)
        prefix[v.id] = names
        entry[v.id] = names[0] if names else v.id

    out = []
    for v in game.vertices:
        names = prefix[v.id]
        share = v.reward / (len(names) + 1) if names else v.reward
        chain = names + [v.id]
        for a, b in zip(chain, chain[1:]):
            out.append(Vertex(a, Owner.CHANCE, share, (b,), (1.0,)))
        out.append(Vertex(v.id, v.owner, share, tuple(entry[s] for s in v.succ), v.dist))
    return Game(out), entry


def fix_vertices(game: Game, rules: Mapping[str, Sequence[Tuple[str, float]]]) -> Game:
    """Turn the given vertices into chance vertices with the given distributions."""
    out = []
    for v in game.vertices:
        if v.id not in rules:
            out.append(v)
            continue
        pairs = [(s, float(p)) for s, p in rules[v.id] if p > 0]
        for s, _ in pairs:
            if s not in v.succ:
                raise GameError(f"{v.id}: {s!r} is not a successor")
        out.append(Vertex(v.id, Owner.CHANCE, v.reward, tuple(s for s, _ in pairs),
                          tuple(p for _, p in pairs)))
    return Game(out)


def strategy_rules(game: Game, strategy, owner: Owner) -> Dict[str, Sequence[Tuple[str, float]]]:
    rules = {}
    for vid in game.owned(owner):
        try:
            rules[vid] = list(strategy.distribution(vid))
        except KeyError:
            raise GameError(f"strategy has no entry for {owner.value} vertex {vid!r}") from None
    return rules


def induced_chain(game: Game, sigma, pi) -> Game:
    """Markov chain obtained by fixing memoryless strategies for both players.

    ``sigma`` and ``pi`` only need a ``distribution(vertex_id)`` method, so
    randomized memoryless strategies are accepted as well.
    """
    rules = strategy_rules(game, sigma, Owner.MAX)
    rules.update(strategy_rules(game, pi, Owner.MIN))
    return fix_vertices(game, rules)
