"""JSON documents, JSONL histories, CSV projections, and run manifests.

All schemas are described in FORMATS.md at the repository root.  Output is
deterministic: dictionaries are dumped with sorted keys and compact
separators, floats are rounded to 12 significant digits, and timestamps live
only in the manifest's ``wall_time`` field so identical runs produce
byte-identical artifacts elsewhere.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import EquilibriumCertificate
from .game import ObjectiveGame, StrategyProfile
from .learning import SimulationHistory
from .subjective import CategoricalModel, DiscreteBelief, GaussianMeanModel, Model
from .domains import FiniteDomain

__all__ = [
    "canonical",
    "dumps",
    "dump",
    "load",
    "game_to_doc",
    "game_from_doc",
    "profile_to_doc",
    "profile_from_doc",
    "belief_to_doc",
    "belief_from_doc",
    "certificate_to_doc",
    "certificate_from_doc",
    "model_to_doc",
    "model_from_doc",
    "bundle_to_doc",
    "bundle_game_models",
    "history_jsonl_lines",
    "history_csv_text",
    "trajectory_csv_text",
    "sweep_csv_text",
    "RunManifest",
    "manifest_to_doc",
    "hash_file",
]


def _round12(v: float) -> float:
    """12-significant-digit float, the precision all artifacts are printed at."""
    if v == 0.0 or not math.isfinite(v):
        return v
    return float(f"{v:.12g}")


def canonical(obj):
    """Recursively converts numpy containers to JSON-safe python values.

    Floats are rounded to 12 significant digits; NaN becomes null and
    infinities become the strings "inf"/"-inf" (JSON has no encoding for
    them and silent coercion would corrupt round-trips).
    """
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return _round12(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(doc) -> str:
    return json.dumps(canonical(doc), sort_keys=True, separators=(",", ":"))


def dump(doc, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(doc))
        fh.write("\n")


def load(path_or_file):
    if hasattr(path_or_file, "read"):
        return json.load(path_or_file)
    with open(path_or_file) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Games and strategy profiles


def game_to_doc(game: ObjectiveGame) -> dict:
    """Lossless document for a finite game; the state law is stored sparsely."""
    nz = np.argwhere(game.law > 0.0)
    entries = [[*(int(i) for i in idx), float(game.law[tuple(idx)])] for idx in nz]
    doc = {
        "type": "game",
        "name": game.name,
        "players": list(game.players),
        "states": list(game.states),
        "signals": {p: list(v) for p, v in game.signals.items()},
        "actions": {p: list(v) for p, v in game.actions.items()},
        "consequences": {p: list(v) for p, v in game.consequences.items()},
        "law_shape": list(game.law.shape),
        "law_entries": entries,
        "feedback": {p: v.tolist() for p, v in game.feedback.items()},
        "payoff": {p: v.tolist() for p, v in game.payoff.items()},
    }
    if game.action_values:
        doc["action_values"] = {p: np.asarray(v).tolist() for p, v in game.action_values.items()}
    if game.consequence_values:
        doc["consequence_values"] = {
            p: np.asarray(v).tolist() for p, v in game.consequence_values.items()
        }
    return doc


def game_from_doc(doc: dict) -> ObjectiveGame:
    if doc.get("type") != "game":
        raise ValueError(f"expected a game document, got type={doc.get('type')!r}")
    law = np.zeros(tuple(doc["law_shape"]))
    for entry in doc["law_entries"]:
        *idx, p = entry
        law[tuple(int(i) for i in idx)] = float(p)
    kwargs = {}
    if "action_values" in doc:
        kwargs["action_values"] = {
            p: np.asarray(v, float) for p, v in doc["action_values"].items()
        }
    if "consequence_values" in doc:
        kwargs["consequence_values"] = {
            p: np.asarray(v, float) for p, v in doc["consequence_values"].items()
        }
    return ObjectiveGame(
        players=tuple(doc["players"]),
        states=tuple(doc["states"]),
        signals={p: tuple(v) for p, v in doc["signals"].items()},
        law=law,
        actions={p: tuple(v) for p, v in doc["actions"].items()},
        consequences={p: tuple(v) for p, v in doc["consequences"].items()},
        feedback={p: np.asarray(v, dtype=np.int64) for p, v in doc["feedback"].items()},
        payoff={p: np.asarray(v, float) for p, v in doc["payoff"].items()},
        name=doc.get("name", ""),
        **kwargs,
    )


def profile_to_doc(profile: StrategyProfile) -> dict:
    return {
        "type": "profile",
        "table": {p: np.asarray(t).tolist() for p, t in profile.table.items()},
    }


def profile_from_doc(doc: dict) -> StrategyProfile:
    if doc.get("type") != "profile":
        raise ValueError(f"expected a profile document, got type={doc.get('type')!r}")
    return StrategyProfile({p: np.asarray(t, float) for p, t in doc["table"].items()})


def belief_to_doc(belief: DiscreteBelief) -> dict:
    return {
        "atoms": np.asarray(belief.atoms).tolist(),
        "weights": np.asarray(belief.weights).tolist(),
    }


def belief_from_doc(doc: dict) -> DiscreteBelief:
    return DiscreteBelief(
        atoms=np.asarray(doc["atoms"], float), weights=np.asarray(doc["weights"], float)
    )


def certificate_to_doc(cert: EquilibriumCertificate) -> dict:
    return {
        "type": "certificate",
        "profile": profile_to_doc(cert.profile),
        "beliefs": {p: belief_to_doc(b) for p, b in cert.beliefs.items()},
        "k_min": dict(cert.k_min),
        "k_values": {p: np.asarray(v).tolist() for p, v in cert.k_values.items()},
        "optimality_gaps": {
            p: np.asarray(v).tolist() for p, v in cert.optimality_gaps.items()
        },
        "worst_violation": cert.worst_violation,
        "scale": cert.scale,
        "diagnostics": canonical(cert.diagnostics),
    }


def certificate_from_doc(doc: dict) -> EquilibriumCertificate:
    if doc.get("type") != "certificate":
        raise ValueError(f"expected a certificate document, got type={doc.get('type')!r}")
    return EquilibriumCertificate(
        profile=profile_from_doc(doc["profile"]),
        beliefs={p: belief_from_doc(b) for p, b in doc["beliefs"].items()},
        k_min={p: float(v) for p, v in doc["k_min"].items()},
        k_values={p: np.asarray(v, float) for p, v in doc["k_values"].items()},
        optimality_gaps={
            p: np.asarray(v, float) for p, v in doc["optimality_gaps"].items()
        },
        worst_violation=float(doc["worst_violation"]),
        scale=float(doc["scale"]),
        diagnostics=doc.get("diagnostics", {}),
    )


# ---------------------------------------------------------------------------
# Subjective models


def model_to_doc(model: Model, registry_ref: dict | None = None) -> dict:
    """Document for a subjective model.

    Models built by the example registry serialize as a reference (example
    name, player, builder kwargs) so they can be reconstructed with modified
    parameters.  Categorical models over finite domains also serialize
    structurally, as per-point kernel tables.  Everything else contains
    callables (kernels, payoff hooks) with no declarative form; asking for a
    structural document raises.
    """
    if registry_ref is not None:
        return {"type": "model", "kind": "registry", **registry_ref}
    if isinstance(model, CategoricalModel) and isinstance(model.domain, FiniteDomain):
        pts = model.domain.as_array()
        tables = [model.kernel_table(np.asarray(p, float)).tolist() for p in pts]
        return {
            "type": "model",
            "kind": "categorical-finite",
            "name": model.name,
            "shape": list(model.shape),
            "points": pts.tolist(),
            "labels": list(model.domain.labels) if model.domain.labels else [],
            "tables": tables,
        }
    raise ValueError(
        f"model {model.name!r} has no structural document; serialize it as a "
        "registry reference"
    )


def model_from_doc(doc: dict) -> Model:
    if doc.get("type") != "model":
        raise ValueError(f"expected a model document, got type={doc.get('type')!r}")
    kind = doc["kind"]
    if kind == "registry":
        from .examples import build

        bundle = _rebuild_bundle(doc, build)
        return bundle.models[doc["player"]]
    if kind == "categorical-finite":
        points = tuple(tuple(float(x) for x in p) for p in doc["points"])
        labels = tuple(doc.get("labels") or ())
        tables = np.asarray(doc["tables"], float)
        index = {p: i for i, p in enumerate(points)}

        def kernel(theta, s, x, _tables=tables, _index=index):
            key = tuple(float(v) for v in np.asarray(theta).ravel())
            return _tables[_index[key], s, x]

        return CategoricalModel(
            domain=FiniteDomain(points=points, labels=labels),
            kernel=kernel,
            shape=tuple(doc["shape"]),
            name=doc.get("name", "categorical"),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def _rebuild_bundle(doc: dict, build):
    kwargs = doc.get("kwargs") or {}
    if kwargs:
        from . import examples

        builder = getattr(examples, doc["builder"]) if "builder" in doc else None
        if builder is not None:
            return builder(**kwargs)
    return build(doc["example"])


def bundle_to_doc(bundle, kwargs: dict | None = None) -> dict:
    """Document for an example bundle: full game, model references, equilibria."""
    models = {}
    for p, m in bundle.models.items():
        ref = {"example": bundle.name, "player": p}
        if kwargs:
            ref["kwargs"] = kwargs
        try:
            models[p] = model_to_doc(m)
        except ValueError:
            models[p] = model_to_doc(m, registry_ref=ref)
    doc = {
        "type": "bundle",
        "example": bundle.name,
        "notes": bundle.notes,
        "game": game_to_doc(bundle.game),
        "models": models,
        "known_equilibria": [profile_to_doc(e) for e in bundle.known_equilibria],
    }
    if bundle.analogy is not None:
        doc["analogy"] = {
            p: [list(c) for c in cells] for p, cells in bundle.analogy.cells.items()
        }
    return doc


def bundle_game_models(doc: dict) -> tuple[ObjectiveGame, dict[str, Model]]:
    """Game and models from a bundle document (game honors in-doc edits)."""
    if doc.get("type") != "bundle":
        raise ValueError(f"expected a bundle document, got type={doc.get('type')!r}")
    game = game_from_doc(doc["game"])
    models = {p: model_from_doc(m) for p, m in doc["models"].items()}
    return game, models


# ---------------------------------------------------------------------------
# Simulation histories


def history_jsonl_lines(history: SimulationHistory):
    """Yields one JSON line per record: a prior record, then one per period.

    Record 0 carries static belief metadata (e.g. grid atoms) and the prior
    summary; records 1..T carry realized state/signal/action/consequence
    indices, the post-update belief summary, and the intended mixed action.
    """
    T = history.horizon

    def belief_at(t: int, include_static: bool) -> dict:
        out = {}
        for p, summ in history.belief_summary.items():
            row = {}
            for key, arr in summ.items():
                arr = np.asarray(arr)
                if arr.ndim >= 1 and arr.shape[0] == T + 1:
                    row[key] = arr[t]
                elif include_static:
                    row[key] = arr
            out[p] = row
        return out

    head = {
        "t": 0,
        "seed": history.seed,
        "players": list(history.players),
        "belief": belief_at(0, include_static=True),
        "sigma": {p: history.intended[p][0] for p in history.players},
    }
    yield dumps(head)
    for t in range(1, T + 1):
        rec = {
            "t": t,
            "state": int(history.state[t - 1]),
            "signal": {p: int(history.signal[p][t - 1]) for p in history.players},
            "action": {p: int(history.action[p][t - 1]) for p in history.players},
            "consequence": {
                p: int(history.consequence[p][t - 1]) for p in history.players
            },
            "belief": belief_at(t, include_static=False),
            "sigma": {p: history.intended[p][t] for p in history.players},
        }
        yield dumps(rec)


def _trailing_frequency(actions: np.ndarray, n_actions: int, window: int) -> np.ndarray:
    """freq[t, x] of action x among periods max(1, t-window+1)..t (1-based)."""
    T = len(actions)
    onehot = np.zeros((T + 1, n_actions))
    onehot[np.arange(1, T + 1), actions] = 1.0
    csum = np.cumsum(onehot, axis=0)
    freq = np.full((T + 1, n_actions), np.nan)
    for t in range(1, T + 1):
        lo = max(0, t - window)
        freq[t] = (csum[t] - csum[lo]) / (t - lo)
    return freq


def history_csv_text(history: SimulationHistory, player: str, window: int = 0) -> str:
    """CSV projection of one player's history for plotting.

    Columns: t, the belief-summary location (m/tau2 for conjugate posteriors,
    the posterior mean per coordinate for grid posteriors), then the trailing
    action frequency per action over ``window`` periods (full history when 0).
    """
    T = history.horizon
    window = window or max(T, 1)
    summ = history.belief_summary[player]
    if "mean" in summ and "tau2" in summ:
        loc_cols = ["m", "tau2"]
        loc = np.column_stack([summ["mean"], summ["tau2"]])
    else:
        atoms = np.asarray(summ["atoms"])
        weights = np.asarray(summ["weights"])
        loc = weights @ atoms
        loc_cols = [f"mean_{i + 1}" for i in range(loc.shape[1])]
    n_actions = history.intended[player].shape[2]
    freq = _trailing_frequency(history.action[player], n_actions, window)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", *loc_cols, *[f"freq_{j}" for j in range(n_actions)]])
    for t in range(T + 1):
        row = [t]
        row += [f"{v:.12g}" for v in np.atleast_1d(loc[t])]
        row += ["" if np.isnan(v) else f"{v:.12g}" for v in freq[t]]
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Dynamics artifacts


def trajectory_csv_text(traj) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "m", "r", "sigma_high"])
    for t, m, r, sh in zip(traj.t, traj.m, traj.r, traj.sigma_high):
        writer.writerow([f"{t:.12g}", f"{m:.12g}", f"{r:.12g}", f"{sh:.12g}"])
    return buf.getvalue()


def sweep_csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scale", "m_star", "sigma_star", "r_star"])
    for row in rows:
        writer.writerow(
            [
                f"{row.scale:.12g}",
                f"{row.m_star:.12g}",
                f"{row.sigma_star:.12g}",
                f"{row.r_star:.12g}",
            ]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Run manifests


def hash_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Provenance for one CLI invocation.

    ``artifacts`` maps every output path to its sha256; ``wall_time`` is the
    only non-reproducible field and is excluded from comparisons.
    """

    command: str
    config_hash: str
    seeds: tuple[int, ...]
    version: str
    artifacts: dict[str, str] = field(default_factory=dict)
    wall_time: float = 0.0


def manifest_to_doc(manifest: RunManifest) -> dict:
    return {
        "type": "manifest",
        "command": manifest.command,
        "config_hash": manifest.config_hash,
        "seeds": list(manifest.seeds),
        "version": manifest.version,
        "artifacts": dict(sorted(manifest.artifacts.items())),
        "wall_time": manifest.wall_time,
    }
