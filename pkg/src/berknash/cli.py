"""Command-line surface: validate, solve, verify, simulate, stability, ode, sweep, example.

Documents stream through stdin/stdout (``-`` or omitted paths), so bundles
pipe straight into the pipeline::

    berknash example monopoly | berknash solve
    berknash example nonexistence | berknash solve   # exits 2: no equilibrium

Exit codes: 0 success, 1 validation/verification failure, 2 solver found no
equilibrium, 3 runtime error, 64 usage error.  Every file written under
``--out`` is listed with its sha256 in a sidecar manifest; ``--check``
re-derives the artifacts and compares hashes instead of writing.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .domains import BoxBlock, FiniteDomain
from .dynamics import AppFConfig, OdeState, integrate, lyapunov_scan, scale_sweep, steady_state
from .equilibrium import (
    PerturbationStructure,
    SolveConfig,
    VerifyConfig,
    solve,
    verify_berk_nash,
)
from .examples import EXAMPLES, build
from .game import StrategyProfile, validate_game
from .learning import ConjugateNormalBelief, GridBelief, Policy, simulate, stability_report
from .serialize import (
    RunManifest,
    bundle_game_models,
    bundle_to_doc,
    certificate_to_doc,
    dumps,
    game_from_doc,
    hash_file,
    history_csv_text,
    history_jsonl_lines,
    manifest_to_doc,
    model_from_doc,
    profile_from_doc,
    profile_to_doc,
    sweep_csv_text,
    trajectory_csv_text,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_EMPTY = 2
EXIT_ERROR = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map usage to 64
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="berknash", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, game=True):
        if game:
            p.add_argument("--game", default=None, help="game/bundle document path, or - for stdin")
            p.add_argument("--model", default=None, help="alternate model: bundle variant name or model document path")
        p.add_argument("--out", default=None, help="output path or prefix; stdout when omitted")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--check", action="store_true", help="re-derive artifacts and compare hashes against the manifest")

    p_val = sub.add_parser("validate", help="structural checks on a game document")
    common(p_val)
    p_val.set_defaults(func=cmd_validate)

    p_solve = sub.add_parser("solve", help="search for equilibria")
    common(p_solve)
    p_solve.add_argument("--scale", type=float, default=None, help="starting shock scale of the homotopy")
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="check a candidate profile")
    common(p_verify)
    p_verify.add_argument("--profile", default=None, help="profile document path (- for stdin); bundle equilibria when omitted")
    p_verify.add_argument("--scale", type=float, default=0.0, help="verify against the scale-perturbed response instead")
    p_verify.set_defaults(func=cmd_verify)

    p_sim = sub.add_parser("simulate", help="run the learning dynamics")
    common(p_sim)
    p_sim.add_argument("--T", type=int, default=1000, dest="horizon")
    p_sim.add_argument("--scale", type=float, default=0.05)
    p_sim.add_argument("--seeds", type=int, default=1, help="number of seeds (fan-out from --seed)")
    p_sim.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p_sim.add_argument("--prior-mean", type=float, default=None)
    p_sim.add_argument("--prior-tau2", type=float, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_stab = sub.add_parser("stability", help="aggregate simulated histories against a candidate profile")
    common(p_stab)
    p_stab.add_argument("--T", type=int, default=2000, dest="horizon")
    p_stab.add_argument("--scale", type=float, default=0.05)
    p_stab.add_argument("--seeds", type=int, default=10)
    p_stab.add_argument("--profile", default=None, help="candidate profile document; bundle equilibrium when omitted")
    p_stab.add_argument("--window", type=int, default=0, help="trailing window (half the horizon when 0)")
    p_stab.add_argument("--prior-mean", type=float, default=None)
    p_stab.add_argument("--prior-tau2", type=float, default=None)
    p_stab.set_defaults(func=cmd_stability)

    p_ode = sub.add_parser("ode", help="mean-dynamics rest point, integration, and derivative scan")
    common(p_ode, game=False)
    p_ode.add_argument("--scale", type=float, default=0.05)
    p_ode.add_argument("--T", type=float, default=50.0, dest="t_end")
    p_ode.add_argument("--dt", type=float, default=0.002)
    p_ode.add_argument("--m0", type=float, default=3.0)
    p_ode.add_argument("--r0", type=float, default=10.0)
    p_ode.set_defaults(func=cmd_ode)

    p_sweep = sub.add_parser("sweep", help="steady states along a scale ladder, or a strategy-grid minimizer sweep")
    common(p_sweep)
    p_sweep.add_argument("--scales", default=None, help="comma-separated decreasing scale ladder")
    p_sweep.add_argument("--mode", choices=("scale", "minimizer"), default="scale")
    p_sweep.add_argument("--grid", type=int, default=99, help="strategy grid size for --mode minimizer")
    p_sweep.set_defaults(func=cmd_sweep)

    p_ex = sub.add_parser("example", help="emit a bundle document (or list bundles)")
    p_ex.add_argument("name", help="bundle name, or 'list'")
    p_ex.add_argument("--out", default=None)
    p_ex.add_argument("--check", action="store_true")
    p_ex.set_defaults(func=cmd_example)
    return parser


# ---------------------------------------------------------------------------
# Artifact plumbing


class _Artifacts:
    """Collects deterministic output files, then writes or checks them."""

    def __init__(self, command: str, args, seeds: tuple[int, ...]):
        self.command = command
        self.check = bool(getattr(args, "check", False))
        self.files: dict[str, str] = {}
        cfg = {
            k: v
            for k, v in sorted(vars(args).items())
            if k not in ("func", "out", "check") and not callable(v)
        }
        self.config_hash = hashlib.sha256(dumps(cfg).encode()).hexdigest()
        self.seeds = seeds
        self.t0 = time.monotonic()

    def add(self, path: str, text: str) -> None:
        self.files[path] = text

    def finish(self, manifest_path: str) -> int:
        digests = {
            p: hashlib.sha256(t.encode()).hexdigest() for p, t in self.files.items()
        }
        if self.check:
            try:
                with open(manifest_path) as fh:
                    old = json.load(fh)
            except OSError as exc:
                print(f"check: cannot read manifest: {exc}", file=sys.stderr)
                return EXIT_FAIL
            mismatches = [
                p
                for p, h in digests.items()
                if old.get("artifacts", {}).get(p) != h
            ]
            missing = [p for p in old.get("artifacts", {}) if p not in digests]
            for p in mismatches:
                print(f"check: hash mismatch for {p}", file=sys.stderr)
            for p in missing:
                print(f"check: manifest lists {p} but it was not re-derived", file=sys.stderr)
            if mismatches or missing:
                return EXIT_FAIL
            print(f"check: {len(digests)} artifact(s) match the manifest")
            return EXIT_OK
        for path, text in self.files.items():
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w") as fh:
                fh.write(text)
        manifest = RunManifest(
            command=self.command,
            config_hash=self.config_hash,
            seeds=self.seeds,
            version=__version__,
            artifacts=digests,
            wall_time=time.monotonic() - self.t0,
        )
        Path(manifest_path).parent.mkdir(parents=True, exist_ok=True)
        with open(manifest_path, "w") as fh:
            fh.write(dumps(manifest_to_doc(manifest)))
            fh.write("\n")
        return EXIT_OK


# ---------------------------------------------------------------------------
# Input loading


def _read_doc(path: str | None) -> dict:
    if path in (None, "-"):
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def _variant_model(bundle, name: str):
    key = name.replace("-", "_")
    for candidate in (f"model_{key}", f"{key}_model", key):
        if candidate in bundle.extras:
            return bundle.extras[candidate]
    raise UsageError(
        f"bundle {bundle.name!r} has no model variant {name!r}; "
        f"extras: {sorted(bundle.extras)}"
    )


def _load_environment(args):
    """Game + models (+ rebuilt bundle when the doc names one)."""
    doc = _read_doc(args.game)
    bundle = None
    if doc.get("type") == "bundle":
        game, models = bundle_game_models(doc)
        if doc.get("example") in EXAMPLES:
            bundle = build(doc["example"])
        if getattr(args, "model", None):
            model_arg = args.model
            if Path(model_arg).exists():
                mdoc = _read_doc(model_arg)
                target = mdoc.get("player") or _single_misspecified_player(bundle, game)
                models[target] = model_from_doc(mdoc)
            else:
                if bundle is None:
                    raise UsageError("--model variants require a registry bundle")
                target = bundle.extras.get("player", game.players[0])
                models[target] = _variant_model(bundle, model_arg)
        return doc, game, models, bundle
    if doc.get("type") == "game":
        game = game_from_doc(doc)
        models = {}
        if getattr(args, "model", None):
            mdoc = _read_doc(args.model)
            if mdoc.get("type") == "models":
                models = {p: model_from_doc(d) for p, d in mdoc["items"].items()}
            else:
                if len(game.players) != 1:
                    raise UsageError("a bare model document needs a single-player game")
                models = {game.players[0]: model_from_doc(mdoc)}
        return doc, game, models, bundle
    raise UsageError(f"unsupported document type {doc.get('type')!r}")


def _single_misspecified_player(bundle, game):
    if bundle is not None and "player" in bundle.extras:
        return bundle.extras["player"]
    if len(game.players) == 1:
        return game.players[0]
    raise UsageError("cannot infer which player the model document replaces")


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Commands


def cmd_validate(args) -> int:
    doc = _read_doc(args.game)
    game_doc = doc["game"] if doc.get("type") == "bundle" else doc
    game = game_from_doc(game_doc)
    report = validate_game(game)
    out = {
        "type": "validation",
        "ok": report.ok,
        "problems": list(report.problems),
        "name": game.name,
    }
    _emit(args, dumps(out) + "\n")
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_solve(args) -> int:
    doc, game, models, bundle = _load_environment(args)
    if not models:
        raise UsageError("solve needs subjective models (bundle document or --model)")
    cfg_kwargs = {"seed": args.seed}
    if args.scale is not None:
        cfg_kwargs["scale_start"] = args.scale
    if args.tol is not None:
        cfg_kwargs["verify"] = VerifyConfig(tol_opt=args.tol)
    config = SolveConfig(**cfg_kwargs)
    result = solve(game, models, config)
    out = {
        "type": "certificates",
        "game": game.name,
        "items": [certificate_to_doc(c) for c in result.certificates],
        "diagnostics": result.diagnostics,
    }
    _emit(args, dumps(out) + "\n")
    if args.out:
        art = _Artifacts("solve", args, (args.seed,))
        art.add(args.out, dumps(out) + "\n")
        rc = art.finish(args.out + ".manifest.json")
        if rc != EXIT_OK:
            return rc
    return EXIT_OK if result.certificates else EXIT_EMPTY


def cmd_verify(args) -> int:
    doc, game, models, bundle = _load_environment(args)
    if not models:
        raise UsageError("verify needs subjective models")
    if args.profile:
        profiles = [profile_from_doc(_read_doc(args.profile))]
    else:
        eq_docs = doc.get("known_equilibria") or []
        profiles = [profile_from_doc(d) for d in eq_docs]
        if not profiles:
            raise UsageError("no --profile given and the document lists no equilibria")
    vcfg_kwargs = {}
    if args.tol is not None:
        vcfg_kwargs["tol_opt"] = args.tol
    if args.scale:
        vcfg_kwargs["scale"] = args.scale
    config = VerifyConfig(**vcfg_kwargs)
    items = []
    all_ok = True
    for prof in profiles:
        res = verify_berk_nash(game, models, prof, config)
        all_ok &= res.accepted
        items.append(
            {
                "accepted": res.accepted,
                "worst_violation": res.worst_violation,
                "witness": res.witness,
                "profile": profile_to_doc(prof),
                "certificate": certificate_to_doc(res.certificate) if res.certificate else None,
            }
        )
    _emit(args, dumps({"type": "verification", "items": items}) + "\n")
    return EXIT_OK if all_ok else EXIT_FAIL


def _default_priors(game, models, args):
    priors = {}
    for p in game.players:
        model = models[p]
        domain = model.domain
        if (
            hasattr(model, "params")
            and "intercept" in getattr(model, "params", {})
            and domain.dim == 1
            and not domain.is_finite
        ):
            block = domain.blocks[0]
            center = 0.5 * (block.lower[0] + block.upper[0])
            priors[p] = ConjugateNormalBelief(
                mean=args.prior_mean if args.prior_mean is not None else center,
                tau2=args.prior_tau2 if args.prior_tau2 is not None else 1.0,
            )
        elif domain.is_finite:
            priors[p] = GridBelief.uniform(domain.as_array())
        else:
            atoms = domain.seed_points(points_per_axis=9, max_seeds=512, n_random=0)
            priors[p] = GridBelief.uniform(atoms)
    return priors


def cmd_simulate(args) -> int:
    doc, game, models, bundle = _load_environment(args)
    if not models:
        raise UsageError("simulate needs subjective models")
    perturbation = PerturbationStructure(family="logistic", scale=args.scale)
    priors = _default_priors(game, models, args)
    policies = {p: Policy(kind="myopic") for p in game.players}
    seeds = tuple(args.seed + k for k in range(args.seeds))
    histories = [
        simulate(game, models, priors, policies, perturbation, args.horizon, s)
        for s in seeds
    ]
    if not args.out:
        if len(histories) != 1:
            raise UsageError("multi-seed runs need --out")
        h = histories[0]
        if args.format == "csv":
            sys.stdout.write(history_csv_text(h, game.players[0]))
        else:
            for line in history_jsonl_lines(h):
                sys.stdout.write(line + "\n")
        return EXIT_OK
    art = _Artifacts("simulate", args, seeds)
    index = {"type": "index", "seeds": list(seeds), "files": []}
    for h in histories:
        base = f"{args.out}.seed{h.seed}"
        jsonl = "\n".join(history_jsonl_lines(h)) + "\n"
        art.add(base + ".jsonl", jsonl)
        index["files"].append(base + ".jsonl")
        csv_text = history_csv_text(h, game.players[0])
        art.add(base + ".csv", csv_text)
        index["files"].append(base + ".csv")
    art.add(f"{args.out}.index.json", dumps(index) + "\n")
    return art.finish(f"{args.out}.manifest.json")


def cmd_stability(args) -> int:
    doc, game, models, bundle = _load_environment(args)
    if not models:
        raise UsageError("stability needs subjective models")
    if args.profile:
        candidate = profile_from_doc(_read_doc(args.profile))
    else:
        eq_docs = doc.get("known_equilibria") or []
        if not eq_docs:
            raise UsageError("no --profile given and the document lists no equilibria")
        candidate = profile_from_doc(eq_docs[0])
    perturbation = PerturbationStructure(family="logistic", scale=args.scale)
    priors = _default_priors(game, models, args)
    policies = {p: Policy(kind="myopic") for p in game.players}
    seeds = tuple(args.seed + k for k in range(args.seeds))
    histories = [
        simulate(game, models, priors, policies, perturbation, args.horizon, s)
        for s in seeds
    ]
    reports = {}
    for p in game.players:
        rep = stability_report(
            game,
            models[p],
            histories,
            p,
            candidate.table[p],
            window=args.window or None,
        )
        reports[p] = {
            "n_histories": rep.n_histories,
            "freq_deviation": rep.freq_deviation,
            "fraction_freq_within": rep.fraction_freq_within,
            "intended_deviation": rep.intended_deviation,
            "posterior_mass_near_minimizers": rep.posterior_mass_near_minimizers,
            "window": rep.window,
            "stable_in_distribution": rep.stable_in_distribution,
        }
    _emit(args, dumps({"type": "stability", "players": reports}) + "\n")
    return EXIT_OK


def cmd_ode(args) -> int:
    config = AppFConfig(scale=args.scale)
    steady = steady_state(config)
    traj = integrate(config, OdeState(m=args.m0, r=args.r0), args.t_end, dt=args.dt)
    scan = lyapunov_scan(config)
    summary = {
        "type": "ode",
        "scale": args.scale,
        "steady": {
            "m": steady.m,
            "r": steady.r,
            "sigma_high": config.high_price_probability(steady.m),
        },
        "terminal": {"m": float(traj.m[-1]), "r": float(traj.r[-1]), "aborted": traj.aborted},
        "scan": {
            "n_samples": scan.n_samples,
            "violations": scan.violations,
            "max_dldt": scan.max_dldt,
            "worst_point": list(scan.worst_point),
            "axis_decoupled_max": scan.axis_decoupled_max,
            "axis_decoupled_violations": scan.axis_decoupled_violations,
        },
    }
    print(
        f"steady: m={steady.m:.12g} r={steady.r:.12g} "
        f"sigma_high={config.high_price_probability(steady.m):.12g}"
    )
    if not args.out:
        sys.stdout.write(dumps(summary) + "\n")
        return EXIT_OK
    art = _Artifacts("ode", args, (args.seed,))
    art.add(f"{args.out}.trajectory.csv", trajectory_csv_text(traj))
    art.add(f"{args.out}.summary.json", dumps(summary) + "\n")
    return art.finish(f"{args.out}.manifest.json")


def _default_ladder(start: float = 0.05, stop: float = 1e-4, factor: float = 4.0):
    out = [start]
    while out[-1] / factor > stop:
        out.append(out[-1] / factor)
    out.append(stop)
    return out


def cmd_sweep(args) -> int:
    if args.mode == "minimizer":
        return _minimizer_sweep(args)
    scales = (
        [float(s) for s in args.scales.split(",")]
        if args.scales
        else _default_ladder()
    )
    config = AppFConfig(scale=scales[0])
    rows, monotone = scale_sweep(config, scales)
    text = sweep_csv_text(rows)
    if not args.out:
        sys.stdout.write(text)
        print(f"monotone: {monotone}", file=sys.stderr)
        return EXIT_OK
    art = _Artifacts("sweep", args, (args.seed,))
    art.add(args.out + ".csv", text)
    rc = art.finish(args.out + ".manifest.json")
    print(f"monotone: {monotone}", file=sys.stderr)
    return rc


def _minimizer_sweep(args) -> int:
    """Divergence-minimizer path along a one-player strategy grid."""
    from .subjective import MinimizerConfig, minimizer_set

    doc, game, models, bundle = _load_environment(args)
    if not models:
        raise UsageError("minimizer sweep needs subjective models")
    player = _single_misspecified_player(bundle, game)
    if game.n_signals(player) != 1 or game.n_actions(player) != 2:
        raise UsageError("minimizer sweep expects one signal and two actions")
    model = models[player]
    lines = ["sigma_first," + ",".join(f"theta_{i + 1}" for i in range(model.domain.dim)) + ",k_min"]
    base = StrategyProfile.uniform(game)
    cfg = MinimizerConfig(seed=args.seed)
    for k in range(1, args.grid + 1):
        sig = k / (args.grid + 1)
        prof = base.with_player(player, np.array([[sig, 1.0 - sig]]))
        ms = minimizer_set(game, model, prof, player, cfg)
        point = ms.points[0]
        lines.append(
            f"{sig:.12g}," + ",".join(f"{v:.12g}" for v in point) + f",{ms.k_min:.12g}"
        )
    text = "\n".join(lines) + "\n"
    if not args.out:
        sys.stdout.write(text)
        return EXIT_OK
    art = _Artifacts("sweep", args, (args.seed,))
    art.add(args.out + ".csv", text)
    return art.finish(args.out + ".manifest.json")


def cmd_example(args) -> int:
    if args.name == "list":
        for name in sorted(EXAMPLES):
            print(name)
        return EXIT_OK
    try:
        bundle = build(args.name)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc
    doc = bundle_to_doc(bundle)
    text = dumps(doc) + "\n"
    if not args.out:
        sys.stdout.write(text)
        return EXIT_OK
    art = _Artifacts("example", args, ())
    art.add(args.out, text)
    return art.finish(args.out + ".manifest.json")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return 0 if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
