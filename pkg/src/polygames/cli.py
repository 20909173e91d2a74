"""Command-line front end: run experiments, verify oracles, benchmark, audit.

Subcommands
-----------
run     run a repeated game from a JSON config; writes trajectory.csv and
        summary.json (with the resolved eta/gamma/d/d_r/m/T/seed echoed)
verify  brute-force equivalence suite over all families (--scale small|medium)
bench   doubling-grid timings for the batch kernels (--family blotto|matroid)
gap     recompute the CCE gap of a stored trajectory and check it against
        the stored summary

Exit codes: 0 success, 1 check/validation failure, 2 runtime error.

Heavy imports happen inside the command handlers so that --threads can cap
the BLAS/OpenMP pools before numpy is initialized.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time


def _set_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(n)


class ConfigError(Exception):
    pass


def _require(block, key, where):
    if key not in block:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return block[key]


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
        return json.loads(text)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")


def build_oracle(game):
    kind = _require(game, "kind", "game")
    if kind == "blotto":
        from .blotto import BlottoOracle, BlottoSpec
        spec = BlottoSpec(_require(game, "k", "game"),
                          _require(game, "n", "game"))
        return BlottoOracle(spec)
    if kind == "matroid_congestion":
        from .matroid import GraphSpec, MatroidOracle
        spec = GraphSpec(_require(game, "num_vertices", "game"),
                         _require(game, "edges", "game"))
        return MatroidOracle(spec)
    if kind == "network_congestion":
        from .dagpaths import DAGOracle, DAGSpec
        spec = DAGSpec(_require(game, "num_vertices", "game"),
                       _require(game, "edges", "game"),
                       game.get("source"), game.get("sink"))
        return DAGOracle(spec)
    if kind == "mset_congestion":
        from .msets import MSetOracle, MSetSpec
        spec = MSetSpec(_require(game, "d", "game"),
                        _require(game, "m", "game"))
        return MSetOracle(spec)
    raise ConfigError(f"game: unknown kind {kind!r}")


def build_loss_fn(game, oracle):
    from .gamesim import (blotto_majority_losses, blotto_proportional_losses,
                          congestion_losses)
    kind = game["kind"]
    if kind == "blotto":
        rule = game.get("rule", "majority")
        if rule == "majority":
            return lambda joint: blotto_majority_losses(oracle.spec, joint)
        if rule == "proportional":
            return lambda joint: blotto_proportional_losses(oracle.spec, joint)
        raise ConfigError(f"game: unknown blotto rule {rule!r}")
    return lambda joint: congestion_losses(oracle.d, joint)


def resolve_params(learner, oracle, T):
    from .learners import default_params
    mode = _require(learner, "feedback", "learner").replace("_", "-")
    if mode == "full" and learner.get("optimistic"):
        mode = "optimistic"
    auto = default_params(mode, oracle.d, oracle.m, T)
    params = {}
    for key, value in auto.items():
        override = learner.get(key, "auto")
        params[key] = float(value if override == "auto" else override)
    return mode, params


def cmd_run(args):
    import numpy as np

    from .core import write_summary_json, write_trajectory_csv
    from .gamesim import GameSpec, evaluate, run_dynamics
    from .spanner import build_chart

    config = load_config(args.config)
    game = _require(config, "game", "config")
    learner = _require(config, "learner", "config")
    run = _require(config, "run", "config")
    T = int(_require(run, "T", "run"))
    seed = int(args.seed if args.seed is not None else run.get("seed", 0))
    out_dir = args.out if args.out is not None else run.get("out", ".")
    interval = int(run.get("checkpoint_interval", 0))
    os.makedirs(out_dir, exist_ok=True)

    oracle = build_oracle(game)
    loss_fn = build_loss_fn(game, oracle)
    mode, params = resolve_params(learner, oracle, T)
    players = int(_require(game, "players", "game"))
    spec = GameSpec(oracle=oracle, num_players=players, loss_fn=loss_fn,
                    mode=mode, T=T, seed=seed, params=params)

    chart = build_chart(oracle, np.random.default_rng(seed))
    traj_path = os.path.join(out_dir, "trajectory.csv")
    brs = [oracle.best_response] * players

    def checkpoint(traj):
        write_trajectory_csv(traj_path, traj, brs)

    start = time.perf_counter()
    traj = run_dynamics(spec, checkpoint=checkpoint if interval else None,
                        interval=interval)
    elapsed = time.perf_counter() - start
    write_trajectory_csv(traj_path, traj, brs)
    summary = evaluate(traj, oracle)
    summary.update({
        "mode": mode, "seed": seed, "d": oracle.d, "d_r": chart.r,
        "m": oracle.m, "players": players, "wall_time_s": elapsed,
        "config": config,
    })
    summary.update({k: float(v) for k, v in params.items()})
    write_summary_json(os.path.join(out_dir, "summary.json"), summary)
    print(f"wrote {traj_path} and summary.json "
          f"(max gap {summary['max_gap']:.6g}, {elapsed:.2f}s)")
    return 0


# ---------------------------------------------------------------------------
# verify


def _verify_checks(scale):
    """Yield (name, callable) pairs; each callable raises on failure."""
    import numpy as np

    from .blotto import (BlottoOracle, BlottoSpec, blotto_second_moment,
                         blotto_second_moment_direct)
    from .core import ExplicitOracle, brute_force_kernel
    from .dagpaths import DAGOracle, DAGSpec
    from .matroid import GraphSpec, MatroidOracle
    from .msets import MSetOracle, MSetSpec
    from .spanner import barycentric_spanner, build_chart, spanner_certificate

    rng = np.random.default_rng(0)

    if scale == "small":
        cases = [
            ("blotto", BlottoOracle(BlottoSpec(3, 3))),
            ("matroid", MatroidOracle(GraphSpec(
                5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]))),
            ("dag", DAGOracle(DAGSpec(
                5, [(0, 1), (0, 2), (1, 3), (2, 3), (1, 4), (3, 4), (0, 4)]))),
            ("mset", MSetOracle(MSetSpec(7, 3))),
        ]
    else:
        cases = [
            ("blotto", BlottoOracle(BlottoSpec(4, 6))),
            ("matroid", MatroidOracle(GraphSpec(
                7, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 0),
                    (0, 3), (1, 4), (2, 5)]))),
            ("dag", DAGOracle(DAGSpec(
                7, [(0, 1), (0, 2), (1, 3), (2, 3), (1, 4), (2, 4), (3, 5),
                    (4, 5), (3, 6), (5, 6), (0, 4), (4, 6)]))),
            ("mset", MSetOracle(MSetSpec(9, 4))),
        ]

    def kernel_check(oracle):
        def check():
            ref = ExplicitOracle(oracle.enumerate_actions(), m=oracle.m)
            for _ in range(10):
                w = np.exp(rng.standard_normal(oracle.d))
                masks = [(), (int(rng.integers(oracle.d)),),
                         tuple(rng.choice(oracle.d, size=2, replace=False))]
                for mask in masks:
                    got = oracle.kernel(w, mask)
                    want = ref.kernel(w, mask)
                    if abs(got - want) > 1e-9 * max(abs(want), 1e-12):
                        raise AssertionError(
                            f"kernel mismatch mask={mask}: {got} vs {want}")
        return check

    def moment_check(oracle):
        def check():
            ref = ExplicitOracle(oracle.enumerate_actions(), m=oracle.m)
            for _ in range(5):
                w = np.exp(rng.standard_normal(oracle.d))
                x_ref, sigma_ref = ref.moments_by_enumeration(w)
                if not np.allclose(oracle.first_moment(w), x_ref,
                                   rtol=1e-9, atol=1e-11):
                    raise AssertionError("first-moment mismatch")
                if not np.allclose(oracle.second_moment(w), sigma_ref,
                                   rtol=1e-7, atol=1e-9):
                    raise AssertionError("second-moment mismatch")
        return check

    def sampler_check(oracle, draws=20000, tol=0.05):
        def check():
            ref = ExplicitOracle(oracle.enumerate_actions(), m=oracle.m)
            w = np.exp(rng.standard_normal(oracle.d))
            p_ref = dict(zip(ref.actions, ref.distribution(w)))
            counts = {}
            for _ in range(draws):
                v = oracle.sample(w, rng)
                counts[v] = counts.get(v, 0) + 1
            tv = 0.5 * sum(abs(counts.get(a, 0) / draws - p)
                           for a, p in p_ref.items())
            if tv > tol:
                raise AssertionError(f"sampler TV distance {tv:.4f} > {tol}")
        return check

    def spanner_check(oracle):
        def check():
            chart = build_chart(oracle, rng)
            _, basis = barycentric_spanner(oracle, chart, ratio=2.0)
            worst = spanner_certificate(oracle, chart, basis, rng,
                                        num_actions=1000, ratio=2.0)
            if worst > 2.0 + 1e-6:
                raise AssertionError(f"spanner coefficient {worst} > 2")
        return check

    for name, oracle in cases:
        yield f"{name}: kernel vs brute force", kernel_check(oracle)
        yield f"{name}: moments vs enumeration", moment_check(oracle)
    small_cases = [(n, o) for n, o in cases if len(o.enumerate_actions()) < 400]
    for name, oracle in small_cases:
        yield f"{name}: sampler TV distance", sampler_check(oracle)
        yield f"{name}: spanner certificate", spanner_check(oracle)

    def blotto_dual_route():
        spec = BlottoSpec(3, 4)
        for _ in range(5):
            w = np.exp(rng.standard_normal(spec.d))
            a = blotto_second_moment(spec, w)
            b = blotto_second_moment_direct(spec, w)
            if not np.allclose(a, b, rtol=1e-9, atol=1e-11):
                raise AssertionError("blotto second-moment routes disagree")
    yield "blotto: subtraction vs direct second-moment route", blotto_dual_route

    def negative_control():
        # deliberately flip the sign in the pairwise assembly and require the
        # mismatch to be caught, so the checks above cannot pass vacuously
        oracle = MSetOracle(MSetSpec(5, 2))
        ref = ExplicitOracle(oracle.enumerate_actions(), m=2)
        w = np.exp(rng.standard_normal(5))
        k_one, k_bar = oracle.first_moment_kernels(w)
        _, k_pair = oracle.second_moment_kernels(w)
        broken = 1.0 + (k_bar[:, None] + k_bar[None, :] - k_pair) / k_one
        _, sigma_ref = ref.moments_by_enumeration(w)
        if np.allclose(broken, sigma_ref, rtol=1e-7, atol=1e-9):
            raise AssertionError("sign-flipped assembly was not detected")
    yield "negative control: sign flip is detected", negative_control


def cmd_verify(args):
    failures = 0
    for name, check in _verify_checks(args.scale):
        start = time.perf_counter()
        try:
            check()
            status = "PASS"
        except Exception as exc:  # report every failure, keep going
            status = f"FAIL ({exc})"
            failures += 1
        print(f"{status:8s} {name} [{time.perf_counter() - start:.2f}s]")
    print(f"{'OK' if failures == 0 else 'FAILED'}: "
          f"{failures} failing check(s)")
    return 0 if failures == 0 else 1


# ---------------------------------------------------------------------------
# bench


def _time_call(fn, reps=3):
    best = float("inf")
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_blotto(sizes=(64, 128, 256, 512), k=8, reps=3, rng=None):
    import numpy as np

    from .blotto import (BlottoSpec, blotto_first_moment, blotto_sample,
                         blotto_second_moment)
    rng = rng or np.random.default_rng(0)
    rows = []
    for n in sizes:
        spec = BlottoSpec(k, n)
        w = np.exp(0.1 * rng.standard_normal(spec.d))
        rows.append({
            "family": "blotto", "n": n, "k": k,
            "first_moment_s": _time_call(
                lambda: blotto_first_moment(spec, w), reps),
            "second_moment_s": _time_call(
                lambda: blotto_second_moment(spec, w), reps),
            "sample_s": _time_call(lambda: blotto_sample(spec, w, rng), reps),
        })
    return rows


def bench_matroid(sizes=(8, 16, 32, 64), reps=3, rng=None):
    import numpy as np

    from .matroid import (GraphSpec, matroid_first_moment,
                          matroid_first_moment_naive, matroid_sample)
    rng = rng or np.random.default_rng(0)
    rows = []
    for nv in sizes:
        edges = [(i, i + 1) for i in range(nv - 1)]
        while len(edges) < 3 * nv:
            u, v = rng.choice(nv, size=2, replace=False)
            edges.append((int(u), int(v)))
        spec = GraphSpec(nv, edges)
        w = np.exp(0.1 * rng.standard_normal(spec.d))
        rows.append({
            "family": "matroid", "num_vertices": nv, "num_edges": spec.d,
            "first_moment_s": _time_call(
                lambda: matroid_first_moment(spec, w), reps),
            "first_moment_naive_s": _time_call(
                lambda: matroid_first_moment_naive(spec, w),
                1 if nv >= 32 else reps),
            "sample_s": _time_call(
                lambda: matroid_sample(spec, w, rng), 1),
        })
    return rows


def doubling_ratios(rows, key):
    vals = [r[key] for r in rows]
    return [vals[i + 1] / vals[i] for i in range(len(vals) - 1)]


def cmd_bench(args):
    import csv

    rows = (bench_blotto() if args.family == "blotto" else bench_matroid())
    out = args.out or f"bench_{args.family}.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        print(row)
    if args.family == "blotto":
        print("first-moment doubling ratios:",
              [round(r, 2) for r in doubling_ratios(rows, "first_moment_s")])
        print("second-moment doubling ratios:",
              [round(r, 2) for r in doubling_ratios(rows, "second_moment_s")])
    else:
        for row in rows:
            print(f"V={row['num_vertices']}: batch "
                  f"{row['first_moment_s']:.4f}s vs naive "
                  f"{row['first_moment_naive_s']:.4f}s")
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# gap


def cmd_gap(args):
    from .core import (Trajectory, read_summary_json, read_trajectory_csv,
                       cce_gap)

    config = load_config(args.config)
    game = _require(config, "game", "config")
    oracle = build_oracle(game)
    loss_fn = build_loss_fn(game, oracle)
    players = int(_require(game, "players", "game"))
    try:
        joint_rounds = read_trajectory_csv(args.trajectory, players, oracle.d)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read trajectory {args.trajectory}: {exc}")
    if not joint_rounds:
        raise ConfigError("trajectory is empty")
    traj = Trajectory(num_players=players, d=oracle.d)
    for joint in joint_rounds:
        traj.record(joint, loss_fn(joint))
    gaps = cce_gap(traj, [oracle.best_response] * players)
    print(f"T={traj.T} per-player CCE gap: {[round(g, 9) for g in gaps]}")
    if args.summary:
        stored = read_summary_json(args.summary)
        ref = stored.get("cce_gap")
        if ref is None or len(ref) != len(gaps):
            raise ConfigError("summary does not contain a comparable gap")
        worst = max(abs(a - b) for a, b in zip(gaps, ref))
        if worst > 1e-9:
            print(f"MISMATCH with stored summary (max diff {worst:.3g})")
            return 1
        print("matches stored summary to 1e-9")
    return 0


# ---------------------------------------------------------------------------


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="polygames",
        description="kernelized no-regret learning over combinatorial games")
    parser.add_argument("--threads", type=int, default=1,
                        help="cap BLAS/OpenMP worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a repeated game from a config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="brute-force equivalence suite")
    p_verify.add_argument("--scale", choices=("small", "medium"),
                          default="small")
    p_verify.set_defaults(func=cmd_verify)

    p_bench = sub.add_parser("bench", help="kernel scaling benchmarks")
    p_bench.add_argument("--family", choices=("blotto", "matroid"),
                         default="blotto")
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_gap = sub.add_parser("gap", help="recompute a stored trajectory's gap")
    p_gap.add_argument("--config", required=True)
    p_gap.add_argument("--trajectory", required=True)
    p_gap.add_argument("--summary", default=None)
    p_gap.set_defaults(func=cmd_gap)

    args = parser.parse_args(argv)
    _set_threads(args.threads)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # unexpected runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
