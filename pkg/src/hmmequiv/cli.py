"""Command line front end.

Every subcommand prints one JSON report to stdout. The report echoes the
command, the SHA-256 digests of the input files and the numeric settings in
force, so identical invocations give identical bytes. Library errors are
reported the same way and mapped to the exit code of the error class.
"""

from __future__ import annotations

import argparse
import itertools
import sys

import numpy as np

from . import io
from .equivalence import are_equivalent
from .errors import ConditionError, HmmEquivError, ValidationError
from .expfam import GeneratorSet, at, divergence, potential_gradient
from .model import sample_windows, empirical_window_law, stationary, validate, validate_distribution
from .observables import check_genericity, exact_output_law, reachability_profile
from .settings import NumericSettings, resolve

# ---------------------------------------------------------------------------
# Helpers


def _vector(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{what} must be a comma separated list of numbers") from exc


def _initial(args, loaded, st):
    """Initial law: --init, else --stationary, else P0 from the file, else stationary."""
    if getattr(args, "init", None):
        P = _vector(args.init, "--init")
        validate_distribution(P, loaded.model.d, st).raise_if_invalid("--init")
        return P, "given"
    if not getattr(args, "stationary", False) and loaded.P0 is not None:
        return loaded.P0, "file"
    return stationary(loaded.model, st), "stationary"


def _matrix_rows(M):
    return np.asarray(M, dtype=float).tolist()


class _Report:
    def __init__(self, command: str, argv, st: NumericSettings):
        self.data = {
            "command": command,
            "argv": list(argv),
            "inputs": {},
            "settings": st.to_dict(),
            "results": {},
            "warnings": [],
        }

    def input(self, path, digest):
        self.data["inputs"][str(path)] = digest

    def warn(self, text):
        self.data["warnings"].append(text)

    @property
    def results(self):
        return self.data["results"]


# ---------------------------------------------------------------------------
# Subcommands


def cmd_validate(args, rep, st):
    import json

    with open(args.model, "rb") as fh:
        raw = fh.read()
    rep.input(args.model, io.digest_bytes(raw))
    try:
        loaded = io.parse_model(json.loads(raw), io.digest_bytes(raw))
    except ValidationError as exc:
        rep.results.update({"valid": False, "violations": [str(v) for v in exc.violations] or [str(exc)]})
        return 2
    except json.JSONDecodeError as exc:
        rep.results.update({"valid": False, "violations": [f"invalid JSON: {exc}"]})
        return 2
    m = loaded.model
    rep.results.update(
        {
            "valid": bool(validate(m, st).ok),
            "violations": [],
            "form": "independent" if loaded.indep is not None else "general",
            "d": m.d,
            "dY": m.dY,
            "full_support": m.full_support(st),
        }
    )
    try:
        rep.results["stationary"] = stationary(m, st)
        rep.results["irreducible"] = True
    except HmmEquivError as exc:
        rep.results["irreducible"] = False
        rep.warn(str(exc))
    return 0


def _load(args, rep, path):
    loaded = io.load_model(path)
    rep.input(path, loaded.digest)
    return loaded


def cmd_stats(args, rep, st):
    loaded = _load(args, rep, args.model)
    P, source = _initial(args, loaded, st)
    reach = reachability_profile(loaded.model, P, st)
    obs = reach.observability
    gen = check_genericity(loaded.model, P, st)
    rep.results.update(
        {
            "initial": P,
            "initial_source": source,
            "k_W": obs.k_W,
            "d_W": obs.d_W,
            "kernel_dims": [K.dim for K in obs.kernels],
            "kernel_basis": _matrix_rows(obs.kernel.basis),
            "k_PW": reach.k_PW,
            "d_PW": reach.d_PW,
            "reachable_dims": [V.dim for V in reach.spaces],
            "E1": gen.E1,
            "E2": gen.E2,
        }
    )
    if not gen.E1:
        rep.warn("E1 fails: nontrivial kernel or reachable space smaller than the quotient")
    return 0


def cmd_equiv(args, rep, st):
    A = _load(args, rep, args.model_a)
    B = _load(args, rep, args.model_b)
    PA, _ = _initial(args, A, st)
    PB, _ = _initial(args, B, st)
    cert = are_equivalent(A.model, PA, B.model, PB, tol=args.tol, settings=st)
    rep.results.update(
        {"verdict": cert.verdict, "equivalent": cert.equivalent, "k_used": cert.k_used, "tv_distance": cert.tv_distance}
    )
    T = cert.intertwiner
    if T is not None:
        rep.results["certificate"] = {
            "matrix": _matrix_rows(T.matrix),
            "reduced": _matrix_rows(T.reduced),
            "labels": [list(w) for w in T.labels],
            "action_residual": T.action_residual,
            "initial_residual": T.initial_residual,
        }
    elif cert.equivalent:
        rep.warn("no certificate: an initial law lacks full support")
    return 0


def cmd_tangent(args, rep, st):
    from .tangent import (
        build_generators,
        find_E3_pair,
        is_two_state_singular,
        tangent_report,
        two_state_singular_generators,
        verify_generators,
    )

    loaded = _load(args, rep, args.model)
    m = loaded.model
    P, source = _initial(args, loaded, st)
    tr = tangent_report(m, P, st)
    rep.results["initial"] = P
    rep.results["initial_source"] = source
    rep.results["report"] = tr.as_dict()
    rep.results["singular"] = tr.singular
    pair = find_E3_pair(m, st)
    rep.results["E3_pair"] = list(pair) if pair else None
    gens = None
    try:
        gens = build_generators(m, P, observable_first=args.observable_first, settings=st)
        rep.results["generator_kind"] = "generic"
    except ConditionError as exc:
        if is_two_state_singular(m) and m.full_support(st):
            gens = two_state_singular_generators(m, st)
            rep.results["generator_kind"] = "two-state singular"
        else:
            rep.warn(f"no generators: {exc}")
    if gens is not None:
        chk = verify_generators(m, gens, st)
        rep.results["generators"] = {"count": chk.count, "intersection_dim": chk.intersection_dim,
                                     "local_dim": chk.local_dim}
        if args.generators:
            with open(args.generators, "w", encoding="utf-8") as fh:
                fh.write(io.dumps(io.generators_to_json(gens.gens), pretty=True) + "\n")
            rep.results["generators"]["file"] = args.generators
    return 0


def cmd_indep(args, rep, st):
    from .indep import (
        check_identifiability,
        decompose,
        ert_generators,
        indep_tangent_report,
        two_hidden_state_report,
    )

    loaded = _load(args, rep, args.model)
    m = loaded.model
    code = 0
    try:
        dec = decompose(m, st)
        rep.results["decompose"] = dec.as_dict()
        if dec.indeterminate:
            rep.warn("factorisation test hit the indeterminate eigenvalue-gap band")
            code = 3
    except ConditionError as exc:
        rep.results["decompose"] = {"ok": False, "failed": "precondition", "detail": str(exc)}
    ind = loaded.indep
    if ind is None:
        return code
    P, source = _initial(args, loaded, st)
    rep.results["initial"] = P
    rep.results["initial_source"] = source
    rep.results["identifiability"] = check_identifiability(ind, P, settings=st).as_dict()
    rep.results["tangent"] = indep_tangent_report(ind, P, st).as_dict()
    try:
        gens = ert_generators(ind, st)
        rep.results["generators"] = {"count": len(gens), "observable_count": gens.observable_count}
        if args.generators:
            with open(args.generators, "w", encoding="utf-8") as fh:
                fh.write(io.dumps(io.indep_generators_to_json(gens.ga, gens.gb), pretty=True) + "\n")
            rep.results["generators"]["file"] = args.generators
    except ValidationError as exc:
        rep.warn(f"no family generators: {exc}")
    if ind.d == 2:
        rep.results["two_state"] = two_hidden_state_report(ind, P if source != "stationary" else None, st).as_dict()
    return code


def cmd_expfam(args, rep, st):
    from .indep import indep_exp_family, make_indep_generators

    loaded = _load(args, rep, args.model)
    m = loaded.model
    kind, payload = io.load_generators(args.gens, m.d, m.dY)
    with open(args.gens, "rb") as fh:
        rep.input(args.gens, io.digest_bytes(fh.read()))
    theta = _vector(args.theta, "--theta")
    indep_gens = None
    if kind == "independent":
        if loaded.indep is None:
            raise ValidationError("independent generators need a model in independent form")
        indep_gens = make_indep_generators(loaded.indep, *payload, settings=st, check_independence=True)
        gens = indep_gens.embedded
    else:
        gens = GeneratorSet(payload, m)
    pt = at(m, gens, theta, st)
    rep.results.update({"theta": theta, "lambda": pt.lam, "phi": pt.phi, "pbar": pt.pbar, "W": pt.model.W})
    if args.grad:
        rep.results["gradient"] = potential_gradient(m, gens, theta, st)
    if args.div:
        theta2 = _vector(args.div, "--div")
        rep.results["theta2"] = theta2
        rep.results["divergence"] = divergence(m, gens, theta, theta2, st)
    if indep_gens is not None:
        ip = indep_exp_family(loaded.indep, indep_gens, theta, st)
        rep.results["independent"] = {"Wmat": ip.indep.Wmat, "V": ip.indep.V, "product_residual": ip.product_residual}
    return 0


def cmd_sample(args, rep, st):
    loaded = _load(args, rep, args.model)
    m = loaded.model
    P, source = _initial(args, loaded, st)
    if args.n < 1 or args.k < 1:
        raise ValidationError("-n and -k must be positive")
    traj = sample_windows(m, P, args.n, args.k, seed=args.seed)
    emp = empirical_window_law(traj.y, m.dY)
    exact = exact_output_law(m, P, args.k, st)
    digest = io.model_digest(m)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(f"# seed={args.seed} n={args.n} k={args.k} model={digest}\n")
            for i in range(args.n):
                fh.write("".join(f"{x} {y}\n" for x, y in zip(traj.x[i], traj.y[i])))
        rep.results["file"] = args.out
    rep.results.update(
        {
            "initial": P,
            "initial_source": source,
            "seed": args.seed,
            "n": args.n,
            "k": args.k,
            "model_digest": digest,
            "tv_distance": 0.5 * float(np.abs(emp - exact).sum()),
        }
    )
    return 0


def cmd_oracle(args, rep, st):
    loaded = _load(args, rep, args.model)
    m = loaded.model
    P, source = _initial(args, loaded, st)
    law = exact_output_law(m, P, args.k, st)
    rep.results.update(
        {
            "initial": P,
            "initial_source": source,
            "k": args.k,
            "word_order": "y_k ... y_1",
            "words": [list(w) for w in itertools.product(range(m.dY), repeat=args.k)],
            "probabilities": law,
        }
    )
    return 0


# ---------------------------------------------------------------------------
# Pretty rendering


def _is_matrix(v) -> bool:
    return isinstance(v, list) and v and all(isinstance(r, list) and r and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in r) for r in v)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def render_pretty(obj, indent: int = 0) -> str:
    """Readable rendering with matrices as aligned tables."""
    pad = " " * indent
    lines = []
    for key, val in obj.items():
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            lines.append(render_pretty(val, indent + 2) if val else f"{pad}  (none)")
        elif _is_matrix(val):
            cells = [[_fmt(x) for x in row] for row in val]
            width = max(len(c) for row in cells for c in row)
            lines.append(f"{pad}{key}:")
            lines += [pad + "  " + "  ".join(c.rjust(width) for c in row) for row in cells]
        elif isinstance(val, list) and val and all(isinstance(v, list) for v in val):
            lines.append(f"{pad}{key}:")
            lines += [pad + "  " + "[" + ", ".join(_fmt(x) for x in v) + "]" for v in val]
        elif isinstance(val, list):
            lines.append(f"{pad}{key}: [" + ", ".join(_fmt(x) for x in val) + "]")
        else:
            lines.append(f"{pad}{key}: {_fmt(val)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--settings", help="JSON file overriding numeric tolerances")
    common.add_argument("--pretty", action="store_true", help="human readable output with aligned tables")

    init = argparse.ArgumentParser(add_help=False)
    grp = init.add_mutually_exclusive_group()
    grp.add_argument("--init", help="initial law as comma separated probabilities")
    grp.add_argument("--stationary", action="store_true", help="use the stationary law")

    p = argparse.ArgumentParser(prog="hmmequiv", description="Equivalence and local geometry of hidden Markov models.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="validate a model file")
    s.add_argument("model")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("stats", parents=[common, init], help="kernel chain, reachable space and genericity")
    s.add_argument("model")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("equiv", parents=[common, init], help="decide equivalence of two models")
    s.add_argument("model_a")
    s.add_argument("model_b")
    s.add_argument("--tol", type=float, default=None, help="total variation tolerance")
    s.set_defaults(func=cmd_equiv)

    s = sub.add_parser("tangent", parents=[common, init], help="indistinguishable subspaces and generators")
    s.add_argument("model")
    s.add_argument("--generators", help="write the generator set to this file")
    s.add_argument("--observable-first", action="store_true", help="put output indicators first")
    s.set_defaults(func=cmd_tangent)

    s = sub.add_parser("indep", parents=[common, init], help="factorisation test and independent-type analysis")
    s.add_argument("model")
    s.add_argument("--generators", help="write the family generators to this file")
    s.set_defaults(func=cmd_indep)

    s = sub.add_parser("expfam", parents=[common], help="evaluate an exponential family")
    s.add_argument("model")
    s.add_argument("gens")
    s.add_argument("--theta", required=True, help="parameter as comma separated values")
    s.add_argument("--grad", action="store_true", help="also report the potential gradient")
    s.add_argument("--div", help="report the divergence to this second parameter")
    s.set_defaults(func=cmd_expfam)

    s = sub.add_parser("sample", parents=[common, init], help="sample windows and compare with the exact law")
    s.add_argument("model")
    s.add_argument("-n", type=int, required=True, help="number of trajectories")
    s.add_argument("-k", type=int, required=True, help="trajectory length")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="write the trajectories to this file")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("oracle", parents=[common, init], help="exact output law over all words of length k")
    s.add_argument("model")
    s.add_argument("-k", type=int, required=True)
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        st = NumericSettings.from_file(args.settings) if args.settings else resolve(None)
    except (OSError, ValueError, TypeError) as exc:
        print(f"hmmequiv: bad settings file: {exc}", file=sys.stderr)
        return 2
    rep = _Report(args.command, argv, st)
    try:
        code = args.func(args, rep, st)
    except HmmEquivError as exc:
        rep.data["error"] = {"type": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        print(f"hmmequiv: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = exc.exit_code
    except OSError as exc:
        rep.data["error"] = {"type": "OSError", "message": str(exc), "exit_code": 2}
        print(f"hmmequiv: {exc}", file=sys.stderr)
        code = 2
    out = render_pretty(io._plain(rep.data)) if args.pretty else io.dumps(rep.data)
    print(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
