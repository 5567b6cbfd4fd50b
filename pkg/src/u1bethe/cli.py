"""Command-line front end: config ingestion, command dispatch, reports.

Config files are flat ``key = value`` text: `model`, `N`, `table_file`,
`L`, `inhomogeneities = [...]` plus named model parameters (e.g. `eta`).
Reports are JSON-shaped documents with every float carrying 17
significant digits so that runs are reproducible bit-for-bit (the
timestamp field is the only run-dependent entry).
"""

import argparse
import sys
from datetime import datetime, timezone

import numpy as np

from . import amplitudes as amp
from . import bethe as bt
from . import verify
from ._parallel import parallel_map
from .chain import ChainContext, monodromy_element, transfer_matrix
from .errors import (ConfigError, DimensionTooLarge, InvalidOption,
                     NoConvergence, ParameterDomain, Singularity,
                     U1BetheError, UnknownGridPoint)
from .weights import (check_ice_rule, check_regularity, check_unitarity,
                      check_yang_baxter, higher_spin_xxz, load_table_file,
                      random_point, six_vertex)

__all__ = ["main", "parse_config", "build_model", "build_context",
           "run_command", "render_report"]

_RESERVED_KEYS = {"model", "N", "table_file", "L", "inhomogeneities"}


# ----------------------------------------------------------------------
# config parsing
# ----------------------------------------------------------------------

def _parse_complex(text, line):
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as a complex number",
                          line) from None


def parse_config(path):
    """Parse a flat key = value config file with line diagnostics."""
    raw = {}
    lines = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, text in enumerate(fh, start=1):
            stripped = text.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError("expected 'key = value'", ln)
            key, _, value = stripped.partition("=")
            key = key.strip()
            value = value.strip()
            if not key or not value:
                raise ConfigError("empty key or value", ln)
            if key in raw:
                raise ConfigError(f"duplicate key {key!r}", ln)
            raw[key] = value
            lines[key] = ln
    return raw, lines


def build_model(raw, lines):
    name = raw.get("model")
    if name is None:
        raise ConfigError("missing required key 'model'", 1)
    line = lines.get("model", 1)
    if name == "table":
        path = raw.get("table_file")
        if path is None:
            raise ConfigError("table model needs 'table_file'", line)
        try:
            return load_table_file(path)
        except OSError as err:
            raise ConfigError(f"cannot read table file: {err}",
                              lines.get("table_file", line)) from None
    params = {}
    for key, value in raw.items():
        if key in _RESERVED_KEYS:
            continue
        params[key] = _parse_complex(value, lines[key])
    if name == "six_vertex":
        n = int(raw.get("N", 2))
        if n != 2:
            raise ConfigError("six_vertex has N = 2", lines.get("N", line))
        return six_vertex(**params) if params else six_vertex()
    if name == "higher_spin_xxz":
        if "N" not in raw:
            raise ConfigError("higher_spin_xxz needs 'N'", line)
        try:
            n = int(raw["N"])
        except ValueError:
            raise ConfigError(f"N must be an integer, got {raw['N']!r}",
                              lines["N"]) from None
        return higher_spin_xxz(n, **params) if params \
            else higher_spin_xxz(n)
    if name == "custom":
        raise ConfigError(
            "custom models are a library-level extension point; "
            "they cannot be defined in a config file", line)
    raise ConfigError(f"unknown model {name!r}", line)


def build_context(model, raw, lines):
    try:
        L = int(raw.get("L", 1))
    except ValueError:
        raise ConfigError(f"L must be an integer, got {raw['L']!r}",
                          lines.get("L", 1)) from None
    if L < 1:
        raise ConfigError("L must be >= 1", lines.get("L", 1))
    inhomog = None
    if "inhomogeneities" in raw:
        ln = lines["inhomogeneities"]
        text = raw["inhomogeneities"].strip()
        if not (text.startswith("[") and text.endswith("]")):
            raise ConfigError("inhomogeneities must be a [..] list", ln)
        body = text[1:-1].strip()
        inhomog = [_parse_complex(p, ln) for p in body.split(",")] \
            if body else []
        if len(inhomog) != L:
            raise ConfigError(
                f"expected {L} inhomogeneities, got {len(inhomog)}", ln)
    return ChainContext(model, L, inhomog)


# ----------------------------------------------------------------------
# report rendering: floats carry 17 significant digits
# ----------------------------------------------------------------------

def _fmt_float(x):
    if x != x:
        return '"nan"'
    if x in (float("inf"), float("-inf")):
        return f'"{x}"'
    return format(float(x), ".17g")


def _render(obj, indent):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  "{k}": {_render(v, indent + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        flat = all(isinstance(v, (int, float, complex, str, bool))
                   for v in obj)
        if flat:
            return "[" + ", ".join(_render(v, indent) for v in obj) + "]"
        items = [f"{pad}  {_render(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, complex):
        return f"[{_fmt_float(obj.real)}, {_fmt_float(obj.imag)}]"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(obj)
    if obj is None:
        return "null"
    text = str(obj).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{text}"'


def render_report(report):
    return _render(report, 0) + "\n"


def _summary(residuals):
    residuals = [float(r) for r in residuals]
    if not residuals:
        return {"max": 0.0, "mean": 0.0, "count": 0}
    return {"max": max(residuals),
            "mean": float(np.mean(residuals)),
            "count": len(residuals)}


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def cmd_check_r(model, ctx, opts):
    rng = np.random.default_rng(opts.seed)
    n = opts.samples
    if n < 1:
        raise InvalidOption("samples must be >= 1")
    results = []
    residuals = []
    if model.name == "table":
        keys = [(l, m) for (l, m, _w) in model.table_data]
        ice = [0.0 if check_ice_rule(model.eval_r(l, m)).ok else 1.0
               for (l, m) in keys]
        uni = [check_unitarity(model, l, m) for (l, m) in keys]
        reg_keys = [(l,) for (l, m) in keys if l == m]
        reg = [check_regularity(model, k[0]) for k in reg_keys]
        if not reg:
            raise UnknownGridPoint(
                "table stores no coincident pair for the regularity check")
        checks = [("ice_rule", ice, keys), ("unitarity", uni, keys),
                  ("regularity", reg, reg_keys)]
    else:
        win = model.sample_window
        pts = [tuple(random_point(rng, win) for _ in range(3))
               for _ in range(n)]
        ice = [0.0 if check_ice_rule(model.eval_r(p[0], p[1])).ok else 1.0
               for p in pts]
        ybe = parallel_map(lambda p: check_yang_baxter(model, *p), pts)
        uni = parallel_map(lambda p: check_unitarity(model, p[0], p[1]), pts)
        reg = parallel_map(lambda p: check_regularity(model, p[0]), pts)
        checks = [("ice_rule", ice, pts), ("yang_baxter", ybe, pts),
                  ("unitarity", uni, pts), ("regularity", reg, pts)]
    for name, vals, where in checks:
        worst = int(np.argmax(vals)) if vals else 0
        results.append({"check": name, **_summary(vals),
                        "worst_sample": list(where[worst]) if vals else []})
        residuals.extend(vals)
    passed = all(r <= opts.tol for r in residuals)
    return results, residuals, passed, None


def cmd_identities(model, ctx, opts):
    if opts.samples < 1:
        raise InvalidOption("samples must be >= 1")
    reports = verify.identity_suite(model, samples=opts.samples,
                                    tol=opts.tol, seed=opts.seed)
    reports += verify.amplitude_property_suite(
        model, samples=opts.samples, tol=opts.tol, seed=opts.seed)
    results = []
    residuals = []
    for rep in reports:
        results.append({
            "identity": rep.identity_id,
            "samples": len(rep.residuals),
            "skipped": rep.skipped,
            "max_residual": rep.max_residual,
            "mean_residual": rep.mean_residual,
            "pass": rep.passed,
        })
        residuals.append(rep.max_residual)
    return results, residuals, all(r["pass"] for r in results), None


def cmd_solve(model, ctx, opts):
    rng = np.random.default_rng(opts.seed)
    lams = [random_point(rng, model.sample_window)
            for _ in range(opts.lambdas)]
    results = []
    residuals = []
    csv_rows = None
    spectrum = None
    if opts.spectrum:
        spectrum = verify.exact_spectrum(ctx, lams[0])
        csv_rows = [(n, k, ev.real, ev.imag)
                    for n, evs in spectrum for k, ev in enumerate(evs)]
    if opts.n == 0:
        trace = [bt.eigenvalue(ctx, lam, ()) for lam in lams]
        ref = np.zeros(ctx.dim, dtype=complex)
        ref[0] = 1.0
        direct = [complex(transfer_matrix(ctx, lam).apply(ref)[0])
                  for lam in lams]
        res = [abs(t - d) / max(abs(t), 1e-30)
               for t, d in zip(trace, direct)]
        results.append({"roots": [], "eigenvalues": trace,
                        "trace_residuals": res})
        residuals.extend(res)
        return results, residuals, all(r <= opts.match_tol for r in res), \
            csv_rows
    try:
        sets = bt.solve_bae(ctx, opts.n, tol=opts.tol,
                            n_seeds=opts.seeds, seed=opts.seed,
                            max_iter=opts.max_iter)
    except NoConvergence as err:
        results.append({"roots": None, "note": "no roots found",
                        "best_residual": float(err.best_residual or 0.0)})
        return results, [], True, csv_rows
    passed = True
    for rs in sets:
        bres = max(abs(bt.bae_residual(ctx, rs.roots, j))
                   for j in range(1, rs.n + 1))
        record = {"roots": list(rs.roots),
                  "bae_residual": float(bres),
                  "eigenvalues": [bt.eigenvalue(ctx, lam, rs)
                                  for lam in lams]}
        vec_res = [verify.eigenstate_residual(ctx, lam, rs) for lam in lams]
        record["eigenstate_residuals"] = vec_res
        residuals.extend(vec_res)
        if any(r > opts.match_tol for r in vec_res):
            passed = False
        if spectrum is not None:
            evs = dict(spectrum)[rs.n]
            pred0 = record["eigenvalues"][0]
            dist = min(abs(ev - pred0) for ev in evs)
            record["spectrum_distance"] = dist
            if dist / max(abs(pred0), 1e-30) > opts.match_tol:
                passed = False
        results.append(record)
    return results, residuals, passed, csv_rows


def _parse_root(text):
    parts = text.split(",")
    if len(parts) == 1:
        return complex(float(parts[0]), 0.0)
    if len(parts) == 2:
        return complex(float(parts[0]), float(parts[1]))
    raise InvalidOption(f"cannot parse root {text!r}; use RE or RE,IM")


def cmd_offshell(model, ctx, opts):
    rng = np.random.default_rng(opts.seed)
    if opts.root:
        roots = tuple(_parse_root(r) for r in opts.root)
    elif opts.n > 0:
        roots = tuple(random_point(rng, model.root_window)
                      for _ in range(opts.n))
    else:
        raise InvalidOption("offshell needs --root entries or --n > 0")
    lam = _parse_root(opts.lam) if opts.lam else \
        random_point(rng, model.sample_window)
    cache = amp.AmplitudeCache()
    state = bt.build_bethe_vector(ctx, roots, cache)
    results = []
    residuals = []
    memo = {}
    for a in range(1, ctx.N + 1):
        wanted, terms = bt.expansion_for_diagonal(ctx, lam, roots, a, cache,
                                                  _memo=memo)
        pred = wanted.amplitudes.copy()
        for t in terms:
            pred += t.contribution.amplitudes
        direct = monodromy_element(ctx, lam, a, a).apply(
            state.vector.amplitudes)
        scale = max(float(np.max(np.abs(direct))),
                    float(np.max(np.abs(pred))), 1e-30)
        res = float(np.max(np.abs(direct - pred)) / scale)
        results.append({"diagonal_index": a, "terms": len(terms),
                        "residual": res})
        residuals.append(res)
    wanted, terms = bt.offshell_expansion(ctx, lam, roots, cache)
    unwanted = np.zeros(ctx.dim, dtype=complex)
    for t in terms:
        unwanted += t.contribution.amplitudes
    rel_unwanted = float(np.max(np.abs(unwanted))
                         / max(np.max(np.abs(wanted.amplitudes)), 1e-30))
    results.append({"lambda": lam, "roots": list(roots),
                    "unwanted_over_wanted": rel_unwanted})
    return results, residuals, all(r <= opts.tol for r in residuals), None


def cmd_rules(model, ctx, opts):
    rng = np.random.default_rng(opts.seed)
    combos = verify.enumerate_rules(model.N)
    windows = model.sample_window

    def one(item):
        k, (family, indices) = item
        local = np.random.default_rng((opts.seed, k))
        notes = 0
        for _attempt in range(10):
            lam = random_point(local, windows)
            mu = random_point(local, windows)
            try:
                rule = verify.generate_rule(model, family, indices, lam, mu)
            except (Singularity, ParameterDomain):
                notes += 1
                continue
            res = verify.check_rule_on_lattice(ctx, rule, trials=opts.pairs)
            return {"family": family, "indices": dict(indices),
                    "direct": rule.direct, "terms": len(rule.terms),
                    "residual": res, "resampled": notes}
        return {"family": family, "indices": dict(indices),
                "residual": float("inf"), "resampled": notes,
                "note": "all sample pairs were singular"}

    results = list(parallel_map(one, list(enumerate(combos))))
    residuals = [r["residual"] for r in results]
    counts = verify.creation_rule_counts(model.N)
    expected = verify.table3_counts(model.N)
    results.append({"creation_rule_counts": counts,
                    "expected_counts": expected,
                    "counts_match": counts == expected})
    passed = all(r <= opts.tol for r in residuals) and counts == expected
    return results, residuals, passed, None


_COMMANDS = {
    "check-r": cmd_check_r,
    "identities": cmd_identities,
    "solve": cmd_solve,
    "offshell": cmd_offshell,
    "rules": cmd_rules,
}


def run_command(command, model, ctx, opts):
    return _COMMANDS[command](model, ctx, opts)


# ----------------------------------------------------------------------
# argument parsing and entry point
# ----------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="u1bethe",
        description="Algebraic Bethe ansatz engine for U(1) vertex models")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_tol):
        p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--tol", type=float, default=default_tol)
        p.add_argument("--samples", type=int, default=100)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--out", default=None, help="report path (default stdout)")
        p.add_argument("--csv", default=None, help="CSV spectra export path")
        p.add_argument("--quiet", action="store_true")

    common(sub.add_parser("check-r", help="R-matrix defining relations"), 1e-10)
    common(sub.add_parser("identities", help="weight-identity suite"), 1e-10)
    p = sub.add_parser("solve", help="Bethe roots, eigenvalues, residuals")
    common(p, 1e-12)
    p.add_argument("--n", type=int, default=1, help="particle number")
    p.add_argument("--spectrum", action="store_true",
                   help="compare against dense diagonalization")
    p.add_argument("--lambdas", type=int, default=5,
                   help="random spectral points for residual checks")
    p.add_argument("--seeds", type=int, default=50, help="Newton seed count")
    p.add_argument("--max-iter", type=int, default=60)
    p.add_argument("--match-tol", type=float, default=1e-8)
    p = sub.add_parser("offshell", help="off-shell expansion vs direct action")
    common(p, 1e-10)
    p.add_argument("--root", action="append", default=[],
                   help="root as RE or RE,IM (repeatable)")
    p.add_argument("--n", type=int, default=0,
                   help="draw this many random roots instead")
    p.add_argument("--lam", default=None, help="spectral point RE,IM")
    p = sub.add_parser("rules", help="generate and lattice-check all rules")
    common(p, 1e-10)
    p.add_argument("--pairs", type=int, default=3,
                   help="random vectors per lattice check")
    return parser


def main(argv=None):
    parser = _build_parser()
    opts = parser.parse_args(argv)
    try:
        raw, lines = parse_config(opts.config)
        model = build_model(raw, lines)
        ctx = build_context(model, raw, lines)
        results, residuals, passed, csv_rows = run_command(
            opts.command, model, ctx, opts)
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ConfigError, InvalidOption, UnknownGridPoint, DimensionTooLarge,
            Singularity, ParameterDomain) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    except U1BetheError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    # echo the options that shape the results; pure I/O switches stay out
    # so that identical runs give byte-identical reports wherever written
    echoed = {k: v for k, v in sorted(vars(opts).items())
              if k not in ("command", "config", "out", "csv", "quiet")
              and v is not None}
    report = {
        "command": opts.command,
        "config": dict(raw),
        "options": echoed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "results": results,
        "residual_summary": _summary(residuals),
        "pass": passed,
    }
    text = render_report(report)
    if opts.out:
        with open(opts.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if csv_rows is not None and opts.csv:
        with open(opts.csv, "w", encoding="utf-8") as fh:
            fh.write("sector,index,re,im\n")
            for n, k, re, im in csv_rows:
                fh.write(f"{n},{k},{re:.17g},{im:.17g}\n")
    elif opts.csv and csv_rows is None:
        print("error: InvalidOption: --csv needs `solve --spectrum`",
              file=sys.stderr)
        return 2
    if not opts.quiet:
        if opts.out:
            status = "pass" if passed else "FAIL"
            print(f"{opts.command}: {status} "
                  f"(max residual {report['residual_summary']['max']:.3e})")
        else:
            sys.stdout.write(text)
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
