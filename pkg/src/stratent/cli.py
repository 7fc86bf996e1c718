"""Command-line interface: ``stratent <command> [config] [flags]``.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
error, 4 an asserted bound failed, 5 contract or scope violation. Every error
is one stderr line starting with ``stratent: error[<kind>]:``.
"""

import argparse
import csv
import io
import json
import sys
import warnings


from . import __version__
from .charts import BUILTIN_CHARTS, chart_parameters
from .config import parse_config
from .errors import ConfigError, ContractError, NumericError, StratentError
from .experiments import FORMATS, MODES, ExperimentConfig, emit_report, run_aep, run_theorem

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BOUND, EXIT_CONTRACT = 0, 1, 2, 3, 4, 5
COMMANDS = ("entropy", "sample", "aep", "theorem", "chain-rule", "charts")


def _n_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("sequence lengths must be positive")
    return values


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default: config or 0)")
    common.add_argument("--trials", type=int, default=None, help="Monte Carlo sequences or draws")
    common.add_argument("--delta", type=float, default=None, help="weak-typicality margin")
    common.add_argument("--xi", type=float, default=None, help="schedule exponent in (0, 1/2)")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=FORMATS, default=None, help="output format")

    parser = argparse.ArgumentParser(prog="stratent", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"stratent {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("entropy", parents=[common], help="entropy decomposition of a measure")
    p.add_argument("config")
    p = sub.add_parser("sample", parents=[common], help="draw labelled samples")
    p.add_argument("config")
    p.add_argument("-n", "--count", type=int, default=None, help="number of samples")
    for name, text in (("aep", "weak typicality and the volume sandwich"),
                       ("theorem", "double typicality and stratum volumes")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("config")
        p.add_argument("--n", type=_n_list, default=None, help="sequence lengths, comma separated")
        p.add_argument("--mode", choices=MODES, default=None)
    p = sub.add_parser("chain-rule", parents=[common], help="chain-rule residuals")
    p.add_argument("config")
    sub.add_parser("charts", parents=[common], help="list built-in charts")
    return parser


def _pick(flag, block, key, default):
    if flag is not None:
        return flag
    return block.get(key, default)


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc.strerror}") from None


def _dump(rows, fmt):
    """Render a list of flat dicts in the requested format."""
    if fmt == "json-lines":
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    lines = []
    for r in rows:
        lines += [f"{k:24s} {v}" for k, v in r.items()]
    return "\n".join(lines) + "\n"


def cmd_charts(args):
    rows = [{"name": name, "parameters": ", ".join(chart_parameters(name))}
            for name in sorted(BUILTIN_CHARTS)]
    if (args.format or "human-text") == "human-text":
        text = "".join(f"{r['name']:14s} {r['parameters']}\n" for r in rows)
    else:
        text = _dump(rows, args.format)
    _write(text, args.out)
    return EXIT_OK


def cmd_entropy(args, cfg):
    from .measures import expected_dimension, mc_entropy, stratified_entropy

    terms = stratified_entropy(cfg.measure)
    row = {
        "total": terms.total,
        "mixture": terms.mixture_term,
        "conditional": terms.conditional_term,
        "E_D": expected_dimension(cfg.measure),
        "H_Y": terms.mixture_term,
    }
    if args.trials is not None:
        est, se = mc_entropy(cfg.measure, args.trials, _pick(args.seed, cfg.experiment, "seed", 0))
        row.update({"mc_estimate": est, "mc_stderr": se})
    fmt = args.format or "human-text"
    if fmt == "human-text":
        text = "".join(f"{k:12s} {v:.10f}\n" for k, v in row.items())
    else:
        text = _dump([row], fmt)
    _write(text, args.out)
    return EXIT_OK


def cmd_sample(args, cfg):
    from .measures import sample

    n = args.count or args.trials or cfg.experiment.get("samples", 1000)
    seed = _pick(args.seed, cfg.experiment, "seed", 0)
    draws = sample(cfg.measure, n, seed)
    d = cfg.measure.ambient_dim
    m_max = draws.params.shape[1]
    rows = []
    for i in range(len(draws)):
        stratum = cfg.measure.strata[draws.labels[i]]
        comp = stratum.components[draws.pieces[i]]
        row = {"index": i, "stratum": int(draws.labels[i]), "label": comp.label,
               "dim": stratum.dim}
        row.update({f"x{j}": float(draws.points[i, j]) for j in range(d)})
        row.update({f"t{j}": (float(draws.params[i, j]) if j < stratum.dim else "")
                    for j in range(m_max)})
        rows.append(row)
    fmt = args.format or "csv"
    if fmt == "human-text":
        fmt = "csv"
    _write(_dump(rows, fmt), args.out)
    return EXIT_OK


def _experiment_config(args, cfg):
    e = cfg.experiment
    return ExperimentConfig(
        cfg.measure,
        n_values=tuple(_pick(args.n, e, "n", [12])),
        delta=_pick(args.delta, e, "delta", 0.15),
        xi=_pick(args.xi, e, "xi", 0.2),
        trials=_pick(args.trials, e, "trials", 10_000),
        seed=_pick(args.seed, e, "seed", 0),
        mode=_pick(args.mode, e, "mode", "brute-force"),
        volume_trials=e.get("volume_trials", 4000),
        eps_user=e.get("eps_user", 0.1),
        out=args.out,
        format=args.format or "json-lines",
    )


def cmd_experiment(args, cfg):
    config = _experiment_config(args, cfg)
    report = (run_aep if args.command == "aep" else run_theorem)(config)
    text = emit_report(report, None, config.format)
    _write(text, args.out)
    if not report.passed:
        failed = ", ".join(f"n={n}:{k}" for n, k in report.failures())
        print(f"stratent: error[bound]: asserted bounds failed ({failed})", file=sys.stderr)
        return EXIT_BOUND
    return EXIT_OK


def cmd_chain_rule(args, cfg):
    from .disintegration import chain_rule_residual, coarea_chain_rule_terms

    rows = []
    res = chain_rule_residual(cfg.measure)
    rows.append({"check": "stratified", "residual": res.residual, "left": res.left,
                 "right": res.right, "method": res.method})
    if args.trials is not None:
        mc = chain_rule_residual(cfg.measure, use_mc=True, n=args.trials,
                                 seed=_pick(args.seed, cfg.experiment, "seed", 0))
        rows.append({"check": "stratified-mc", "residual": mc.residual, "left": mc.left,
                     "right": mc.right, "method": f"{mc.method} (stderr {mc.stderr:.3g})"})
    if cfg.coarea:
        comp = cfg.measure.components[cfg.coarea["component"]]
        r = coarea_chain_rule_terms(comp, cfg.coarea["matrix"])
        rows.append({"check": "coarea", "residual": r.residual, "left": r.total_entropy,
                     "right": r.base_entropy + r.conditional_entropy,
                     "method": r.fiber_description["method"]})
    fmt = args.format or "human-text"
    if fmt == "human-text":
        text = "".join(f"{r['check']:14s} residual {r['residual']:.3e}  "
                       f"left {r['left']:.10f}  right {r['right']:.10f}  [{r['method']}]\n"
                       for r in rows)
    else:
        text = _dump(rows, fmt)
    _write(text, args.out)
    return EXIT_OK


def _error(kind, message):
    print(f"stratent: error[{kind}]: {message}", file=sys.stderr)


def dispatch(args):
    """Run the parsed command and return its exit code."""
    if args.command == "charts":
        return cmd_charts(args)
    cfg = parse_config(args.config)
    for text in cfg.warnings:
        print(f"stratent: warning: {text}", file=sys.stderr)
    handlers = {"entropy": cmd_entropy, "sample": cmd_sample, "aep": cmd_experiment,
                "theorem": cmd_experiment, "chain-rule": cmd_chain_rule}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        return handlers[args.command](args, cfg)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return dispatch(args)
    except ConfigError as exc:
        _error("config", exc)
        return EXIT_CONFIG
    except NumericError as exc:
        _error("numeric", exc)
        return EXIT_NUMERIC
    except ContractError as exc:
        _error(exc.kind, exc)
        return EXIT_CONTRACT
    except StratentError as exc:
        _error(exc.kind, exc)
        return EXIT_IO
    except OSError as exc:
        _error("io", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
