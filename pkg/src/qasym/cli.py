"""Command-line entry point.

Every command prints its result document to stdout, or writes it to
``--out``; when ``--out`` is absent and ``QASYM_OUTPUT_DIR`` is set, the
document goes to ``$QASYM_OUTPUT_DIR/<command>-<subcommand>.<format>``.
Documents carry a reproducibility header: tool version, the full flag set,
the seed and a timestamp (the only field that differs between identical runs).

Exit status: 0 success, 1 invalid input, 2 numerical convergence failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__, asym, bound, dext, estim, gauss, model, output
from .errors import ConvergenceError, QasymError, ValidationError

OUTPUT_DIR_ENV = "QASYM_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- flag parsing

def floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def ints(text):
    vals = floats(text)
    if any(v != int(v) for v in vals):
        raise ValidationError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def vectors(text):
    """Semicolon-separated list of comma-separated vectors."""
    return [floats(part) for part in text.split(";") if part.strip()]


def grid(text):
    """``a,b,c`` or ``start:stop:count`` (inclusive linspace)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid must be start:stop:count, got {text!r}")
        a, b = float(parts[0]), float(parts[1])
        k = int(parts[2])
        if k < 1:
            raise ValidationError("grid count must be >= 1")
        return np.linspace(a, b, k).tolist()
    return floats(text)


def _model(args):
    return model.resolve_model(args.model)


def _base(m):
    return m.limit if isinstance(m, model.ProductModel) else m


def _theta(args, m):
    th = floats(args.theta) if args.theta is not None else [0.0] * m.param_dim
    if len(th) != m.param_dim:
        raise ValidationError(f"--theta needs {m.param_dim} values, got {len(th)}")
    return np.array(th)


def _weight(args, m, theta):
    if args.weight == "identity":
        G = np.eye(m.param_dim)
    else:
        G = model.sld_fisher(m, theta)
    return args.weight_scale * G


def _load_gaussian(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    try:
        Sigma = model.decode_matrix(doc["Sigma"])
    except KeyError:
        raise ValidationError(f"{path}: missing Sigma") from None
    F = np.asarray(doc["F"], dtype=float) if "F" in doc else None
    return gauss.GaussianShiftSpec.from_sigma(Sigma, F)


def _extension(args, m, theta):
    rho = model.state_at(m, theta)
    L = model.sld(m, theta)
    kind = getattr(args, "extension", "greedy")
    if kind == "full":
        return dext.full_extension(rho, L)
    ext = dext.build_d_extension(rho, L, tol=args.tol)
    if kind == "rotated":
        ext = dext.rotate_extension(ext, np.random.default_rng(args.seed))
    return ext


# ---------------------------------------------------------------- commands
# each returns (values, table)

def cmd_model_show(args):
    m = _model(args)
    vals = {"name": m.name, "dim": m.hilbert_dim, "param_dim": m.param_dim,
            "kind": "product" if isinstance(m, model.ProductModel) else "iid"}
    if args.theta is not None:
        b = _base(m)
        th = _theta(args, b)
        vals["theta"] = th
        vals["in_domain"] = bool(b.in_domain(th))
        if vals["in_domain"]:
            vals["state"] = model.state_at(b, th)
    return vals, None


def cmd_sld(args):
    m = _base(_model(args))
    th = _theta(args, m)
    L = model.sld(m, th)
    return {"theta": th, "L": L}, None


def cmd_fisher(args):
    m = _base(_model(args))
    th = _theta(args, m)
    J = model.sld_fisher(m, th)
    return {"theta": th, "J": J, "eigenvalues": np.linalg.eigvalsh(J)}, None


def cmd_dext_check(args):
    m = _base(_model(args))
    th = _theta(args, m)
    rho = model.state_at(m, th)
    X = model.sld(m, th)
    eye = np.eye(m.hilbert_dim)
    X = [Li - np.trace(rho @ Li).real * eye for Li in X]
    rep = dext.check_d_invariance(rho, X, tol=args.tol)
    return {"invariant": rep.invariant, "residuals": rep.residuals,
            "geometric_mean_gap": rep.geometric_mean_gap, "Sigma": rep.Sigma, "A": rep.A}, None


def cmd_dext_build(args):
    m = _base(_model(args))
    th = _theta(args, m)
    ext = _extension(args, m, th)
    return {"r": ext.r, "d": ext.d, "X": ext.X, "F": ext.F, "Sigma": ext.Sigma,
            "A": ext.A, "tau": ext.tau}, None


def _bound_values(res, G):
    V = bound.optimal_covariance(res, G)
    return {"value": res.value, "K_star": res.K_star, "Z_star": res.Z_star, "V_star": V,
            "G": G, "diagnostics": res.diagnostics}


def _options(args):
    return bound.BarrierOptions(tol=args.barrier_tol)


def cmd_bound_rep(args):
    if args.gaussian:
        spec = _load_gaussian(args.gaussian)
        if args.weight != "identity":
            raise ValidationError("--weight sld needs --model")
        G = args.weight_scale * np.eye(spec.d)
        res = bound.rep_bound(spec.Sigma, spec.tau, G, _options(args))
        return _bound_values(res, G), None
    m = _base(_model(args))
    th = _theta(args, m)
    ext = _extension(args, m, th)
    G = _weight(args, m, th)
    res = bound.rep_bound(ext.Sigma, ext.tau, G, _options(args))
    res.diagnostics["r"] = ext.r
    return _bound_values(res, G), None


def cmd_bound_holevo(args):
    m = _base(_model(args))
    th = _theta(args, m)
    G = _weight(args, m, th)
    res = bound.holevo_bound_iid(m, th, G, _options(args))
    return _bound_values(res, G), None


def _spec(args):
    if args.gaussian:
        return _load_gaussian(args.gaussian)
    m = _base(_model(args))
    th = _theta(args, m)
    return gauss.GaussianShiftSpec.from_extension(_extension(args, m, th))


def cmd_gauss_purity(args):
    spec = _spec(args)
    Sigma = spec.Sigma
    if args.doubled:
        Sigma = gauss.doubled_covariance(Sigma)
    vals = {}
    if args.quantum_block:
        sp = gauss.split_classical_quantum(Sigma)
        vals["r_c"] = sp.r_c
        Sigma = sp.Sigma_q
    p = gauss.purity(Sigma)
    vals.update({"tr_rho_sq": p.tr_rho_sq, "is_pure": p.is_pure, "det_V": p.det_V,
                 "det_S": p.det_S})
    return vals, None


def cmd_gauss_split(args):
    sp = gauss.split_classical_quantum(_spec(args).Sigma)
    return {"r_c": sp.r_c, "r_q": sp.r_q, "transform": sp.transform, "Sigma_c": sp.Sigma_c,
            "Sigma_q": sp.Sigma_q, "condition": sp.condition}, None


def cmd_gauss_char(args):
    spec = _spec(args)
    h = floats(args.h) if args.h else [0.0] * spec.d
    xis = vectors(args.xi)
    vals = {"h": h, "quasi_char": gauss.quasi_char_function(spec, h, xis)}
    if len(xis) == 1:
        vals["char"] = gauss.char_function(spec, h, xis[0])
    return vals, None


def _family(args):
    m = _model(args)
    th = _theta(args, m)
    if isinstance(m, model.ProductModel):
        fam, ext = asym.product_family(m, th)
    else:
        fam, ext = asym.iid_extension_family(m, th)
    return fam, ext


def cmd_asym_sandwich(args):
    fam, _ = _family(args)
    xi, eta = floats(args.xi), floats(args.eta)
    rows = []
    for n in ints(args.n):
        out = asym.sandwich_value(fam, xi, eta, n)
        rows.append({"n": n, "lhs": out["lhs"], "rhs": out["rhs"], "gap": out["gap"]})
    return {"r": fam.r}, rows


def cmd_asym_clt(args):
    m = _model(args)
    th = _theta(args, m)
    h = floats(args.h) if args.h else [0.0] * m.param_dim
    xis = vectors(args.xi)
    rows = []
    for n in ints(args.n):
        out = asym.quasi_char_finite_n(m, th, h, xis, n)
        rows.append({"n": n, "finite_n": out["finite_n"], "limit": out["limit"],
                     "gap": out["gap"]})
    return {"h": h}, rows


def cmd_asym_weyl(args):
    fam, _ = _family(args)
    xi, eta = floats(args.xi), floats(args.eta)
    rows = [{"n": n, "residual": asym.weyl_residual(fam, xi, eta, n)} for n in ints(args.n)]
    return {"r": fam.r}, rows


def cmd_asym_qlan(args):
    m = _base(_model(args))
    th = _theta(args, m)
    h = floats(args.h) if args.h else [0.0] * m.param_dim
    rows = []
    for n in ints(args.n):
        out = asym.qlan_residual(m, th, h, n)
        rows.append({"n": n, **out})
    return {"h": h}, rows


def cmd_asym_povm_demo(args):
    rows = asym.no_limit_povm_demo(floats(args.h), args.n)
    return {"n": args.n}, rows


def cmd_estim_hodges(args):
    curve = estim.hodges_risk(grid(args.theta1), args.n, args.radial_order, args.angular_order,
                              truncate=not args.no_truncate)
    return curve.metadata, _curve_rows(curve)


def _curve_rows(curve):
    cols = curve.columns()
    keys = list(cols)
    return [{k: cols[k][i] for k in keys} for i in range(len(curve.risk))]


def cmd_estim_james_stein(args):
    if args.norms:
        curve = estim.james_stein_curve(grid(args.norms), args.samples, args.seed,
                                        floats(args.direction), args.workers, args.shrinkage)
        return curve.metadata, _curve_rows(curve)
    h = floats(args.h)
    out = estim.james_stein_risk(h, args.samples, args.seed, args.workers, args.shrinkage)
    out.update({"h": h, "rng": estim.RNG_ALGORITHM, "shrinkage": args.shrinkage})
    return out, None


def cmd_estim_regular(args):
    m = _base(_model(args))
    th = _theta(args, m)
    G = _weight(args, m, th)
    res = bound.holevo_bound_iid(m, th, G, _options(args))
    curve = estim.regular_risk(res, G, grid(args.h_norms))
    return {"bound": res.value}, _curve_rows(curve)


def cmd_estim_minimax(args):
    cols = output.read_curve(args.curve)
    curve = estim.RiskCurve(cols["abscissa"], cols["risk"], cols.get("stderr"))
    idx = ints(args.indices) if args.indices else list(range(len(curve.risk)))
    return {"sup_risk": estim.minimax_scan(curve, idx), "indices": idx}, None


# ---------------------------------------------------------------- parser

def _add_io(p):
    p.add_argument("--out", help="output file (default: stdout or $%s)" % OUTPUT_DIR_ENV)
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _add_model(p, required=True):
    p.add_argument("--model", required=required,
                   help="builtin tag (%s) or model JSON file" % ", ".join(model.BUILTIN_TAGS))
    p.add_argument("--theta", help="comma-separated parameter point (default: origin)")


def _add_ext(p):
    p.add_argument("--extension", choices=("greedy", "rotated", "full"), default="greedy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=dext.INVARIANCE_TOL)


def _add_weight(p):
    p.add_argument("--weight", choices=("identity", "sld"), default="identity")
    p.add_argument("--weight-scale", type=float, default=1.0)
    p.add_argument("--barrier-tol", type=float, default=bound.BarrierOptions.tol)


def build_parser():
    top = _Parser(prog="qasym", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=f"qasym {__version__}")
    groups = top.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def leaf(sub, name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=fn)
        _add_io(p)
        return p

    g = groups.add_parser("model", help="inspect a model").add_subparsers(dest="cmd", required=True)
    _add_model(leaf(g, "show", cmd_model_show, "model summary and state"))
    _add_model(leaf(groups, "sld", cmd_sld, "symmetric logarithmic derivatives"))
    _add_model(leaf(groups, "fisher", cmd_fisher, "SLD Fisher information"))

    g = groups.add_parser("dext", help="D-invariant extensions").add_subparsers(dest="cmd", required=True)
    p = leaf(g, "check", cmd_dext_check, "is the SLD span D-invariant")
    _add_model(p)
    p.add_argument("--tol", type=float, default=dext.INVARIANCE_TOL)
    p = leaf(g, "build", cmd_dext_build, "build a D-extension")
    _add_model(p)
    _add_ext(p)

    g = groups.add_parser("bound", help="representation bound").add_subparsers(dest="cmd", required=True)
    p = leaf(g, "rep", cmd_bound_rep, "bound for a Gaussian shift or a chosen extension")
    _add_model(p, required=False)
    p.add_argument("--gaussian", help="JSON file with Sigma (and optional F)")
    _add_ext(p)
    _add_weight(p)
    p = leaf(g, "holevo", cmd_bound_holevo, "Holevo bound of an i.i.d. model")
    _add_model(p)
    _add_weight(p)

    g = groups.add_parser("gauss", help="Gaussian shift calculus").add_subparsers(dest="cmd", required=True)
    for name, fn, help_ in (("purity", cmd_gauss_purity, "purity of N(0, Sigma)"),
                            ("split", cmd_gauss_split, "classical/quantum split"),
                            ("char", cmd_gauss_char, "(quasi-)characteristic function")):
        p = leaf(g, name, fn, help_)
        _add_model(p, required=False)
        p.add_argument("--gaussian", help="JSON file with Sigma (and optional F)")
        _add_ext(p)
    g.choices["purity"].add_argument("--doubled", action="store_true",
                                     help="use [[J, J#J^T], [J#J^T, J^T]]")
    g.choices["purity"].add_argument("--quantum-block", action="store_true",
                                     help="split off the classical part first")
    g.choices["char"].add_argument("--h")
    g.choices["char"].add_argument("--xi", required=True, help="xi_1;xi_2;... (comma vectors)")

    g = groups.add_parser("asym", help="finite-n diagnostics").add_subparsers(dest="cmd", required=True)
    for name, fn in (("sandwich", cmd_asym_sandwich), ("weyl", cmd_asym_weyl)):
        p = leaf(g, name, fn, f"{name} diagnostic")
        _add_model(p)
        p.add_argument("--xi", required=True)
        p.add_argument("--eta", required=True)
        p.add_argument("--n", required=True, help="comma-separated n values")
    p = leaf(g, "clt", cmd_asym_clt, "quasi-characteristic convergence")
    _add_model(p)
    p.add_argument("--h")
    p.add_argument("--xi", required=True, help="xi_1;xi_2;... (comma vectors)")
    p.add_argument("--n", required=True)
    p = leaf(g, "qlan", cmd_asym_qlan, "q-LAN remainder")
    _add_model(p)
    p.add_argument("--h")
    p.add_argument("--n", required=True)
    p = leaf(g, "povm-demo", cmd_asym_povm_demo, "binary POVM without a limit")
    p.add_argument("--h", required=True)
    p.add_argument("--n", type=int, required=True)

    g = groups.add_parser("estim", help="estimator risk").add_subparsers(dest="cmd", required=True)
    p = leaf(g, "hodges", cmd_estim_hodges, "Hodges risk curve")
    p.add_argument("--theta1", required=True, help="values or start:stop:count")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--radial-order", type=int, default=64)
    p.add_argument("--angular-order", type=int, default=32)
    p.add_argument("--no-truncate", action="store_true")
    p = leaf(g, "james-stein", cmd_estim_james_stein, "James-Stein Monte Carlo risk")
    p.add_argument("--h", default="0,0,0")
    p.add_argument("--norms", help="curve over |h| (values or start:stop:count)")
    p.add_argument("--direction", default="1,0,0")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--shrinkage", choices=estim.SHRINKAGE, default="norm")
    p = leaf(g, "regular", cmd_estim_regular, "regular estimator risk curve")
    _add_model(p)
    _add_weight(p)
    p.add_argument("--h-norms", default="0,1,2,5,10")
    p = leaf(g, "minimax", cmd_estim_minimax, "sup of a risk curve over an index set")
    p.add_argument("--curve", required=True, help="risk curve CSV or JSON")
    p.add_argument("--indices")
    return top


def _meta(args, argv):
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {
        "tool": f"qasym {__version__}",
        "command": " ".join(a for a in (args.group, getattr(args, "cmd", None)) if a),
        "flags": flags,
        "seed": flags.get("seed"),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }


def _destination(args):
    if args.out:
        return args.out
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base:
        name = "-".join(a for a in (args.group, getattr(args, "cmd", None)) if a)
        return os.path.join(base, f"{name}.{args.format}")
    return None


def _join_negative_values(argv):
    """``--theta -0.5,0`` -> ``--theta=-0.5,0``; argparse would read the value as a flag."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else ""
        if a.startswith("--") and "=" not in a and len(nxt) > 1 and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == "."):
            out.append(f"{a}={nxt}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def main(argv=None):
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = build_parser().parse_args(argv)
        values, table = args.func(args)
        meta = _meta(args, argv)
        render = output.render_csv if args.format == "csv" else output.render_json
        text = render(meta, values, table)
        dest = _destination(args)
        if dest:
            os.makedirs(os.path.dirname(os.path.abspath(dest)), exist_ok=True)
            with open(dest, "w", newline="\n") as fh:
                fh.write(text)
            print(f"wrote {dest}")
        else:
            sys.stdout.write(text)
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(json.dumps(output.to_jsonable(exc.diagnostics), sort_keys=True), file=sys.stderr)
        return 2
    except (OSError, QasymError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
