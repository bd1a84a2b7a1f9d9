"""Command-line front end.

Subcommands: ``calibrate``, ``price``, ``varswap``, ``markdown``,
``store list`` / ``store show``.  Reports are JSON on stdout with sorted
keys and full-precision floats, so identical inputs produce byte-identical
output; timestamps exist only in the parameter store.

Exit codes: 0 success, 1 input error, 2 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from .calibration import MODELS, FixSet, OptimizerConfig, TenorRules
from .errors import (
    DomainError,
    NumericalError,
    QuoteParseError,
    RecordNotFoundError,
)
from .fx_quotes import Conventions
from .mixing import MixingCurve
from .models import MarketSlice
from .pricing import OptionSpec, QuadratureConfig, bs_implied_vol, cf_vanilla_price
from .models import cf_for
from .quotes_io import emit_quotes, load_quotes, load_varswap_curve, quotes_digest
from .store import ENV_STORE, ParamRecord, ParamStore
from .workflows import RunConfig, calibrate_report, markdown_rows, varswap_report

_INPUT_ERRORS = (
    DomainError,
    QuoteParseError,
    RecordNotFoundError,
    FileNotFoundError,
    json.JSONDecodeError,
)


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _parse_fix(items: Sequence[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise DomainError(f"--fix expects name=value, got {item!r}")
        name, _, value = item.partition("=")
        out[name.strip()] = float(value)
    return out


def _parse_curve(text: str) -> MixingCurve:
    bps, vals = [], []
    for part in text.split(","):
        if ":" not in part:
            raise DomainError(f"--curve expects t:value pairs, got {part!r}")
        t, _, v = part.partition(":")
        bps.append(float(t))
        vals.append(float(v))
    return MixingCurve(tuple(bps), tuple(vals))


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _run_config(args, rows) -> RunConfig:
    """Flags-plus-file configuration; flag values override file values."""
    filecfg = _load_config_file(getattr(args, "config", None))

    def pick(flag_value, file_key, default):
        if flag_value is not None:
            return flag_value
        return filecfg.get(file_key, default)

    conv = Conventions(
        delta_kind=pick(getattr(args, "delta_kind", None), "delta_kind", "forward"),
        atm_kind=pick(getattr(args, "atm_kind", None), "atm_kind", "dns"),
    )
    rules = TenorRules(
        kappa_rule_constant=float(pick(getattr(args, "kappa_rule_c", None), "kappa_rule_constant", 1.5)),
        theta_rule=pick(getattr(args, "theta_rule", None), "theta_rule", "v0"),
    )
    fix_map = dict(filecfg.get("fix", {}))
    fix_map.update(_parse_fix(getattr(args, "fix", []) or []))
    v0_from_atm_vol = None
    if getattr(args, "v0_from_atm", False) or filecfg.get("v0_from_atm", False):
        one_month = min(rows, key=lambda r: abs(r.expiry - 1.0 / 12.0))
        v0_from_atm_vol = one_month.atm_vol
    fix = FixSet(fixed=fix_map, v0_from_atm_vol=v0_from_atm_vol) if (fix_map or v0_from_atm_vol) else None

    optimizer = OptimizerConfig(**filecfg.get("optimizer", {}))
    if "quadrature" in filecfg:
        optimizer = replace(optimizer, quad=QuadratureConfig(**filecfg["quadrature"]))

    prev_params = None
    prev_path = getattr(args, "prev", None)
    if prev_path:
        model_kind = pick(getattr(args, "model", None), "model", "heston")
        prev_params = _params_from_payload(json.loads(Path(prev_path).read_text()), model_kind)

    mixing = None
    if filecfg.get("mixing"):
        mixing = MixingCurve(tuple(filecfg["mixing"]["breakpoints"]), tuple(filecfg["mixing"]["values"]))

    vs_curve = None
    vs_path = getattr(args, "vs_curve", None)
    if vs_path:
        vs_curve = tuple(load_varswap_curve(vs_path))

    return RunConfig(
        model_kind=pick(getattr(args, "model", None), "model", "heston"),
        strategy=pick(getattr(args, "strategy", None), "strategy", "tenor"),
        conventions=conv,
        rules=rules,
        fix=fix,
        mixing=mixing,
        varswap_mode=pick(getattr(args, "varswap_mode", None), "varswap_mode", "fix"),
        optimizer=optimizer,
        prev_params=prev_params,
        vs_curve=vs_curve,
    )


def _params_from_payload(payload: dict, default_model: str = "heston"):
    """Accept {'model_kind': ..., 'params': {...}} or a bare params dict."""
    model_kind = payload.get("model_kind", default_model)
    raw = payload.get("params", payload)
    if model_kind not in MODELS:
        raise DomainError(f"unknown model kind {model_kind!r}")
    return MODELS[model_kind].build(raw)


def _store(args) -> ParamStore:
    return ParamStore(getattr(args, "store_path", None))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_calibrate(args) -> int:
    text = Path(args.quotes).read_text()
    rows = load_quotes(args.quotes)
    cfg = _run_config(args, rows)
    digest = quotes_digest(text)
    report = calibrate_report(rows, cfg, digest)
    _emit(report)
    if args.save:
        store = _store(args)
        if cfg.strategy == "tenor":
            params = {rec["tenor"]: rec["params"] for rec in report["records"]}
            diagnostics = {
                rec["tenor"]: {"rmse": rec["rmse"], "feller": rec["feller"]}
                for rec in report["records"]
            }
        else:
            rec = report["records"][0]
            params = rec["params"]
            diagnostics = {"rmse": rec["rmse"], "feller": rec["feller"]}
        record = ParamRecord(
            model_kind=cfg.model_kind,
            params=params,
            timestamp=datetime.now(timezone.utc).isoformat(),
            quote_digest=digest,
            strategy=report["strategy"],
            diagnostics=diagnostics,
        )
        record_id = store.save(record, quotes=text)
        sys.stderr.write(f"saved record {record_id} to {store.path}\n")
    return 0 if all(rec["converged"] for rec in report["records"]) else 2


def cmd_price(args) -> int:
    if args.latest:
        record = _store(args).latest(args.latest)
        flat = record.flat_params(args.tenor)
        params = MODELS[record.model_kind].build(flat)
        model_kind = record.model_kind
    else:
        payload = json.loads(Path(args.params).read_text())
        if args.tenor and "params" not in payload and args.tenor in payload:
            payload = payload[args.tenor]
        params = _params_from_payload(payload, args.model or "heston")
        model_kind = args.model or payload.get("model_kind", "heston")
    slice_ = MarketSlice(forward=args.forward, discount=args.discount, expiry=args.expiry)
    opt = OptionSpec(strike=args.strike, expiry=args.expiry, kind=args.kind)
    price = cf_vanilla_price(cf_for(params), slice_, opt)
    vol = bs_implied_vol(slice_, opt, price)
    _emit(
        {
            "schema": 1,
            "model": model_kind,
            "forward": args.forward,
            "discount": args.discount,
            "strike": args.strike,
            "expiry": args.expiry,
            "kind": args.kind,
            "price": price,
            "implied_vol": vol,
        }
    )
    return 0


def cmd_varswap(args) -> int:
    if args.quotes:
        text = Path(args.quotes).read_text()
        rows = load_quotes(args.quotes)
    else:
        text = Path(args.vs_curve).read_text()
        rows = []
    cfg = _run_config(args, rows)
    report = varswap_report(rows, cfg, quotes_digest(text), args.fit)
    _emit(report)
    if args.fit and not report["fit"]["converged"]:
        return 2
    return 0


def cmd_markdown(args) -> int:
    rows = load_quotes(args.quotes)
    curve = _parse_curve(args.curve) if args.curve else None
    if args.lam is None and curve is None:
        filecfg = _load_config_file(args.config)
        if filecfg.get("mixing"):
            curve = MixingCurve(
                tuple(filecfg["mixing"]["breakpoints"]), tuple(filecfg["mixing"]["values"])
            )
        else:
            raise DomainError("supply --lam, --curve, or a config file with a mixing curve")
    out_rows = markdown_rows(rows, args.lam, curve)
    text = emit_quotes(out_rows)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_store(args) -> int:
    store = _store(args)
    if args.store_cmd == "list":
        records = store.list_records(args.model)
        _emit(
            {
                "schema": 1,
                "store": str(store.path),
                "records": [
                    {
                        "record_id": r.record_id,
                        "model_kind": r.model_kind,
                        "timestamp": r.timestamp,
                        "quote_digest": r.quote_digest,
                        "warnings": list(r.warnings),
                    }
                    for r in records
                ],
            }
        )
        return 0
    record = store.load(args.record_id)
    _emit(
        {
            "schema": 1,
            "record_id": record.record_id,
            "model_kind": record.model_kind,
            "params": record.params,
            "timestamp": record.timestamp,
            "quote_digest": record.quote_digest,
            "strategy": dict(record.strategy),
            "diagnostics": dict(record.diagnostics),
            "warnings": list(record.warnings),
        }
    )
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svcal", description="Stochastic-volatility calibration toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_store_path(p):
        p.add_argument("--store-path", default=None, help=f"parameter store directory (or ${ENV_STORE})")

    cal = sub.add_parser("calibrate", help="calibrate a model to a quote file")
    cal.add_argument("--quotes", required=True)
    cal.add_argument("--config", default=None, help="JSON config file; flags override")
    cal.add_argument("--model", choices=sorted(MODELS), default=None)
    cal.add_argument("--strategy", choices=("full", "fixed", "penalized", "tenor", "varswap"), default=None)
    cal.add_argument("--kappa-rule-c", dest="kappa_rule_c", type=float, default=None)
    cal.add_argument("--theta-rule", dest="theta_rule", choices=("v0", "atm_variance"), default=None)
    cal.add_argument("--delta-kind", dest="delta_kind", choices=("forward", "spot"), default=None)
    cal.add_argument("--atm-kind", dest="atm_kind", choices=("dns", "forward"), default=None)
    cal.add_argument("--fix", action="append", default=None, metavar="NAME=VALUE")
    cal.add_argument("--v0-from-atm", dest="v0_from_atm", action="store_true",
                     help="pin v0 to the squared ATM vol of the tenor nearest 1M")
    cal.add_argument("--prev", default=None, help="previous parameters (JSON) for the penalized strategy")
    cal.add_argument("--varswap-mode", dest="varswap_mode", choices=("fix", "initial-guess"), default=None)
    cal.add_argument("--vs-curve", dest="vs_curve", default=None,
                     help="quoted variance-swap curve CSV used by the varswap strategy")
    cal.add_argument("--save", action="store_true", help="persist the result to the parameter store")
    add_store_path(cal)
    cal.set_defaults(fn=cmd_calibrate)

    pr = sub.add_parser("price", help="price a vanilla with stored or supplied parameters")
    src = pr.add_mutually_exclusive_group(required=True)
    src.add_argument("--params", default=None, help="JSON parameter file")
    src.add_argument("--latest", default=None, metavar="MODEL", help="use the latest stored record")
    pr.add_argument("--model", choices=sorted(MODELS), default=None)
    pr.add_argument("--tenor", default=None, help="tenor label for per-tenor records")
    pr.add_argument("--strike", type=float, required=True)
    pr.add_argument("--expiry", type=float, required=True)
    pr.add_argument("--kind", choices=("call", "put"), default="call")
    pr.add_argument("--forward", type=float, default=1.0)
    pr.add_argument("--discount", type=float, default=1.0)
    add_store_path(pr)
    pr.set_defaults(fn=cmd_price)

    vs = sub.add_parser("varswap", help="variance-swap curve implied by quotes or quoted directly")
    vs_src = vs.add_mutually_exclusive_group(required=True)
    vs_src.add_argument("--quotes", default=None, help="vanilla quote file (curve is replicated)")
    vs_src.add_argument("--vs-curve", dest="vs_curve", default=None,
                        help="quoted variance-swap curve CSV (expiry_years,fair_variance)")
    vs.add_argument("--config", default=None)
    vs.add_argument("--fit", choices=("fix", "initial-guess"), default=None,
                    help="also fit (kappa, theta, v0) to the curve")
    vs.add_argument("--delta-kind", dest="delta_kind", choices=("forward", "spot"), default=None)
    vs.add_argument("--atm-kind", dest="atm_kind", choices=("dns", "forward"), default=None)
    vs.set_defaults(fn=cmd_varswap)

    md = sub.add_parser("markdown", help="mark down strangle/risk-reversal quotes")
    md.add_argument("--quotes", required=True)
    grp = md.add_mutually_exclusive_group()
    grp.add_argument("--lam", type=float, default=None, help="constant mixing weight in [0, 1]")
    grp.add_argument("--curve", default=None, help="piecewise weights, e.g. '1:0.5,5:0.8'")
    md.add_argument("--config", default=None, help="JSON config supplying a mixing curve")
    md.add_argument("--output", default=None, help="output CSV path (default stdout)")
    md.set_defaults(fn=cmd_markdown)

    st = sub.add_parser("store", help="inspect the parameter store")
    stsub = st.add_subparsers(dest="store_cmd", required=True)
    st_list = stsub.add_parser("list")
    st_list.add_argument("--model", default=None)
    add_store_path(st_list)
    st_list.set_defaults(fn=cmd_store)
    st_show = stsub.add_parser("show")
    st_show.add_argument("record_id", type=int)
    add_store_path(st_show)
    st_show.set_defaults(fn=cmd_store)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _INPUT_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
