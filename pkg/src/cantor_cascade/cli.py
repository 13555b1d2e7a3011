"""Command line entry point.

Every command prints a JSON report, optionally writes artifacts to --out, and
exits 0 when all of its checks pass, 1 when one fails and 2 on bad
configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Optional

from .cantor import STANDARD, Gap, central, dist_to_cantor, gaps, pow3, standard
from .chartgrid import (
    Params,
    ParamsError,
    density,
    expectation_exact,
    grid_dump,
    iter_tree,
    second_moment_bound,
    second_moment_exact,
    standard_delta,
)
from .halfplane import DEFAULT_ALPHA, expected_standard_certificate, leaf_certificate, standard_leaf_invariance, vj_angle_decay
from .interp import InterpMeasure, nu_doubling_scan, qs_map, qs_ratio_scan, write_map_csv
from .kahane import (
    doubling_scan,
    entropy_dimension,
    five_ary_cascade,
    five_ary_measure,
    is_suitable,
    local_dimension_estimate,
    measure_rows,
)
from .leaves import count_children_of_size, enumerate_children_of_size
from .walk import first_depth_reaching, simulate, support_mass, write_trajectories


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    N: int = 6
    Q: int = 8
    eps: Fraction = Fraction(1, 20)
    alpha: Fraction = DEFAULT_ALPHA
    lam: Fraction = Fraction(1, 2)
    depth: Optional[int] = None
    size_floor: Fraction = pow3(-8)
    seed: Optional[int] = None
    paths: int = 10000
    max_steps: int = 300
    samples: int = 10000
    out: Optional[Path] = None
    format: str = "json"

    @property
    def params(self) -> Params:
        return Params(self.N, self.Q, self.eps)


_CASTS: dict[str, Callable[[str], Any]] = {
    "N": int,
    "Q": int,
    "eps": Fraction,
    "alpha": Fraction,
    "lam": Fraction,
    "depth": int,
    "size_floor": Fraction,
    "seed": int,
    "paths": int,
    "max_steps": int,
    "samples": int,
    "out": Path,
    "format": str,
}
_ALIASES = {"lambda": "lam", "epsilon": "eps", "size-floor": "size_floor", "max-steps": "max_steps"}


def _set(cfg: Config, key: str, raw: str) -> None:
    key = _ALIASES.get(key, key)
    if key not in _CASTS:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        setattr(cfg, key, _CASTS[key](raw))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def load_config_file(path: Path, cfg: Config) -> None:
    """Flat key=value lines; '#' starts a comment."""
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        _set(cfg, key, raw)


def _parse_params(text: str, cfg: Config) -> None:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError("--params takes N,Q,eps")
    _set(cfg, "N", parts[0])
    _set(cfg, "Q", parts[1])
    _set(cfg, "eps", parts[2])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path)
    common.add_argument("--depth", type=str)
    common.add_argument("--size-floor", dest="size_floor", type=str)
    common.add_argument("--params", type=str, help="N,Q,eps")
    common.add_argument("--alpha", type=str)
    common.add_argument("--lambda", dest="lam", type=str)
    common.add_argument("--paths", type=str)
    common.add_argument("--max-steps", dest="max_steps", type=str)
    common.add_argument("--samples", type=str)
    common.add_argument("--seed", type=str)
    common.add_argument("--out", type=str)
    common.add_argument("--format", choices=["json", "csv"])
    parser = argparse.ArgumentParser(prog="cantor-cascade", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("model5", "five-interval model: doubling, masses, dimension"),
        ("cantor", "Whitney-tree grid: Whitney identity, suitability, counts"),
        ("expect", "exact first and second moments per vertex class"),
        ("walk", "Monte Carlo walk: hitting and running means"),
        ("support", "exact masses of the infinity-vertex support sets"),
        ("interp", "interpolated measure, cumulative map, ratio scans"),
        ("harmonic", "half-plane angle certificates and band decay"),
        ("export", "grid, measure and map tables"),
    ]:
        p = sub.add_parser(name, parents=[common], help=helptext)
        if name == "model5":
            p.add_argument("--dimension", action="store_true")
    return parser


def resolve_config(ns: argparse.Namespace) -> Config:
    cfg = Config()
    if ns.config is not None:
        if not ns.config.exists():
            raise ConfigError(f"config file {ns.config} not found")
        load_config_file(ns.config, cfg)
    if ns.params:
        _parse_params(ns.params, cfg)
    for key in ("depth", "size_floor", "alpha", "lam", "paths", "max_steps", "samples", "seed", "out", "format"):
        value = getattr(ns, key, None)
        if value is not None:
            _set(cfg, key, value)
    if cfg.format not in ("json", "csv"):
        raise ConfigError("format must be json or csv")
    if not 0 <= cfg.lam <= 1:
        raise ConfigError("lambda must lie in [0, 1]")
    if not 0 < cfg.alpha <= Fraction(1, 2):
        raise ConfigError("alpha must lie in (0, 1/2]")
    if cfg.size_floor <= 0:
        raise ConfigError("size floor must be positive")
    cfg.params  # validates the parameter invariants
    return cfg


def _jsonable(x: Any) -> Any:
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else x.numerator
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Path):
        return str(x)
    return x


@dataclass
class Report:
    command: str
    checks: dict[str, bool] = field(default_factory=dict)
    data: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def as_dict(self) -> dict:
        return _jsonable({"command": self.command, "ok": self.ok, "checks": self.checks, "data": self.data})


def _need_seed(cfg: Config) -> int:
    if cfg.seed is None:
        raise ConfigError("this command is stochastic; --seed is required")
    return cfg.seed


def _depth(cfg: Config, default: int, minimum: int = 1) -> int:
    d = default if cfg.depth is None else cfg.depth
    if d < minimum:
        raise ConfigError(f"depth must be at least {minimum}")
    return d


# ---------------------------------------------------------------------------
# commands


def cmd_model5(cfg: Config, dimension: bool = False) -> Report:
    depth = _depth(cfg, 8)
    rep = Report("model5")
    m = five_ary_measure(depth)
    res = doubling_scan(m, depth, "aligned")
    rep.data["doubling_max"] = res.ratio
    rep.data["doubling_pair"] = res.pair
    rep.data["layer1_masses"] = m.masses(1)
    rep.checks["doubling_max_is_4"] = res.ratio == 4
    rep.checks["mass_conserved"] = all(m.total(d) == 1 for d in range(depth + 1))
    if dimension:
        seed = _need_seed(cfg)
        est = local_dimension_estimate(five_ary_cascade(), max(depth, 12), cfg.samples, seed)
        target = entropy_dimension([v / 5 for v in (1, Fraction(1, 2), 2, Fraction(1, 2), 1)], 5)
        rep.data["dimension"] = {"mean": est.mean, "stderr": est.stderr, "entropy_value": target}
        rep.checks["dimension_within_0.02"] = abs(est.mean - target) <= 0.02
    _write(cfg, rep)
    return rep


def cmd_cantor(cfg: Config) -> Report:
    depth = _depth(cfg, 3)
    params = cfg.params
    rep = Report("cantor")
    whitney_ok = suitable_ok = True
    standard_certs = set()
    nodes = 0
    for node in iter_tree(params, depth, cfg.size_floor):
        nodes += 1
        w = node.whitney
        if w.kind == STANDARD:
            g = w.geometry
            whitney_ok &= g.length == 2 * min(dist_to_cantor(g.lo), dist_to_cantor(g.hi))
        if node.depth < depth:
            F = density(node, params)
            cert = is_suitable(F)
            suitable_ok &= bool(cert)
            if w.kind == STANDARD:
                standard_certs.add((F.delta, F.eta))
    counts_ok = True
    J = standard(Gap(1, 1), params.N + 1, params.N)
    for k in range(1, 11):
        counts_ok &= count_children_of_size(J, k) == len(enumerate_children_of_size(J, params.whitney, k))
    rep.data.update(
        nodes=nodes,
        standard_certificates=sorted(standard_certs),
        standard_delta=standard_delta(params),
    )
    rep.checks.update(
        whitney_identity=whitney_ok,
        suitability=suitable_ok,
        uniform_standard_certificate=len(standard_certs) <= 1,
        delta_at_least_half_eps=standard_delta(params) >= params.eps / 2,
        counts_match_enumeration=counts_ok,
    )
    _write(cfg, rep)
    return rep


def expectation_table(params: Params, central_levels: range = range(1, 7)) -> tuple[list[dict], Fraction, Fraction]:
    """Moment enclosures per class; returns rows, c1 (min lower bound over
    the classes visited after the first jump) and the c2 bound."""
    rows = []
    classes: list[tuple[str, Any]] = [("standard", "standard"), ("post-hit", "post-hit"), ("infinity", "infinity")]
    for lv in central_levels:
        g = next(gg for gg in _gaps_at(lv))
        classes.append((f"central@{lv}", central(g, params.N)))
    c1 = None
    c2 = second_moment_bound(params)
    for name, cls in classes:
        first = expectation_exact(cls, params)
        second = second_moment_exact(cls, params)
        rows.append({"class": name, "EX": [first.lo, first.hi], "EX2": [second.lo, second.hi]})
        if name != "infinity":
            c1 = first.lo if c1 is None else min(c1, first.lo)
    return rows, c1, c2


def _gaps_at(level: int):
    for lv, r in gaps(level):
        if lv == level:
            yield Gap(lv, int(r.lo * 3**lv))


def cmd_expect(cfg: Config) -> Report:
    params = cfg.params
    rep = Report("expect")
    rows, c1, c2 = expectation_table(params)
    rep.data.update(table=rows, c1=c1, c2_bound=c2)
    rep.checks["c1_positive"] = c1 > 0
    rep.checks["second_moment_within_bound"] = all(Fraction(r["EX2"][1]) <= c2 for r in rows)
    _write(cfg, rep)
    return rep


def cmd_walk(cfg: Config) -> Report:
    params = cfg.params
    seed = _need_seed(cfg)
    rep = Report("walk")
    trajectories: Optional[list] = [] if cfg.out is not None and cfg.format == "csv" else None
    stats = simulate(None, params, cfg.paths, cfg.max_steps, True, seed, trajectories=trajectories)
    _, c1, _ = expectation_table(params, range(1, 3))
    rep.data.update(stats.summary())
    rep.data["c1"] = c1
    rep.checks["hit_fraction_at_least_0.999"] = stats.hit_fraction >= 0.999
    lo = min(50, cfg.max_steps)
    rep.checks["running_mean_at_least_half_c1"] = bool(stats.mean_sk_over_k[lo:].min() >= float(c1) / 2)
    if trajectories is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        write_trajectories(cfg.out / "trajectories.csv", trajectories[:1000])
    _write(cfg, rep)
    return rep


def cmd_support(cfg: Config) -> Report:
    params = cfg.params
    depth = _depth(cfg, 6)
    rep = Report("support")
    rows = support_mass(depth, params, cfg.lam, Fraction(1, 30000))
    rep.data["rows"] = [r.as_dict() for r in rows]
    star = first_depth_reaching(rows, Fraction(9, 10))
    rep.data["d_star"] = star.depth if star else None
    rep.checks["mu_nondecreasing"] = all(a.mu_lower <= b.mu_lower for a, b in zip(rows, rows[1:]))
    rep.checks["mu_reaches_0.9"] = star is not None
    rep.checks["support_length_at_most_0.2"] = star is not None and star.lebesgue <= Fraction(1, 5)
    half = cfg.lam
    rep.checks["nu_of_support_in_range"] = star is not None and (
        Fraction(9, 10) * half <= star.nu <= half + Fraction(1, 5) * (1 - half)
    )
    _write(cfg, rep, csv_rows=[r.as_dict() for r in rows])
    return rep


def cmd_interp(cfg: Config) -> Report:
    depth = _depth(cfg, 5)
    rep = Report("interp")
    m = five_ary_measure(max(depth, 1))
    nu = InterpMeasure(cfg.lam, m)
    f = qs_map(nu, depth)
    scan = qs_ratio_scan(f)
    dbl = nu_doubling_scan(nu, depth)
    rep.data.update(
        qs_ratio=scan.ratio, qs_at=(scan.x, scan.t), nu_doubling=dbl.nu_ratio, mu_doubling=dbl.mu_constant, bound=dbl.bound
    )
    rep.checks["nu_doubling_bound"] = dbl.ok
    rep.checks["map_increasing"] = all(a < b for a, b in zip(f.numerators, f.numerators[1:]))
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        write_map_csv(cfg.out / "qs_map.csv", f)
    _write(cfg, rep)
    return rep


def cmd_harmonic(cfg: Config) -> Report:
    params = cfg.params
    rep = Report("harmonic")
    sample = []
    for lv in range(1, 9):
        g = next(_gaps_at(lv))
        sample += [standard(g, params.N + 1, params.N), standard(g, -(params.N + 2), params.N)]
    cert = leaf_certificate(sample[0], params, cfg.alpha)
    rep.data["standard_certificate"] = cert
    rep.checks["standard_leaves_congruent"] = standard_leaf_invariance(params, sample, cfg.alpha)
    rep.checks["certificate_closed_form"] = cert == expected_standard_certificate(params, cfg.alpha)
    Jc = central(next(_gaps_at(5)), params.N)
    dec = vj_angle_decay(Jc, cfg.alpha, 20, params)
    rep.data["vj_ratios"] = list(dec.ratios)
    rep.checks["vj_ratio_at_most_2/5"] = dec.ok()
    _write(cfg, rep)
    return rep


def cmd_export(cfg: Config) -> Report:
    params = cfg.params
    depth = _depth(cfg, 2)
    rep = Report("export")
    out = cfg.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    grid = grid_dump(params, depth, cfg.size_floor)
    (out / "grid.json").write_text(json.dumps(grid))
    m = five_ary_measure(max(depth, 1))
    with open(out / "measure.csv", "w") as fh:
        fh.write("depth,lo,hi,mass_num,mass_den\n")
        for row in measure_rows(m):
            fh.write(",".join(str(v) for v in row) + "\n")
    write_map_csv(out / "qs_map.csv", qs_map(InterpMeasure(cfg.lam, m), max(depth, 1)))
    rep.data.update(grid_nodes=len(grid), files=["grid.json", "measure.csv", "qs_map.csv"])
    rep.checks["written"] = True
    return rep


def _write(cfg: Config, rep: Report, csv_rows: Optional[list[dict]] = None) -> None:
    if cfg.out is None:
        return
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / f"{rep.command}.json").write_text(json.dumps(rep.as_dict(), indent=2))
    if cfg.format == "csv" and csv_rows:
        keys = list(csv_rows[0])
        with open(cfg.out / f"{rep.command}.csv", "w") as fh:
            fh.write(",".join(keys) + "\n")
            for r in csv_rows:
                fh.write(",".join(str(r[k]) for k in keys) + "\n")


COMMANDS = {
    "cantor": cmd_cantor,
    "expect": cmd_expect,
    "walk": cmd_walk,
    "support": cmd_support,
    "interp": cmd_interp,
    "harmonic": cmd_harmonic,
    "export": cmd_export,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = resolve_config(ns)
        if ns.command == "model5":
            rep = cmd_model5(cfg, ns.dimension)
        else:
            rep = COMMANDS[ns.command](cfg)
    except ParamsError as exc:
        print(json.dumps({"error": "config", "invariant": exc.invariant, "message": str(exc)}), file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    print(json.dumps(rep.as_dict(), indent=2))
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
