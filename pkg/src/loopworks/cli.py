"""Command-line front end: ``loopworks <analyze|lerw|ust|soup|verify> ...``.

Reports are JSON (keys sorted, no timestamps) or CSV, and always embed the
configuration and seed, so the same inputs reproduce the same bytes.
"""

import argparse
import sys
from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np

from . import io
from .acceptance import CRITERIA
from .errors import DomainError, LoopworksError, UsageError
from .harness import empirical
from .lerw import MAX_ENUMERATION_INTERIOR, enumerate_lerw, sample_lerw
from .linops import greens_bundle, poisson_kernel
from .rng import DEFAULT_SEED, derive_seed, stream
from .soup import Flavor, elementary_mass, loop_measure, empty_soup_prob, sample_rooted_soup, sample_unrooted_soup, site_visit_stats
from .ust import MAX_ENUMERATION_VERTICES, count_spanning_trees, enumerate_spanning_trees, wilson_ust

COMMANDS = ("analyze", "lerw", "ust", "soup", "verify")
DEFAULT_SAMPLES = 10_000
DEFAULT_T = 1.0


@dataclass(frozen=True)
class RunConfig:
    command: str
    chain_path: str = None
    seed: int = DEFAULT_SEED
    samples: int = DEFAULT_SAMPLES
    t: float = None
    output: str = None
    format: str = "json"
    start: str = None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _nonnegative(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError("must be a nonnegative real")
    return value


def _build_parser():
    parser = _Parser(prog="loopworks", description="Loop-erased walks, spanning trees and loop soups on finite chains.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--chain", dest="chain_path", required=name != "verify")
        p.add_argument("--start")
        p.add_argument("--samples", type=_positive)
        p.add_argument("--seed", type=_u64, default=DEFAULT_SEED)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--output")
        if name == "soup":
            p.add_argument("--t", type=_nonnegative, default=DEFAULT_T)
    return parser


def parse_args(argv):
    """Validate ``argv`` into a :class:`RunConfig`; raises :class:`UsageError`."""
    ns = _build_parser().parse_args(list(argv))
    fields = vars(ns)
    if fields.get("samples") is None:
        fields.pop("samples", None)
    return RunConfig(**{k: v for k, v in fields.items() if v is not None or k == "chain_path"})


def _state(chain, text):
    """Resolve a command-line state name against the chain's ids."""
    for s in chain.states:
        if str(s) == text:
            return s
    raise DomainError(f"unknown state {text!r}")


def _key(s):
    return str(s)


def _analyze(config, chain):
    G = greens_bundle(chain)
    order = list(chain.interior)
    H = poisson_kernel(chain)
    result = {
        "interior": order,
        "boundary": list(chain.boundary_order),
        "L_A": io.matrix_to_dict(order, G.L_A),
        "G_A": io.matrix_to_dict(order, G.G_A),
        "det_G": G.det_G,
        "det_L": G.det_L,
        "log_det_G": G.log_det_G,
        "H_A": {"rows": order, "cols": list(H.cols), "values": [H.values[chain.index[x]].tolist() for x in order]},
        "f": {_key(x): elementary_mass(chain, x) for x in order},
    }
    return result, io.matrix_to_csv(order, G.G_A)


def _start(config, chain):
    if config.start is None:
        if not chain.interior:
            raise DomainError("chain has no interior states")
        return chain.interior[0]
    x = _state(chain, config.start)
    if not chain.is_interior(x):
        raise DomainError(f"{config.start!r} is not an interior state")
    return x


def _lerw(config, chain):
    x = _start(config, chain)
    rank = chain.index
    result = {"start": x}
    rows = None
    if len(chain.interior) <= MAX_ENUMERATION_INTERIOR:
        dist = enumerate_lerw(chain, x)
        result["exact"] = io.lerw_to_list(dist, rank)
        rows = result["exact"]
    emp = empirical(lambda rng: sample_lerw(chain, x, rng)[0], config.samples, config.seed)
    emp_rows = [{"saw": list(eta), "p": c / emp.N} for eta, c in emp.counts.items()]
    emp_rows.sort(key=lambda r: (-r["p"], [rank[v] for v in r["saw"]]))
    result["empirical"] = emp_rows
    rows = rows if rows is not None else emp_rows
    csv_text = "saw,p\n" + "".join(f"{' '.join(map(str, r['saw']))},{r['p']:.17g}\n" for r in rows)
    return result, csv_text


def _graph(config):
    return io.graph_from_dict(io.load_document(config.chain_path))


def _ust(config):
    g = _graph(config)
    nodes = list(g.nodes)
    rank = {v: k for k, v in enumerate(nodes)}
    root = nodes[0] if config.start is None else next((v for v in nodes if str(v) == config.start), None)
    if root is None:
        raise DomainError(f"unknown vertex {config.start!r}")
    count = count_spanning_trees(g, root)
    result = {"vertices": nodes, "root": root, "tree_count": count}
    if g.number_of_nodes() <= MAX_ENUMERATION_VERTICES:
        result["enumerated_count"] = len(enumerate_spanning_trees(g))
    emp = empirical(lambda rng: wilson_ust(g, root, None, rng).edges, config.samples, config.seed)
    freq = sorted(
        ([sorted(sorted(e, key=rank.__getitem__) for e in t), c / emp.N] for t, c in emp.counts.items()),
        key=lambda r: (-r[1], [[rank[v] for v in e] for e in r[0]]),
    )
    result["distinct_trees"] = len(freq)
    result["max_frequency_deviation"] = max(abs(f - 1 / count) for _, f in freq)
    result["frequencies"] = [{"edges": e, "freq": f} for e, f in freq]
    csv_text = "edges,freq\n" + "".join(
        f"{' '.join('-'.join(map(str, e)) for e in r['edges'])},{r['freq']:.17g}\n" for r in result["frequencies"]
    )
    return result, csv_text


def _soup(config, chain):
    t = config.t
    rng = stream(config.seed)
    rooted = [sample_rooted_soup(chain, t, rng) for _ in range(config.samples)]
    unrooted = sample_unrooted_soup(chain, t, stream(derive_seed(config.seed, 1)))
    classes = Counter()
    for r in rooted:
        classes.update(r.loops)
    interior = list(chain.interior)
    visits = []
    for x in interior:
        for w in interior:
            if w != x:
                v, e = site_visit_stats(chain, x, w, t)
                visits.append({"x": x, "w": w, "visit_prob": v, "expected_count": e})
    top = sorted(classes.items(), key=lambda kv: (-kv[1], len(kv[0]), [chain.index[s] for s in kv[0]]))[:50]
    result = {
        "t": t,
        "log_det_G": greens_bundle(chain).log_det_G,
        "empty_prob": empty_soup_prob(chain, t),
        "empirical_empty_prob": sum(r.is_empty() for r in rooted) / len(rooted),
        "site_visits": visits,
        "rooted_intensities": [
            {"loop": list(l), "mean_count": c / len(rooted), "expected": t * loop_measure(chain, l, Flavor.ROOTED)}
            for l, c in top
        ],
        "realization": io.soup_to_dict(unrooted),
    }
    csv_text = io.measure_to_csv((l, loop_measure(chain, l, Flavor.ROOTED)) for l, _ in top)
    return result, csv_text


def _verify(config):
    checks = []
    for k, fn in CRITERIA.items():
        kwargs = {"N": config.samples} if "N" in fn.__code__.co_varnames and config.samples != DEFAULT_SAMPLES else {}
        for r in fn(config.seed, **kwargs):
            d = r.to_dict()
            d["criterion"] = k
            checks.append(d)
    result = {"checks": checks, "passed": sum(c["pass"] for c in checks), "failed": sum(not c["pass"] for c in checks)}
    csv_text = "criterion,check,statistic,threshold,pass\n" + "".join(
        f"{c['criterion']},\"{c['check']}\",{c['statistic']:.17g},{c['threshold']:.17g},{c['pass']}\n" for c in checks
    )
    return result, csv_text, result["failed"] == 0


def run(config):
    """Execute ``config``; return ``(exit_code, report_text)``."""
    ok = True
    if config.command == "verify":
        result, csv_text, ok = _verify(config)
    elif config.command == "ust":
        result, csv_text = _ust(config)
    else:
        chain = io.load_chain(config.chain_path)
        if config.command == "analyze":
            result, csv_text = _analyze(config, chain)
        elif config.command == "lerw":
            result, csv_text = _lerw(config, chain)
        else:
            result, csv_text = _soup(config, chain)
    if config.format == "csv":
        text = csv_text
    else:
        text = io.dumps(_jsonable({"config": asdict(config), "seed": config.seed, "result": result}))
    return (0 if ok else 1), text


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_args(argv)
        code, text = run(config)
    except UsageError as exc:
        print(f"loopworks: usage error: {exc}", file=sys.stderr)
        return 2
    except (LoopworksError, OSError, ValueError) as exc:
        print(f"loopworks: error: {exc}", file=sys.stderr)
        return 1
    if config.output:
        with open(config.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
