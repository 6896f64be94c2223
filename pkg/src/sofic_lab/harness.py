"""Command-line interface, experiment driver, and report emission.

Everything the package can compute is reachable from the ``sofic-lab``
entry point; the heavier statistical checks are driven by JSON experiment
configs whose replicas run in a worker pool.  On-disk formats are JSON for
instances and configs and CSV for tabular results.  Two conventions hold
throughout: every run prints a "# params: ..." line echoing the seed,
stream, and the full parameter record, and every CSV file ends with the
same line as a footer comment, so any artifact can be reproduced from
itself.  Outputs are bit-identical for identical (config, seed).

Exit codes: 0 success, 2 validation error (bad flags, bad files, bad
parameter combinations), 3 scale refusal.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import mpmath as mp

from ._errors import ScaleRefusal
from .analytics import (
    core_fixed_point,
    degrees_from_offset,
    distance_rate_scan,
    dominant_type,
    pair_distance_rate,
    planted_distance_rate,
    proper_rate,
)
from .exact_count import (
    count_at_distance,
    count_equitable,
    count_proper,
    exact_equitable_first_moment,
    exact_first_moment,
    exact_planted_distance_moment,
)
from .group_model import (
    ModelParams,
    UniformHom,
    check_sofic,
    enumerate_uniform_homs,
    generator_pair_words,
    generator_words,
    uniform_hom_count,
)
from .hypergraph import Coloring, build_hypergraph, monochromatic_edge_count
from .samplers import RngState, sample_planted_hom, sample_uniform_hom
from .structure import core_decomposition, density_report, expansivity_scan, rigidity_violation_search
from .tree_markov import (
    Pattern,
    build_ball,
    core_density_estimate,
    count_proper_patterns,
    enumerate_proper_patterns,
    local_convergence_stat,
    local_pattern_census,
    single_edge_domain,
)

SCAN_CSV_HEADER = ("delta", "delta0", "psi0", "psi", "f_dk")

EXPERIMENT_KINDS = (
    "first-moment",
    "planted-distance",
    "density",
    "sofic",
    "local-convergence",
    "concentration",
)

ENUMERATION_AVERAGE_MAX_HOMS = 10_000
CONCENTRATION_THRESHOLDS = (Fraction(1, 20), Fraction(1, 10), Fraction(1, 5))
HISTOGRAM_BIN_WIDTH = Fraction(1, 40)


# ---------------------------------------------------------------------------
# formatting and file helpers


def _fmt(value, digits=17):
    """Render a number for text output: ints and Fractions verbatim, floats
    and mpf through mp.nstr with enough digits to round-trip."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, Fraction)):
        return str(value)
    text = mp.nstr(mp.mpf(value), digits, strip_zeros=True)
    if text in ("0.0", "-0.0"):
        return "0"
    return text


def _param_str(value):
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_param_str(v) for v in value)
    if isinstance(value, (float, mp.mpf)):
        return _fmt(value)
    return str(value)


def _params_line(record):
    return "# params: " + " ".join(
        "%s=%s" % (key, _param_str(value)) for key, value in record.items()
    )


def _announce(record):
    print(_params_line(record))


def _cell(value):
    """One CSV cell; exact values stay exact, None means an empty cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(target, header, rows, record):
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    target.write(_params_line(record) + "\n")


def _write_csv_path(path, header, rows, record):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as fh:
        _write_csv(fh, header, rows, record)


def _jsonable(value):
    """Summary values for json.dump: Fractions become strings, mpf floats."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, mp.mpf):
        return float(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _write_json(path, data):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_instance(hom, path=None, chi=None):
    """Write a homomorphism (and optionally its planted coloring) as JSON.

    The layout is the canonical instance schema {"n","k","d","images"},
    plus a "chi" bitstring when a coloring is given; readers that only
    want the homomorphism ignore the extra key.
    """
    data = hom.to_json_dict()
    if chi is not None:
        if len(chi) != hom.params.n:
            raise ValueError(
                "coloring length %d does not match n=%d" % (len(chi), hom.params.n)
            )
        data["chi"] = "".join(str(b) for b in chi)
    text = json.dumps(data) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text)
    return data


def load_instance(path):
    """Read an instance file back; returns (hom, chi or None)."""
    with open(path) as fh:
        data = json.load(fh)
    hom = UniformHom.from_json_dict(data)
    chi = Coloring.from_string(data["chi"]) if "chi" in data else None
    return hom, chi


def _resolve_chi(hom, chi_from_file, chi_arg):
    if chi_arg is not None:
        chi = Coloring.from_string(chi_arg)
        if len(chi) != hom.params.n:
            raise ValueError(
                "--chi has length %d but the instance has n=%d"
                % (len(chi), hom.params.n)
            )
        return chi
    if chi_from_file is not None:
        return chi_from_file
    raise ValueError("no coloring: the instance file has no \"chi\" and --chi was not given")


def _as_fraction(value):
    """Fractions from config values; floats go through str for readable ratios."""
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


# ---------------------------------------------------------------------------
# experiment configs


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a kind, its parameter dict, and an output prefix.

    ``output`` is a path prefix; the run writes <output>.csv (one row per
    replica) and <output>.json (the summary).  Replicas are either
    ``replicas`` with streams seed/(stream+i), or an explicit ``seeds``
    list for hand-picked replicas.
    """

    kind: str
    params: dict
    output: str

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(
                "unknown experiment kind %r; choose from %s"
                % (self.kind, ", ".join(EXPERIMENT_KINDS))
            )
        if not self.output:
            raise ValueError("experiment config needs a non-empty output prefix")
        if "seeds" in self.params and not list(self.params["seeds"]):
            raise ValueError("explicit seeds list must not be empty")
        if self.replicas < 1:
            raise ValueError("need at least 1 replica, got %d" % self.replicas)
        for key, value in self.params.items():
            if key.endswith("tolerance") and not value > 0:
                raise ValueError("%s must be positive, got %r" % (key, value))

    @property
    def replicas(self):
        if "seeds" in self.params:
            return len(list(self.params["seeds"]))
        return int(self.params.get("replicas", 0))

    def replica_states(self):
        stream = int(self.params.get("stream", 0))
        if "seeds" in self.params:
            return [RngState(int(s), stream) for s in self.params["seeds"]]
        seed = int(self.params.get("seed", 0))
        return [RngState(seed, stream + i) for i in range(self.replicas)]

    @classmethod
    def from_json_dict(cls, data):
        for key in ("kind", "output"):
            if key not in data:
                raise ValueError("experiment config is missing %r" % key)
        return cls(
            kind=data["kind"],
            params=dict(data.get("params", {})),
            output=data["output"],
        )


@dataclass(frozen=True)
class ExperimentResult:
    csv_path: str
    json_path: str
    summary: dict


def _model_params(params):
    return ModelParams(
        d=int(params["d"]), k=int(params["k"]), n=int(params["n"])
    )


def _replica_row(kind, params, state):
    """Compute one replica; returns a plain dict of row values.

    Top-level so a process pool can pickle it.
    """
    if kind == "first-moment":
        mparams = _model_params(params)
        hom = sample_uniform_hom(mparams, state)
        return {"z": count_proper(build_hypergraph(hom)).value}
    if kind == "planted-distance":
        mparams = _model_params(params)
        chi = Coloring.equitable_split(mparams.n)
        hom = sample_planted_hom(mparams, chi, state)
        graph = build_hypergraph(hom)
        delta = _as_fraction(params["delta"])
        return {"z_delta": count_at_distance(graph, chi, delta).value}
    if kind == "density":
        mparams = _model_params(params)
        chi = Coloring.equitable_split(mparams.n)
        hom = sample_planted_hom(mparams, chi, state)
        graph = build_hypergraph(hom)
        return {"density": density_report(graph, chi, int(params["level"]))}
    if kind == "sofic":
        mparams = _model_params(params)
        hom = sample_uniform_hom(mparams, state)
        words = generator_words(mparams) + generator_pair_words(mparams)
        report = check_sofic(hom, words, _as_fraction(params.get("delta", "1/10")))
        return {
            "mult_fraction": report.mult_fraction,
            "trace_fraction": report.trace_fraction,
            "is_sofic": report.is_sofic,
        }
    if kind == "local-convergence":
        mparams = _model_params(params)
        chi = Coloring.equitable_split(mparams.n)
        hom = sample_planted_hom(mparams, chi, state)
        domain = single_edge_domain(
            ModelParams(d=mparams.d, k=mparams.k, n=mparams.k),
            label=int(params.get("edge_label", 0)),
        )
        census = local_pattern_census(hom, chi, domain)
        target = Fraction(1, count_proper_patterns(domain))
        deviation = max(
            abs(census.frequency(p) - target)
            for p in enumerate_proper_patterns(domain)
        )
        return {
            "max_deviation": deviation,
            "improper_fraction": census.improper_fraction(),
        }
    raise ValueError("no per-replica row for kind %r" % kind)


def _replica_worker(task):
    kind, params, index, seed, stream = task
    try:
        return index, _replica_row(kind, params, RngState(seed, stream)), None
    except (ScaleRefusal, ValueError) as exc:
        return index, None, "%s: %s" % (type(exc).__name__, exc)


_ROW_FIELDS = {
    "first-moment": ("z",),
    "planted-distance": ("z_delta",),
    "density": ("density",),
    "sofic": ("mult_fraction", "trace_fraction", "is_sofic"),
    "local-convergence": ("max_deviation", "improper_fraction"),
}


def _run_replicas(config, workers):
    states = config.replica_states()
    tasks = [
        (config.kind, config.params, i, s.seed, s.stream)
        for i, s in enumerate(states)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replica_worker, tasks))
    else:
        results = [_replica_worker(task) for task in tasks]
    results.sort(key=lambda item: item[0])
    return states, results


def _mean_stderr(values):
    """Sample mean and standard error as floats; exact mean when the values
    are Fractions is reported separately by the callers that need it."""
    m = len(values)
    floats = [float(v) for v in values]
    mean = math.fsum(floats) / m
    if m < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in floats) / (m - 1)
    return mean, math.sqrt(var / m)


def _enumeration_first_moment(params):
    total = 0
    homs = 0
    for hom in enumerate_uniform_homs(params):
        total += count_proper(build_hypergraph(hom)).value
        homs += 1
    return Fraction(total, homs)


def _enumeration_planted_distance(params, chi, delta):
    total = 0
    homs = 0
    for hom in enumerate_uniform_homs(params):
        graph = build_hypergraph(hom)
        if monochromatic_edge_count(graph, chi) != 0:
            continue
        total += count_at_distance(graph, chi, delta).value
        homs += 1
    if homs == 0:
        return None
    return Fraction(total, homs)


def _should_enumerate(config, mparams):
    flag = config.params.get("enumerate")
    if flag is not None:
        return bool(flag)
    return uniform_hom_count(mparams) <= ENUMERATION_AVERAGE_MAX_HOMS


def _moment_summary(config, rows, field, exact, enumeration):
    values = [row[field] for row in rows]
    mean, stderr = _mean_stderr(values)
    tolerance = config.params.get("mean_tolerance")
    within = None if tolerance is None else abs(mean - float(exact)) <= tolerance
    equal = None if enumeration is None else exact == enumeration
    return {
        "mean": mean,
        "stderr": stderr,
        "exact": exact,
        "exact_float": float(exact),
        "enumeration": enumeration,
        "exact_equals_enumeration": equal,
        "mean_within_tolerance": within,
        "pass": equal is not False and within is not False,
    }


def _density_summary(config, rows):
    params = config.params
    values = [row["density"] for row in rows]
    mean, stderr = _mean_stderr(values)
    mean_exact = sum(values, Fraction(0)) / len(values)
    tree_rng = RngState(
        int(params.get("seed", 0)),
        int(params.get("stream", 0)) + config.replicas,
    )
    estimate = core_density_estimate(
        d=int(params["d"]),
        k=int(params["k"]),
        level=int(params["level"]),
        samples=int(params.get("tree_samples", 100_000)),
        rng=tree_rng,
        use_colors=bool(params.get("use_colors", False)),
    )
    tree = float(estimate.rigid_frequency())
    combined = math.sqrt(stderr**2 + estimate.rigid_stderr() ** 2)
    sigma_tolerance = float(params.get("sigma_tolerance", 3))
    if combined == 0:
        passed = mean == tree
        sigma_distance = 0.0 if passed else None
    else:
        sigma_distance = abs(mean - tree) / combined
        passed = sigma_distance <= sigma_tolerance
    return {
        "mean": mean,
        "mean_exact": mean_exact,
        "stderr": stderr,
        "ci95": [mean - 1.96 * stderr, mean + 1.96 * stderr],
        "tree_rigid": tree,
        "tree_rigid_exact": estimate.rigid_frequency(),
        "tree_stderr": estimate.rigid_stderr(),
        "tree_core": estimate.core_frequency(),
        "tree_union": estimate.union_frequency(),
        "tree_samples": estimate.samples,
        "combined_stderr": combined,
        "sigma_distance": sigma_distance,
        "sigma_tolerance": sigma_tolerance,
        "pass": passed,
    }


def run_experiment(config, workers=1):
    """Run all replicas of one experiment and write the report files.

    Writes <output>.csv with one row per replica and <output>.json with
    the summary; a failed replica is flagged in its row's error column and
    excluded from the summary statistics, and the run continues.
    """
    if config.kind == "concentration":
        return _run_concentration(config)

    states, results = _run_replicas(config, workers)
    fields = _ROW_FIELDS[config.kind]
    csv_rows = []
    good_rows = []
    failures = 0
    for (index, row, error), state in zip(results, states):
        cells = [index, state.seed, state.stream]
        if row is None:
            failures += 1
            cells += [None] * len(fields) + [error]
        else:
            good_rows.append(row)
            cells += [row[f] for f in fields] + [None]
        csv_rows.append(cells)
    if not good_rows:
        raise ValueError("every replica failed; first error: %s" % csv_rows[0][-1])

    params = config.params
    if config.kind == "first-moment":
        mparams = _model_params(params)
        exact = exact_first_moment(mparams)
        enumeration = (
            _enumeration_first_moment(mparams)
            if _should_enumerate(config, mparams)
            else None
        )
        summary = _moment_summary(config, good_rows, "z", exact, enumeration)
    elif config.kind == "planted-distance":
        mparams = _model_params(params)
        chi = Coloring.equitable_split(mparams.n)
        delta = _as_fraction(params["delta"])
        exact = exact_planted_distance_moment(mparams, delta)
        enumeration = (
            _enumeration_planted_distance(mparams, chi, delta)
            if _should_enumerate(config, mparams)
            else None
        )
        summary = _moment_summary(config, good_rows, "z_delta", exact, enumeration)
    elif config.kind == "density":
        summary = _density_summary(config, good_rows)
    elif config.kind == "sofic":
        sofic_fraction = Fraction(
            sum(1 for row in good_rows if row["is_sofic"]), len(good_rows)
        )
        min_fraction = _as_fraction(params.get("min_fraction", "99/100"))
        summary = {
            "sofic_fraction": sofic_fraction,
            "min_fraction": min_fraction,
            "pass": sofic_fraction >= min_fraction,
        }
    elif config.kind == "local-convergence":
        mean, stderr = _mean_stderr([row["max_deviation"] for row in good_rows])
        tolerance = float(params.get("deviation_tolerance", 0.03))
        summary = {
            "mean_max_deviation": mean,
            "stderr": stderr,
            "deviation_tolerance": tolerance,
            "pass": mean <= tolerance,
        }
    else:
        raise AssertionError("unhandled kind %r" % config.kind)

    summary.update(
        kind=config.kind,
        params=dict(params),
        replicas=config.replicas,
        failures=failures,
    )
    record = {"kind": config.kind, **params, "output": config.output}
    csv_path = config.output + ".csv"
    json_path = config.output + ".json"
    header = ("replica", "seed", "stream") + fields + ("error",)
    _write_csv_path(csv_path, header, csv_rows, record)
    _write_json(json_path, summary)
    return ExperimentResult(csv_path, json_path, summary)


# ---------------------------------------------------------------------------
# the concentration probe


@dataclass(frozen=True)
class ConcentrationReport:
    """Empirical deviations of a 1-Lipschitz statistic over replicas.

    ``values`` are exact Fractions; the histogram bins f - mean at width
    1/40 and tail_fractions holds P(|f - mean| > delta) for the three
    standard thresholds.
    """

    params: ModelParams
    replicas: int
    values: tuple
    mean: Fraction
    deviations: tuple
    tail_fractions: tuple
    histogram: tuple


def _reference_hom(params):
    """The fixed comparison point: every generator is the same product of
    k-cycles on consecutive blocks."""
    params.require_uniform()
    image = []
    for block in range(params.n // params.k):
        base = block * params.k
        image.extend(base + (j + 1) % params.k for j in range(params.k))
    return UniformHom(params, [image] * params.d)


def _normalized_hom_distance(hom, ref):
    total = 0
    for img, ref_img in zip(hom.images, ref.images):
        total += sum(1 for a, b in zip(img, ref_img) if a != b)
    return Fraction(total, hom.params.d * hom.params.n)


def _deviation_histogram(deviations, width=HISTOGRAM_BIN_WIDTH):
    lo = math.floor(min(deviations) / width)
    hi = math.floor(max(deviations) / width) + 1
    counts = [0] * (hi - lo)
    for dev in deviations:
        counts[math.floor(dev / width) - lo] += 1
    return tuple(
        (float((lo + i) * width), count) for i, count in enumerate(counts)
    )


def concentration_probe(params, n, replicas, rng=None):
    """Sample the uniform model and record how a 1-Lipschitz statistic
    concentrates around its empirical mean.

    ``params`` supplies (d, k); ``n`` picks the scale.  The statistic is
    the per-generator Hamming distance to a fixed reference homomorphism,
    averaged over generators and normalized by n, which is 1-Lipschitz in
    the normalized distance on homomorphism tuples by construction.
    """
    if replicas < 1:
        raise ValueError("need at least 1 replica, got %d" % replicas)
    mparams = ModelParams(d=params.d, k=params.k, n=n)
    base = rng if rng is not None else RngState(0)
    ref = _reference_hom(mparams)
    values = []
    for i in range(replicas):
        hom = sample_uniform_hom(mparams, base.with_stream(base.stream + i))
        values.append(_normalized_hom_distance(hom, ref))
    mean = sum(values, Fraction(0)) / replicas
    deviations = tuple(v - mean for v in values)
    tails = tuple(
        (thr, Fraction(sum(1 for d in deviations if abs(d) > thr), replicas))
        for thr in CONCENTRATION_THRESHOLDS
    )
    return ConcentrationReport(
        params=mparams,
        replicas=replicas,
        values=tuple(values),
        mean=mean,
        deviations=deviations,
        tail_fractions=tails,
        histogram=_deviation_histogram(deviations),
    )


def _run_concentration(config):
    params = config.params
    mparams = _model_params(params)
    base = RngState(int(params.get("seed", 0)), int(params.get("stream", 0)))
    report = concentration_probe(mparams, mparams.n, config.replicas, rng=base)
    tail_tolerance = float(params.get("tail_tolerance", 0.05))
    tails = {str(float(thr)): frac for thr, frac in report.tail_fractions}
    widest = report.tail_fractions[-1][1]
    summary = {
        "kind": config.kind,
        "params": dict(params),
        "replicas": config.replicas,
        "failures": 0,
        "mean": report.mean,
        "mean_float": float(report.mean),
        "tails": tails,
        "histogram": [list(bin_) for bin_ in report.histogram],
        "tail_tolerance": tail_tolerance,
        "pass": float(widest) <= tail_tolerance,
    }
    csv_rows = [
        [i, base.seed, base.stream + i, value, deviation, None]
        for i, (value, deviation) in enumerate(zip(report.values, report.deviations))
    ]
    record = {"kind": config.kind, **params, "output": config.output}
    csv_path = config.output + ".csv"
    json_path = config.output + ".json"
    header = ("replica", "seed", "stream", "value", "deviation", "error")
    _write_csv_path(csv_path, header, csv_rows, record)
    _write_json(json_path, summary)
    return ExperimentResult(csv_path, json_path, summary)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_sample_uniform(args):
    params = ModelParams(d=args.d, k=args.k, n=args.n)
    _announce(
        {
            "command": "sample-uniform",
            "n": args.n,
            "k": args.k,
            "d": args.d,
            "seed": args.seed,
            "stream": args.stream,
            "output": args.output,
        }
    )
    hom = sample_uniform_hom(params, RngState(args.seed, args.stream))
    save_instance(hom, args.output)
    return 0


def _cmd_sample_planted(args):
    params = ModelParams(d=args.d, k=args.k, n=args.n)
    if args.chi is not None:
        chi = Coloring.from_string(args.chi)
        if len(chi) != args.n:
            raise ValueError("--chi has length %d but n=%d" % (len(chi), args.n))
    else:
        chi = Coloring.equitable_split(args.n)
    _announce(
        {
            "command": "sample-planted",
            "n": args.n,
            "k": args.k,
            "d": args.d,
            "chi": "".join(str(b) for b in chi),
            "seed": args.seed,
            "stream": args.stream,
            "output": args.output,
        }
    )
    hom = sample_planted_hom(params, chi, RngState(args.seed, args.stream))
    save_instance(hom, args.output, chi=chi)
    return 0


def _cmd_count(args):
    hom, chi = load_instance(args.input)
    if args.equitable and args.eps != 0:
        raise ValueError("--equitable counts proper colorings only; drop --eps")
    _announce(
        {
            "command": "count",
            "input": args.input,
            "n": hom.params.n,
            "k": hom.params.k,
            "d": hom.params.d,
            "eps": args.eps,
            "equitable": args.equitable,
            "seed": args.seed,
            "stream": args.stream,
        }
    )
    graph = build_hypergraph(hom)
    if args.equitable:
        report = count_equitable(graph)
    else:
        report = count_proper(graph, eps=args.eps)
    print(report.value)
    return 0


def _resolve_degree(args, need_d=True):
    """d from --d or --eta, plus the record entries explaining the choice."""
    if args.d is not None and args.eta is not None:
        raise ValueError("give either --d or --eta, not both")
    if args.eta is not None:
        choice = degrees_from_offset(args.k, Fraction(args.eta))
        return choice.d, {
            "eta": args.eta,
            "d": choice.d,
            "implied_eta": choice.implied_eta,
            "in_window": choice.in_window,
        }
    if args.d is None:
        if need_d:
            raise ValueError("this quantity needs --d or --eta")
        return None, {}
    return args.d, {"d": args.d}


def _cmd_analytic(args):
    record = {"command": "analytic", "quantity": args.quantity, "k": args.k}
    d, degree_record = _resolve_degree(args, need_d=args.quantity != "tstar")
    record.update(degree_record)
    if args.delta is not None:
        record["delta"] = args.delta
    if args.precision is not None:
        record["precision"] = args.precision
    record["seed"] = args.seed
    record["stream"] = args.stream
    if args.quantity == "scan":
        record["grid_points"] = args.grid_points
        record["output"] = args.output
    _announce(record)

    if args.quantity == "f":
        print(_fmt(proper_rate(d, args.k, precision=args.precision)))
        return 0
    if args.quantity in ("psi", "psi0"):
        if args.delta is None:
            raise ValueError("psi and psi0 need --delta")
        delta = Fraction(args.delta)
        if args.quantity == "psi":
            value = pair_distance_rate(delta, d, args.k, precision=args.precision)
        else:
            value = planted_distance_rate(delta, d, args.k, precision=args.precision)
        print(_fmt(value))
        return 0
    if args.quantity == "tstar":
        print(" ".join(str(t) for t in dominant_type(args.k)))
        return 0
    if args.quantity == "fixed-point":
        trace = core_fixed_point(d, args.k, precision=args.precision)
        print("p_inf=%s" % _fmt(trace.p_inf))
        print("mu_core=%s" % _fmt(trace.mu_core))
        print("mu_core_attached=%s" % _fmt(trace.mu_core_attached))
        print("levels=%d converged=%s" % (len(trace.p), _fmt(trace.converged)))
        return 0
    if args.quantity == "scan":
        scan = distance_rate_scan(
            d, args.k, grid_points=args.grid_points, precision=args.precision
        )
        rows = [
            (
                _fmt(r.delta),
                _fmt(r.delta0),
                _fmt(r.planted_rate),
                _fmt(r.pair_rate),
                _fmt(r.proper_rate),
            )
            for r in scan.rows
        ]
        if args.output is None:
            buffer = io.StringIO()
            _write_csv(buffer, SCAN_CSV_HEADER, rows, record)
            sys.stdout.write(buffer.getvalue())
        else:
            _write_csv_path(args.output, SCAN_CSV_HEADER, rows, record)
            print(
                "argmax_delta=%s max_rate=%s margin=%s"
                % (_fmt(scan.argmax_delta), _fmt(scan.max_rate), _fmt(scan.margin))
            )
        return 0
    raise AssertionError("unhandled quantity %r" % args.quantity)


def _cmd_core_density(args):
    if args.input is not None:
        hom, chi_file = load_instance(args.input)
        chi = _resolve_chi(hom, chi_file, args.chi)
        _announce(
            {
                "command": "core-density",
                "route": "finite",
                "input": args.input,
                "n": hom.params.n,
                "k": hom.params.k,
                "d": hom.params.d,
                "level": args.level,
                "seed": args.seed,
                "stream": args.stream,
            }
        )
        density = density_report(build_hypergraph(hom), chi, args.level)
        print("rigid_density=%s rigid_density_float=%s" % (density, _fmt(float(density))))
        return 0
    if args.d is None or args.k is None:
        raise ValueError("tree route needs --d and --k (or use --input)")
    _announce(
        {
            "command": "core-density",
            "route": "tree",
            "d": args.d,
            "k": args.k,
            "level": args.level,
            "samples": args.samples,
            "use_colors": args.use_colors,
            "seed": args.seed,
            "stream": args.stream,
        }
    )
    estimate = core_density_estimate(
        d=args.d,
        k=args.k,
        level=args.level,
        samples=args.samples,
        rng=RngState(args.seed, args.stream),
        use_colors=args.use_colors,
    )
    print(
        "rigid=%s rigid_float=%s stderr=%s"
        % (
            estimate.rigid_frequency(),
            _fmt(float(estimate.rigid_frequency())),
            _fmt(estimate.rigid_stderr()),
        )
    )
    print(
        "core=%s union=%s overlap=%d/%d"
        % (
            _fmt(float(estimate.core_frequency())),
            _fmt(float(estimate.union_frequency())),
            estimate.overlap_count,
            estimate.samples,
        )
    )
    return 0


def _cmd_expansivity(args):
    hom, chi_file = load_instance(args.input)
    chi = _resolve_chi(hom, chi_file, args.chi)
    _announce(
        {
            "command": "expansivity",
            "input": args.input,
            "n": hom.params.n,
            "k": hom.params.k,
            "d": hom.params.d,
            "t_max": args.t_max,
            "random_trials": args.random_trials,
            "seed": args.seed,
            "stream": args.stream,
        }
    )
    report = expansivity_scan(
        build_hypergraph(hom),
        chi,
        args.t_max,
        random_trials=args.random_trials,
        rng=RngState(args.seed, args.stream),
    )
    print(
        "exhaustive_max_excess=%d violations=%d exhaustive_cap=%d"
        % (
            report.exhaustive_max_excess,
            len(report.violations),
            report.exhaustive_cap,
        )
    )
    if args.random_trials:
        print(
            "random_max_excess=%s size_cap=%d"
            % (_param_str(report.random_max_excess), report.size_cap)
        )
    for witness in report.violations:
        print("violation=%s" % ",".join(str(v) for v in sorted(witness)))
    return 0


def _cmd_rigidity(args):
    hom, chi_file = load_instance(args.input)
    chi = _resolve_chi(hom, chi_file, args.chi)
    graph = build_hypergraph(hom)
    decomposition = core_decomposition(graph, chi)
    level = args.level
    if level is None:
        level = len(decomposition.levels) - 1
    region = decomposition.rigid_set(level)
    rho = Fraction(args.rho)
    _announce(
        {
            "command": "rigidity",
            "input": args.input,
            "n": hom.params.n,
            "k": hom.params.k,
            "d": hom.params.d,
            "level": level,
            "region_size": len(region),
            "rho": rho,
            "seed": args.seed,
            "stream": args.stream,
        }
    )
    witness = rigidity_violation_search(graph, chi, region, rho)
    if witness is None:
        print("violation=none")
    else:
        moved = sum(1 for v in region if witness[v] != chi[v])
        print(
            "violation=%s moved=%d"
            % ("".join(str(b) for b in witness), moved)
        )
    return 0


def _cmd_local_convergence(args):
    hom, chi_file = load_instance(args.input)
    chi = _resolve_chi(hom, chi_file, args.chi)
    params = hom.params
    tree_params = ModelParams(d=params.d, k=params.k, n=params.k)
    if args.radius is not None:
        domain = build_ball(tree_params, args.radius)
    else:
        domain = single_edge_domain(tree_params, label=args.edge_label)
    q = count_proper_patterns(domain)
    record = {
        "command": "local-convergence",
        "input": args.input,
        "n": params.n,
        "k": params.k,
        "d": params.d,
        "elements": len(domain),
        "q": q,
        "seed": args.seed,
        "stream": args.stream,
    }
    if args.pattern is not None:
        record["pattern"] = args.pattern
    _announce(record)
    if args.pattern is not None:
        bits = [int(c) for c in args.pattern]
        if len(bits) != len(domain):
            raise ValueError(
                "--pattern needs %d bits, got %d" % (len(domain), len(bits))
            )
        pattern = Pattern(dict(zip(domain.elements, bits)))
        frequency = local_convergence_stat(hom, chi, domain, pattern)
        target = Fraction(1, q)
        print(
            "frequency=%s cylinder=%s deviation=%s"
            % (frequency, target, _fmt(abs(frequency - target)))
        )
        return 0
    census = local_pattern_census(hom, chi, domain)
    target = Fraction(1, q)
    deviation = None
    if len(domain) <= 20:
        deviation = max(
            abs(census.frequency(p) - target)
            for p in enumerate_proper_patterns(domain)
        )
    print(
        "distinct=%d improper=%s noninjective=%d max_deviation=%s"
        % (
            len(census.counts),
            census.improper_fraction(),
            census.noninjective_count,
            _param_str(deviation if deviation is None else _fmt(deviation)),
        )
    )
    return 0


def _cmd_sofic_check(args):
    hom, _ = load_instance(args.input)
    params = hom.params
    if args.words == "generators":
        words = generator_words(params)
    elif args.words == "pairs":
        words = generator_pair_words(params)
    else:
        words = generator_words(params) + generator_pair_words(params)
    delta = Fraction(args.delta)
    _announce(
        {
            "command": "sofic-check",
            "input": args.input,
            "n": params.n,
            "k": params.k,
            "d": params.d,
            "words": args.words,
            "word_count": len(words),
            "delta": delta,
            "seed": args.seed,
            "stream": args.stream,
        }
    )
    report = check_sofic(hom, words, delta)
    print(
        "mult_fraction=%s trace_fraction=%s multiplicative=%s trace_preserving=%s sofic=%s"
        % (
            report.mult_fraction,
            report.trace_fraction,
            _fmt(report.is_multiplicative),
            _fmt(report.is_trace_preserving),
            _fmt(report.is_sofic),
        )
    )
    return 0


def _cmd_moments(args):
    params = ModelParams(d=args.d, k=args.k, n=args.n)
    record = {
        "command": "moments",
        "which": args.which,
        "n": args.n,
        "k": args.k,
        "d": args.d,
        "seed": args.seed,
        "stream": args.stream,
    }
    if args.which == "first":
        record["equitable"] = args.equitable
        _announce(record)
        if args.equitable:
            value = exact_equitable_first_moment(params)
        else:
            value = exact_first_moment(params)
    else:
        if args.delta is None:
            raise ValueError("planted-distance needs --delta")
        delta = Fraction(args.delta)
        record["delta"] = delta
        _announce(record)
        value = exact_planted_distance_moment(params, delta)
    print(value)
    return 0


def _cmd_experiment(args):
    with open(args.config) as fh:
        data = json.load(fh)
    config = ExperimentConfig.from_json_dict(data)
    _announce(
        {
            "command": "experiment",
            "config": args.config,
            "kind": config.kind,
            **config.params,
            "output": config.output,
            "workers": args.workers,
        }
    )
    result = run_experiment(config, workers=args.workers)
    print("wrote %s and %s" % (result.csv_path, result.json_path))
    print(
        "replicas=%d failures=%d pass=%s"
        % (
            result.summary["replicas"],
            result.summary["failures"],
            _fmt(bool(result.summary["pass"])),
        )
    )
    return 0


# ---------------------------------------------------------------------------
# parser wiring


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0, help="base RNG seed")
    parser.add_argument("--stream", type=int, default=0, help="RNG stream index")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sofic-lab",
        description=(
            "Sample, count, and numerically verify random uniform and planted "
            "homomorphisms into symmetric groups and the proper 2-colorings "
            "of their induced hypergraphs."
        ),
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("sample-uniform", help="sample the uniform model, emit JSON")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--output", default=None, help="path for the instance JSON; default stdout")
    _add_common(p)
    p.set_defaults(func=_cmd_sample_uniform)

    p = sub.add_parser("sample-planted", help="sample the planted model, emit JSON with chi")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--chi", default=None, help="planted coloring bits; default equitable split")
    p.add_argument("--output", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_sample_planted)

    p = sub.add_parser("count", help="count proper colorings of an instance")
    p.add_argument("--input", required=True, help="instance JSON path")
    p.add_argument("--eps", type=Fraction, default=Fraction(0), help="allowed monochromatic edge fraction")
    p.add_argument("--equitable", action="store_true", help="count proper equitable colorings instead")
    _add_common(p)
    p.set_defaults(func=_cmd_count)

    p = sub.add_parser("analytic", help="closed-form rates and fixed points")
    p.add_argument("quantity", choices=("f", "psi", "psi0", "tstar", "fixed-point", "scan"))
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--eta", default=None, help="offset; picks d = round(k 2^(k-1) (log2 - eta))")
    p.add_argument("--delta", default=None, help="distance for psi/psi0, a fraction like 1/2")
    p.add_argument("--grid-points", type=int, default=2001)
    p.add_argument("--precision", type=int, default=None, help="working precision bits")
    p.add_argument("--output", default=None, help="CSV path for scan; default stdout")
    _add_common(p)
    p.set_defaults(func=_cmd_analytic)

    p = sub.add_parser("core-density", help="rigid-set density, finite instance or tree Monte Carlo")
    p.add_argument("--input", default=None, help="instance JSON (finite route)")
    p.add_argument("--chi", default=None, help="coloring bits if the instance file lacks chi")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--use-colors", action="store_true", help="sample full colors instead of support positions")
    _add_common(p)
    p.set_defaults(func=_cmd_core_density)

    p = sub.add_parser("expansivity", help="scan small vertex sets for edge-count violations")
    p.add_argument("--input", required=True)
    p.add_argument("--chi", default=None)
    p.add_argument("--t-max", type=int, required=True)
    p.add_argument("--random-trials", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=_cmd_expansivity)

    p = sub.add_parser("rigidity", help="search for colorings moving a rigid region")
    p.add_argument("--input", required=True)
    p.add_argument("--chi", default=None)
    p.add_argument("--rho", required=True, help="disagreement threshold, a fraction like 1/10")
    p.add_argument("--level", type=int, default=None, help="peeling level; default deepest computed")
    _add_common(p)
    p.set_defaults(func=_cmd_rigidity)

    p = sub.add_parser("local-convergence", help="window census against the tree measure")
    p.add_argument("--input", required=True)
    p.add_argument("--chi", default=None)
    p.add_argument("--edge-label", type=int, default=0)
    p.add_argument("--radius", type=int, default=None, help="use a full ball instead of one edge")
    p.add_argument("--pattern", default=None, help="bits in domain order; report this cylinder only")
    _add_common(p)
    p.set_defaults(func=_cmd_local_convergence)

    p = sub.add_parser("sofic-check", help="multiplicativity and trace statistics on a word set")
    p.add_argument("--input", required=True)
    p.add_argument("--delta", default="1/10")
    p.add_argument("--words", choices=("generators", "pairs", "both"), default="both")
    _add_common(p)
    p.set_defaults(func=_cmd_sofic_check)

    p = sub.add_parser("moments", help="exact expected coloring counts")
    p.add_argument("which", choices=("first", "planted-distance"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--delta", default=None)
    p.add_argument("--equitable", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("experiment", help="run a JSON experiment config")
    p.add_argument("config", help="experiment config JSON path")
    p.add_argument("--workers", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=_cmd_experiment)

    return parser


def cli_dispatch(argv=None):
    """Parse and run one CLI invocation; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except ScaleRefusal as exc:
        print("scale refusal: %s" % exc, file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


def main():
    raise SystemExit(cli_dispatch())


if __name__ == "__main__":
    main()
