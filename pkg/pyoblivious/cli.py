import argparse
import os
import sys

from . import acceptance
from .analysis import mixing_sweep, sweep_schedules
from .config import client_parameters, read_json, workload_parameters
from .crypto import SessionRandom
from .errors import InvariantViolation, ObliviousStorageError
from .pricing import PricingModel, estimate_cost, estimate_time, request_counts
from .recursive import OsClient
from .server_store import load_annotations, load_trace
from .util import logger
from .workload import initial_items, run_workload

log = logger.getLog(f"{logger.LOG_NAME}.cli")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVARIANT = 2

def _overrides(args):
    """ Flag values that were given, under their parameter names. """
    names = {"n" : "N", "c" : "c", "passes" : "b", "item_size" : "item_size", "seed" : "seed", "top" : "top",
             "accesses" : "accesses"}
    return {name : getattr(args, flag) for flag, name in names.items() if getattr(args, flag, None) is not None}

def _client_config(args):
    parameters = client_parameters()
    if args.config:
        parameters.update(read_json(args.config))
    values = _overrides(args)
    values.pop("accesses", None)
    parameters.update(values)
    return parameters.values()

def cmd_build(args):
    config = _client_config(args)
    generator = SessionRandom(config["seed"]).spawn(1).generator
    client = OsClient(config, items=initial_items(config["N"], args.value_size, generator), verbose=args.verbose)
    storage = client.storage_report()

    print(f"built c={client.c} stack for N={client.N}, M={client.message_size}")
    for spec in client.specs:
        print(f"  level {spec.level}: {spec.n_items} items + {spec.epoch_length} dummies, cache {spec.cache} ({spec.cache_capacity})")
    print(f"  server items {storage['items']} (data {storage['data_items']}, overhead {storage['overhead_items']})")
    print(f"  build roundtrips {client.stats().roundtrips}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        client.serialize(to_json=os.path.join(args.out, "client.json"))
        client.store.export_trace(os.path.join(args.out, "trace.jsonl"))
        if args.diagram:
            client.render_diagram(filename=os.path.join(args.out, "layout"))
    return EXIT_OK

def cmd_run(args):
    parameters = workload_parameters()
    if args.config:
        parameters.update(read_json(args.config))
    if args.workload_file:
        parameters.update(read_json(args.workload_file))
    parameters.update(_overrides(args))

    pricing = PricingModel.load(args.pricing_file)
    report = run_workload(parameters, out=args.out, pricing=pricing, verbose=args.verbose)

    print(f"accesses            {report['accesses']}")
    print(f"minimum roundtrips  {report['minimum_roundtrips']}")
    print(f"amortized roundtrips {report['amortized_roundtrips']:.2f}")
    print(f"items per access    {report['amortized_items']:.1f}")
    print(f"rebuilds            {report['rebuilds']}")
    print(f"server items        {report['storage']['items']} (data {report['storage']['data_items']})")
    print(f"peak client items   {report['memory']['peak']}")
    print(f"cost                {report['cost']:.4f} {report['currency']} "
          f"(projected to N accesses: {report['projected_cost']:.2f})")
    if report["time"]:
        print(f"latency             min {report['time']['min_ms']:.0f} ms, "
              f"amortized {report['time']['amortized_ms']:.0f} ms")
    if report["oracle_mismatches"]:
        print(f"oracle mismatches   {report['oracle_mismatches']}")
        return EXIT_INVARIANT
    return EXIT_OK

def cmd_estimate_cost(args):
    pricing = PricingModel.load(args.pricing_file)
    trace = load_trace(args.trace)
    counts = request_counts(trace)
    total = estimate_cost(trace, pricing, args.item_size)
    print(", ".join(f"{kind} {n}" for kind, n in counts.items()))
    print(f"total {total:.6f} {pricing.currency}")
    return EXIT_OK

def cmd_estimate_time(args):
    pricing = PricingModel.load(args.pricing_file)
    trace = load_trace(args.trace)
    annotations = load_annotations(args.stats) if args.stats else None
    report = estimate_time(trace, pricing, args.item_size or 1024, args.parallel_width, annotations)
    print(f"messages {report['messages']}, total {report['total_ms']:.0f} ms")
    if report["accesses"]:
        print(f"accesses {report['accesses']}: min {report['min_ms']:.0f} ms, "
              f"online {report['online_ms']:.0f} ms, amortized {report['amortized_ms']:.0f} ms")
    return EXIT_OK

def cmd_mixing_sweep(args):
    n = args.n or 4096
    Ms = args.m or sweep_schedules(n)
    passes = args.passes_list or [1, 2, 3, 4, 5, 6]
    rng = SessionRandom(args.seed if args.seed is not None else -1)
    out = os.path.join(args.out, "mixing.csv") if args.out else None
    if out:
        os.makedirs(args.out, exist_ok=True)
    rows = mixing_sweep(n, Ms, passes, args.trials, rng, filename=out)

    for M in Ms:
        for b in passes:
            final = [r["max_weight"] for r in rows if r["M"] == M and r["passes"] == b and r["pass"] == b]
            print(f"M={M:5d} b={b}: mean max weight {n * sum(final) / len(final):.3f}/n")
    return EXIT_OK

def cmd_verify(args):
    results = acceptance.run_checks(seed=args.seed if args.seed is not None else 7, quick=not args.full)
    for result in results:
        print(f"[{'PASS' if result.passed else 'FAIL'}] {result.name}: {result.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ERROR

def build_parser():
    parser = argparse.ArgumentParser(prog="pyoblivious", description="Oblivious storage simulator and cost model.")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--n", type=int, help="number of items N")
        p.add_argument("--c", type=int, help="recursion depth")
        p.add_argument("--passes", type=int, help="buffer shuffle passes b")
        p.add_argument("--item-size", type=int, dest="item_size", help="server item size in bytes")
        p.add_argument("--seed", type=int, help="session seed, -1 for OS entropy")
        p.add_argument("--top", choices=["cuckoo", "square_root"], help="top layer layout")
        p.add_argument("--config", help="JSON construction config")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("build", help="build a client and report its layout")
    common(p)
    p.add_argument("--value-size", type=int, dest="value_size", default=16)
    p.add_argument("--diagram", action="store_true", help="render the memory layout with graphviz")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("run", help="replay a workload and report I/O, cost and latency")
    common(p)
    p.add_argument("--accesses", type=int)
    p.add_argument("--workload-file", dest="workload_file", help="JSON workload spec")
    p.add_argument("--pricing-file", dest="pricing_file")
    p.set_defaults(func=cmd_run)

    for name, func, helptext in (("estimate-cost", cmd_estimate_cost, "price a trace"),
                                 ("estimate-time", cmd_estimate_time, "estimate latency of a trace")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("trace", help="trace.jsonl file")
        p.add_argument("--stats", help="stats.json with access annotations")
        p.add_argument("--item-size", type=int, dest="item_size", default=1024)
        p.add_argument("--parallel-width", type=int, dest="parallel_width")
        p.add_argument("--pricing-file", dest="pricing_file")
        p.set_defaults(func=func)

    p = sub.add_parser("mixing-sweep", help="tracker weight sweep over M and b")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int, nargs="+")
    p.add_argument("--passes", type=int, nargs="+", dest="passes_list")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mixing_sweep)

    p = sub.add_parser("verify", help="run the desk-scale acceptance checklist")
    p.add_argument("--seed", type=int)
    p.add_argument("--full", action="store_true", help="full trial counts instead of the quick ones")
    p.set_defaults(func=cmd_verify)

    return parser

def main(argv=None):
    args = build_parser().parse_args(argv)
    logger.createLog(logger.LOG_NAME, level=logger.logging.DEBUG if args.verbose else logger.logging.INFO)
    try:
        return args.func(args)
    except InvariantViolation as err:
        log.error(f"invariant violated: {err}")
        return EXIT_INVARIANT
    except ObliviousStorageError as err:
        log.error(str(err))
        return EXIT_ERROR
    except OSError as err:
        log.error(f"could not read or write a file: {err}")
        return EXIT_ERROR

if __name__ == "__main__":
    sys.exit(main())
