"""Command-line interface.

Exit codes: 0 on success, 1 on invalid input, 2 on numerical failure.
Every stochastic subcommand requires ``--seed`` and is byte-deterministic in it.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, driver, io, network, regularized, sim
from .errors import NumericalError, ValidationError

log = logging.getLogger("netquant")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return io.fmt10(float(x))
    return str(x)


def _kv(path, items) -> None:
    io.store_key_values(path, [(k, _fmt(v)) for k, v in items])


def _catalog(args):
    return io.load_transcripts(args.transcripts)


def _network(path, catalog):
    return io.load_network(path, catalog) if path else None


# subcommands ----------------------------------------------------------------

def cmd_quant(args) -> None:
    cat = _catalog(args)
    compat = io.load_compat(args.compat, cat, args.read_length)
    if args.method == "base-em":
        state = driver.base_quant(cat, compat)
    else:
        net = _network(args.network, cat)
        if net is None:
            log.warning("no --network given; every prior is flat")
        if args.gene_order == "random" and args.seed is None:
            raise ValidationError("--gene-order random needs --seed")
        state = driver.net_rstq(cat, compat, net, lam=args.lam,
                                init=args.init.replace("-", "_"),
                                outer_tol=args.outer_tol, max_rounds=args.max_rounds,
                                seed=args.seed, gene_order=args.gene_order)
        if not state.converged:
            log.warning("stopped after %d rounds without converging", state.rounds)
        if args.trajectory:
            io.store_table(args.trajectory, ("round", "gene_id", "accepted", "objective"),
                           ((str(r), cat.gene_ids[g], _fmt(a), repr(float(v)))
                            for r, g, a, v in state.trajectory))
        if args.plot:
            from . import plotting
            plotting.plot_convergence(state.round_objective, args.plot, state.trajectory)
    io.store_quant(args.out, state)
    if args.report:
        items = [("method", args.method), ("transcripts", cat.n_transcripts),
                 ("genes", cat.n_genes), ("reads", compat.n_reads),
                 ("rounds", state.rounds), ("converged", state.converged)]
        if args.method == "net-rstq":
            items += [("lambda", args.lam)]
            items += [(f"objective_round_{k}", v) for k, v in enumerate(state.round_objective)]
        _kv(args.report, items)


def cmd_reg_quant(args) -> None:
    cat = _catalog(args)
    compat = io.load_compat(args.compat, cat, args.read_length)
    net = _network(args.network, cat)
    state = regularized.solve_penalized(cat, compat, net, args.lambda_reg,
                                        tol=args.tol, max_iter=args.max_iter)
    if state.stalled:
        log.warning("step size underflowed; returning best point found")
    elif not state.converged:
        log.warning("stopped after %d iterations without converging", state.rounds)
    io.store_quant(args.out, state)
    if args.plot:
        from . import plotting
        plotting.plot_objective(state.trajectory, args.plot)
    if args.report:
        _kv(args.report, [("lambda_reg", args.lambda_reg), ("iterations", state.rounds),
                          ("converged", state.converged), ("stalled", state.stalled),
                          ("objective", state.trajectory[-1])])


def cmd_build_network(args) -> None:
    cat = _catalog(args)
    net = network.build_network(cat, io.load_domains(args.domains), io.load_ddi(args.ddi))
    io.store_network(args.out, net)
    log.info("%d nodes, %d edges", net.n_nodes, net.n_edges)


def cmd_net_stats(args) -> None:
    cat = _catalog(args) if args.transcripts else None
    net = io.load_network(args.network, cat)
    stats = network.network_stats(net, paths=not args.no_paths)
    io.store_key_values(args.out, stats.rows())


def cmd_randomize(args) -> None:
    cat = _catalog(args)
    net = network.randomize_network(io.load_network(args.network, cat), args.seed)
    io.store_network(args.out, net)


def cmd_delete_edges(args) -> None:
    cat = _catalog(args) if args.transcripts else None
    net = network.delete_edges(io.load_network(args.network, cat), args.fraction, args.seed)
    io.store_network(args.out, net)


def cmd_synth(args) -> None:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cat = sim.synthetic_catalog(args.n_genes, args.seed)
    annot, ddi = sim.synthetic_domains(cat, args.seed, n_domains=args.n_domains)
    io.store_transcripts(out / "transcripts.tsv", cat)
    io.store_domains(out / "domains.tsv", annot)
    io.store_ddi(out / "ddi.tsv", ddi)


def cmd_simulate(args) -> None:
    cat = _catalog(args)
    net = _network(args.network, cat)
    truth = sim.generate_truth(cat, net, poisson_mean=args.poisson_mean,
                               sim_alpha=args.sim_alpha, noise_sigma=args.noise_sigma,
                               powerlaw_exponent=args.powerlaw_exponent, seed=args.seed)
    # a derived stream so truth and reads stay independent
    read_seed = int(np.random.SeedSequence([args.seed, 1]).generate_state(1)[0])
    compat = sim.sample_compat(truth, total_reads=args.total_reads,
                               read_length=args.read_length, overlap_model=args.overlap_model,
                               ambiguity=args.ambiguity, seed=read_seed)
    io.store_truth(args.truth_out, truth)
    io.store_compat(args.compat_out, compat)
    if args.expected_out:
        exp = sim.expected_expression(truth, args.total_reads, args.read_length)
        state_like = io.QuantTable(cat.transcript_ids,
                                   tuple(cat.gene_ids[g] for g in cat.gene_index),
                                   truth.p, _rho(truth), exp)
        io.store_quant(args.expected_out, state_like)


def _rho(truth):
    from .model import relative_abundance
    cat = truth.catalog
    out = np.empty_like(truth.p)
    for i in range(cat.n_genes):
        s = cat.gene_slice(i)
        out[s] = relative_abundance(truth.p[s], cat.lengths[s])
    return out


def _expression_matrix(args):
    if args.expr:
        ids, samples, values = io.load_matrix(args.expr)
    else:
        ids, samples, values = io.matrix_from_quants(args.quant)
    return ids, samples, values


def cmd_coexpress(args) -> None:
    cat = _catalog(args) if args.transcripts else None
    net = io.load_network(args.network, cat)
    ids, _, values = _expression_matrix(args)
    bins = analysis.coexpression_bins(values, ids, net, args.bin_size, args.distance)
    io.store_table(args.out, ("bin", "count", "baseline"),
                   ((str(k + 1), str(int(c)), _fmt(bins.baseline))
                    for k, c in enumerate(bins.counts)))
    items = [("bin_size", bins.bin_size), ("distance", bins.distance),
             ("total_pairs", bins.total_pairs), ("total_adjacent", bins.total_adjacent),
             ("density", bins.density), ("baseline", bins.baseline),
             ("complete_bins", bins.counts.size), ("remainder_pairs", bins.remainder_pairs),
             ("excluded_constant", len(bins.excluded))]
    top = min(args.top_bins, bins.counts.size)
    if top >= 1:
        res = analysis.chi_square_enrichment(bins.counts, top,
                                             (bins.total_pairs, bins.total_adjacent),
                                             bins.bin_size)
        if res.low_expected:
            log.warning("an expected cell count is below 5; the chi-square p-value is unreliable")
        (a, b), (c, d) = res.table
        items += [("top_bins", top), ("top_adjacent", a), ("top_other", b),
                  ("rest_adjacent", c), ("rest_other", d), ("chi_square", res.statistic),
                  ("p_value", res.p_value), ("low_expected", res.low_expected)]
    else:
        log.warning("no complete bin; enrichment test skipped")
    if args.report:
        _kv(args.report, items)
    if args.plot:
        from . import plotting
        plotting.plot_bins(bins, args.plot)


def _truth_expression(args, cat):
    """Expressions to compare against, in catalog order.

    A truth file is rescaled to expected reads per base so that it is on the
    estimate's scale; a quant file is used as is.
    """
    with open(args.truth, encoding="utf-8") as fh:
        is_truth = fh.readline().startswith("# ")
    if is_truth:
        truth = io.load_truth(args.truth, cat)
        return sim.expected_expression(truth, args.total_reads, args.read_length)
    return io.load_quant(args.truth).aligned(cat)


def cmd_compare(args) -> None:
    cat = _catalog(args)
    net = _network(args.network, cat)
    est = io.load_quant(args.estimate).aligned(cat)
    other = _truth_expression(args, cat)
    mask = analysis.subset_mask(cat, net, args.subset)
    r = analysis.compare_quant(est, other, mask)
    _kv(args.out, [("subset", args.subset), ("transcripts", int(mask.sum())),
                   ("pearson_log2", r)])
    if args.plot:
        from . import plotting
        plotting.plot_scatter(est[mask], other[mask], args.plot, r)


def cmd_robustness(args) -> None:
    cat = _catalog(args)
    compat = io.load_compat(args.compat, cat, args.read_length)
    net = io.load_network(args.network, cat)
    truth = _truth_expression(args, cat)
    if args.mode == "randomize":
        rows = analysis.randomized_network_study(cat, compat, net, truth, args.n_networks,
                                                 args.seed, args.lam, args.subset)
    else:
        rows = analysis.edge_deletion_study(cat, compat, net, truth, args.fractions,
                                            args.seed, args.lam, args.subset)
    io.store_table(args.out, ("label", "seed", "edges", "rounds", "pearson_log2"),
                   ((r.label, "" if r.seed is None else str(r.seed), str(r.edges),
                     str(r.rounds), _fmt(r.correlation)) for r in rows))
    if args.plot:
        from . import plotting
        plotting.plot_study(rows, args.plot)


# parser ---------------------------------------------------------------------

def _add_catalog(p, required=True):
    p.add_argument("--transcripts", required=required, metavar="PATH",
                   help="transcripts.tsv (transcript_id, gene_id, length)")


def _add_reads(p):
    p.add_argument("--compat", required=True, metavar="PATH", help="compat.tsv")
    p.add_argument("--read-length", type=int, default=sim.READ_LENGTH, metavar="N",
                   help="read length used to compute sampling probabilities (default %(default)s)")


def _add_truth(p):
    p.add_argument("--truth", required=True, metavar="PATH",
                   help="truth.tsv from simulate, or another quant.tsv")
    p.add_argument("--total-reads", type=int, default=sim.TOTAL_READS, metavar="N",
                   help="reads simulated from a truth.tsv (default %(default)s)")


def _fraction(s: str) -> float:
    v = float(s)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"fraction must be in [0, 1], got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="netquant",
        description="Isoform quantification with transcript-network Dirichlet priors.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("quant", help="estimate isoform proportions")
    _add_catalog(p)
    _add_reads(p)
    p.add_argument("--method", choices=("base-em", "net-rstq"), default="net-rstq")
    p.add_argument("--lambda", dest="lam", type=float, default=driver.DEFAULT_LAMBDA,
                   help="prior weight (default %(default)s)")
    p.add_argument("--network", metavar="PATH")
    p.add_argument("--init", choices=("uniform", "base-em"), default="base-em")
    p.add_argument("--outer-tol", type=float, default=driver.OUTER_TOL)
    p.add_argument("--max-rounds", type=int, default=driver.MAX_ROUNDS)
    p.add_argument("--gene-order", choices=("fixed", "random"), default="fixed")
    p.add_argument("--seed", type=int, help="needed only with --gene-order random")
    p.add_argument("--out", required=True, metavar="PATH", help="quant.tsv")
    p.add_argument("--trajectory", metavar="PATH", help="objective after every gene update")
    p.add_argument("--report", metavar="PATH", help="run summary")
    p.add_argument("--plot", metavar="PATH", help="convergence figure")
    p.set_defaults(func=cmd_quant)

    p = sub.add_parser("reg-quant", help="estimate with a network smoothness penalty")
    _add_catalog(p)
    _add_reads(p)
    p.add_argument("--network", metavar="PATH")
    p.add_argument("--lambda-reg", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=20000)
    p.add_argument("--out", required=True, metavar="PATH")
    p.add_argument("--report", metavar="PATH")
    p.add_argument("--plot", metavar="PATH", help="objective trace figure")
    p.set_defaults(func=cmd_reg_quant)

    p = sub.add_parser("build-network", help="network from domains and domain interactions")
    _add_catalog(p)
    p.add_argument("--domains", required=True, metavar="PATH")
    p.add_argument("--ddi", required=True, metavar="PATH")
    p.add_argument("--out", required=True, metavar="PATH")
    p.set_defaults(func=cmd_build_network)

    p = sub.add_parser("net-stats", help="network summary statistics")
    _add_catalog(p, required=False)
    p.add_argument("--network", required=True, metavar="PATH")
    p.add_argument("--no-paths", action="store_true", help="skip clustering and diameter")
    p.add_argument("--out", default="-", metavar="PATH")
    p.set_defaults(func=cmd_net_stats)

    p = sub.add_parser("randomize", help="label-permuted network")
    _add_catalog(p)
    p.add_argument("--network", required=True, metavar="PATH")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, metavar="PATH")
    p.set_defaults(func=cmd_randomize)

    p = sub.add_parser("delete-edges", help="remove a random fraction of edges")
    _add_catalog(p, required=False)
    p.add_argument("--network", required=True, metavar="PATH")
    p.add_argument("--fraction", type=_fraction, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, metavar="PATH")
    p.set_defaults(func=cmd_delete_edges)

    p = sub.add_parser("synth", help="random catalog, domains and domain interactions")
    p.add_argument("--n-genes", type=int, default=100)
    p.add_argument("--n-domains", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True, metavar="DIR")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="ground truth and read compatibilities")
    _add_catalog(p)
    p.add_argument("--network", metavar="PATH")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--poisson-mean", type=float, default=sim.POISSON_MEAN)
    p.add_argument("--sim-alpha", type=float, default=sim.SIM_ALPHA)
    p.add_argument("--noise-sigma", type=float, default=None,
                   help="default: a tenth of the Poisson mean")
    p.add_argument("--powerlaw-exponent", type=float, default=sim.POWERLAW_EXPONENT)
    p.add_argument("--total-reads", type=int, default=sim.TOTAL_READS)
    p.add_argument("--read-length", type=int, default=sim.READ_LENGTH)
    p.add_argument("--overlap-model", choices=("exclusive", "shared_prefix"),
                   default="shared_prefix")
    p.add_argument("--ambiguity", type=_fraction, default=0.5)
    p.add_argument("--truth-out", required=True, metavar="PATH")
    p.add_argument("--compat-out", required=True, metavar="PATH")
    p.add_argument("--expected-out", metavar="PATH",
                   help="truth as a quant.tsv on the estimate's scale")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("coexpress", help="co-expression bins and enrichment test")
    _add_catalog(p, required=False)
    p.add_argument("--network", required=True, metavar="PATH")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--expr", metavar="PATH", help="matrix: transcript_id then samples")
    src.add_argument("--quant", nargs="+", metavar="PATH", help="quant.tsv per sample")
    p.add_argument("--bin-size", type=int, default=1000)
    p.add_argument("--distance", type=int, choices=(1, 2), default=1)
    p.add_argument("--top-bins", type=int, default=10)
    p.add_argument("--out", required=True, metavar="PATH", help="bins.tsv")
    p.add_argument("--report", metavar="PATH")
    p.add_argument("--plot", metavar="PATH")
    p.set_defaults(func=cmd_coexpress)

    p = sub.add_parser("compare", help="log-scale correlation of two quantifications")
    _add_catalog(p)
    p.add_argument("--network", metavar="PATH", help="needed for subset different_neighbors")
    p.add_argument("--estimate", required=True, metavar="PATH")
    _add_truth(p)
    p.add_argument("--read-length", type=int, default=sim.READ_LENGTH)
    p.add_argument("--subset", choices=analysis.SUBSETS, default="all")
    p.add_argument("--out", default="-", metavar="PATH")
    p.add_argument("--plot", metavar="PATH")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("robustness", help="accuracy under randomized or thinned networks")
    _add_catalog(p)
    _add_reads(p)
    p.add_argument("--network", required=True, metavar="PATH")
    _add_truth(p)
    p.add_argument("--mode", choices=("randomize", "delete"), required=True)
    p.add_argument("--n-networks", type=int, default=100)
    p.add_argument("--fractions", type=_fraction, nargs="+", default=[0, 0.25, 0.5, 0.75, 0.95])
    p.add_argument("--lambda", dest="lam", type=float, default=driver.DEFAULT_LAMBDA)
    p.add_argument("--subset", choices=analysis.SUBSETS, default="different_neighbors")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, metavar="PATH")
    p.add_argument("--plot", metavar="PATH")
    p.set_defaults(func=cmd_robustness)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except (ValidationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
