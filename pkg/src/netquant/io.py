"""Tab-separated file formats.

Every loader checks the header, validates rows and reports the file and line
of the first problem. Every store writes UTF-8 with LF line endings and is
byte-deterministic: rows follow catalog order where order carries meaning and
are sorted otherwise.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import FormatError, ValidationError
from .model import (
    CompatibilitySet,
    QuantState,
    ReadCompat,
    SimTruth,
    TranscriptCatalog,
    TranscriptNetwork,
    sampling_probability,
)
from .network import DDITable, DomainAnnotation

TRANSCRIPTS_HEADER = ("transcript_id", "gene_id", "length")
NETWORK_HEADER = ("transcript_a", "transcript_b")
DOMAINS_HEADER = ("transcript_id", "domain_id")
DDI_HEADER = ("domain_a", "domain_b")
COMPAT_HEADER = ("gene_id", "read_id", "compat_transcripts")
QUANT_HEADER = ("transcript_id", "gene_id", "p", "rho", "pi")
TRUTH_HEADER = ("transcript_id", "gene_id", "gene_expression", "p_init", "p", "pi",
                "pi_normalized")


def fmt10(x: float) -> str:
    """Ten significant digits."""
    return f"{x:.10g}"


def _rows(path, header: Sequence[str], optional: Sequence[str] = ()) -> Iterator[tuple[int, list[str]]]:
    """Yield ``(line_number, fields)`` after checking the header.

    ``optional`` names trailing columns that may be present; rows must then
    have either the base or the extended width.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first:
            raise FormatError(path, 1, "missing header")
        cols = tuple(first.rstrip("\n").split("\t"))
        allowed = [tuple(header) + tuple(optional[:k]) for k in range(len(optional) + 1)]
        if cols not in allowed:
            raise FormatError(path, 1, f"expected header {' | '.join(header)}, got {' | '.join(cols)}")
        width = len(cols)
        for n, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                raise FormatError(path, n, "empty line")
            fields = line.split("\t")
            if len(fields) != width:
                raise FormatError(path, n, f"expected {width} fields, got {len(fields)}")
            yield n, fields


def _write(path, header: Sequence[str], rows: Iterable[Sequence[str]], preamble: str = "") -> None:
    """Write a table; ``path`` ``"-"`` means standard output."""
    if str(path) == "-":
        _emit(sys.stdout, header, rows, preamble)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        _emit(fh, header, rows, preamble)


def _emit(fh, header, rows, preamble):
    fh.write(preamble)
    fh.write("\t".join(header) + "\n")
    for r in rows:
        fh.write("\t".join(r) + "\n")


def _nonempty(path, n, value, what):
    if not value:
        raise FormatError(path, n, f"empty {what}")
    return value


# transcripts ---------------------------------------------------------------

def load_transcripts(path) -> TranscriptCatalog:
    rows = []
    seen: dict[str, int] = {}
    for n, (tid, gid, length) in _rows(path, TRANSCRIPTS_HEADER):
        _nonempty(path, n, tid, "transcript id")
        _nonempty(path, n, gid, "gene id")
        if tid in seen:
            raise FormatError(path, n, f"duplicate transcript id {tid} (first on line {seen[tid]})")
        seen[tid] = n
        try:
            ln = int(length)
        except ValueError:
            raise FormatError(path, n, f"length {length!r} is not an integer") from None
        if ln < 1:
            raise FormatError(path, n, f"length {ln} < 1")
        rows.append((tid, gid, ln))
    return TranscriptCatalog.from_rows(rows)


def store_transcripts(path, catalog: TranscriptCatalog) -> None:
    _write(path, TRANSCRIPTS_HEADER,
           ((t.transcript_id, g.gene_id, str(t.length)) for g in catalog.genes for t in g.transcripts))


# network -------------------------------------------------------------------

def load_network(path, catalog: TranscriptCatalog | None = None) -> TranscriptNetwork:
    """Edges, one per line. With a catalog, every catalog transcript becomes a
    node and endpoints are checked against it; otherwise nodes are the
    endpoints."""
    edges, tiers = [], {}
    seen = {}
    for n, fields in _rows(path, NETWORK_HEADER, ("tier",)):
        a, b = fields[0], fields[1]
        _nonempty(path, n, a, "transcript id")
        _nonempty(path, n, b, "transcript id")
        if a == b:
            raise FormatError(path, n, f"self-loop on {a}")
        if catalog is not None:
            for t in (a, b):
                if not catalog.has_transcript(t):
                    raise FormatError(path, n, f"unknown transcript {t}")
            if catalog.gene_of(a) == catalog.gene_of(b):
                raise FormatError(path, n, f"edge {a}-{b} joins transcripts of one gene")
        e = (a, b) if a < b else (b, a)
        if e in seen:
            raise FormatError(path, n, f"duplicate edge {a}-{b} (first on line {seen[e]})")
        seen[e] = n
        edges.append(e)
        if len(fields) == 3 and fields[2]:
            tiers[e] = fields[2]
    if catalog is None:
        return TranscriptNetwork(None, edges, tiers=tiers)
    return TranscriptNetwork(catalog.transcript_ids, edges, catalog.gene_map(), tiers)


def store_network(path, network: TranscriptNetwork) -> None:
    edges = network.sorted_edges()
    if network.tiers:
        _write(path, NETWORK_HEADER + ("tier",),
               ((a, b, network.tiers.get((a, b), "")) for a, b in edges))
    else:
        _write(path, NETWORK_HEADER, edges)


# domains and domain-domain interactions ------------------------------------

def load_domains(path) -> DomainAnnotation:
    rows = []
    for n, (tid, dom) in _rows(path, DOMAINS_HEADER):
        rows.append((_nonempty(path, n, tid, "transcript id"), _nonempty(path, n, dom, "domain id")))
    return DomainAnnotation(rows)


def store_domains(path, annot: DomainAnnotation) -> None:
    _write(path, DOMAINS_HEADER, sorted(annot.rows))


def load_ddi(path) -> DDITable:
    pairs, tiers = [], {}
    for n, fields in _rows(path, DDI_HEADER, ("tier",)):
        a = _nonempty(path, n, fields[0], "domain id")
        b = _nonempty(path, n, fields[1], "domain id")
        pairs.append((a, b))
        if len(fields) == 3 and fields[2]:
            tiers[(a, b)] = fields[2]
    return DDITable(pairs, tiers)


def store_ddi(path, ddi: DDITable) -> None:
    pairs = sorted(ddi.pairs)
    if ddi.tiers:
        _write(path, DDI_HEADER + ("tier",), ((a, b, ddi.tiers.get((a, b), "")) for a, b in pairs))
    else:
        _write(path, DDI_HEADER, pairs)


# read compatibility ---------------------------------------------------------

def load_compat(path, catalog: TranscriptCatalog, read_length: int | None) -> CompatibilitySet:
    """Reads grouped by gene.

    The optional ``q_values`` column gives explicit sampling probabilities;
    an empty value there means computed from lengths and ``read_length``.
    """
    per_gene: list[list[ReadCompat]] = [[] for _ in range(catalog.n_genes)]
    read_ids: set[str] = set()
    cache: dict[tuple[str, str], tuple[int, tuple, tuple]] = {}
    for n, fields in _rows(path, COMPAT_HEADER, ("q_values",)):
        gid, rid, comp = fields[0], fields[1], fields[2]
        qfield = fields[3] if len(fields) == 4 else ""
        if not rid:
            raise FormatError(path, n, "empty read id")
        if rid in read_ids:
            raise FormatError(path, n, f"duplicate read id {rid}")
        read_ids.add(rid)
        key = (gid, comp)
        hit = cache.get(key)
        if hit is None:
            hit = cache[key] = _parse_compat(path, n, catalog, gid, comp, read_length)
        gi, ks, qs, order = hit
        if qfield:
            qs = _parse_q(path, n, qfield, len(ks), order)
            per_gene[gi].append(ReadCompat(rid, ks, qs, True))
        else:
            if qs is None:
                raise FormatError(path, n, "no q values and no read length given")
            per_gene[gi].append(ReadCompat(rid, ks, qs, False))
    return CompatibilitySet(catalog, per_gene, read_length)


def _parse_compat(path, n, catalog, gid, comp, read_length):
    if not catalog.has_gene(gid):
        raise FormatError(path, n, f"unknown gene {gid}")
    if not comp:
        raise FormatError(path, n, "empty compatibility list")
    gi = catalog.gene_position(gid)
    first = int(catalog.offsets[gi])
    ks = []
    for tid in comp.split(","):
        if not catalog.has_transcript(tid):
            raise FormatError(path, n, f"unknown transcript {tid}")
        k = catalog.index_of(tid)
        if catalog.gene_index[k] != gi:
            raise FormatError(path, n, f"transcript {tid} is not in gene {gid}")
        ks.append(k - first)
    if len(set(ks)) != len(ks):
        raise FormatError(path, n, "transcript listed twice")
    order = sorted(range(len(ks)), key=ks.__getitem__)
    sorted_ks = tuple(ks[o] for o in order)
    qs = None
    if read_length is not None:
        qs = []
        for k in sorted_ks:
            length = int(catalog.lengths[first + k])
            if length <= read_length:
                raise FormatError(path, n, f"transcript {catalog.transcript_ids[first + k]} "
                                           f"length {length} <= read length {read_length}")
            qs.append(sampling_probability(length, read_length))
        qs = tuple(qs)
    return gi, sorted_ks, qs, tuple(order)


def _parse_q(path, n, qfield, k, order):
    try:
        raw = [float(x) for x in qfield.split(",")]
    except ValueError:
        raise FormatError(path, n, f"bad q values {qfield!r}") from None
    if len(raw) != k:
        raise FormatError(path, n, f"{k} transcripts but {len(raw)} q values")
    for q in raw:
        if not 0.0 < q <= 1.0:
            raise FormatError(path, n, f"q value {q} outside (0, 1]")
    return tuple(raw[o] for o in order)


def store_compat(path, compat: CompatibilitySet) -> None:
    cat = compat.catalog
    explicit = compat.has_explicit_q
    header = COMPAT_HEADER + (("q_values",) if explicit else ())

    def rows():
        for i, reads in enumerate(compat.reads):
            gid = cat.gene_ids[i]
            names = cat.transcript_ids[cat.gene_slice(i)]
            for r in reads:
                row = [gid, r.read_id, ",".join(names[k] for k in r.transcripts)]
                if explicit:
                    row.append(",".join(repr(q) for q in r.q) if r.explicit_q else "")
                yield row

    _write(path, header, rows())


# quantification -------------------------------------------------------------

@dataclass
class QuantTable:
    transcript_ids: tuple[str, ...]
    gene_ids: tuple[str, ...]
    p: np.ndarray
    rho: np.ndarray
    pi: np.ndarray

    @classmethod
    def from_state(cls, state: QuantState) -> "QuantTable":
        cat = state.catalog
        return cls(cat.transcript_ids, tuple(cat.gene_ids[g] for g in cat.gene_index),
                   state.p.copy(), state.rho, state.pi)

    def aligned(self, catalog: TranscriptCatalog, column: str = "pi") -> np.ndarray:
        """Values of ``column`` reordered to catalog transcript order."""
        pos = {t: k for k, t in enumerate(self.transcript_ids)}
        missing = [t for t in catalog.transcript_ids if t not in pos]
        if missing or len(pos) != catalog.n_transcripts:
            raise ValidationError(
                f"quantification and catalog transcripts differ (e.g. {missing[:5]})")
        vals = getattr(self, column)
        return np.array([vals[pos[t]] for t in catalog.transcript_ids])


def load_quant(path) -> QuantTable:
    tids, gids, vals = [], [], []
    seen = set()
    for n, (tid, gid, *nums) in _rows(path, QUANT_HEADER):
        if tid in seen:
            raise FormatError(path, n, f"duplicate transcript id {tid}")
        seen.add(tid)
        try:
            row = [float(x) for x in nums]
        except ValueError:
            raise FormatError(path, n, "non-numeric value") from None
        if not all(math.isfinite(x) and x >= 0 for x in row):
            raise FormatError(path, n, "values must be finite and non-negative")
        tids.append(tid)
        gids.append(gid)
        vals.append(row)
    arr = np.array(vals, dtype=float).reshape(-1, 3)
    return QuantTable(tuple(tids), tuple(gids), arr[:, 0], arr[:, 1], arr[:, 2])


def store_quant(path, quant: QuantState | QuantTable) -> None:
    table = QuantTable.from_state(quant) if isinstance(quant, QuantState) else quant
    _write(path, QUANT_HEADER,
           ((t, g, fmt10(p), fmt10(r), fmt10(x))
            for t, g, p, r, x in zip(table.transcript_ids, table.gene_ids,
                                     table.p, table.rho, table.pi)))


# simulation truth -----------------------------------------------------------

def store_truth(path, truth: SimTruth) -> None:
    cat = truth.catalog
    e = truth.gene_expression[cat.gene_index]
    pin = truth.pi_normalized
    pre = (f"# sim_alpha={truth.sim_alpha!r} noise_sigma={truth.noise_sigma!r} "
           f"iterations={truth.iterations}\n")
    _write(path, TRUTH_HEADER,
           ((t, cat.gene_ids[g], repr(float(ev)), repr(float(a)), repr(float(b)),
             repr(float(c)), repr(float(d)))
            for t, g, ev, a, b, c, d in zip(cat.transcript_ids, cat.gene_index, e,
                                            truth.p_init, truth.p, truth.pi, pin)),
           preamble=pre)


def load_truth(path, catalog: TranscriptCatalog) -> SimTruth:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    meta = {}
    if not first.startswith("# "):
        raise FormatError(path, 1, "missing '# sim_alpha=... noise_sigma=...' line")
    for item in first[2:].split():
        k, _, v = item.partition("=")
        meta[k] = v
    try:
        alpha, sigma, iters = float(meta["sim_alpha"]), float(meta["noise_sigma"]), int(meta["iterations"])
    except (KeyError, ValueError):
        raise FormatError(path, 1, "bad parameter line") from None
    body = _rows_after_preamble(path)
    pos = {}
    vals = np.zeros((catalog.n_transcripts, 5))
    for n, (tid, gid, *nums) in body:
        if not catalog.has_transcript(tid):
            raise FormatError(path, n, f"unknown transcript {tid}")
        if catalog.gene_of(tid) != gid:
            raise FormatError(path, n, f"transcript {tid} is not in gene {gid}")
        if tid in pos:
            raise FormatError(path, n, f"duplicate transcript id {tid}")
        k = catalog.index_of(tid)
        pos[tid] = k
        try:
            vals[k] = [float(x) for x in nums]
        except ValueError:
            raise FormatError(path, n, "non-numeric value") from None
    if len(pos) != catalog.n_transcripts:
        raise ValidationError(f"{path}: truth covers {len(pos)} of {catalog.n_transcripts} transcripts")
    e = np.zeros(catalog.n_genes)
    e[catalog.gene_index] = vals[:, 0]
    return SimTruth(catalog, e, vals[:, 1], vals[:, 2], vals[:, 3], alpha, sigma, iters)


def _rows_after_preamble(path):
    import io as _io
    with open(path, encoding="utf-8", newline="") as fh:
        fh.readline()
        rest = fh.read()
    # reuse the header/width checks on the remainder, keeping line numbers
    tmp = _io.StringIO(rest)
    header = tmp.readline().rstrip("\n").split("\t")
    if tuple(header) != TRUTH_HEADER:
        raise FormatError(path, 2, f"expected header {' | '.join(TRUTH_HEADER)}")
    for n, line in enumerate(tmp, start=3):
        line = line.rstrip("\n")
        fields = line.split("\t")
        if len(fields) != len(TRUTH_HEADER):
            raise FormatError(path, n, f"expected {len(TRUTH_HEADER)} fields, got {len(fields)}")
        yield n, fields


# expression matrices --------------------------------------------------------

def load_matrix(path) -> tuple[list[str], list[str], np.ndarray]:
    """``transcript_id`` then one column per sample."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n").split("\t")
        if len(first) < 2 or first[0] != "transcript_id":
            raise FormatError(path, 1, "expected header 'transcript_id' followed by sample names")
        samples = first[1:]
        ids, rows, seen = [], [], set()
        for n, line in enumerate(fh, start=2):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != len(first):
                raise FormatError(path, n, f"expected {len(first)} fields, got {len(fields)}")
            if fields[0] in seen:
                raise FormatError(path, n, f"duplicate transcript id {fields[0]}")
            seen.add(fields[0])
            try:
                rows.append([float(x) for x in fields[1:]])
            except ValueError:
                raise FormatError(path, n, "non-numeric value") from None
            ids.append(fields[0])
    return ids, samples, np.array(rows, dtype=float).reshape(-1, len(samples))


def store_matrix(path, ids: Sequence[str], samples: Sequence[str], values: np.ndarray) -> None:
    _write(path, ("transcript_id", *samples),
           ([t, *(fmt10(v) for v in row)] for t, row in zip(ids, values)))


def matrix_from_quants(paths: Sequence) -> tuple[list[str], list[str], np.ndarray]:
    """Stack the ``pi`` columns of several quant files as samples."""
    tables = [load_quant(p) for p in paths]
    ids = list(tables[0].transcript_ids)
    for p, t in zip(paths, tables):
        if list(t.transcript_ids) != ids:
            raise ValidationError(f"{p}: transcripts differ from {paths[0]}")
    return ids, [Path(p).stem for p in paths], np.column_stack([t.pi for t in tables])


# reports --------------------------------------------------------------------

def store_key_values(path, rows: Iterable[tuple[str, str]], header=("metric", "value")) -> None:
    _write(path, header, rows)


def store_table(path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    _write(path, header, rows)
