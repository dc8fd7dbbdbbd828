"""Domain types and the algebraic transforms between proportions, relative
abundances, expressions and prior read counts.

Transcripts are addressed two ways: by id, and by a flat index into the
catalog's transcript order (genes in input order, each gene's transcripts
contiguous). Per-gene vectors are slices ``offsets[i]:offsets[i + 1]`` of
flat arrays.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError


@dataclass(frozen=True)
class Transcript:
    transcript_id: str
    length: int


@dataclass(frozen=True)
class GeneEntry:
    gene_id: str
    transcripts: tuple[Transcript, ...]


class TranscriptCatalog:
    """Ordered genes and their transcripts.

    Parameters
    ----------
    genes : iterable of GeneEntry
        Gene order and transcript order within each gene are preserved.
    """

    def __init__(self, genes: Iterable[GeneEntry]):
        self.genes = tuple(genes)
        gene_ids = [g.gene_id for g in self.genes]
        dup = [g for g, c in Counter(gene_ids).items() if c > 1]
        if dup:
            raise ValidationError(f"duplicate gene ids: {sorted(dup)[:10]}")
        tids, lengths, gidx, offsets = [], [], [], [0]
        for i, g in enumerate(self.genes):
            if not g.transcripts:
                raise ValidationError(f"gene {g.gene_id} has no transcripts")
            for t in g.transcripts:
                if int(t.length) < 1:
                    raise ValidationError(
                        f"transcript {t.transcript_id} has length {t.length} < 1")
                tids.append(t.transcript_id)
                lengths.append(int(t.length))
                gidx.append(i)
            offsets.append(len(tids))
        dup = [t for t, c in Counter(tids).items() if c > 1]
        if dup:
            raise ValidationError(f"duplicate transcript ids: {sorted(dup)[:10]}")
        self.gene_ids = tuple(gene_ids)
        self.transcript_ids = tuple(tids)
        self.lengths = _frozen(np.asarray(lengths, dtype=np.int64))
        self.gene_index = _frozen(np.asarray(gidx, dtype=np.int64))
        self.offsets = _frozen(np.asarray(offsets, dtype=np.int64))
        self._tpos = {t: k for k, t in enumerate(tids)}
        self._gpos = {g: i for i, g in enumerate(gene_ids)}

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, str, int]]) -> "TranscriptCatalog":
        """Build from ``(transcript_id, gene_id, length)`` rows.

        Genes are ordered by first appearance.
        """
        grouped: dict[str, list[Transcript]] = {}
        for tid, gid, length in rows:
            grouped.setdefault(gid, []).append(Transcript(tid, int(length)))
        return cls(GeneEntry(g, tuple(ts)) for g, ts in grouped.items())

    @property
    def n_genes(self) -> int:
        return len(self.genes)

    @property
    def n_transcripts(self) -> int:
        return len(self.transcript_ids)

    def gene_slice(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def gene_size(self, i: int) -> int:
        return int(self.offsets[i + 1] - self.offsets[i])

    def index_of(self, transcript_id: str) -> int:
        return self._tpos[transcript_id]

    def gene_position(self, gene_id: str) -> int:
        return self._gpos[gene_id]

    def has_transcript(self, transcript_id: str) -> bool:
        return transcript_id in self._tpos

    def has_gene(self, gene_id: str) -> bool:
        return gene_id in self._gpos

    def gene_of(self, transcript_id: str) -> str:
        return self.gene_ids[self.gene_index[self._tpos[transcript_id]]]

    def gene_map(self) -> dict[str, str]:
        return {t: self.gene_ids[g] for t, g in zip(self.transcript_ids, self.gene_index)}

    def __eq__(self, other):
        if not isinstance(other, TranscriptCatalog):
            return NotImplemented
        return self.genes == other.genes

    def __hash__(self):
        return hash(self.genes)

    def __repr__(self):
        return f"TranscriptCatalog({self.n_genes} genes, {self.n_transcripts} transcripts)"


class ReadCompat(NamedTuple):
    """One read: the within-gene transcript indices it is compatible with and
    the matching sampling probabilities."""

    read_id: str
    transcripts: tuple[int, ...]
    q: tuple[float, ...]
    explicit_q: bool = False


class ReadClasses(NamedTuple):
    """Reads of one gene collapsed by compatibility signature.

    ``q`` is ``(n_classes, K)`` with zeros marking incompatibility; ``counts``
    holds the class multiplicities.
    """

    q: np.ndarray
    counts: np.ndarray

    @property
    def n_reads(self) -> float:
        return float(self.counts.sum())

    @property
    def n_transcripts(self) -> int:
        return self.q.shape[1]


def sampling_probability(length: int, read_length: int) -> float:
    """Probability of drawing one particular start position."""
    return 1.0 / (length - read_length + 1)


def collapse_reads(reads: Sequence[ReadCompat], n_transcripts: int) -> ReadClasses:
    counts: dict[tuple, int] = {}
    for r in reads:
        key = (r.transcripts, r.q)
        counts[key] = counts.get(key, 0) + 1
    q = np.zeros((len(counts), n_transcripts))
    w = np.empty(len(counts))
    for c, ((ks, qs), n) in enumerate(counts.items()):
        q[c, list(ks)] = qs
        w[c] = n
    return ReadClasses(q, w)


class CompatibilitySet:
    """Per-gene read compatibility lists.

    Parameters
    ----------
    catalog : TranscriptCatalog
    reads : sequence of sequences of ReadCompat
        ``reads[i]`` are the reads assigned to gene ``i``; transcript indices
        are positions within that gene.
    read_length : int or None
        Run-global read length. Required when any q was computed from lengths.
    """

    def __init__(self, catalog: TranscriptCatalog,
                 reads: Sequence[Sequence[ReadCompat]],
                 read_length: int | None = None):
        if len(reads) != catalog.n_genes:
            raise ValidationError(
                f"expected reads for {catalog.n_genes} genes, got {len(reads)}")
        self.catalog = catalog
        self.read_length = read_length
        self.reads = tuple(tuple(r) for r in reads)
        for i, gene_reads in enumerate(self.reads):
            k_max = catalog.gene_size(i)
            for r in gene_reads:
                _check_read(r, k_max, catalog.gene_ids[i])
        self._classes: dict[int, ReadClasses] = {}

    @classmethod
    def from_records(cls, catalog: TranscriptCatalog,
                     records: Iterable[tuple[str, str, Sequence[str], Sequence[float] | None]],
                     read_length: int | None) -> "CompatibilitySet":
        """Build from ``(gene_id, read_id, transcript_ids, q_or_None)`` records.

        Missing q values are computed from transcript lengths; a compatible
        transcript not longer than the read is rejected.
        """
        per_gene: list[list[ReadCompat]] = [[] for _ in range(catalog.n_genes)]
        for gid, rid, tids, qs in records:
            per_gene[catalog.gene_position(gid)].append(
                make_read(catalog, gid, rid, tids, qs, read_length))
        return cls(catalog, per_gene, read_length)

    def classes(self, i: int) -> ReadClasses:
        if i not in self._classes:
            self._classes[i] = collapse_reads(self.reads[i], self.catalog.gene_size(i))
        return self._classes[i]

    def read_counts(self) -> np.ndarray:
        return np.array([len(r) for r in self.reads], dtype=np.int64)

    @property
    def n_reads(self) -> int:
        return sum(len(r) for r in self.reads)

    @property
    def has_explicit_q(self) -> bool:
        return any(r.explicit_q for g in self.reads for r in g)

    def __eq__(self, other):
        if not isinstance(other, CompatibilitySet):
            return NotImplemented
        return (self.catalog == other.catalog and self.read_length == other.read_length
                and self.reads == other.reads)


def make_read(catalog: TranscriptCatalog, gene_id: str, read_id: str,
              transcript_ids: Sequence[str], q: Sequence[float] | None,
              read_length: int | None) -> ReadCompat:
    if not transcript_ids:
        raise ValidationError(f"read {read_id} has an empty compatibility set")
    gi = catalog.gene_position(gene_id)
    first = int(catalog.offsets[gi])
    ks = []
    for tid in transcript_ids:
        if not catalog.has_transcript(tid) or catalog.gene_index[catalog.index_of(tid)] != gi:
            raise ValidationError(
                f"read {read_id}: transcript {tid} is not in gene {gene_id}")
        ks.append(catalog.index_of(tid) - first)
    if len(set(ks)) != len(ks):
        raise ValidationError(f"read {read_id} lists a transcript twice")
    if q is not None:
        if len(q) != len(ks):
            raise ValidationError(
                f"read {read_id}: {len(ks)} transcripts but {len(q)} q values")
        order = np.argsort(ks, kind="stable")
        return ReadCompat(read_id, tuple(ks[o] for o in order),
                          tuple(float(q[o]) for o in order), True)
    if read_length is None:
        raise ValidationError(f"read {read_id}: no q values and no read length")
    ks.sort()
    qs = []
    for k in ks:
        length = int(catalog.lengths[first + k])
        if length <= read_length:
            raise ValidationError(
                f"read {read_id}: transcript {catalog.transcript_ids[first + k]} "
                f"length {length} <= read length {read_length}")
        qs.append(sampling_probability(length, read_length))
    return ReadCompat(read_id, tuple(ks), tuple(qs), False)


def _check_read(r: ReadCompat, k_max: int, gene_id: str) -> None:
    if not r.transcripts:
        raise ValidationError(f"read {r.read_id} has an empty compatibility set")
    if len(r.transcripts) != len(r.q):
        raise ValidationError(f"read {r.read_id}: transcripts and q differ in length")
    for k, q in zip(r.transcripts, r.q):
        if not 0 <= k < k_max:
            raise ValidationError(
                f"read {r.read_id}: transcript index {k} outside gene {gene_id}")
        if not 0.0 < q <= 1.0:
            raise ValidationError(f"read {r.read_id}: q={q} outside (0, 1]")


class TranscriptNetwork:
    """Undirected binary transcript graph without self-loops or same-gene edges.

    Parameters
    ----------
    nodes : iterable of str or None
        Node universe; endpoints of ``edges`` are added if missing. ``None``
        uses the sorted endpoints.
    edges : iterable of (str, str)
    gene_of : mapping, optional
        Transcript id to gene id. When given, same-gene edges are rejected.
    tiers : mapping, optional
        Edge (sorted pair) to a confidence label. Carried along, never used
        by the model.
    """

    def __init__(self, nodes: Iterable[str] | None, edges: Iterable[tuple[str, str]],
                 gene_of: Mapping[str, str] | None = None,
                 tiers: Mapping[tuple[str, str], str] | None = None):
        norm = set()
        for a, b in edges:
            if a == b:
                raise ValidationError(f"self-loop on {a}")
            norm.add((a, b) if a < b else (b, a))
        self.edges = frozenset(norm)
        endpoints = {x for e in self.edges for x in e}
        if nodes is None:
            self.nodes = tuple(sorted(endpoints))
        else:
            nodes = list(dict.fromkeys(nodes))
            seen = set(nodes)
            nodes.extend(sorted(endpoints - seen))
            self.nodes = tuple(nodes)
        self.gene_of = dict(gene_of) if gene_of is not None else None
        if self.gene_of is not None:
            missing = sorted(x for x in endpoints if x not in self.gene_of)
            if missing:
                raise ValidationError(f"network transcripts without a gene: {missing[:10]}")
            bad = sorted(e for e in self.edges if self.gene_of[e[0]] == self.gene_of[e[1]])
            if bad:
                raise ValidationError(f"same-gene edges: {bad[:10]}")
        self.tiers = {e: t for e, t in (tiers or {}).items() if e in self.edges}
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        self.adjacency = {n: tuple(sorted(v)) for n, v in adj.items()}

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, node: str) -> tuple[str, ...]:
        return self.adjacency.get(node, ())

    def has_edge(self, a: str, b: str) -> bool:
        return ((a, b) if a < b else (b, a)) in self.edges

    def with_edges(self, edges: Iterable[tuple[str, str]]) -> "TranscriptNetwork":
        """Same nodes and gene map, new edge set."""
        return TranscriptNetwork(self.nodes, edges, self.gene_of, self.tiers)

    def sorted_edges(self) -> list[tuple[str, str]]:
        return sorted(self.edges)

    def adjacency_matrix(self, order: Sequence[str]) -> sp.csr_matrix:
        """Binary symmetric adjacency over ``order``; edges with an endpoint
        outside ``order`` are dropped."""
        pos = {t: k for k, t in enumerate(order)}
        rows, cols = [], []
        for a, b in self.edges:
            if a in pos and b in pos:
                rows += [pos[a], pos[b]]
                cols += [pos[b], pos[a]]
        n = len(order)
        return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))

    def __eq__(self, other):
        if not isinstance(other, TranscriptNetwork):
            return NotImplemented
        return set(self.nodes) == set(other.nodes) and self.edges == other.edges

    def __hash__(self):
        return hash(self.edges)

    def __repr__(self):
        return f"TranscriptNetwork({self.n_nodes} nodes, {self.n_edges} edges)"


@dataclass
class QuantState:
    """Estimated proportions for every gene plus run diagnostics.

    ``p`` and ``phi`` are flat arrays in catalog transcript order.
    """

    catalog: TranscriptCatalog
    read_counts: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    lam: float = 0.0
    no_data: np.ndarray | None = None
    accepted: np.ndarray | None = None
    rounds: int = 0
    converged: bool = True
    stalled: bool = False
    trajectory: list = field(default_factory=list)
    round_objective: list = field(default_factory=list)

    @property
    def rho(self) -> np.ndarray:
        out = np.empty_like(self.p)
        for i in range(self.catalog.n_genes):
            s = self.catalog.gene_slice(i)
            out[s] = relative_abundance(self.p[s], self.catalog.lengths[s])
        return out

    @property
    def pi(self) -> np.ndarray:
        counts = self.read_counts[self.catalog.gene_index]
        return counts * self.p / self.catalog.lengths

    @property
    def alpha(self) -> np.ndarray:
        return self.lam * self.phi + 1.0

    def gene_p(self, i: int) -> np.ndarray:
        return self.p[self.catalog.gene_slice(i)]


@dataclass
class SimTruth:
    """Ground-truth expression profile.

    ``gene_expression`` is per gene; the other arrays are flat over catalog
    transcripts. ``pi`` is gene expression times converged proportion.
    """

    catalog: TranscriptCatalog
    gene_expression: np.ndarray
    p_init: np.ndarray
    p: np.ndarray
    pi: np.ndarray
    sim_alpha: float = 1.0
    noise_sigma: float = 0.0
    iterations: int = 0

    @property
    def pi_normalized(self) -> np.ndarray:
        total = self.pi.sum()
        return self.pi / total if total > 0 else self.pi.copy()


def relative_abundance(p: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Length-normalized within-gene proportions."""
    p = np.asarray(p, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    if p.shape != lengths.shape:
        raise ValidationError(f"shape mismatch {p.shape} vs {lengths.shape}")
    if np.any(lengths < 1):
        raise ValidationError("transcript lengths must be >= 1")
    w = p / lengths
    total = w.sum()
    if not total > 0:
        raise ValidationError("degenerate probability vector")
    return w / total


def expression(p: np.ndarray, read_count: float, lengths: np.ndarray) -> np.ndarray:
    """Expected reads per base: ``read_count * p / length``."""
    p = np.asarray(p, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    if p.shape != lengths.shape:
        raise ValidationError(f"shape mismatch {p.shape} vs {lengths.shape}")
    return read_count * p / lengths


def compute_phi(transcript: str, network: TranscriptNetwork,
                expressions: Mapping[str, float], length: float) -> float:
    """Prior read count: transcript length times the mean neighbor expression.

    Isolated transcripts get 0, which makes their prior uniform.
    """
    nb = network.neighbors(transcript)
    if not nb:
        return 0.0
    return float(length) * sum(expressions[j] for j in nb) / len(nb)


def neighbor_mean_operator(catalog: TranscriptCatalog,
                           network: TranscriptNetwork) -> sp.csr_matrix:
    """Sparse ``M`` with ``(M @ x)[t]`` the mean of ``x`` over neighbors of ``t``.

    Rows of isolated transcripts are empty. Network nodes outside the catalog
    are rejected.
    """
    outside = [n for n in network.nodes if not catalog.has_transcript(n)]
    if outside:
        raise ValidationError(f"network transcripts not in catalog: {sorted(outside)[:10]}")
    adj = network.adjacency_matrix(catalog.transcript_ids)
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return sp.csr_matrix(sp.diags(inv) @ adj)


def phi_vector(catalog: TranscriptCatalog, mean_op: sp.spmatrix, pi: np.ndarray) -> np.ndarray:
    return catalog.lengths * (mean_op @ pi)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a
