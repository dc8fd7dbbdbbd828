import numpy as np
import pytest

from helpers import catalog, simulated_instance
from netquant import FormatError, driver, io, sim
from netquant.model import CompatibilitySet, ReadCompat, TranscriptNetwork
from netquant.network import DDITable, DomainAnnotation


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def instance():
    return simulated_instance(7, n_genes=30)


def _restore_bytes(tmp_path, name, store, load, obj):
    """store, load, store again; both files must be byte-identical."""
    a, b = tmp_path / f"{name}1.tsv", tmp_path / f"{name}2.tsv"
    store(a, obj)
    store(b, load(a))
    assert a.read_bytes() == b.read_bytes()
    return load(a)


def test_transcripts_round_trip(tmp_path, instance):
    cat = instance[0]
    assert _restore_bytes(tmp_path, "t", io.store_transcripts, io.load_transcripts, cat) == cat


def test_network_round_trip(tmp_path, instance):
    cat, net = instance[0], instance[1]
    back = _restore_bytes(tmp_path, "n", io.store_network,
                          lambda p: io.load_network(p, cat), net)
    assert back == net
    lines = (tmp_path / "n1.tsv").read_text().splitlines()[1:]
    assert lines == sorted(lines)
    assert all(a < b for a, b in (ln.split("\t") for ln in lines))


def test_network_tiers_round_trip(tmp_path):
    net = TranscriptNetwork(None, [("a", "b"), ("b", "c")], tiers={("a", "b"): "3did"})
    back = _restore_bytes(tmp_path, "nt", io.store_network, io.load_network, net)
    assert back.tiers == {("a", "b"): "3did"}


def test_domains_and_ddi_round_trip(tmp_path):
    annot = DomainAnnotation([("t2", "D1"), ("t1", "D2"), ("t1", "D1")])
    ddi = DDITable([("D2", "D1"), ("D1", "D1")], {("D1", "D2"): "pred"})
    assert set(_restore_bytes(tmp_path, "d", io.store_domains, io.load_domains, annot).rows) == \
        set(annot.rows)
    assert _restore_bytes(tmp_path, "i", io.store_ddi, io.load_ddi, ddi) == ddi


def test_compat_round_trip(tmp_path, instance):
    cat, compat = instance[0], instance[3]
    back = _restore_bytes(tmp_path, "c", io.store_compat,
                          lambda p: io.load_compat(p, cat, compat.read_length), compat)
    assert back == compat


def test_compat_explicit_q_round_trip(tmp_path):
    cat = catalog({"A": [("a1", 500), ("a2", 700)]})
    compat = CompatibilitySet(cat, [[ReadCompat("r1", (0, 1), (0.1, 0.30000000000000004), True),
                                     ReadCompat("r2", (1,), (1 / 625,), False)]], 76)
    back = _restore_bytes(tmp_path, "cq", io.store_compat,
                          lambda p: io.load_compat(p, cat, 76), compat)
    assert back == compat


def test_compat_q_reordered_with_transcripts(tmp_path):
    cat = catalog({"A": [("a1", 500), ("a2", 700)]})
    path = _write(tmp_path / "c.tsv", "gene_id\tread_id\tcompat_transcripts\tq_values\n"
                                      "A\tr\ta2,a1\t0.2,0.1\n")
    r = io.load_compat(path, cat, None).reads[0][0]
    assert r.transcripts == (0, 1) and r.q == (0.1, 0.2)


def test_quant_round_trip(tmp_path, instance):
    cat, net, _, compat, _ = instance
    state = driver.net_rstq(cat, compat, net)
    path = tmp_path / "q.tsv"
    io.store_quant(path, state)
    table = io.load_quant(path)
    np.testing.assert_allclose(table.p, state.p, rtol=1e-9, atol=1e-300)
    np.testing.assert_allclose(table.pi, state.pi, rtol=1e-9, atol=1e-300)
    _restore_bytes(tmp_path, "q", io.store_quant, io.load_quant, table)
    header, first = path.read_text().splitlines()[:2]
    assert header == "transcript_id\tgene_id\tp\trho\tpi"


def test_truth_round_trip(tmp_path, instance):
    cat, truth = instance[0], instance[2]
    back = _restore_bytes(tmp_path, "tr", io.store_truth, lambda p: io.load_truth(p, cat), truth)
    for f in ("gene_expression", "p_init", "p", "pi"):
        np.testing.assert_array_equal(getattr(back, f), getattr(truth, f))
    assert (back.sim_alpha, back.noise_sigma, back.iterations) == \
        (truth.sim_alpha, truth.noise_sigma, truth.iterations)


def test_matrix_round_trip(tmp_path):
    vals = np.array([[1.5, 2.0], [0.0, 3.25]])
    path = tmp_path / "m.tsv"
    io.store_matrix(path, ["a", "b"], ["s1", "s2"], vals)
    ids, samples, back = io.load_matrix(path)
    assert ids == ["a", "b"] and samples == ["s1", "s2"]
    np.testing.assert_array_equal(back, vals)


def test_empty_but_headered(tmp_path):
    assert io.load_transcripts(_write(tmp_path / "t.tsv", "transcript_id\tgene_id\tlength\n")).n_transcripts == 0
    assert io.load_network(_write(tmp_path / "n.tsv", "transcript_a\ttranscript_b\n")).n_edges == 0
    assert len(io.load_domains(_write(tmp_path / "d.tsv", "transcript_id\tdomain_id\n"))) == 0
    assert len(io.load_ddi(_write(tmp_path / "i.tsv", "domain_a\tdomain_b\n"))) == 0
    cat = catalog({"A": [("a1", 500)]})
    assert io.load_compat(_write(tmp_path / "c.tsv", "gene_id\tread_id\tcompat_transcripts\n"),
                          cat, 76).n_reads == 0
    assert io.load_quant(_write(tmp_path / "q.tsv", "transcript_id\tgene_id\tp\trho\tpi\n")).p.size == 0


@pytest.mark.parametrize("text, line, reason", [
    ("transcript_id\tgene_id\tlength\nt1\tA\t100\nt1\tB\t50\n", 3, "duplicate"),
    ("transcript_id\tgene_id\tlength\nt1\tA\tabc\n", 2, "not an integer"),
    ("transcript_id\tgene_id\tlength\nt1\tA\t0\n", 2, "< 1"),
    ("transcript_id\tgene_id\tlength\nt1\tA\n", 2, "fields"),
    ("transcript\tgene\tlength\n", 1, "header"),
    ("", 1, "missing header"),
])
def test_transcripts_errors(tmp_path, text, line, reason):
    path = _write(tmp_path / "t.tsv", text)
    with pytest.raises(FormatError, match=reason) as err:
        io.load_transcripts(path)
    assert err.value.line == line and err.value.path == str(path)
    assert str(err.value).startswith(f"{path}:{line}:")


@pytest.mark.parametrize("body, line, reason", [
    ("A\tr1\ta1\nA\tr1\ta2\n", 3, "duplicate read id"),
    ("Z\tr1\ta1\n", 2, "unknown gene"),
    ("A\tr1\tb1\n", 2, "not in gene"),
    ("A\tr1\tzz\n", 2, "unknown transcript"),
    ("A\tr1\ta3\n", 2, "<= read length"),
    ("A\tr1\ta1,a1\n", 2, "twice"),
])
def test_compat_errors(tmp_path, body, line, reason):
    cat = catalog({"A": [("a1", 500), ("a2", 600), ("a3", 50)], "B": [("b1", 500)]})
    path = _write(tmp_path / "c.tsv", "gene_id\tread_id\tcompat_transcripts\n" + body)
    with pytest.raises(FormatError, match=reason) as err:
        io.load_compat(path, cat, 76)
    assert err.value.line == line


@pytest.mark.parametrize("body, reason", [
    ("A\tr1\ta1,a2\t0.1\n", "q values"),
    ("A\tr1\ta1\t1.5\n", r"outside \(0, 1\]"),
    ("A\tr1\ta1\tx\n", "bad q"),
])
def test_compat_q_errors(tmp_path, body, reason):
    cat = catalog({"A": [("a1", 500), ("a2", 600)]})
    path = _write(tmp_path / "c.tsv", "gene_id\tread_id\tcompat_transcripts\tq_values\n" + body)
    with pytest.raises(FormatError, match=reason):
        io.load_compat(path, cat, 76)


@pytest.mark.parametrize("body, reason", [
    ("a1\ta1\n", "self-loop"),
    ("a1\tb1\nb1\ta1\n", "duplicate edge"),
    ("a1\ta2\n", "one gene"),
    ("a1\tzz\n", "unknown transcript"),
])
def test_network_errors(tmp_path, body, reason):
    cat = catalog({"A": [("a1", 500), ("a2", 600)], "B": [("b1", 500)]})
    path = _write(tmp_path / "n.tsv", "transcript_a\ttranscript_b\n" + body)
    with pytest.raises(FormatError, match=reason):
        io.load_network(path, cat)


def test_quant_errors(tmp_path):
    path = _write(tmp_path / "q.tsv", "transcript_id\tgene_id\tp\trho\tpi\nt\tG\tnan\t1\t1\n")
    with pytest.raises(FormatError, match="finite"):
        io.load_quant(path)


def test_stores_use_lf(tmp_path, instance):
    io.store_transcripts(tmp_path / "t.tsv", instance[0])
    assert b"\r" not in (tmp_path / "t.tsv").read_bytes()


def test_large_compat_loads(tmp_path):
    cat = sim.synthetic_catalog(500, seed=0)
    truth = sim.generate_truth(cat, None, seed=0)
    compat = sim.sample_compat(truth, total_reads=200_000, overlap_model="shared_prefix", seed=0)
    path = tmp_path / "c.tsv"
    io.store_compat(path, compat)
    assert io.load_compat(path, cat, 76) == compat
