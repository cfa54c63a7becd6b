import math

import numpy as np
import pytest

from seqbin.decoder import (
    NEG_INF,
    CapExceeded,
    DecoderConfig,
    StackDecoder,
    branch_metric_jsc,
    branch_metric_si,
    encode_jsc,
    encode_si,
    run,
)
from seqbin.models import Channel, JointSource, sample_pairs
from seqbin.treecode import TreeCode


def si_instance(source, n, rate, seed=0, code_seed=99):
    u, v = sample_pairs(source, n, np.random.default_rng(seed))
    code = TreeCode(seed=code_seed, alphabet_size=source.n_u, rate=rate)
    return u.tolist(), v.tolist(), code


def decode(source, u, v, code, bias, cls=StackDecoder, **caps):
    dec = cls(source, code, DecoderConfig(bias=bias, **caps))
    received = encode_si(code, u)
    nodes = [dec.step(received[t], v[t]) for t in range(len(u))]
    return dec, nodes, received


class TestMetrics:
    def test_si_examples(self):
        src = JointSource.from_conditional([0.5, 0.5], [[0.5, 0.0], [0.5, 1.0]])  # Q(u|v) columns
        assert branch_metric_si(1, 1, src, 0.0) == 0.0
        assert branch_metric_si(0, 0, src, 0.7) == pytest.approx(-0.3, abs=1e-15)
        assert branch_metric_si(0, 1, src, 0.7) == NEG_INF

    def test_jsc_examples(self, bsc_source):
        noiseless = Channel.noiseless(2)
        base = branch_metric_si(0, 0, bsc_source, 0.7)
        assert branch_metric_jsc(0, 0, (1, 0, 1), (1, 0, 1), bsc_source, noiseless, 0.7) == pytest.approx(base + 3)
        assert branch_metric_jsc(0, 0, (1,), (0,), bsc_source, noiseless, 0.7) == NEG_INF
        useless = Channel([[0.3, 0.7], [0.3, 0.7]], [0.5, 0.5])
        assert branch_metric_jsc(0, 0, (0, 1), (1, 1), bsc_source, useless, 0.7) == pytest.approx(base, abs=1e-12)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DecoderConfig(bias=0.0, mode="fano")
        with pytest.raises(ValueError):
            DecoderConfig(bias=0.0, max_pops_per_step=0)

    def test_mode_mismatch(self, bsc_source):
        code = TreeCode(seed=1, alphabet_size=2, rate=1)
        with pytest.raises(ValueError, match="mode"):
            StackDecoder(bsc_source, code, DecoderConfig(bias=0.0, mode="jsc"), Channel.noiseless(2))


class TestStep:
    def test_single_symbol_alphabet(self):
        src = JointSource.independent([1.0], [0.3, 0.7])
        u, v, code = si_instance(src, 50, 0.5)
        dec, nodes, _ = decode(src, u, v, code, bias=0.2)
        assert dec.ledger.pops_per_step == [1] * 50
        assert nodes[-1].path() == u

    def test_zero_bit_step_does_not_prune(self, bsc_source):
        code = TreeCode(seed=3, alphabet_size=2, rate=0.7)
        assert code.bits_at(1) == 0
        dec = StackDecoder(bsc_source, code, DecoderConfig(bias=0.5))
        dec.step(0, 0)
        assert sorted(n.path() for n in dec.stack_nodes()) == [[0], [1]]

    def test_impossible_symbol_never_pushed(self):
        src = JointSource([[0.5, 0.0], [0.0, 0.5]])
        code = TreeCode(seed=4, alphabet_size=2, rate=0.5)
        dec = StackDecoder(src, code, DecoderConfig(bias=1.0))
        node = dec.step(0, 1)
        assert [n.path() for n in dec.stack_nodes()] == [[1]]
        assert node.path() == [1]

    def test_emitted_depth_and_ledger(self, bsc_source):
        u, v, code = si_instance(bsc_source, 200, 0.7)
        dec, nodes, _ = decode(bsc_source, u, v, code, bias=0.7)
        assert [n.depth for n in nodes] == list(range(1, 201))
        assert len(dec.ledger.pops_per_step) == 200
        assert all(p >= 1 for p in dec.ledger.pops_per_step)
        assert dec.ledger.visits_total == bsc_source.n_u * sum(dec.ledger.pops_per_step)
        assert not dec.ledger.cap_hit

    def test_high_rate_decodes_exactly(self, bsc_source):
        u, v, code = si_instance(bsc_source, 300, 3)
        _, nodes, _ = decode(bsc_source, u, v, code, bias=0.7)
        assert nodes[-1].path() == u

    def test_cap_raises(self, bsc_source):
        u, v, code = si_instance(bsc_source, 400, 0.55, seed=5)
        with pytest.raises(CapExceeded):
            decode(bsc_source, u, v, code, bias=0.0, max_pops_per_step=2)

    def test_empty_stack_raises(self):
        # received parities that no path matches: V determines U, the decoder cannot recover
        src = JointSource([[0.5, 0.0], [0.0, 0.5]])
        code = TreeCode(seed=8, alphabet_size=2, rate=1)
        wrong = encode_si(code, [1])[0]
        dec = StackDecoder(src, code, DecoderConfig(bias=0.0))
        with pytest.raises(CapExceeded, match="emptied"):
            dec.step(wrong, 0)


@pytest.fixture(scope="module")
def state():
    src = JointSource.binary_bsc(0.1)
    u, v, code = si_instance(src, 120, 0.7, seed=11, code_seed=2024)
    dec, nodes, received = decode(src, u, v, code, bias=0.7)
    return src, u, v, code, dec, received


class TestStackInvariants:
    def test_no_duplicate_paths(self, state):
        *_, dec, _ = state
        paths = [tuple(n.path()) for n in dec.stack_nodes()]
        assert len(paths) == len(set(paths))

    def test_parity_consistency(self, state):
        src, u, v, code, dec, received = state
        for node in dec.stack_nodes()[:300]:
            path = node.path()
            for t in range(1, len(path) + 1):
                n = code.bits_at(t)
                expected = [(received[t - 1] >> (n - 1 - i)) & 1 for i in range(n)]
                assert code.branch_bits(path[:t], t) == expected

    def test_metric_recomputable(self, state):
        src, u, v, code, dec, _ = state
        for node in dec.stack_nodes():
            path = node.path()
            total = sum(branch_metric_si(s, v[i], src, 0.7) for i, s in enumerate(path))
            assert node.metric == pytest.approx(total, abs=1e-9)

    def test_ancestor_and_path(self, state):
        *_, dec, _ = state
        node = dec.top()
        assert node.ancestor(5).path() == node.path()[:5]
        assert node.ancestor(0) is dec.root


class TestBestFirst:
    def test_popped_metrics_non_increasing(self):
        popped = []

        class Recording(StackDecoder):
            def children(self, node):
                popped.append(node.metric)
                return super().children(node)

        src = JointSource([[0.35, 0.1], [0.15, 0.4]])
        u, v, code = si_instance(src, 60, 0.8, seed=3)
        decode(src, u, v, code, bias=0.0, cls=Recording)
        assert len(popped) >= 60
        assert all(b <= a for a, b in zip(popped, popped[1:]))

    def test_tie_break_prefers_deeper_then_lexicographic(self):
        src = JointSource.independent([0.5, 0.5])
        code = TreeCode(seed=6, alphabet_size=2, rate=0)  # no parities: every path survives
        dec = StackDecoder(src, code, DecoderConfig(bias=1.0))  # all metrics are exactly 0
        node = None
        for _ in range(4):
            node = dec.step(0, 0)
        assert node.path() == [0, 0, 0, 0]
        assert dec.ledger.pops_per_step == [1, 1, 1, 1]


class TestRun:
    def test_seed_replay(self, bsc_source):
        u, v, code = si_instance(bsc_source, 300, 0.7, seed=21)
        a = run(bsc_source, u, v, code, DecoderConfig(bias=0.7))
        b = run(bsc_source, u, v, code, DecoderConfig(bias=0.7))
        assert [n.path() for n in a.estimates] == [n.path() for n in b.estimates]
        assert a.ledger == b.ledger
        assert a.status == "completed"
        assert len(a.estimate(17)) == 17

    def test_deterministic_source(self):
        src = JointSource([[1.0]])
        u = [0] * 40
        res = run(src, u, u, TreeCode(seed=1, alphabet_size=1, rate=0.7), DecoderConfig(bias=0.0))
        assert res.estimates[-1].path() == u
        assert res.ledger.pops_per_step == [1] * 40

    def test_cap_abort_status(self, bsc_source):
        u, v, code = si_instance(bsc_source, 400, 0.55, seed=5)
        res = run(bsc_source, u, v, code, DecoderConfig(bias=0.0, max_pops_per_step=2))
        assert res.status == "cap-aborted"
        assert res.ledger.cap_hit

    def test_length_mismatch(self, bsc_source):
        with pytest.raises(ValueError):
            run(bsc_source, [0, 1], [0], TreeCode(seed=1, alphabet_size=2, rate=1), DecoderConfig(bias=0.0))

    def test_emit_callback(self, bsc_source):
        seen = []
        u, v, code = si_instance(bsc_source, 30, 1)
        run(bsc_source, u, v, code, DecoderConfig(bias=0.5), on_emit=lambda t, node: seen.append((t, node.depth)))
        assert seen == [(t, t) for t in range(1, 31)]


class TestJSC:
    def test_noiseless_metric_offset_equals_lambda_per_step(self, bsc_source):
        lam = 1
        u, v = sample_pairs(bsc_source, 200, np.random.default_rng(7))
        code = TreeCode(seed=42, alphabet_size=2, lam=lam, input_dist=(0.5, 0.5))
        ch = Channel.noiseless(2)
        res = run(bsc_source, u.tolist(), v.tolist(), code, DecoderConfig(bias=0.3, mode="jsc"), ch,
                  np.random.default_rng(1))
        assert res.status == "completed"
        for node in res.estimates[::10]:
            path = node.path()
            si = sum(branch_metric_si(s, int(v[i]), bsc_source, 0.3) for i, s in enumerate(path))
            assert node.metric - si == pytest.approx(lam * node.depth, abs=1e-9)

    def test_noiseless_channel_keeps_only_matching_inputs(self, bsc_source):
        code = TreeCode(seed=5, alphabet_size=2, lam=3, input_dist=(0.5, 0.5))
        u = [0, 1, 1, 0, 1, 0, 0, 1]
        xs = encode_jsc(code, u)
        dec = StackDecoder(bsc_source, code, DecoderConfig(bias=0.0, mode="jsc"), Channel.noiseless(2))
        for t in range(len(u)):
            node = dec.step(xs[t], u[t])
        for n in dec.stack_nodes():
            p = n.path()
            assert all(code.branch_symbols(p[:t], t) == xs[t - 1] for t in range(1, len(p) + 1))
        assert node.path() == u

    def test_jsc_requires_channel(self, bsc_source):
        code = TreeCode(seed=5, alphabet_size=2, lam=1, input_dist=(0.5, 0.5))
        with pytest.raises(ValueError, match="channel"):
            StackDecoder(bsc_source, code, DecoderConfig(bias=0.0, mode="jsc"))
        with pytest.raises(ValueError, match="rng"):
            run(bsc_source, [0], [0], code, DecoderConfig(bias=0.0, mode="jsc"), Channel.noiseless(2))
