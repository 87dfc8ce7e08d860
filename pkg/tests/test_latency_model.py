import numpy as np
import pytest
from hypothesis import given, strategies as st

from oneproxy.device_sim import Granularity, RooflineDevice, roofline_predictor, simulate_genes
from oneproxy.errors import (
    DimensionMismatch,
    DuplicateGenotype,
    NonpositiveLatency,
    ParseError,
    SpaceMismatch,
    TooFewSamples,
)
from oneproxy.latency_model import (
    LatencyPredictor,
    MeasurementSample,
    MeasurementSet,
    evaluate,
    fit,
    predict,
    read_measurements,
    write_measurements,
)
from oneproxy.search_space import encode


def mset_from(space, G, y, device="d"):
    return MeasurementSet(device, tuple(
        MeasurementSample(space.from_genes(g), float(v)) for g, v in zip(G, y)))


class TestPredict:
    def test_bias_only(self, fbnet):
        w = np.arange(fbnet.encoding_length, dtype=float) + 1
        pred = LatencyPredictor(w, fbnet.space_id)
        x = np.zeros(fbnet.encoding_length)
        x[-1] = 1
        assert predict(pred, x) == w[-1]

    def test_unit_weights_count_active_blocks(self, fbnet):
        pred = LatencyPredictor(np.ones(fbnet.encoding_length), fbnet.space_id)
        # 7 active blocks, the rest skipped
        g = fbnet.from_genes([0] * 7 + [8] * 15)
        assert predict(pred, encode(g, fbnet)) == 8.0

    def test_dimension_mismatch(self, cell4):
        pred = LatencyPredictor(np.ones(5), cell4.space_id)
        with pytest.raises(DimensionMismatch):
            predict(pred, np.ones(4))
        with pytest.raises(DimensionMismatch):
            pred.predict_genes(cell4, [[0, 0, 0, 0]])

    def test_space_mismatch(self, cell4, cell6):
        pred = LatencyPredictor(np.ones(cell4.encoding_length), cell4.space_id)
        with pytest.raises(SpaceMismatch):
            pred.predict_genes(cell6, [[0] * 6])

    def test_additive_over_blocks(self, fbnet, rng):
        w = rng.uniform(0.1, 2.0, fbnet.encoding_length)
        pred = LatencyPredictor(w, fbnet.space_id)
        g = fbnet.sample_genes(rng, 1)[0]
        total = predict(pred, encode(fbnet.from_genes(g), fbnet))
        singles = []
        for p in range(fbnet.positions):
            if g[p] == fbnet.n_slots:
                continue
            only = np.full(fbnet.positions, fbnet.n_slots)
            only[p] = g[p]
            singles.append(predict(pred, encode(fbnet.from_genes(only), fbnet)))
        m = len(singles)
        assert total == pytest.approx(sum(singles) - (m - 1) * w[-1], rel=1e-12)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            LatencyPredictor(np.array([1.0, np.nan]), "x")


class TestFit:
    def test_exact_recovery_fbnet(self, fbnet, rng):
        w = rng.uniform(0.05, 3.0, fbnet.encoding_length)
        G = fbnet.sample_genes(rng, 600)
        y = fbnet.encode_genes(G) @ w
        pred = fit(mset_from(fbnet, G, y), fbnet, ridge=1e-10)
        assert np.max(np.abs(pred.weights - w)) <= 1e-6

    def test_per_operator_simulator_recovery(self, fbnet, rng):
        dev = RooflineDevice("po", 20.0, 10.0, granularity=Granularity.PER_OPERATOR)
        G = fbnet.sample_genes(rng, 500)
        # the default ridge of 1e-8 biases weights by ~1e-9 relative; use the exact-recovery ridge
        pred = fit(mset_from(fbnet, G, simulate_genes(dev, fbnet, G)), fbnet, ridge=1e-10)
        H = fbnet.sample_genes(rng, 200)
        truth = simulate_genes(dev, fbnet, H)
        rel = np.abs(pred.predict_genes(fbnet, H) - truth) / truth
        assert rel.max() < 1e-9
        # same weights as the analytic per-operator predictor
        exact = roofline_predictor(dev, fbnet, include_fixed=False)
        assert np.allclose(pred.weights, exact.weights, atol=1e-9)

    def test_one_sample_rejected(self, cell4):
        m = mset_from(cell4, [[0, 0, 0, 0]], [1.0])
        with pytest.raises(TooFewSamples):
            fit(m, cell4)

    def test_duplicates_equal_count_weighting(self, cell4, rng):
        G = cell4.sample_genes(rng, 40)
        y = rng.uniform(1, 5, 40)
        dup = np.concatenate([G, G[:5]])
        ydup = np.concatenate([y, y[:5]])
        a = fit(mset_from(cell4, dup, ydup), cell4)
        # weighted normal equations with weight 2 on the repeated rows
        X = cell4.encode_genes(G)
        c = np.ones(40)
        c[:5] = 2
        A = X.T @ (X * c[:, None]) + 1e-8 * np.eye(X.shape[1])
        w = np.linalg.solve(A, X.T @ (c * y))
        assert np.allclose(a.weights, w, atol=1e-6)

    def test_underdetermined_allowed(self, mbv2, rng):
        G = mbv2.sample_genes(rng, 30)
        y = rng.uniform(5, 10, 30)
        pred = fit(mset_from(mbv2, G, y), mbv2, ridge=1e-3)
        assert np.all(np.isfinite(pred.weights))


class TestEvaluate:
    def test_perfect(self, cell4):
        pred = LatencyPredictor(np.linspace(1, 2, cell4.encoding_length), cell4.space_id)
        G = np.array([[0, 1, 2, 3], [1, 1, 1, 1], [4, 3, 2, 1], [2, 2, 2, 2]])
        m = mset_from(cell4, G, pred.predict_genes(cell4, G))
        out = evaluate(pred, m, cell4)
        assert out["rmse_ms"] == pytest.approx(0, abs=1e-12)
        assert out["srcc_vs_actual"] == 1.0

    def test_constant_shift(self, cell4):
        w = np.linspace(1, 2, cell4.encoding_length)
        pred = LatencyPredictor(w, cell4.space_id)
        G = np.array([[0, 1, 2, 3], [1, 1, 1, 1], [4, 3, 2, 1], [2, 2, 2, 2]])
        m = mset_from(cell4, G, pred.predict_genes(cell4, G) + 0.75)
        out = evaluate(pred, m, cell4)
        assert out["rmse_ms"] == pytest.approx(0.75, rel=1e-12)
        assert out["srcc_vs_actual"] == 1.0

    def test_three_sample_hand_case(self, cell4):
        # bias only, plus an edge-0 weight per op: predicted 1, 2, 3
        w = np.zeros(cell4.encoding_length)
        w[:3] = [1.0, 2.0, 3.0]
        pred = LatencyPredictor(w, cell4.space_id)
        G = np.array([[0, 0, 0, 0], [1, 0, 0, 0], [2, 0, 0, 0]])
        m = mset_from(cell4, G, [1.0, 3.0, 2.0])
        assert evaluate(pred, m, cell4)["srcc_vs_actual"] == pytest.approx(0.5, abs=1e-15)

    def test_too_few(self, cell4):
        pred = LatencyPredictor(np.ones(cell4.encoding_length), cell4.space_id)
        with pytest.raises(TooFewSamples):
            evaluate(pred, mset_from(cell4, [[0] * 4, [1] * 4], [1.0, 2.0]), cell4)


@given(st.integers(0, 10_000), st.sampled_from(["exp", "cube", "log"]))
def test_evaluate_srcc_transform_invariant(seed, kind):
    from oneproxy.search_space import cell_space

    space = cell_space(4)
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.1, 1.0, space.encoding_length)
    G = np.unique(space.sample_genes(rng, 30), axis=0)
    actual = rng.uniform(1, 10, G.shape[0])
    m = mset_from(space, G, actual)
    base = evaluate(LatencyPredictor(w, space.space_id), m, space)["srcc_vs_actual"]
    pred = LatencyPredictor(w, space.space_id).predict_genes(space, G)
    f = {"exp": np.exp, "cube": lambda v: v**3, "log": np.log}[kind]
    from oneproxy.monotonicity import srcc

    assert srcc(f(pred), actual) == pytest.approx(base, abs=1e-12)


class TestCsv:
    def test_round_trip(self, cell4, rng, tmp_path):
        G = np.unique(cell4.sample_genes(rng, 20), axis=0)
        m = mset_from(cell4, G, rng.uniform(1, 2, G.shape[0]), device="S5e")
        path = tmp_path / "m.csv"
        write_measurements(path, m, cell4)
        again = read_measurements(path, cell4)
        assert again.device_id == "S5e"
        assert np.array_equal(again.latencies, m.latencies)
        assert np.array_equal(again.gene_matrix(cell4), m.gene_matrix(cell4))

    def _write(self, tmp_path, rows):
        path = tmp_path / "m.csv"
        path.write_text("device_id,genotype_json,latency_ms\n" + "".join(r + "\n" for r in rows))
        return path

    def test_three_row_fixture(self, cell4, tmp_path):
        rows = [
            'd,"{""edges"":[""none"",""none"",""none"",""skip_connect""]}",1.5',
            'd,"{""edges"":[""nor_conv_3x3"",""none"",""none"",""none""]}",2.5',
            'd,"{""edges"":[""avg_pool_3x3"",""none"",""none"",""none""]}",3.5',
        ]
        m = read_measurements(self._write(tmp_path, rows), cell4)
        assert len(m) == 3
        assert list(m.latencies) == [1.5, 2.5, 3.5]

    def test_negative_latency_row(self, cell4, tmp_path):
        rows = [
            'd,"{""edges"":[""none"",""none"",""none"",""none""]}",1.0',
            'd,"{""edges"":[""none"",""none"",""none"",""skip_connect""]}",-1.0',
        ]
        with pytest.raises(NonpositiveLatency) as exc:
            read_measurements(self._write(tmp_path, rows), cell4)
        assert exc.value.row == 3

    def test_duplicate_row(self, cell4, tmp_path):
        row = 'd,"{""edges"":[""none"",""none"",""none"",""none""]}",1.0'
        with pytest.raises(DuplicateGenotype):
            read_measurements(self._write(tmp_path, [row, row]), cell4)

    def test_bad_header(self, cell4, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b,c\n")
        with pytest.raises(ParseError):
            read_measurements(path, cell4)

    def test_sample_rejects_zero(self, cell4):
        with pytest.raises(NonpositiveLatency):
            MeasurementSample(cell4.from_genes([0] * 4), 0.0)

    def test_predictor_json(self, cell4_proxy, tmp_path):
        path = tmp_path / "p.json"
        cell4_proxy.save(path)
        again = LatencyPredictor.load(path)
        assert again.space_id == cell4_proxy.space_id
        assert np.array_equal(again.weights, cell4_proxy.weights)
