import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oneproxy.errors import InvalidGenotype, MalformedEncoding, ParseError, SpaceTooLarge
from oneproxy.search_space import (
    Genotype,
    SearchSpaceSpec,
    SpaceKind,
    arch_stats,
    cell_space,
    decode,
    encode,
    enumerate_genes,
    enumerate_space,
    load_space,
    random_sample,
)


def tiny_cell(flops, nbytes, space_id="tiny"):
    flops = np.asarray(flops, dtype=float)
    return SearchSpaceSpec(
        kind=SpaceKind.CELL,
        space_id=space_id,
        choices=tuple(f"op{i}" for i in range(flops.shape[1])),
        cost_flops=flops,
        cost_bytes=np.asarray(nbytes, dtype=float),
    )


class TestShapes:
    def test_mbv2_layout(self, mbv2):
        assert mbv2.positions == 21
        assert mbv2.n_slots == 9
        assert mbv2.encoding_length == 21 * 9 + 1 == 190
        assert mbv2.depth_values == (2, 3, 4)
        assert mbv2.kernel_values == (3, 5, 7)
        assert mbv2.expansion_values == (3, 4, 6)

    def test_fbnet_layout(self, fbnet):
        assert fbnet.positions == 22
        # 8 one-hot candidates plus skip as the all-zero group
        assert list(fbnet.gene_sizes) == [9] * 22
        assert fbnet.encoding_length == 22 * 8 + 1

    def test_cell_layout(self, cell4, cell6):
        assert cell6.cell_edge_count == 6 and cell4.cell_edge_count == 4
        assert cell6.n_slots == 5
        assert cell_space().cell_edge_count == 6

    def test_cost_tables_positive(self, mbv2, fbnet, cell6):
        for s in (mbv2, fbnet, cell6):
            assert np.all(s.cost_flops > 0) and np.all(s.cost_bytes > 0)

    def test_nonpositive_cost_rejected(self):
        with pytest.raises(ValueError):
            tiny_cell([[1.0, 0.0]], [[1.0, 1.0]])


class TestEncode:
    def test_first_choice_group(self, mbv2):
        g = Genotype(kernel=(0,) * 21, expansion=(0,) * 21, depth=(2,) * 5)
        x = encode(g, mbv2)
        assert list(x[:9]) == [1, 0, 0, 0, 0, 0, 0, 0, 0]
        assert x[-1] == 1

    def test_inactive_block_all_zero(self, mbv2):
        # depth 2 in stage 0 leaves blocks 2 and 3 inactive
        g = Genotype(kernel=(2,) * 21, expansion=(1,) * 21, depth=(0, 2, 2, 2, 2))
        x = encode(g, mbv2)
        assert x[2 * 9 : 4 * 9].sum() == 0
        assert x[:9].sum() == 1 and x[9:18].sum() == 1

    def test_fbnet_skip_is_zero(self, fbnet):
        g = Genotype(blocks=(8,) + (0,) * 21)
        x = encode(g, fbnet)
        assert x[:8].sum() == 0 and x[8:16].sum() == 1

    def test_second_choice_decodes_to_k3_e4(self, mbv2):
        g = Genotype(kernel=(0,) * 21, expansion=(0,) * 21, depth=(2,) * 5)
        x = encode(g, mbv2)
        x[:9] = 0
        x[1] = 1
        out = decode(x, mbv2)
        assert mbv2.kernel_values[out.kernel[0]] == 3
        assert mbv2.expansion_values[out.expansion[0]] == 4

    def test_all_zero_rejected_for_mbv2(self, mbv2):
        x = np.zeros(mbv2.encoding_length)
        x[-1] = 1
        with pytest.raises(MalformedEncoding):
            decode(x, mbv2)

    def test_bias_must_be_one(self, cell4):
        x = encode(Genotype(edges=(0, 1, 2, 3)), cell4)
        x[-1] = 0
        with pytest.raises(MalformedEncoding):
            decode(x, cell4)

    def test_two_bits_rejected(self, cell4):
        x = encode(Genotype(edges=(0, 1, 2, 3)), cell4)
        x[1] = 1
        with pytest.raises(MalformedEncoding):
            decode(x, cell4)

    def test_out_of_range_gene(self, mbv2, cell4):
        with pytest.raises(InvalidGenotype):
            encode(Genotype(kernel=(3,) * 21, expansion=(0,) * 21, depth=(0,) * 5), mbv2)
        with pytest.raises(InvalidGenotype):
            encode(Genotype(edges=(0, 1, 2)), cell4)

    @pytest.mark.parametrize("name", ["mbv2", "fbnet", "cell6"])
    def test_round_trip_1000(self, name):
        space = load_space(name)
        rng = np.random.default_rng(7)
        G = space.sample_genes(rng, 1000)
        for row in G:
            g = space.from_genes(row)
            assert decode(encode(g, space), space) == space.canonical(g)

    @pytest.mark.parametrize("name", ["mbv2", "fbnet", "cell6"])
    def test_group_structure(self, name):
        space = load_space(name)
        X = space.encode_genes(space.sample_genes(np.random.default_rng(3), 500))
        groups = X[:, :-1].reshape(500, space.positions, space.n_slots).sum(axis=2)
        assert set(np.unique(groups)) <= {0.0, 1.0}
        assert np.all(X[:, -1] == 1.0)


@given(st.integers(0, 2**32 - 1))
def test_round_trip_property(seed):
    from oneproxy.search_space import mbv2_space

    space = mbv2_space()
    g = random_sample(space, seed)
    assert decode(encode(g, space), space) == space.canonical(g)


class TestSampling:
    def test_same_seed_same_genotype(self, mbv2):
        assert random_sample(mbv2, 42) == random_sample(mbv2, 42)

    def test_depths_in_range(self, mbv2):
        for seed in range(200):
            g = random_sample(mbv2, seed)
            assert all(mbv2.depth_values[d] in (2, 3, 4) for d in g.depth)

    def test_kernel_frequencies(self, mbv2):
        G = mbv2.sample_genes(np.random.default_rng(0), 10000)
        kernels = G[:, 0]
        tol = 3 / np.sqrt(10000) * 3
        for k in range(3):
            assert abs(np.mean(kernels == k) - 1 / 3) <= tol


class TestEnumerate:
    def test_cell_sizes(self, cell4, cell6):
        assert len(enumerate_genes(cell6)) == 15625
        assert len(enumerate_genes(cell4)) == 625
        assert len(list(enumerate_space(cell4))) == 625

    def test_distinct_and_deterministic(self, cell4):
        a = enumerate_genes(cell4)
        assert len({tuple(r) for r in a}) == 625
        assert np.array_equal(a, enumerate_genes(cell4))

    def test_mbv2_too_large(self, mbv2):
        with pytest.raises(SpaceTooLarge):
            enumerate_genes(mbv2)

    def test_cap_override(self, cell4):
        with pytest.raises(SpaceTooLarge):
            enumerate_genes(cell4, cap=100)

    def test_small_mbv2_enumeration_matches_analytic_size(self, mbv2):
        doc = mbv2.to_dict()
        # shrink to 1 stage of up to 2 blocks, depth in {1, 2}, plus 1 fixed block
        doc["stages"].update(stage_count=1, max_blocks_per_stage=2, depths=[1, 2], positions=3)
        doc["space_id"] = "mini"
        doc["cost_table"] = [r for r in doc["cost_table"] if r[0] < 3]
        small = SearchSpaceSpec.from_dict(doc)
        rows = enumerate_genes(small)
        assert len(rows) == small.size() == (9 + 81) * 9
        assert len({tuple(r) for r in small.canonical_genes(rows)}) == len(rows)


class TestStats:
    def test_single_block_intensity(self):
        s = tiny_cell([[2.0e8]], [[5.0e7]])
        st_ = arch_stats(Genotype(edges=(0,)), s)
        assert st_.operational_intensity == 4.0

    def test_doubling_flops(self):
        s1 = tiny_cell([[1e8, 2e8], [3e8, 4e8]], [[1e7] * 2] * 2)
        s2 = tiny_cell(2 * s1.cost_flops, s1.cost_bytes)
        g = Genotype(edges=(1, 0))
        a, b = arch_stats(g, s1), arch_stats(g, s2)
        assert b.flops == 2 * a.flops
        assert b.operational_intensity == pytest.approx(2 * a.operational_intensity, rel=1e-15)

    def test_additive_over_blocks(self, cell6):
        g = Genotype(edges=(0, 1, 2, 3, 4, 0))
        st_ = arch_stats(g, cell6)
        flops = sum(cell6.cost_flops[p, c] for p, c in enumerate(g.edges))
        assert st_.flops == pytest.approx(flops, rel=1e-12)

    def test_inactive_choice_irrelevant(self, mbv2):
        a = Genotype(kernel=(0,) * 21, expansion=(0,) * 21, depth=(0,) * 5)
        k = list(a.kernel)
        k[3] = 2  # block 3 of stage 0 is inactive at depth 2
        b = Genotype(kernel=tuple(k), expansion=a.expansion, depth=a.depth)
        assert arch_stats(a, mbv2) == arch_stats(b, mbv2)

    def test_mbv2_intensity_range(self, mbv2):
        G = mbv2.sample_genes(np.random.default_rng(1), 1000)
        f, b = mbv2.stats_genes(G)
        oi = f / b
        assert oi.min() >= 2.0 and oi.max() <= 6.0


class TestSerialization:
    def test_genotype_json(self, mbv2):
        g = random_sample(mbv2, 5)
        doc = mbv2.to_json(g)
        assert set(doc) == {"kernel_size", "expansion_ratio", "depth"}
        assert set(doc["kernel_size"]) <= {3, 5, 7}
        assert mbv2.from_json(json.dumps(doc)) == g

    def test_bad_genotype_json(self, cell4):
        with pytest.raises(ParseError):
            cell4.from_json("{not json")
        with pytest.raises(InvalidGenotype):
            cell4.from_json({"edges": ["conv9x9"] * 4})

    @pytest.mark.parametrize("name", ["mbv2", "fbnet", "cell4"])
    def test_spec_document_round_trip(self, name, tmp_path):
        space = load_space(name)
        path = tmp_path / "space.json"
        path.write_text(json.dumps(space.to_dict()))
        again = load_space(str(path))
        assert again.space_id == space.space_id
        assert np.array_equal(again.cost_flops, space.cost_flops)
        G = space.sample_genes(np.random.default_rng(0), 50)
        assert np.array_equal(again.encode_genes(G), space.encode_genes(G))

    def test_incomplete_cost_table(self, cell4):
        doc = cell4.to_dict()
        doc["cost_table"] = doc["cost_table"][:-1]
        with pytest.raises(ParseError):
            SearchSpaceSpec.from_dict(doc)
