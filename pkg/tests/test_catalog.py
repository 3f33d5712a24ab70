import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capsulewardrobe.catalog import (
    AttributeVocab,
    Capsule,
    Catalog,
    Outfit,
    build_outfit,
    capsule_outfits,
    catalog_to_dict,
    incremental_outfits,
    load_catalog,
    make_garment,
)
from capsulewardrobe.errors import CatalogError, ValidationError


def write_catalog(tmp_path, payload):
    path = tmp_path / "catalog.json"
    path.write_text(json.dumps(payload))
    return path


VALID = {
    "vocab": [f"a{i}" for i in range(10)],
    "layers": 2,
    "garments": [
        {"id": "g1", "layer": 0, "attributes": ["a0", "a1"], "meta": {"season": "winter"}},
        {"id": "g2", "layer": 0, "attributes": ["a2"]},
        {"id": "g3", "layer": 0, "attributes": ["a3"]},
        {"id": "g4", "layer": 1, "attributes": ["a4", "a4"]},
        {"id": "g5", "layer": 1, "attributes": ["a5"]},
        {"id": "g6", "layer": 1, "attributes": ["a6"]},
    ],
}


class TestLoadCatalog:
    def test_basic_fields(self, tmp_path):
        catalog = load_catalog(write_catalog(tmp_path, VALID))
        assert catalog.n_layers == 2
        assert catalog.counts == (3, 3)
        assert len(catalog.vocab) == 10

    def test_attribute_multiset_kept(self, tmp_path):
        catalog = load_catalog(write_catalog(tmp_path, VALID))
        assert catalog.garment("g4").attributes == (4, 4)

    def test_unknown_attribute(self, tmp_path):
        bad = json.loads(json.dumps(VALID))
        bad["garments"][0]["attributes"] = ["zzz"]
        with pytest.raises(CatalogError, match="unknown attribute"):
            load_catalog(write_catalog(tmp_path, bad))

    def test_duplicate_id(self, tmp_path):
        bad = json.loads(json.dumps(VALID))
        bad["garments"][1]["id"] = "g1"
        with pytest.raises(CatalogError, match="duplicate garment id"):
            load_catalog(write_catalog(tmp_path, bad))

    def test_layer_out_of_range(self, tmp_path):
        bad = json.loads(json.dumps(VALID))
        bad["garments"][0]["layer"] = 2
        with pytest.raises(CatalogError, match="layer"):
            load_catalog(write_catalog(tmp_path, bad))

    def test_parse_failure(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{nope")
        with pytest.raises(CatalogError, match="cannot parse"):
            load_catalog(path)

    def test_empty_bag_rejected(self, tmp_path):
        bad = json.loads(json.dumps(VALID))
        bad["garments"][0]["attributes"] = []
        with pytest.raises(CatalogError, match="empty attribute bag"):
            load_catalog(write_catalog(tmp_path, bad))

    def test_experiment_scale_layers(self, tmp_path):
        # 3 layers x 150 candidates + 1 layer x 50
        vocab = [f"a{i}" for i in range(20)]
        garments = []
        for layer, n in enumerate([150, 150, 150, 50]):
            for j in range(n):
                garments.append(
                    {"id": f"L{layer}g{j}", "layer": layer, "attributes": [vocab[j % 20]]}
                )
        catalog = load_catalog(
            write_catalog(tmp_path, {"vocab": vocab, "layers": 4, "garments": garments})
        )
        assert catalog.n_layers == 4
        assert catalog.counts == (150, 150, 150, 50)

    def test_roundtrip(self, tmp_path):
        catalog = load_catalog(write_catalog(tmp_path, VALID))
        again = catalog_to_dict(catalog)
        assert again["vocab"] == VALID["vocab"]
        assert {g["id"] for g in again["garments"]} == {g["id"] for g in VALID["garments"]}


class TestBuildOutfit:
    def test_multiset_union(self):
        a = make_garment("a", 0, [0, 1])
        b = make_garment("b", 1, [1, 2])
        outfit = build_outfit([a, b])
        assert outfit.document == (0, 1, 1, 2)

    def test_single_garment_identity(self):
        g = make_garment("a", 0, [3, 3, 5])
        assert build_outfit([g]).document == g.attributes

    def test_same_layer_rejected(self):
        a = make_garment("a", 0, [0])
        b = make_garment("b", 0, [1])
        with pytest.raises(ValidationError, match="share a layer"):
            build_outfit([a, b])

    @given(st.permutations(list(range(4))))
    @settings(max_examples=24, deadline=None)
    def test_order_independent(self, order):
        garments = [make_garment(f"g{i}", i, [i, i + 1]) for i in range(4)]
        shuffled = [garments[i] for i in order]
        assert build_outfit(shuffled).document == build_outfit(garments).document
        assert build_outfit(shuffled) == build_outfit(garments)


class TestCapsuleOutfits:
    def test_product_cardinality(self, tiny_catalog):
        capsule = Capsule((("top1", "top2"), ("bot1", "bot2")))
        assert len(capsule_outfits(capsule, tiny_catalog)) == 4

    def test_three_layer_64(self):
        vocab = AttributeVocab([f"a{i}" for i in range(8)])
        garments = [
            make_garment(f"L{layer}g{j}", layer, [j % 8])
            for layer in range(3)
            for j in range(4)
        ]
        catalog = Catalog(vocab, 3, garments)
        capsule = Capsule(
            tuple(tuple(f"L{layer}g{j}" for j in range(4)) for layer in range(3))
        )
        assert len(capsule_outfits(capsule, catalog)) == 64

    def test_empty_layer_skipped(self):
        # one layer empty, others (2, 3): enumerate the product by hand
        vocab = AttributeVocab([f"a{i}" for i in range(8)])
        garments = [make_garment(f"A{j}", 0, [j]) for j in range(2)]
        garments += [make_garment(f"B{j}", 1, [j + 2]) for j in range(3)]
        garments += [make_garment(f"C{j}", 2, [j + 5]) for j in range(3)]
        catalog = Catalog(vocab, 3, garments)
        capsule = Capsule((("A0", "A1"), (), ("C0", "C1", "C2")))
        outfits = capsule_outfits(capsule, catalog)
        expected = {
            (a, c) for a in ("A0", "A1") for c in ("C0", "C1", "C2")
        }
        assert {o.member_ids for o in outfits} == expected

    def test_lexicographic_order(self, tiny_catalog):
        capsule = Capsule((("top2", "top1"), ("bot1", "bot3")))
        outfits = capsule_outfits(capsule, tiny_catalog)
        assert [o.member_ids for o in outfits] == [
            ("top2", "bot1"),
            ("top2", "bot3"),
            ("top1", "bot1"),
            ("top1", "bot3"),
        ]

    def test_validation(self, tiny_catalog):
        with pytest.raises(ValidationError):
            capsule_outfits(Capsule((("top1", "bot1"),)), tiny_catalog)
        with pytest.raises(ValidationError):
            Capsule((("top1", "top1"),))


class TestIncrementalOutfits:
    def test_product_count(self, tiny_catalog):
        capsule = Capsule(((), ("bot1", "bot2")))
        new = incremental_outfits(capsule, tiny_catalog.garment("top1"), tiny_catalog)
        assert len(new) == 2

    def test_all_other_layers_empty(self, tiny_catalog):
        capsule = Capsule.empty(2)
        new = incremental_outfits(capsule, tiny_catalog.garment("top1"), tiny_catalog)
        assert len(new) == 1
        assert new[0].member_ids == ("top1",)

    def test_already_selected(self, tiny_catalog):
        capsule = Capsule((("top1",), ()))
        with pytest.raises(ValidationError, match="already selected"):
            incremental_outfits(capsule, tiny_catalog.garment("top1"), tiny_catalog)

    def test_union_identity_nonempty_layer(self, tiny_catalog):
        # adding to an already-occupied layer: new outfit set is exactly the
        # old set plus the increments, and the union is disjoint
        capsule = Capsule((("top1",), ("bot1", "bot2")))
        garment = tiny_catalog.garment("top2")
        old = set(capsule_outfits(capsule, tiny_catalog))
        inc = set(incremental_outfits(capsule, garment, tiny_catalog))
        after = set(capsule_outfits(capsule.with_garment(0, "top2"), tiny_catalog))
        assert after == old | inc
        assert not (old & inc)

    def test_union_identity_empty_layer(self, tiny_catalog):
        # adding to an empty layer replaces the outfit set: the increments
        # are exactly the new outfits (participation changes every outfit)
        capsule = Capsule(((), ("bot1", "bot2")))
        garment = tiny_catalog.garment("top1")
        inc = set(incremental_outfits(capsule, garment, tiny_catalog))
        after = set(capsule_outfits(capsule.with_garment(0, "top1"), tiny_catalog))
        assert after == inc

    def test_cardinality_formula(self, tiny_catalog):
        for sizes in [(1, 1), (2, 2), (2, 3), (0, 3)]:
            tops = tuple(f"top{i+1}" for i in range(sizes[0]))
            bots = tuple(f"bot{i+1}" for i in range(sizes[1]))
            capsule = Capsule((tops, bots))
            expected = 1
            for s in sizes:
                if s:
                    expected *= s
            if all(s == 0 for s in sizes):
                expected = 0
            assert len(capsule_outfits(capsule, tiny_catalog)) == expected
