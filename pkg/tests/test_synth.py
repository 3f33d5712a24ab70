import numpy as np
import pytest

from capsulewardrobe import synth
from capsulewardrobe.errors import ValidationError


class TestPlantedModels:
    def test_phi_rows_stochastic_and_blocky(self, rng):
        phi = synth.planted_phi(4, 40, rng, active_frac=0.85)
        np.testing.assert_allclose(phi.sum(axis=1), 1.0, atol=1e-12)
        # each topic's block holds nearly all of its mass, and the dead zone
        # beyond the active slice carries only leak mass
        assert (phi[:, 34:] < 0.01).all()
        for t in range(4):
            assert phi[t].max() > 0.05

    def test_covariance_structure(self):
        sigma = synth.paired_covariance(4, rho=0.5, scale=2.0, cross=-0.2)
        assert sigma[0, 1] == sigma[1, 0] == 1.0  # rho * scale
        assert sigma[0, 2] == -0.4
        assert np.linalg.eigvalsh(sigma).min() > 0

    def test_covariance_rejects_indefinite(self):
        with pytest.raises(ValidationError):
            synth.paired_covariance(4, rho=0.5, scale=1.0, cross=-0.9)

    def test_corpus_deterministic(self):
        model = synth.planted_ctm(3, 30, seed=5)
        a = synth.sample_corpus(model, 20, seed=6)
        b = synth.sample_corpus(model, 20, seed=6)
        assert a == b

    def test_catalog_shape_and_meta(self):
        model = synth.planted_ctm(4, 40, seed=1)
        catalog = synth.synth_catalog(model, layers=3, per_layer=5, seed=2)
        assert catalog.counts == (5, 5, 5)
        for g in catalog.all_garments():
            assert g.meta_dict["season"] in ("winter", "summer")

    def test_positive_outfits_consistent_meta(self):
        model = synth.planted_ctm(4, 40, seed=1)
        outfits = synth.synth_positive_outfits(model, 10, layers=3, seed=3)
        assert len(outfits) == 10
        for entry in outfits:
            assert len(entry["pieces"]) == 3
            layers = {p["layer"] for p in entry["pieces"]}
            assert layers == {0, 1, 2}


class TestMakeInstance:
    def test_deterministic(self):
        cat_a, cfg_a = synth.make_instance(3)
        cat_b, cfg_b = synth.make_instance(3)
        assert [g.id for g in cat_a.all_garments()] == [g.id for g in cat_b.all_garments()]
        assert cfg_a.scorer.threshold == cfg_b.scorer.threshold

    def test_threshold_is_discriminating(self):
        # the calibrated step threshold leaves both classes populated
        from capsulewardrobe.catalog import Outfit
        import itertools

        catalog, cfg = synth.make_instance(4, threshold_quantile=0.7, bag_range=(3, 6))
        outfits = [Outfit(c) for c in itertools.product(*catalog.layers)]
        stats = cfg.scorer.stats_many(outfits)
        passing = sum(s.compat for s in stats)
        assert 0 < passing < len(outfits)
