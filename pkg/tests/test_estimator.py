"""Estimator facade: sklearn protocol plus quantization semantics."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hpquant.descriptor import parse_network
from hpquant.estimator import HybridPrecisionQuantizer
from hpquant.fixtures import labeled_samples, spread_weights
from hpquant.model import QuantScheme


@pytest.fixture(scope="module")
def labeled():
    x, labels = labeled_samples(8, 3, 6, 6, seed=0)
    w = np.eye(3).reshape(3, 3, 1, 1)
    return x, labels, w


class TestSklearnProtocol:
    def test_get_set_params_roundtrip(self):
        est = HybridPrecisionQuantizer(scheme="3d", coeff_bits=6, threads=2)
        params = est.get_params()
        assert params["scheme"] == "3d"
        assert params["coeff_bits"] == 6
        est2 = HybridPrecisionQuantizer().set_params(**params)
        assert est2.get_params() == params

    def test_clone(self, labeled):
        x, labels, w = labeled
        est = HybridPrecisionQuantizer(weights=[w], scheme="2d").fit(x)
        dup = clone(est)
        assert dup.get_params()["scheme"] == "2d"
        with pytest.raises(NotFittedError):
            dup.transform(x)  # clones drop fitted state

    def test_unfitted_raises(self, labeled):
        x, _, _ = labeled
        with pytest.raises(NotFittedError):
            HybridPrecisionQuantizer(weights=[np.ones((1, 3, 1, 1))]).transform(x)

    def test_fit_requires_weights(self, labeled):
        x, _, _ = labeled
        with pytest.raises(ValueError, match="weights"):
            HybridPrecisionQuantizer().fit(x)

    def test_bad_input_rank(self, labeled):
        _, _, w = labeled
        with pytest.raises(ValueError):
            HybridPrecisionQuantizer(weights=[w]).fit(np.zeros((2, 3)))


class TestQuantizationSemantics:
    def test_fit_transform_shapes(self, labeled):
        x, _, w = labeled
        est = HybridPrecisionQuantizer(weights=[w]).fit(x)
        assert est.n_features_in_ == 3 * 6 * 6
        maps = est.transform(x)
        assert maps.shape == (8, 3, 6, 6)
        single = est.transform(x[0])
        np.testing.assert_array_equal(single[0], maps[0])

    def test_predict_and_score(self, labeled):
        x, labels, w = labeled
        est = HybridPrecisionQuantizer(weights=[w]).fit(x)
        np.testing.assert_array_equal(est.predict(x), labels)
        assert est.score(x, labels) == 1.0

    def test_score_shape_mismatch(self, labeled):
        x, labels, w = labeled
        est = HybridPrecisionQuantizer(weights=[w]).fit(x)
        with pytest.raises(ValueError):
            est.score(x, labels[:3])

    def test_describe_is_parseable(self, labeled):
        x, _, w = labeled
        est = HybridPrecisionQuantizer(weights=[w], scheme="4d").fit(x)
        net = parse_network(est.describe())
        assert len(net.layers) == 1
        assert net.layers[0].scheme is QuantScheme.FOUR_D
        assert net.layers[0].coeff_precision == 8

    def test_scheme_changes_formats(self):
        w = spread_weights()
        rng = np.random.default_rng(3)
        x = rng.uniform(-4, 4, size=(2, 4, 8, 8))
        fine = HybridPrecisionQuantizer(weights=[w], scheme="2d").fit(x)
        coarse = HybridPrecisionQuantizer(weights=[w], scheme="4d").fit(x)
        n_fine = len(fine.network_.layers[0].coeff_formats.entries)
        n_coarse = len(coarse.network_.layers[0].coeff_formats.entries)
        assert (n_fine, n_coarse) == (16, 1)
        err_fine = np.abs(w - fine.qweights_[0].dequantize()).max()
        err_coarse = np.abs(w - coarse.qweights_[0].dequantize()).max()
        assert err_fine < err_coarse

    def test_rounding_param_flows_to_engine(self, labeled):
        x, _, w = labeled
        even = HybridPrecisionQuantizer(weights=[w], rounding="even").fit(x)
        trunc = HybridPrecisionQuantizer(weights=[w], rounding="trunc").fit(x)
        assert not np.array_equal(even.transform(x), trunc.transform(x))

    def test_threads_do_not_change_output(self, labeled):
        x, _, _ = labeled
        w = spread_weights(3, 3, 3, 3, seed=2)
        a = HybridPrecisionQuantizer(weights=[w], threads=1).fit(x)
        b = HybridPrecisionQuantizer(weights=[w], threads=8).fit(x)
        np.testing.assert_array_equal(a.transform(x), b.transform(x))
