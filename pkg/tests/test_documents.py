import pytest

from rlscale.documents import (
    dumps,
    fit_from_dict,
    fit_to_dict,
    loads,
    table_digest,
)
from rlscale.errors import ValidationError
from rlscale.fitkit import FitResult
from rlscale.laws import BatchRuleFit, DataFit, SharedExponentFamily


class TestRoundTrips:
    def test_batch_rule(self):
        fit = BatchRuleFit(a_b=1680.64, b_b=6.01e7, alpha_b=0.30, beta_b=1.12)
        doc = fit_to_dict(fit)
        assert doc["family"] == "batch_rule"
        assert fit_from_dict(loads(dumps(doc))) == fit

    def test_data_fit_with_metadata(self):
        fit = DataFit(d_min=5e4, a=1e6, alpha=0.2, b=1e7, beta=0.7,
                      threshold=780.0, unstable=True)
        result = FitResult(params={"d_min": 5e4}, loss=1e-9, converged=True,
                           iterations=40, n_restarts_used=2)
        doc = fit_to_dict(fit, result, provenance={"input": "x.csv"})
        assert doc["diagnostics"]["loss"] == 1e-9
        assert doc["diagnostics"]["n_restarts_used"] == 2
        assert doc["provenance"] == {"input": "x.csv"}
        back = fit_from_dict(loads(dumps(doc)))
        assert back == fit and back.unstable

    def test_shared_exponent(self):
        fam = SharedExponentFamily(
            alpha=0.3, beta=0.6,
            per_task={"a": {"d_min": 1e4, "a": 1e5, "b": 1e6},
                      "b": {"d_min": 2e4, "a": 3e5, "b": 4e6}},
            threshold=700.0)
        assert fit_from_dict(loads(dumps(fit_to_dict(fam)))) == fam

    def test_unknown_family_and_type(self):
        with pytest.raises(ValidationError, match="unknown fit family"):
            fit_from_dict({"family": "bogus", "params": {}})
        with pytest.raises(ValidationError, match="cannot serialize"):
            fit_to_dict(object())


class TestDigest:
    def test_stable_and_content_sensitive(self):
        assert table_digest("abc") == table_digest("abc")
        assert table_digest("abc") != table_digest("abd")
        assert len(table_digest("abc")) == 16
