import numpy as np
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from tnlab.estimator import KaAnalyzer, KaLifter
from tnlab.ka import lift
from tnlab.models import ExpModel


def test_lifter_matches_lift():
    X = np.array([[0.5, -0.2], [1.0, 0.3]])
    out = KaLifter().fit_transform(X)
    assert out.shape == (2, 6)
    assert np.allclose(out[1], lift(ExpModel(), 1.0, 0.3).ravel())


def test_lifter_in_pipeline():
    pipe = make_pipeline(FunctionTransformer(lambda X: X * [1.0, 0.5]), KaLifter())
    assert pipe.fit_transform(np.ones((3, 2)) * [[1], [2], [3]]).shape == (3, 6)


def test_analyzer_on_appendix(appendix_solutions):
    spec, sols = appendix_solutions
    est = KaAnalyzer(model=spec.model).fit(sols.st)
    assert est.rank_ == 2
    assert est.verdict_ == "no T_6 ordering"
    assert est.case_["case"] == 3
    assert np.isfinite(est.lambdas_).all()
    assert clone(est).get_params()["model"].describe() == spec.model.describe()
