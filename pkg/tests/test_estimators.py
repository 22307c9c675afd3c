import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from kneeanomaly.estimators import (
    FocalWeightTransformer,
    LargestComponentFilter,
    SmallComponentFilter,
    ZScoreNormalizer,
)
from kneeanomaly.volume import LabelMap, Volume, z_normalize


@pytest.mark.parametrize(
    "est",
    [ZScoreNormalizer(clip=3.0), FocalWeightTransformer(beta=5.0),
     LargestComponentFilter(classes=(1,), allowance_voxels=4), SmallComponentFilter(min_volume_mm3=2.0)],
)
def test_params_round_trip(est):
    params = est.get_params()
    c = clone(est)
    assert c.get_params() == params and c is not est
    c.set_params(**params)


def test_zscore_matches_function(rng):
    x = Volume((1.0, 2.0, 0.5), values=rng.normal(3.0, 2.0, (6, 7, 8)))
    out = ZScoreNormalizer().fit_transform(x)
    assert isinstance(out, Volume) and out.spacing == x.spacing
    assert np.allclose(out.values, z_normalize(x).values, atol=1e-12)
    raw = ZScoreNormalizer().fit(x.values).transform(x.values)
    assert isinstance(raw, np.ndarray)
    with pytest.raises(NotFittedError):
        ZScoreNormalizer().transform(x)
    with pytest.raises(ValueError):
        ZScoreNormalizer().fit(np.ones((2, 2, 2)))
    with pytest.raises(ValueError):
        ZScoreNormalizer().fit(np.ones((2, 2)))


def test_zscore_fit_statistics_reused(rng):
    train = rng.normal(0, 1, (5, 5, 5))
    est = ZScoreNormalizer(clip=5.0).fit(train)
    assert est.mean_ == pytest.approx(train.mean()) and est.scale_ == pytest.approx(train.std())
    other = train + est.scale_
    expected = (np.clip((other - train.mean()) / train.std(), -5, 5) + 5) / 10
    assert np.allclose(est.transform(other), expected, atol=1e-12)


def test_focal_weight_transformer():
    e = np.zeros((2, 2, 2))
    e[0, 0, 0] = 1.0
    f = FocalWeightTransformer().fit_transform(e)
    assert f.min() == 1.0 and f.max() == 100.0
    with pytest.raises(ValueError):
        FocalWeightTransformer().transform(-e)


def test_component_filters_in_pipeline():
    lab = np.zeros((5, 5, 80), np.uint8)
    lab[1:4, 1:4, :10] = 1
    lab[2, 2, 70] = 1  # stray, 61 voxels away
    lab[0, 0, 30:32] = 8  # 2-voxel lesion
    lab[4, 4, 40:45] = 8
    m = LabelMap(labels=lab)
    pipe = make_pipeline(LargestComponentFilter(classes=(1,)), SmallComponentFilter(min_volume_mm3=3.0))
    out = pipe.fit_transform(m)
    assert isinstance(out, LabelMap)
    assert out.labels[2, 2, 70] == 0 and out.labels[0, 0, 30] == 0
    assert (out.labels == 1).sum() == 90 and (out.labels == 8).sum() == 5
    # filters leave the input untouched
    assert lab[2, 2, 70] == 1


def test_check_labels_rejects_floats():
    with pytest.raises(ValueError):
        LargestComponentFilter().fit(np.zeros((2, 2, 2)))
