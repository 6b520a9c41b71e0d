import pytest

from shearlab.profiles import ShearProfile, ShearSegment, concat
from shearlab.spectral import YSpectrum


def test_alternating_signs_and_duration():
    prof = ShearProfile.alternating(YSpectrum.sin(1), 0.5, 1.75)
    assert prof.boundaries() == [0.0, 0.5, 1.0, 1.5, 1.75]
    signs = [seg.u.evaluate(1.0).real > 0 for seg in prof.segments]
    assert signs == [True, False, True, False]
    assert prof.sup_norm_bound() == pytest.approx(1.0)


def test_truncated_after_and_cycled():
    prof = ShearProfile((ShearSegment(YSpectrum.sin(3), 0.25), ShearSegment(YSpectrum.zero(), 0.75)))
    assert prof.truncated(0.5).boundaries() == [0.0, 0.25, 0.5]
    assert prof.after(0.1).boundaries() == pytest.approx([0.0, 0.15, 0.9])
    cyc = prof.cycled(2.5)
    assert cyc.duration == pytest.approx(2.5)
    assert len(cyc.segments) == 6
    assert concat([prof, prof]).duration == pytest.approx(2.0)


@pytest.mark.parametrize("bad", [
    lambda: ShearSegment(YSpectrum.sin(1), 0.0),
    lambda: ShearSegment(YSpectrum.from_dict({1: 1.0}), 1.0),
    lambda: ShearProfile(()),
    lambda: ShearProfile.steady(YSpectrum.sin(1), 1.0).after(1.0),
])
def test_invalid(bad):
    with pytest.raises(ValueError):
        bad()
