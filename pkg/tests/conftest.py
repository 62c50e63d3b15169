import pytest

from timebinsim import PhysicalParams


@pytest.fixture
def params():
    return PhysicalParams()


@pytest.fixture
def clean_params():
    """Idealised source: spin always re-prepared, no stray light."""
    return PhysicalParams(p_hole_init=1.0, background_rate=0.0,
                          reset_flash_rate=0.0)
