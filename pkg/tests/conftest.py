from __future__ import annotations

from dataclasses import fields

import pytest


@pytest.fixture(autouse=True)
def clear_run_settings_cache():
    from gaugelab.core.config import get_settings

    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def restore_settings():
    """The CLI writes resolved values into the shared settings object."""

    from gaugelab.config import settings

    saved = {item.name: getattr(settings, item.name) for item in fields(settings)}
    yield
    for name, value in saved.items():
        setattr(settings, name, value)


@pytest.fixture
def isolated_env(monkeypatch: pytest.MonkeyPatch) -> pytest.MonkeyPatch:
    for name in ("GAUGELAB_CONFIG", "GAUGELAB_SOLUTION", "GAUGELAB_SAMPLES", "GAUGELAB_EPSILON"):
        monkeypatch.delenv(name, raising=False)
    return monkeypatch
