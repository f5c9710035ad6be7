import os
from dataclasses import asdict, dataclass, field

from scenestats.exceptions import InvalidValue
from scenestats.serializers import RunConfigSerializer
from scenestats.utils import get_setting, raise_for_errors


def available_parallelism():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


@dataclass(frozen=True)
class RunConfig:
    """
    Parameters of one analysis run.

    Defaults are the values the statistics are defined with: 100 features per
    frame, a 320x240 Laplacian raster and one worker per available CPU.
    """
    feature_budget: int = 100
    ratio_threshold: float = 0.75
    fast_threshold: float = 0.08
    ransac_iters: int = 1000
    ransac_threshold_px: float = 3.0
    seed: int = 0
    jobs: int = field(default_factory=available_parallelism)
    normalize_mode: str = 'global'
    laplacian_size: tuple = (320, 240)

    @classmethod
    def from_settings(cls, **overrides):
        """
        Build a config from ``SCENESTATS_*`` settings and explicit overrides.

        Overrides set to None are ignored, so argparse namespaces can be
        passed through as they are.

        Raises:
            InvalidValue: If the merged values break a config invariant.
        """
        defaults = cls()
        values = {
            name: get_setting(name.upper(), value)
            for name, value in asdict(defaults).items()
        }
        values.update(
            {key: value for key, value in overrides.items()
             if value is not None})
        values['laplacian_size'] = list(values['laplacian_size'])

        serializer = RunConfigSerializer(data=values)
        if not serializer.is_valid():
            raise_for_errors(serializer.errors, InvalidValue)
        data = dict(serializer.validated_data)
        data['laplacian_size'] = tuple(data['laplacian_size'])
        return cls(**data)
