import math
from datetime import datetime, timezone

import numpy as np
import pytest

SYNTH_REGION = (37.55, 37.85, -122.55, -122.25)  # min_lat, max_lat, min_lon, max_lon


def synthetic_checkin_lines(n_users=500, per_user=20, seed=7):
    """Deterministic fake check-in file: a few hundred users clustered around
    hotspots inside the default region, 10% uniform background."""
    rng = np.random.default_rng(seed)
    min_lat, max_lat, min_lon, max_lon = SYNTH_REGION
    n_spots = 8
    s_lat = rng.uniform(min_lat + 0.05, max_lat - 0.05, n_spots)
    s_lon = rng.uniform(min_lon + 0.05, max_lon - 0.05, n_spots)
    sigma_deg = 120.0 / 111195.0
    lon_stretch = 1.0 / math.cos(math.radians((min_lat + max_lat) / 2))
    t0 = 1287532800
    lines = []
    for u in range(n_users):
        pref = int(rng.integers(0, n_spots))
        for c in range(per_user):
            if rng.random() < 0.9:
                spot = pref if rng.random() < 0.7 else int(rng.integers(0, n_spots))
                lat = s_lat[spot] + rng.normal(0, sigma_deg)
                lon = s_lon[spot] + rng.normal(0, sigma_deg * lon_stretch)
                venue = 1000 + spot
            else:
                lat = rng.uniform(min_lat, max_lat)
                lon = rng.uniform(min_lon, max_lon)
                venue = int(rng.integers(2000, 9000))
            lat = min(max(lat, min_lat), max_lat)
            lon = min(max(lon, min_lon), max_lon)
            stamp = datetime.fromtimestamp(t0 + 3600 * (u * per_user + c), tz=timezone.utc)
            lines.append(
                f"{u}\t{stamp.strftime('%Y-%m-%dT%H:%M:%SZ')}\t{lat:.7f}\t{lon:.7f}\t{venue}"
            )
    return lines


@pytest.fixture(scope="session")
def synthetic_checkins_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "synthetic_checkins.tsv"
    path.write_text("\n".join(synthetic_checkin_lines()) + "\n")
    return str(path)
