import pytest

from gripsense.materials import CONTAINER_MASS, MATERIAL_CLASSES, MaterialParams, material_table


def test_table_covers_canonical_classes():
    table = material_table()
    assert set(table) == set(MATERIAL_CLASSES)
    assert all(table[name].name == name for name in table)


def test_masses_and_counts():
    table = material_table()
    assert table["empty"].total_mass == CONTAINER_MASS
    assert table["empty"].particle_count == 0
    for name in MATERIAL_CLASSES:
        assert table[name].total_mass >= CONTAINER_MASS
    # event rate must rank the contents unambiguously
    counts = [table[n].particle_count for n in
              ("rice", "cereal", "vitamins", "gummies", "empty")]
    assert counts == sorted(counts, reverse=True)
    assert len(set(counts)) == len(counts)


def test_impact_centroids_spectrally_separated():
    table = material_table()
    sounded = [table[n] for n in MATERIAL_CLASSES if table[n].particle_count > 0]
    centroids = sorted(m.impact_centroid_hz for m in sounded)
    gaps = [b - a for a, b in zip(centroids, centroids[1:])]
    assert min(gaps) >= 400.0


def test_table_returns_a_copy():
    a = material_table()
    a["rice"] = None
    assert material_table()["rice"] is not None


@pytest.mark.parametrize("kwargs", [
    dict(total_mass=0.0),
    dict(total_mass=-0.1),
    dict(particle_count=-1),
    dict(impact_centroid_hz=0.0),
    dict(impact_decay_s=0.0),
    dict(restitution=1.5),
    dict(restitution=-0.1),
])
def test_parameter_validation(kwargs):
    base = dict(name="rice", total_mass=0.2, particle_count=100,
                impact_centroid_hz=1000.0, impact_bandwidth_hz=100.0,
                impact_decay_s=0.01, restitution=0.5)
    base.update(kwargs)
    with pytest.raises(ValueError):
        MaterialParams(**base)


def test_only_empty_may_be_silent():
    with pytest.raises(ValueError):
        MaterialParams("rice", 0.2, 0, 1000.0, 100.0, 0.01, 0.5)
    MaterialParams("empty", CONTAINER_MASS, 0, 1000.0, 100.0, 0.01, 0.5)
