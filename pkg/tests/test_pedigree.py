import numpy as np
import pytest

from kinguard.errors import BadFrequency, MissingTruth, UnknownParent
from kinguard.pedigree import (
    UNRELATED,
    PedigreeTruth,
    build_study_population,
    generate_population,
    generate_relative,
    mendelian_child,
    sample_genotypes,
)


def test_generate_population_shape_and_ids():
    freqs = np.full(10, 0.3)
    ds = generate_population(5, freqs, seed=0)
    assert ds.n_samples == 5 and ds.n_snps == 10
    assert ds.sample_ids[0] == "s0000"
    assert ds.snp_ids[0] == "rs000000"
    assert set(np.unique(ds.matrix)) <= {0, 1, 2}


def test_generate_population_deterministic():
    freqs = np.linspace(0.05, 0.5, 20)
    a = generate_population(8, freqs, seed=123)
    b = generate_population(8, freqs, seed=123)
    c = generate_population(8, freqs, seed=124)
    assert np.array_equal(a.matrix, b.matrix)
    assert not np.array_equal(a.matrix, c.matrix)


def test_zero_frequency_gives_all_reference():
    ds = generate_population(4, np.zeros(6), seed=1)
    assert not ds.matrix.any()


def test_half_frequency_statistics():
    # at f = 0.5 the genotype distribution is (0.25, 0.5, 0.25)
    ds = generate_population(2000, np.full(50, 0.5), seed=2)
    counts = np.bincount(ds.matrix.ravel(), minlength=3) / ds.matrix.size
    assert counts[0] == pytest.approx(0.25, abs=0.01)
    assert counts[1] == pytest.approx(0.5, abs=0.01)
    assert counts[2] == pytest.approx(0.25, abs=0.01)


def test_frequency_validation():
    with pytest.raises(BadFrequency):
        generate_population(3, np.array([0.6]), seed=0)
    with pytest.raises(BadFrequency):
        generate_population(3, np.array([-0.1]), seed=0)
    with pytest.raises(BadFrequency):
        generate_population(0, np.array([0.1]), seed=0)


def test_hardy_weinberg_frequencies():
    f = 0.2
    rng = np.random.default_rng(3)
    mat = sample_genotypes(5000, np.full(20, f), rng)
    counts = np.bincount(mat.ravel(), minlength=3) / mat.size
    assert counts[0] == pytest.approx((1 - f) ** 2, abs=0.01)
    assert counts[1] == pytest.approx(2 * f * (1 - f), abs=0.01)
    assert counts[2] == pytest.approx(f ** 2, abs=0.01)


def test_mendelian_child_never_opposes_parent():
    rng = np.random.default_rng(4)
    parent_a = rng.integers(0, 3, 500).astype(np.int8)
    parent_b = rng.integers(0, 3, 500).astype(np.int8)
    child = mendelian_child(parent_a, parent_b, rng)
    # a parent passing no minor allele caps the child below 2, and a
    # homozygous-2 parent guarantees at least 1
    assert not np.any((parent_a == 0) & (parent_b == 0) & (child > 0))
    assert not np.any((parent_a == 2) & (parent_b == 2) & (child < 2))
    assert set(np.unique(child)) <= {0, 1, 2}


def test_generate_relative_first_degree_truth():
    freqs = np.full(100, 0.3)
    ds = generate_population(5, freqs, seed=5)
    row, entry = generate_relative(ds, "s0002", 1, freqs, seed=6)
    assert entry == ("s0002", "s0002-d1", 1)
    parent = ds.row("s0002")
    # no (0,2) opposition is possible between parent and direct child
    assert not np.any((parent == 0) & (row == 2))
    assert not np.any((parent == 2) & (row == 0))


def test_generate_relative_validation():
    freqs = np.full(10, 0.3)
    ds = generate_population(3, freqs, seed=7)
    with pytest.raises(UnknownParent):
        generate_relative(ds, "nope", 1, freqs, seed=0)
    with pytest.raises(BadFrequency):
        generate_relative(ds, "s0000", 3, freqs, seed=0)


def test_generate_relative_deterministic():
    freqs = np.full(50, 0.25)
    ds = generate_population(4, freqs, seed=8)
    r1, _ = generate_relative(ds, "s0001", 2, freqs, seed=9)
    r2, _ = generate_relative(ds, "s0001", 2, freqs, seed=9)
    assert np.array_equal(r1, r2)


def test_truth_registry():
    truth = PedigreeTruth(sample_ids={"a", "b", "c"})
    truth.add("a", "b", 1)
    assert truth.degree_of("a", "b") == 1
    assert truth.degree_of("b", "a") == 1  # symmetric
    assert truth.degree_of("a", "c") == UNRELATED
    with pytest.raises(MissingTruth):
        truth.degree_of("a", "zzz")


def test_truth_csv_roundtrip():
    truth = PedigreeTruth(sample_ids={"x", "y", "z"})
    truth.add("y", "x", 2)
    truth.add("x", "z", 1)
    text = truth.to_csv()
    assert text.splitlines()[0] == "id1,id2,degree"
    again = PedigreeTruth.from_csv(text, sample_ids={"x", "y", "z"})
    assert again.pairs == {("x", "y"): 2, ("x", "z"): 1}


def test_build_study_population_structure():
    freqs = np.full(200, 0.3)
    pop = build_study_population(20, 4, 2, freqs, seed=10)
    assert pop.researcher_a.n_samples == 20
    assert pop.researcher_b.n_samples == 6
    assert len(pop.truth.related_pairs) == 6
    # every related pair straddles the two datasets
    a_ids = set(pop.researcher_a.sample_ids)
    b_ids = set(pop.researcher_b.sample_ids)
    for (x, y), degree in pop.truth.related_pairs.items():
        assert degree in (1, 2)
        assert {x, y} & a_ids and {x, y} & b_ids
    degrees = sorted(pop.truth.related_pairs.values())
    assert degrees == [1, 1, 1, 1, 2, 2]


def test_build_study_population_no_relatives():
    pop = build_study_population(5, 0, 0, np.full(10, 0.2), seed=11)
    assert pop.researcher_b.n_samples == 0
    assert pop.truth.related_pairs == {}
    assert pop.truth.to_csv() == "id1,id2,degree\n"


def test_build_study_population_validation():
    with pytest.raises(BadFrequency):
        build_study_population(3, 3, 1, np.full(10, 0.2), seed=0)
