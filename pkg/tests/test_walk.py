from fractions import Fraction

import numpy as np

from cantor_cascade.cantor import CENTRAL, INFINITY, STANDARD, Gap, central, infinity_interval, standard
from cantor_cascade.chartgrid import GridNode, Params, expand, root_node
from cantor_cascade.walk import (
    TAIL,
    class_checks,
    first_depth_reaching,
    hitting_measure_check,
    hitting_measure_check_five_ary,
    jump_probabilities,
    path_rng,
    sample_child,
    simulate,
    support_mass,
    write_trajectories,
    x_increment,
)

P = Params()
MIDDLE = Gap(1, 1)


def test_jump_probabilities_sum_to_one():
    for w in (standard(MIDDLE, P.N + 1, P.N), central(Gap(2, 1), P.N)):
        node = GridNode(w, Fraction(0), Fraction(1), 1)
        probs = jump_probabilities(node, P, w.geometry.length / 3**6)
        assert sum(p for _, p in probs) == 1
        assert probs[-1][0] == TAIL and probs[-1][1] > 0
        assert all(p > 0 for _, p in probs[:-1])
    root = jump_probabilities(root_node(P), P, Fraction(1, 3**5))
    assert sum(p for _, p in root) == 1


def test_x_increment_examples():
    Jc = central(MIDDLE, P.N)
    Jinf = infinity_interval(P.N)
    assert x_increment(Jinf, Jc) == -1
    assert x_increment(Jc, Jinf) == 1
    assert x_increment(Jc, Jc, already_hit=True) == 1
    J = standard(MIDDLE, P.N + 1, P.N)
    node = GridNode(J, Fraction(0), Fraction(1), 1)
    seen = set()
    for c in expand(node, P, J.geometry.length / 3**5).children:
        x = x_increment(J, c.whitney)
        assert c.whitney.nominal_length / J.nominal_length == Fraction(3) ** x
        seen.add(x)
    # B_1 is the central child of nominal size 3**(N-1) |J|
    assert max(seen) == P.N - 1


def test_sampled_children_follow_the_jump_law():
    J = standard(MIDDLE, P.N + 1, P.N)
    node = GridNode(J, Fraction(0), Fraction(1), 1)
    # the top-size children carry mass 1 - eps in total
    top = [c for c, p in jump_probabilities(node, P, J.geometry.length * 3 ** (P.N - 1)) if c != TAIL]
    assert sum(c.value * c.arc_length for c in top) == 1 - P.eps
    rng = path_rng(5, 0)
    n = 4000
    hits = sum(x_increment(J, sample_child(J, P, rng)) == P.N - 1 for _ in range(n))
    se = (float(P.eps * (1 - P.eps)) / n) ** 0.5
    assert abs(hits / n - float(1 - P.eps)) < 5 * se


def test_start_at_an_infinity_vertex_is_a_hit():
    node = GridNode(central(MIDDLE, P.N), Fraction(0), Fraction(1), 1)
    (inf,) = [c for c in expand(node, P, Fraction(1, 3**4)).children if c.kind == INFINITY]
    stats = simulate(inf, P, paths=20, max_steps=30, seed=1)
    assert stats.hit_fraction == 1
    assert (stats.hit_steps == 0).all()
    assert np.allclose(stats.mean_sk_over_k[1:], 1.0)


def test_simulation_is_deterministic():
    a = simulate(None, P, paths=50, max_steps=40, seed=7)
    b = simulate(None, P, paths=50, max_steps=40, seed=7)
    c = simulate(None, P, paths=50, max_steps=40, seed=8)
    assert np.array_equal(a.hit_steps, b.hit_steps)
    assert np.array_equal(a.mean_sk_over_k, b.mean_sk_over_k)
    assert not np.array_equal(a.hit_steps, c.hit_steps)


def test_small_simulation_statistics():
    stats = simulate(None, P, paths=2000, max_steps=100, seed=3, track_vertices=True)
    assert stats.hit_fraction > 0.95
    assert set(stats.per_class) <= {STANDARD, CENTRAL, INFINITY}
    checks = class_checks(stats, P, central_budget=20)
    assert all(c.ok for c in checks), [(c.name, c.z_score) for c in checks]


def test_trajectory_export(tmp_path):
    trails = []
    simulate(None, P, paths=3, max_steps=10, seed=2, trajectories=trails)
    out = tmp_path / "traj.csv"
    write_trajectories(out, trails)
    lines = out.read_text().splitlines()
    assert lines[0] == "path,step,node_kind,x,s"
    assert len(lines) == 1 + 3 * 10
    last = [ln.split(",") for ln in lines[1:11]]
    assert int(last[-1][4]) == sum(int(r[3]) for r in last)


def test_five_ary_hitting_measure():
    rep = hitting_measure_check_five_ary(20000, 2, seed=4)
    assert rep.cells == 25 and rep.max_z < 5


def test_grid_hitting_measure():
    rep = hitting_measure_check(None, P, 4000, 1, seed=6, size_floor=Fraction(1, 3**8))
    assert rep.cells > 0 and rep.max_z < 5


def test_support_mass_is_nondecreasing():
    rows = support_mass(12, P, Fraction(1, 2), Fraction(1, 2000))
    lows = [r.mu_lower for r in rows]
    assert lows == sorted(lows)
    assert all(r.mu_lower <= r.mu_upper <= 1 for r in rows)
    assert all(r.nu == Fraction(1, 2) * r.mu_lower + Fraction(1, 2) * r.lebesgue for r in rows)
    assert first_depth_reaching(rows, Fraction(2)) is None
    hit = first_depth_reaching(rows, lows[-1])
    assert hit is not None and hit.mu_lower == lows[-1]
