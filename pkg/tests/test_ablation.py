import pytest

from copyscope.ablation import ablate
from copyscope.data import MONALISA_FID_TABLE
from copyscope.errors import CompletenessError
from copyscope.game import Player, ValueTable, load_value_table
from helpers import additive_table, random_table, raw_fn
from oracles import ablation_reference


class TestAblate:
    def test_two_player_hand_worked(self):
        table = additive_table({"p1": 1.0, "p2": 2.0})
        report = ablate(table)
        # without p1 the only nonempty coalition is {p2}
        assert report.mean_raw_without["p1"] == 2.0
        assert report.mean_raw_without["p2"] == 1.0
        assert report.grand_raw == 3.0
        assert report.deviation["p1"] == -1.0
        assert report.deviation["p2"] == -2.0
        assert report.ranking == ("p2", "p1")

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8])
    def test_matches_reference(self, rng, n):
        table = random_table(rng, n)
        report = ablate(table)
        want = ablation_reference(table.player_ids, raw_fn(table))
        for pid in table.player_ids:
            mean, deviation = want[pid]
            assert report.mean_raw_without[pid] == pytest.approx(mean, abs=1e-12)
            assert report.deviation[pid] == pytest.approx(deviation, abs=1e-12)

    def test_player_declaration_order_irrelevant(self, rng):
        table = random_table(rng, 4)
        reordered = ValueTable(
            players=tuple(reversed(table.players)),
            entries=dict(reversed(list(table.entries.items()))),
            orientation=table.orientation,
        )
        a = ablate(table)
        b = ablate(reordered)
        assert a.mean_raw_without == b.mean_raw_without
        assert a.ranking == b.ranking

    def test_ranking_orders_by_absolute_deviation(self, rng):
        table = random_table(rng, 5)
        report = ablate(table)
        magnitudes = [abs(report.deviation[pid]) for pid in report.ranking]
        assert magnitudes == sorted(magnitudes, reverse=True)

    def test_incomplete_table_rejected(self):
        t = ValueTable(players=(Player("a"), Player("b")), entries={(): 0.0})
        with pytest.raises(CompletenessError):
            ablate(t)

    def test_single_player_rejected(self):
        t = ValueTable(players=(Player("a"),), entries={(): 0.0, ("a",): 1.0})
        with pytest.raises(ValueError):
            ablate(t)

    def test_to_dict_shape(self):
        report = ablate(additive_table({"p1": 1.0, "p2": 2.0}))
        d = report.to_dict()
        assert set(d) == {"grand_raw", "mean_raw_without", "deviation", "ranking"}
        assert d["ranking"] == ["p2", "p1"]


class TestBundledStudyAblation:
    def test_most_influential_component(self):
        table = load_value_table(MONALISA_FID_TABLE)
        report = ablate(table)
        assert report.ranking[0] == "Davinci"
        assert report.grand_raw == pytest.approx(184.69, abs=1e-9)

    def test_matches_reference(self):
        table = load_value_table(MONALISA_FID_TABLE)
        report = ablate(table)
        want = ablation_reference(table.player_ids, raw_fn(table))
        for pid in table.player_ids:
            mean, deviation = want[pid]
            assert report.mean_raw_without[pid] == pytest.approx(mean, abs=1e-10)
            assert report.deviation[pid] == pytest.approx(deviation, abs=1e-10)
