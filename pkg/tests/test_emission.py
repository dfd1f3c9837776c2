import csv
import json

import numpy as np
import pytest

from casimir_rabi.emission import (
    CATEGORIES,
    binomial_ci,
    bundle_homogeneity,
    classify,
    classify_one,
    free_dissipation_baseline,
    write_bundle_csv,
    write_histogram_csv,
    write_rate_scan_csv,
    write_stats_json,
)
from casimir_rabi.mcwf import JumpEvent, TrajectoryRecord
from casimir_rabi.model import ModelParams

from oracles import P_TWO_PHOTON_FREE, P_THREE_PHONON_FREE, P_TWO_PHONON_FIRST_PAIR

P = ModelParams(1.5, 0.0, gamma_a=1.0, gamma_b=0.5)


def record(jumps, p=P, index=0):
    events = tuple(JumpEvent(t, ch, n_ph, n_pn) for t, ch, n_ph, n_pn in jumps)
    return TrajectoryRecord(
        master_seed=0, index=index, params=p, frame="rotating", t_final=100.0, dt=0.01,
        times=np.zeros(1), n_photon=np.zeros(1), n_phonon=np.zeros(1), jumps=events,
        final_state="|0,0>",
    )


class TestClassifyOne:
    def test_photon_pair_inside_lifetime(self):
        f = classify_one(record([(1.0, "cavity", 2, 0), (1.9, "cavity", 1, 0)]))
        assert f["PtBE"] and f["2PtBE"] and not f["PnBE"]

    def test_photon_pair_outside_lifetime(self):
        f = classify_one(record([(1.0, "cavity", 2, 0), (2.1, "cavity", 1, 0)]))
        assert f["PtBE"] and not f["2PtBE"]

    def test_all_photon_intervals_must_be_short(self):
        jumps = [(0.1, "cavity", 3, 0), (0.5, "cavity", 2, 0), (2.0, "cavity", 1, 0)]
        assert not classify_one(record(jumps))["2PtBE"]

    def test_interleaved_channels(self):
        # the phonon between photon jumps does not break the photon pair
        jumps = [(0.1, "cavity", 2, 1), (0.3, "mechanical", 1, 1), (0.6, "cavity", 1, 0)]
        f = classify_one(record(jumps))
        assert f["2PtBE"] and not f["2PnBE"]

    def test_phonon_bundles(self):
        # lifetime 1/gamma_b = 2
        jumps = [(1.0, "mechanical", 0, 3), (2.5, "mechanical", 0, 2), (4.0, "mechanical", 0, 1)]
        f = classify_one(record(jumps))
        assert f["PnBE"] and f["2PnBE"] and f["3PnBE"]

    def test_first_pair_rule(self):
        jumps = [(1.0, "mechanical", 0, 3), (2.5, "mechanical", 0, 2), (9.0, "mechanical", 0, 1)]
        f = classify_one(record(jumps))
        assert f["2PnBE"] and not f["3PnBE"]

    def test_three_phonons_need_exactly_three(self):
        jumps = [(t, "mechanical", 0, 4 - i) for i, t in enumerate((1.0, 1.5, 2.0, 2.5))]
        assert not classify_one(record(jumps))["3PnBE"]

    def test_no_jumps(self):
        assert not any(classify_one(record([])).values())


class TestClassify:
    def test_counts_and_histograms(self):
        recs = [
            record([(1.0, "cavity", 1.2, 0.3), (1.5, "cavity", 0.4, 0.3)]),
            record([(1.0, "mechanical", 0.1, 2.7)]),
            record([(1.0, "mechanical", 0.1, 2.6), (1.2, "mechanical", 0.1, 1.9)]),
            record([]),
        ]
        st = classify(recs)
        assert st.n_traj == 4 and st.unclassified == 1
        assert st.counts == {"PtBE": 1, "PnBE": 2, "2PtBE": 1, "2PnBE": 1, "3PnBE": 0}
        assert st.bin_count("mechanical", 2.5) == 2
        assert st.bin_count("cavity", 1.0) == 1
        assert st.peak_bin("mechanical") == (2.5, 3.0)
        assert st.fraction("2PnBE", "PnBE") == 0.5

    def test_histogram_widens_past_three(self):
        st = classify([record([(1.0, "mechanical", 0, 3.4)])])
        edges = st.histograms["mechanical"][0]
        assert edges[-1] == pytest.approx(3.5)
        assert np.allclose(np.diff(edges), 0.5)

    def test_unknown_bin(self):
        st = classify([record([(1.0, "cavity", 1, 0)])])
        with pytest.raises(KeyError):
            st.bin_count("cavity", 0.25)

    def test_rejects_mixed_parameters(self):
        with pytest.raises(ValueError, match="mixed"):
            classify([record([]), record([], p=P.replace(gamma_b=1.0))])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            classify([])

    def test_sigma(self):
        recs = [record([(1.0, "cavity", 1, 0)])] * 3 + [record([(1.0, "mechanical", 0, 1)])]
        st = classify(recs)
        assert st.sigma("PtBE") == pytest.approx(np.sqrt(0.75 * 0.25 / 4))


class TestStatistics:
    def test_wilson_interval(self):
        lo, hi = binomial_ci(50, 100)
        assert lo < 0.5 < hi and hi - lo == pytest.approx(0.19, abs=0.01)
        assert binomial_ci(0, 0) == (0.0, 1.0)

    def test_homogeneity(self):
        def st(k, n):
            recs = [record([(1, "cavity", 1, 0), (1.1, "cavity", 0, 0)])] * k
            recs += [record([(1, "cavity", 1, 0)])] * (n - k)
            return classify(recs)

        assert bundle_homogeneity([st(30, 100), st(32, 100)]) > 0.5
        assert bundle_homogeneity([st(10, 100), st(60, 100)]) < 1e-6


class TestFreeBaseline:
    def test_two_photon(self):
        st = free_dissipation_baseline((2, 0), 1.0, 1.0, 3000, master_seed=5)
        assert st.counts["PtBE"] == 3000
        f = st.fraction("2PtBE", "PtBE")
        assert abs(f - P_TWO_PHOTON_FREE) <= 4 * np.sqrt(f * (1 - f) / 3000)

    def test_three_phonon(self):
        st = free_dissipation_baseline((0, 3), 1.0, 1.0, 3000, master_seed=6)
        for key, ref in (("3PnBE", P_THREE_PHONON_FREE), ("2PnBE", P_TWO_PHONON_FIRST_PAIR)):
            f = st.fraction(key, "PnBE")
            assert abs(f - ref) <= 4 * np.sqrt(ref * (1 - ref) / 3000)

    def test_needs_excitation(self):
        with pytest.raises(ValueError):
            free_dissipation_baseline((0, 0), 1.0, 1.0, 1, 0)


class TestWriters:
    @pytest.fixture()
    def stats(self):
        return classify([record([(1.0, "cavity", 1.2, 0.3), (1.5, "cavity", 0.4, 0.3)]),
                         record([(1.0, "mechanical", 0.1, 2.7)])])

    def test_json(self, tmp_path, stats):
        write_stats_json(stats, tmp_path / "s.json")
        d = json.load(open(tmp_path / "s.json"))
        assert set(d["counts"]) == set(CATEGORIES)
        assert d["fractions"]["2PtBE"]["of"] == "PtBE"
        assert len(d["fractions"]["PtBE"]["ci95"]) == 2

    def test_histogram_csv(self, tmp_path, stats):
        write_histogram_csv(stats, tmp_path / "h.csv")
        rows = list(csv.reader(open(tmp_path / "h.csv")))
        assert rows[0] == ["channel", "bin_lo", "bin_hi", "count"]
        assert len(rows) == 1 + 2 * 6

    def test_rate_scan_and_bundle_csv(self, tmp_path, stats):
        write_rate_scan_csv([stats], tmp_path / "r.csv")
        rows = list(csv.reader(open(tmp_path / "r.csv")))
        assert float(rows[1][0]) == pytest.approx(0.5)
        write_bundle_csv([("case", "2PtBE", stats)], tmp_path / "b.csv")
        rows = list(csv.reader(open(tmp_path / "b.csv")))
        assert rows[1][:4] == ["case", "2PtBE", "1", "1"]
