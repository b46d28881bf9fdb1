import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rice.dataset import (
    DataError,
    EncodingSample,
    HardwareDB,
    HardwareSpec,
    LeaderboardEntry,
    LookupFailed,
    MinDeviceSample,
    PerTokenSample,
    RegionDB,
    RegionEntry,
    bundled_path,
    filter_unoptimized,
    load_leaderboard,
    load_samples,
    lookup_hardware,
    lookup_rci,
    parse_optimizations,
    write_leaderboard,
    write_samples,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadSamples:
    def test_min_device_row_from_reference_table(self, tmp_path):
        path = write(tmp_path, "m.csv", "model_params_b,device_count,hardware_name\n6,1,NVIDIA A100-80GB\n")
        assert load_samples(path, "min_device") == [MinDeviceSample(6.0, 1, "NVIDIA A100-80GB")]

    @pytest.mark.parametrize("kind,header", [
        ("encoding", "model_params_b,prompt_tokens,encoding_latency_s"),
        ("per_token", "model_params_b,per_token_latency_s"),
        ("min_device", "model_params_b,device_count,hardware_name"),
    ])
    def test_header_only_is_empty(self, tmp_path, kind, header):
        assert load_samples(write(tmp_path, "x.csv", header + "\n"), kind) == []

    def test_negative_latency_names_column(self, tmp_path):
        path = write(tmp_path, "e.csv", "model_params_b,prompt_tokens,encoding_latency_s\n6,10,0.1\n6,20,-0.5\n")
        with pytest.raises(DataError) as err:
            load_samples(path, "encoding")
        assert "row 2" in str(err.value)
        assert "encoding_latency_s" in str(err.value)

    def test_lenient_mode_skips_bad_rows(self, tmp_path):
        path = write(tmp_path, "e.csv", "model_params_b,prompt_tokens,encoding_latency_s\n6,10,0.1\n6,20,-0.5\n")
        assert load_samples(path, "encoding", strict=False) == [EncodingSample(6.0, 10, 0.1)]

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_samples(tmp_path / "nope.csv", "encoding")

    def test_wrong_header(self, tmp_path):
        path = write(tmp_path, "p.csv", "params,latency\n1,2\n")
        with pytest.raises(DataError, match="missing column"):
            load_samples(path, "per_token")

    def test_ragged_row(self, tmp_path):
        path = write(tmp_path, "p.csv", "model_params_b,per_token_latency_s\n1,2,3\n")
        with pytest.raises(DataError, match="row 1"):
            load_samples(path, "per_token")

    @pytest.mark.parametrize("bad", ["0", "1.5", "x", "", "nan"])
    def test_device_count_must_be_positive_integer(self, tmp_path, bad):
        path = write(tmp_path, "m.csv", f"model_params_b,device_count,hardware_name\n6,{bad},A100\n")
        with pytest.raises(DataError, match="device_count"):
            load_samples(path, "min_device")

    def test_blank_hardware_name_rejected(self, tmp_path):
        path = write(tmp_path, "m.csv", "model_params_b,device_count,hardware_name\n6,1,  \n")
        with pytest.raises(DataError, match="hardware_name"):
            load_samples(path, "min_device")

    def test_prompt_beyond_curated_range_warns(self, tmp_path, caplog):
        path = write(tmp_path, "e.csv", "model_params_b,prompt_tokens,encoding_latency_s\n6,4000,0.1\n")
        assert len(load_samples(path, "encoding")) == 1
        assert "exceed 1920" in caplog.text

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ValueError, match="unknown sample kind"):
            load_samples(tmp_path / "x.csv", "bogus")


finite_pos = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False)


@given(st.lists(st.builds(EncodingSample, finite_pos, st.integers(1, 1920), finite_pos), max_size=20))
def test_encoding_round_trip(tmp_path_factory, samples):
    path = tmp_path_factory.mktemp("rt") / "e.csv"
    write_samples(path, samples, "encoding")
    assert load_samples(path, "encoding") == samples


@given(st.lists(st.builds(PerTokenSample, finite_pos, finite_pos), max_size=20))
def test_per_token_round_trip(tmp_path_factory, samples):
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    write_samples(path, samples, "per_token")
    assert load_samples(path, "per_token") == samples


names = st.text(st.characters(whitelist_categories=("L", "N"), whitelist_characters=" -_/."), min_size=1, max_size=20)


@given(st.lists(st.builds(MinDeviceSample, finite_pos, st.integers(1, 512), names.map(str.strip).filter(bool)), max_size=20))
def test_min_device_round_trip(tmp_path_factory, samples):
    path = tmp_path_factory.mktemp("rt") / "m.csv"
    write_samples(path, samples, "min_device")
    assert load_samples(path, "min_device") == samples


cells = st.one_of(
    st.sampled_from(["nan", "NaN", "inf", "-inf", "", " ", "-1", "0", "-0.0", "abc", "1e400", "3", "0.5", "1.0"]),
    st.floats(allow_nan=True, allow_infinity=True).map(repr),
)


@given(st.lists(st.tuples(cells, cells, cells), min_size=1, max_size=10))
def test_adversarial_rows_never_yield_invalid_samples(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("adv") / "e.csv"
    path.write_text("model_params_b,prompt_tokens,encoding_latency_s\n" + "".join(f"{a},{b},{c}\n" for a, b, c in rows))
    for sample in load_samples(path, "encoding", strict=False):
        assert math.isfinite(sample.model_params) and sample.model_params > 0
        assert isinstance(sample.prompt_tokens, int) and sample.prompt_tokens >= 1
        assert math.isfinite(sample.encoding_latency) and sample.encoding_latency > 0


def entry(name, params=1.0, opts=(), latency=1.0):
    return LeaderboardEntry(name, params, latency, 1e6, frozenset(opts))


class TestFilterUnoptimized:
    def test_quantized_excluded(self):
        assert filter_unoptimized([entry("a", opts={"GPTQ-4bit"})]) == []

    def test_clean_retained(self):
        e = entry("a")
        assert filter_unoptimized([e]) == [e]

    def test_duplicates_keep_first(self):
        first, second = entry("a", latency=1.0), entry("a", latency=2.0)
        # oracle: group by key, take first in file order
        groups = {}
        for e in [first, second]:
            groups.setdefault((e.model_name, e.model_params), e)
        assert filter_unoptimized([first, second]) == list(groups.values()) == [first]

    def test_same_name_different_size_both_kept(self):
        a, b = entry("a", 1.0), entry("a", 2.0)
        assert filter_unoptimized([a, b]) == [a, b]

    @given(st.lists(st.builds(
        entry,
        st.sampled_from(["a", "b", "c"]),
        st.sampled_from([1.0, 7.0]),
        st.sets(st.sampled_from(["GPTQ-4bit", "flash-attention-v2", "bnb-8bit"]), max_size=2),
        st.floats(0.1, 10),
    ), max_size=15))
    def test_properties(self, entries):
        out = filter_unoptimized(entries)
        assert all(any(o is e for e in entries) for o in out)
        assert all(not o.optimizations for o in out)
        assert filter_unoptimized(out) == out
        assert len({(o.model_name, o.model_params) for o in out}) == len(out)


class TestLeaderboard:
    def test_load_with_tags_and_blank_params(self, tmp_path):
        path = write(tmp_path, "lb.csv",
                     "model_name,model_params_b,e2e_latency_s,tokens_per_kwh,optimizations,backend\n"
                     "m1,1.3,3.84,1000000,,pytorch\n"
                     "m1,1.3,2.10,1500000,GPTQ-4bit;flash-attention-v2,pytorch\n"
                     "m2,,5.0,900000,None,pytorch\n")
        rows = load_leaderboard(path)
        assert [r.model_name for r in rows] == ["m1", "m1", "m2"]
        assert rows[1].optimizations == {"GPTQ-4bit", "flash-attention-v2"}
        assert rows[2].model_params is None and not rows[2].is_optimized
        assert rows[0].metadata == {"backend": "pytorch"}
        assert [r.model_name for r in filter_unoptimized(rows)] == ["m1", "m2"]

    def test_extra_optimization_columns(self, tmp_path):
        path = write(tmp_path, "lb.csv",
                     "model_name,model_params_b,e2e_latency_s,tokens_per_kwh,quantization,attention\n"
                     "a,1,1,1,None,sdpa\n"
                     "b,1,1,1,none,\n")
        rows = load_leaderboard(path, optimization_columns=("quantization", "attention"))
        assert [r.is_optimized for r in rows] == [True, False]

    def test_non_positive_tokens_per_kwh(self, tmp_path):
        path = write(tmp_path, "lb.csv", "model_name,model_params_b,e2e_latency_s,tokens_per_kwh,optimizations\na,1,1,0,\n")
        with pytest.raises(DataError, match="tokens_per_kwh"):
            load_leaderboard(path)

    def test_round_trip_bundled(self, tmp_path):
        rows = load_leaderboard(bundled_path("leaderboard_reference.csv"))
        out = write_leaderboard(tmp_path / "lb.csv", rows)
        assert load_leaderboard(out) == rows

    def test_parse_optimizations_ignores_null_markers(self):
        assert parse_optimizations("None; ;GPTQ", "-") == {"GPTQ"}


class TestLookups:
    def test_a100_tdp(self):
        assert lookup_hardware("NVIDIA A100-80GB").tdp_watts == 400

    def test_case_insensitive(self):
        assert lookup_hardware("nvidia a100-80gb") == lookup_hardware("NVIDIA A100-80GB")

    def test_unknown_hardware_lists_known(self):
        with pytest.raises(LookupFailed, match="NVIDIA A100-80GB"):
            lookup_hardware("TPUv9")

    def test_default_region(self):
        assert lookup_rci("default").rci_g_per_kwh == 475.0

    def test_unknown_region(self):
        with pytest.raises(LookupFailed):
            lookup_rci("ZZ")

    def test_zero_rci_accepted(self, tmp_path):
        path = write(tmp_path, "rci.json", json.dumps([{"region_code": "hydro", "rci_g_per_kwh": 0}]))
        assert lookup_rci("hydro", RegionDB.load(path)) == RegionEntry("hydro", 0.0)

    def test_negative_rci_rejected(self):
        with pytest.raises(ValueError):
            RegionDB([RegionEntry("x", -1.0)])

    def test_duplicate_hardware_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            HardwareDB([HardwareSpec("A", 1, 1), HardwareSpec("a", 2, 2)])

    def test_add_and_save(self, tmp_path):
        db = HardwareDB.load().with_entry(HardwareSpec("TPUv9", 200.0, 96.0))
        db.save(tmp_path / "hw.json")
        assert HardwareDB.load(tmp_path / "hw.json").lookup("tpuv9").tdp_watts == 200.0
