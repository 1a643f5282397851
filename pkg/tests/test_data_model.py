import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from districtvi.data_model import (
    DEFAULT_FEATURES, DARecord, DataError, Dataset, FeatureSpec, advisories, format_dataset,
    load_dataset, load_feature_specs, parse_dataset, save_dataset, validate,
)
from districtvi.synthetic import make_panel

HEADER = "da_id,year,district_id,f1,f2,f3,f4,f5,f6,f7,f8\n"


def test_default_features_cover_eight_ids():
    assert [s.id for s in DEFAULT_FEATURES] == list(range(1, 9))
    assert DEFAULT_FEATURES[2].name == "Proportion of dwelling requiring minor repairs"
    assert DEFAULT_FEATURES[7].name == "Housing vacancy rate"


def test_load_two_rows(write_csv):
    path = write_csv(HEADER + "A1,2016,TR-1,1,2,3,4,5,6,7,8\nA2,2016,TR-1,8,7,6,5,4,3,2,1\n")
    ds = load_dataset(path)
    assert len(ds.records) == 2
    assert len(ds.specs) == 8
    assert ds.years == (2016,)
    assert ds.records[1].raw == (8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0)


def test_blank_cell_is_missing(write_csv):
    ds = load_dataset(write_csv(HEADER + "A1,2016,TR-1,1,2,3,4,,6,7,8\n"))
    assert ds.records[0].raw[4] is None


def test_duplicate_key(write_csv):
    text = HEADER + "A1,2016,TR-1,1,2,3,4,5,6,7,8\nA1,2016,TR-2,1,2,3,4,5,6,7,8\n"
    with pytest.raises(DataError, match="duplicate"):
        load_dataset(write_csv(text))


@pytest.mark.parametrize("row", [
    "A1,2016,TR-1,1,2,3,4,5,6,7\n",          # too few columns
    "A1,2016,TR-1,1,2,3,4,5,6,7,8,9\n",      # too many
    "A1,2016,TR-1,1,2,x,4,5,6,7,8\n",        # non-numeric
    "A1,2016,TR-1,1,2,nan,4,5,6,7,8\n",      # non-finite
    "A1,20x6,TR-1,1,2,3,4,5,6,7,8\n",        # bad year
])
def test_malformed_rows(write_csv, row):
    with pytest.raises(DataError):
        load_dataset(write_csv(HEADER + row))


def test_header_mismatch(write_csv):
    with pytest.raises(DataError, match="header"):
        load_dataset(write_csv("da_id,year,district_id,f1\nA,2016,T,1\n"))


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "nope.csv")


def test_configurable_feature_count(write_csv):
    specs = (FeatureSpec(1, "a"), FeatureSpec(2, "b", invert=True), FeatureSpec(3, "c", impute=0.0))
    ds = load_dataset(write_csv("da_id,year,district_id,f1,f2,f3\nX,2020,D,1,,3\n"), specs)
    assert ds.records[0].raw == (1.0, None, 3.0)


def test_round_trip(tmp_path):
    ds = make_panel(n_da=20, seed=3, missing_rate=0.1)
    path = tmp_path / "rt.csv"
    save_dataset(ds, path)
    assert load_dataset(path) == ds


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=400))
def test_load_is_total_over_bytes(tmp_path_factory, blob):
    path = tmp_path_factory.mktemp("fuzz") / "f.csv"
    path.write_bytes(blob)
    try:
        load_dataset(path)
    except DataError:
        pass


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=300))
def test_parse_is_total_over_text(text):
    try:
        parse_dataset(HEADER + text)
    except DataError:
        pass


def test_validate_clean():
    assert validate(make_panel(n_da=10, seed=1)) == []


def test_validate_empty_district():
    ds = Dataset((DARecord("A1", 2016, "", (1.0,) * 8),), DEFAULT_FEATURES)
    issues = validate(ds)
    assert len(issues) == 1
    assert "A1" in issues[0] and "district_id" in issues[0]


def test_validate_reports_duplicates_and_width():
    recs = (DARecord("A", 2016, "D", (1.0,) * 8), DARecord("A", 2016, "D", (1.0,) * 7))
    issues = validate(Dataset(recs, DEFAULT_FEATURES))
    assert any("duplicate" in i for i in issues)
    assert any("raw has 7" in i for i in issues)


def test_single_year_advisory():
    ds = make_panel(n_da=5, years=(2016,), seed=0)
    assert validate(ds) == []
    notes = advisories(ds)
    assert len(notes) == 1 and "2 years" in notes[0]


def test_feature_spec_json(tmp_path):
    path = tmp_path / "f.json"
    specs = (FeatureSpec(1, "a", log_scale=True), FeatureSpec(4, "b", invert=True, impute=2.5))
    path.write_text(json.dumps({"features": [s.to_dict() for s in specs]}))
    assert load_feature_specs(path) == specs
    path.write_text("[]")
    with pytest.raises(DataError):
        load_feature_specs(path)


def test_format_uses_empty_cell_for_missing():
    ds = Dataset((DARecord("A", 2016, "D", (None, 1.5)),), (FeatureSpec(1, "a"), FeatureSpec(2, "b")))
    assert format_dataset(ds).splitlines()[1] == "A,2016,D,,1.5"
