import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from housefeat.errors import AssemblyError, SchemaError
from housefeat.imageio import save_png
from housefeat.records import (
    MISSING,
    FeatureTable,
    ImageAsset,
    ListingRecord,
    assemble_features,
    exact_mean,
    is_missing,
    load_feature_table,
    load_listings,
    load_manifest,
    normalize_category,
    write_feature_table,
    write_listings,
)

HEADER = "MLSNUM,SOLDPRICE,DOM,ZIP,BEDS,BATHS,LOTSIZE,SQFT,GARAGE,AGE\n"


def _listing(mls, **kw):
    base = dict(price=500000.0, dom=10, zip="02139", beds=3, baths=2.0, lotsize=4000.0,
                sqft=1500.0, garage=1, age=30)
    base.update(kw)
    return ListingRecord(mls, **base)


def test_load_three_valid_rows(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text(HEADER + "A,1,0,02139,3,2,100,900,yes,10\n"
                 "B,2,5,02140,2,1,,800,no,\nC,3,7,02141-1234,1,1.5,50,700,TRUE,1\n")
    recs, errs = load_listings(p)
    assert [r.mls_num for r in recs] == ["A", "B", "C"]
    assert errs == []
    assert recs[0].garage == 1 and recs[1].garage == 0 and recs[2].garage == 1
    assert recs[1].lotsize is None and recs[1].age is None
    assert recs[0].dom == 0  # same-day sale is legal
    assert recs[2].mls_features()["ZIP"] == 2141


def test_non_numeric_price_reports_line(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text(HEADER + "A,1,0,02139,3,2,100,900,1,10\nB,N/A,3,02139,3,2,100,900,1,10\n")
    recs, errs = load_listings(p)
    assert len(recs) == 1
    assert errs[0].line == 3 and "SOLDPRICE" in errs[0].message


@pytest.mark.parametrize("row,field", [
    ("A,0,1,02139,3,2,100,900,1,10", "SOLDPRICE"),
    ("A,10,-1,02139,3,2,100,900,1,10", "DOM"),
    ("A,10,x,02139,3,2,100,900,1,10", "DOM"),
    ("A,10,1,02139,3,2,100,0,1,10", "SQFT"),
    ("A,10,1,02139,3,2,100,10,maybe,10", "GARAGE"),
])
def test_invariant_violations_rejected(tmp_path, row, field):
    p = tmp_path / "m.csv"
    p.write_text(HEADER + row + "\n")
    recs, errs = load_listings(p)
    assert recs == [] and field in errs[0].message


def test_duplicate_mls_rejected(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text(HEADER + "A,1,0,02139,3,2,100,900,1,10\nA,2,0,02139,3,2,100,900,1,10\n")
    recs, errs = load_listings(p)
    assert len(recs) == 1 and "duplicate" in errs[0].message


def test_missing_column_names_it(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("MLSNUM,SOLDPRICE,DOM,ZIP,BEDS,BATHS,LOTSIZE,GARAGE,AGE\n")
    with pytest.raises(SchemaError, match="SQFT"):
        load_listings(p)


def test_listings_round_trip(tmp_path):
    recs = [_listing("A"), _listing("B", lotsize=None, garage=None)]
    write_listings(recs, tmp_path / "m.csv")
    back, errs = load_listings(tmp_path / "m.csv")
    assert back == recs and errs == []


def _manifest(tmp_path, rows):
    root = tmp_path / "img"
    root.mkdir()
    for name in ("a.png", "b.png", "s.png"):
        save_png(np.zeros((4, 4, 3), np.uint8), root / name)
    p = tmp_path / "manifest.csv"
    p.write_text("listing_id,path,image_type,category,zoom\n" + "".join(r + "\n" for r in rows))
    return p, root


def test_manifest_groups_by_listing(tmp_path):
    p, root = _manifest(tmp_path, ["L1,a.png,indoor,kitchen,", "L1,b.png,indoor,bath,",
                                   "L1,s.png,satellite,,20"])
    m = load_manifest(p, root)
    assert len(m.assets) == 3 and m.errors == []
    assert len(m.for_listing("L1")) == 3
    assert m.counts["indoor"] == 2 and m.counts["satellite"] == 1


def test_manifest_schema_errors(tmp_path):
    p, root = _manifest(tmp_path, ["L1,s.png,satellite,,", "L1,a.png,indoor,kitchen,18",
                                   "L2,missing.png,outdoor,,"])
    m = load_manifest(p, root)
    kinds = sorted(e.kind for e in m.errors)
    assert kinds == ["asset", "schema", "schema"]
    assert m.failed_listings() == {"L2"}
    with pytest.raises(SchemaError):
        load_manifest(p, root, strict=True)


def test_image_asset_invariants():
    with pytest.raises(SchemaError):
        ImageAsset("L", "x.png", "satellite", zoom=21)
    with pytest.raises(SchemaError):
        ImageAsset("L", "x.png", "outdoor", category="kitchen")
    assert ImageAsset("L", "x.png", "satellite", zoom=15).type_code == "sat"


def test_unknown_category_maps_to_other():
    assert normalize_category("Garage") == "other"
    assert normalize_category("kitchen") == "kitchen"


def test_missing_satellite_gives_missing_cells():
    recs = [_listing("A"), _listing("B")]
    img = {"A": [{"ENT_sat_avg_z20": 1.0, "ENT_out_avg": 2.0}], "B": [{"ENT_out_avg": 3.0}]}
    agg = {"A": {"GREEN_sat": 0.3}, "B": {"GREEN_sat": MISSING}}
    t = assemble_features(recs, img, agg)
    assert is_missing(t.cell("B", "ENT_sat_avg_z20")) and is_missing(t.cell("B", "GREEN_sat"))
    assert t.cell("A", "ENT_sat_avg_z20") == 1.0
    assert not t.missing[t.listing_ids.index("A")].any()
    assert list(t.columns) == sorted(t.columns)


def test_disjoint_extractors_union_columns():
    recs = [_listing("A"), _listing("B")]
    t = assemble_features(recs, {"A": [{"f1": 1.0}], "B": [{"f2": 2.0}]}, include_mls=False)
    assert t.columns == ("f1", "f2")
    assert t.cell("A", "f2") is MISSING and t.cell("B", "f1") is MISSING
    assert t.cell("A", "f1") == 1.0 and t.cell("B", "f2") == 2.0


def test_duplicate_feature_name_is_assembly_error():
    with pytest.raises(AssemblyError):
        assemble_features([_listing("A")], {"A": [{"x": 1.0}]}, {"A": {"x": 2.0}})
    with pytest.raises(AssemblyError):
        assemble_features([_listing("A")], {}, {"A": {"SQFT": 2.0}})
    with pytest.raises(AssemblyError):
        FeatureTable(["A"], ["x", "x"], [[1, 2]])


def test_multi_image_mean():
    t = assemble_features([_listing("A")], {"A": [{"f": 1.0}, {"f": 2.0}, {"f": MISSING}]},
                          include_mls=False)
    assert t.cell("A", "f") == 1.5


cell = st.one_of(st.none(), st.floats(allow_nan=False, allow_infinity=False, width=64))


@given(st.lists(st.lists(cell, min_size=3, max_size=3), min_size=1, max_size=6))
def test_feature_table_round_trip(tmp_path_factory, rows):
    vals = [[np.nan if v is None else v for v in r] for r in rows]
    t = FeatureTable([f"L{i}" for i in range(len(rows))], ["a", "b", "c"], vals)
    p = tmp_path_factory.mktemp("ft") / "t.csv"
    write_feature_table(t, p)
    back = load_feature_table(p)
    assert back.equals(t)
    assert np.array_equal(back.missing, t.missing)


@given(st.permutations(list(range(5))), st.lists(st.floats(-1e6, 1e6), min_size=15, max_size=15))
def test_assemble_is_permutation_invariant(perm, vals):
    recs = [_listing(f"L{i}") for i in range(5)]
    img = {f"L{i}": [{"f": vals[3 * i]}, {"f": vals[3 * i + 1]}, {"g": vals[3 * i + 2]}] for i in range(5)}
    a = assemble_features(recs, img)
    shuffled = [recs[i] for i in perm]
    img2 = {k: list(reversed(img[k])) for k in reversed(list(img))}
    b = assemble_features(shuffled, img2)
    assert a.equals(b)
    assert len(set(a.listing_ids)) == len(a.listing_ids) == 5


@given(st.lists(st.floats(-1e9, 1e9), min_size=1, max_size=30), st.randoms())
def test_exact_mean_order_free(values, r):
    shuffled = values[:]
    r.shuffle(shuffled)
    assert exact_mean(values) == exact_mean(shuffled)


def test_feature_table_csv_missing_is_empty_cell(tmp_path):
    t = FeatureTable(["A"], ["x", "y"], [[1.0, np.nan]])
    write_feature_table(t, tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows == [["listing_id", "x", "y"], ["A", "1.0", ""]]


def test_corpus_scale_metadata(tmp_path):
    n = 19_942
    body = "".join(f"M{i},{300000 + i},{i % 400},021{i % 90:02d},3,2,5000,1800,1,{i % 120}\n" for i in range(n))
    (tmp_path / "m.csv").write_text(HEADER + body)
    recs, errs = load_listings(tmp_path / "m.csv")
    assert len(recs) == n and errs == []


def test_corpus_scale_manifest_streams(tmp_path):
    import tracemalloc

    from housefeat.records import iter_manifest

    save_png(np.zeros((2, 2, 3), np.uint8), tmp_path / "x.png")
    kinds = ["indoor,kitchen,", "outdoor,,", "satellite,,20"]
    with open(tmp_path / "manifest.csv", "w") as fh:
        fh.write("listing_id,path,image_type,category,zoom\n")
        for i in range(399_120):
            fh.write(f"L{i // 20},x.png,{kinds[i % 3]}\n")
    tracemalloc.start()
    count = sum(1 for _ in iter_manifest(tmp_path / "manifest.csv", tmp_path))
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    assert count == 399_120
    assert peak < 2_000_000  # bytes: iteration holds one row at a time
