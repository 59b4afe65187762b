#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairsel/errors.hpp"
#include "fairsel/ingest.hpp"
#include "helpers.hpp"

using namespace fairsel;
using testutil::TempDir;
using testutil::write_file;

namespace {

ColumnSpec cat(const std::string& name, std::vector<std::string> levels,
               Role role = Role::feature) {
  ColumnSpec c;
  c.name = name;
  c.role = role;
  c.kind = ColumnSpec::Kind::categorical;
  c.levels = std::move(levels);
  return c;
}

ColumnSpec binned(const std::string& name, std::vector<double> cuts,
                  Role role = Role::feature) {
  ColumnSpec c;
  c.name = name;
  c.role = role;
  c.kind = ColumnSpec::Kind::binned;
  c.cuts = std::move(cuts);
  return c;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("csv loading codes levels in declaration order and drops bad rows") {
  TempDir dir;
  const std::string path = dir.file("toy.csv");
  write_file(path,
             "color,age,extra\n"
             "red,24,x\n"
             "blue,25,x\n"
             "red,,x\n"
             "red,notanumber,x\n"
             "blue,45\n"
             "red\n"
             "blue,46,x\n");
  SchemaSpec spec;
  spec.columns = {cat("color", {"red", "blue"}), binned("age", {24.0, 45.0})};

  const Dataset data = load_csv(path, spec);
  CHECK(data.schema.var(0).name == "color");
  CHECK(data.schema.var(1).cardinality == 3);
  REQUIRE(data.rows() == 4);
  // closed-right bins: 24 -> 0, 25 -> 1, 45 -> 1, 46 -> 2.
  CHECK(data.codes(0, 0) == 0);
  CHECK(data.codes(0, 1) == 0);
  CHECK(data.codes(1, 0) == 1);
  CHECK(data.codes(1, 1) == 1);
  CHECK(data.codes(2, 0) == 1);
  CHECK(data.codes(2, 1) == 1);
  CHECK(data.codes(3, 0) == 1);
  CHECK(data.codes(3, 1) == 2);
  CHECK(data.provenance.rows_read == 7);
  CHECK(data.provenance.rows_dropped == 3);
  CHECK(data.provenance.rows_read == data.rows() + data.provenance.rows_dropped);
}

TEST_CASE("csv loading handles quoted fields") {
  TempDir dir;
  const std::string path = dir.file("quoted.csv");
  write_file(path,
             "phrase,n\n"
             "\"a,b\",1\n"
             "\"two\nlines\",2\n"
             "\"say \"\"hi\"\"\",3\n");
  SchemaSpec spec;
  spec.columns = {cat("phrase", {"a,b", "two\nlines", "say \"hi\""}), binned("n", {1.5})};
  const Dataset data = load_csv(path, spec);
  REQUIRE(data.rows() == 3);
  CHECK(data.codes(0, 0) == 0);
  CHECK(data.codes(1, 0) == 1);
  CHECK(data.codes(2, 0) == 2);
  CHECK(data.codes(0, 1) == 0);
  CHECK(data.codes(2, 1) == 1);
}

TEST_CASE("csv loading failure modes") {
  TempDir dir;
  SchemaSpec spec;
  spec.columns = {cat("color", {"red", "blue"})};

  const std::string missing = dir.file("missing.csv");
  write_file(missing, "shade\nred\n");
  CHECK_THROWS_AS(load_csv(missing, spec), SchemaError);

  const std::string header_only = dir.file("header.csv");
  write_file(header_only, "color\n");
  const Dataset empty = load_csv(header_only, spec);
  CHECK(empty.rows() == 0);
  CHECK(empty.provenance.rows_read == 0);

  const std::string blank = dir.file("blank.csv");
  write_file(blank, "");
  CHECK_THROWS_AS(load_csv(blank, spec), ParseError);

  CHECK_THROWS_AS(load_csv(dir.file("nonexistent.csv"), spec), ParseError);

  const std::string bad_level = dir.file("levels.csv");
  write_file(bad_level, "color\nred\nGreen\n");
  try {
    load_csv(bad_level, spec);
    FAIL("expected LevelError");
  } catch (const LevelError& e) {
    const std::string what = e.what();
    CHECK(what.find("row 2") != std::string::npos);
    CHECK(what.find("'Green'") != std::string::npos);
    CHECK(what.find("color") != std::string::npos);
  }
}

TEST_CASE("schema specs parse from json and validate") {
  nlohmann::ordered_json doc = {
      {"schema_version", 1},
      {"columns",
       {{{"name", "color"}, {"role", "feature"}, {"kind", "categorical"}, {"levels", {"red", "blue"}}},
        {{"name", "age"}, {"role", "feature"}, {"kind", "binned"}, {"cuts", {24.0, 45.0}}},
        {{"name", "grp"}, {"role", "protected"}, {"kind", "categorical"}, {"levels", {"x", "y"}}},
        {{"name", "out"}, {"role", "label"}, {"kind", "categorical"}, {"levels", {"0", "1"}}}}}};
  const SchemaSpec spec = schema_spec_from_json(doc);
  REQUIRE(spec.columns.size() == 4);
  CHECK(spec.columns[1].kind == ColumnSpec::Kind::binned);
  CHECK(spec.columns[1].boundary == "closed_right");
  CHECK(spec.columns[1].cardinality() == 3);
  CHECK(spec.columns[2].role == Role::protected_attr);
  const VariableSchema schema = spec.to_schema();
  CHECK(schema.var(3).role == Role::label);
  CHECK(schema.cell_count() == 2 * 3 * 2 * 2);

  // Serialization keeps every declared field.
  const SchemaSpec back = schema_spec_from_json(schema_spec_to_json(spec));
  CHECK(back.columns[0].levels == spec.columns[0].levels);
  CHECK(back.columns[1].cuts == spec.columns[1].cuts);

  nlohmann::ordered_json bad_version = doc;
  bad_version["schema_version"] = 2;
  CHECK_THROWS_AS(schema_spec_from_json(bad_version), ParseError);
  nlohmann::ordered_json no_version = doc;
  no_version.erase("schema_version");
  CHECK_THROWS_AS(schema_spec_from_json(no_version), ParseError);

  nlohmann::ordered_json bad_kind = doc;
  bad_kind["columns"][0]["kind"] = "continuous";
  CHECK_THROWS_AS(schema_spec_from_json(bad_kind), ParseError);

  nlohmann::ordered_json bad_cuts = doc;
  bad_cuts["columns"][1]["cuts"] = {45.0, 24.0};
  CHECK_THROWS_AS(schema_spec_from_json(bad_cuts), ArgumentError);

  nlohmann::ordered_json one_level = doc;
  one_level["columns"][0]["levels"] = {"red"};
  CHECK_THROWS_AS(schema_spec_from_json(one_level), ArgumentError);

  nlohmann::ordered_json bad_boundary = doc;
  bad_boundary["columns"][1]["boundary"] = "open_left";
  CHECK_THROWS_AS(schema_spec_from_json(bad_boundary), ArgumentError);
}

TEST_CASE("dataset csv writing round trips through the loader") {
  TempDir dir;
  const std::string path = dir.file("dump.csv");
  Dataset data;
  data.schema = VariableSchema({testutil::feat("X1"), testutil::feat("X2", 3)});
  data.codes.resize(3, 2);
  data.codes << 0, 2, 1, 0, 1, 1;
  write_dataset_csv(data, path);

  SchemaSpec spec;
  spec.columns = {cat("X1", {"0", "1"}), cat("X2", {"0", "1", "2"})};
  const Dataset back = load_csv(path, spec);
  REQUIRE(back.rows() == 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c) CHECK(back.codes(r, c) == data.codes(r, c));

  CHECK_THROWS_AS(write_dataset_csv(data, dir.file("no/such/dir/out.csv")), ParseError);
}

TEST_CASE("empirical distribution follows the count and smoothing arithmetic") {
  Dataset data;
  data.schema = VariableSchema({testutil::prot("A"), testutil::label("Y")});

  data.codes.resize(1, 2);
  data.codes << 1, 0;
  const JointDistribution point = empirical_joint(data);
  CHECK(point.prob(std::vector<int>{1, 0}) == 1.0);
  CHECK(point.prob(std::vector<int>{0, 0}) == 0.0);

  data.codes.resize(2, 2);
  data.codes << 1, 0, 0, 1;
  const JointDistribution halves = empirical_joint(data);
  CHECK(halves.prob(std::vector<int>{1, 0}) == 0.5);
  CHECK(halves.prob(std::vector<int>{0, 1}) == 0.5);

  data.codes.resize(3, 2);
  data.codes << 0, 0, 0, 0, 1, 1;
  const JointDistribution counts = empirical_joint(data);
  CHECK(counts.prob(std::vector<int>{0, 0}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(counts.prob(std::vector<int>{1, 1}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const double s = 0.5;
  const JointDistribution smoothed = empirical_joint(data, s);
  const double denom = 3.0 + s * 4.0;
  CHECK(smoothed.prob(std::vector<int>{0, 0}) == doctest::Approx((2.0 + s) / denom).epsilon(1e-15));
  CHECK(smoothed.prob(std::vector<int>{0, 1}) == doctest::Approx(s / denom).epsilon(1e-15));

  Dataset empty;
  empty.schema = data.schema;
  empty.codes.resize(0, 2);
  CHECK_THROWS_AS(empirical_joint(empty), ArgumentError);
  CHECK_THROWS_AS(empirical_joint(data, -0.1), ArgumentError);

  Dataset out_of_range = data;
  out_of_range.codes(0, 0) = 7;
  CHECK_THROWS_AS(empirical_joint(out_of_range), ArgumentError);
}

TEST_CASE("screening recipe encodes a raw export") {
  TempDir dir;
  const std::string path = dir.file("raw.csv");
  write_file(
      path,
      "id,race,age,priors_count,c_charge_degree,sex,two_year_recid,c_jail_in,c_jail_out\n"
      "1,African-American,24,2,M,Male,0,2013-01-01 10:00:00,2013-01-06 08:00:00\n"
      "2,Caucasian,46,0,F,Female,1,2013-01-01,2013-06-01\n"
      "3,Hispanic,30,1,M,Male,0,2013-01-01,2013-01-02\n"
      "4,African-American,30,1,M,,0,2013-01-01,2013-01-02\n"
      "5,African-American,abc,1,M,Male,0,2013-01-01,2013-01-02\n"
      "6,Caucasian,30,1,M,Male,0,2013-01-05,2013-01-04\n"
      "7,African-American,25,4,M,Male,1,2013-01-01 00:00:00,2013-01-09 00:00:00\n");

  const CompasReport report = compas_preprocess(path);
  CHECK(report.kept_total == 3);
  CHECK(report.kept_african_american == 2);
  CHECK(report.kept_caucasian == 1);
  CHECK(report.target_total == 5334);
  CHECK(report.target_african_american == 3247);
  CHECK(report.target_caucasian == 2087);

  REQUIRE(report.drop_counts.size() == 4);
  CHECK(report.drop_counts[0].first == "missing field");
  CHECK(report.drop_counts[0].second == 1);
  CHECK(report.drop_counts[1].second == 1);  // race outside the two study groups
  CHECK(report.drop_counts[2].second == 1);  // unparseable value
  CHECK(report.drop_counts[3].second == 1);  // negative stay

  const Dataset& d = report.dataset;
  REQUIRE(d.rows() == 3);
  CHECK(d.schema.var(5).name == "race");
  CHECK(d.schema.var(5).role == Role::protected_attr);
  CHECK(d.schema.var(6).role == Role::label);

  // Row 1: age 24 -> bin 0, priors 2 -> bin 1, stay floor(4.9 days) -> bin 0.
  CHECK(d.codes(0, 0) == 0);
  CHECK(d.codes(0, 1) == 1);
  CHECK(d.codes(0, 2) == 0);
  CHECK(d.codes(0, 3) == 0);  // M
  CHECK(d.codes(0, 4) == 0);  // Male
  CHECK(d.codes(0, 5) == 0);  // African-American
  CHECK(d.codes(0, 6) == 0);
  // Row 2: age 46 -> bin 2, priors 0 -> bin 0, stay 151 days -> bin 2.
  CHECK(d.codes(1, 0) == 2);
  CHECK(d.codes(1, 1) == 0);
  CHECK(d.codes(1, 2) == 2);
  CHECK(d.codes(1, 3) == 1);  // F
  CHECK(d.codes(1, 4) == 1);  // Female
  CHECK(d.codes(1, 5) == 1);  // Caucasian
  CHECK(d.codes(1, 6) == 1);
  // Row 7: age 25 -> bin 1, priors 4 -> bin 2, stay 8 days -> bin 1.
  CHECK(d.codes(2, 0) == 1);
  CHECK(d.codes(2, 1) == 2);
  CHECK(d.codes(2, 2) == 1);

  CHECK(d.provenance.rows_read == 7);
  CHECK(d.provenance.rows_dropped == 4);

  bool noted_bins = false;
  for (const auto& note : report.notes)
    if (note.find("age bins") != std::string::npos) noted_bins = true;
  CHECK(noted_bins);
}

TEST_CASE("screening recipe accepts precomputed stay lengths") {
  TempDir dir;
  const std::string path = dir.file("raw.csv");
  write_file(path,
             "race,age,priors_count,c_charge_degree,sex,two_year_recid,length_of_stay\n"
             "African-American,30,0,M,Male,0,7\n"
             "Caucasian,30,0,M,Male,0,90.5\n");
  const CompasReport report = compas_preprocess(path);
  REQUIRE(report.kept_total == 2);
  CHECK(report.dataset.codes(0, 2) == 0);  // 7 days in the lowest bin
  CHECK(report.dataset.codes(1, 2) == 1);  // floor(90.5) = 90 stays in the middle bin
}

TEST_CASE("screening recipe re-encode is the identity") {
  TempDir dir;
  const std::string raw = dir.file("raw.csv");
  write_file(raw,
             "race,age,priors_count,c_charge_degree,sex,two_year_recid,c_jail_in,c_jail_out\n"
             "African-American,24,2,M,Male,0,2013-01-01,2013-01-03\n"
             "Caucasian,50,9,F,Female,1,2013-01-01,2013-07-01\n");
  const CompasReport first = compas_preprocess(raw);
  REQUIRE(first.kept_total == 2);

  const std::string encoded = dir.file("encoded.csv");
  write_dataset_csv(first.dataset, encoded);
  const CompasReport second = compas_preprocess(encoded);
  REQUIRE(second.kept_total == 2);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 7; ++c) CHECK(second.dataset.codes(r, c) == first.dataset.codes(r, c));
  bool identity_note = false;
  for (const auto& note : second.notes)
    if (note.find("identity re-encode") != std::string::npos) identity_note = true;
  CHECK(identity_note);
}

TEST_CASE("screening recipe failure modes") {
  TempDir dir;
  const std::string blank = dir.file("blank.csv");
  write_file(blank, "");
  CHECK_THROWS_AS(compas_preprocess(blank), ParseError);

  const std::string missing = dir.file("missing.csv");
  write_file(missing, "race,age,c_charge_degree,two_year_recid,c_jail_in,c_jail_out\nx\n");
  try {
    compas_preprocess(missing);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    const std::string what = e.what();
    CHECK(what.find("priors_count") != std::string::npos);
    CHECK(what.find("sex") != std::string::npos);
  }

  const std::string no_stay = dir.file("nostay.csv");
  write_file(no_stay, "race,age,priors_count,c_charge_degree,sex,two_year_recid\nx\n");
  try {
    compas_preprocess(no_stay);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("c_jail_in") != std::string::npos);
  }
}

}  // TEST_SUITE
