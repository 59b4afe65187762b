#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairsel/dataset.hpp"
#include "fairsel/distribution.hpp"

namespace fairsel {

// One dataset column: either a categorical map over declared levels (codes
// follow declaration order) or a numeric binning over cut points. The only
// boundary rule is "closed_right": value <= cut falls in the lower bin, so
// cuts {c1..ck} produce k+1 bins (-inf, c1], (c1, c2], ..., (ck, inf).
struct ColumnSpec {
  enum class Kind { categorical, binned };

  std::string name;
  Role role = Role::feature;
  Kind kind = Kind::categorical;
  std::vector<std::string> levels;  // categorical only; at least 2
  std::vector<double> cuts;         // binned only; strictly increasing, at least 1
  std::string boundary = "closed_right";

  int cardinality() const;
};

struct SchemaSpec {
  std::vector<ColumnSpec> columns;

  VariableSchema to_schema() const;
};

// JSON document {"schema_version": 1, "columns": [{name, role, kind,
// levels | cuts + boundary}, ...]}. ParseError on malformed documents,
// including any schema_version other than 1.
SchemaSpec schema_spec_from_json(const nlohmann::ordered_json& doc);
nlohmann::ordered_json schema_spec_to_json(const SchemaSpec& spec);

// Comma-separated values with a required header row; quoted fields may hold
// commas, escaped quotes ("") and newlines. Rows with a missing or
// unparseable cell in a declared column (or too few cells) are dropped and
// counted; a non-empty categorical cell outside the declared levels raises
// LevelError naming the row and value. rows_read = kept + dropped.
Dataset load_csv(const std::string& path, const SchemaSpec& spec);

// Integer-coded dump: header of schema names, one row per record.
void write_dataset_csv(const Dataset& data, const std::string& path);

struct CompasReport {
  Dataset dataset;
  long kept_total = 0;
  long kept_african_american = 0;  // race code 0
  long kept_caucasian = 0;         // race code 1
  // Drop tallies per rule, in the order the rules are applied to each row.
  std::vector<std::pair<std::string, long>> drop_counts;
  std::vector<std::string> notes;
  // Published record counts this recipe aims to reproduce.
  long target_total = 5334;
  long target_african_american = 3247;
  long target_caucasian = 2087;
};

// Recidivism-screening recipe over the raw two-year ProPublica export
// (user-supplied; this tool never bundles it):
//   - keep races African-American (code 0) and Caucasian (code 1) only
//   - age bins (-inf,24], (24,45], (45,inf) i.e. <25, 25-45, >45 on integers
//   - priors_count bins 0, 1-3, >3
//   - length of stay bins <=7 days, 8-90 days, >90 days, computed as
//     floor((c_jail_out - c_jail_in) in days) when no length_of_stay column
//     is present; negative stays are dropped
//   - charge degree M -> 0, F -> 1; sex Male -> 0, Female -> 1
//   - label: two_year_recid
// Output schema order: (age, priors_count, length_of_stay, charge_degree,
// sex, race, two_year_recid). Feeding an already-encoded file back in is the
// identity.
CompasReport compas_preprocess(const std::string& path);

// Cell probability (count + smoothing) / (records + smoothing * cells), with
// counts tallied in integer arithmetic. ArgumentError on an empty dataset or
// negative smoothing.
JointDistribution empirical_joint(const Dataset& data, double smoothing = 0.0);

}  // namespace fairsel
