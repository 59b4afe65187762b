#include "fairsel/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "fairsel/errors.hpp"

namespace fairsel {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

// Comma-separated records with quoted-field support: embedded commas,
// doubled-quote escapes and embedded newlines. CR outside quotes is treated
// as line ending decoration. Fully empty lines are skipped.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;

  auto end_cell = [&]() {
    row.push_back(std::move(cell));
    cell.clear();
  };
  auto end_row = [&]() {
    end_cell();
    if (!(row.size() == 1 && row.front().empty())) records.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"': quoted = true; break;
      case ',': end_cell(); break;
      case '\n': end_row(); break;
      case '\r': break;
      default: cell.push_back(c);
    }
  }
  if (!cell.empty() || !row.empty()) end_row();
  return records;
}

std::string trimmed(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  return s.substr(b, e - b);
}

bool parse_number(const std::string& raw, double* out) {
  const std::string s = trimmed(raw);
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

// Lowest bin whose cut is >= v; values above every cut land in the last bin.
int bin_for(const std::vector<double>& cuts, double v) {
  for (std::size_t i = 0; i < cuts.size(); ++i)
    if (v <= cuts[i]) return static_cast<int>(i);
  return static_cast<int>(cuts.size());
}

void validate_column(const ColumnSpec& col) {
  if (col.name.empty()) throw ArgumentError("column with empty name");
  if (col.kind == ColumnSpec::Kind::categorical) {
    if (col.levels.size() < 2)
      throw ArgumentError("column '" + col.name + "' needs at least 2 levels");
    std::unordered_set<std::string> seen;
    for (const auto& level : col.levels)
      if (!seen.insert(level).second)
        throw ArgumentError("column '" + col.name + "' repeats level '" + level + "'");
    return;
  }
  if (col.cuts.empty())
    throw ArgumentError("column '" + col.name + "' needs at least 1 cut point");
  for (std::size_t i = 1; i < col.cuts.size(); ++i)
    if (!(col.cuts[i - 1] < col.cuts[i]))
      throw ArgumentError("column '" + col.name + "' cuts must be strictly increasing");
  if (col.boundary != "closed_right")
    throw ArgumentError("column '" + col.name + "': only boundary 'closed_right' is supported");
}

std::string csv_escaped(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

// Days since 1970-01-01 for a proleptic-Gregorian civil date.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u + static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// "YYYY-MM-DD" or "YYYY-MM-DD HH:MM:SS" to seconds since the epoch.
bool parse_timestamp(const std::string& raw, std::int64_t* out) {
  const std::string s = trimmed(raw);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  const int got = std::sscanf(s.c_str(), "%d-%d-%d %d:%d:%d", &y, &mo, &d, &h, &mi, &se);
  if (got != 3 && got != 6) return false;
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return false;
  *out = days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
  return true;
}

std::int64_t floor_div_day(std::int64_t seconds) {
  const std::int64_t q = seconds / 86400;
  return (seconds % 86400 < 0) ? q - 1 : q;
}

const std::array<const char*, 7> kCompasColumns = {
    "age", "priors_count", "length_of_stay", "charge_degree",
    "sex", "race",         "two_year_recid"};

VariableSchema compas_schema() {
  return VariableSchema({{"age", 3, Role::feature},
                         {"priors_count", 3, Role::feature},
                         {"length_of_stay", 3, Role::feature},
                         {"charge_degree", 2, Role::feature},
                         {"sex", 2, Role::feature},
                         {"race", 2, Role::protected_attr},
                         {"two_year_recid", 2, Role::label}});
}

Dataset dataset_from_rows(VariableSchema schema, const std::vector<std::vector<int>>& rows,
                          const std::string& source, long rows_read, long rows_dropped) {
  Dataset out;
  out.schema = std::move(schema);
  out.codes.resize(static_cast<Eigen::Index>(rows.size()), out.schema.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < out.schema.size(); ++c)
      out.codes(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  out.provenance.source = source;
  out.provenance.rows_read = rows_read;
  out.provenance.rows_dropped = rows_dropped;
  return out;
}

}  // namespace

int ColumnSpec::cardinality() const {
  return kind == Kind::categorical ? static_cast<int>(levels.size())
                                   : static_cast<int>(cuts.size()) + 1;
}

VariableSchema SchemaSpec::to_schema() const {
  if (columns.empty()) throw ArgumentError("schema has no columns");
  std::vector<Variable> vars;
  vars.reserve(columns.size());
  for (const auto& col : columns) {
    validate_column(col);
    vars.push_back({col.name, col.cardinality(), col.role});
  }
  return VariableSchema(std::move(vars));
}

SchemaSpec schema_spec_from_json(const nlohmann::ordered_json& doc) {
  try {
    if (!doc.contains("schema_version") || doc.at("schema_version") != 1)
      throw ParseError("schema file: schema_version must be 1");
    SchemaSpec spec;
    for (const auto& col : doc.at("columns")) {
      ColumnSpec c;
      c.name = col.at("name").get<std::string>();
      c.role = role_from_string(col.at("role").get<std::string>());
      const std::string kind = col.at("kind").get<std::string>();
      if (kind == "categorical") {
        c.kind = ColumnSpec::Kind::categorical;
        for (const auto& level : col.at("levels")) c.levels.push_back(level.get<std::string>());
      } else if (kind == "binned") {
        c.kind = ColumnSpec::Kind::binned;
        for (const auto& cut : col.at("cuts")) c.cuts.push_back(cut.get<double>());
        c.boundary = col.value("boundary", std::string("closed_right"));
      } else {
        throw ParseError("schema file: unknown kind '" + kind +
                         "' (expected categorical|binned)");
      }
      validate_column(c);
      spec.columns.push_back(std::move(c));
    }
    if (spec.columns.empty()) throw ParseError("schema file: no columns declared");
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("schema file: ") + e.what());
  }
}

nlohmann::ordered_json schema_spec_to_json(const SchemaSpec& spec) {
  nlohmann::ordered_json columns = nlohmann::ordered_json::array();
  for (const auto& col : spec.columns) {
    validate_column(col);
    nlohmann::ordered_json entry = {{"name", col.name}, {"role", to_string(col.role)}};
    if (col.kind == ColumnSpec::Kind::categorical) {
      entry["kind"] = "categorical";
      entry["levels"] = col.levels;
    } else {
      entry["kind"] = "binned";
      entry["cuts"] = col.cuts;
      entry["boundary"] = col.boundary;
    }
    columns.push_back(std::move(entry));
  }
  return {{"schema_version", 1}, {"columns", std::move(columns)}};
}

Dataset load_csv(const std::string& path, const SchemaSpec& spec) {
  const VariableSchema schema = spec.to_schema();
  const auto records = parse_csv(read_file(path));
  if (records.empty()) throw ParseError("'" + path + "': missing header row");

  std::unordered_map<std::string, std::size_t> header_pos;
  for (std::size_t i = 0; i < records.front().size(); ++i)
    header_pos.emplace(records.front()[i], i);
  std::vector<std::size_t> src(spec.columns.size());
  for (std::size_t j = 0; j < spec.columns.size(); ++j) {
    const auto it = header_pos.find(spec.columns[j].name);
    if (it == header_pos.end())
      throw SchemaError("'" + path + "': column '" + spec.columns[j].name + "' not found");
    src[j] = it->second;
  }

  std::vector<std::vector<int>> kept;
  long dropped = 0;
  std::vector<int> codes(spec.columns.size(), 0);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    bool drop = false;
    for (std::size_t j = 0; j < spec.columns.size() && !drop; ++j) {
      if (src[j] >= rec.size()) {
        drop = true;
        break;
      }
      const ColumnSpec& col = spec.columns[j];
      const std::string cell = trimmed(rec[src[j]]);
      if (cell.empty()) {
        drop = true;
        break;
      }
      if (col.kind == ColumnSpec::Kind::categorical) {
        const auto lit = std::find(col.levels.begin(), col.levels.end(), cell);
        if (lit == col.levels.end())
          throw LevelError("data row " + std::to_string(r) + ": unknown level '" + cell +
                           "' in column '" + col.name + "'");
        codes[j] = static_cast<int>(lit - col.levels.begin());
      } else {
        double v = 0.0;
        if (!parse_number(cell, &v)) {
          drop = true;
          break;
        }
        codes[j] = bin_for(col.cuts, v);
      }
    }
    if (drop) {
      ++dropped;
    } else {
      kept.push_back(codes);
    }
  }

  return dataset_from_rows(schema, kept, path, static_cast<long>(records.size()) - 1, dropped);
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  for (int c = 0; c < data.schema.size(); ++c) {
    if (c) out << ',';
    out << csv_escaped(data.schema.var(c).name);
  }
  out << '\n';
  for (Eigen::Index r = 0; r < data.codes.rows(); ++r) {
    for (int c = 0; c < data.schema.size(); ++c) {
      if (c) out << ',';
      out << data.codes(r, c);
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw ParseError("failed while writing '" + path + "'");
}

CompasReport compas_preprocess(const std::string& path) {
  const auto records = parse_csv(read_file(path));
  if (records.empty()) throw ParseError("'" + path + "': missing header row");
  const auto& header = records.front();

  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) pos.emplace(header[i], i);
  auto have = [&](const char* name) { return pos.count(name) > 0; };

  CompasReport report;
  report.dataset.schema = compas_schema();

  const bool encoded =
      std::all_of(kCompasColumns.begin(), kCompasColumns.end(), have);
  const bool stay_precomputed = have("length_of_stay");

  std::vector<std::vector<int>> kept;
  long n_missing = 0, n_race = 0, n_bad_value = 0, n_negative_stay = 0;

  if (encoded) {
    // Re-encoding an encoded dump is the identity.
    report.notes.push_back("input already carries the encoded column set; identity re-encode");
    std::array<std::size_t, 7> src{};
    for (std::size_t j = 0; j < kCompasColumns.size(); ++j) src[j] = pos.at(kCompasColumns[j]);
    const auto cards = report.dataset.schema.cardinalities();
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& rec = records[r];
      std::vector<int> codes(7, 0);
      bool missing = false, bad = false;
      for (std::size_t j = 0; j < 7 && !missing && !bad; ++j) {
        if (src[j] >= rec.size() || trimmed(rec[src[j]]).empty()) {
          missing = true;
          break;
        }
        double v = 0.0;
        if (!parse_number(rec[src[j]], &v) || v != static_cast<int>(v) || v < 0 ||
            static_cast<int>(v) >= cards[j]) {
          bad = true;
          break;
        }
        codes[j] = static_cast<int>(v);
      }
      if (missing) {
        ++n_missing;
      } else if (bad) {
        ++n_bad_value;
      } else {
        kept.push_back(std::move(codes));
      }
    }
  } else {
    const std::array<const char*, 6> required = {"race", "age",  "priors_count",
                                                 "c_charge_degree", "sex", "two_year_recid"};
    std::string missing_cols;
    for (const char* name : required)
      if (!have(name)) missing_cols += std::string(missing_cols.empty() ? "" : ", ") + name;
    if (!stay_precomputed && !(have("c_jail_in") && have("c_jail_out")))
      missing_cols += std::string(missing_cols.empty() ? "" : ", ") +
                      "length_of_stay (or c_jail_in + c_jail_out)";
    if (!missing_cols.empty())
      throw SchemaError("'" + path + "': missing column(s): " + missing_cols);

    report.notes.push_back("age bins: <25, 25-45, >45 (cuts 24/45, closed right)");
    report.notes.push_back("priors_count bins: 0, 1-3, >3 (cuts 0/3, closed right)");
    if (stay_precomputed)
      report.notes.push_back("length_of_stay bins on provided day counts: <=7, 8-90, >90");
    else
      report.notes.push_back(
          "length_of_stay = floor((c_jail_out - c_jail_in) in days), bins <=7, 8-90, >90");
    report.notes.push_back("race codes: African-American=0, Caucasian=1; other races dropped");
    report.notes.push_back("charge_degree: M=0, F=1; sex: Male=0, Female=1");

    const std::vector<double> age_cuts = {24.0, 45.0};
    const std::vector<double> priors_cuts = {0.0, 3.0};
    const std::vector<double> stay_cuts = {7.0, 90.0};

    auto cell_at = [&](const std::vector<std::string>& rec, const char* name) {
      const std::size_t i = pos.at(name);
      return i < rec.size() ? trimmed(rec[i]) : std::string();
    };

    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& rec = records[r];
      const std::string race = cell_at(rec, "race");
      const std::string age = cell_at(rec, "age");
      const std::string priors = cell_at(rec, "priors_count");
      const std::string charge = cell_at(rec, "c_charge_degree");
      const std::string sex = cell_at(rec, "sex");
      const std::string recid = cell_at(rec, "two_year_recid");
      std::string stay_a, stay_b;
      if (stay_precomputed) {
        stay_a = cell_at(rec, "length_of_stay");
      } else {
        stay_a = cell_at(rec, "c_jail_in");
        stay_b = cell_at(rec, "c_jail_out");
      }

      if (race.empty() || age.empty() || priors.empty() || charge.empty() || sex.empty() ||
          recid.empty() || stay_a.empty() || (!stay_precomputed && stay_b.empty())) {
        ++n_missing;
        continue;
      }
      if (race != "African-American" && race != "Caucasian") {
        ++n_race;
        continue;
      }

      double age_v = 0.0, priors_v = 0.0;
      std::int64_t stay_days = 0;
      bool ok = parse_number(age, &age_v) && parse_number(priors, &priors_v);
      if (ok) {
        if (stay_precomputed) {
          double stay_v = 0.0;
          ok = parse_number(stay_a, &stay_v);
          stay_days = static_cast<std::int64_t>(std::floor(stay_v));
        } else {
          std::int64_t in_s = 0, out_s = 0;
          ok = parse_timestamp(stay_a, &in_s) && parse_timestamp(stay_b, &out_s);
          stay_days = floor_div_day(out_s - in_s);
        }
      }
      const bool charge_ok = charge == "M" || charge == "F";
      const bool sex_ok = sex == "Male" || sex == "Female";
      const bool recid_ok = recid == "0" || recid == "1";
      if (!ok || !charge_ok || !sex_ok || !recid_ok) {
        ++n_bad_value;
        continue;
      }
      if (stay_days < 0) {
        ++n_negative_stay;
        continue;
      }

      std::vector<int> codes(7, 0);
      codes[0] = bin_for(age_cuts, age_v);
      codes[1] = bin_for(priors_cuts, priors_v);
      codes[2] = bin_for(stay_cuts, static_cast<double>(stay_days));
      codes[3] = charge == "M" ? 0 : 1;
      codes[4] = sex == "Male" ? 0 : 1;
      codes[5] = race == "African-American" ? 0 : 1;
      codes[6] = recid == "0" ? 0 : 1;
      kept.push_back(std::move(codes));
    }
  }

  report.drop_counts = {{"missing field", n_missing},
                        {"race outside the two study groups", n_race},
                        {"unparseable or unrecognized value", n_bad_value},
                        {"negative length of stay", n_negative_stay}};

  for (const auto& row : kept) {
    ++report.kept_total;
    if (row[5] == 0) ++report.kept_african_american;
    else ++report.kept_caucasian;
  }

  const long dropped = n_missing + n_race + n_bad_value + n_negative_stay;
  report.dataset = dataset_from_rows(compas_schema(), kept, path,
                                     static_cast<long>(records.size()) - 1, dropped);
  return report;
}

JointDistribution empirical_joint(const Dataset& data, double smoothing) {
  if (data.rows() < 1) throw ArgumentError("empirical distribution needs at least one record");
  if (!(smoothing >= 0.0)) throw ArgumentError("smoothing must be non-negative");
  if (data.codes.cols() != data.schema.size())
    throw SchemaError("dataset columns do not match its schema");

  const auto cards = data.schema.cardinalities();
  const auto strides = row_major_strides(cards);
  const std::int64_t cells = data.schema.cell_count();

  std::vector<std::int64_t> counts(static_cast<std::size_t>(cells), 0);
  for (Eigen::Index r = 0; r < data.codes.rows(); ++r) {
    std::int64_t linear = 0;
    for (int c = 0; c < data.schema.size(); ++c) {
      const int code = data.codes(r, c);
      if (code < 0 || code >= cards[static_cast<std::size_t>(c)])
        throw ArgumentError("record " + std::to_string(r) + " carries code " +
                            std::to_string(code) + " outside column '" +
                            data.schema.var(c).name + "'");
      linear += code * strides[static_cast<std::size_t>(c)];
    }
    ++counts[static_cast<std::size_t>(linear)];
  }

  const double denom =
      static_cast<double>(data.rows()) + smoothing * static_cast<double>(cells);
  Eigen::VectorXd probs(cells);
  for (std::int64_t i = 0; i < cells; ++i)
    probs[i] = (static_cast<double>(counts[static_cast<std::size_t>(i)]) + smoothing) / denom;
  return JointDistribution::from_tensor(data.schema, std::move(probs));
}

}  // namespace fairsel
