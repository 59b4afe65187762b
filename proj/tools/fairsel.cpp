#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairsel/causal.hpp"
#include "fairsel/coefficients.hpp"
#include "fairsel/distribution.hpp"
#include "fairsel/errors.hpp"
#include "fairsel/ingest.hpp"
#include "fairsel/pid.hpp"
#include "fairsel/reports.hpp"
#include "fairsel/shapley.hpp"
#include "fairsel/validation.hpp"

namespace {

using fairsel::RunManifest;
using nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fairsel::ParseError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

ordered_json load_json(const std::string& path) {
  try {
    return ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw fairsel::ParseError("'" + path + "': " + e.what());
  }
}

void note_input(RunManifest& manifest, const std::string& path) {
  manifest.input_digests.emplace_back(path, fairsel::sha256_file(path));
}

// {"schema": [{name, cardinality, role}], "probs": [row-major floats]}
fairsel::JointDistribution dist_from_json(const ordered_json& doc) {
  try {
    std::vector<fairsel::Variable> vars;
    for (const auto& node : doc.at("schema")) {
      vars.push_back({node.at("name").get<std::string>(), node.at("cardinality").get<int>(),
                      fairsel::role_from_string(node.value("role", std::string("feature")))});
    }
    fairsel::VariableSchema schema(std::move(vars));
    const auto& values = doc.at("probs");
    Eigen::VectorXd probs(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
      probs[static_cast<Eigen::Index>(i)] = values.at(i).get<double>();
    return fairsel::JointDistribution::validated(std::move(schema), std::move(probs));
  } catch (const nlohmann::json::exception& e) {
    throw fairsel::ParseError(std::string("distribution file: ") + e.what());
  }
}

struct SolverFlags {
  fairsel::SolverConfig config;

  void attach(CLI::App* cmd) {
    cmd->add_option("--objective-tol", config.objective_tol,
                    "solver suboptimality target in bits");
    cmd->add_option("--feasibility-tol", config.feasibility_tol,
                    "max marginal violation allowed in the returned coupling");
    cmd->add_option("--max-iterations", config.max_iterations, "solver Newton step budget");
    cmd->add_option("--clamp-threshold", config.clamp_threshold,
                    "negative decomposition parts above this clamp to zero");
  }

  ordered_json to_json() const {
    return {{"objective_tol", config.objective_tol},
            {"feasibility_tol", config.feasibility_tol},
            {"max_iterations", config.max_iterations},
            {"clamp_threshold", config.clamp_threshold}};
  }
};

// --model XOR --data (+--schema); returns the joint to score or sweep.
struct InputFlags {
  std::string model_path;
  std::string data_path;
  std::string schema_path;
  double smoothing = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", model_path, "causal model JSON file");
    cmd->add_option("--data", data_path, "CSV dataset (needs --schema)");
    cmd->add_option("--schema", schema_path, "column schema JSON for --data");
    cmd->add_option("--smoothing", smoothing,
                    "additive smoothing for the empirical distribution");
  }

  fairsel::JointDistribution load(RunManifest& manifest) const {
    const bool has_model = !model_path.empty();
    const bool has_data = !data_path.empty();
    if (has_model == has_data)
      throw fairsel::ArgumentError("give exactly one of --model or --data");
    manifest.parameters["smoothing"] = smoothing;
    if (has_model) {
      note_input(manifest, model_path);
      return fairsel::exact_joint(fairsel::model_from_json(load_json(model_path)));
    }
    if (schema_path.empty())
      throw fairsel::ArgumentError("--data needs --schema");
    note_input(manifest, data_path);
    note_input(manifest, schema_path);
    const fairsel::SchemaSpec spec = fairsel::schema_spec_from_json(load_json(schema_path));
    const fairsel::Dataset data = fairsel::load_csv(data_path, spec);
    std::fprintf(stdout, "loaded %ld records from %s (%ld dropped)\n",
                 static_cast<long>(data.rows()), data_path.c_str(),
                 data.provenance.rows_dropped);
    return fairsel::empirical_joint(data, smoothing);
  }
};

void write_report(const std::string& path, const ordered_json& doc) {
  fairsel::write_text_file(path, fairsel::dump_json_17(doc));
  std::fprintf(stdout, "wrote %s\n", path.c_str());
}

// ---------------------------------------------------------------------------
// pid

struct PidArgs {
  std::string input;
  std::string t, r1, r2;
  std::string out;
  SolverFlags solver;
};

int run_pid(const PidArgs& args) {
  RunManifest manifest;
  manifest.command = "pid";
  note_input(manifest, args.input);
  manifest.parameters["solver"] = args.solver.to_json();

  const fairsel::JointDistribution dist = dist_from_json(load_json(args.input));
  if (dist.schema().size() != 3)
    throw fairsel::ArgumentError("decomposition needs exactly 3 variables, got " +
                                 std::to_string(dist.schema().size()));
  const std::string t = args.t.empty() ? dist.schema().var(0).name : args.t;
  const std::string r1 = args.r1.empty() ? dist.schema().var(1).name : args.r1;
  const std::string r2 = args.r2.empty() ? dist.schema().var(2).name : args.r2;
  manifest.parameters["target"] = t;
  manifest.parameters["source_1"] = r1;
  manifest.parameters["source_2"] = r2;

  const fairsel::PidInput input = fairsel::make_pid_input(dist, t, r1, r2);
  const fairsel::PidResult result = fairsel::pid_decompose(input, args.solver.config);

  std::fprintf(stdout, "unique(%s)    %.12g bits\n", r1.c_str(), result.ui_1);
  std::fprintf(stdout, "unique(%s)    %.12g bits\n", r2.c_str(), result.ui_2);
  std::fprintf(stdout, "shared        %.12g bits\n", result.si);
  std::fprintf(stdout, "synergy       %.12g bits\n", result.ci);
  std::fprintf(stdout, "iterations    %ld\n", result.iterations);
  std::fprintf(stdout, "gap bound     %.3g bits\n", result.objective_gap);

  if (!args.out.empty()) {
    ordered_json doc = {
        {"manifest", fairsel::manifest_to_json(manifest)},
        {"variables", {{"target", t}, {"source_1", r1}, {"source_2", r2}}},
        {"decomposition",
         {{"unique_source_1", result.ui_1},
          {"unique_source_2", result.ui_2},
          {"shared", result.si},
          {"synergy", result.ci}}},
        {"diagnostics",
         {{"iterations", result.iterations}, {"objective_gap", result.objective_gap}}}};
    write_report(args.out, doc);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
  InputFlags input;
  double alpha = 1.0;
  std::string mode = "exact";
  long permutations = 20000;
  std::uint64_t seed = 1;
  int exact_limit = 12;
  bool dump_table = false;
  std::string out;
  SolverFlags solver;
};

ordered_json feature_rows(const fairsel::ScoringProblem& prob,
                          const fairsel::ShapleyScores& scores) {
  ordered_json rows = ordered_json::array();
  for (int i = 0; i < prob.n_features(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    ordered_json row = {{"index", i},
                        {"name", prob.feature_name(i)},
                        {"phi_acc", scores.phi_acc[u]},
                        {"phi_d", scores.phi_d[u]},
                        {"fairness", scores.fairness[u]}};
    if (!scores.std_err_acc.empty()) {
      row["std_err_acc"] = scores.std_err_acc[u];
      row["std_err_disc"] = scores.std_err_disc[u];
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json table_rows(const fairsel::ScoringProblem& prob,
                        const fairsel::CoefficientTable& table) {
  ordered_json rows = ordered_json::array();
  const std::uint32_t limit = std::uint32_t{1} << table.n;
  for (std::uint32_t bits = 0; bits < limit; ++bits) {
    const fairsel::SubsetKey key(bits);
    if (!table.has(key)) continue;
    ordered_json members = ordered_json::array();
    for (int i : key.members()) members.push_back(prob.feature_name(i));
    ordered_json row = {{"bits", bits},
                        {"members", std::move(members)},
                        {"acc", table.acc_at(key)},
                        {"disc", table.disc_at(key)}};
    const auto it = table.pid_cache.find(bits);
    if (it != table.pid_cache.end()) {
      row["shared"] = it->second.si;
      row["synergy"] = it->second.ci;
      row["unique_subset"] = it->second.ui_1;
      row["unique_protected"] = it->second.ui_2;
      row["objective_gap"] = it->second.objective_gap;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string score_csv(const fairsel::ScoringProblem& prob, const fairsel::ShapleyScores& scores) {
  const bool mc = !scores.std_err_acc.empty();
  std::string csv = "index,name,phi_acc,phi_d,fairness";
  if (mc) csv += ",std_err_acc,std_err_disc";
  csv += "\n";
  for (int i = 0; i < prob.n_features(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    csv += std::to_string(i) + "," + prob.feature_name(i) + "," +
           fairsel::format_double_17(scores.phi_acc[u]) + "," +
           fairsel::format_double_17(scores.phi_d[u]) + "," +
           fairsel::format_double_17(scores.fairness[u]);
    if (mc)
      csv += "," + fairsel::format_double_17(scores.std_err_acc[u]) + "," +
             fairsel::format_double_17(scores.std_err_disc[u]);
    csv += "\n";
  }
  return csv;
}

int run_score(const ScoreArgs& args) {
  RunManifest manifest;
  manifest.command = "score";

  fairsel::ScoreOptions options;
  options.alpha = args.alpha;
  options.monte_carlo = args.mode == "mc";
  options.permutations = args.permutations;
  options.seed = args.seed;
  options.table.exact_limit = args.exact_limit;

  const fairsel::JointDistribution dist = args.input.load(manifest);
  manifest.parameters["alpha"] = args.alpha;
  manifest.parameters["mode"] = args.mode;
  manifest.parameters["exact_limit"] = args.exact_limit;
  if (options.monte_carlo) {
    manifest.parameters["permutations"] = args.permutations;
    manifest.parameters["seed"] = args.seed;
  }
  manifest.parameters["dump_table"] = args.dump_table;
  manifest.parameters["solver"] = args.solver.to_json();

  const fairsel::ScoringProblem prob =
      fairsel::make_scoring_problem(dist, args.solver.config);
  fairsel::CoefficientTable table;
  const fairsel::ShapleyScores scores = fairsel::score_features(prob, options, &table);
  const std::vector<int> ranking = fairsel::rank_features(scores.fairness);

  std::fprintf(stdout, "%-6s %-16s %14s %14s %14s\n", "rank", "feature", "phi_acc",
               "phi_d", "fairness");
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    const int i = ranking[r];
    const auto u = static_cast<std::size_t>(i);
    std::fprintf(stdout, "%-6zu %-16s %14.6g %14.6g %14.6g\n", r + 1,
                 prob.feature_name(i).c_str(), scores.phi_acc[u], scores.phi_d[u],
                 scores.fairness[u]);
  }

  if (!args.out.empty()) {
    ordered_json doc = {{"manifest", fairsel::manifest_to_json(manifest)},
                        {"method", scores.method},
                        {"alpha", scores.alpha}};
    if (options.monte_carlo) {
      doc["seed"] = scores.seed;
      doc["permutations"] = scores.permutations;
    }
    doc["features"] = feature_rows(prob, scores);
    ordered_json rank_json = ordered_json::array();
    for (int i : ranking) rank_json.push_back(i);
    doc["ranking"] = std::move(rank_json);
    if (args.dump_table) doc["table"] = table_rows(prob, table);
    write_report(args.out + ".json", doc);
    fairsel::write_text_file(args.out + ".csv", score_csv(prob, scores));
    std::fprintf(stdout, "wrote %s.csv\n", args.out.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// select

struct SelectArgs {
  std::string report;
  int top_k = 0;
  bool top_k_set = false;
  double threshold = 0.0;
  bool threshold_set = false;
  std::string out;
};

int run_select(const SelectArgs& args) {
  if (args.top_k_set == args.threshold_set)
    throw fairsel::ArgumentError("choose exactly one of --top-k or --threshold");

  RunManifest manifest;
  manifest.command = "select";
  note_input(manifest, args.report);
  if (args.top_k_set) manifest.parameters["top_k"] = args.top_k;
  if (args.threshold_set) manifest.parameters["threshold"] = args.threshold;

  const ordered_json doc = load_json(args.report);
  std::vector<std::string> names;
  fairsel::ShapleyScores scores;
  try {
    for (const auto& row : doc.at("features")) {
      names.push_back(row.at("name").get<std::string>());
      scores.fairness.push_back(row.at("fairness").get<double>());
      scores.phi_acc.push_back(row.value("phi_acc", 0.0));
      scores.phi_d.push_back(row.value("phi_d", 0.0));
    }
  } catch (const nlohmann::json::exception& e) {
    throw fairsel::ParseError("score report: " + std::string(e.what()));
  }
  if (names.empty()) throw fairsel::ParseError("score report lists no features");

  const fairsel::SelectionPolicy policy = args.top_k_set
                                              ? fairsel::SelectionPolicy::top_k(args.top_k)
                                              : fairsel::SelectionPolicy::threshold(args.threshold);
  const std::vector<int> chosen = fairsel::rank_and_select(scores, policy);

  for (std::size_t r = 0; r < chosen.size(); ++r) {
    const int i = chosen[r];
    std::fprintf(stdout, "%zu %d %s %.6g\n", r + 1, i, names[static_cast<std::size_t>(i)].c_str(),
                 scores.fairness[static_cast<std::size_t>(i)]);
  }
  if (chosen.empty()) std::fprintf(stdout, "(no feature passes the policy)\n");

  if (!args.out.empty()) {
    ordered_json rows = ordered_json::array();
    for (std::size_t r = 0; r < chosen.size(); ++r) {
      const int i = chosen[r];
      rows.push_back({{"rank", r + 1},
                      {"index", i},
                      {"name", names[static_cast<std::size_t>(i)]},
                      {"fairness", scores.fairness[static_cast<std::size_t>(i)]}});
    }
    ordered_json out_doc = {{"manifest", fairsel::manifest_to_json(manifest)},
                            {"selected", std::move(rows)}};
    write_report(args.out, out_doc);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string fixture;
  std::string graph;
  int features = 3;
  std::uint64_t seed = 0;
  long samples = 0;
  double concentration = 1.0;
  std::string out = "synth";
};

int run_synth(const SynthArgs& args) {
  const bool has_fixture = !args.fixture.empty();
  const bool has_graph = !args.graph.empty();
  if (has_fixture == has_graph)
    throw fairsel::ArgumentError("give exactly one of --fixture or --graph");

  RunManifest manifest;
  manifest.command = "synth";
  manifest.parameters["seed"] = args.seed;
  manifest.parameters["samples"] = args.samples;

  fairsel::CausalModel model;
  if (has_fixture) {
    manifest.parameters["fixture"] = args.fixture;
    if (args.fixture == "standin") {
      model = fairsel::synthetic_standin(args.seed);
    } else {
      manifest.parameters["features"] = args.features;
      model = fairsel::make_fixture(fairsel::fixture_from_string(args.fixture), args.features,
                                    args.seed);
    }
  } else {
    note_input(manifest, args.graph);
    const ordered_json doc = load_json(args.graph);
    if (doc.contains("cpts")) {
      model = fairsel::model_from_json(doc);
    } else {
      manifest.parameters["concentration"] = args.concentration;
      try {
        std::vector<fairsel::Variable> vars;
        for (const auto& node : doc.at("nodes")) {
          vars.push_back({node.at("name").get<std::string>(),
                          node.at("cardinality").get<int>(),
                          fairsel::role_from_string(node.at("role").get<std::string>())});
        }
        std::vector<std::pair<std::string, std::string>> edges;
        for (const auto& e : doc.at("edges"))
          edges.push_back({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
        model = fairsel::random_cpts(
            fairsel::make_dag(fairsel::VariableSchema(std::move(vars)), edges), args.seed,
            args.concentration);
      } catch (const nlohmann::json::exception& e) {
        throw fairsel::ParseError("graph file: " + std::string(e.what()));
      }
    }
  }

  const std::string model_path = args.out + ".model.json";
  fairsel::write_text_file(model_path, fairsel::dump_json_17(fairsel::model_to_json(model)));
  std::fprintf(stdout, "wrote %s (%d nodes)\n", model_path.c_str(), model.dag.schema.size());

  if (args.samples > 0) {
    const fairsel::Dataset data = fairsel::forward_sample(model, args.samples, args.seed);
    const std::string data_path = args.out + ".data.csv";
    fairsel::write_dataset_csv(data, data_path);
    std::fprintf(stdout, "wrote %s (%ld records)\n", data_path.c_str(),
                 static_cast<long>(data.rows()));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  InputFlags input;
  std::string out;
};

ordered_json sweep_entry_json(const fairsel::SweepEntry& entry, const std::string& name) {
  ordered_json row = {{"removed_index", entry.removed},
                      {"removed", name},
                      {"error_01", entry.error_01},
                      {"cross_entropy_bits", entry.cross_entropy},
                      {"bias_kl_bits", entry.bias_kl}};
  return row;
}

int run_sweep(const SweepArgs& args) {
  RunManifest manifest;
  manifest.command = "sweep";
  const fairsel::JointDistribution dist = args.input.load(manifest);

  const fairsel::SweepReport report = fairsel::removal_sweep(dist);
  const auto feats = dist.schema().feature_indices();
  auto name_of = [&](int i) {
    return i < 0 ? std::string()
                 : dist.schema().var(feats[static_cast<std::size_t>(i)]).name;
  };

  std::fprintf(stdout, "%-16s %12s %18s %14s\n", "removed", "error_01", "cross_entropy",
               "bias_kl");
  auto print_entry = [&](const fairsel::SweepEntry& e) {
    const std::string label = e.removed < 0 ? "(none)" : name_of(e.removed);
    std::fprintf(stdout, "%-16s %12.6g %18.6g %14.6g\n", label.c_str(), e.error_01,
                 e.cross_entropy, e.bias_kl);
  };
  print_entry(report.baseline);
  for (const auto& e : report.removed) print_entry(e);

  if (!args.out.empty()) {
    ordered_json removed = ordered_json::array();
    for (const auto& e : report.removed)
      removed.push_back(sweep_entry_json(e, name_of(e.removed)));
    ordered_json doc = {{"manifest", fairsel::manifest_to_json(manifest)},
                        {"baseline", sweep_entry_json(report.baseline, "")},
                        {"removed", std::move(removed)}};
    write_report(args.out + ".json", doc);

    std::string csv = "removed,error_01,cross_entropy_bits,bias_kl_bits\n";
    auto csv_row = [&](const fairsel::SweepEntry& e) {
      csv += name_of(e.removed) + "," + fairsel::format_double_17(e.error_01) + "," +
             fairsel::format_double_17(e.cross_entropy) + "," +
             fairsel::format_double_17(e.bias_kl) + "\n";
    };
    csv_row(report.baseline);
    for (const auto& e : report.removed) csv_row(e);
    fairsel::write_text_file(args.out + ".csv", csv);
    std::fprintf(stdout, "wrote %s.csv\n", args.out.c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// compas-prep

struct CompasArgs {
  std::string input;
  std::string out;
  std::string report_path;
};

int run_compas(const CompasArgs& args) {
  RunManifest manifest;
  manifest.command = "compas-prep";
  note_input(manifest, args.input);
  manifest.parameters["output"] = args.out;

  const fairsel::CompasReport report = fairsel::compas_preprocess(args.input);
  fairsel::write_dataset_csv(report.dataset, args.out);

  std::fprintf(stdout, "kept %ld records (%ld African-American, %ld Caucasian)\n",
               report.kept_total, report.kept_african_american, report.kept_caucasian);
  for (const auto& [rule, count] : report.drop_counts)
    std::fprintf(stdout, "dropped %-40s %ld\n", rule.c_str(), count);
  std::fprintf(stdout, "target  total %ld (diff %+ld)\n", report.target_total,
               report.kept_total - report.target_total);
  std::fprintf(stdout, "target  African-American %ld (diff %+ld)\n",
               report.target_african_american,
               report.kept_african_american - report.target_african_american);
  std::fprintf(stdout, "target  Caucasian %ld (diff %+ld)\n", report.target_caucasian,
               report.kept_caucasian - report.target_caucasian);
  for (const auto& note : report.notes) std::fprintf(stdout, "note: %s\n", note.c_str());
  std::fprintf(stdout, "wrote %s\n", args.out.c_str());

  if (!args.report_path.empty()) {
    ordered_json drops = ordered_json::array();
    for (const auto& [rule, count] : report.drop_counts)
      drops.push_back({{"rule", rule}, {"dropped", count}});
    ordered_json doc = {
        {"manifest", fairsel::manifest_to_json(manifest)},
        {"kept",
         {{"total", report.kept_total},
          {"african_american", report.kept_african_american},
          {"caucasian", report.kept_caucasian}}},
        {"targets",
         {{"total", report.target_total},
          {"african_american", report.target_african_american},
          {"caucasian", report.target_caucasian}}},
        {"diff",
         {{"total", report.kept_total - report.target_total},
          {"african_american",
           report.kept_african_american - report.target_african_american},
          {"caucasian", report.kept_caucasian - report.target_caucasian}}},
        {"drops", std::move(drops)},
        {"notes", report.notes},
        {"output", args.out}};
    write_report(args.report_path, doc);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"information-theoretic fairness scoring and feature selection"};
  app.require_subcommand(1);

  PidArgs pid_args;
  CLI::App* pid_cmd = app.add_subcommand(
      "pid", "decompose a 3-variable joint into unique/shared/synergistic parts");
  pid_cmd->add_option("input", pid_args.input, "joint distribution JSON file")->required();
  pid_cmd->add_option("--t", pid_args.t, "target variable (default: first)");
  pid_cmd->add_option("--r1", pid_args.r1, "first source (default: second)");
  pid_cmd->add_option("--r2", pid_args.r2, "second source (default: third)");
  pid_cmd->add_option("--out", pid_args.out, "write a JSON report here");
  pid_args.solver.attach(pid_cmd);

  ScoreArgs score_args;
  CLI::App* score_cmd =
      app.add_subcommand("score", "per-feature accuracy/discrimination scores");
  score_args.input.attach(score_cmd);
  score_cmd->add_option("--alpha", score_args.alpha, "discrimination weight in the score");
  score_cmd->add_option("--mode", score_args.mode, "exact or mc")
      ->check(CLI::IsMember({"exact", "mc"}));
  score_cmd->add_option("--permutations", score_args.permutations, "mc sample size");
  score_cmd->add_option("--seed", score_args.seed, "mc sampling seed");
  score_cmd->add_option("--exact-limit", score_args.exact_limit,
                        "max feature count for the full-table mode");
  score_cmd->add_flag("--dump-table", score_args.dump_table,
                      "embed the whole subset table in the JSON report");
  score_cmd->add_option("--out", score_args.out, "report path prefix (.json/.csv)");
  score_args.solver.attach(score_cmd);

  SelectArgs select_args;
  CLI::App* select_cmd = app.add_subcommand("select", "pick features from a score report");
  select_cmd->add_option("--report", select_args.report, "score report JSON")->required();
  CLI::Option* topk_opt = select_cmd->add_option("--top-k", select_args.top_k,
                                                 "keep the k best by fairness score");
  CLI::Option* thr_opt = select_cmd->add_option("--threshold", select_args.threshold,
                                                "keep features with score >= threshold");
  select_cmd->add_option("--out", select_args.out, "write the selection as JSON here");

  SynthArgs synth_args;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate causal models and samples");
  synth_cmd->add_option("--fixture", synth_args.fixture,
                        "single_parent_y|single_child_a|path_blocking|independent_feature|standin");
  synth_cmd->add_option("--graph", synth_args.graph, "graph or model JSON file");
  synth_cmd->add_option("--features", synth_args.features, "feature count for fixtures");
  synth_cmd->add_option("--seed", synth_args.seed, "generation seed");
  synth_cmd->add_option("--samples", synth_args.samples, "rows to sample (0 = model only)");
  synth_cmd->add_option("--concentration", synth_args.concentration,
                        "Dirichlet concentration for random tables");
  synth_cmd->add_option("--out", synth_args.out, "output prefix");

  SweepArgs sweep_args;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "classifier error and bias with each feature removed");
  sweep_args.input.attach(sweep_cmd);
  sweep_cmd->add_option("--out", sweep_args.out, "report path prefix (.json/.csv)");

  CompasArgs compas_args;
  CLI::App* compas_cmd =
      app.add_subcommand("compas-prep", "encode a raw recidivism CSV for scoring");
  compas_cmd->add_option("--input", compas_args.input, "raw CSV path")->required();
  compas_cmd->add_option("--out", compas_args.out, "encoded CSV path")->required();
  compas_cmd->add_option("--report", compas_args.report_path, "write a JSON summary here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  select_args.top_k_set = topk_opt->count() > 0;
  select_args.threshold_set = thr_opt->count() > 0;

  try {
    if (pid_cmd->parsed()) return run_pid(pid_args);
    if (score_cmd->parsed()) return run_score(score_args);
    if (select_cmd->parsed()) return run_select(select_args);
    if (synth_cmd->parsed()) return run_synth(synth_args);
    if (sweep_cmd->parsed()) return run_sweep(sweep_args);
    if (compas_cmd->parsed()) return run_compas(compas_args);
    std::fprintf(stderr, "no command given\n");
    return 2;
  } catch (const fairsel::ConvergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const fairsel::SizeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const fairsel::IntegrityError& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  } catch (const fairsel::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
}
