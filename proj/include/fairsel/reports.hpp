#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace fairsel {

inline constexpr const char* kToolVersion = "0.1.0";

std::string sha256_bytes(std::string_view data);
std::string sha256_file(const std::string& path);  // ParseError if unreadable

// Everything that determines a run's output: the command, every resolved
// parameter, and content digests of the input files. Deliberately carries no
// timestamps or host details, so equal manifests mean byte-equal reports.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, std::string>> input_digests;  // (path, sha256)
};

nlohmann::ordered_json manifest_to_json(const RunManifest& manifest);

// Shortest-form "%.17g" rendering: round-trips every finite double exactly.
// NaN or infinity raises IntegrityError (reports must stay valid JSON).
std::string format_double_17(double v);

// nlohmann-compatible pretty serialization, except every float is rendered
// by format_double_17.
std::string dump_json_17(const nlohmann::ordered_json& doc, int indent = 2);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace fairsel
