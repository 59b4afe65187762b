#include "fairsel/reports.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "fairsel/errors.hpp"

namespace fairsel {

namespace {

void append_indent(std::string& out, int indent, int depth) {
  out.append(static_cast<std::size_t>(indent) * static_cast<std::size_t>(depth), ' ');
}

void render(const nlohmann::ordered_json& node, std::string& out, int indent, int depth) {
  switch (node.type()) {
    case nlohmann::ordered_json::value_t::object: {
      if (node.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (const auto& [key, value] : node.items()) {
        append_indent(out, indent, depth + 1);
        out += nlohmann::ordered_json(key).dump();
        out += ": ";
        render(value, out, indent, depth + 1);
        if (++i < node.size()) out += ',';
        out += '\n';
      }
      append_indent(out, indent, depth);
      out += '}';
      return;
    }
    case nlohmann::ordered_json::value_t::array: {
      if (node.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < node.size(); ++i) {
        append_indent(out, indent, depth + 1);
        render(node[i], out, indent, depth + 1);
        if (i + 1 < node.size()) out += ',';
        out += '\n';
      }
      append_indent(out, indent, depth);
      out += ']';
      return;
    }
    case nlohmann::ordered_json::value_t::number_float:
      out += format_double_17(node.get<double>());
      return;
    default:
      out += node.dump();
      return;
  }
}

}  // namespace

std::string sha256_bytes(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw IntegrityError("sha256 computation failed");
  }
  EVP_MD_CTX_free(ctx);

  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string content = std::move(buf).str();
  return sha256_bytes(content);
}

nlohmann::ordered_json manifest_to_json(const RunManifest& manifest) {
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const auto& [path, digest] : manifest.input_digests)
    inputs.push_back({{"path", path}, {"sha256", digest}});
  return {{"command", manifest.command},
          {"tool_version", kToolVersion},
          {"parameters", manifest.parameters},
          {"inputs", std::move(inputs)}};
}

std::string format_double_17(double v) {
  if (!std::isfinite(v))
    throw IntegrityError("non-finite value cannot be serialized into a report");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string dump_json_17(const nlohmann::ordered_json& doc, int indent) {
  std::string out;
  render(doc, out, indent, 0);
  out += '\n';
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << content;
  out.flush();
  if (!out) throw ParseError("failed while writing '" + path + "'");
}

}  // namespace fairsel
