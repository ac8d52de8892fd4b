#pragma once

#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ordernet/errors.hpp"
#include "ordernet/io.hpp"

// JSON Lines dataset of ordering examples. One record per line:
//   {"x": [[f,...],...], "y": [int,...], "meta": {...}}
// x is the feature matrix of one set (n rows, d columns), y the target
// ordering (a permutation of 0..n-1), meta free-form provenance (e.g. seed
// and solver for tours, tokens and line number for sentences).

namespace ordernet {

struct OrderingExample {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  nlohmann::json meta;
};

inline void validate_example(const OrderingExample& ex, std::size_t record) {
  const std::size_t n = ex.x.size();
  auto fail = [record](const std::string& what) {
    throw ContractError("dataset record " + std::to_string(record) + ": " + what);
  };
  if (n < 2) fail("set has " + std::to_string(n) + " elements, need at least 2");
  const std::size_t d = ex.x[0].size();
  if (d == 0) fail("empty feature vector");
  for (const auto& row : ex.x)
    if (row.size() != d) fail("ragged feature rows");
  if (ex.y.size() != n)
    fail("target length " + std::to_string(ex.y.size()) + " for set size " + std::to_string(n));
  std::vector<char> seen(n, 0);
  for (int idx : ex.y) {
    if (idx < 0 || idx >= static_cast<int>(n))
      fail("target index " + std::to_string(idx) + " out of range");
    if (seen[static_cast<std::size_t>(idx)]) fail("target repeats index " + std::to_string(idx));
    seen[static_cast<std::size_t>(idx)] = 1;
  }
}

inline std::string to_jsonl_line(const OrderingExample& ex) {
  nlohmann::json j;
  j["x"] = ex.x;
  j["y"] = ex.y;
  j["meta"] = ex.meta.is_null() ? nlohmann::json::object() : ex.meta;
  return j.dump();
}

inline OrderingExample from_jsonl_line(const std::string& line, std::size_t record) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("dataset record " + std::to_string(record) + ": invalid JSON: " + e.what());
  }
  OrderingExample ex;
  try {
    ex.x = j.at("x").get<std::vector<std::vector<double>>>();
    ex.y = j.at("y").get<std::vector<int>>();
    ex.meta = j.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("dataset record " + std::to_string(record) + ": bad fields: " + e.what());
  }
  validate_example(ex, record);
  return ex;
}

inline void write_dataset(const std::string& path, const std::vector<OrderingExample>& examples) {
  std::string out;
  for (std::size_t r = 0; r < examples.size(); ++r) {
    validate_example(examples[r], r);
    out += to_jsonl_line(examples[r]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

inline std::vector<OrderingExample> read_dataset(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<OrderingExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(from_jsonl_line(line, out.size()));
  }
  return out;
}

}  // namespace ordernet
