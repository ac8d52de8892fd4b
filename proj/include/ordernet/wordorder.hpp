#pragma once

#include <algorithm>
#include <cctype>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ordernet/dataset.hpp"
#include "ordernet/errors.hpp"
#include "ordernet/inference.hpp"
#include "ordernet/io.hpp"
#include "ordernet/model.hpp"
#include "ordernet/rng.hpp"

// Word-order experiment pipeline: embedding-table ingestion, corpus
// preprocessing into shuffled five-token ordering examples, and
// exact-match evaluation of a model's reconstructed orderings.

namespace ordernet::wordorder {

struct EmbeddingTable {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
  long long parsed = 0;
  long long bad_dimension = 0;
  long long duplicates = 0;
};

inline std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<std::string> whitespace_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// Text format: one entry per line, token then `dim` decimal floats, all
// whitespace-separated. Tokens are lowercased on load. Lines with the wrong
// value count are skipped and counted (strict mode: error). Duplicates keep
// the last occurrence.
inline EmbeddingTable load_embeddings(const std::string& path, int dim, bool strict = false) {
  if (dim < 1) throw ContractError("load_embeddings: dimension must be >= 1");
  std::istringstream in(read_file(path));
  EmbeddingTable table;
  table.dim = dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = whitespace_tokens(line);
    if (tokens.empty()) continue;
    bool ok = tokens.size() == static_cast<std::size_t>(dim) + 1;
    std::vector<double> vec;
    if (ok) {
      vec.reserve(static_cast<std::size_t>(dim));
      for (int i = 1; i <= dim && ok; ++i) {
        try {
          std::size_t used = 0;
          vec.push_back(std::stod(tokens[static_cast<std::size_t>(i)], &used));
          ok = used == tokens[static_cast<std::size_t>(i)].size();
        } catch (const std::exception&) {
          ok = false;
        }
      }
    }
    if (!ok) {
      if (strict)
        throw ContractError("load_embeddings: " + path + " line " + std::to_string(line_no) +
                            ": expected token plus " + std::to_string(dim) + " floats");
      ++table.bad_dimension;
      continue;
    }
    const std::string key = lowercase(tokens[0]);
    if (table.vectors.count(key)) ++table.duplicates;
    table.vectors[key] = std::move(vec);
    ++table.parsed;
  }
  if (table.vectors.empty())
    throw ContractError("load_embeddings: " + path + " contains no usable entries");
  return table;
}

struct PrepStats {
  long long lines = 0;
  long long blank = 0;
  long long headers = 0;
  long long too_short = 0;
  long long oov = 0;
  long long emitted = 0;
};

// A header line is one whose trimmed form starts and ends with '='.
inline bool is_header_line(const std::string& trimmed) {
  return !trimmed.empty() && trimmed.front() == '=' && trimmed.back() == '=';
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline constexpr int kSentenceLength = 5;

// Per line: lowercase, whitespace-tokenize; skip blanks, headers, lines
// with fewer than five tokens, and lines whose first five tokens are not
// all in the table. Survivors yield one example: the first five tokens in
// a shuffled order (per-line seed derived from shuffle_seed and the
// 1-based physical line number) with targets restoring the original order.
inline std::vector<OrderingExample> prepare_corpus_text(const std::string& text,
                                                        const EmbeddingTable& table,
                                                        std::uint64_t shuffle_seed,
                                                        PrepStats* stats = nullptr) {
  std::istringstream in(text);
  std::vector<OrderingExample> out;
  PrepStats local;
  std::string raw;
  while (std::getline(in, raw)) {
    ++local.lines;
    const std::string trimmed = trim(raw);
    if (trimmed.empty()) {
      ++local.blank;
      continue;
    }
    if (is_header_line(trimmed)) {
      ++local.headers;
      continue;
    }
    auto tokens = whitespace_tokens(lowercase(raw));
    if (tokens.size() < kSentenceLength) {
      ++local.too_short;
      continue;
    }
    tokens.resize(kSentenceLength);
    bool in_vocab = true;
    for (const auto& tok : tokens)
      if (!table.vectors.count(tok)) {
        in_vocab = false;
        break;
      }
    if (!in_vocab) {
      ++local.oov;
      continue;
    }

    SplitMix64 rng(derive_seed(shuffle_seed, static_cast<std::uint64_t>(local.lines)));
    std::vector<int> position(kSentenceLength);  // shuffled slot j holds original token position[j]
    for (int i = 0; i < kSentenceLength; ++i) position[static_cast<std::size_t>(i)] = i;
    rng.shuffle(position);

    OrderingExample ex;
    ex.x.resize(kSentenceLength);
    ex.y.resize(kSentenceLength);
    for (int j = 0; j < kSentenceLength; ++j) {
      const int orig = position[static_cast<std::size_t>(j)];
      ex.x[static_cast<std::size_t>(j)] = table.vectors.at(tokens[static_cast<std::size_t>(orig)]);
      ex.y[static_cast<std::size_t>(orig)] = j;  // y applied to the shuffled list restores the original
    }
    ex.meta = {{"tokens", tokens}, {"line", local.lines}};
    out.push_back(std::move(ex));
    ++local.emitted;
  }
  if (stats) *stats = local;
  return out;
}

inline std::vector<OrderingExample> prepare_corpus(const std::string& text_path,
                                                   const EmbeddingTable& table,
                                                   std::uint64_t shuffle_seed,
                                                   PrepStats* stats = nullptr) {
  return prepare_corpus_text(read_file(text_path), table, shuffle_seed, stats);
}

struct AccuracyStats {
  long long correct = 0;
  long long total = 0;
  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

// Exact-match accuracy of a decode callable (example -> predicted order).
// When original tokens are recorded, equality is checked on token strings
// so duplicate words ordered into each other's slots still count.
template <typename Decode>
AccuracyStats exact_order_accuracy_with(Decode&& decode,
                                        const std::vector<OrderingExample>& examples) {
  AccuracyStats stats;
  for (const auto& ex : examples) {
    const int n = static_cast<int>(ex.y.size());
    const std::vector<int> pred = decode(ex);
    ++stats.total;
    if (static_cast<int>(pred.size()) != n) continue;
    if (ex.meta.contains("tokens")) {
      const auto original = ex.meta.at("tokens").get<std::vector<std::string>>();
      std::vector<std::string> shuffled(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k)
        shuffled[static_cast<std::size_t>(ex.y[static_cast<std::size_t>(k)])] =
            original[static_cast<std::size_t>(k)];
      bool match = true;
      for (int t = 0; t < n && match; ++t) {
        const int p = pred[static_cast<std::size_t>(t)];
        match = p >= 0 && p < n &&
                shuffled[static_cast<std::size_t>(p)] == original[static_cast<std::size_t>(t)];
      }
      stats.correct += match;
    } else {
      stats.correct += pred == ex.y;
    }
  }
  return stats;
}

template <typename S>
AccuracyStats exact_order_accuracy(OrderNet<S>& model, const std::vector<OrderingExample>& examples,
                                   int beam) {
  if (!examples.empty() &&
      static_cast<int>(examples[0].x[0].size()) != model.config().input_dim)
    throw ContractError("exact_order_accuracy: examples have dimension " +
                        std::to_string(examples[0].x[0].size()) + ", model expects " +
                        std::to_string(model.config().input_dim));
  return exact_order_accuracy_with(
      [&](const OrderingExample& ex) {
        const int n = static_cast<int>(ex.x.size());
        const int d = static_cast<int>(ex.x[0].size());
        std::vector<S> flat;
        flat.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(d));
        for (const auto& row : ex.x)
          for (double v : row) flat.push_back(static_cast<S>(v));
        auto X = Tensor<S>::from_data({1, n, d}, std::move(flat));
        return beam <= 1 ? greedy_decode(model, X).order : beam_search(model, X, beam).order;
      },
      examples);
}

}  // namespace ordernet::wordorder
