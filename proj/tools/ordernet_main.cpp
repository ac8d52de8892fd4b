#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "ordernet/checkpoint.hpp"
#include "ordernet/checks.hpp"
#include "ordernet/dataset.hpp"
#include "ordernet/inference.hpp"
#include "ordernet/io.hpp"
#include "ordernet/model.hpp"
#include "ordernet/rng.hpp"
#include "ordernet/trainer.hpp"
#include "ordernet/tsp.hpp"
#include "ordernet/wordorder.hpp"

using namespace ordernet;

namespace {

int env_threads() {
  const char* raw = std::getenv("ORDERNET_THREADS");
  if (!raw) return 1;
  const int v = std::atoi(raw);
  if (v < 1) return 1;
  return std::min(v, 64);
}

void parallel_for(std::size_t total, int threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || total <= 1) {
    for (std::size_t i = 0; i < total; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = static_cast<std::size_t>(w); i < total;
           i += static_cast<std::size_t>(threads))
        body(i);
    });
  for (auto& t : pool) t.join();
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// gen-tsp
// ---------------------------------------------------------------------------

struct GenTspArgs {
  int n_min = 5, n_max = 10, count_per_n = 1000;
  std::uint64_t seed = 1;
  std::string solver = "held-karp";
  std::string out;
};

void run_gen_tsp(const GenTspArgs& a) {
  if (a.n_min < 2 || a.n_max < a.n_min)
    throw ContractError("gen-tsp: need 2 <= n-min <= n-max, got " + std::to_string(a.n_min) +
                        ".." + std::to_string(a.n_max));
  if (a.solver == "brute" && a.n_max > tsp::kBruteForceCap)
    throw ResourceError("gen-tsp: brute force caps at n=" + std::to_string(tsp::kBruteForceCap) +
                        "; use --solver held-karp up to " + std::to_string(tsp::kHeldKarpCap) +
                        " or christofides beyond");
  if (a.solver == "held-karp" && a.n_max > tsp::kHeldKarpCap)
    throw ResourceError("gen-tsp: held-karp caps at n=" + std::to_string(tsp::kHeldKarpCap) +
                        "; use --solver christofides for larger sizes");
  if (a.solver == "christofides" && a.n_min < 3)
    throw ContractError("gen-tsp: christofides needs n >= 3");
  const int threads = env_threads();
  std::printf("resolved: command=gen-tsp n-min=%d n-max=%d count-per-n=%d seed=%llu solver=%s out=%s threads=%d\n",
              a.n_min, a.n_max, a.count_per_n, static_cast<unsigned long long>(a.seed),
              a.solver.c_str(), a.out.c_str(), threads);

  const std::size_t sizes = static_cast<std::size_t>(a.n_max - a.n_min + 1);
  const std::size_t total = sizes * static_cast<std::size_t>(a.count_per_n);
  std::vector<OrderingExample> examples(total);
  const auto start = std::chrono::steady_clock::now();
  parallel_for(total, threads, [&](std::size_t idx) {
    const int n = a.n_min + static_cast<int>(idx / static_cast<std::size_t>(a.count_per_n));
    const std::uint64_t i = idx % static_cast<std::size_t>(a.count_per_n);
    const std::uint64_t inst_seed = derive_seed(a.seed, static_cast<std::uint64_t>(n), i);
    auto inst = tsp::generate_instance(n, inst_seed);
    tsp::Tour tour;
    if (a.solver == "brute") {
      tour = tsp::brute_force(inst);
    } else if (a.solver == "held-karp") {
      tour = tsp::held_karp(inst);
    } else {
      tour = tsp::christofides(inst);
    }
    OrderingExample ex;
    for (const auto& p : inst.points) ex.x.push_back({p.x, p.y});
    ex.y = tsp::canonicalize_tour(inst, tour.order);
    ex.meta = {{"seed", inst_seed}, {"solver", a.solver}};
    examples[idx] = std::move(ex);
  });
  write_dataset(a.out, examples);
  const double secs = elapsed_since(start);
  std::printf("wrote %zu records to %s in %.2f s (%.0f records/s)\n", total, a.out.c_str(), secs,
              secs > 0 ? static_cast<double>(total) / secs : 0.0);
}

// ---------------------------------------------------------------------------
// prep-text
// ---------------------------------------------------------------------------

struct PrepTextArgs {
  std::string corpus, embeddings, out;
  int dim = 50;
  std::uint64_t seed = 1;
  bool strict = false;
};

void run_prep_text(const PrepTextArgs& a) {
  std::printf("resolved: command=prep-text corpus=%s embeddings=%s dim=%d seed=%llu strict=%d out=%s\n",
              a.corpus.c_str(), a.embeddings.c_str(), a.dim,
              static_cast<unsigned long long>(a.seed), a.strict ? 1 : 0, a.out.c_str());
  auto table = wordorder::load_embeddings(a.embeddings, a.dim, a.strict);
  std::printf("embeddings: %lld entries (%lld wrong-dimension lines skipped, %lld duplicates)\n",
              table.parsed, table.bad_dimension, table.duplicates);
  wordorder::PrepStats stats;
  auto examples = wordorder::prepare_corpus(a.corpus, table, a.seed, &stats);
  write_dataset(a.out, examples);
  std::printf("corpus: %lld lines -> %lld examples (skipped %lld blank, %lld headers, %lld short, %lld out-of-vocabulary)\n",
              stats.lines, stats.emitted, stats.blank, stats.headers, stats.too_short, stats.oov);
  std::printf("wrote %zu records to %s\n", examples.size(), a.out.c_str());
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, model_out, metrics;
  std::string preset = "tsp";
  std::string pool;
  int input_dim = 0;  // 0 = take from the dataset
  int encoder_blocks = 0, encoder_layer1_depth = 0, encoder_layer2_depth = 0;
  int decoder_blocks = 0, decoder_depth = 0;
  double lr = 1e-3, clip_norm = 0;
  int batch_size = 128, epochs = 10;
  std::uint64_t seed = 1;
};

ModelConfig resolve_model_config(const TrainArgs& a, int data_dim) {
  ModelConfig cfg =
      a.preset == "word" ? ModelConfig::word_order_default() : ModelConfig::tsp_default();
  cfg.input_dim = a.input_dim > 0 ? a.input_dim : data_dim;
  if (a.encoder_blocks > 0) cfg.encoder_blocks = a.encoder_blocks;
  if (a.encoder_layer1_depth > 0) cfg.encoder_layer1_depth = a.encoder_layer1_depth;
  if (a.encoder_layer2_depth > 0) cfg.encoder_layer2_depth = a.encoder_layer2_depth;
  if (a.decoder_blocks > 0) cfg.decoder_blocks = a.decoder_blocks;
  if (a.decoder_depth > 0) cfg.decoder_depth = a.decoder_depth;
  if (!a.pool.empty()) cfg.encoder_pool = a.pool == "avg" ? PoolKind::Avg : PoolKind::Max;
  cfg.validate();
  return cfg;
}

void run_train(const TrainArgs& a) {
  auto data = read_dataset(a.data);
  if (data.empty()) throw ContractError("train: " + a.data + " holds no examples");
  const int data_dim = static_cast<int>(data[0].x[0].size());
  ModelConfig cfg = resolve_model_config(a, data_dim);
  if (cfg.input_dim != data_dim)
    throw ContractError("train: model input dimension " + std::to_string(cfg.input_dim) +
                        " does not match dataset dimension " + std::to_string(data_dim));
  TrainConfig tc;
  tc.learning_rate = a.lr;
  tc.batch_size = a.batch_size;
  tc.epochs = a.epochs;
  tc.seed = a.seed;
  tc.clip_norm = a.clip_norm;
  std::printf("resolved: command=train data=%s records=%zu model-out=%s metrics=%s preset=%s "
              "input-dim=%d encoder-blocks=%d encoder-layer1-depth=%d encoder-layer2-depth=%d "
              "pool=%s decoder-blocks=%d decoder-depth=%d parameters=%lld "
              "lr=%g batch-size=%d epochs=%d clip-norm=%g seed=%llu\n",
              a.data.c_str(), data.size(), a.model_out.c_str(),
              a.metrics.empty() ? "-" : a.metrics.c_str(), a.preset.c_str(), cfg.input_dim,
              cfg.encoder_blocks, cfg.encoder_layer1_depth, cfg.encoder_layer2_depth,
              cfg.encoder_pool == PoolKind::Max ? "max" : "avg", cfg.decoder_blocks,
              cfg.decoder_depth, parameter_count(cfg), tc.learning_rate, tc.batch_size, tc.epochs,
              tc.clip_norm, static_cast<unsigned long long>(tc.seed));

  OrderNet<float> model(cfg, derive_seed(a.seed, 0x1417));
  auto report = train(model, data, tc, [](const EpochStats& es) {
    std::printf("epoch %d: loss %.6f, teacher-forced accuracy %.4f (%.1f s)\n", es.epoch,
                es.mean_loss, es.tf_accuracy, es.seconds);
    std::fflush(stdout);
  });
  save_checkpoint(a.model_out, model);
  if (!a.metrics.empty()) write_file_atomic(a.metrics, metrics_csv(report));
  std::printf("checkpoint: %s (digest %s, %.1f s total)\n", a.model_out.c_str(),
              file_digest(a.model_out).c_str(), report.total_seconds);
}

// ---------------------------------------------------------------------------
// eval-tsp
// ---------------------------------------------------------------------------

struct EvalTspArgs {
  std::string model, csv;
  std::vector<int> sizes{10};
  int count = 500, beam = 5;
  std::uint64_t seed = 1;
};

void run_eval_tsp(const EvalTspArgs& a) {
  if (a.count < 1) throw ContractError("eval-tsp: count must be >= 1");
  auto model = load_checkpoint<float>(a.model);
  if (model.config().input_dim != 2)
    throw ContractError("eval-tsp: checkpoint expects dimension " +
                        std::to_string(model.config().input_dim) + ", tours have 2");
  const int threads = env_threads();
  std::string sizes_str;
  for (int n : a.sizes) sizes_str += (sizes_str.empty() ? "" : ",") + std::to_string(n);
  std::printf("resolved: command=eval-tsp model=%s n=%s count=%d beam=%d seed=%llu csv=%s threads=%d\n",
              a.model.c_str(), sizes_str.c_str(), a.count, a.beam,
              static_cast<unsigned long long>(a.seed), a.csv.empty() ? "-" : a.csv.c_str(),
              threads);

  std::string csv = "n,avg_model,avg_exact_or_NA,avg_christofides,avg_nn,valid_fraction\n";
  std::fputs(csv.c_str(), stdout);
  for (int n : a.sizes) {
    if (n < 3) throw ContractError("eval-tsp: n must be >= 3, got " + std::to_string(n));
    struct Row {
      double model_len = 0, exact_len = 0, chr_len = 0, nn_len = 0;
      bool valid = false;
    };
    std::vector<Row> rows(static_cast<std::size_t>(a.count));
    parallel_for(rows.size(), threads, [&](std::size_t i) {
      const auto inst = tsp::generate_instance(
          n, derive_seed(a.seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(i)));
      std::vector<float> flat;
      for (const auto& p : inst.points) {
        flat.push_back(static_cast<float>(p.x));
        flat.push_back(static_cast<float>(p.y));
      }
      auto X = Tensor<float>::from_data({1, n, 2}, std::move(flat));
      auto decoded = a.beam <= 1 ? greedy_decode(model, X) : beam_search(model, X, a.beam);
      Row row;
      row.valid = true;  // tour_length validates; an invalid order would throw
      row.model_len = tsp::tour_length(inst, decoded.order);
      if (n <= tsp::kHeldKarpCap) row.exact_len = tsp::held_karp(inst).length;
      row.chr_len = tsp::christofides(inst).length;
      row.nn_len = tsp::nearest_neighbor(inst).length;
      rows[i] = row;
    });
    double model_sum = 0, exact_sum = 0, chr_sum = 0, nn_sum = 0;
    long long valid = 0;
    for (const auto& r : rows) {
      model_sum += r.model_len;
      exact_sum += r.exact_len;
      chr_sum += r.chr_len;
      nn_sum += r.nn_len;
      valid += r.valid;
    }
    const double cnt = static_cast<double>(a.count);
    char exact_col[32];
    if (n <= tsp::kHeldKarpCap) {
      std::snprintf(exact_col, sizeof(exact_col), "%.9g", exact_sum / cnt);
    } else {
      std::snprintf(exact_col, sizeof(exact_col), "NA");
    }
    char line[256];
    std::snprintf(line, sizeof(line), "%d,%.9g,%s,%.9g,%.9g,%.9g\n", n, model_sum / cnt,
                  exact_col, chr_sum / cnt, nn_sum / cnt, static_cast<double>(valid) / cnt);
    std::fputs(line, stdout);
    csv += line;
  }
  if (!a.csv.empty()) write_file_atomic(a.csv, csv);
}

// ---------------------------------------------------------------------------
// eval-order
// ---------------------------------------------------------------------------

struct EvalOrderArgs {
  std::string model, data;
  int beam = 1;
  long long limit = 0;
};

void run_eval_order(const EvalOrderArgs& a) {
  auto model = load_checkpoint<float>(a.model);
  auto data = read_dataset(a.data);
  if (a.limit > 0 && static_cast<long long>(data.size()) > a.limit)
    data.resize(static_cast<std::size_t>(a.limit));
  std::printf("resolved: command=eval-order model=%s data=%s records=%zu beam=%d\n",
              a.model.c_str(), a.data.c_str(), data.size(), a.beam);
  auto stats = wordorder::exact_order_accuracy(model, data, a.beam);
  std::printf("exact-order accuracy: %.6f (%lld/%lld)\n", stats.fraction(), stats.correct,
              stats.total);
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

struct SolveArgs {
  std::string points, method = "auto", model;
  int n = 0, beam = 5;
  std::uint64_t seed = 1;
};

tsp::TspInstance parse_points(const std::string& text) {
  tsp::TspInstance inst;
  std::istringstream in(text);
  std::string pair;
  while (std::getline(in, pair, ';')) {
    const auto comma = pair.find(',');
    if (comma == std::string::npos)
      throw ContractError("solve: point '" + pair + "' is not x,y");
    try {
      inst.points.push_back({std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1))});
    } catch (const std::exception&) {
      throw ContractError("solve: point '" + pair + "' is not numeric");
    }
  }
  if (inst.points.size() < 2) throw ContractError("solve: need at least 2 points");
  return inst;
}

void run_solve(const SolveArgs& a) {
  tsp::TspInstance inst;
  if (!a.points.empty()) {
    inst = parse_points(a.points);
  } else if (a.n >= 2) {
    inst = tsp::generate_instance(a.n, a.seed);
  } else {
    throw ContractError("solve: give --points or --n with --seed");
  }
  const int n = inst.n();
  std::string method = a.method;
  if (method == "auto") method = n <= tsp::kHeldKarpCap ? "held-karp" : "christofides";
  std::printf("resolved: command=solve n=%d method=%s seed=%llu beam=%d model=%s\n", n,
              method.c_str(), static_cast<unsigned long long>(a.seed), a.beam,
              a.model.empty() ? "-" : a.model.c_str());

  std::vector<int> order;
  if (method == "model") {
    if (a.model.empty()) throw ContractError("solve: --method model needs --model");
    auto model = load_checkpoint<float>(a.model);
    std::vector<float> flat;
    for (const auto& p : inst.points) {
      flat.push_back(static_cast<float>(p.x));
      flat.push_back(static_cast<float>(p.y));
    }
    auto X = Tensor<float>::from_data({1, n, 2}, std::move(flat));
    order = (a.beam <= 1 ? greedy_decode(model, X) : beam_search(model, X, a.beam)).order;
  } else if (method == "held-karp") {
    order = tsp::held_karp(inst).order;
  } else if (method == "brute") {
    order = tsp::brute_force(inst).order;
  } else if (method == "christofides") {
    order = tsp::christofides(inst).order;
  } else if (method == "nn") {
    order = tsp::nearest_neighbor(inst).order;
  } else {
    throw ContractError("solve: unknown method '" + method + "'");
  }
  std::string order_str;
  for (int idx : order) order_str += (order_str.empty() ? "" : " ") + std::to_string(idx);
  std::printf("order: %s\n", order_str.c_str());
  std::printf("length: %.9g\n", tsp::tour_length(inst, order));
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct CheckArgs {
  std::string kind = "all";
  std::uint64_t seed = 1;
};

int run_check(const CheckArgs& a) {
  std::printf("resolved: command=check kind=%s seed=%llu\n", a.kind.c_str(),
              static_cast<unsigned long long>(a.seed));
  std::vector<checks::CheckResult> results;
  const bool all = a.kind == "all";
  if (all || a.kind == "oracles") {
    results.push_back(checks::check_oracles(a.seed));
    results.push_back(checks::check_christofides(a.seed));
  }
  if (all || a.kind == "equivariance") results.push_back(checks::check_equivariance(a.seed));
  if (all || a.kind == "causality") results.push_back(checks::check_causality(a.seed));
  if (all || a.kind == "gradcheck") results.push_back(checks::check_gradcheck(a.seed));
  if (all || a.kind == "params") results.push_back(checks::check_params());
  bool ok = true;
  for (const auto& r : results) {
    std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    ok = ok && r.pass;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ordering models over sets: data generation, training, decoding, verification"};
  app.require_subcommand(1);

  GenTspArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-tsp", "generate a solved-tour JSONL dataset");
  gen_cmd->add_option("--n-min", gen.n_min, "smallest city count")->capture_default_str();
  gen_cmd->add_option("--n-max", gen.n_max, "largest city count")->capture_default_str();
  gen_cmd->add_option("--count-per-n", gen.count_per_n, "instances per size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "base seed")->capture_default_str();
  gen_cmd->add_option("--solver", gen.solver, "target solver")
      ->capture_default_str()
      ->check(CLI::IsMember({"held-karp", "brute", "christofides"}));
  gen_cmd->add_option("--out", gen.out, "output JSONL path")->required();

  PrepTextArgs prep;
  auto* prep_cmd = app.add_subcommand("prep-text", "prepare shuffled-sentence examples from text");
  prep_cmd->add_option("--corpus", prep.corpus, "plain-text corpus path")->required();
  prep_cmd->add_option("--embeddings", prep.embeddings, "embedding table path")->required();
  prep_cmd->add_option("--dim", prep.dim, "embedding dimension")->capture_default_str();
  prep_cmd->add_option("--seed", prep.seed, "shuffle seed")->capture_default_str();
  prep_cmd->add_flag("--strict", prep.strict, "fail on malformed embedding lines");
  prep_cmd->add_option("--out", prep.out, "output JSONL path")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a model on a JSONL dataset");
  train_cmd->set_config("--config", "", "key=value file; command-line flags win");
  train_cmd->add_option("--data", tr.data, "training JSONL path")->required();
  train_cmd->add_option("--model-out", tr.model_out, "checkpoint output path")->required();
  train_cmd->add_option("--metrics", tr.metrics, "per-epoch CSV output path");
  train_cmd->add_option("--preset", tr.preset, "architecture preset")
      ->capture_default_str()
      ->check(CLI::IsMember({"tsp", "word"}));
  train_cmd->add_option("--input-dim", tr.input_dim, "feature dimension (0 = from dataset)")
      ->capture_default_str();
  train_cmd->add_option("--encoder-blocks", tr.encoder_blocks, "override encoder block count");
  train_cmd->add_option("--encoder-layer1-depth", tr.encoder_layer1_depth,
                        "override first conv depth");
  train_cmd->add_option("--encoder-layer2-depth", tr.encoder_layer2_depth,
                        "override second conv depth");
  train_cmd->add_option("--pool", tr.pool, "encoder pooling")
      ->check(CLI::IsMember({"max", "avg"}));
  train_cmd->add_option("--decoder-blocks", tr.decoder_blocks, "override decoder block count");
  train_cmd->add_option("--decoder-depth", tr.decoder_depth, "override decoder conv depth");
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--batch-size", tr.batch_size, "examples per step")->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs, "training epochs")->capture_default_str();
  train_cmd->add_option("--clip-norm", tr.clip_norm, "gradient clip norm (0 = off)")
      ->capture_default_str();
  train_cmd->add_option("--seed", tr.seed, "training seed")->capture_default_str();

  EvalTspArgs ev;
  auto* eval_cmd = app.add_subcommand("eval-tsp", "evaluate a checkpoint against tour baselines");
  eval_cmd->add_option("--model", ev.model, "checkpoint path")->required();
  eval_cmd->add_option("--n", ev.sizes, "city counts to evaluate")->capture_default_str();
  eval_cmd->add_option("--count", ev.count, "instances per size")->capture_default_str();
  eval_cmd->add_option("--beam", ev.beam, "beam width (1 = greedy)")->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed, "evaluation seed")->capture_default_str();
  eval_cmd->add_option("--csv", ev.csv, "CSV output path");

  EvalOrderArgs eo;
  auto* evo_cmd = app.add_subcommand("eval-order", "exact-order accuracy on a JSONL dataset");
  evo_cmd->add_option("--model", eo.model, "checkpoint path")->required();
  evo_cmd->add_option("--data", eo.data, "evaluation JSONL path")->required();
  evo_cmd->add_option("--beam", eo.beam, "beam width (1 = greedy)")->capture_default_str();
  evo_cmd->add_option("--limit", eo.limit, "evaluate at most this many records (0 = all)")
      ->capture_default_str();

  SolveArgs so;
  auto* solve_cmd = app.add_subcommand("solve", "order one instance");
  solve_cmd->add_option("--points", so.points, "semicolon-separated x,y pairs");
  solve_cmd->add_option("--n", so.n, "generate an instance of this size");
  solve_cmd->add_option("--seed", so.seed, "instance seed")->capture_default_str();
  solve_cmd->add_option("--method", so.method, "solver")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "model", "held-karp", "brute", "christofides", "nn"}));
  solve_cmd->add_option("--model", so.model, "checkpoint for --method model");
  solve_cmd->add_option("--beam", so.beam, "beam width for --method model")
      ->capture_default_str();

  CheckArgs ch;
  auto* check_cmd = app.add_subcommand("check", "run property suites");
  check_cmd->add_option("--kind", ch.kind, "which suite")
      ->capture_default_str()
      ->check(CLI::IsMember({"all", "oracles", "equivariance", "causality", "gradcheck", "params"}));
  check_cmd->add_option("--seed", ch.seed, "suite seed")->capture_default_str();

  int check_rc = 0;
  gen_cmd->callback([&] { run_gen_tsp(gen); });
  prep_cmd->callback([&] { run_prep_text(prep); });
  train_cmd->callback([&] { run_train(tr); });
  eval_cmd->callback([&] { run_eval_tsp(ev); });
  evo_cmd->callback([&] { run_eval_order(eo); });
  solve_cmd->callback([&] { run_solve(so); });
  check_cmd->callback([&] { check_rc = run_check(ch); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 3;
  } catch (const ResourceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ContractError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return check_rc;
}
