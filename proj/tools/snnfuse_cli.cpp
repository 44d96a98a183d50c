// Copyright 2026 The snnfuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

// snnfuse command-line driver.
//
// Exit codes: 0 success, 1 verification failure or runtime error, 2 usage or
// configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "snnfuse/snnfuse.hpp"

namespace {

using json = nlohmann::json;
using namespace snnfuse;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Output sink: a file when --out is given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot open " + path + " for writing");
    }
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string command_echo(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

json env_json() {
  const auto e = environment_summary();
  return {{"hardware_lanes", e.hardware_lanes},
          {"clock", e.clock},
          {"clock_is_steady", e.clock_is_steady},
          {"compiler", e.compiler}};
}

json stats_json(const Stats& s) {
  return {{"mean_s", s.mean}, {"median_s", s.median}, {"min_s", s.min}, {"max_s", s.max},
          {"stddev_s", s.stddev}, {"samples", s.samples}};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Round-trip precision for CSV cells.
std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::uint64_t seed = 1;
  std::size_t cases = 100;
  std::string fault = "none";
  std::string out = "verify-failures";
  std::string format = "text";
};

int cmd_verify(const VerifyArgs& a, const std::string& echo) {
  VerifyOptions o;
  o.seed = a.seed;
  o.cases = a.cases;
  o.dump_dir = a.out;
  if (a.fault == "fused-k-tau") o.fault = Fault::fused_k_tau;
  else if (a.fault != "none") throw UsageError("unknown fault '" + a.fault + "'");
  if (a.cases == 0) std::cerr << "warning: --cases 0, no suites run\n";

  const auto r = run_verify(o);
  if (a.format == "json") {
    json j{{"command", echo}, {"seed", a.seed}, {"cases", a.cases}, {"mismatches", r.mismatches()},
           {"suites", json::array()}};
    for (const auto& s : r.suites) {
      json sj{{"name", s.name}, {"cases", s.cases}, {"mismatches", s.mismatches}};
      if (s.first) {
        json f{{"quantity", s.first->quantity}, {"case", s.first->case_index},
               {"shape", s.first->case_shape}, {"expected", s.first->expected},
               {"actual", s.first->actual}, {"dumped", s.first->dumped}};
        if (s.first->t) f["tbn"] = {*s.first->t, *s.first->b, *s.first->n};
        else f["index"] = s.first->index;
        sj["first"] = f;
      }
      j["suites"].push_back(sj);
    }
    std::cout << j.dump(2) << "\n";
  } else {
    for (const auto& s : r.suites) {
      std::cout << s.name << ": " << s.cases << " cases, " << s.mismatches << " mismatches\n";
      if (s.first) {
        std::cout << "  first: " << s.first->describe() << "\n";
        for (const auto& p : s.first->dumped) std::cout << "  dumped " << p << "\n";
      }
    }
    std::cout << r.mismatches() << " mismatches\n";
  }
  return r.ok() ? kOk : kFailure;
}

// ---------------------------------------------------------------------------

struct FusionArgs {
  std::vector<std::size_t> t_list{8, 16, 32, 64, 128, 256};
  std::size_t width = 100000;
  std::size_t batch = 1;
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  std::string format = "json";
  std::string out;
};

int cmd_bench_fusion(const FusionArgs& a, const std::string& echo) {
  FusionBenchConfig cfg;
  cfg.t_list = a.t_list;
  cfg.width = a.width;
  cfg.batch = a.batch;
  cfg.reps = a.reps;
  cfg.seed = a.seed;
  const auto rows = run_fusion_bench(cfg, [](const FusionBenchRow& r) {
    std::cerr << "T=" << r.t_len << " serial " << r.serial.mean << " s, fused " << r.fused.mean
              << " s, speedup " << r.speedup << (r.checksums_match() ? "" : " CHECKSUM MISMATCH")
              << "\n";
  });
  Sink sink(a.out);
  bool all_match = true;
  if (a.format == "csv") {
    sink.os() << "command,t_len,width,batch,reps,serial_mean_s,fused_mean_s,serial_median_s,"
                 "fused_median_s,speedup,speedup_stderr,checksum_serial,checksum_fused,checksums_match\n";
    for (const auto& r : rows) {
      sink.os() << csv_quote(echo) << ',' << r.t_len << ',' << r.width << ',' << r.batch << ','
                << r.reps << ',' << num(r.serial.mean) << ',' << num(r.fused.mean) << ','
                << num(r.serial.median) << ',' << num(r.fused.median) << ',' << num(r.speedup)
                << ',' << num(r.paired_ratio.std_error()) << ',' << hex64(r.checksum_serial) << ',' << hex64(r.checksum_fused) << ','
                << (r.checksums_match() ? "true" : "false") << "\n";
      all_match = all_match && r.checksums_match();
    }
  } else {
    json j{{"command", echo}, {"environment", env_json()}, {"seed", a.seed}, {"reps", a.reps},
           {"warmup", cfg.warmup}, {"aggregation", "mean"}, {"rows", json::array()}};
    for (const auto& r : rows) {
      j["rows"].push_back({{"t_len", r.t_len},
                           {"width", r.width},
                           {"batch", r.batch},
                           {"reps", r.reps},
                           {"serial", stats_json(r.serial)},
                           {"fused", stats_json(r.fused)},
                           {"speedup", r.speedup},
                           {"paired_ratio",
                            {{"mean", r.paired_ratio.mean},
                             {"stddev", r.paired_ratio.stddev},
                             {"std_error", r.paired_ratio.std_error()},
                             {"samples", r.paired_ratio.samples}}},
                           {"checksum_serial", hex64(r.checksum_serial)},
                           {"checksum_fused", hex64(r.checksum_fused)},
                           {"checksums_match", r.checksums_match()}});
      all_match = all_match && r.checksums_match();
    }
    sink.os() << j.dump(2) << "\n";
  }
  return all_match ? kOk : kFailure;
}

// ---------------------------------------------------------------------------

struct PipelineArgs {
  std::vector<std::size_t> k_list{1, 2, 3, 4, 5, 6, 8};
  std::size_t t_len = 64;
  std::size_t width = 100000;
  std::size_t batch = 16;
  std::size_t micro = 16;
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  double inject_tc_us = 0.0;
  double tc_ratio = 0.0;
  bool oversubscribe = false;
  std::string format = "json";
  std::string out;
  std::string trace;
};

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

int cmd_bench_pipeline(const PipelineArgs& a, const std::string& echo) {
  PipelineBenchConfig cfg;
  cfg.k_list = a.k_list;
  cfg.t_len = a.t_len;
  cfg.width = a.width;
  cfg.batch = a.batch;
  cfg.micro_batches = a.micro;
  cfg.reps = a.reps;
  cfg.seed = a.seed;
  cfg.oversubscribe = a.oversubscribe;
  if (a.inject_tc_us > 0.0) cfg.inject_tc_us = a.inject_tc_us;
  if (a.tc_ratio > 0.0) cfg.tc_ratio = a.tc_ratio;
  const auto rep = run_pipeline_bench(cfg, [](const PipelineBenchRow& r) {
    if (r.skipped) std::cerr << "warning: " << r.note << "\n";
    else std::cerr << "k=" << r.k << " mean " << r.time.mean << " s, mu " << r.measured_mu << "\n";
  });

  if (!a.trace.empty()) {
    std::size_t k = 1;
    for (const auto& r : rep.rows) if (!r.skipped) k = std::max(k, r.k);
    const auto net = SpikingNet::monolayer(a.width, LifParams{});
    const auto x = random_input(a.t_len, a.batch, a.width, derive_seed(a.seed, {7}));
    const auto plan = PipelinePlan::even(
        a.t_len, k, std::chrono::nanoseconds(static_cast<std::int64_t>(rep.t_c * 1e9)), a.micro);
    std::ofstream os(a.trace);
    if (!os) throw std::runtime_error("cannot open " + a.trace);
    write_trace_jsonl(os, pipeline_forward(net, x, plan).timing);
  }

  Sink sink(a.out);
  if (a.format == "csv") {
    sink.os() << "command,k,t_len,width,batch,micro_batches,reps,tc_s,mean_s,measured_mu,"
                 "predicted_mu,agreement,messages,skipped\n";
    for (const auto& r : rep.rows) {
      auto o = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
      sink.os() << csv_quote(echo) << ',' << r.k << ',' << rep.t_len << ',' << rep.width << ','
                << rep.batch << ',' << rep.micro_batches << ',' << r.reps << ',' << num(rep.t_c)
                << ',' << (r.skipped ? "" : num(r.time.mean)) << ','
                << (r.skipped ? "" : num(r.measured_mu)) << ',' << o(r.predicted_mu) << ','
                << o(r.agreement) << ',' << r.messages << ',' << (r.skipped ? "true" : "false")
                << "\n";
    }
  } else {
    json j{{"command", echo},
           {"environment", env_json()},
           {"t_len", rep.t_len},
           {"width", rep.width},
           {"batch", rep.batch},
           {"micro_batches", rep.micro_batches},
           {"seed", a.seed},
           {"reps", a.reps},
           {"warmup", cfg.warmup},
           {"aggregation", "mean"},
           {"t_s", rep.t_s},
           {"t_c", rep.t_c},
           {"optimal_k_model", opt_json(rep.optimal_k_model)},
           {"best_measured_k", rep.best_measured_k},
           {"rows", json::array()}};
    for (const auto& r : rep.rows) {
      json row{{"k", r.k},
               {"reps", r.reps},
               {"skipped", r.skipped},
               {"note", r.note},
               {"messages", r.messages},
               {"predicted_mu", opt_json(r.predicted_mu)},
               {"agreement", opt_json(r.agreement)}};
      row["time"] = r.skipped ? json(nullptr) : stats_json(r.time);
      row["measured_mu"] = r.skipped ? json(nullptr) : json(r.measured_mu);
      j["rows"].push_back(row);
    }
    sink.os() << j.dump(2) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct CurveArgs {
  std::vector<double> ratios{4.0, 16.0, 64.0};
  std::size_t k_max = 16;
  std::string format = "csv";
  std::string out;
};

int cmd_model_curve(const CurveArgs& a) {
  for (double r : a.ratios) {
    if (!(r > 0.0)) throw UsageError("ratios must be positive");
  }
  if (a.k_max == 0) throw UsageError("--k-max must be >= 1");
  const auto rows = emit_model_curve(a.ratios, a.k_max);
  Sink sink(a.out);
  if (a.format == "json") {
    json j = json::array();
    for (const auto& r : rows) j.push_back({{"ratio", r.ratio}, {"k", r.k}, {"mu", r.mu}});
    sink.os() << j.dump(2) << "\n";
  } else {
    sink.os() << "ratio,k,mu\n";
    for (const auto& r : rows) sink.os() << num(r.ratio) << ',' << r.k << ',' << num(r.mu) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string engine;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t workers = 0;
  std::string out;
};

int cmd_train(const TrainArgs& a, const std::string& echo) {
  std::ifstream is(a.config);
  if (!is) throw UsageError("cannot open config " + a.config);
  TrainConfig cfg;
  try {
    cfg = parse_train_config(KeyValueConfig::parse(is));
    if (!a.engine.empty()) cfg.engine = parse_engine(a.engine);
    if (a.seed_set) cfg.seed = a.seed;
    if (a.workers) cfg.workers = a.workers;
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(a.config + ": " + e.what());
  }
  Sink sink(a.out);
  sink.os() << json{{"command", echo}, {"engine", to_string(cfg.engine)}, {"seed", cfg.seed}}.dump()
            << "\n";
  const auto rep = run_training(cfg, [&](const EpochMetrics& m) {
    sink.os() << json{{"epoch", m.epoch},
                      {"train_loss", m.train_loss},
                      {"train_acc", m.train_acc},
                      {"test_acc", m.test_acc},
                      {"wall_s", m.wall_s}}
                     .dump()
              << "\n";
    sink.os().flush();
  });
  sink.os() << json{{"summary",
                     {{"best_acc", rep.summary.best_acc},
                      {"initial_test_acc", rep.initial_test_acc},
                      {"train_time_s", rep.summary.train_time_s},
                      {"test_time_s", rep.summary.test_time_s},
                      {"epochs", rep.epochs.size()}}}}
                   .dump()
            << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct BlobArgs {
  std::size_t count = 500;
  std::size_t width = 16;
  std::size_t classes = 2;
  double spread = 0.15;
  std::uint64_t seed = 1;
  std::uint64_t sample_seed = 0;
  std::string out;
};

int cmd_gen_blobs(const BlobArgs& a) {
  if (a.out.empty()) throw UsageError("--out is required");
  const auto d = make_blobs({a.count, a.width, a.classes, a.spread}, a.seed,
                            a.sample_seed ? a.sample_seed : a.seed);
  save_dataset(a.out, d);
  std::cerr << "wrote " << d.size() << " samples to " << a.out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"snnfuse: fused LIF engines, time-partitioned pipeline and benchmarks"};
  app.require_subcommand(1);
  const std::string echo = command_echo(argc, argv);
  const std::vector<std::string> formats{"json", "csv"};

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run the randomized equivalence suites");
  verify->add_option("--seed", va.seed, "Base seed")->capture_default_str();
  verify->add_option("--cases", va.cases, "Random cases per suite")->capture_default_str();
  verify->add_option("--out", va.out, "Directory for failing-case dumps")->capture_default_str();
  verify->add_option("--format", va.format, "text or json")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();
  verify->add_option("--inject-fault", va.fault, "Test fixture: none or fused-k-tau")
      ->check(CLI::IsMember({"none", "fused-k-tau"}))
      ->group("");

  FusionArgs fa;
  auto* bf = app.add_subcommand("bench-fusion", "Time serial vs fused LIF forward+backward");
  bf->add_option("--time-steps", fa.t_list, "Time-step counts")->delimiter(',')->capture_default_str();
  bf->add_option("--width", fa.width, "Neurons per layer")->capture_default_str();
  bf->add_option("--batch", fa.batch, "Batch size")->capture_default_str();
  bf->add_option("--reps", fa.reps, "Timed repetitions per case")->capture_default_str();
  bf->add_option("--seed", fa.seed, "Input seed")->capture_default_str();
  bf->add_option("--format", fa.format)->check(CLI::IsMember(formats))->capture_default_str();
  bf->add_option("--out", fa.out, "Output file (default stdout)");

  PipelineArgs pa;
  auto* bp = app.add_subcommand("bench-pipeline", "Time the pipeline for several worker counts");
  bp->add_option("--workers", pa.k_list, "Worker counts k")->delimiter(',')->capture_default_str();
  bp->add_option("--time-steps", pa.t_len, "Time steps")->capture_default_str();
  bp->add_option("--width", pa.width, "Neurons")->capture_default_str();
  bp->add_option("--batch", pa.batch, "Batch size")->capture_default_str();
  bp->add_option("--micro-batches", pa.micro, "Micro-batches per layer")->capture_default_str();
  bp->add_option("--reps", pa.reps, "Timed repetitions per k")->capture_default_str();
  bp->add_option("--seed", pa.seed, "Input seed")->capture_default_str();
  auto* tc = bp->add_option("--inject-tc-us", pa.inject_tc_us, "Per-hop delay in microseconds");
  bp->add_option("--tc-ratio", pa.tc_ratio, "Size the delay as T_s / ratio")->excludes(tc);
  bp->add_flag("--oversubscribe", pa.oversubscribe, "Run k above the hardware lane count");
  bp->add_option("--trace", pa.trace, "Write a JSON-lines timing trace of the largest k");
  bp->add_option("--format", pa.format)->check(CLI::IsMember(formats))->capture_default_str();
  bp->add_option("--out", pa.out, "Output file (default stdout)");

  CurveArgs ca;
  auto* mc = app.add_subcommand("model-curve", "Emit mu(k) of the analytic speedup model");
  mc->add_option("--ratios", ca.ratios, "T_s/T_c ratios")->delimiter(',')->capture_default_str();
  mc->add_option("--k-max", ca.k_max, "Largest k")->capture_default_str();
  mc->add_option("--format", ca.format)->check(CLI::IsMember(formats))->capture_default_str();
  mc->add_option("--out", ca.out, "Output file (default stdout)");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train the reference network from a key=value config");
  tr->add_option("config", ta.config, "Config file")->required();
  tr->add_option("--engine", ta.engine, "serial, fused or pipeline")
      ->check(CLI::IsMember({"serial", "fused", "pipeline"}));
  tr->add_option("--seed", ta.seed, "Override the config seed");
  tr->add_option("--workers", ta.workers, "Pipeline workers");
  tr->add_option("--out", ta.out, "Metrics file (default stdout)");

  BlobArgs ba;
  auto* gb = app.add_subcommand("gen-blobs", "Write a synthetic Gaussian-blob dataset");
  gb->add_option("--count", ba.count)->capture_default_str();
  gb->add_option("--width", ba.width)->capture_default_str();
  gb->add_option("--classes", ba.classes)->capture_default_str();
  gb->add_option("--spread", ba.spread)->capture_default_str();
  gb->add_option("--seed", ba.seed, "Seed of the class centres")->capture_default_str();
  gb->add_option("--sample-seed", ba.sample_seed, "Seed of the samples (default: --seed)");
  gb->add_option("--out", ba.out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    ta.seed_set = tr->count("--seed") > 0;
    if (*verify) return cmd_verify(va, echo);
    if (*bf) return cmd_bench_fusion(fa, echo);
    if (*bp) return cmd_bench_pipeline(pa, echo);
    if (*mc) return cmd_model_curve(ca);
    if (*tr) return cmd_train(ta, echo);
    if (*gb) return cmd_gen_blobs(ba);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory; try a smaller --width, --batch or --time-steps\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
