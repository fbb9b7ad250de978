#include <atomic>
#include <cctype>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "einfuzz/backend.hpp"
#include "einfuzz/errors.hpp"
#include "einfuzz/generator.hpp"
#include "einfuzz/grammar.hpp"
#include "einfuzz/harness.hpp"
#include "einfuzz/json_io.hpp"
#include "einfuzz/rng.hpp"

namespace {

// Exit code contract, stable across subcommands:
//   0 clean, 1 bugs/invalid found, 2 operational error, 64 usage error.
constexpr int kExitClean = 0;
constexpr int kExitBugs = 1;
constexpr int kExitError = 2;
constexpr int kExitUsage = 64;

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

// Flags beat environment beats config file; CLI11 already resolves in that
// order, we only provide the EINFUZZ_ mapping and the JSON reader.
CLI::Option* with_env(CLI::Option* opt) {
  std::string env = "EINFUZZ_";
  for (char c : opt->get_single_name()) {
    env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return opt->envname(env);
}

class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool,
                        std::string) const override {
    nlohmann::json out = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      if (!opt->count() && !default_also) continue;
      const std::string value =
          opt->count() ? opt->results().front() : opt->get_default_str();
      out[opt->get_lnames().front()] = value;
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      const nlohmann::json nested =
          nlohmann::json::parse(to_config(sub, default_also, false, ""));
      if (!nested.empty()) out[sub->get_name()] = nested;
    }
    return out.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(input);
    } catch (const std::exception& e) {
      throw CLI::ConfigError::Extras(e.what());
    }
    if (!doc.is_object()) {
      throw CLI::ConfigError::Extras("config file must hold a JSON object");
    }
    std::vector<CLI::ConfigItem> items;
    walk(doc, {}, items);
    return items;
  }

 private:
  static void walk(const nlohmann::json& node, std::vector<std::string> parents,
                   std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : node.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        walk(value, std::move(nested), items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& element : value) {
          item.inputs.push_back(element.is_string() ? element.get<std::string>()
                                                    : element.dump());
        }
      } else {
        item.inputs.push_back(value.is_string() ? value.get<std::string>()
                                                : value.dump());
      }
      items.push_back(std::move(item));
    }
  }
};

void add_gen_flags(CLI::App* cmd, einfuzz::GenConfig& gen, std::string& dtype) {
  with_env(cmd->add_option("--min-inputs", gen.min_inputs, "Minimum input tensors"));
  with_env(cmd->add_option("--max-inputs", gen.max_inputs, "Maximum input tensors"));
  with_env(cmd->add_option("--r-max", gen.r_max, "Maximum rank per tensor"));
  with_env(cmd->add_option("--pool", gen.pool_size, "Index pool size"));
  with_env(cmd->add_option("--dim-min", gen.dim_min, "Minimum extent per index"));
  with_env(cmd->add_option("--dim-max", gen.dim_max, "Maximum extent per index"));
  with_env(cmd->add_option("--density-min", gen.density_min, "Minimum nonzero fraction"));
  with_env(cmd->add_option("--density-max", gen.density_max, "Maximum nonzero fraction"));
  with_env(cmd->add_option("--dtype", dtype, "Element type: int or float")
               ->check(CLI::IsMember({"int", "float"})));
  with_env(cmd->add_option("--int-bound", gen.int_bound, "Int value magnitude bound"));
  with_env(cmd->add_option("--float-bound", gen.float_bound, "Float value magnitude bound"));
  with_env(cmd->add_option("--output-keep-prob", gen.output_keep_prob,
                           "Chance a used index stays in the output"));
  with_env(cmd->add_option("--output-rank-cap", gen.output_rank_cap,
                           "Output rank cap (0 = r_max)"));
}

std::int64_t parse_duration_ms(const std::string& text) {
  std::size_t suffix = 0;
  while (suffix < text.size() &&
         (std::isdigit(static_cast<unsigned char>(text[suffix])) || text[suffix] == '.')) {
    ++suffix;
  }
  if (suffix == 0) throw std::invalid_argument("bad duration '" + text + "'");
  const double value = std::stod(text.substr(0, suffix));
  const std::string unit = text.substr(suffix);
  if (unit.empty() || unit == "s") return static_cast<std::int64_t>(value * 1000.0);
  if (unit == "ms") return static_cast<std::int64_t>(value);
  if (unit == "m") return static_cast<std::int64_t>(value * 60000.0);
  throw std::invalid_argument("bad duration unit '" + unit + "'");
}

int cmd_gen(std::uint64_t count, std::uint64_t seed, const einfuzz::GenConfig& gen,
            const std::string& out_dir) {
  gen.check();
  std::filesystem::path dir(out_dir);
  if (!out_dir.empty()) std::filesystem::create_directories(dir);

  for (std::uint64_t i = 0; i < count; ++i) {
    einfuzz::Rng rng(einfuzz::derive_seed(seed, i));
    const einfuzz::EinsumKernel kernel = einfuzz::generate_kernel(gen, rng);
    const auto inputs = einfuzz::generate_inputs(kernel, gen, rng);
    const nlohmann::json doc = einfuzz::kernel_to_json(kernel, inputs);
    if (out_dir.empty()) {
      std::cout << doc.dump() << '\n';
    } else {
      std::ostringstream name;
      name << "kernel-" << std::setw(5) << std::setfill('0') << i << ".json";
      std::ofstream file(dir / name.str());
      if (!file) {
        std::cerr << "error: cannot write " << (dir / name.str()) << '\n';
        return kExitError;
      }
      file << doc.dump(2) << '\n';
    }
  }
  return kExitClean;
}

int cmd_validate(const std::string& path) {
  nlohmann::json doc;
  try {
    if (path == "-") {
      doc = nlohmann::json::parse(std::cin);
    } else {
      std::ifstream in(path);
      if (!in) {
        std::cerr << "error: cannot read " << path << '\n';
        return kExitError;
      }
      doc = nlohmann::json::parse(in);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }

  einfuzz::KernelBundle bundle;
  try {
    bundle = einfuzz::kernel_from_json(doc);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }

  const einfuzz::ValidationReport report = einfuzz::validate(bundle.kernel);
  std::cout << nlohmann::json{{"ok", report.ok}, {"violations", report.violations}}
                   .dump()
            << '\n';
  for (const std::string& violation : report.violations) {
    std::cerr << "violation: " << violation << '\n';
  }
  return report.ok ? kExitClean : kExitBugs;
}

int cmd_fuzz(const std::string& backend_spec, std::uint64_t iterations,
             const std::string& duration, std::uint64_t seed,
             std::size_t mutants, const einfuzz::GenConfig& gen,
             double atol, double rtol, std::size_t workers,
             const std::string& out_dir, std::int64_t timeout_ms,
             bool log_rejected) {
  if (iterations > 0 && !duration.empty()) {
    std::cerr << "error: --iterations and --duration are mutually exclusive\n";
    return kExitUsage;
  }

  einfuzz::StopCondition stop;
  if (!duration.empty()) {
    stop.duration = std::chrono::milliseconds(parse_duration_ms(duration));
  } else {
    stop.iterations = iterations > 0 ? iterations : 1000;
  }

  einfuzz::CampaignConfig cfg;
  cfg.harness.gen = gen;
  cfg.harness.mutant_budget = mutants;
  cfg.harness.comparator.mode = gen.dtype == einfuzz::Dtype::Int
                                    ? einfuzz::CompareMode::Exact
                                    : einfuzz::CompareMode::Epsilon;
  cfg.harness.comparator.atol = atol;
  cfg.harness.comparator.rtol = rtol;
  cfg.harness.timeout_ms = timeout_ms;
  cfg.harness.log_rejected = log_rejected;
  cfg.seed = seed;
  cfg.workers = workers;
  cfg.out_dir = out_dir;

  const std::unique_ptr<einfuzz::Backend> backend =
      einfuzz::make_backend(backend_spec);

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  const einfuzz::CampaignStats stats =
      einfuzz::run_campaign(*backend, cfg, stop, &g_stop);

  std::cout << stats.to_json().dump() << '\n';
  std::cerr << "campaign done: " << stats.iterations << " iterations, "
            << stats.pass << " pass, " << stats.stc_na << " stc-na, "
            << stats.crash << " c-bugs, " << stats.wrong_code << " wc-bugs\n";
  return stats.bug_count() > 0 ? kExitBugs : kExitClean;
}

int cmd_baseline(std::uint64_t samples, std::uint64_t seed,
                 einfuzz::CfgConfig cfg, const einfuzz::GenConfig& gen,
                 const std::string& generator) {
  cfg.seed = seed;
  einfuzz::ValidityStats stats;
  if (generator == "constraint") {
    einfuzz::GenConfig constraint = gen;
    constraint.seed = seed;
    stats = einfuzz::run_constraint_validity_experiment(constraint, samples);
  } else {
    stats = einfuzz::run_validity_experiment(cfg, samples);
  }
  std::cout << stats.to_json().dump() << '\n';
  std::cerr << "validity rate: " << stats.validity_rate() << " over " << stats.n
            << " samples\n";
  return kExitClean;
}

int cmd_replay(const std::string& report_path, const std::string& backend_spec) {
  const std::unique_ptr<einfuzz::Backend> backend =
      einfuzz::make_backend(backend_spec);
  const einfuzz::Verdict verdict = einfuzz::replay(report_path, *backend);
  std::cout << nlohmann::json{{"verdict",
                               std::string(verdict_kind_name(verdict.kind))}}
                   .dump()
            << '\n';
  std::cerr << "replay verdict: " << verdict_kind_name(verdict.kind) << '\n';
  const bool bug = verdict.kind == einfuzz::VerdictKind::CrashBug ||
                   verdict.kind == einfuzz::VerdictKind::WrongCodeBug;
  return bug ? kExitBugs : kExitClean;
}

int cmd_stats(const std::string& dir) {
  const std::filesystem::path stats_path = std::filesystem::path(dir) / "stats.json";
  std::ifstream in(stats_path);
  if (!in) {
    std::cerr << "error: cannot read " << stats_path << '\n';
    return kExitError;
  }
  nlohmann::json doc;
  nlohmann::json campaign;
  try {
    doc = nlohmann::json::parse(in);
    std::ifstream meta(std::filesystem::path(dir) / "campaign.json");
    if (meta) campaign = nlohmann::json::parse(meta);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  const einfuzz::CampaignStats stats = einfuzz::CampaignStats::from_json(doc);

  if (campaign.is_object()) {
    std::cout << "campaign  " << campaign.value("campaign_id", std::string("?"))
              << "\nbackend   " << campaign.value("backend", std::string("?"))
              << "\nseed      " << campaign.value("seed", 0ULL) << "\n\n";
  }
  std::cout << std::setw(12) << "iterations" << std::setw(9) << "stc-na"
            << std::setw(9) << "c-bugs" << std::setw(9) << "wc-bugs"
            << std::setw(9) << "pass" << '\n';
  std::cout << std::setw(12) << stats.iterations << std::setw(9) << stats.stc_na
            << std::setw(9) << stats.crash << std::setw(9) << stats.wrong_code
            << std::setw(9) << stats.pass << '\n';
  std::cout << "wall clock " << stats.wall_clock_ms << " ms; latency p50 "
            << stats.latency.p50_ms << " / p90 " << stats.latency.p90_ms
            << " / p99 " << stats.latency.p99_ms << " / max "
            << stats.latency.max_ms << " ms\n";
  return kExitClean;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"einfuzz: metamorphic fuzzing for sparse tensor compilers"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file");

  int exit_code = kExitClean;
  std::function<int()> action;

  // gen
  {
    CLI::App* cmd = app.add_subcommand("gen", "Generate validated kernel documents");
    auto count = std::make_shared<std::uint64_t>(1);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out_dir = std::make_shared<std::string>();
    auto gen = std::make_shared<einfuzz::GenConfig>();
    auto dtype = std::make_shared<std::string>("int");
    with_env(cmd->add_option("--count", *count, "Documents to emit")
                 ->check(CLI::Range(std::uint64_t{1},
                                    std::numeric_limits<std::uint64_t>::max())));
    with_env(cmd->add_option("--seed", *seed, "RNG seed"));
    with_env(cmd->add_option("--out", *out_dir, "Output directory (default stdout)"));
    add_gen_flags(cmd, *gen, *dtype);
    cmd->callback([=, &action] {
      action = [=] {
        einfuzz::GenConfig resolved = *gen;
        resolved.dtype = *einfuzz::dtype_from_name(*dtype);
        return cmd_gen(*count, *seed, resolved, *out_dir);
      };
    });
  }

  // validate
  {
    CLI::App* cmd = app.add_subcommand("validate", "Validate a kernel document");
    auto path = std::make_shared<std::string>();
    cmd->add_option("path", *path, "Document path, or - for stdin")->required();
    cmd->callback([=, &action] { action = [=] { return cmd_validate(*path); }; });
  }

  // fuzz
  {
    CLI::App* cmd = app.add_subcommand("fuzz", "Run a metamorphic fuzzing campaign");
    auto backend = std::make_shared<std::string>("ref");
    auto iterations = std::make_shared<std::uint64_t>(0);
    auto duration = std::make_shared<std::string>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto mutants = std::make_shared<std::size_t>(8);
    auto gen = std::make_shared<einfuzz::GenConfig>();
    auto dtype = std::make_shared<std::string>("int");
    auto atol = std::make_shared<double>(1e-8);
    auto rtol = std::make_shared<double>(1e-6);
    auto workers = std::make_shared<std::size_t>(1);
    auto out_dir = std::make_shared<std::string>();
    auto timeout_ms = std::make_shared<std::int64_t>(30000);
    auto log_rejected = std::make_shared<bool>(false);
    with_env(cmd->add_option("--backend", *backend,
                             "ref | faulty:<fault,...> | cmd:<adapter command>"));
    with_env(cmd->add_option("--iterations", *iterations, "Iteration budget"));
    with_env(cmd->add_option("--duration", *duration, "Wall-clock budget, e.g. 10s"));
    with_env(cmd->add_option("--seed", *seed, "Campaign seed"));
    with_env(cmd->add_option("--mutants", *mutants, "Mutant budget per reference")
                 ->check(CLI::Range(std::size_t{1},
                                    std::numeric_limits<std::size_t>::max())));
    with_env(cmd->add_option("--atol", *atol, "Absolute tolerance (float mode)"));
    with_env(cmd->add_option("--rtol", *rtol, "Relative tolerance (float mode)"));
    with_env(cmd->add_option("--workers", *workers, "Worker threads")
                 ->check(CLI::Range(std::size_t{1},
                                    std::numeric_limits<std::size_t>::max())));
    with_env(cmd->add_option("--out", *out_dir, "Campaign directory"));
    with_env(cmd->add_option("--timeout-ms", *timeout_ms, "Per-execution timeout"));
    with_env(cmd->add_flag("--log-rejected", *log_rejected,
                           "Also persist reports for rejected references"));
    add_gen_flags(cmd, *gen, *dtype);
    cmd->callback([=, &action] {
      action = [=] {
        einfuzz::GenConfig resolved = *gen;
        resolved.dtype = *einfuzz::dtype_from_name(*dtype);
        resolved.seed = *seed;
        return cmd_fuzz(*backend, *iterations, *duration, *seed, *mutants,
                        resolved, *atol, *rtol, *workers, *out_dir, *timeout_ms,
                        *log_rejected);
      };
    });
  }

  // baseline
  {
    CLI::App* cmd = app.add_subcommand(
        "baseline", "Measure the validity rate of grammar-based generation");
    auto samples = std::make_shared<std::uint64_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto cfg = std::make_shared<einfuzz::CfgConfig>();
    auto gen = std::make_shared<einfuzz::GenConfig>();
    auto generator = std::make_shared<std::string>("cfg");
    with_env(cmd->add_option("--samples", *samples, "Sample count")
                 ->required()
                 ->check(CLI::Range(std::uint64_t{1},
                                    std::numeric_limits<std::uint64_t>::max())));
    with_env(cmd->add_option("--seed", *seed, "RNG seed"));
    with_env(cmd->add_option("--max-terms", cfg->max_terms, "Maximum input terms"));
    with_env(cmd->add_option("--max-rank", cfg->max_rank, "Maximum rank"));
    with_env(cmd->add_option("--alphabet", cfg->alphabet_size, "Index letters per slot"));
    with_env(cmd->add_option("--shape-min", cfg->shape_min, "Minimum extent"));
    with_env(cmd->add_option("--shape-max", cfg->shape_max, "Maximum extent"));
    with_env(cmd->add_option("--generator", *generator, "cfg or constraint")
                 ->check(CLI::IsMember({"cfg", "constraint"})));
    cmd->callback([=, &action] {
      action = [=] { return cmd_baseline(*samples, *seed, *cfg, *gen, *generator); };
    });
  }

  // replay
  {
    CLI::App* cmd = app.add_subcommand("replay", "Re-execute a persisted bug report");
    auto path = std::make_shared<std::string>();
    auto backend = std::make_shared<std::string>("ref");
    cmd->add_option("report", *path, "Report path")->required();
    with_env(cmd->add_option("--backend", *backend,
                             "ref | faulty:<fault,...> | cmd:<adapter command>"));
    cmd->callback([=, &action] {
      action = [=] { return cmd_replay(*path, *backend); };
    });
  }

  // stats
  {
    CLI::App* cmd = app.add_subcommand("stats", "Summarize a campaign directory");
    auto dir = std::make_shared<std::string>();
    cmd->add_option("dir", *dir, "Campaign directory")->required();
    cmd->callback([=, &action] { action = [=] { return cmd_stats(*dir); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    exit_code = action ? action() : kExitUsage;
  } catch (const einfuzz::BackendConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    exit_code = kExitError;
  } catch (const einfuzz::SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    exit_code = kExitError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    exit_code = kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    exit_code = kExitError;
  }
  return exit_code;
}
