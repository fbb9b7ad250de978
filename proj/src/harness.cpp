#include "einfuzz/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "einfuzz/errors.hpp"
#include "einfuzz/json_io.hpp"

namespace einfuzz {

namespace {

std::int64_t unix_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

Comparison compare(const TensorData& ref, const TensorData& cand,
                   const ComparatorConfig& cfg) {
  Comparison result;
  if (ref.shape() != cand.shape()) {
    result.equal = false;
    return result;
  }

  std::map<std::vector<std::int64_t>, std::pair<double, double>> cells;
  for (const TensorEntry& e : ref.entries()) cells[e.coord].first = e.value;
  for (const TensorEntry& e : cand.entries()) cells[e.coord].second = e.value;

  for (const auto& [coord, values] : cells) {
    const auto [a, b] = values;
    bool same;
    if (cfg.mode == CompareMode::Exact) {
      same = a == b;
    } else {
      same = std::abs(a - b) <= cfg.atol + cfg.rtol * std::max(std::abs(a), std::abs(b));
    }
    if (!same) {
      result.equal = false;
      result.worst.push_back({coord, a, b});
    }
  }

  std::stable_sort(result.worst.begin(), result.worst.end(),
                   [](const DiffEntry& x, const DiffEntry& y) {
                     return std::abs(x.ref - x.got) > std::abs(y.ref - y.got);
                   });
  if (result.worst.size() > 10) result.worst.resize(10);
  return result;
}

std::string_view verdict_kind_name(VerdictKind k) {
  switch (k) {
    case VerdictKind::Pass: return "pass";
    case VerdictKind::StcNotAccepted: return "stc_na";
    case VerdictKind::CrashBug: return "crash";
    case VerdictKind::WrongCodeBug: return "wrong_code";
  }
  return "pass";
}

nlohmann::json provenance_to_json(const MutationProvenance& p) {
  nlohmann::json formats = nlohmann::json::object();
  for (const auto& [name, fmt] : p.formats) {
    formats[name] = std::string(format_name(fmt));
  }
  return {{"perm", p.perm}, {"formats", std::move(formats)}};
}

MutationProvenance provenance_from_json(const nlohmann::json& node) {
  if (!node.is_object() || !node.contains("perm") || !node.contains("formats") ||
      !node["perm"].is_array() || !node["formats"].is_object()) {
    throw SchemaError("malformed mutant provenance");
  }
  MutationProvenance p;
  for (const auto& v : node["perm"]) {
    if (!v.is_number_integer()) throw SchemaError("malformed mutant permutation");
    p.perm.push_back(v.get<int>());
  }
  for (const auto& [name, fmt] : node["formats"].items()) {
    if (!fmt.is_string()) throw SchemaError("malformed mutant format assignment");
    const auto parsed = format_from_name(fmt.get<std::string>());
    if (!parsed) throw SchemaError("unknown format in mutant provenance");
    p.formats.emplace(name, *parsed);
  }
  return p;
}

namespace {

nlohmann::json diff_to_json(const std::vector<DiffEntry>& diff) {
  nlohmann::json out = nlohmann::json::array();
  for (const DiffEntry& d : diff) {
    out.push_back({{"coord", d.coord}, {"ref", d.ref}, {"got", d.got}});
  }
  return out;
}

// Classification shared by live iterations and report replay so a replayed
// report cannot drift from the recorded verdict.
Verdict judge(const ExecutionOutcome& reference,
              const std::vector<std::pair<MutationProvenance, ExecutionOutcome>>&
                  mutant_outcomes,
              const ComparatorConfig& comparator) {
  Verdict verdict;
  if (reference.kind != OutcomeKind::Success) {
    verdict.kind = VerdictKind::StcNotAccepted;
    verdict.reference_outcome = reference;
    return verdict;
  }

  bool any_divergent = false;
  bool any_crash = false;
  for (const auto& [provenance, outcome] : mutant_outcomes) {
    MutantEvidence evidence;
    evidence.provenance = provenance;
    evidence.outcome = outcome.kind;
    evidence.detail = outcome.detail;

    switch (outcome.kind) {
      case OutcomeKind::Success: {
        const Comparison cmp = compare(*reference.output, *outcome.output, comparator);
        if (!cmp.equal) {
          evidence.divergent = true;
          evidence.diff = cmp.worst;
          any_divergent = true;
          verdict.offenders.push_back(std::move(evidence));
        }
        break;
      }
      case OutcomeKind::Rejected:
        // The reference ran; refusing an equivalent variant is a frontend
        // failure on a program the compiler demonstrably supports.
      case OutcomeKind::Crashed:
      case OutcomeKind::TimedOut:
        any_crash = true;
        verdict.offenders.push_back(std::move(evidence));
        break;
    }
  }

  if (any_divergent) {
    verdict.kind = VerdictKind::WrongCodeBug;
  } else if (any_crash) {
    verdict.kind = VerdictKind::CrashBug;
  } else {
    verdict.kind = VerdictKind::Pass;
  }
  return verdict;
}

nlohmann::json outcome_to_json(const ExecutionOutcome& outcome, Dtype dtype) {
  nlohmann::json node{{"kind", std::string(outcome_kind_name(outcome.kind))}};
  if (!outcome.detail.empty()) node["detail"] = outcome.detail;
  if (outcome.output) node["output"] = tensor_to_json(*outcome.output, dtype);
  return node;
}

}  // namespace

IterationResult run_iteration(const Backend& backend, const HarnessConfig& cfg,
                              std::uint64_t campaign_seed,
                              std::uint64_t iteration_index) {
  const std::uint64_t iteration_seed = derive_seed(campaign_seed, iteration_index);
  Rng rng(iteration_seed);
  const std::int64_t started = unix_ms();

  const EinsumKernel kernel = generate_kernel(cfg.gen, rng);
  const std::map<std::string, TensorData> inputs =
      generate_inputs(kernel, cfg.gen, rng);
  const nlohmann::json request = kernel_to_json(kernel, inputs);

  const ExecutionOutcome reference =
      backend.execute({request, cfg.timeout_ms, 0});

  std::vector<std::pair<MutationProvenance, ExecutionOutcome>> mutant_outcomes;
  if (reference.kind == OutcomeKind::Success) {
    // Mutants run against the same input data: equivalence over identical
    // inputs, differing only in operand order and storage.
    for (const Mutant& mutant : sample_mutants(kernel, cfg.mutant_budget, rng)) {
      const nlohmann::json mutant_request = kernel_to_json(mutant.kernel, inputs);
      mutant_outcomes.emplace_back(
          mutant.provenance, backend.execute({mutant_request, cfg.timeout_ms, 0}));
    }
  }

  IterationResult result;
  result.index = iteration_index;
  result.verdict = judge(reference, mutant_outcomes, cfg.comparator);

  const bool is_bug = result.verdict.kind == VerdictKind::CrashBug ||
                      result.verdict.kind == VerdictKind::WrongCodeBug;
  const bool keep = is_bug || (cfg.log_rejected &&
                               result.verdict.kind == VerdictKind::StcNotAccepted);
  if (keep) {
    nlohmann::json mutants = nlohmann::json::array();
    for (const auto& [provenance, outcome] : mutant_outcomes) {
      nlohmann::json node = provenance_to_json(provenance);
      node["outcome"] = std::string(outcome_kind_name(outcome.kind));
      if (!outcome.detail.empty()) node["detail"] = outcome.detail;
      bool divergent = false;
      for (const MutantEvidence& evidence : result.verdict.offenders) {
        if (evidence.provenance == provenance && evidence.divergent) {
          divergent = true;
          node["diff"] = diff_to_json(evidence.diff);
          if (outcome.output) {
            node["output"] = tensor_to_json(*outcome.output, kernel.dtype);
          }
        }
      }
      node["divergent"] = divergent;
      mutants.push_back(std::move(node));
    }

    result.report = {
        {"iteration", iteration_index},
        {"campaign_seed", campaign_seed},
        {"iteration_seed", iteration_seed},
        {"backend", backend.id()},
        {"timeout_ms", cfg.timeout_ms},
        {"comparator",
         {{"mode", cfg.comparator.mode == CompareMode::Exact ? "exact" : "epsilon"},
          {"atol", cfg.comparator.atol},
          {"rtol", cfg.comparator.rtol}}},
        {"kernel", render(kernel)},
        {"verdict", std::string(verdict_kind_name(result.verdict.kind))},
        {"request", request},
        {"reference", outcome_to_json(reference, kernel.dtype)},
        {"mutants", std::move(mutants)},
        {"timestamps", {{"started_unix_ms", started}, {"finished_unix_ms", unix_ms()}}},
    };
    result.has_report = true;
  }
  return result;
}

nlohmann::json CampaignStats::to_json() const {
  return {{"iterations", iterations},
          {"pass", pass},
          {"stc_na", stc_na},
          {"crash", crash},
          {"wrong_code", wrong_code},
          {"wall_clock_ms", wall_clock_ms},
          {"latency_ms",
           {{"p50", latency.p50_ms},
            {"p90", latency.p90_ms},
            {"p99", latency.p99_ms},
            {"max", latency.max_ms}}}};
}

CampaignStats CampaignStats::from_json(const nlohmann::json& doc) {
  CampaignStats stats;
  try {
    stats.iterations = doc.at("iterations").get<std::uint64_t>();
    stats.pass = doc.at("pass").get<std::uint64_t>();
    stats.stc_na = doc.at("stc_na").get<std::uint64_t>();
    stats.crash = doc.at("crash").get<std::uint64_t>();
    stats.wrong_code = doc.at("wrong_code").get<std::uint64_t>();
    stats.wall_clock_ms = doc.at("wall_clock_ms").get<double>();
    const nlohmann::json& latency = doc.at("latency_ms");
    stats.latency.p50_ms = latency.at("p50").get<double>();
    stats.latency.p90_ms = latency.at("p90").get<double>();
    stats.latency.p99_ms = latency.at("p99").get<double>();
    stats.latency.max_ms = latency.at("max").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed stats document: ") + e.what());
  }
  return stats;
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::min(sorted.size() - 1, rank == 0 ? 0 : rank - 1)];
}

nlohmann::json gen_config_to_json(const GenConfig& gen) {
  return {{"min_inputs", gen.min_inputs},
          {"max_inputs", gen.max_inputs},
          {"r_max", gen.r_max},
          {"pool_size", gen.pool_size},
          {"dim_min", gen.dim_min},
          {"dim_max", gen.dim_max},
          {"density_min", gen.density_min},
          {"density_max", gen.density_max},
          {"dtype", std::string(dtype_name(gen.dtype))},
          {"int_bound", gen.int_bound},
          {"float_bound", gen.float_bound},
          {"output_keep_prob", gen.output_keep_prob},
          {"output_rank_cap", gen.output_rank_cap}};
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << doc.dump(2) << '\n';
}

}  // namespace

CampaignStats run_campaign(const Backend& backend, const CampaignConfig& cfg,
                           const StopCondition& stop,
                           const std::atomic<bool>* stop_flag) {
  cfg.harness.gen.check();
  if (stop.iterations == 0 && stop.duration.count() <= 0) {
    throw std::invalid_argument("stop condition needs iterations or a duration");
  }

  const std::string campaign_id =
      cfg.campaign_id.empty() ? "campaign-" + std::to_string(cfg.seed)
                              : cfg.campaign_id;
  const bool persist = !cfg.out_dir.empty();
  if (persist) {
    std::filesystem::create_directories(cfg.out_dir / "reports");
    write_json_file(cfg.out_dir / "campaign.json",
                    {{"campaign_id", campaign_id},
                     {"seed", cfg.seed},
                     {"backend", backend.id()},
                     {"workers", cfg.workers},
                     {"mutant_budget", cfg.harness.mutant_budget},
                     {"timeout_ms", cfg.harness.timeout_ms},
                     {"comparator",
                      {{"mode", cfg.harness.comparator.mode == CompareMode::Exact
                                    ? "exact"
                                    : "epsilon"},
                       {"atol", cfg.harness.comparator.atol},
                       {"rtol", cfg.harness.comparator.rtol}}},
                     {"gen", gen_config_to_json(cfg.harness.gen)},
                     {"created_unix_ms", unix_ms()}});
  }

  const auto started = std::chrono::steady_clock::now();
  const auto deadline = started + stop.duration;

  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> aborted{false};
  std::mutex mutex;
  CampaignStats stats;
  std::vector<double> latencies;
  std::string abort_reason;

  auto worker = [&] {
    for (;;) {
      if (aborted.load()) break;
      if (stop_flag != nullptr && stop_flag->load()) break;
      if (stop.duration.count() > 0 &&
          std::chrono::steady_clock::now() >= deadline) {
        break;
      }
      const std::uint64_t index = next.fetch_add(1);
      if (stop.iterations > 0 && index >= stop.iterations) break;

      const auto t0 = std::chrono::steady_clock::now();
      IterationResult result;
      try {
        result = run_iteration(backend, cfg.harness, cfg.seed, index);
      } catch (const BackendConfigError& e) {
        // a broken harness setup aborts the campaign; it is not a verdict
        std::lock_guard lock(mutex);
        if (abort_reason.empty()) abort_reason = e.what();
        aborted.store(true);
        break;
      }
      const double latency_ms =
          std::chrono::duration<double, std::milli>(
              std::chrono::steady_clock::now() - t0)
              .count();

      if (result.has_report && persist) {
        nlohmann::json report = result.report;
        report["campaign_id"] = campaign_id;
        write_json_file(cfg.out_dir / "reports" /
                            ("iter-" + std::to_string(index) + ".json"),
                        report);
      }

      std::lock_guard lock(mutex);
      ++stats.iterations;
      switch (result.verdict.kind) {
        case VerdictKind::Pass: ++stats.pass; break;
        case VerdictKind::StcNotAccepted: ++stats.stc_na; break;
        case VerdictKind::CrashBug: ++stats.crash; break;
        case VerdictKind::WrongCodeBug: ++stats.wrong_code; break;
      }
      latencies.push_back(latency_ms);
    }
  };

  std::vector<std::thread> workers;
  const std::size_t worker_count = std::max<std::size_t>(1, cfg.workers);
  workers.reserve(worker_count);
  for (std::size_t w = 0; w < worker_count; ++w) workers.emplace_back(worker);
  for (std::thread& t : workers) t.join();
  if (aborted.load()) throw BackendConfigError(abort_reason);

  stats.wall_clock_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - started)
                            .count();
  std::sort(latencies.begin(), latencies.end());
  stats.latency.p50_ms = quantile(latencies, 0.50);
  stats.latency.p90_ms = quantile(latencies, 0.90);
  stats.latency.p99_ms = quantile(latencies, 0.99);
  stats.latency.max_ms = latencies.empty() ? 0.0 : latencies.back();

  if (persist) {
    write_json_file(cfg.out_dir / "stats.json", stats.to_json());
  }
  return stats;
}

Verdict replay(const std::filesystem::path& report_path, const Backend& backend) {
  std::ifstream in(report_path);
  if (!in) throw SchemaError("cannot read report " + report_path.string());
  nlohmann::json report;
  try {
    report = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw SchemaError(std::string("malformed report: ") + e.what());
  }
  if (!report.is_object() || !report.contains("request") ||
      !report.contains("mutants") || !report["mutants"].is_array()) {
    throw SchemaError("report is missing request/mutants");
  }

  if (report.contains("backend") && report["backend"].is_string() &&
      report["backend"].get<std::string>() != backend.id()) {
    std::cerr << "warning: report was recorded against backend '"
              << report["backend"].get<std::string>() << "', replaying on '"
              << backend.id() << "'\n";
  }

  ComparatorConfig comparator;
  if (report.contains("comparator") && report["comparator"].is_object()) {
    const nlohmann::json& c = report["comparator"];
    if (c.contains("mode") && c["mode"].is_string()) {
      comparator.mode = c["mode"].get<std::string>() == "epsilon"
                            ? CompareMode::Epsilon
                            : CompareMode::Exact;
    }
    if (c.contains("atol") && c["atol"].is_number()) {
      comparator.atol = c["atol"].get<double>();
    }
    if (c.contains("rtol") && c["rtol"].is_number()) {
      comparator.rtol = c["rtol"].get<double>();
    }
  }
  std::int64_t timeout_ms = 30000;
  if (report.contains("timeout_ms") && report["timeout_ms"].is_number_integer()) {
    timeout_ms = report["timeout_ms"].get<std::int64_t>();
  }

  const nlohmann::json& request = report["request"];
  const KernelBundle bundle = kernel_from_json(request);  // SchemaError if bad

  const ExecutionOutcome reference = backend.execute({request, timeout_ms, 0});

  std::vector<std::pair<MutationProvenance, ExecutionOutcome>> mutant_outcomes;
  if (reference.kind == OutcomeKind::Success) {
    for (const nlohmann::json& node : report["mutants"]) {
      const MutationProvenance provenance = provenance_from_json(node);
      const Mutant mutant = apply_provenance(bundle.kernel, provenance);
      const nlohmann::json mutant_request =
          kernel_to_json(mutant.kernel, bundle.inputs);
      mutant_outcomes.emplace_back(provenance,
                                   backend.execute({mutant_request, timeout_ms, 0}));
    }
  }

  return judge(reference, mutant_outcomes, comparator);
}

}  // namespace einfuzz
