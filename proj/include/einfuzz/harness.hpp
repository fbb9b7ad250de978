#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "einfuzz/backend.hpp"
#include "einfuzz/generator.hpp"
#include "einfuzz/mutation.hpp"
#include "einfuzz/tensor.hpp"

namespace einfuzz {

enum class CompareMode { Exact, Epsilon };

struct ComparatorConfig {
  CompareMode mode = CompareMode::Exact;
  double atol = 1e-8;
  double rtol = 1e-6;
};

struct DiffEntry {
  std::vector<std::int64_t> coord;
  double ref = 0.0;
  double got = 0.0;
};

struct Comparison {
  bool equal = true;
  // Up to the 10 worst coordinates by absolute difference.
  std::vector<DiffEntry> worst;
};

// Canonicalizes both sides to coordinate maps (absent coordinate == zero) and
// compares cell-wise: a == b in Exact mode, |a-b| <= atol + rtol*max(|a|,|b|)
// in Epsilon mode. Shape mismatch is itself a divergence. Symmetric in its
// Equal/Divergent classification.
Comparison compare(const TensorData& ref, const TensorData& cand,
                   const ComparatorConfig& cfg);

enum class VerdictKind { Pass, StcNotAccepted, CrashBug, WrongCodeBug };

std::string_view verdict_kind_name(VerdictKind k);

struct MutantEvidence {
  MutationProvenance provenance;
  OutcomeKind outcome;
  std::string detail;           // crash detail / rejection message
  bool divergent = false;       // Success whose output differs from the reference
  std::vector<DiffEntry> diff;  // worst coordinates when divergent
};

struct Verdict {
  VerdictKind kind = VerdictKind::Pass;
  // Reference outcome when the kernel never got off the ground.
  std::optional<ExecutionOutcome> reference_outcome;
  std::vector<MutantEvidence> offenders;
};

struct HarnessConfig {
  GenConfig gen;
  std::size_t mutant_budget = 8;
  ComparatorConfig comparator;
  std::int64_t timeout_ms = 30000;
  bool log_rejected = false;  // also persist StcNotAccepted iterations
};

struct IterationResult {
  std::uint64_t index = 0;
  Verdict verdict;
  nlohmann::json report;  // filled for every non-Pass verdict worth keeping
  bool has_report = false;
};

// One fuzzing round: generate kernel and inputs from the iteration's derived
// rng stream, execute the reference configuration, then the sampled mutants
// against the same input data, compare, classify. Crash and divergence in
// the same round classify as WrongCodeBug (the more critical of the two)
// with the crash evidence attached.
IterationResult run_iteration(const Backend& backend, const HarnessConfig& cfg,
                              std::uint64_t campaign_seed,
                              std::uint64_t iteration_index);

struct LatencyQuantiles {
  double p50_ms = 0.0;
  double p90_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
};

struct CampaignStats {
  std::uint64_t iterations = 0;
  std::uint64_t pass = 0;
  std::uint64_t stc_na = 0;
  std::uint64_t crash = 0;
  std::uint64_t wrong_code = 0;
  double wall_clock_ms = 0.0;
  LatencyQuantiles latency;

  std::uint64_t bug_count() const { return crash + wrong_code; }
  nlohmann::json to_json() const;
  static CampaignStats from_json(const nlohmann::json& doc);
};

// Either a fixed iteration count or a wall-clock budget (checked between
// iterations, so overrun is bounded by one iteration's latency).
struct StopCondition {
  std::uint64_t iterations = 0;
  std::chrono::milliseconds duration{0};
};

struct CampaignConfig {
  HarnessConfig harness;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::filesystem::path out_dir;  // empty = nothing persisted
  std::string campaign_id;        // defaults to "campaign-<seed>"
};

// Runs iterations until the stop condition (or *stop_flag) fires. Layout of
// out_dir: campaign.json (config + seed), stats.json, reports/iter-<n>.json.
// Iteration randomness is keyed by (seed, iteration index) alone, so the
// verdict for iteration n is the same whatever the worker count.
CampaignStats run_campaign(const Backend& backend, const CampaignConfig& cfg,
                           const StopCondition& stop,
                           const std::atomic<bool>* stop_flag = nullptr);

// Re-executes exactly the recorded reference and mutants (no regeneration)
// and re-derives the verdict. Against the originating backend this matches
// the recorded verdict; against a fixed compiler it is the fix-verification
// workflow. Warns on stderr when the backend id differs from the record.
// Throws SchemaError on unreadable or truncated reports.
Verdict replay(const std::filesystem::path& report_path, const Backend& backend);

// Report document pieces shared by harness, replay and the CLI.
nlohmann::json provenance_to_json(const MutationProvenance& p);
MutationProvenance provenance_from_json(const nlohmann::json& node);

}  // namespace einfuzz
