#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "json.hpp"

#include "einfuzz/tensor.hpp"

namespace einfuzz {

struct ExecutionRequest {
  nlohmann::json document;          // one kernel document
  std::int64_t timeout_ms = 30000;  // generous: some compilers take minutes
  std::int64_t memory_advisory_mb = 0;  // advisory only, 0 = unspecified
};

enum class OutcomeKind { Success, Rejected, Crashed, TimedOut };

std::string_view outcome_kind_name(OutcomeKind k);

struct ExecutionOutcome {
  OutcomeKind kind;
  std::optional<TensorData> output;  // set iff kind == Success
  std::string detail;                // rejection message / crash description

  static ExecutionOutcome success(TensorData out);
  static ExecutionOutcome rejected(std::string message);
  static ExecutionOutcome crashed(std::string detail);
  static ExecutionOutcome timed_out();
};

// One compiler-under-test. Implementations must be safe to call from several
// workers at once; every execute() is an isolated run.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual ExecutionOutcome execute(const ExecutionRequest& req) const = 0;
};

// In-process trustworthy target: stores each input in its assigned format
// and runs the format-aware engine. Total on valid requests; never crashes.
// Requests whose kernel fails validation come back Rejected.
class RefBackend final : public Backend {
 public:
  std::string id() const override { return "ref"; }
  ExecutionOutcome execute(const ExecutionRequest& req) const override;
};

// Seeded defects for oracle validation.
//
// stale-output-cursor: when the output tensor is stored compressed
// (COO/CSR/CSC) the insertion cursor into the output's coordinate array is
// not reset between reduction sweeps, so a cell keeps the first nonzero
// contribution it ever saw instead of the accumulated sum. Dense outputs are
// untouched and execute correctly.
//
// crash-on-rank3: aborts when any rank>=3 term is stored compressed. Dense
// rank-3 kernels pass, so the crash surfaces on format mutants — the pattern
// that separates a crash bug from a plain unsupported input.
//
// crash-on-coo: aborts whenever any term is tagged COO, regardless of rank.
enum class Fault { StaleOutputCursor, CrashOnRank3, CrashOnCoo };

std::string_view fault_name(Fault f);
std::optional<Fault> fault_from_name(std::string_view name);

class FaultyBackend final : public Backend {
 public:
  explicit FaultyBackend(std::set<Fault> faults) : faults_(std::move(faults)) {}

  std::string id() const override;
  ExecutionOutcome execute(const ExecutionRequest& req) const override;

 private:
  std::set<Fault> faults_;
};

// Adapter protocol: the request document is written to the adapter's stdin;
// the adapter answers on stdout with exactly one of
//
//   {"status":"ok","output":{"coords":[[..],..],"values":[..]}}
//   {"status":"rejected","message":"<text>"}
//
// and exits 0. Output coords must be sorted row-major with no duplicates and
// no explicit zeros. Any other exit status, a signal, or malformed stdout is
// Crashed; running past the timeout is TimedOut (the process group is
// killed). A command that cannot be spawned at all throws BackendConfigError
// — that is a harness problem, not a compiler bug.
class SubprocessBackend final : public Backend {
 public:
  explicit SubprocessBackend(std::string command);

  std::string id() const override { return "cmd:" + command_; }
  ExecutionOutcome execute(const ExecutionRequest& req) const override;

 private:
  std::string command_;
};

// "ref" | "faulty:<fault>[,<fault>...]" | "cmd:<shell command>".
// Throws BackendConfigError on anything else.
std::unique_ptr<Backend> make_backend(std::string_view spec);

enum class Dialect { TacoCpp, FinchJulia };

std::optional<Dialect> dialect_from_name(std::string_view name);

// Deterministic source text for the kernel document in the named dialect:
// tensor declarations with the assigned formats, coordinate data, the einsum
// expression, and a print loop emitting sorted coordinate/value pairs.
// Compiling the text is an adapter's job, not ours. Throws FormatError when
// the dialect cannot express a format/rank combination.
std::string emit_source(const nlohmann::json& kernel_doc, Dialect dialect);

}  // namespace einfuzz
