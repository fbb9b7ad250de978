#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "einfuzz/generator.hpp"
#include "einfuzz/rng.hpp"

namespace einfuzz {

// Baseline generator: a context-free random walk over the einsum grammar.
// Every index slot draws its letter independently and every tensor its shape
// independently — exactly the cross-reference blindness a CFG cannot avoid.
struct CfgConfig {
  std::uint64_t seed = 0;
  int max_terms = 4;      // input terms, drawn from [1, max_terms]
  int max_rank = 3;       // inputs draw rank from [1, max_rank], output from [0, max_rank]
  int alphabet_size = 8;  // letters 'a'.. sampled per slot
  std::int64_t shape_min = 2;
  std::int64_t shape_max = 5;

  void check() const;  // throws std::invalid_argument
};

struct CfgSample {
  std::string text;
  // Shapes per tensor in text order: output first, then each input.
  std::vector<std::vector<std::int64_t>> shapes;
};

// Always syntactically derivable from the grammar; semantic validity is the
// coin toss being measured. Tensor names are sequential (A, B, C, ...) so
// every failure is an index/shape failure, not a name clash.
CfgSample cfg_generate(const CfgConfig& cfg, Rng& rng);

enum class ValidityOutcome {
  Valid,
  ParseError,
  OutputIndexViolation,
  ConnectivityViolation,
  DimensionInconsistency,
};

std::string_view validity_outcome_name(ValidityOutcome o);

// Fixed rule order: parse, then the output-index rule, then connectivity,
// then dimension consistency (same index -> same extent at every occurrence
// across all tensors; a repeated index inside one term also lands here, as
// does an arity mismatch between a term and its shape). First broken rule
// wins, so outcome histograms are stable.
ValidityOutcome semantic_check(std::string_view text,
                               const std::vector<std::vector<std::int64_t>>& shapes);

struct ValidityStats {
  std::uint64_t n = 0;
  std::uint64_t valid = 0;
  std::uint64_t parse_error = 0;
  std::uint64_t output_index = 0;
  std::uint64_t connectivity = 0;
  std::uint64_t dimension = 0;

  double validity_rate() const {
    return n == 0 ? 0.0 : static_cast<double>(valid) / static_cast<double>(n);
  }
  void record(ValidityOutcome o);
  nlohmann::json to_json() const;
};

// n samples from the CFG through semantic_check. Deterministic per seed.
// Throws std::invalid_argument when n == 0.
ValidityStats run_validity_experiment(const CfgConfig& cfg, std::uint64_t n);

// Same checker fed by the constraint generator (kernels rendered to text,
// shapes taken from dims). The rate here is 1.0 by construction.
ValidityStats run_constraint_validity_experiment(const GenConfig& cfg,
                                                 std::uint64_t n);

}  // namespace einfuzz
