#include "einfuzz/grammar.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

#include "einfuzz/errors.hpp"

namespace einfuzz {

void CfgConfig::check() const {
  if (max_terms < 1) throw std::invalid_argument("max_terms must be positive");
  if (max_rank < 1) throw std::invalid_argument("max_rank must be positive");
  if (alphabet_size < 1 || alphabet_size > 26) {
    throw std::invalid_argument("alphabet_size must lie within [1, 26]");
  }
  if (shape_min < 1 || shape_max < shape_min) {
    throw std::invalid_argument("shape range is empty");
  }
}

CfgSample cfg_generate(const CfgConfig& cfg, Rng& rng) {
  cfg.check();

  const auto draw_term = [&](std::ostringstream& os, const std::string& name,
                             int rank, CfgSample& sample) {
    os << name << '(';
    for (int d = 0; d < rank; ++d) {
      if (d > 0) os << ',';
      os << static_cast<char>('a' + rng.below(static_cast<std::uint64_t>(cfg.alphabet_size)));
    }
    os << ')';
    std::vector<std::int64_t> shape;
    for (int d = 0; d < rank; ++d) shape.push_back(rng.range(cfg.shape_min, cfg.shape_max));
    sample.shapes.push_back(std::move(shape));
  };

  CfgSample sample;
  std::ostringstream os;
  const int n = static_cast<int>(rng.range(1, cfg.max_terms));
  draw_term(os, "A", static_cast<int>(rng.range(0, cfg.max_rank)), sample);
  os << " = ";
  for (int i = 0; i < n; ++i) {
    if (i > 0) os << " * ";
    draw_term(os, input_name(static_cast<std::size_t>(i)),
              static_cast<int>(rng.range(1, cfg.max_rank)), sample);
  }
  sample.text = os.str();
  return sample;
}

std::string_view validity_outcome_name(ValidityOutcome o) {
  switch (o) {
    case ValidityOutcome::Valid: return "valid";
    case ValidityOutcome::ParseError: return "parse_error";
    case ValidityOutcome::OutputIndexViolation: return "output_index";
    case ValidityOutcome::ConnectivityViolation: return "connectivity";
    case ValidityOutcome::DimensionInconsistency: return "dimension";
  }
  return "valid";
}

ValidityOutcome semantic_check(std::string_view text,
                               const std::vector<std::vector<std::int64_t>>& shapes) {
  EinsumKernel kernel;
  try {
    kernel = parse(text);
  } catch (const ParseError&) {
    return ValidityOutcome::ParseError;
  }

  const std::set<IndexVar> in_union = kernel.input_index_union();
  for (IndexVar v : kernel.output.indices) {
    if (!in_union.contains(v)) return ValidityOutcome::OutputIndexViolation;
  }

  if (kernel.inputs.size() >= 2) {
    for (IndexVar v : kernel.contraction_indices()) {
      if (kernel.input_occurrences(v) < 2) {
        return ValidityOutcome::ConnectivityViolation;
      }
    }
  }

  // Dimension phase: term arity against the shape list, repeated letters
  // inside one term (a diagonal access the kernel language rejects), and
  // extent agreement across every occurrence of a letter.
  std::vector<const TensorTerm*> terms{&kernel.output};
  for (const TensorTerm& t : kernel.inputs) terms.push_back(&t);
  if (shapes.size() != terms.size()) return ValidityOutcome::DimensionInconsistency;

  std::map<IndexVar, std::int64_t> extent;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    if (shapes[t].size() != terms[t]->rank()) {
      return ValidityOutcome::DimensionInconsistency;
    }
    for (std::size_t a = 0; a < terms[t]->indices.size(); ++a) {
      for (std::size_t b = a + 1; b < terms[t]->indices.size(); ++b) {
        if (terms[t]->indices[a] == terms[t]->indices[b]) {
          return ValidityOutcome::DimensionInconsistency;
        }
      }
      auto [it, inserted] = extent.emplace(terms[t]->indices[a], shapes[t][a]);
      if (!inserted && it->second != shapes[t][a]) {
        return ValidityOutcome::DimensionInconsistency;
      }
    }
  }

  return ValidityOutcome::Valid;
}

void ValidityStats::record(ValidityOutcome o) {
  ++n;
  switch (o) {
    case ValidityOutcome::Valid: ++valid; break;
    case ValidityOutcome::ParseError: ++parse_error; break;
    case ValidityOutcome::OutputIndexViolation: ++output_index; break;
    case ValidityOutcome::ConnectivityViolation: ++connectivity; break;
    case ValidityOutcome::DimensionInconsistency: ++dimension; break;
  }
}

nlohmann::json ValidityStats::to_json() const {
  return {{"n", n},
          {"valid", valid},
          {"parse_error", parse_error},
          {"output_index", output_index},
          {"connectivity", connectivity},
          {"dimension", dimension},
          {"validity_rate", validity_rate()}};
}

ValidityStats run_validity_experiment(const CfgConfig& cfg, std::uint64_t n) {
  cfg.check();
  if (n == 0) throw std::invalid_argument("sample count must be positive");
  ValidityStats stats;
  for (std::uint64_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(cfg.seed, i));
    const CfgSample sample = cfg_generate(cfg, rng);
    stats.record(semantic_check(sample.text, sample.shapes));
  }
  return stats;
}

ValidityStats run_constraint_validity_experiment(const GenConfig& cfg,
                                                 std::uint64_t n) {
  cfg.check();
  if (n == 0) throw std::invalid_argument("sample count must be positive");
  ValidityStats stats;
  for (std::uint64_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(cfg.seed, i));
    const EinsumKernel kernel = generate_kernel(cfg, rng);
    std::vector<std::vector<std::int64_t>> shapes{kernel.term_shape(kernel.output)};
    for (const TensorTerm& t : kernel.inputs) shapes.push_back(kernel.term_shape(t));
    stats.record(semantic_check(render(kernel), shapes));
  }
  return stats;
}

}  // namespace einfuzz
