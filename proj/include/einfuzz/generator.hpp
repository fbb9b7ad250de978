#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "einfuzz/ir.hpp"
#include "einfuzz/rng.hpp"
#include "einfuzz/tensor.hpp"

namespace einfuzz {

// Knobs for constraint-based kernel synthesis. Defaults are desk scale on
// purpose: small dims keep the dense oracle cheap and keep Int accumulations
// far inside the 53-bit-exact range.
struct GenConfig {
  std::uint64_t seed = 0;

  int min_inputs = 2;
  int max_inputs = 4;
  int r_max = 3;       // max rank per tensor
  int pool_size = 5;   // candidate indices: 'a', 'b', ...
  std::int64_t dim_min = 2;
  std::int64_t dim_max = 5;
  double density_min = 0.3;  // nonzero fraction, drawn per tensor
  double density_max = 0.8;
  Dtype dtype = Dtype::Int;
  std::int64_t int_bound = 3;    // Int values in [-int_bound, int_bound] \ {0}
  double float_bound = 1.0;      // Float values in [-float_bound, float_bound]
  double output_keep_prob = 0.5; // chance a used index survives into the output
  int output_rank_cap = 0;       // 0 means "same as r_max"

  int effective_output_cap() const {
    return output_rank_cap > 0 ? output_rank_cap : r_max;
  }

  // Throws std::invalid_argument on empty ranges, r_max > pool_size,
  // density outside (0,1], pool_size > 26, or keep prob outside [0,1].
  void check() const;
};

// Constraint-based synthesis of a kernel that validates by construction:
//
//   1. draw the input count N;
//   2. per input, draw a rank in [1, r_max] and that many distinct indices
//      from the pool;
//   3. partition the used indices into output set and contraction set (each
//      index kept with output_keep_prob; the partition is re-drawn when the
//      output rank cap is exceeded);
//   4. connectivity repair: a contraction index living in a single input is
//      injected into another input that lacks it and has spare rank; with no
//      such input it moves to the output set, or — when even that would bust
//      the output cap — is dropped from its term so every rank bound holds;
//   5. output index order is a uniform permutation of the output set;
//   6. every index gets an extent from dim_range, every term a uniformly
//      random format applicable to its rank.
//
// Total: no rejection sampling, no failure mode. Deterministic in (cfg, rng).
EinsumKernel generate_kernel(const GenConfig& cfg, Rng& rng);

// One TensorData per input term, shaped by the kernel's dims. Each tensor
// draws its density from the configured range, then fills cells i.i.d.;
// values are uniform over [-bound, bound] minus zero.
std::map<std::string, TensorData> generate_inputs(const EinsumKernel& kernel,
                                                  const GenConfig& cfg,
                                                  Rng& rng);

// Name scheme used by the generator: output "A", inputs "B", "C", ...
// wrapping into "B1", "C1", ... if anyone ever asks for >25 inputs.
std::string input_name(std::size_t index);

}  // namespace einfuzz
