#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "einfuzz/ir.hpp"
#include "einfuzz/rng.hpp"

namespace einfuzz {

// How a mutant was derived from its parent: the operand permutation plus the
// full format assignment. Enough to rebuild the mutant kernel exactly, which
// is what bug-report replay does.
struct MutationProvenance {
  std::vector<int> perm;                          // parent input i -> slot perm[i]? no: new order
  std::map<std::string, StorageFormat> formats;   // term name -> format

  bool operator==(const MutationProvenance&) const = default;
};

// A semantically equivalent kernel variant. Only the input order and the
// format tags may differ from the parent; index lists, dims, dtype and the
// name->data binding are untouched, which is what makes output divergence a
// compiler fault rather than a test artifact.
struct Mutant {
  EinsumKernel kernel;
  MutationProvenance provenance;
  std::string parent_id;  // canonical rendered form of the parent
};

// Reorders the inputs: new_inputs[i] = inputs[perm[i]]. Multiplication over a
// commutative ring, so the result is provably unchanged. Throws
// std::invalid_argument unless perm is a permutation of 0..N-1.
Mutant mutate_commute(const EinsumKernel& kernel, std::span<const int> perm);

// Retags storage formats by term name (partial maps fine, unknown names and
// rank-inapplicable formats throw FormatError / std::invalid_argument).
Mutant mutate_formats(const EinsumKernel& kernel,
                      const std::map<std::string, StorageFormat>& assignment);

// Rebuild a mutant from recorded provenance (commute then retag).
Mutant apply_provenance(const EinsumKernel& parent,
                        const MutationProvenance& provenance);

// Up to `budget` distinct points from the composed space
// permutations x applicable format assignments, uniformly without
// replacement, never including the parent's own configuration. When the
// space minus the parent is no bigger than the budget the whole space comes
// back. Deterministic given the rng state. Throws when budget == 0.
std::vector<Mutant> sample_mutants(const EinsumKernel& kernel,
                                   std::size_t budget, Rng& rng);

}  // namespace einfuzz
