#pragma once

#include <map>
#include <string>

#include "einfuzz/ir.hpp"
#include "einfuzz/tensor.hpp"

namespace einfuzz {

// Trusted oracle: walks the full cartesian index space (row-major over the
// used indices in label order) and accumulates the operand product into the
// output cell. Deliberately naive — generator dims stay small, and a dumb
// engine is the one worth trusting. Bit-deterministic for a given kernel.
//
// Requires validate(kernel).ok and one TensorData per input term whose shape
// matches dims through the term's index list; throws ShapeMismatchError or
// std::invalid_argument otherwise.
TensorData eval_dense(const EinsumKernel& kernel,
                      const std::map<std::string, TensorData>& inputs);

// Format-aware engine: iterates the first operand through its compressed
// structure directly (CSR by row segment, CSC by column segment, COO by
// sorted walk, Dense by flat scan) and resolves the remaining operands with
// format-native point lookups (direct addressing for Dense, binary search on
// pos/crd or sorted coordinates otherwise). Never densifies an operand.
//
// For Int kernels the result equals eval_dense exactly; for Float it agrees
// within comparator tolerance (the accumulation order differs by design, so
// different storage assignments genuinely execute different code paths).
//
// Inputs must arrive in their term's assigned format.
TensorData eval_formatted(const EinsumKernel& kernel,
                          const std::map<std::string, StoredTensor>& stored);

}  // namespace einfuzz
