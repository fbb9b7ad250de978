#pragma once

#include <map>
#include <string>

#include "json.hpp"

#include "einfuzz/ir.hpp"
#include "einfuzz/tensor.hpp"

namespace einfuzz {

struct KernelBundle {
  EinsumKernel kernel;
  std::map<std::string, TensorData> inputs;
};

// The single document every backend speaks. Layout:
//
//   {
//     "version": 1,
//     "dtype": "int" | "float",
//     "kernel": {
//       "output": {"name": "A", "indices": ["j"], "format": "dense"},
//       "inputs": [{"name": "B", "indices": ["i","j"], "format": "csr"}, ...]
//     },
//     "dims": {"i": 3, "j": 3},
//     "tensors": {"B": {"coords": [[0,1],...], "values": [4,...]}, ...}
//   }
//
// Tensor data travels as sorted coordinate lists (row-major lexicographic,
// no duplicates, no explicit zeros) regardless of the format tag — the tag
// tells the backend how to STORE the tensor, never how it is serialized.
// Int values are JSON integers within the 53-bit-safe range; Float values
// are JSON numbers.

// Requires a validated kernel and one TensorData per input term with a
// matching shape; throws std::invalid_argument otherwise.
nlohmann::json kernel_to_json(const EinsumKernel& kernel,
                              const std::map<std::string, TensorData>& inputs);

// Inverse of kernel_to_json. Structural only: the returned kernel may still
// fail validate() (that is cmd_validate's job). Throws SchemaError naming the
// offending field, or ShapeMismatchError when a coordinate exceeds dims.
KernelBundle kernel_from_json(const nlohmann::json& doc);

// Coordinate/value pair serialization shared with the adapter wire protocol.
nlohmann::json tensor_to_json(const TensorData& t, Dtype dtype);
TensorData tensor_from_json(const nlohmann::json& node,
                            const std::vector<std::int64_t>& shape,
                            Dtype dtype, const std::string& what);

}  // namespace einfuzz
