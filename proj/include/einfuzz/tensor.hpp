#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "einfuzz/ir.hpp"

namespace einfuzz {

struct TensorEntry {
  std::vector<std::int64_t> coord;
  double value;

  bool operator==(const TensorEntry&) const = default;
};

// Row-major lexicographic order on coordinate tuples of equal rank.
bool coord_less(std::span<const std::int64_t> a, std::span<const std::int64_t> b);

// A concrete tensor instance, independent of any storage format: a shape and
// a sorted list of (coordinate, nonzero value) pairs. Zeros are never stored;
// rank 0 (shape {}) is a scalar with at most one entry at the empty
// coordinate. Construction enforces the invariants.
class TensorData {
 public:
  TensorData() = default;  // scalar zero
  TensorData(std::vector<std::int64_t> shape, std::vector<TensorEntry> entries);

  static TensorData from_dense(std::vector<std::int64_t> shape,
                               std::span<const double> values);

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t nnz() const { return entries_.size(); }
  const std::vector<TensorEntry>& entries() const { return entries_; }

  std::int64_t cell_count() const;
  std::vector<double> to_dense() const;  // flat row-major

  bool operator==(const TensorData&) const = default;

 private:
  std::vector<std::int64_t> shape_;
  std::vector<TensorEntry> entries_;
};

// Format-specific payloads. pos/crd follow the usual compressed-level naming:
// pos[k]..pos[k+1] delimits segment k of crd, crd strictly increasing within
// each segment.

struct DensePayload {
  std::vector<double> values;  // flat row-major, zeros included
};

struct CooPayload {
  std::vector<std::vector<std::int64_t>> coords;  // one array per dimension
  std::vector<double> values;                     // row-major sorted
};

struct CsrPayload {
  std::vector<std::int64_t> pos;  // length rows+1
  std::vector<std::int64_t> crd;  // column of each stored value
  std::vector<double> values;
};

struct CscPayload {
  std::vector<std::int64_t> pos;  // length cols+1
  std::vector<std::int64_t> crd;  // row of each stored value
  std::vector<double> values;
};

using StoragePayload =
    std::variant<DensePayload, CooPayload, CsrPayload, CscPayload>;

class StoredTensor {
 public:
  StoredTensor(std::vector<std::int64_t> shape, StoragePayload payload)
      : shape_(std::move(shape)), payload_(std::move(payload)) {}

  StorageFormat format() const;
  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t nnz() const;
  const StoragePayload& payload() const { return payload_; }

 private:
  std::vector<std::int64_t> shape_;
  StoragePayload payload_;
};

// Lossless conversion into the requested format. Throws FormatError when the
// format cannot represent the tensor's rank (CSR/CSC need rank 2, COO needs
// rank >= 1).
StoredTensor store(const TensorData& t, StorageFormat f);

// Exact inverse of store. Throws CorruptPayloadError when the payload arrays
// violate their invariants (non-monotone pos, out-of-bounds or unsorted crd,
// explicit zeros, length mismatches).
TensorData materialize(const StoredTensor& s);

}  // namespace einfuzz
