#include "einfuzz/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "einfuzz/errors.hpp"

namespace einfuzz {

bool coord_less(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

namespace {

std::string coord_string(std::span<const std::int64_t> coord) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < coord.size(); ++i) {
    if (i > 0) os << ',';
    os << coord[i];
  }
  os << ')';
  return os.str();
}

std::int64_t checked_cell_count(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor extents must be positive");
    n *= d;
  }
  return n;
}

}  // namespace

TensorData::TensorData(std::vector<std::int64_t> shape,
                       std::vector<TensorEntry> entries)
    : shape_(std::move(shape)), entries_(std::move(entries)) {
  checked_cell_count(shape_);
  const TensorEntry* prev = nullptr;
  for (const TensorEntry& e : entries_) {
    if (e.coord.size() != shape_.size()) {
      throw std::invalid_argument("coordinate arity does not match tensor rank");
    }
    for (std::size_t d = 0; d < shape_.size(); ++d) {
      if (e.coord[d] < 0 || e.coord[d] >= shape_[d]) {
        throw std::invalid_argument("coordinate " + coord_string(e.coord) +
                                    " outside tensor shape");
      }
    }
    if (e.value == 0.0) {
      throw std::invalid_argument("explicit zero at " + coord_string(e.coord));
    }
    if (prev != nullptr && !coord_less(prev->coord, e.coord)) {
      throw std::invalid_argument("coordinates not strictly increasing at " +
                                  coord_string(e.coord));
    }
    prev = &e;
  }
}

TensorData TensorData::from_dense(std::vector<std::int64_t> shape,
                                  std::span<const double> values) {
  const std::int64_t cells = checked_cell_count(shape);
  if (static_cast<std::int64_t>(values.size()) != cells) {
    throw std::invalid_argument("dense value count does not match shape");
  }
  std::vector<TensorEntry> entries;
  std::vector<std::int64_t> coord(shape.size(), 0);
  for (std::int64_t flat = 0; flat < cells; ++flat) {
    if (values[static_cast<std::size_t>(flat)] != 0.0) {
      entries.push_back({coord, values[static_cast<std::size_t>(flat)]});
    }
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++coord[d] < shape[d]) break;
      coord[d] = 0;
    }
  }
  return TensorData(std::move(shape), std::move(entries));
}

std::int64_t TensorData::cell_count() const { return checked_cell_count(shape_); }

std::vector<double> TensorData::to_dense() const {
  std::vector<double> out(static_cast<std::size_t>(cell_count()), 0.0);
  for (const TensorEntry& e : entries_) {
    std::int64_t flat = 0;
    for (std::size_t d = 0; d < shape_.size(); ++d) {
      flat = flat * shape_[d] + e.coord[d];
    }
    out[static_cast<std::size_t>(flat)] = e.value;
  }
  return out;
}

StorageFormat StoredTensor::format() const {
  switch (payload_.index()) {
    case 0: return StorageFormat::Dense;
    case 1: return StorageFormat::Coo;
    case 2: return StorageFormat::Csr;
    default: return StorageFormat::Csc;
  }
}

std::size_t StoredTensor::nnz() const {
  return std::visit(
      [](const auto& p) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, DensePayload>) {
          return static_cast<std::size_t>(
              std::count_if(p.values.begin(), p.values.end(),
                            [](double v) { return v != 0.0; }));
        } else {
          return p.values.size();
        }
      },
      payload());
}

StoredTensor store(const TensorData& t, StorageFormat f) {
  if (!format_applicable(f, t.rank())) {
    std::ostringstream os;
    os << "format " << format_name(f) << " not applicable to rank " << t.rank();
    throw FormatError(os.str());
  }
  switch (f) {
    case StorageFormat::Dense:
      return StoredTensor(t.shape(), DensePayload{t.to_dense()});

    case StorageFormat::Coo: {
      CooPayload p;
      p.coords.resize(t.rank());
      for (const TensorEntry& e : t.entries()) {
        for (std::size_t d = 0; d < t.rank(); ++d) p.coords[d].push_back(e.coord[d]);
        p.values.push_back(e.value);
      }
      return StoredTensor(t.shape(), std::move(p));
    }

    case StorageFormat::Csr: {
      CsrPayload p;
      const std::int64_t rows = t.shape()[0];
      p.pos.assign(static_cast<std::size_t>(rows) + 1, 0);
      // entries are row-major sorted already: row segments come out in order
      for (const TensorEntry& e : t.entries()) {
        ++p.pos[static_cast<std::size_t>(e.coord[0]) + 1];
        p.crd.push_back(e.coord[1]);
        p.values.push_back(e.value);
      }
      for (std::size_t r = 1; r < p.pos.size(); ++r) p.pos[r] += p.pos[r - 1];
      return StoredTensor(t.shape(), std::move(p));
    }

    case StorageFormat::Csc: {
      CscPayload p;
      const std::int64_t cols = t.shape()[1];
      std::vector<TensorEntry> by_col = t.entries();
      std::stable_sort(by_col.begin(), by_col.end(),
                       [](const TensorEntry& a, const TensorEntry& b) {
                         if (a.coord[1] != b.coord[1]) return a.coord[1] < b.coord[1];
                         return a.coord[0] < b.coord[0];
                       });
      p.pos.assign(static_cast<std::size_t>(cols) + 1, 0);
      for (const TensorEntry& e : by_col) {
        ++p.pos[static_cast<std::size_t>(e.coord[1]) + 1];
        p.crd.push_back(e.coord[0]);
        p.values.push_back(e.value);
      }
      for (std::size_t c = 1; c < p.pos.size(); ++c) p.pos[c] += p.pos[c - 1];
      return StoredTensor(t.shape(), std::move(p));
    }
  }
  throw FormatError("unknown storage format");
}

namespace {

void check_compressed(const std::vector<std::int64_t>& pos,
                      const std::vector<std::int64_t>& crd,
                      const std::vector<double>& values,
                      std::int64_t segments, std::int64_t crd_bound) {
  if (pos.size() != static_cast<std::size_t>(segments) + 1) {
    throw CorruptPayloadError("pos length does not match dimension");
  }
  if (pos.front() != 0) throw CorruptPayloadError("pos[0] must be 0");
  if (pos.back() != static_cast<std::int64_t>(values.size()) ||
      crd.size() != values.size()) {
    throw CorruptPayloadError("pos[last]/crd/values lengths disagree");
  }
  for (std::size_t k = 1; k < pos.size(); ++k) {
    if (pos[k] < pos[k - 1]) throw CorruptPayloadError("pos not non-decreasing");
  }
  for (std::size_t seg = 0; seg + 1 < pos.size(); ++seg) {
    for (std::int64_t k = pos[seg]; k < pos[seg + 1]; ++k) {
      const std::int64_t c = crd[static_cast<std::size_t>(k)];
      if (c < 0 || c >= crd_bound) throw CorruptPayloadError("crd out of bounds");
      if (k > pos[seg] && crd[static_cast<std::size_t>(k) - 1] >= c) {
        throw CorruptPayloadError("crd not strictly increasing within segment");
      }
    }
  }
  for (double v : values) {
    if (v == 0.0) throw CorruptPayloadError("explicit zero stored");
  }
}

TensorData entries_to_tensor(std::vector<std::int64_t> shape,
                             std::vector<TensorEntry> entries) {
  try {
    return TensorData(std::move(shape), std::move(entries));
  } catch (const std::invalid_argument& e) {
    throw CorruptPayloadError(e.what());
  }
}

}  // namespace

TensorData materialize(const StoredTensor& s) {
  const auto& shape = s.shape();
  return std::visit(
      [&](const auto& p) -> TensorData {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, DensePayload>) {
          std::int64_t cells = 1;
          for (std::int64_t d : shape) cells *= d;
          if (static_cast<std::int64_t>(p.values.size()) != cells) {
            throw CorruptPayloadError("dense value count does not match shape");
          }
          return TensorData::from_dense(shape, p.values);
        } else if constexpr (std::is_same_v<P, CooPayload>) {
          if (p.coords.size() != shape.size()) {
            throw CorruptPayloadError("coordinate array count does not match rank");
          }
          for (const auto& axis : p.coords) {
            if (axis.size() != p.values.size()) {
              throw CorruptPayloadError("coordinate/value lengths disagree");
            }
          }
          std::vector<TensorEntry> entries;
          entries.reserve(p.values.size());
          for (std::size_t k = 0; k < p.values.size(); ++k) {
            TensorEntry e;
            e.coord.reserve(shape.size());
            for (std::size_t d = 0; d < shape.size(); ++d) {
              e.coord.push_back(p.coords[d][k]);
            }
            e.value = p.values[k];
            entries.push_back(std::move(e));
          }
          return entries_to_tensor(shape, std::move(entries));
        } else if constexpr (std::is_same_v<P, CsrPayload>) {
          if (shape.size() != 2) throw CorruptPayloadError("csr payload on rank != 2");
          check_compressed(p.pos, p.crd, p.values, shape[0], shape[1]);
          std::vector<TensorEntry> entries;
          entries.reserve(p.values.size());
          for (std::int64_t r = 0; r < shape[0]; ++r) {
            for (std::int64_t k = p.pos[static_cast<std::size_t>(r)];
                 k < p.pos[static_cast<std::size_t>(r) + 1]; ++k) {
              entries.push_back({{r, p.crd[static_cast<std::size_t>(k)]},
                                 p.values[static_cast<std::size_t>(k)]});
            }
          }
          return entries_to_tensor(shape, std::move(entries));
        } else {
          if (shape.size() != 2) throw CorruptPayloadError("csc payload on rank != 2");
          check_compressed(p.pos, p.crd, p.values, shape[1], shape[0]);
          std::vector<TensorEntry> entries;
          entries.reserve(p.values.size());
          for (std::int64_t c = 0; c < shape[1]; ++c) {
            for (std::int64_t k = p.pos[static_cast<std::size_t>(c)];
                 k < p.pos[static_cast<std::size_t>(c) + 1]; ++k) {
              entries.push_back({{p.crd[static_cast<std::size_t>(k)], c},
                                 p.values[static_cast<std::size_t>(k)]});
            }
          }
          std::sort(entries.begin(), entries.end(),
                    [](const TensorEntry& a, const TensorEntry& b) {
                      return coord_less(a.coord, b.coord);
                    });
          return entries_to_tensor(shape, std::move(entries));
        }
      },
      s.payload());
}

}  // namespace einfuzz
