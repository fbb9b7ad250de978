#include "einfuzz/eval.hpp"

#include <algorithm>
#include <cstddef>
#include <stdexcept>

#include "einfuzz/errors.hpp"

namespace einfuzz {

namespace {

// The iteration universe: every used index in label order, with its extent.
struct AxisSpace {
  std::vector<IndexVar> vars;
  std::vector<std::int64_t> extents;

  std::size_t pos_of(IndexVar v) const {
    return static_cast<std::size_t>(
        std::find(vars.begin(), vars.end(), v) - vars.begin());
  }
};

AxisSpace axis_space(const EinsumKernel& kernel) {
  AxisSpace space;
  for (IndexVar v : kernel.used_indices()) {
    space.vars.push_back(v);
    space.extents.push_back(kernel.dims.at(v));
  }
  return space;
}

void check_kernel(const EinsumKernel& kernel) {
  const ValidationReport report = validate(kernel);
  if (!report.ok) {
    throw std::invalid_argument("kernel invalid: " + report.violations.front());
  }
}

// Mixed-radix increment; returns false after wrapping past the last
// assignment. An empty index vector yields exactly one assignment.
bool advance(std::vector<std::int64_t>& idx, const std::vector<std::int64_t>& ext) {
  for (std::size_t d = idx.size(); d-- > 0;) {
    if (++idx[d] < ext[d]) return true;
    idx[d] = 0;
  }
  return false;
}

// Per-axis strides into a term's flat row-major storage. Axes the term does
// not use get stride 0, so one dot product addresses any operand.
std::vector<std::int64_t> strides_per_axis(const AxisSpace& space,
                                           const TensorTerm& term,
                                           const std::vector<std::int64_t>& shape) {
  std::vector<std::int64_t> strides(space.vars.size(), 0);
  std::int64_t stride = 1;
  for (std::size_t d = term.indices.size(); d-- > 0;) {
    strides[space.pos_of(term.indices[d])] = stride;
    stride *= shape[d];
  }
  return strides;
}

std::int64_t offset_of(const std::vector<std::int64_t>& assignment,
                       const std::vector<std::int64_t>& strides) {
  std::int64_t off = 0;
  for (std::size_t a = 0; a < assignment.size(); ++a) off += assignment[a] * strides[a];
  return off;
}

const TensorData& input_data(const EinsumKernel& kernel, const TensorTerm& term,
                             const std::map<std::string, TensorData>& inputs) {
  auto it = inputs.find(term.name);
  if (it == inputs.end()) {
    throw std::invalid_argument("missing tensor data for input " + term.name);
  }
  if (it->second.shape() != kernel.term_shape(term)) {
    throw ShapeMismatchError("tensor " + term.name + " does not match dims");
  }
  return it->second;
}

}  // namespace

TensorData eval_dense(const EinsumKernel& kernel,
                      const std::map<std::string, TensorData>& inputs) {
  check_kernel(kernel);
  const AxisSpace space = axis_space(kernel);

  std::vector<std::vector<double>> operand_values;
  std::vector<std::vector<std::int64_t>> operand_strides;
  for (const TensorTerm& term : kernel.inputs) {
    const TensorData& data = input_data(kernel, term, inputs);
    operand_values.push_back(data.to_dense());
    operand_strides.push_back(strides_per_axis(space, term, data.shape()));
  }

  const std::vector<std::int64_t> out_shape = kernel.term_shape(kernel.output);
  std::int64_t out_cells = 1;
  for (std::int64_t d : out_shape) out_cells *= d;
  std::vector<double> out(static_cast<std::size_t>(out_cells), 0.0);
  const std::vector<std::int64_t> out_strides =
      strides_per_axis(space, kernel.output, out_shape);

  std::vector<std::int64_t> assignment(space.vars.size(), 0);
  do {
    double prod = 1.0;
    for (std::size_t t = 0; t < operand_values.size(); ++t) {
      prod *= operand_values[t][static_cast<std::size_t>(
          offset_of(assignment, operand_strides[t]))];
    }
    out[static_cast<std::size_t>(offset_of(assignment, out_strides))] += prod;
  } while (advance(assignment, space.extents));

  return TensorData::from_dense(out_shape, out);
}

namespace {

// Format-native views over a StoredTensor: point lookup plus nonzero
// enumeration in whatever order the format makes cheap. Lookups never touch
// a densified copy — CSR/CSC resolve through pos/crd, COO through a binary
// search on the sorted coordinate arrays.
class Accessor {
 public:
  explicit Accessor(const StoredTensor& t) : t_(&t) {}

  double at(std::span<const std::int64_t> coord) const {
    return std::visit([&](const auto& p) { return lookup(p, coord); },
                      t_->payload());
  }

  template <typename Fn>
  void for_each_nonzero(Fn&& fn) const {
    const auto& shape = t_->shape();
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, DensePayload>) {
            std::vector<std::int64_t> coord(shape.size(), 0);
            std::size_t flat = 0;
            do {
              if (p.values[flat] != 0.0) fn(coord, p.values[flat]);
              ++flat;
            } while (advance(coord, shape));
          } else if constexpr (std::is_same_v<P, CooPayload>) {
            std::vector<std::int64_t> coord(shape.size(), 0);
            for (std::size_t k = 0; k < p.values.size(); ++k) {
              for (std::size_t d = 0; d < shape.size(); ++d) coord[d] = p.coords[d][k];
              fn(coord, p.values[k]);
            }
          } else if constexpr (std::is_same_v<P, CsrPayload>) {
            std::vector<std::int64_t> coord(2, 0);
            for (std::int64_t r = 0; r < shape[0]; ++r) {
              for (std::int64_t k = p.pos[static_cast<std::size_t>(r)];
                   k < p.pos[static_cast<std::size_t>(r) + 1]; ++k) {
                coord[0] = r;
                coord[1] = p.crd[static_cast<std::size_t>(k)];
                fn(coord, p.values[static_cast<std::size_t>(k)]);
              }
            }
          } else {
            // column-major sweep: the order CSC hands out for free
            std::vector<std::int64_t> coord(2, 0);
            for (std::int64_t c = 0; c < shape[1]; ++c) {
              for (std::int64_t k = p.pos[static_cast<std::size_t>(c)];
                   k < p.pos[static_cast<std::size_t>(c) + 1]; ++k) {
                coord[0] = p.crd[static_cast<std::size_t>(k)];
                coord[1] = c;
                fn(coord, p.values[static_cast<std::size_t>(k)]);
              }
            }
          }
        },
        t_->payload());
  }

 private:
  double lookup(const DensePayload& p, std::span<const std::int64_t> coord) const {
    std::int64_t flat = 0;
    for (std::size_t d = 0; d < coord.size(); ++d) {
      flat = flat * t_->shape()[d] + coord[d];
    }
    return p.values[static_cast<std::size_t>(flat)];
  }

  double lookup(const CooPayload& p, std::span<const std::int64_t> coord) const {
    std::size_t lo = 0, hi = p.values.size();
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      int cmp = 0;
      for (std::size_t d = 0; d < coord.size(); ++d) {
        const std::int64_t c = p.coords[d][mid];
        if (c != coord[d]) {
          cmp = c < coord[d] ? -1 : 1;
          break;
        }
      }
      if (cmp == 0) return p.values[mid];
      if (cmp < 0) lo = mid + 1; else hi = mid;
    }
    return 0.0;
  }

  double lookup(const CsrPayload& p, std::span<const std::int64_t> coord) const {
    return segment_lookup(p.pos, p.crd, p.values, coord[0], coord[1]);
  }

  double lookup(const CscPayload& p, std::span<const std::int64_t> coord) const {
    return segment_lookup(p.pos, p.crd, p.values, coord[1], coord[0]);
  }

  static double segment_lookup(const std::vector<std::int64_t>& pos,
                               const std::vector<std::int64_t>& crd,
                               const std::vector<double>& values,
                               std::int64_t segment, std::int64_t want) {
    const auto begin = crd.begin() + pos[static_cast<std::size_t>(segment)];
    const auto end = crd.begin() + pos[static_cast<std::size_t>(segment) + 1];
    const auto it = std::lower_bound(begin, end, want);
    if (it == end || *it != want) return 0.0;
    return values[static_cast<std::size_t>(it - crd.begin())];
  }

  const StoredTensor* t_;
};

}  // namespace

TensorData eval_formatted(const EinsumKernel& kernel,
                          const std::map<std::string, StoredTensor>& stored) {
  check_kernel(kernel);
  const AxisSpace space = axis_space(kernel);

  std::vector<const StoredTensor*> operands;
  for (const TensorTerm& term : kernel.inputs) {
    auto it = stored.find(term.name);
    if (it == stored.end()) {
      throw std::invalid_argument("missing stored tensor for input " + term.name);
    }
    if (it->second.shape() != kernel.term_shape(term)) {
      throw ShapeMismatchError("tensor " + term.name + " does not match dims");
    }
    if (it->second.format() != term.format) {
      throw std::invalid_argument("tensor " + term.name +
                                  " not stored in its assigned format");
    }
    operands.push_back(&it->second);
  }

  const std::vector<std::int64_t> out_shape = kernel.term_shape(kernel.output);
  std::int64_t out_cells = 1;
  for (std::int64_t d : out_shape) out_cells *= d;
  std::vector<double> out(static_cast<std::size_t>(out_cells), 0.0);
  const std::vector<std::int64_t> out_strides =
      strides_per_axis(space, kernel.output, out_shape);

  // The first operand drives: its compressed structure is walked natively and
  // binds its own indices. Whatever indices remain get a plain odometer, and
  // the other operands answer point queries. Commuting operands therefore
  // changes which structure drives — a genuinely different execution path.
  const TensorTerm& driver_term = kernel.inputs[0];
  const Accessor driver(*operands[0]);

  std::vector<std::size_t> driver_axis;
  driver_axis.reserve(driver_term.indices.size());
  for (IndexVar v : driver_term.indices) driver_axis.push_back(space.pos_of(v));

  std::vector<std::size_t> free_axis;
  std::vector<std::int64_t> free_extents;
  for (std::size_t a = 0; a < space.vars.size(); ++a) {
    if (!driver_term.has_index(space.vars[a])) {
      free_axis.push_back(a);
      free_extents.push_back(space.extents[a]);
    }
  }

  std::vector<Accessor> others;
  std::vector<std::vector<std::size_t>> other_axis;
  for (std::size_t t = 1; t < operands.size(); ++t) {
    others.emplace_back(*operands[t]);
    std::vector<std::size_t> axes;
    for (IndexVar v : kernel.inputs[t].indices) axes.push_back(space.pos_of(v));
    other_axis.push_back(std::move(axes));
  }

  std::vector<std::int64_t> assignment(space.vars.size(), 0);
  std::vector<std::int64_t> free_idx(free_axis.size(), 0);
  std::vector<std::vector<std::int64_t>> coord_buf(others.size());
  for (std::size_t t = 0; t < others.size(); ++t) {
    coord_buf[t].resize(other_axis[t].size());
  }

  driver.for_each_nonzero([&](const std::vector<std::int64_t>& coord, double v) {
    for (std::size_t j = 0; j < driver_axis.size(); ++j) {
      assignment[driver_axis[j]] = coord[j];
    }
    std::fill(free_idx.begin(), free_idx.end(), 0);
    do {
      for (std::size_t j = 0; j < free_axis.size(); ++j) {
        assignment[free_axis[j]] = free_idx[j];
      }
      double prod = v;
      for (std::size_t t = 0; t < others.size() && prod != 0.0; ++t) {
        for (std::size_t j = 0; j < other_axis[t].size(); ++j) {
          coord_buf[t][j] = assignment[other_axis[t][j]];
        }
        prod *= others[t].at(coord_buf[t]);
      }
      if (prod != 0.0) {
        out[static_cast<std::size_t>(offset_of(assignment, out_strides))] += prod;
      }
    } while (advance(free_idx, free_extents));
  });

  return TensorData::from_dense(out_shape, out);
}

}  // namespace einfuzz
