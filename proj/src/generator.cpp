#include "einfuzz/generator.hpp"

#include <algorithm>
#include <stdexcept>

namespace einfuzz {

void GenConfig::check() const {
  if (min_inputs < 1 || max_inputs < min_inputs) {
    throw std::invalid_argument("num_inputs range is empty");
  }
  if (r_max < 1) throw std::invalid_argument("r_max must be at least 1");
  if (pool_size < r_max) throw std::invalid_argument("pool_size must be >= r_max");
  if (pool_size > 26) throw std::invalid_argument("pool_size exceeds the alphabet");
  if (dim_min < 1 || dim_max < dim_min) {
    throw std::invalid_argument("dim range is empty");
  }
  if (!(density_min > 0.0) || density_min > density_max || density_max > 1.0) {
    throw std::invalid_argument("density must lie within (0, 1]");
  }
  if (int_bound < 1) throw std::invalid_argument("int_bound must be at least 1");
  if (!(float_bound > 0.0)) throw std::invalid_argument("float_bound must be positive");
  if (output_keep_prob < 0.0 || output_keep_prob > 1.0) {
    throw std::invalid_argument("output_keep_prob must lie within [0, 1]");
  }
  if (output_rank_cap < 0) throw std::invalid_argument("output_rank_cap must be >= 0");
}

std::string input_name(std::size_t index) {
  const char letter = static_cast<char>('B' + index % 25);
  const std::size_t round = index / 25;
  std::string name(1, letter);
  if (round > 0) name += std::to_string(round);
  return name;
}

namespace {

// First r elements of a partial Fisher-Yates shuffle: r distinct picks.
std::vector<IndexVar> sample_distinct(std::vector<IndexVar> pool, std::size_t r,
                                      Rng& rng) {
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(r);
  return pool;
}

}  // namespace

EinsumKernel generate_kernel(const GenConfig& cfg, Rng& rng) {
  cfg.check();

  std::vector<IndexVar> pool;
  for (int i = 0; i < cfg.pool_size; ++i) pool.emplace_back(static_cast<char>('a' + i));

  EinsumKernel kernel;
  kernel.dtype = cfg.dtype;

  const int n = static_cast<int>(rng.range(cfg.min_inputs, cfg.max_inputs));
  for (int i = 0; i < n; ++i) {
    TensorTerm term;
    term.name = input_name(static_cast<std::size_t>(i));
    const auto rank = static_cast<std::size_t>(rng.range(1, cfg.r_max));
    term.indices = sample_distinct(pool, rank, rng);
    kernel.inputs.push_back(std::move(term));
  }

  std::vector<IndexVar> used;
  for (IndexVar v : kernel.input_index_union()) used.push_back(v);

  // Partition into output set and contraction set. The partition is re-drawn
  // while it busts the output rank cap; a degenerate keep probability could
  // spin here, so after enough failures a uniform subset of exactly cap
  // indices is taken instead.
  const auto cap = static_cast<std::size_t>(cfg.effective_output_cap());
  std::vector<IndexVar> out_set;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    out_set.clear();
    for (IndexVar v : used) {
      if (rng.chance(cfg.output_keep_prob)) out_set.push_back(v);
    }
    if (out_set.size() <= cap) break;
    out_set.clear();
  }
  if (out_set.empty() && cap < used.size() && cfg.output_keep_prob >= 1.0) {
    out_set = sample_distinct(used, cap, rng);
  }

  auto in_output = [&](IndexVar v) {
    return std::find(out_set.begin(), out_set.end(), v) != out_set.end();
  };
  std::vector<IndexVar> contraction;
  for (IndexVar v : used) {
    if (!in_output(v)) contraction.push_back(v);
  }

  // Connectivity repair. Single-input kernels are pure reductions and need
  // none. Preference order: inject into an input with spare rank, then move
  // into the output set, then drop the index from its only term so no rank
  // bound is ever exceeded.
  if (n >= 2) {
    for (IndexVar s : contraction) {
      if (kernel.input_occurrences(s) >= 2) continue;

      std::vector<std::size_t> candidates;
      for (std::size_t t = 0; t < kernel.inputs.size(); ++t) {
        if (!kernel.inputs[t].has_index(s) &&
            kernel.inputs[t].rank() < static_cast<std::size_t>(cfg.r_max)) {
          candidates.push_back(t);
        }
      }
      if (!candidates.empty()) {
        TensorTerm& target =
            kernel.inputs[candidates[static_cast<std::size_t>(rng.below(candidates.size()))]];
        const auto at = static_cast<std::size_t>(rng.below(target.indices.size() + 1));
        target.indices.insert(target.indices.begin() + static_cast<std::ptrdiff_t>(at), s);
      } else if (out_set.size() < cap) {
        out_set.push_back(s);
      } else {
        for (TensorTerm& term : kernel.inputs) {
          std::erase(term.indices, s);
        }
        std::erase(used, s);
      }
    }
  }

  rng.shuffle(out_set);
  kernel.output.name = "A";
  kernel.output.indices = out_set;

  for (IndexVar v : used) {
    kernel.dims[v] = rng.range(cfg.dim_min, cfg.dim_max);
  }

  kernel.output.format = rng.pick(applicable_formats(kernel.output.rank()));
  for (TensorTerm& term : kernel.inputs) {
    term.format = rng.pick(applicable_formats(term.rank()));
  }

  return kernel;
}

std::map<std::string, TensorData> generate_inputs(const EinsumKernel& kernel,
                                                  const GenConfig& cfg, Rng& rng) {
  cfg.check();
  std::map<std::string, TensorData> out;
  for (const TensorTerm& term : kernel.inputs) {
    const std::vector<std::int64_t> shape = kernel.term_shape(term);
    std::int64_t cells = 1;
    for (std::int64_t d : shape) cells *= d;

    const double density = rng.real(cfg.density_min, cfg.density_max);
    std::vector<TensorEntry> entries;
    std::vector<std::int64_t> coord(shape.size(), 0);
    for (std::int64_t flat = 0; flat < cells; ++flat) {
      if (rng.chance(density)) {
        double value;
        if (cfg.dtype == Dtype::Int) {
          // uniform over [-bound, -1] ∪ [1, bound]
          const auto k = static_cast<std::int64_t>(
              rng.below(static_cast<std::uint64_t>(2 * cfg.int_bound)));
          value = static_cast<double>(k < cfg.int_bound ? k - cfg.int_bound
                                                        : k - cfg.int_bound + 1);
        } else {
          do {
            value = rng.real(-cfg.float_bound, cfg.float_bound);
          } while (value == 0.0);
        }
        entries.push_back({coord, value});
      }
      for (std::size_t d = shape.size(); d-- > 0;) {
        if (++coord[d] < shape[d]) break;
        coord[d] = 0;
      }
    }
    out.emplace(term.name, TensorData(shape, std::move(entries)));
  }
  return out;
}

}  // namespace einfuzz
