#include "einfuzz/mutation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "einfuzz/errors.hpp"

namespace einfuzz {

namespace {

std::map<std::string, StorageFormat> current_formats(const EinsumKernel& kernel) {
  std::map<std::string, StorageFormat> formats{{kernel.output.name, kernel.output.format}};
  for (const TensorTerm& t : kernel.inputs) formats.emplace(t.name, t.format);
  return formats;
}

std::vector<int> identity_perm(std::size_t n) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  return perm;
}

}  // namespace

Mutant mutate_commute(const EinsumKernel& kernel, std::span<const int> perm) {
  const std::size_t n = kernel.inputs.size();
  if (perm.size() != n) {
    throw std::invalid_argument("permutation length does not match input count");
  }
  std::vector<bool> seen(n, false);
  for (int p : perm) {
    if (p < 0 || static_cast<std::size_t>(p) >= n || seen[static_cast<std::size_t>(p)]) {
      throw std::invalid_argument("not a permutation of 0.." + std::to_string(n - 1));
    }
    seen[static_cast<std::size_t>(p)] = true;
  }

  Mutant mutant;
  mutant.parent_id = render(kernel);
  mutant.kernel = kernel;
  for (std::size_t i = 0; i < n; ++i) {
    mutant.kernel.inputs[i] = kernel.inputs[static_cast<std::size_t>(perm[i])];
  }
  mutant.provenance.perm.assign(perm.begin(), perm.end());
  mutant.provenance.formats = current_formats(kernel);
  return mutant;
}

Mutant mutate_formats(const EinsumKernel& kernel,
                      const std::map<std::string, StorageFormat>& assignment) {
  Mutant mutant;
  mutant.parent_id = render(kernel);
  mutant.kernel = kernel;

  for (const auto& [name, format] : assignment) {
    TensorTerm* term = nullptr;
    if (mutant.kernel.output.name == name) {
      term = &mutant.kernel.output;
    } else {
      for (TensorTerm& t : mutant.kernel.inputs) {
        if (t.name == name) term = &t;
      }
    }
    if (term == nullptr) {
      throw std::invalid_argument("format assignment names unknown term '" + name + "'");
    }
    if (!format_applicable(format, term->rank())) {
      throw FormatError(std::string("format ") + std::string(format_name(format)) +
                        " not applicable to rank " + std::to_string(term->rank()) +
                        " term " + name);
    }
    term->format = format;
  }

  mutant.provenance.perm = identity_perm(kernel.inputs.size());
  mutant.provenance.formats = current_formats(mutant.kernel);
  return mutant;
}

Mutant apply_provenance(const EinsumKernel& parent,
                        const MutationProvenance& provenance) {
  Mutant commuted = mutate_commute(parent, provenance.perm);
  Mutant mutant = mutate_formats(commuted.kernel, provenance.formats);
  mutant.provenance = provenance;
  mutant.parent_id = render(parent);
  return mutant;
}

namespace {

struct MutationSpace {
  std::vector<std::string> term_names;                    // output first, then inputs
  std::vector<std::vector<StorageFormat>> term_formats;   // applicable per term
  std::vector<int> parent_choice;                         // parent's format positions
};

MutationSpace build_space(const EinsumKernel& kernel) {
  MutationSpace space;
  auto add_term = [&](const TensorTerm& term) {
    space.term_names.push_back(term.name);
    std::vector<StorageFormat> formats = applicable_formats(term.rank());
    const auto it = std::find(formats.begin(), formats.end(), term.format);
    if (it == formats.end()) {
      throw std::invalid_argument("term " + term.name +
                                  " carries a format inapplicable to its rank");
    }
    space.parent_choice.push_back(static_cast<int>(it - formats.begin()));
    space.term_formats.push_back(std::move(formats));
  };
  add_term(kernel.output);
  for (const TensorTerm& t : kernel.inputs) add_term(t);
  return space;
}

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return a * b;
}

MutationProvenance make_provenance(const MutationSpace& space,
                                   const std::vector<int>& perm,
                                   const std::vector<int>& choice) {
  MutationProvenance p;
  p.perm = perm;
  for (std::size_t t = 0; t < space.term_names.size(); ++t) {
    p.formats.emplace(space.term_names[t],
                      space.term_formats[t][static_cast<std::size_t>(choice[t])]);
  }
  return p;
}

}  // namespace

std::vector<Mutant> sample_mutants(const EinsumKernel& kernel, std::size_t budget,
                                   Rng& rng) {
  if (budget == 0) throw std::invalid_argument("mutant budget must be positive");

  const std::size_t n = kernel.inputs.size();
  const MutationSpace space = build_space(kernel);

  std::uint64_t total = 1;
  for (std::size_t i = 2; i <= n; ++i) total = saturating_mul(total, i);
  for (const auto& formats : space.term_formats) {
    total = saturating_mul(total, formats.size());
  }

  const std::vector<int> identity = identity_perm(n);
  // point key = perm followed by per-term format positions
  auto key_of = [&](const std::vector<int>& perm, const std::vector<int>& choice) {
    std::vector<int> key = perm;
    key.insert(key.end(), choice.begin(), choice.end());
    return key;
  };
  const std::vector<int> parent_key = key_of(identity, space.parent_choice);

  std::vector<Mutant> out;

  if (total - 1 <= budget) {
    // The whole space fits in the budget: walk it, skipping the parent.
    std::vector<int> perm = identity;
    do {
      std::vector<int> choice(space.term_names.size(), 0);
      for (;;) {
        if (key_of(perm, choice) != parent_key) {
          out.push_back(apply_provenance(kernel, make_provenance(space, perm, choice)));
        }
        std::size_t t = choice.size();
        while (t > 0) {
          --t;
          if (++choice[t] < static_cast<int>(space.term_formats[t].size())) break;
          choice[t] = 0;
          if (t == 0) goto next_perm;
        }
        if (choice.empty()) break;
      }
    next_perm:;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
  }

  std::set<std::vector<int>> seen{parent_key};
  while (out.size() < budget) {
    std::vector<int> perm = identity;
    rng.shuffle(perm);
    std::vector<int> choice(space.term_names.size());
    for (std::size_t t = 0; t < choice.size(); ++t) {
      choice[t] = static_cast<int>(rng.below(space.term_formats[t].size()));
    }
    if (seen.insert(key_of(perm, choice)).second) {
      out.push_back(apply_provenance(kernel, make_provenance(space, perm, choice)));
    }
  }
  return out;
}

}  // namespace einfuzz
