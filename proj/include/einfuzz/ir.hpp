#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace einfuzz {

// One loop/index symbol. The alphabet is the 26 lowercase letters; generator
// pools are far smaller, so this never constrains anything in practice.
class IndexVar {
 public:
  IndexVar() = default;
  explicit IndexVar(char label);

  char label() const { return label_; }
  auto operator<=>(const IndexVar&) const = default;

 private:
  char label_ = 'a';
};

enum class StorageFormat { Dense, Coo, Csr, Csc };

std::string_view format_name(StorageFormat f);
std::optional<StorageFormat> format_from_name(std::string_view name);

// Dense fits any rank, COO needs at least one dimension, CSR/CSC exactly two.
bool format_applicable(StorageFormat f, std::size_t rank);
std::vector<StorageFormat> applicable_formats(std::size_t rank);

enum class Dtype { Int, Float };

std::string_view dtype_name(Dtype d);
std::optional<Dtype> dtype_from_name(std::string_view name);

// A named tensor occurrence: "B(i,j)" plus the storage format it should be
// kept in. Index lists carry no duplicates (diagonal accesses like B(i,i)
// are rejected at validation; their sparse semantics are compiler-specific).
struct TensorTerm {
  std::string name;  // uppercase letter plus optional digits
  std::vector<IndexVar> indices;
  StorageFormat format = StorageFormat::Dense;

  std::size_t rank() const { return indices.size(); }
  bool has_index(IndexVar v) const;

  bool operator==(const TensorTerm&) const = default;
};

// The full semantic identity of one test program: output term, ordered input
// terms, the extent of every index, and the element type. Immutable by
// convention after construction; all operations below are pure.
struct EinsumKernel {
  TensorTerm output;
  std::vector<TensorTerm> inputs;
  std::map<IndexVar, std::int64_t> dims;
  Dtype dtype = Dtype::Int;

  std::set<IndexVar> input_index_union() const;
  std::set<IndexVar> used_indices() const;
  // Indices used by inputs but absent from the output (summed over).
  std::set<IndexVar> contraction_indices() const;
  // Number of distinct input terms that use v.
  std::size_t input_occurrences(IndexVar v) const;
  // dims resolved along the term's index list. Requires every index present.
  std::vector<std::int64_t> term_shape(const TensorTerm& term) const;

  bool operator==(const EinsumKernel&) const = default;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
};

// Decision procedure for kernel validity. Checks, in order: non-empty inputs,
// distinct tensor names, no repeated index within a term, format/rank
// applicability, the output-index rule (output indices must come from the
// inputs), the connectivity rule (a contraction index must bridge at least
// two input terms — waived for single-input kernels, which are pure
// reductions), and the dimension rule (dims keys equal the used indices
// exactly, all extents positive). Never throws; invalid kernels come back
// with ok=false and one violation line per broken rule.
ValidationReport validate(const EinsumKernel& kernel);

// text -> kernel with dims unset and every format defaulting to Dense.
// Grammar: Name '(' [idx {',' idx}] ')' '=' Term {'*' Term} with
// Term = Name '(' [idx {',' idx}] ')'. Whitespace is insignificant.
// Throws ParseError carrying the byte offset of the offence.
EinsumKernel parse(std::string_view text);

// Deterministic textual form, e.g. "A(i,j) = B(i,k) * C(k,j)".
// parse(render(k)) structurally equals k up to dims and formats.
std::string render(const EinsumKernel& kernel);

}  // namespace einfuzz
